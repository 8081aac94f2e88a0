//! Property tests of the geometric invariants.

use nalgebra::Vector3;
use proptest::prelude::*;

use edgecarve::camera::{epipolar_distance, fundamental_matrix, Camera, Intrinsics, Pose};
use edgecarve::carver::{Carver, IchWeights};
use edgecarve::delaunay::{Triangulation, VertexId};
use edgecarve::manifold::{ObservedPoint, Reconstructor};
use edgecarve::predicates::{collinear, orient3d_perturbed, Sign};
use edgecarve::Point3;

fn point() -> impl Strategy<Value = Point3> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y, z)| Point3::new(x, y, z))
}

/// Points on a coarse grid, where cospherical and coplanar sets abound.
fn grid_point() -> impl Strategy<Value = Point3> {
    (0..4i32, 0..4i32, 0..4i32).prop_map(|(x, y, z)| Point3::new(x as f64, y as f64, z as f64))
}

fn camera(center: Point3) -> Camera {
    let k = Intrinsics::new(300.0, 300.0, 160.0, 120.0).unwrap();
    let pose = Pose::look_at(&center, &Point3::new(0.0, 0.0, 0.0), &Vector3::new(0.0, 1.0, 0.0)).unwrap();
    Camera::new(k, pose)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn delaunay_stays_valid(pts in prop::collection::vec(point(), 4..60)) {
        let mut tri = Triangulation::new();
        for p in pts {
            tri.insert_point(p).unwrap();
        }
        prop_assert_eq!(tri.check_structure(), Ok(()));
        prop_assert_eq!(tri.check_delaunay_brute_force(), Ok(()));
    }

    #[test]
    fn delaunay_handles_degenerate_grids(pts in prop::collection::vec(grid_point(), 4..50)) {
        let mut tri = Triangulation::new();
        for p in pts {
            tri.insert_point(p).unwrap();
        }
        prop_assert_eq!(tri.check_structure(), Ok(()));
        prop_assert_eq!(tri.check_delaunay_brute_force(), Ok(()));
    }

    #[test]
    fn perturbed_orientation_is_antisymmetric(a in grid_point(), b in grid_point(), c in grid_point(), d in grid_point()) {
        let s = orient3d_perturbed([&a, &b, &c, &d], 3);
        let swapped = orient3d_perturbed([&b, &a, &c, &d], 3);
        prop_assert_eq!(s, swapped.flip());
        prop_assert_eq!(s == Sign::Zero, collinear(&a, &b, &c));
    }

    #[test]
    fn projection_inverts_backprojection(x in point(), cz in 3.0..6.0f64, cx in -1.0..1.0f64) {
        let cam = camera(Point3::new(cx, 0.5, -cz));
        let u = cam.project(&x).unwrap();
        let depth = cam.to_camera_frame(&x).z;
        prop_assert!((cam.backproject(&u, depth) - x).norm() < 1e-9);
    }

    #[test]
    fn true_correspondences_satisfy_the_epipolar_constraint(x in point(), shift in -2.0..2.0f64) {
        let (a, b) = (camera(Point3::new(0.0, 0.3, -5.0)), camera(Point3::new(shift + 0.1, 0.3, -5.0)));
        let f = fundamental_matrix(&a, &b).unwrap();
        let d = epipolar_distance(&f, &a.project(&x).unwrap(), &b.project(&x).unwrap()).unwrap();
        prop_assert!(d < 1e-6);
    }

    #[test]
    fn weights_match_recomputation_under_interleaving(
        ops in prop::collection::vec((any::<bool>(), point(), point(), any::<prop::sample::Index>()), 1..60)
    ) {
        let mut tri = Triangulation::new();
        let mut carver = Carver::new(IchWeights::default());
        for k in 0..8 {
            let p = Point3::new(
                if k & 1 == 0 { -1.0 } else { 1.0 },
                if k & 2 == 0 { -1.0 } else { 1.0 },
                if k & 4 == 0 { -1.0 } else { 1.0 },
            );
            carver.insert_point(&mut tri, p).unwrap();
        }
        for (insert, p, c, idx) in ops {
            if insert {
                carver.insert_point(&mut tri, p).unwrap();
            } else {
                let v = VertexId(idx.index(tri.num_vertices()) as u32);
                carver.add_ray(&mut tri, c * 0.9, v).unwrap();
            }
        }
        prop_assert!(carver.weight_drift(&tri).unwrap() <= 1e-9);
    }

    #[test]
    fn keyframe_updates_keep_the_outside_set_manifold(
        batches in prop::collection::vec(prop::collection::vec(point(), 5..40), 1..4)
    ) {
        let cams = [
            Point3::new(0.0, 0.0, -3.0),
            Point3::new(2.5, 0.5, -2.0),
            Point3::new(-2.0, -0.5, 2.5),
        ];
        let mut rec = Reconstructor::new(IchWeights::default());
        for batch in batches {
            let obs: Vec<ObservedPoint> = batch
                .into_iter()
                .map(|position| ObservedPoint { position, cameras: cams.to_vec() })
                .collect();
            rec.keyframe_update(&obs).unwrap();
            prop_assert_eq!(rec.check_invariants(), Ok(()));
        }
    }
}
