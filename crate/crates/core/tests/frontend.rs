//! Frontend stages against the rendered synthetic scenes, whose projected
//! 3D edges and point motion are known exactly.

use edgecarve::frontend::{canny_edges, klt_step, FrontendParams, Pyramid, TrackStatus, KLT_LEVELS};
use edgecarve::scene::{generate_scene, SceneOracle, SceneSpec};
use edgecarve::Point2;

fn segment_distance(p: &Point2, a: &Point2, b: &Point2) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared().max(1e-300)).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Image segments of the scene edges, clipped to the part in front of the
/// camera of `frame`.
fn projected_edges(s: &SceneOracle, frame: usize) -> Vec<(Point2, Point2)> {
    const NEAR: f64 = 0.01;
    let cam = &s.cameras[frame];
    s.edges
        .iter()
        .filter_map(|e| {
            let (za, zb) = (cam.to_camera_frame(&e.a).z, cam.to_camera_frame(&e.b).z);
            if za < NEAR && zb < NEAR {
                return None;
            }
            let clip = |z0: f64, z1: f64| if z0 >= NEAR { 0.0 } else { (NEAR - z0) / (z1 - z0) };
            let a = e.a + (e.b - e.a) * clip(za, zb);
            let b = e.b + (e.a - e.b) * clip(zb, za);
            Some((cam.project(&a).ok()?, cam.project(&b).ok()?))
        })
        .collect()
}

#[test]
fn canny_pixels_lie_on_projected_scene_edges() {
    let s = generate_scene(&SceneSpec::corridor(), 2, 5).unwrap();
    let fp = FrontendParams::default();
    for frame in [0, 25, 50] {
        let segs = projected_edges(&s, frame);
        let chains = canny_edges(&s.render(frame), fp.canny_low, fp.canny_high);
        let pixels: Vec<Point2> = chains
            .iter()
            .flat_map(|c| c.pixels.iter().map(|&(x, y)| Point2::new(x as f64, y as f64)))
            .collect();
        assert!(pixels.len() > 500, "frame {frame}: {} edge pixels", pixels.len());
        let near = pixels
            .iter()
            .filter(|p| segs.iter().any(|(a, b)| segment_distance(p, a, b) <= 2.0))
            .count();
        let share = near as f64 / pixels.len() as f64;
        assert!(share >= 0.9, "frame {frame}: only {:.1}% of edge pixels near a scene edge", 100.0 * share);
    }
}

#[test]
fn klt_follows_the_true_motion_of_edge_points() {
    let s = generate_scene(&SceneSpec::corridor(), 2, 5).unwrap();
    let mut errors = Vec::new();
    let mut lost = 0;
    for frame in [0, 20, 40] {
        let (prev, cur) = (&s.cameras[frame], &s.cameras[frame + 1]);
        let pts: Vec<_> = s
            .edge_points(frame, 10, 8.0)
            .into_iter()
            .filter(|x| s.observes(frame + 1, x, 8.0))
            .collect();
        let starts: Vec<Point2> = pts.iter().map(|x| prev.project(x).unwrap()).collect();
        let pp = Pyramid::new(&s.render(frame), KLT_LEVELS);
        let pc = Pyramid::new(&s.render(frame + 1), KLT_LEVELS);
        for ((_, got, status), x) in klt_step(&pp, &pc, &starts).into_iter().zip(&pts) {
            if status == TrackStatus::Lost {
                lost += 1;
                continue;
            }
            errors.push((got - cur.project(x).unwrap()).norm());
        }
    }
    errors.sort_by(f64::total_cmp);
    let median = errors[errors.len() / 2];
    let within = errors.iter().filter(|&&e| e <= 1.0).count() as f64 / errors.len() as f64;
    assert!(errors.len() > 200 && lost < errors.len(), "{} tracked, {lost} lost", errors.len());
    assert!(median < 0.5, "median error {median:.3} px");
    assert!(within >= 0.8, "{:.1}% within 1 px", 100.0 * within);
}
