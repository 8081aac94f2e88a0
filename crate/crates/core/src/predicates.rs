//! Exact orientation and in-sphere signs.
//!
//! The floating-point determinants are evaluated with Shewchuk's adaptive
//! expansions (`robust` crate): a fast filtered path, falling back to exact
//! arithmetic only when the error bound is crossed. On top of the raw signs
//! this module provides the symbolic-perturbation variants used to break
//! ties deterministically.
//!
//! Conventions: `orient3d(a, b, c, d)` is the sign of
//! `det[b - a, c - a, d - a]`, positive when `d` lies on the side of plane
//! `abc` that `(b - a) x (c - a)` points to. `insphere(a, b, c, d, e)` is
//! positive when `e` lies strictly inside the sphere through a positively
//! oriented `abcd`.

use robust::{Coord, Coord3D};

use crate::Point3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    pub fn of(v: f64) -> Sign {
        if v > 0.0 {
            Sign::Positive
        } else if v < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Negative => Sign::Positive,
            Sign::Zero => Sign::Zero,
            Sign::Positive => Sign::Negative,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Sign::Positive
    }
}

#[inline]
fn c3(p: &Point3) -> Coord3D<f64> {
    Coord3D {
        x: p.x,
        y: p.y,
        z: p.z,
    }
}

#[inline]
fn c2(x: f64, y: f64) -> Coord<f64> {
    Coord { x, y }
}

/// Relative error bound of the floating-point orientation determinant,
/// `(7 + 56 u) u` with unit roundoff `u = 2^-53`.
const ORIENT3D_ERRBOUND: f64 = (7.0 + 56.0 * (f64::EPSILON / 2.0)) * (f64::EPSILON / 2.0);

/// Exact sign of `det[b - a, c - a, d - a]`.
#[inline]
pub fn orient3d(a: &Point3, b: &Point3, c: &Point3, d: &Point3) -> Sign {
    // float filter; robust::orient3d resolves the uncertain cases and uses
    // the opposite handedness
    let (adx, ady, adz) = (a.x - d.x, a.y - d.y, a.z - d.z);
    let (bdx, bdy, bdz) = (b.x - d.x, b.y - d.y, b.z - d.z);
    let (cdx, cdy, cdz) = (c.x - d.x, c.y - d.y, c.z - d.z);
    let (bdxcdy, cdxbdy) = (bdx * cdy, cdx * bdy);
    let (cdxady, adxcdy) = (cdx * ady, adx * cdy);
    let (adxbdy, bdxady) = (adx * bdy, bdx * ady);
    let det = adz * (bdxcdy - cdxbdy) + bdz * (cdxady - adxcdy) + cdz * (adxbdy - bdxady);
    let permanent = (bdxcdy.abs() + cdxbdy.abs()) * adz.abs()
        + (cdxady.abs() + adxcdy.abs()) * bdz.abs()
        + (adxbdy.abs() + bdxady.abs()) * cdz.abs();
    if det.abs() > ORIENT3D_ERRBOUND * permanent {
        return Sign::of(-det);
    }
    Sign::of(-robust::orient3d(c3(a), c3(b), c3(c), c3(d)))
}

/// Exact in-sphere sign for a positively oriented `abcd`.
#[inline]
pub fn insphere(a: &Point3, b: &Point3, c: &Point3, d: &Point3, e: &Point3) -> Sign {
    // robust::insphere expects its own positive orientation, which is ours
    // negated; the sign therefore flips.
    Sign::of(-robust::insphere(c3(a), c3(b), c3(c), c3(d), c3(e)))
}

/// Exact signs of the three components of `(q1 - q0) x (q2 - q0)`.
fn cross_signs(q0: &Point3, q1: &Point3, q2: &Point3) -> [Sign; 3] {
    let x = robust::orient2d(c2(q0.y, q0.z), c2(q1.y, q1.z), c2(q2.y, q2.z));
    let y = robust::orient2d(c2(q0.z, q0.x), c2(q1.z, q1.x), c2(q2.z, q2.x));
    let z = robust::orient2d(c2(q0.x, q0.y), c2(q1.x, q1.y), c2(q2.x, q2.y));
    [Sign::of(x), Sign::of(y), Sign::of(z)]
}

/// True when the three points lie on a common line (exact).
pub fn collinear(a: &Point3, b: &Point3, c: &Point3) -> bool {
    cross_signs(a, b, c).iter().all(|&s| s == Sign::Zero)
}

/// Orientation of `pts` with `pts[moving]` displaced by the infinitesimal
/// `(e, e^2, e^3)`. Equals [`orient3d`] whenever that is non-zero; returns
/// `Zero` only when the other three points are collinear.
pub fn orient3d_perturbed(pts: [&Point3; 4], moving: usize) -> Sign {
    let s = orient3d(pts[0], pts[1], pts[2], pts[3]);
    if s != Sign::Zero {
        return s;
    }
    // orient(.., p_i, ..) = (-1)^(3 - i) orient(q0, q1, q2, p_i), whose
    // gradient in p_i is (q1 - q0) x (q2 - q0).
    let mut q = [pts[0]; 3];
    let mut k = 0;
    for (i, p) in pts.iter().enumerate() {
        if i != moving {
            q[k] = p;
            k += 1;
        }
    }
    let parity_flip = (3 - moving) % 2 == 1;
    for s in cross_signs(q[0], q[1], q[2]) {
        if s != Sign::Zero {
            return if parity_flip { s.flip() } else { s };
        }
    }
    Sign::Zero
}

/// In-sphere test with symbolic perturbation.
///
/// Each point carries a rank (vertex ids, with the query ranked by its
/// would-be id); higher ranks are perturbed more strongly. For a positively
/// oriented cell the result is never `Zero`.
pub fn insphere_perturbed(cell: [(&Point3, u64); 4], query: (&Point3, u64)) -> Sign {
    let [p0, p1, p2, p3] = [cell[0].0, cell[1].0, cell[2].0, cell[3].0];
    let p = query.0;
    let s = insphere(p0, p1, p2, p3, p);
    if s != Sign::Zero {
        return s;
    }
    // slot 4 is the query
    let mut order = [0usize, 1, 2, 3, 4];
    let rank = |i: usize| if i == 4 { query.1 } else { cell[i].1 };
    order.sort_by_key(|&i| std::cmp::Reverse(rank(i)));
    for &slot in order.iter().take(3) {
        let o = match slot {
            4 => return Sign::Negative,
            3 => orient3d(p0, p1, p2, p),
            2 => orient3d(p0, p1, p, p3),
            1 => orient3d(p0, p, p2, p3),
            _ => orient3d(p, p1, p2, p3),
        };
        if o != Sign::Zero {
            return o;
        }
    }
    // unreachable for non-flat cells
    Sign::Negative
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::{Signed, Zero};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q(v: f64) -> BigRational {
        BigRational::from_float(v).unwrap()
    }

    fn det3(m: [[BigRational; 3]; 3]) -> BigRational {
        &m[0][0] * (&m[1][1] * &m[2][2] - &m[1][2] * &m[2][1])
            - &m[0][1] * (&m[1][0] * &m[2][2] - &m[1][2] * &m[2][0])
            + &m[0][2] * (&m[1][0] * &m[2][1] - &m[1][1] * &m[2][0])
    }

    fn sub(a: &Point3, b: &Point3) -> [BigRational; 3] {
        [q(a.x) - q(b.x), q(a.y) - q(b.y), q(a.z) - q(b.z)]
    }

    fn rational_orient(a: &Point3, b: &Point3, c: &Point3, d: &Point3) -> Sign {
        let v = det3([sub(b, a), sub(c, a), sub(d, a)]);
        sign_of(&v)
    }

    fn sign_of(v: &BigRational) -> Sign {
        if v.is_zero() {
            Sign::Zero
        } else if v.is_positive() {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }

    /// Lifted 4x4 determinant, expanded by cofactors over exact rationals.
    fn rational_insphere(a: &Point3, b: &Point3, c: &Point3, d: &Point3, e: &Point3) -> Sign {
        let rows: Vec<[BigRational; 4]> = [a, b, c, d]
            .iter()
            .map(|p| {
                let v = sub(p, e);
                let l = &v[0] * &v[0] + &v[1] * &v[1] + &v[2] * &v[2];
                [v[0].clone(), v[1].clone(), v[2].clone(), l]
            })
            .collect();
        let mut det = BigRational::from_integer(BigInt::from(0));
        for col in 0..4 {
            let minor: Vec<[BigRational; 3]> = rows[1..]
                .iter()
                .map(|r| {
                    let mut m = Vec::with_capacity(3);
                    for (j, x) in r.iter().enumerate() {
                        if j != col {
                            m.push(x.clone());
                        }
                    }
                    [m[0].clone(), m[1].clone(), m[2].clone()]
                })
                .collect();
            let term = &rows[0][col] * det3([minor[0].clone(), minor[1].clone(), minor[2].clone()]);
            if col % 2 == 0 {
                det += term;
            } else {
                det -= term;
            }
        }
        // det[a-e, b-e, c-e, d-e | lift] is positive-inside for cells with
        // det[a-e, b-e, c-e] ... orientation; normalise by our orient3d.
        let o = rational_orient(a, b, c, d);
        let s = sign_of(&det);
        match o {
            Sign::Positive => s.flip(),
            Sign::Negative => s,
            Sign::Zero => Sign::Zero,
        }
    }

    fn p(x: f64, y: f64, z: f64) -> Point3 {
        Point3::new(x, y, z)
    }

    #[test]
    fn unit_tetra_conventions() {
        let (a, b, c, d) = (p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.), p(0., 0., 1.));
        assert_eq!(orient3d(&a, &b, &c, &d), Sign::Positive);
        assert_eq!(orient3d(&a, &c, &b, &d), Sign::Negative);
        let centroid = p(0.25, 0.25, 0.25);
        assert_eq!(insphere(&a, &b, &c, &d, &centroid), Sign::Positive);
        assert_eq!(insphere(&a, &b, &c, &d, &p(3., 3., 3.)), Sign::Negative);
        // (1,1,1) is on the circumsphere centred at (.5,.5,.5)
        assert_eq!(insphere(&a, &b, &c, &d, &p(1., 1., 1.)), Sign::Zero);
    }

    #[test]
    fn coplanar_points_are_zero() {
        let s = orient3d(&p(0., 0., 0.), &p(1., 0., 0.), &p(0., 1., 0.), &p(3., 7., 0.));
        assert_eq!(s, Sign::Zero);
        // nearly coplanar in a way that naive float evaluation gets wrong
        let a = p(0.1, 0.1, 0.1);
        let b = p(0.3, 0.3, 0.3);
        let c = p(0.7, 0.7, 0.7);
        let d = p(1.0, 2.0, 3.0);
        assert_eq!(orient3d(&a, &b, &c, &d), rational_orient(&a, &b, &c, &d));
    }

    #[test]
    fn matches_rational_oracle_on_random_quintuples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for i in 0..10_000 {
            let mut pts: Vec<Point3> = (0..5)
                .map(|_| p(rng.random(), rng.random(), rng.random()))
                .collect();
            if i % 3 == 0 {
                // near-degenerate: snap to a coarse grid so ties happen
                for q in pts.iter_mut() {
                    *q = p((q.x * 4.0).round() / 4.0, (q.y * 4.0).round() / 4.0, (q.z * 4.0).round() / 4.0);
                }
            }
            let [a, b, c, d, e] = [pts[0], pts[1], pts[2], pts[3], pts[4]];
            assert_eq!(orient3d(&a, &b, &c, &d), rational_orient(&a, &b, &c, &d));
            let o = orient3d(&a, &b, &c, &d);
            if o != Sign::Zero {
                let (a, b) = if o == Sign::Positive { (a, b) } else { (b, a) };
                assert_eq!(insphere(&a, &b, &c, &d, &e), rational_insphere(&a, &b, &c, &d, &e));
            }
        }
    }

    #[test]
    fn perturbed_insphere_breaks_cospherical_ties() {
        let (a, b, c, d) = (p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.), p(0., 0., 1.));
        let e = p(1., 1., 1.);
        // the query ranked last is pushed outside
        let s = insphere_perturbed([(&a, 0), (&b, 1), (&c, 2), (&d, 3)], (&e, 4));
        assert_eq!(s, Sign::Negative);
        // ranked below a cell vertex the outcome comes from an orientation
        let s = insphere_perturbed([(&a, 0), (&b, 1), (&c, 2), (&d, 5)], (&e, 4));
        assert_ne!(s, Sign::Zero);
    }

    #[test]
    fn perturbed_orientation_never_zero_for_generic_triangle() {
        let a = p(0., 0., 0.);
        let b = p(1., 0., 0.);
        let c = p(0., 1., 0.);
        let d = p(0.3, 0.3, 0.0);
        for moving in 0..4 {
            let s = orient3d_perturbed([&a, &b, &c, &d], moving);
            assert_ne!(s, Sign::Zero);
        }
        // moving the apex above/below via the z component of the normal
        assert_eq!(orient3d_perturbed([&a, &b, &c, &d], 3), Sign::Positive);
    }

    #[test]
    fn perturbed_orientation_is_consistent_with_a_tiny_real_move() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            // four coplanar integer points; perturb one by a small real step
            let pts: Vec<Point3> = (0..4)
                .map(|_| p(rng.random_range(0..8) as f64, rng.random_range(0..8) as f64, 0.0))
                .collect();
            let pts: Vec<Point3> = pts
                .iter()
                .map(|q| p(q.x, q.y, q.x * 0.5 - q.y * 0.25))
                .collect();
            for moving in 0..4 {
                let s = orient3d_perturbed([&pts[0], &pts[1], &pts[2], &pts[3]], moving);
                if s == Sign::Zero {
                    continue;
                }
                let mut moved = pts.clone();
                let e = 1e-3;
                moved[moving] += nalgebra::Vector3::new(e, e * e, e * e * e);
                let r = rational_orient(&moved[0], &moved[1], &moved[2], &moved[3]);
                assert_eq!(s, r);
            }
        }
    }
}
