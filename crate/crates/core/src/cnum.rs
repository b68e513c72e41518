//! Complex scalars, the real 2x2 embedding of complex multiplication, and
//! rotation matrices.
//!
//! Conventions fixed here and used everywhere else: channel order is
//! `(re, im)`, the imaginary unit embeds as `J = [[0, -1], [1, 0]]`, and
//! `arg` lands in `(-pi, pi]`.

use std::ops::{Add, Mul, Neg, Sub};

/// A complex scalar in Cartesian form.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct Cplx {
    pub re: f64,
    pub im: f64,
}

impl Cplx {
    pub const ZERO: Cplx = Cplx { re: 0.0, im: 0.0 };
    pub const ONE: Cplx = Cplx { re: 1.0, im: 0.0 };
    pub const I: Cplx = Cplx { re: 0.0, im: 1.0 };

    pub const fn new(re: f64, im: f64) -> Self {
        Cplx { re, im }
    }

    pub fn from_polar(r: f64, theta: f64) -> Self {
        Cplx::new(r * theta.cos(), r * theta.sin())
    }

    /// Unit phasor `e^{i*phi}`.
    pub fn cis(phi: f64) -> Self {
        Cplx::from_polar(1.0, phi)
    }

    pub fn abs(self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    /// Principal argument in `(-pi, pi]`; `arg 0 = 0`.
    pub fn arg(self) -> f64 {
        let a = self.im.atan2(self.re);
        // atan2(-0.0, x<0) yields -pi; fold onto the principal branch.
        if a == -std::f64::consts::PI {
            std::f64::consts::PI
        } else {
            a
        }
    }

    pub fn conj(self) -> Self {
        Cplx::new(self.re, -self.im)
    }

    pub fn scale(self, s: f64) -> Self {
        Cplx::new(self.re * s, self.im * s)
    }

    pub fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Complex product `(ax - by) + i(ay + bx)` for `w = a + ib`, `z = x + iy`.
pub fn cmul(w: Cplx, z: Cplx) -> Cplx {
    Cplx::new(w.re * z.re - w.im * z.im, w.re * z.im + w.im * z.re)
}

impl Add for Cplx {
    type Output = Cplx;
    fn add(self, rhs: Cplx) -> Cplx {
        Cplx::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl Sub for Cplx {
    type Output = Cplx;
    fn sub(self, rhs: Cplx) -> Cplx {
        Cplx::new(self.re - rhs.re, self.im - rhs.im)
    }
}

impl Mul for Cplx {
    type Output = Cplx;
    fn mul(self, rhs: Cplx) -> Cplx {
        cmul(self, rhs)
    }
}

impl Neg for Cplx {
    type Output = Cplx;
    fn neg(self) -> Cplx {
        Cplx::new(-self.re, -self.im)
    }
}

/// Row-major real 2x2 matrix `[[p, q], [r, s]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealMat2 {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
}

impl RealMat2 {
    pub const fn new(p: f64, q: f64, r: f64, s: f64) -> Self {
        RealMat2 { p, q, r, s }
    }

    pub const IDENTITY: RealMat2 = RealMat2::new(1.0, 0.0, 0.0, 1.0);

    /// The imaginary-unit embedding `J = [[0, -1], [1, 0]]`.
    pub const J: RealMat2 = RealMat2::new(0.0, -1.0, 1.0, 0.0);

    pub fn matmul(self, o: RealMat2) -> RealMat2 {
        RealMat2::new(
            self.p * o.p + self.q * o.r,
            self.p * o.q + self.q * o.s,
            self.r * o.p + self.s * o.r,
            self.r * o.q + self.s * o.s,
        )
    }

    /// Apply to the column vector `(x, y)`.
    pub fn apply(self, x: f64, y: f64) -> (f64, f64) {
        (self.p * x + self.q * y, self.r * x + self.s * y)
    }

    pub fn sub(self, o: RealMat2) -> RealMat2 {
        RealMat2::new(self.p - o.p, self.q - o.q, self.r - o.r, self.s - o.s)
    }

    /// Entrywise max-abs norm.
    pub fn max_abs(self) -> f64 {
        self.p.abs().max(self.q.abs()).max(self.r.abs()).max(self.s.abs())
    }
}

/// Real matrix form of multiplication by `w = a + ib`: `aI + bJ`.
pub fn as_real_matrix(w: Cplx) -> RealMat2 {
    RealMat2::new(w.re, -w.im, w.im, w.re)
}

/// Rotation by `phi`: `[[cos, -sin], [sin, cos]]` (the action of `e^{i*phi}`
/// on stacked `(re, im)` coordinates).
pub fn rotation(phi: f64) -> RealMat2 {
    let (s, c) = phi.sin_cos();
    RealMat2::new(c, -s, s, c)
}

/// True iff `W` commutes with every rotation, tested at the generator:
/// `max_abs(WJ - JW) <= tol`. Equivalent to `W` lying within `tol` of the
/// `aI + bJ` subspace.
pub fn commutes_with_rotations(w: RealMat2, tol: f64) -> bool {
    assert!(tol > 0.0, "tol must be positive");
    let wj = w.matmul(RealMat2::J);
    let jw = RealMat2::J.matmul(w);
    wj.sub(jw).max_abs() <= tol
}

/// Nearest `aI + bJ` coefficients: `a = (p+s)/2`, `b = (r-q)/2`.
pub fn project_to_complex(w: RealMat2) -> (f64, f64) {
    ((w.p + w.s) / 2.0, (w.r - w.q) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn cmul_direct_expansion() {
        let w = Cplx::new(1.0, 2.0);
        let z = Cplx::new(3.0, 4.0);
        assert_eq!(cmul(w, z), Cplx::new(-5.0, 10.0));
    }

    #[test]
    fn cmul_j_rotates_by_90_degrees() {
        assert_eq!(cmul(Cplx::I, Cplx::ONE), Cplx::I);
    }

    #[test]
    fn as_real_matrix_identity_and_j() {
        assert_eq!(as_real_matrix(Cplx::ONE), RealMat2::IDENTITY);
        assert_eq!(as_real_matrix(Cplx::I), RealMat2::J);
    }

    #[test]
    fn rotation_special_angles() {
        let r0 = rotation(0.0);
        assert!(r0.sub(RealMat2::IDENTITY).max_abs() <= 1e-15);
        let rq = rotation(FRAC_PI_2);
        assert!(rq.sub(RealMat2::J).max_abs() <= 1e-15);
        let (x, y) = rotation(FRAC_PI_4).apply(1.0, 0.0);
        assert_abs_diff_eq!(x, 2f64.sqrt() / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(y, 2f64.sqrt() / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn commutation_forward_and_counterexample() {
        let w = RealMat2::new(3.0, -2.0, 2.0, 3.0); // 3I + 2J
        assert!(commutes_with_rotations(w, 1e-12));
        let d = RealMat2::new(1.0, 0.0, 0.0, 2.0);
        assert!(!commutes_with_rotations(d, 1e-6));
    }

    #[test]
    fn arg_branch() {
        assert_eq!(Cplx::new(-1.0, 0.0).arg(), PI);
        assert_eq!(Cplx::new(-1.0, -0.0).arg(), PI);
        assert_eq!(Cplx::ZERO.arg(), 0.0);
        assert!(Cplx::new(-1.0, -1e-8).arg() < 0.0);
    }

    /// Oracle for `commutes_with_rotations`: explicit products on a phi grid.
    fn commutes_on_grid(w: RealMat2, tol: f64) -> bool {
        (0..16).all(|i| {
            let phi = 2.0 * PI * i as f64 / 16.0;
            let r = rotation(phi);
            w.matmul(r).sub(r.matmul(w)).max_abs() <= tol
        })
    }

    proptest! {
        #[test]
        fn matrix_action_matches_cmul(a in -10.0..10.0f64, b in -10.0..10.0f64,
                                      x in -10.0..10.0f64, y in -10.0..10.0f64) {
            let w = Cplx::new(a, b);
            let z = Cplx::new(x, y);
            let (mx, my) = as_real_matrix(w).apply(x, y);
            let c = cmul(w, z);
            prop_assert!((mx - c.re).abs() <= 1e-12);
            prop_assert!((my - c.im).abs() <= 1e-12);
        }

        #[test]
        fn embedding_is_ring_homomorphism(a in -5.0..5.0f64, b in -5.0..5.0f64,
                                          c in -5.0..5.0f64, d in -5.0..5.0f64) {
            let w1 = Cplx::new(a, b);
            let w2 = Cplx::new(c, d);
            let lhs = as_real_matrix(w1).matmul(as_real_matrix(w2));
            let rhs = as_real_matrix(cmul(w1, w2));
            prop_assert!(lhs.sub(rhs).max_abs() <= 1e-12);
        }

        #[test]
        fn cmul_is_multiplicative_in_modulus_and_arg(
            a in -5.0..5.0f64, b in -5.0..5.0f64, c in -5.0..5.0f64, d in -5.0..5.0f64
        ) {
            let w = Cplx::new(a, b);
            let z = Cplx::new(c, d);
            let p = cmul(w, z);
            prop_assert!((p.abs() - w.abs() * z.abs()).abs() <= 1e-12 * (1.0 + w.abs() * z.abs()));
            if w.abs() > 1e-6 && z.abs() > 1e-6 {
                let want = (w.arg() + z.arg()).rem_euclid(2.0 * PI);
                let got = p.arg().rem_euclid(2.0 * PI);
                let diff = (want - got).abs();
                let diff = diff.min(2.0 * PI - diff);
                prop_assert!(diff <= 1e-9);
            }
        }

        #[test]
        fn rotations_compose(a in -6.0..6.0f64, b in -6.0..6.0f64) {
            let lhs = rotation(a).matmul(rotation(b));
            let rhs = rotation(a + b);
            prop_assert!(lhs.sub(rhs).max_abs() <= 1e-12);
        }

        #[test]
        fn projected_matrices_commute(p in -5.0..5.0f64, q in -5.0..5.0f64,
                                      r in -5.0..5.0f64, s in -5.0..5.0f64) {
            let w = RealMat2::new(p, q, r, s);
            let (a, b) = project_to_complex(w);
            let proj = RealMat2::new(a, -b, b, a);
            prop_assert!(commutes_with_rotations(proj, 1e-12));
            prop_assert!(commutes_on_grid(proj, 1e-10));
        }

        #[test]
        fn generator_test_agrees_with_grid_oracle(p in -5.0..5.0f64, q in -5.0..5.0f64,
                                                  r in -5.0..5.0f64, s in -5.0..5.0f64) {
            let w = RealMat2::new(p, q, r, s);
            // Generator test at a loose tol and the 16-point grid oracle agree
            // away from the tolerance boundary.
            let gen = commutes_with_rotations(w, 1e-9);
            let grid = commutes_on_grid(w, 1e-9);
            if gen {
                prop_assert!(grid);
            }
            // Commuting implies proximity to the aI+bJ form.
            if gen {
                let (a, b) = project_to_complex(w);
                let proj = RealMat2::new(a, -b, b, a);
                prop_assert!(w.sub(proj).max_abs() <= 1e-9);
            }
        }
    }
}
