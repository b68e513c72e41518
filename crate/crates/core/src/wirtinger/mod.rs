//! Reverse-mode autodiff over a flat real parameter vector, Wirtinger
//! derivative reconstruction, and the finite-difference gradient oracle.
//!
//! Backprop here never needs holomorphic primitives: every op is a real-
//! differentiable map of `(re, im)` coordinates and [`Tape::backward`] returns
//! plain real-plane gradients. For a complex-pair parameter `w` those
//! real-plane components equal `2 * (Re dL/dwbar, Im dL/dwbar)` under the
//! conjugate-Wirtinger convention; the artifact consumes only the real-pair
//! gradient, and the convention is fixed across every model family so
//! comparisons stay internally consistent.

mod params;
mod tape;

pub use params::{Grads, ParamEntry, ParamKind, ParamStore};
pub use tape::{cconv_fwd, cross_entropy_row, rconv_fwd, ConvCfg, NodeId, Shape, Tape};

use crate::cnum::Cplx;
use crate::{Error, Result};

/// Both Wirtinger derivatives of a map `f: C -> C` at a point:
/// `d_z = (df/dx - i df/dy)/2` and `d_zbar = (df/dx + i df/dy)/2`.
#[derive(Debug, Clone, Copy)]
pub struct WirtingerPair {
    pub d_z: Cplx,
    pub d_zbar: Cplx,
}

/// Reconstruct the Wirtinger pair from two central-difference directional
/// derivatives. Step size scales with `|z|` to keep cancellation in check.
pub fn numeric_wirtinger_pair(f: impl Fn(Cplx) -> Cplx, z: Cplx) -> WirtingerPair {
    let h = 1e-5 * z.abs().max(1.0);
    let fx = (f(Cplx::new(z.re + h, z.im)) - f(Cplx::new(z.re - h, z.im))).scale(0.5 / h);
    let fy = (f(Cplx::new(z.re, z.im + h)) - f(Cplx::new(z.re, z.im - h))).scale(0.5 / h);
    // d_z = (fx - i fy)/2, d_zbar = (fx + i fy)/2.
    let i_fy = Cplx::new(-fy.im, fy.re);
    WirtingerPair {
        d_z: (fx - i_fy).scale(0.5),
        d_zbar: (fx + i_fy).scale(0.5),
    }
}

/// Guarded variant: rejects evaluation points within `guard` of a known
/// non-differentiable locus (`locus_distance` is the caller-supplied distance,
/// e.g. from `activations::kink_distance`).
pub fn wirtinger_pair(
    f: impl Fn(Cplx) -> Cplx,
    z: Cplx,
    locus_distance: f64,
    guard: f64,
) -> Result<WirtingerPair> {
    if locus_distance < guard {
        return Err(Error::FlaggedSample(format!(
            "point ({}, {}) lies {locus_distance:.2e} from a non-differentiable locus (guard {guard:.2e})",
            z.re, z.im
        )));
    }
    Ok(numeric_wirtinger_pair(f, z))
}

/// Central-difference gradient check. Perturbs every coordinate of `store` by
/// `±h`, re-evaluates `loss`, and returns the max relative error against
/// `analytic` with denominator `max(|analytic|, |numeric|, 1e-8)`.
///
/// The oracle is only valid when the loss is smooth at the evaluation point;
/// callers are responsible for keeping activations away from their kinks.
pub fn finite_diff_check(
    store: &mut ParamStore,
    analytic: &[f64],
    h: f64,
    loss: impl Fn(&ParamStore) -> f64,
) -> f64 {
    assert!(h > 0.0);
    assert_eq!(analytic.len(), store.len());
    let mut worst = 0.0f64;
    for i in 0..store.len() {
        let orig = store.values()[i];
        store.values_mut()[i] = orig + h;
        let up = loss(store);
        store.values_mut()[i] = orig - h;
        let down = loss(store);
        store.values_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnum::cmul;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_is_entire() {
        let p = numeric_wirtinger_pair(|z| z, Cplx::new(0.4, -1.1));
        assert_abs_diff_eq!(p.d_z.re, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p.d_z.im, 0.0, epsilon = 1e-9);
        assert!(p.d_zbar.abs() <= 1e-9);
    }

    #[test]
    fn conjugation_is_antiholomorphic() {
        let p = numeric_wirtinger_pair(|z| z.conj(), Cplx::new(-0.8, 0.3));
        assert!(p.d_z.abs() <= 1e-9);
        assert_abs_diff_eq!(p.d_zbar.re, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p.d_zbar.im, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn square_has_analytic_derivative() {
        let z0 = Cplx::new(1.0, 1.0);
        let p = numeric_wirtinger_pair(|z| cmul(z, z), z0);
        // Oracle: d(z^2)/dz = 2z = 2+2i.
        assert_abs_diff_eq!(p.d_z.re, 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(p.d_z.im, 2.0, epsilon = 1e-8);
        assert!(p.d_zbar.abs() <= 1e-8);
    }

    #[test]
    fn holomorphic_primitives_have_tiny_conjugate_derivative() {
        // z^2, exp, tanh away from poles, on a small sample grid.
        let pts = [Cplx::new(0.3, 0.2), Cplx::new(-0.5, 0.7), Cplx::new(1.1, -0.4)];
        for z in pts {
            for f in [
                (|z: Cplx| cmul(z, z)) as fn(Cplx) -> Cplx,
                |z: Cplx| Cplx::from_polar(z.re.exp(), z.im),
                |z: Cplx| crate::activations::ctanh_checked(z).0,
            ] {
                let p = numeric_wirtinger_pair(f, z);
                assert!(p.d_zbar.abs() <= 1e-8, "residual {} at ({}, {})", p.d_zbar.abs(), z.re, z.im);
            }
        }
    }

    #[test]
    fn guard_rejects_near_locus_points() {
        let r = wirtinger_pair(|z| z, Cplx::new(1e-5, 0.0), 1e-5, 1e-3);
        assert!(matches!(r, Err(Error::FlaggedSample(_))));
    }

    #[test]
    fn finite_diff_exact_for_quadratics() {
        // Linear model, quadratic loss: central differences are exact up to
        // roundoff.
        let mut store = ParamStore::new();
        let coefs = [0.7, -1.3, 2.1];
        let mut it = coefs.iter().copied();
        store.push("w", ParamKind::Real, 3, || it.next().unwrap()).unwrap();
        let loss = |s: &ParamStore| s.values().iter().map(|v| v * v).sum::<f64>();
        let analytic: Vec<f64> = store.values().iter().map(|v| 2.0 * v).collect();
        let err = finite_diff_check(&mut store, &analytic, 1e-4, loss);
        assert!(err <= 1e-10, "error {err}");
    }
}
