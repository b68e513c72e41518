//! The six complex activations plus real ReLU, with Cauchy-Riemann residual,
//! phase-equivariance defect, and the boundedness/holomorphy scan.
//!
//! Formulas follow the standard deep-CVNN definitions: CReLU rectifies the
//! real and imaginary parts separately, ZReLU passes the open first quadrant,
//! ModReLU gates magnitude through a learnable bias, ComplexCardioid applies a
//! phase-dependent magnitude gate, Siglog squashes magnitude, and ComplexTanh
//! is the holomorphic tanh evaluated through its addition identity.
//!
//! Subgradients at non-differentiable loci take the inactive-side (zero)
//! limit, matching the usual real ReLU convention at 0.

use crate::cnum::{cmul, Cplx};
use crate::wirtinger::{numeric_wirtinger_pair, WirtingerPair};
use crate::{Error, Result};
use std::f64::consts::PI;

/// Magnitude cap applied to ComplexTanh outputs near its poles.
pub const CTANH_CLAMP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationId {
    Crelu,
    Zrelu,
    Modrelu,
    Cardioid,
    Siglog,
    Ctanh,
    RealRelu,
}

impl ActivationId {
    /// The six complex activations, in the order reports list them.
    pub const COMPLEX_SET: [ActivationId; 6] = [
        ActivationId::Crelu,
        ActivationId::Zrelu,
        ActivationId::Modrelu,
        ActivationId::Cardioid,
        ActivationId::Siglog,
        ActivationId::Ctanh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActivationId::Crelu => "crelu",
            ActivationId::Zrelu => "zrelu",
            ActivationId::Modrelu => "modrelu",
            ActivationId::Cardioid => "cardioid",
            ActivationId::Siglog => "siglog",
            ActivationId::Ctanh => "ctanh",
            ActivationId::RealRelu => "real_relu",
        }
    }

    /// ModReLU carries one learnable real bias per channel.
    pub fn has_bias(self) -> bool {
        matches!(self, ActivationId::Modrelu)
    }
}

impl std::str::FromStr for ActivationId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "crelu" => ActivationId::Crelu,
            "zrelu" => ActivationId::Zrelu,
            "modrelu" => ActivationId::Modrelu,
            "cardioid" => ActivationId::Cardioid,
            "siglog" => ActivationId::Siglog,
            "ctanh" => ActivationId::Ctanh,
            "real_relu" => ActivationId::RealRelu,
            _ => return Err(Error::Config(format!("unknown activation `{s}`"))),
        })
    }
}

impl std::fmt::Display for ActivationId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Complex tanh through `tanh(x+iy) = (tanh x + i tan y)/(1 + i tanh x tan y)`,
/// clamped to magnitude [`CTANH_CLAMP`] near the poles. Returns the value and
/// whether clamping fired.
pub fn ctanh_checked(z: Cplx) -> (Cplx, bool) {
    let tx = z.re.tanh();
    let ty = z.im.tan();
    let num = Cplx::new(tx, ty);
    let den = Cplx::new(1.0, tx * ty);
    let d2 = den.norm_sqr();
    let out = cmul(num, den.conj()).scale(1.0 / d2);
    let m = out.abs();
    if !m.is_finite() || m > CTANH_CLAMP {
        let safe = if m.is_finite() && m > 0.0 {
            out.scale(CTANH_CLAMP / m)
        } else {
            Cplx::new(CTANH_CLAMP, 0.0)
        };
        (safe, true)
    } else {
        (out, false)
    }
}

/// Apply activation `id` at `z`. `bias` must be `Some` iff `id` is ModReLU.
pub fn apply(id: ActivationId, z: Cplx, bias: Option<f64>) -> Cplx {
    apply_checked(id, z, bias).0
}

/// Like [`apply`], also reporting whether the ComplexTanh pole clamp fired.
pub fn apply_checked(id: ActivationId, z: Cplx, bias: Option<f64>) -> (Cplx, bool) {
    debug_assert_eq!(bias.is_some(), id.has_bias(), "bias present iff modrelu");
    match id {
        ActivationId::Crelu => (Cplx::new(z.re.max(0.0), z.im.max(0.0)), false),
        ActivationId::Zrelu => {
            if z.re >= 0.0 && z.im >= 0.0 {
                (z, false)
            } else {
                (Cplx::ZERO, false)
            }
        }
        ActivationId::Modrelu => {
            let b = bias.unwrap_or(0.0);
            let m = z.abs();
            if m == 0.0 || m + b <= 0.0 {
                (Cplx::ZERO, false)
            } else {
                (z.scale((m + b) / m), false)
            }
        }
        ActivationId::Cardioid => {
            let m = z.abs();
            if m == 0.0 {
                (Cplx::ZERO, false)
            } else {
                let c = 0.5 * (1.0 + z.re / m);
                (z.scale(c), false)
            }
        }
        ActivationId::Siglog => (z.scale(1.0 / (1.0 + z.abs())), false),
        ActivationId::Ctanh => ctanh_checked(z),
        ActivationId::RealRelu => (Cplx::new(z.re.max(0.0), z.im.max(0.0)), false),
    }
}

/// Real 2x2 Jacobian of an activation at `z`, plus the per-channel bias
/// partials for ModReLU. Rows are (d out_re, d out_im), columns (d re, d im).
#[derive(Debug, Clone, Copy, Default)]
pub struct Jac2 {
    pub rr: f64,
    pub ri: f64,
    pub ir: f64,
    pub ii: f64,
    pub br: f64,
    pub bi: f64,
}

/// Analytic Jacobian used by the backward pass. Conventions match
/// [`apply`]: inactive-side (zero) limits at kinks, zero past the pole clamp.
pub fn jacobian(id: ActivationId, z: Cplx, bias: Option<f64>) -> Jac2 {
    match id {
        ActivationId::Crelu | ActivationId::RealRelu => Jac2 {
            rr: if z.re > 0.0 { 1.0 } else { 0.0 },
            ii: if z.im > 0.0 { 1.0 } else { 0.0 },
            ..Default::default()
        },
        ActivationId::Zrelu => {
            let g = if z.re > 0.0 && z.im > 0.0 { 1.0 } else { 0.0 };
            Jac2 { rr: g, ii: g, ..Default::default() }
        }
        ActivationId::Modrelu => {
            let b = bias.unwrap_or(0.0);
            let m = z.abs();
            if m == 0.0 || m + b <= 0.0 {
                return Jac2::default();
            }
            let g1 = 1.0 + b / m;
            let c3 = b / (m * m * m);
            Jac2 {
                rr: g1 - c3 * z.re * z.re,
                ri: -c3 * z.re * z.im,
                ir: -c3 * z.re * z.im,
                ii: g1 - c3 * z.im * z.im,
                br: z.re / m,
                bi: z.im / m,
            }
        }
        ActivationId::Cardioid => {
            let m = z.abs();
            if m == 0.0 {
                return Jac2::default();
            }
            let m3 = m * m * m;
            let c = 0.5 * (1.0 + z.re / m);
            Jac2 {
                rr: c + 0.5 * z.re * z.im * z.im / m3,
                ri: -0.5 * z.re * z.re * z.im / m3,
                ir: 0.5 * z.im * z.im * z.im / m3,
                ii: c - 0.5 * z.re * z.im * z.im / m3,
                ..Default::default()
            }
        }
        ActivationId::Siglog => {
            let m = z.abs();
            if m == 0.0 {
                return Jac2 { rr: 1.0, ii: 1.0, ..Default::default() };
            }
            let s = 1.0 / (1.0 + m);
            let s2m = s * s / m;
            Jac2 {
                rr: s - s2m * z.re * z.re,
                ri: -s2m * z.re * z.im,
                ir: -s2m * z.re * z.im,
                ii: s - s2m * z.im * z.im,
                ..Default::default()
            }
        }
        ActivationId::Ctanh => {
            let (out, clamped) = ctanh_checked(z);
            if clamped {
                return Jac2::default();
            }
            // Holomorphic: f' = 1 - tanh^2, Jacobian is aI + bJ for f' = a+ib.
            let d = Cplx::ONE - cmul(out, out);
            Jac2 { rr: d.re, ri: -d.im, ir: d.im, ii: d.re, ..Default::default() }
        }
    }
}

/// Distance from `z` to the nearest non-differentiable locus of `id`
/// (infinite for siglog, which is real-differentiable everywhere).
pub fn kink_distance(id: ActivationId, z: Cplx, bias: Option<f64>) -> f64 {
    // Distance to the ray {b = 0, a >= 0} given coordinates (a, b).
    fn ray_dist(a: f64, b: f64) -> f64 {
        if a >= 0.0 {
            b.abs()
        } else {
            a.hypot(b)
        }
    }
    match id {
        ActivationId::Crelu | ActivationId::RealRelu => z.re.abs().min(z.im.abs()),
        ActivationId::Zrelu => ray_dist(z.re, z.im).min(ray_dist(z.im, z.re)),
        ActivationId::Modrelu => {
            let b = bias.unwrap_or(0.0);
            let m = z.abs();
            if b < 0.0 {
                m.min((m + b).abs())
            } else {
                m
            }
        }
        ActivationId::Cardioid => z.abs(),
        ActivationId::Siglog => f64::INFINITY,
        ActivationId::Ctanh => {
            // Poles at i(pi/2 + n*pi).
            let r = (z.im - PI / 2.0).rem_euclid(PI);
            let d_im = r.min(PI - r);
            z.re.hypot(d_im)
        }
    }
}

/// Exclusion radius around kinks/poles for numeric derivative probes.
pub fn guard_radius(id: ActivationId) -> f64 {
    match id {
        ActivationId::Ctanh => 0.5,
        _ => 1e-3,
    }
}

/// Cauchy-Riemann residual `|d sigma / d zbar|` at `z`, evaluated through the
/// numeric Wirtinger pair. Errors if `z` sits inside the kink guard.
pub fn cr_residual(id: ActivationId, z: Cplx, bias: Option<f64>) -> Result<f64> {
    let pair = activation_wirtinger_pair(id, z, bias)?;
    Ok(pair.d_zbar.abs())
}

/// Both Wirtinger derivatives of the activation at `z`.
pub fn activation_wirtinger_pair(
    id: ActivationId,
    z: Cplx,
    bias: Option<f64>,
) -> Result<WirtingerPair> {
    let dist = kink_distance(id, z, bias);
    if dist < guard_radius(id) {
        return Err(Error::FlaggedSample(format!(
            "{id} at ({}, {}) is {dist:.2e} from a non-differentiable locus",
            z.re, z.im
        )));
    }
    Ok(numeric_wirtinger_pair(|w| apply(id, w, bias), z))
}

/// `|sigma(e^{i phi} z) - e^{i phi} sigma(z)|`.
pub fn phase_equivariance_defect(id: ActivationId, z: Cplx, phi: f64, bias: Option<f64>) -> f64 {
    let rot = Cplx::cis(phi);
    let lhs = apply(id, cmul(rot, z), bias);
    let rhs = cmul(rot, apply(id, z, bias));
    (lhs - rhs).abs()
}

/// Per-activation summary over the diagnostic grid plus gradient norms of the
/// reference model at initialization.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TrilemmaReport {
    pub activation: ActivationId,
    pub grad_norm_mean: f64,
    pub grad_norm_std: f64,
    pub cr_median: f64,
    pub cr_p95: f64,
    pub max_abs: f64,
    pub bounded_on_grid: bool,
}

/// Default grid resolution: 121 x 121 over `[-3, 3]^2` (step 0.05).
pub const TRILEMMA_GRID_N: usize = 121;
/// Boundedness threshold; tanh's pole divergence exceeds it while every
/// bounded activation stays below sqrt(18).
pub const TRILEMMA_BOUND: f64 = 10.0;

/// Scan one activation over the `[-3,3]^2` grid and collect gradient norms of
/// the reference model at initialization for each seed in `init_seeds`.
/// `grad_norm_fn(id, seed)` supplies the model-side norm (wired by the suite
/// layer to keep this module free of model dependencies).
pub fn trilemma_scan(
    id: ActivationId,
    n_grid: usize,
    init_seeds: &[u64],
    grad_norm_fn: impl Fn(ActivationId, u64) -> f64,
) -> TrilemmaReport {
    assert!(n_grid >= 64, "grid resolution must be at least 64x64");
    let bias = if id.has_bias() { Some(0.0) } else { None };
    let mut residuals = Vec::new();
    let mut max_abs: f64 = 0.0;
    for iy in 0..n_grid {
        for ix in 0..n_grid {
            let x = -3.0 + 6.0 * ix as f64 / (n_grid - 1) as f64;
            let y = -3.0 + 6.0 * iy as f64 / (n_grid - 1) as f64;
            let z = Cplx::new(x, y);
            let (v, _) = apply_checked(id, z, bias);
            max_abs = max_abs.max(v.abs());
            if let Ok(r) = cr_residual(id, z, bias) {
                residuals.push(r);
            }
        }
    }
    residuals.sort_by(|a, b| a.total_cmp(b));
    let pick = |q: f64| -> f64 {
        if residuals.is_empty() {
            return f64::NAN;
        }
        let idx = ((residuals.len() - 1) as f64 * q).round() as usize;
        residuals[idx]
    };
    let norms: Vec<f64> = init_seeds.iter().map(|&s| grad_norm_fn(id, s)).collect();
    let mean = norms.iter().sum::<f64>() / norms.len().max(1) as f64;
    let var = norms.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / (norms.len().saturating_sub(1)).max(1) as f64;
    TrilemmaReport {
        activation: id,
        grad_norm_mean: mean,
        grad_norm_std: var.sqrt(),
        cr_median: pick(0.5),
        cr_p95: pick(0.95),
        max_abs,
        bounded_on_grid: max_abs <= TRILEMMA_BOUND,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn apply_matches_definitions() {
        assert_eq!(apply(ActivationId::Crelu, Cplx::new(-1.0, 2.0), None), Cplx::new(0.0, 2.0));
        assert_eq!(apply(ActivationId::Zrelu, Cplx::new(1.0, 1.0), None), Cplx::new(1.0, 1.0));
        assert_eq!(apply(ActivationId::Zrelu, Cplx::new(-1.0, 1.0), None), Cplx::ZERO);
        let s = apply(ActivationId::Siglog, Cplx::new(3.0, 4.0), None);
        assert_abs_diff_eq!(s.re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.im, 4.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.abs(), 5.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn modrelu_gates_magnitude() {
        // b = -0.5 kills magnitudes below 0.5.
        let z = Cplx::new(0.3, 0.0);
        assert_eq!(apply(ActivationId::Modrelu, z, Some(-0.5)), Cplx::ZERO);
        let z = Cplx::new(3.0, 4.0);
        let out = apply(ActivationId::Modrelu, z, Some(-0.5));
        assert_abs_diff_eq!(out.abs(), 4.5, epsilon = 1e-12);
        assert_abs_diff_eq!(out.arg(), z.arg(), epsilon = 1e-12);
        assert_eq!(apply(ActivationId::Modrelu, Cplx::ZERO, Some(0.5)), Cplx::ZERO);
    }

    #[test]
    fn every_activation_fixes_origin() {
        for id in ActivationId::COMPLEX_SET {
            let bias = if id.has_bias() { Some(0.0) } else { None };
            assert_eq!(apply(id, Cplx::ZERO, bias), Cplx::ZERO, "{id}");
        }
    }

    #[test]
    fn zrelu_crelu_identity_on_open_first_quadrant() {
        let z = Cplx::new(0.7, 2.3);
        assert_eq!(apply(ActivationId::Zrelu, z, None), z);
        assert_eq!(apply(ActivationId::Crelu, z, None), z);
    }

    #[test]
    fn phase_preserving_activations() {
        let zs = [Cplx::new(1.2, -0.7), Cplx::new(-2.0, 0.4), Cplx::new(0.1, 3.0)];
        for z in zs {
            for (id, bias) in [
                (ActivationId::Cardioid, None),
                (ActivationId::Siglog, None),
                (ActivationId::Modrelu, Some(0.25)),
            ] {
                let out = apply(id, z, bias);
                if out.abs() > 0.0 {
                    assert_abs_diff_eq!(out.arg(), z.arg(), epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn ctanh_is_locally_holomorphic() {
        let r = cr_residual(ActivationId::Ctanh, Cplx::new(0.5, 0.3), None).unwrap();
        assert!(r <= 1e-8, "ctanh residual {r}");
    }

    #[test]
    fn ctanh_matches_real_tanh_on_axis() {
        let (v, clamped) = ctanh_checked(Cplx::new(0.7, 0.0));
        assert!(!clamped);
        assert_abs_diff_eq!(v.re, 0.7f64.tanh(), epsilon = 1e-15);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-15);
        // Pure imaginary: tanh(iy) = i tan y.
        let (v, _) = ctanh_checked(Cplx::new(0.0, 0.4));
        assert_abs_diff_eq!(v.im, 0.4f64.tan(), epsilon = 1e-12);
    }

    #[test]
    fn ctanh_clamps_near_pole() {
        let (v, clamped) = ctanh_checked(Cplx::new(0.0, FRAC_PI_2));
        assert!(clamped);
        assert!(v.abs() <= CTANH_CLAMP * (1.0 + 1e-12));
    }

    #[test]
    fn crelu_residual_in_fourth_quadrant_is_half() {
        // In quadrant IV crelu(z) = x = (z + zbar)/2, so d/dzbar = 1/2.
        let r = cr_residual(ActivationId::Crelu, Cplx::new(1.0, -1.0), None).unwrap();
        assert_abs_diff_eq!(r, 0.5, epsilon = 1e-7);
    }

    #[test]
    fn siglog_is_never_holomorphic_off_origin() {
        for z in [Cplx::new(1.0, 0.0), Cplx::new(0.0, 1.0), Cplx::new(-0.6, 0.8)] {
            let r = cr_residual(ActivationId::Siglog, z, None).unwrap();
            // Analytic value at |z|=1 is 1/8.
            assert_abs_diff_eq!(r, 0.125, epsilon = 1e-6);
        }
    }

    #[test]
    fn kink_guard_flags_bad_samples() {
        let err = cr_residual(ActivationId::Crelu, Cplx::new(1e-6, 1.0), None);
        assert!(matches!(err, Err(Error::FlaggedSample(_))));
    }

    #[test]
    fn equivariance_defects() {
        let z = Cplx::new(0.9, -1.4);
        for phi in [0.3, 1.2, 2.9] {
            assert_abs_diff_eq!(
                phase_equivariance_defect(ActivationId::Modrelu, z, phi, Some(0.2)),
                0.0,
                epsilon = 1e-12
            );
            assert_abs_diff_eq!(
                phase_equivariance_defect(ActivationId::Siglog, z, phi, None),
                0.0,
                epsilon = 1e-12
            );
        }
        // Oracle: direct evaluation of both sides for crelu at z=1, phi=3pi/4.
        let d = phase_equivariance_defect(ActivationId::Crelu, Cplx::ONE, 3.0 * PI / 4.0, None);
        assert_abs_diff_eq!(d, (2f64).sqrt() / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn jacobian_matches_numeric_derivatives() {
        let probes = [
            Cplx::new(0.8, 0.6),
            Cplx::new(-1.3, 0.4),
            Cplx::new(0.5, -2.0),
            Cplx::new(-0.7, -0.9),
        ];
        for id in ActivationId::COMPLEX_SET {
            let bias = if id.has_bias() { Some(0.3) } else { None };
            for z in probes {
                if kink_distance(id, z, bias) < guard_radius(id) {
                    continue;
                }
                let h = 1e-6;
                let jac = jacobian(id, z, bias);
                let fx = (apply(id, z + Cplx::new(h, 0.0), bias)
                    - apply(id, z - Cplx::new(h, 0.0), bias))
                .scale(0.5 / h);
                let fy = (apply(id, z + Cplx::new(0.0, h), bias)
                    - apply(id, z - Cplx::new(0.0, h), bias))
                .scale(0.5 / h);
                assert_abs_diff_eq!(jac.rr, fx.re, epsilon = 1e-6);
                assert_abs_diff_eq!(jac.ir, fx.im, epsilon = 1e-6);
                assert_abs_diff_eq!(jac.ri, fy.re, epsilon = 1e-6);
                assert_abs_diff_eq!(jac.ii, fy.im, epsilon = 1e-6);
                if id.has_bias() {
                    let hb = 1e-6;
                    let fb = (apply(id, z, Some(0.3 + hb)) - apply(id, z, Some(0.3 - hb)))
                        .scale(0.5 / hb);
                    assert_abs_diff_eq!(jac.br, fb.re, epsilon = 1e-6);
                    assert_abs_diff_eq!(jac.bi, fb.im, epsilon = 1e-6);
                }
            }
        }
    }
}
