//! Complex and real 1-D convolution layers, the aI+bJ-constrained stacked-
//! real equivalence witness, pooling, and the real classifier head.
//!
//! `cconv_forward` multiplies each tap with [`cmul`]; the constrained witness
//! routes the same taps through a generic real convolution whose 2x2 blocks
//! are `[[a, -b], [b, a]]`. The two paths share no arithmetic, which is what
//! makes their agreement a meaningful equivalence check.

use crate::cnum::{cmul, Cplx};
use crate::{Error, Result};

/// Channel-major complex sequence `[ch][t]`.
#[derive(Debug, Clone)]
pub struct CArr {
    pub ch: usize,
    pub t: usize,
    pub data: Vec<Cplx>,
}

impl CArr {
    pub fn new(ch: usize, t: usize, data: Vec<Cplx>) -> Self {
        assert_eq!(data.len(), ch * t);
        CArr { ch, t, data }
    }

    pub fn at(&self, c: usize, i: usize) -> Cplx {
        self.data[c * self.t + i]
    }
}

/// Channel-major real sequence `[ch][t]`.
#[derive(Debug, Clone)]
pub struct RArr {
    pub ch: usize,
    pub t: usize,
    pub data: Vec<f64>,
}

impl RArr {
    pub fn new(ch: usize, t: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), ch * t);
        RArr { ch, t, data }
    }

    pub fn at(&self, c: usize, i: usize) -> f64 {
        self.data[c * self.t + i]
    }
}

/// Complex 1-D convolution layer. Weights are `[out][in][k]`, channel-major.
#[derive(Debug, Clone)]
pub struct ComplexConv1d {
    pub in_ch: usize,
    pub out_ch: usize,
    pub k: usize,
    pub stride: usize,
    pub weights: Vec<Cplx>,
    pub bias: Vec<Cplx>,
}

impl ComplexConv1d {
    pub fn new(in_ch: usize, out_ch: usize, k: usize, stride: usize) -> Self {
        assert!(k % 2 == 1, "kernel size must be odd");
        assert!(stride >= 1);
        ComplexConv1d {
            in_ch,
            out_ch,
            k,
            stride,
            weights: vec![Cplx::ZERO; out_ch * in_ch * k],
            bias: vec![Cplx::ZERO; out_ch],
        }
    }

    pub fn weight(&self, oc: usize, ic: usize, j: usize) -> Cplx {
        self.weights[(oc * self.in_ch + ic) * self.k + j]
    }

    /// Real scalars carried by this layer: 2 per complex weight and bias.
    pub fn param_count(&self) -> usize {
        2 * (self.out_ch * self.in_ch * self.k + self.out_ch)
    }
}

/// Real 1-D convolution layer. Weights are `[out][in][k]`.
#[derive(Debug, Clone)]
pub struct RealConv1d {
    pub in_ch: usize,
    pub out_ch: usize,
    pub k: usize,
    pub stride: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl RealConv1d {
    pub fn new(in_ch: usize, out_ch: usize, k: usize, stride: usize) -> Self {
        assert!(k % 2 == 1, "kernel size must be odd");
        assert!(stride >= 1);
        RealConv1d {
            in_ch,
            out_ch,
            k,
            stride,
            weights: vec![0.0; out_ch * in_ch * k],
            bias: vec![0.0; out_ch],
        }
    }

    pub fn param_count(&self) -> usize {
        self.out_ch * self.in_ch * self.k + self.out_ch
    }
}

pub fn conv_out_len(t: usize, k: usize, stride: usize) -> Result<usize> {
    if t < k {
        return Err(Error::Shape(format!("sequence length {t} shorter than kernel {k}")));
    }
    Ok((t - k) / stride + 1)
}

/// Valid-mode complex convolution; every tap multiplication goes through
/// [`cmul`].
pub fn cconv_forward(layer: &ComplexConv1d, x: &CArr) -> Result<CArr> {
    if x.ch != layer.in_ch {
        return Err(Error::Shape(format!(
            "expected {} input channels, got {}",
            layer.in_ch, x.ch
        )));
    }
    let t_out = conv_out_len(x.t, layer.k, layer.stride)?;
    let mut out = vec![Cplx::ZERO; layer.out_ch * t_out];
    for oc in 0..layer.out_ch {
        for ti in 0..t_out {
            let mut acc = layer.bias[oc];
            for ic in 0..layer.in_ch {
                for j in 0..layer.k {
                    acc = acc + cmul(layer.weight(oc, ic, j), x.at(ic, ti * layer.stride + j));
                }
            }
            out[oc * t_out + ti] = acc;
        }
    }
    Ok(CArr::new(layer.out_ch, t_out, out))
}

/// Valid-mode real convolution.
pub fn rconv_forward(layer: &RealConv1d, x: &RArr) -> Result<RArr> {
    if x.ch != layer.in_ch {
        return Err(Error::Shape(format!(
            "expected {} input channels, got {}",
            layer.in_ch, x.ch
        )));
    }
    let t_out = conv_out_len(x.t, layer.k, layer.stride)?;
    let mut out = vec![0.0; layer.out_ch * t_out];
    for oc in 0..layer.out_ch {
        for ti in 0..t_out {
            let mut acc = layer.bias[oc];
            for ic in 0..layer.in_ch {
                for j in 0..layer.k {
                    acc += layer.weights[(oc * layer.in_ch + ic) * layer.k + j]
                        * x.at(ic, ti * layer.stride + j);
                }
            }
            out[oc * t_out + ti] = acc;
        }
    }
    Ok(RArr::new(layer.out_ch, t_out, out))
}

/// Expand complex taps `(a, b)` into the 2x2-block real convolution
/// `[[a, -b], [b, a]]` over stacked channels `(re1, im1, re2, im2, ...)`.
pub fn constrained_real_conv(layer: &ComplexConv1d) -> RealConv1d {
    let mut real = RealConv1d::new(2 * layer.in_ch, 2 * layer.out_ch, layer.k, layer.stride);
    let rin = real.in_ch;
    for oc in 0..layer.out_ch {
        for ic in 0..layer.in_ch {
            for j in 0..layer.k {
                let w = layer.weight(oc, ic, j);
                real.weights[((2 * oc) * rin + 2 * ic) * layer.k + j] = w.re;
                real.weights[((2 * oc) * rin + 2 * ic + 1) * layer.k + j] = -w.im;
                real.weights[((2 * oc + 1) * rin + 2 * ic) * layer.k + j] = w.im;
                real.weights[((2 * oc + 1) * rin + 2 * ic + 1) * layer.k + j] = w.re;
            }
        }
    }
    for oc in 0..layer.out_ch {
        real.bias[2 * oc] = layer.bias[oc].re;
        real.bias[2 * oc + 1] = layer.bias[oc].im;
    }
    real
}

/// Run the aI+bJ-constrained stacked-real convolution built from `layer`'s
/// taps on an already-stacked input.
pub fn constrained_real_forward(layer: &ComplexConv1d, x_stacked: &RArr) -> Result<RArr> {
    if x_stacked.ch != 2 * layer.in_ch {
        return Err(Error::Shape(format!(
            "stacked input must carry {} channels (re, im interleaved), got {}",
            2 * layer.in_ch,
            x_stacked.ch
        )));
    }
    rconv_forward(&constrained_real_conv(layer), x_stacked)
}

/// Interleave a complex sequence into stacked-real channel layout.
pub fn to_stacked(x: &CArr) -> RArr {
    let mut data = vec![0.0; x.ch * 2 * x.t];
    for c in 0..x.ch {
        for i in 0..x.t {
            data[(2 * c) * x.t + i] = x.at(c, i).re;
            data[(2 * c + 1) * x.t + i] = x.at(c, i).im;
        }
    }
    RArr::new(2 * x.ch, x.t, data)
}

/// Per-channel mean over time.
pub fn global_avg_pool_c(x: &CArr) -> Vec<Cplx> {
    (0..x.ch)
        .map(|c| {
            let mut acc = Cplx::ZERO;
            for i in 0..x.t {
                acc = acc + x.at(c, i);
            }
            acc.scale(1.0 / x.t as f64)
        })
        .collect()
}

/// Per-channel mean over time.
pub fn global_avg_pool_r(x: &RArr) -> Vec<f64> {
    (0..x.ch)
        .map(|c| x.data[c * x.t..(c + 1) * x.t].iter().sum::<f64>() / x.t as f64)
        .collect()
}

/// Two-layer real classifier head: `dense -> ReLU -> dense`. The first dense
/// is the instrumented `head.weight`/`head.bias` pair.
#[derive(Debug, Clone)]
pub struct Head {
    pub in_dim: usize,
    pub hidden: usize,
    pub classes: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Head {
    pub fn new(in_dim: usize, hidden: usize, classes: usize) -> Self {
        Head {
            in_dim,
            hidden,
            classes,
            w1: vec![0.0; hidden * in_dim],
            b1: vec![0.0; hidden],
            w2: vec![0.0; classes * hidden],
            b2: vec![0.0; classes],
        }
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }
}

/// `dense(ReLU(dense(features)))` logits.
pub fn head_forward(head: &Head, features: &[f64]) -> Result<Vec<f64>> {
    if features.len() != head.in_dim {
        return Err(Error::Shape(format!(
            "head expects {} features, got {}",
            head.in_dim,
            features.len()
        )));
    }
    let mut hidden = vec![0.0; head.hidden];
    for (h, hv) in hidden.iter_mut().enumerate() {
        let mut acc = head.b1[h];
        for i in 0..head.in_dim {
            acc += head.w1[h * head.in_dim + i] * features[i];
        }
        *hv = acc.max(0.0);
    }
    let mut logits = vec![0.0; head.classes];
    for (o, lv) in logits.iter_mut().enumerate() {
        let mut acc = head.b2[o];
        for h in 0..head.hidden {
            acc += head.w2[o * head.hidden + h] * hidden[h];
        }
        *lv = acc;
    }
    Ok(logits)
}

/// Map pooled complex features to the real head input by `(re, im)`
/// concatenation, channel order preserved.
pub fn complex_features_to_real(pooled: &[Cplx]) -> Vec<f64> {
    let mut out = Vec::with_capacity(pooled.len() * 2);
    for z in pooled {
        out.push(z.re);
        out.push(z.im);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;
    use crate::wirtinger::cross_entropy_row;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn random_layer(in_ch: usize, out_ch: usize, k: usize, stride: usize, seed: u64) -> ComplexConv1d {
        let mut rng = seeds::stream(seed, &[seeds::tag("layer")]);
        let mut l = ComplexConv1d::new(in_ch, out_ch, k, stride);
        for w in l.weights.iter_mut() {
            *w = Cplx::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
        for b in l.bias.iter_mut() {
            *b = Cplx::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
        }
        l
    }

    fn random_input(ch: usize, t: usize, seed: u64) -> CArr {
        let mut rng = seeds::stream(seed, &[seeds::tag("input")]);
        let data = (0..ch * t)
            .map(|_| Cplx::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        CArr::new(ch, t, data)
    }

    #[test]
    fn k1_identity_and_rotation() {
        let mut l = ComplexConv1d::new(1, 1, 1, 1);
        l.weights[0] = Cplx::ONE;
        let x = random_input(1, 7, 3);
        let y = cconv_forward(&l, &x).unwrap();
        for i in 0..7 {
            assert_eq!(y.at(0, i), x.at(0, i));
        }
        l.weights[0] = Cplx::I;
        let x = CArr::new(1, 2, vec![Cplx::ONE, Cplx::ONE]);
        let y = cconv_forward(&l, &x).unwrap();
        assert_eq!(y.at(0, 0), Cplx::I);
    }

    #[test]
    fn too_short_input_is_a_shape_error() {
        let l = ComplexConv1d::new(1, 1, 5, 1);
        let x = random_input(1, 3, 1);
        assert!(matches!(cconv_forward(&l, &x), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_taps_give_zero_output() {
        let l = ComplexConv1d::new(2, 3, 3, 1);
        let x = random_input(2, 10, 5);
        let y = constrained_real_forward(&l, &to_stacked(&x)).unwrap();
        assert!(y.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn constrained_real_matches_complex_forward() {
        for seed in 0..8u64 {
            let stride = 1 + (seed % 2) as usize;
            let l = random_layer(2, 3, 5, stride, seed);
            let x = random_input(2, 17, seed + 100);
            let yc = cconv_forward(&l, &x).unwrap();
            let yr = constrained_real_forward(&l, &to_stacked(&x)).unwrap();
            assert_eq!(yr.ch, 2 * yc.ch);
            assert_eq!(yr.t, yc.t);
            for oc in 0..yc.ch {
                for i in 0..yc.t {
                    assert_abs_diff_eq!(yr.at(2 * oc, i), yc.at(oc, i).re, epsilon = 1e-6);
                    assert_abs_diff_eq!(yr.at(2 * oc + 1, i), yc.at(oc, i).im, epsilon = 1e-6);
                }
            }
        }
    }

    #[test]
    fn bias_free_conv_commutes_with_global_phase() {
        let mut l = random_layer(1, 2, 5, 1, 11);
        for b in l.bias.iter_mut() {
            *b = Cplx::ZERO;
        }
        let x = random_input(1, 20, 12);
        for phi in [0.4, 1.3, 2.8] {
            let rot = Cplx::cis(phi);
            let xr = CArr::new(1, 20, x.data.iter().map(|z| cmul(rot, *z)).collect());
            let lhs = cconv_forward(&l, &xr).unwrap();
            let rhs = cconv_forward(&l, &x).unwrap();
            for i in 0..lhs.data.len() {
                let want = cmul(rot, rhs.data[i]);
                assert!((lhs.data[i] - want).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn rotation_then_conv_equals_conv_then_rotation_in_stacked_form() {
        // Prop. 1 equivariance through the constrained real path.
        let mut l = random_layer(1, 2, 5, 1, 21);
        for b in l.bias.iter_mut() {
            *b = Cplx::ZERO;
        }
        let x = random_input(1, 16, 22);
        let phi = 0.9;
        let rot = Cplx::cis(phi);
        let x_rot = CArr::new(1, 16, x.data.iter().map(|z| cmul(rot, *z)).collect());
        let lhs = constrained_real_forward(&l, &to_stacked(&x_rot)).unwrap();
        let base = constrained_real_forward(&l, &to_stacked(&x)).unwrap();
        // Rotate the output pairs.
        for c in 0..base.ch / 2 {
            for i in 0..base.t {
                let z = Cplx::new(base.at(2 * c, i), base.at(2 * c + 1, i));
                let want = cmul(rot, z);
                assert_abs_diff_eq!(lhs.at(2 * c, i), want.re, epsilon = 1e-6);
                assert_abs_diff_eq!(lhs.at(2 * c + 1, i), want.im, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn pooling_and_head() {
        let x = RArr::new(1, 2, vec![1.0, 3.0]);
        assert_eq!(global_avg_pool_r(&x), vec![2.0]);
        let c = CArr::new(1, 3, vec![Cplx::new(1.0, 0.0); 3]);
        assert_eq!(global_avg_pool_c(&c)[0], Cplx::ONE);

        let head = Head::new(4, 8, 3);
        let logits = head_forward(&head, &[1.0, -2.0, 0.5, 3.0]).unwrap();
        assert_eq!(logits, vec![0.0, 0.0, 0.0]);

        let mut ident = Head::new(1, 1, 1);
        ident.w1[0] = 1.0;
        ident.w2[0] = 1.0;
        assert_eq!(head_forward(&ident, &[2.5]).unwrap(), vec![2.5]);

        // Uniform logits into 3-class cross-entropy: ln 3.
        let loss = cross_entropy_row(&[0.0, 0.0, 0.0], 1);
        assert_abs_diff_eq!(loss, 3f64.ln(), epsilon = 1e-12);

        assert!(head_forward(&head, &[1.0]).is_err());
    }

    #[test]
    fn parameter_counting() {
        let l = ComplexConv1d::new(3, 4, 5, 1);
        assert_eq!(l.param_count(), 2 * (4 * 3 * 5 + 4));
        let r = RealConv1d::new(4, 3, 5, 1);
        assert_eq!(r.param_count(), 3 * 4 * 5 + 3);
    }
}
