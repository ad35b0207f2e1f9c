//! Dense building blocks shared by the mapping network and the heads.

use rand::Rng;

/// Fully connected layer, row-major `out x inp` weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub out: usize,
    pub inp: usize,
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Linear {
    pub fn zeros(out: usize, inp: usize) -> Linear {
        Linear {
            out,
            inp,
            weight: vec![0.0; out * inp],
            bias: vec![0.0; out],
        }
    }

    /// He-uniform weights scaled by `gain`, zero bias.
    pub fn he_uniform(out: usize, inp: usize, gain: f32, rng: &mut impl Rng) -> Linear {
        let mut l = Linear::zeros(out, inp);
        he_fill(&mut l.weight, inp, gain, rng);
        l
    }

    #[inline]
    pub fn row(&self, o: usize) -> &[f32] {
        &self.weight[o * self.inp..(o + 1) * self.inp]
    }

    /// `W x` without bias.
    pub fn matvec(&self, x: &[f32], y: &mut [f32]) {
        debug_assert_eq!(x.len(), self.inp);
        for (o, yo) in y.iter_mut().enumerate().take(self.out) {
            *yo = dot(self.row(o), x);
        }
    }

    pub fn forward(&self, x: &[f32]) -> Vec<f32> {
        let mut y = vec![0.0; self.out];
        self.matvec(x, &mut y);
        for (v, b) in y.iter_mut().zip(&self.bias) {
            *v += b;
        }
        y
    }
}

pub fn he_fill(w: &mut [f32], fan_in: usize, gain: f32, rng: &mut impl Rng) {
    let bound = gain * (6.0 / fan_in.max(1) as f32).sqrt();
    for v in w.iter_mut() {
        *v = rng.gen_range(-bound..=bound);
    }
}

#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut s = 0.0f32;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

#[inline]
pub fn relu(x: f32) -> f32 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

pub fn relu_in_place(v: &mut [f32]) {
    for x in v {
        *x = relu(*x);
    }
}

/// Numerically stable softmax in `f64`.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Symmetric per-tensor int8 quantization of a [`Linear`] layer, with
/// int32 accumulation. Inputs are quantized per call with a symmetric
/// scale of `127 / max|x|`.
#[derive(Clone, Debug)]
pub struct QLinear {
    pub out: usize,
    pub inp: usize,
    pub weight: Vec<i8>,
    pub weight_scale: f32,
    pub bias: Vec<f32>,
}

impl QLinear {
    pub fn from_linear(l: &Linear) -> QLinear {
        let max = l.weight.iter().fold(0.0f32, |m, w| m.max(w.abs()));
        let weight_scale = if max > 0.0 { 127.0 / max } else { 1.0 };
        QLinear {
            out: l.out,
            inp: l.inp,
            weight: l
                .weight
                .iter()
                .map(|w| (w * weight_scale).round().clamp(-127.0, 127.0) as i8)
                .collect(),
            weight_scale,
            bias: l.bias.clone(),
        }
    }

    pub fn forward(&self, x: &[f32]) -> Vec<f32> {
        let (xq, xs) = quantize_i8(x);
        let inv = 1.0 / (self.weight_scale * xs);
        (0..self.out)
            .map(|o| {
                let row = &self.weight[o * self.inp..(o + 1) * self.inp];
                let mut acc = 0i32;
                for (w, v) in row.iter().zip(&xq) {
                    acc += *w as i32 * *v as i32;
                }
                acc as f32 * inv + self.bias[o]
            })
            .collect()
    }
}

/// Quantizes `x` to int8 with saturation; returns values and scale.
pub fn quantize_i8(x: &[f32]) -> (Vec<i8>, f32) {
    let max = x.iter().fold(0.0f32, |m, v| m.max(v.abs()));
    let scale = if max > 0.0 { 127.0 / max } else { 1.0 };
    let q = x
        .iter()
        .map(|v| (v * scale).round().clamp(-127.0, 127.0) as i8)
        .collect();
    (q, scale)
}
