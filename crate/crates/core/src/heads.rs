//! Policy and value heads over the processed feature map.
//!
//! The policy head pools the feature map to a global mean, turns it into
//! the weights and bias of a per-cell point-wise convolution over the first
//! `P` channels (16 outputs), and projects those 16 features to one logit
//! per cell with a fixed point-wise layer.
//!
//! The value head averages nine 3x3 chunks of the board, maps each through
//! a star block, averages adjacent chunk features into a 2x2 grid, applies
//! a second star block to each, and feeds them with the global mean to a
//! three-layer MLP producing win/loss/draw logits.
//!
//! Two paths are provided: a float reference and the quantized path used
//! by search (int16 dynamic convolution, int8 linear layers with int32
//! accumulation).

use rand::Rng;

use crate::nn::{relu, relu_in_place, softmax, Linear, QLinear};
use crate::weights::{dynamic_width, NetConfig};

/// Output channels of the dynamic policy convolution.
pub const POLICY_FEATURES: usize = 16;
/// Fixed-point scale of the processed feature map (32 x 64).
pub const FMAP_SCALE: f64 = 2048.0;

/// Borrowed processed feature map, `[cell][channel]` at scale
/// [`FMAP_SCALE`].
#[derive(Clone, Copy, Debug)]
pub struct FeatureView<'a> {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: &'a [i32],
}

impl<'a> FeatureView<'a> {
    #[inline]
    pub fn cell(&self, idx: usize) -> &'a [i32] {
        &self.data[idx * self.channels..(idx + 1) * self.channels]
    }

    pub fn area(&self) -> usize {
        self.height * self.width
    }
}

/// Owned copy of a processed feature map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureMap {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<i32>,
}

impl FeatureMap {
    pub fn view(&self) -> FeatureView<'_> {
        FeatureView {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: &self.data,
        }
    }

    /// Dequantized value of `channel` at `(row, col)`.
    pub fn value(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + channel] as f64 / FMAP_SCALE
    }
}

/// Network output for one position.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    /// `(p_win, p_loss, p_draw)` for the side to move.
    pub value: [f64; 3],
    /// Move probabilities, row-major, zero on occupied cells.
    pub policy: Vec<f64>,
}

impl Evaluation {
    /// Scalar utility `p_win - p_loss`.
    pub fn utility(&self) -> f64 {
        self.value[0] - self.value[1]
    }
}

/// Degree-four multiplicative block.
#[derive(Clone, Debug, PartialEq)]
pub struct StarBlock {
    pub expand_gate: Linear,
    pub expand_lin: Linear,
    pub project: Linear,
}

impl StarBlock {
    pub fn zeros(inp: usize, out: usize) -> StarBlock {
        StarBlock {
            expand_gate: Linear::zeros(2 * out, inp),
            expand_lin: Linear::zeros(2 * out, inp),
            project: Linear::zeros(out, out),
        }
    }

    /// Small expansion gains: the block is quartic in its input, so unit
    /// gains blow feature maps of magnitude ten up to huge logits.
    pub fn random(inp: usize, out: usize, rng: &mut impl Rng) -> StarBlock {
        StarBlock {
            expand_gate: Linear::he_uniform(2 * out, inp, 0.1, rng),
            expand_lin: Linear::he_uniform(2 * out, inp, 0.1, rng),
            project: Linear::he_uniform(out, out, 1.0, rng),
        }
    }

    pub fn out(&self) -> usize {
        self.project.out
    }

    /// `ReLU(W d + b)` where `d[i] = c[2i] c[2i+1]` and
    /// `c = ReLU(A x) * (B x)`.
    pub fn forward(&self, x: &[f32]) -> Vec<f32> {
        let mut a = self.expand_gate.forward(x);
        relu_in_place(&mut a);
        let b = self.expand_lin.forward(x);
        let mut y = self.project.forward(&pair_products(&a, &b));
        relu_in_place(&mut y);
        y
    }

    fn tensors_mut(&mut self, prefix: &str) -> Vec<(String, Vec<usize>, &mut Vec<f32>)> {
        let mut out = Vec::new();
        for (name, l) in [
            ("a", &mut self.expand_gate),
            ("b", &mut self.expand_lin),
            ("w", &mut self.project),
        ] {
            out.push((format!("{prefix}.{name}.w"), vec![l.out, l.inp], &mut l.weight));
            out.push((format!("{prefix}.{name}.b"), vec![l.out], &mut l.bias));
        }
        out
    }
}

/// Elementwise product followed by adjacent-pair products.
pub fn pair_products(a: &[f32], b: &[f32]) -> Vec<f32> {
    let c: Vec<f32> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    c.chunks_exact(2).map(|p| p[0] * p[1]).collect()
}

#[derive(Clone, Debug)]
struct QStarBlock {
    expand_gate: QLinear,
    expand_lin: QLinear,
    project: QLinear,
}

impl QStarBlock {
    fn new(s: &StarBlock) -> QStarBlock {
        QStarBlock {
            expand_gate: QLinear::from_linear(&s.expand_gate),
            expand_lin: QLinear::from_linear(&s.expand_lin),
            project: QLinear::from_linear(&s.project),
        }
    }

    fn forward(&self, x: &[f32]) -> Vec<f32> {
        let mut a = self.expand_gate.forward(x);
        relu_in_place(&mut a);
        let b = self.expand_lin.forward(x);
        let mut y = self.project.forward(&pair_products(&a, &b));
        relu_in_place(&mut y);
        y
    }
}

/// Float parameters of both heads.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadWeights {
    pub policy_gen1: Linear,
    pub policy_gen2: Linear,
    pub policy_out: Linear,
    pub star_chunk: StarBlock,
    pub star_group: StarBlock,
    pub value_mlp: [Linear; 3],
}

impl HeadWeights {
    pub fn zeros(cfg: &NetConfig) -> HeadWeights {
        let (c, p, v) = (cfg.feature, cfg.policy, cfg.value);
        HeadWeights {
            policy_gen1: Linear::zeros(c, c),
            policy_gen2: Linear::zeros(dynamic_width(p), c),
            policy_out: Linear::zeros(1, POLICY_FEATURES),
            star_chunk: StarBlock::zeros(c, v),
            star_group: StarBlock::zeros(v, v),
            value_mlp: [
                Linear::zeros(v, c + 4 * v),
                Linear::zeros(v, v),
                Linear::zeros(3, v),
            ],
        }
    }

    pub fn random(cfg: &NetConfig, rng: &mut impl Rng) -> HeadWeights {
        let (c, p, v) = (cfg.feature, cfg.policy, cfg.value);
        HeadWeights {
            policy_gen1: Linear::he_uniform(c, c, 1.0, rng),
            policy_gen2: Linear::he_uniform(dynamic_width(p), c, 0.5, rng),
            policy_out: Linear::he_uniform(1, POLICY_FEATURES, 0.5, rng),
            star_chunk: StarBlock::random(c, v, rng),
            star_group: StarBlock::random(v, v, rng),
            value_mlp: [
                Linear::he_uniform(v, c + 4 * v, 1.0, rng),
                Linear::he_uniform(v, v, 1.0, rng),
                Linear::he_uniform(3, v, 0.5, rng),
            ],
        }
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<(String, Vec<usize>, &mut Vec<f32>)> {
        let mut out = Vec::new();
        for (name, l) in [
            ("policy.gen1", &mut self.policy_gen1),
            ("policy.gen2", &mut self.policy_gen2),
            ("policy.out", &mut self.policy_out),
        ] {
            out.push((format!("{name}.w"), vec![l.out, l.inp], &mut l.weight));
            out.push((format!("{name}.b"), vec![l.out], &mut l.bias));
        }
        out.extend(self.star_chunk.tensors_mut("value.sb1"));
        out.extend(self.star_group.tensors_mut("value.sb2"));
        for (i, l) in self.value_mlp.iter_mut().enumerate() {
            out.push((format!("value.mlp{}.w", i + 1), vec![l.out, l.inp], &mut l.weight));
            out.push((format!("value.mlp{}.b", i + 1), vec![l.out], &mut l.bias));
        }
        out
    }
}

/// Per-channel mean of the feature map, dequantized.
pub fn global_mean(fm: FeatureView<'_>) -> Vec<f64> {
    let mut sums = vec![0i64; fm.channels];
    for idx in 0..fm.area() {
        for (s, v) in sums.iter_mut().zip(fm.cell(idx)) {
            *s += *v as i64;
        }
    }
    let denom = fm.area() as f64 * FMAP_SCALE;
    sums.into_iter().map(|s| s as f64 / denom).collect()
}

/// Row/column boundaries of the three value chunks along an axis of
/// length `n`: `floor(i n / 3)`.
pub fn chunk_bounds(n: usize) -> [usize; 4] {
    [0, n / 3, 2 * n / 3, n]
}

/// Mean feature of each of the 3x3 chunks, row-major.
pub fn chunk_means(fm: FeatureView<'_>) -> Vec<Vec<f32>> {
    let rows = chunk_bounds(fm.height);
    let cols = chunk_bounds(fm.width);
    let mut out = Vec::with_capacity(9);
    for i in 0..3 {
        for j in 0..3 {
            let mut sums = vec![0i64; fm.channels];
            let mut count = 0usize;
            for r in rows[i]..rows[i + 1] {
                for c in cols[j]..cols[j + 1] {
                    for (s, v) in sums.iter_mut().zip(fm.cell(r * fm.width + c)) {
                        *s += *v as i64;
                    }
                    count += 1;
                }
            }
            let denom = count.max(1) as f64 * FMAP_SCALE;
            out.push(sums.into_iter().map(|s| (s as f64 / denom) as f32).collect());
        }
    }
    out
}

/// 2x2 averages of the 3x3 chunk features.
pub fn group_average(groups: &[Vec<f32>]) -> Vec<Vec<f32>> {
    let mut out = Vec::with_capacity(4);
    for i in 0..2 {
        for j in 0..2 {
            let at = |a: usize, b: usize| &groups[a * 3 + b];
            let v = (0..groups[0].len())
                .map(|k| (at(i, j)[k] + at(i, j + 1)[k] + at(i + 1, j)[k] + at(i + 1, j + 1)[k]) / 4.0)
                .collect();
            out.push(v);
        }
    }
    out
}

fn masked_softmax(logits: &[f64], legal: &[bool]) -> Vec<f64> {
    let idx: Vec<usize> = (0..logits.len()).filter(|&i| legal[i]).collect();
    let mut out = vec![0.0; logits.len()];
    if idx.is_empty() {
        return out;
    }
    let probs = softmax(&idx.iter().map(|&i| logits[i]).collect::<Vec<_>>());
    for (i, p) in idx.into_iter().zip(probs) {
        out[i] = p;
    }
    out
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

/// Float reference of the policy logits.
pub fn policy_logits_float(w: &HeadWeights, fm: FeatureView<'_>, g: &[f64], p: usize) -> Vec<f64> {
    let mut hidden = w.policy_gen1.forward(&to_f32(g));
    relu_in_place(&mut hidden);
    let dynamic = w.policy_gen2.forward(&hidden);
    let (dyn_w, dyn_b) = dynamic.split_at(POLICY_FEATURES * p);
    (0..fm.area())
        .map(|idx| {
            let cell = fm.cell(idx);
            let mut logit = w.policy_out.bias[0] as f64;
            for o in 0..POLICY_FEATURES {
                let mut s = dyn_b[o] as f64;
                for k in 0..p {
                    s += dyn_w[o * p + k] as f64 * (cell[k] as f64 / FMAP_SCALE);
                }
                logit += w.policy_out.weight[o] as f64 * s.max(0.0);
            }
            logit
        })
        .collect()
}

/// Float reference of the value logits.
pub fn value_logits_float(w: &HeadWeights, fm: FeatureView<'_>, g: &[f64]) -> Vec<f64> {
    let groups: Vec<Vec<f32>> = chunk_means(fm)
        .iter()
        .map(|m| w.star_chunk.forward(m))
        .collect();
    let mut input = to_f32(g);
    for gp in group_average(&groups) {
        input.extend(w.star_group.forward(&gp));
    }
    let mut h = w.value_mlp[0].forward(&input);
    relu_in_place(&mut h);
    let mut h = w.value_mlp[1].forward(&h);
    relu_in_place(&mut h);
    w.value_mlp[2].forward(&h).into_iter().map(f64::from).collect()
}

/// Quantized policy and value heads.
#[derive(Clone, Debug)]
pub struct Heads {
    config: NetConfig,
    float: HeadWeights,
    gen1: QLinear,
    gen2: QLinear,
    star_chunk: QStarBlock,
    star_group: QStarBlock,
    mlp: [QLinear; 3],
}

impl Heads {
    pub fn new(config: NetConfig, w: &HeadWeights) -> Heads {
        Heads {
            config,
            float: w.clone(),
            gen1: QLinear::from_linear(&w.policy_gen1),
            gen2: QLinear::from_linear(&w.policy_gen2),
            star_chunk: QStarBlock::new(&w.star_chunk),
            star_group: QStarBlock::new(&w.star_group),
            mlp: std::array::from_fn(|i| QLinear::from_linear(&w.value_mlp[i])),
        }
    }

    pub fn weights(&self) -> &HeadWeights {
        &self.float
    }

    /// Quantized policy logits: int8 generator layers, then an int16
    /// point-wise convolution with int32 accumulation, then the float
    /// output projection.
    pub fn policy_logits(&self, fm: FeatureView<'_>, g: &[f64]) -> Vec<f64> {
        let p = self.config.policy;
        let mut hidden = self.gen1.forward(&to_f32(g));
        relu_in_place(&mut hidden);
        let dynamic = self.gen2.forward(&hidden);
        let (dyn_w, dyn_b) = dynamic.split_at(POLICY_FEATURES * p);

        // Weight scale keeps sum |w_q| * 32767 below 2^31 for any input.
        let wmax = dyn_w.iter().fold(0.0f32, |m, v| m.max(v.abs()));
        let wlimit = (i16::MAX as f32).min(65_535.0 / p as f32);
        let wscale = if wmax > 0.0 { wlimit / wmax } else { 1.0 };
        let wq: Vec<i16> = dyn_w.iter().map(|v| (v * wscale).round() as i16).collect();

        // Shift the feature map into int16 range for this position.
        let fmax = (0..fm.area())
            .flat_map(|i| fm.cell(i)[..p].iter())
            .fold(0i64, |m, &v| m.max((v as i64).abs()));
        let mut shift = 0u32;
        while (fmax >> shift) > i16::MAX as i64 {
            shift += 1;
        }
        let fscale = FMAP_SCALE / (1u64 << shift) as f64;
        let dequant = 1.0 / (fscale * wscale as f64);

        let out_w = &self.float.policy_out.weight;
        let out_b = self.float.policy_out.bias[0] as f64;
        (0..fm.area())
            .map(|idx| {
                let cell = fm.cell(idx);
                let fq: Vec<i16> = cell[..p].iter().map(|&v| (v >> shift) as i16).collect();
                let mut logit = out_b;
                for o in 0..POLICY_FEATURES {
                    let mut acc = 0i32;
                    for (w, f) in wq[o * p..(o + 1) * p].iter().zip(&fq) {
                        acc += *w as i32 * *f as i32;
                    }
                    let h = relu(acc as f32 * dequant as f32 + dyn_b[o]);
                    logit += out_w[o] as f64 * h as f64;
                }
                logit
            })
            .collect()
    }

    pub fn value_logits(&self, fm: FeatureView<'_>, g: &[f64]) -> Vec<f64> {
        let groups: Vec<Vec<f32>> = chunk_means(fm)
            .iter()
            .map(|m| self.star_chunk.forward(m))
            .collect();
        let mut input = to_f32(g);
        for gp in group_average(&groups) {
            input.extend(self.star_group.forward(&gp));
        }
        let mut h = self.mlp[0].forward(&input);
        relu_in_place(&mut h);
        let mut h = self.mlp[1].forward(&h);
        relu_in_place(&mut h);
        self.mlp[2].forward(&h).into_iter().map(f64::from).collect()
    }

    pub fn value(&self, fm: FeatureView<'_>) -> [f64; 3] {
        let g = global_mean(fm);
        to_triple(&softmax(&self.value_logits(fm, &g)))
    }

    /// Quantized evaluation; `legal[i]` marks empty cells.
    pub fn evaluate(&self, fm: FeatureView<'_>, legal: &[bool]) -> Evaluation {
        let g = global_mean(fm);
        Evaluation {
            value: to_triple(&softmax(&self.value_logits(fm, &g))),
            policy: masked_softmax(&self.policy_logits(fm, &g), legal),
        }
    }

    /// Float reference evaluation of the same feature map.
    pub fn evaluate_float(&self, fm: FeatureView<'_>, legal: &[bool]) -> Evaluation {
        let g = global_mean(fm);
        Evaluation {
            value: to_triple(&softmax(&value_logits_float(&self.float, fm, &g))),
            policy: masked_softmax(
                &policy_logits_float(&self.float, fm, &g, self.config.policy),
                legal,
            ),
        }
    }
}

fn to_triple(v: &[f64]) -> [f64; 3] {
    [v[0], v[1], v[2]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn view(data: &[i32], h: usize, w: usize, c: usize) -> FeatureView<'_> {
        FeatureView {
            height: h,
            width: w,
            channels: c,
            data,
        }
    }

    #[test]
    fn global_mean_cases() {
        let zeros = vec![0i32; 225 * 4];
        assert_eq!(global_mean(view(&zeros, 15, 15, 4)), vec![0.0; 4]);
        let konst = vec![3 * 2048i32; 225 * 4];
        assert_eq!(global_mean(view(&konst, 15, 15, 4)), vec![3.0; 4]);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data: Vec<i32> = (0..225 * 6).map(|_| rng.gen_range(-500_000..500_000)).collect();
        let got = global_mean(view(&data, 15, 15, 6));
        for (k, g) in got.iter().enumerate() {
            let mut naive = 0.0f64;
            for r in 0..15 {
                for c in 0..15 {
                    naive += data[(r * 15 + c) * 6 + k] as f64 / 2048.0;
                }
            }
            assert!((g - naive / 225.0).abs() < 1e-9);
        }
    }

    #[test]
    fn star_block_zero_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = StarBlock::random(4, 4, &mut rng);
        for l in [&mut s.expand_gate, &mut s.expand_lin, &mut s.project] {
            l.bias.iter_mut().for_each(|b| *b = 0.0);
        }
        assert_eq!(s.forward(&[0.0; 4]), vec![0.0; 4]);
    }

    fn identity_star() -> StarBlock {
        // D = 2: A = B = [I; I] so a = ReLU(x, x), b = (x, x).
        let mut s = StarBlock::zeros(2, 2);
        for l in [&mut s.expand_gate, &mut s.expand_lin] {
            l.weight = vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0];
        }
        s.project.weight = vec![1.0, 0.0, 0.0, 1.0];
        s
    }

    #[test]
    fn star_block_closed_form() {
        let s = identity_star();
        // c = (x0^2, x1^2, x0^2, x1^2) for positive x, d = (x0^2 x1^2, x0^2 x1^2).
        let (x0, x1) = (1.5f32, 2.0f32);
        let expected = x0 * x0 * x1 * x1;
        let y = s.forward(&[x0, x1]);
        assert!((y[0] - expected).abs() < 1e-5 && (y[1] - expected).abs() < 1e-5);
        // A negative entry is gated off by the ReLU on the first branch.
        assert_eq!(s.forward(&[-1.0, 2.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn star_block_is_degree_four() {
        let s = identity_star();
        let x = [0.7f32, 1.3];
        let d1 = s.forward(&x)[0];
        for t in [0.5f32, 2.0, 3.0] {
            let dt = s.forward(&[t * x[0], t * x[1]])[0];
            assert!((dt - t.powi(4) * d1).abs() < 1e-4 * dt.abs().max(1.0));
        }
    }

    #[test]
    fn chunks_partition_the_board() {
        for n in [5usize, 9, 15, 16, 32] {
            let b = chunk_bounds(n);
            let mut covered = vec![0; n];
            for i in 0..3 {
                for x in covered.iter_mut().take(b[i + 1]).skip(b[i]) {
                    *x += 1;
                }
            }
            assert!(covered.iter().all(|&c| c == 1));
        }
        assert_eq!(chunk_bounds(15), [0, 5, 10, 15]);
    }

    #[test]
    fn identical_chunks_average_to_themselves() {
        let g0 = vec![0.25f32, -1.0, 3.5];
        let groups = vec![g0.clone(); 9];
        for gp in group_average(&groups) {
            assert_eq!(gp, g0);
        }
    }

    #[test]
    fn zero_heads_give_uniform_outputs() {
        let cfg = NetConfig::TINY;
        let heads = Heads::new(cfg, &HeadWeights::zeros(&cfg));
        let data = vec![1234i32; 225 * cfg.feature];
        let mut legal = vec![true; 225];
        legal[7 * 15 + 7] = false;
        let e = heads.evaluate(view(&data, 15, 15, cfg.feature), &legal);
        for v in e.value {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
        assert_eq!(e.policy[7 * 15 + 7], 0.0);
        for (i, p) in e.policy.iter().enumerate() {
            if legal[i] {
                assert!((p - 1.0 / 224.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_legal_cell_gets_everything() {
        let cfg = NetConfig::TINY;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let heads = Heads::new(cfg, &HeadWeights::random(&cfg, &mut rng));
        let data: Vec<i32> = (0..225 * cfg.feature).map(|_| rng.gen_range(-9000..9000)).collect();
        let mut legal = vec![false; 225];
        legal[42] = true;
        let e = heads.evaluate(view(&data, 15, 15, cfg.feature), &legal);
        assert_eq!(e.policy[42], 1.0);
        assert!((e.policy.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
