//! Float reference of the directional mapping network.
//!
//! The network is a stack of five Dir-Conv layers whose 3x3 kernels are
//! non-zero only along the line direction, so every layer is a 1-D
//! convolution with three taps along the line. Applied to a line pattern
//! laid out as a `2 x len` strip (own/opponent one-hot planes, zero padded
//! at both ends) it yields the feature of the center cell.
//!
//! Layer topology, `u = ReLU(DirConv(..))`:
//!
//! ```text
//! h1 = u1 + ReLU(pw1 u1)            u1 = ReLU(dc1 x)
//! h2 = h1 + ReLU(pw2 u2)            u2 = ReLU(dc2 h1)
//! h3 = ReLU(pw3 u3)                 u3 = ReLU(dc3 h2)
//! h4 = ReLU(pw4 u4)                 u4 = ReLU(dc4 h3)
//! out = final(u5)                   u5 = ReLU(dc5 h4)
//! ```
//!
//! The final point-wise layer has no activation. Stage `s` at a position
//! depends on the input cells within distance `s`, so the center output
//! sees exactly the 11-cell window.

use std::collections::HashMap;

use rand::Rng;

use crate::nn::{dot, he_fill, relu, Linear};
use crate::pattern::{LinePattern, HALF};

/// Number of Dir-Conv layers.
pub const DIR_LAYERS: usize = 5;
/// Input planes: own stones, opponent stones.
pub const INPUT_PLANES: usize = 2;

/// A Dir-Conv layer stored as its three in-line taps. Tap 0 multiplies the
/// neighbor on the negative side, tap 1 the cell itself, tap 2 the
/// positive neighbor.
#[derive(Clone, Debug, PartialEq)]
pub struct DirConv {
    pub out: usize,
    pub inp: usize,
    /// `[tap][out][inp]`.
    pub taps: Vec<f32>,
    pub bias: Vec<f32>,
}

impl DirConv {
    pub fn zeros(out: usize, inp: usize) -> DirConv {
        DirConv {
            out,
            inp,
            taps: vec![0.0; 3 * out * inp],
            bias: vec![0.0; out],
        }
    }

    pub fn he_uniform(out: usize, inp: usize, rng: &mut impl Rng) -> DirConv {
        let mut d = DirConv::zeros(out, inp);
        he_fill(&mut d.taps, 3 * inp, 1.0, rng);
        d
    }

    #[inline]
    pub fn tap(&self, t: usize, o: usize) -> &[f32] {
        let start = (t * self.out + o) * self.inp;
        &self.taps[start..start + self.inp]
    }

    /// Contribution `W_t x` of one neighbor.
    pub fn tap_product(&self, t: usize, x: &[f32]) -> Vec<f32> {
        (0..self.out).map(|o| dot(self.tap(t, o), x)).collect()
    }

    /// `ReLU(bias + left + mid + right)`, summed in that order, skipping
    /// neighbors that fall in the zero padding.
    pub fn combine(&self, parts: [Option<&[f32]>; 3]) -> Vec<f32> {
        let mut y = self.bias.clone();
        for p in parts.into_iter().flatten() {
            for (a, b) in y.iter_mut().zip(p) {
                *a += b;
            }
        }
        for v in &mut y {
            *v = relu(*v);
        }
        y
    }
}

/// Mapping network of one direction group.
#[derive(Clone, Debug, PartialEq)]
pub struct MappingNet {
    pub dir: [DirConv; DIR_LAYERS],
    pub point: [Linear; 4],
    pub head: Linear,
}

impl MappingNet {
    pub fn zeros(m: usize, c: usize) -> MappingNet {
        MappingNet {
            dir: std::array::from_fn(|i| {
                DirConv::zeros(m, if i == 0 { INPUT_PLANES } else { m })
            }),
            point: std::array::from_fn(|_| Linear::zeros(m, m)),
            head: Linear::zeros(c, m),
        }
    }

    pub fn he_uniform(m: usize, c: usize, rng: &mut impl Rng) -> MappingNet {
        MappingNet {
            dir: std::array::from_fn(|i| {
                DirConv::he_uniform(m, if i == 0 { INPUT_PLANES } else { m }, rng)
            }),
            point: std::array::from_fn(|_| Linear::he_uniform(m, m, 1.0, rng)),
            head: Linear::he_uniform(c, m, 1.0, rng),
        }
    }

    pub fn channels(&self) -> usize {
        self.head.out
    }

    /// One-hot input vector of a cell digit.
    fn one_hot(digit: u8) -> [f32; INPUT_PLANES] {
        match digit {
            1 => [1.0, 0.0],
            2 => [0.0, 1.0],
            _ => [0.0, 0.0],
        }
    }

    /// Post-Dir-Conv activation `u` of stage `stage` (1-based) to stage
    /// output `h`.
    fn stage_output(&self, stage: usize, u: Vec<f32>, prev: Option<&[f32]>) -> Vec<f32> {
        match stage {
            1 => {
                let p = self.point[0].forward(&u);
                u.iter().zip(p).map(|(a, b)| a + relu(b)).collect()
            }
            2 => {
                let p = self.point[1].forward(&u);
                let prev = prev.expect("stage 2 carries a skip input");
                prev.iter().zip(p).map(|(a, b)| a + relu(b)).collect()
            }
            3 | 4 => {
                let mut p = self.point[stage - 1].forward(&u);
                for v in &mut p {
                    *v = relu(*v);
                }
                p
            }
            _ => unreachable!("stage {stage}"),
        }
    }

    fn taps_of(&self, layer: usize, x: &[f32]) -> [Vec<f32>; 3] {
        std::array::from_fn(|t| self.dir[layer].tap_product(t, x))
    }

    /// Center feature of `pattern`, computed over the whole strip.
    pub fn forward(&self, pattern: &LinePattern) -> Vec<f32> {
        let digits = pattern.cells();
        let len = digits.len();
        // Tap products of the next Dir-Conv for every strip position.
        let mut taps: Vec<[Vec<f32>; 3]> = digits
            .iter()
            .map(|&d| self.taps_of(0, &Self::one_hot(d)))
            .collect();
        let mut h: Vec<Vec<f32>> = Vec::new();
        for stage in 1..DIR_LAYERS {
            let layer = &self.dir[stage - 1];
            let next: Vec<Vec<f32>> = (0..len)
                .map(|p| {
                    let u = layer.combine(neighbors(&taps, p));
                    self.stage_output(stage, u, h.get(p).map(Vec::as_slice))
                })
                .collect();
            taps = next.iter().map(|v| self.taps_of(stage, v)).collect();
            h = next;
        }
        let center = pattern.left();
        let u5 = self.dir[DIR_LAYERS - 1].combine(neighbors(&taps, center));
        self.head.forward(&u5)
    }
}

fn neighbors(taps: &[[Vec<f32>; 3]], p: usize) -> [Option<&[f32]>; 3] {
    [
        p.checked_sub(1).map(|q| taps[q][0].as_slice()),
        Some(taps[p][1].as_slice()),
        taps.get(p + 1).map(|t| t[2].as_slice()),
    ]
}

/// Digit marking a position outside the strip in window keys.
const OFF: u32 = 3;

struct MemoEntry {
    h: Vec<f32>,
    taps: [Vec<f32>; 3],
}

/// Evaluates the center output of many patterns, sharing the stage outputs
/// of identical sub-windows. Results are bit-identical to
/// [`MappingNet::forward`].
pub struct MemoForward<'a> {
    net: &'a MappingNet,
    input_taps: [[Vec<f32>; 3]; 3],
    levels: Vec<HashMap<u32, MemoEntry>>,
}

impl<'a> MemoForward<'a> {
    pub fn new(net: &'a MappingNet) -> MemoForward<'a> {
        MemoForward {
            net,
            input_taps: std::array::from_fn(|d| net.taps_of(0, &MappingNet::one_hot(d as u8))),
            levels: (0..DIR_LAYERS).map(|_| HashMap::new()).collect(),
        }
    }

    /// Window key of radius `radius` around offset `center` (relative to
    /// the pattern center), base 4 with `OFF` outside the strip.
    fn key(pattern: &LinePattern, center: isize, radius: usize) -> u32 {
        let digits = pattern.cells();
        let left = pattern.left() as isize;
        let mut key = 0u32;
        let mut mul = 1u32;
        for k in -(radius as isize)..=radius as isize {
            let pos = left + center + k;
            let d = if pos < 0 || pos >= digits.len() as isize {
                OFF
            } else {
                digits[pos as usize] as u32
            };
            key += d * mul;
            mul *= 4;
        }
        key
    }

    fn digit_of(key: u32, radius: usize, k: isize) -> u32 {
        (key / 4u32.pow((k + radius as isize) as u32)) % 4
    }

    /// Sub-key of radius `radius - 1` centered at offset `shift`.
    fn sub_key(key: u32, radius: usize, shift: isize) -> u32 {
        let r = radius as isize - 1;
        let mut sub = 0;
        let mut mul = 1;
        for k in -r..=r {
            sub += Self::digit_of(key, radius, shift + k) * mul;
            mul *= 4;
        }
        sub
    }

    /// Makes sure the stage-`stage` entry for `key` exists.
    fn ensure(&mut self, stage: usize, key: u32) {
        if self.levels[stage].contains_key(&key) {
            return;
        }
        // Parts from the previous stage at offsets -1, 0, +1.
        let mut parts: [Option<Vec<f32>>; 3] = [None, None, None];
        let mut skip: Option<Vec<f32>> = None;
        for (slot, shift) in [-1isize, 0, 1].into_iter().enumerate() {
            if Self::digit_of(key, stage, shift) == OFF {
                continue;
            }
            let sub = Self::sub_key(key, stage, shift);
            if stage == 1 {
                parts[slot] = Some(self.input_taps[sub as usize][slot].clone());
            } else {
                self.ensure(stage - 1, sub);
                let e = &self.levels[stage - 1][&sub];
                parts[slot] = Some(e.taps[slot].clone());
                if shift == 0 {
                    skip = Some(e.h.clone());
                }
            }
        }
        let layer = &self.net.dir[stage - 1];
        let u = layer.combine([parts[0].as_deref(), parts[1].as_deref(), parts[2].as_deref()]);
        let h = self.net.stage_output(stage, u, skip.as_deref());
        let taps = self.net.taps_of(stage, &h);
        self.levels[stage].insert(key, MemoEntry { h, taps });
    }

    pub fn forward(&mut self, pattern: &LinePattern) -> Vec<f32> {
        let last = DIR_LAYERS - 1;
        let mut parts: [Option<Vec<f32>>; 3] = [None, None, None];
        for (slot, shift) in [-1isize, 0, 1].into_iter().enumerate() {
            let pos = pattern.left() as isize + shift;
            if pos < 0 || pos >= pattern.len() as isize {
                continue;
            }
            let key = Self::key(pattern, shift, last);
            self.ensure(last, key);
            parts[slot] = Some(self.levels[last][&key].taps[slot].clone());
        }
        let u5 = self.net.dir[last].combine([
            parts[0].as_deref(),
            parts[1].as_deref(),
            parts[2].as_deref(),
        ]);
        self.net.head.forward(&u5)
    }

    /// Number of memoized sub-windows, for diagnostics.
    pub fn cached(&self) -> usize {
        self.levels.iter().map(HashMap::len).sum()
    }
}

const _: () = assert!(HALF == DIR_LAYERS);
