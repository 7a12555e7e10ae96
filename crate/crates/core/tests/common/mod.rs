#![allow(dead_code)]

pub mod fd;

use std::path::PathBuf;

use polychron::autograd::{Backprop, LearningRule, SparseGrad};
use polychron::lut::{HashMode, OpCounts};
use polychron::models::DeepSnn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Four-class latency-order task: each class is a prototype latency vector,
/// samples add Gaussian-ish jitter so the ordering is mostly but not always
/// preserved.
pub struct LatencyTask {
    pub protos: Vec<Vec<f32>>,
    pub jitter: f32,
}

impl LatencyTask {
    pub fn new(n: usize, classes: usize, jitter: f32, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let protos = (0..classes)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0f32..1.0)).collect())
            .collect();
        LatencyTask { protos, jitter }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> (Vec<f32>, usize) {
        let c = rng.random_range(0..self.protos.len());
        let x = self.protos[c]
            .iter()
            .map(|&p| {
                // sum of uniforms, roughly normal with std `jitter`
                let s: f32 = (0..3).map(|_| rng.random_range(-1.0f32..1.0)).sum();
                p + self.jitter * s
            })
            .collect();
        (x, c)
    }
}

pub fn softmax_grad(logits: &[f32], target: usize) -> Vec<f32> {
    let m = logits.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
    let e: Vec<f32> = logits.iter().map(|&l| (l - m).exp()).collect();
    let z: f32 = e.iter().sum();
    e.iter().enumerate().map(|(i, &v)| v / z - (i == target) as u8 as f32).collect()
}

fn argmax(v: &[f32]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f32::NEG_INFINITY), |b, (i, &x)| if x > b.1 { (i, x) } else { b })
        .0
}

pub fn accuracy(net: &DeepSnn, task: &LatencyTask, samples: usize, seed: u64) -> f64 {
    let k = task.protos.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hits = (0..samples)
        .filter(|_| {
            let (x, c) = task.sample(&mut rng);
            argmax(&net.forward(&x).unwrap()[..k]) == c
        })
        .count();
    hits as f64 / samples as f64
}

/// Per-sample SGD on the first `classes` outputs as logits. Returns the
/// trained network and its held-out accuracy.
pub fn train_latency_task(rule: LearningRule, steps: usize, lr: f32, seed: u64) -> (DeepSnn, f64) {
    train_latency_task_with(rule, steps, lr, JITTER, seed)
}

pub const JITTER: f32 = 0.3;

pub fn train_latency_task_with(rule: LearningRule, steps: usize, lr: f32, jitter: f32, seed: u64) -> (DeepSnn, f64) {
    let task = LatencyTask::new(16, 4, jitter, seed);
    let mut net = DeepSnn::new(16, 2, 8, 4, HashMode::PairwiseSign, seed ^ 1).unwrap();
    let bp = Backprop::with_rule(rule);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
    for _ in 0..steps {
        let (x, c) = task.sample(&mut rng);
        let mut counts = OpCounts::default();
        let (y, cache) = net.forward_train(&x, &bp, &mut counts).unwrap();
        let g = softmax_grad(&y[..4], c);
        let grads = if rule == LearningRule::SpikingScalar {
            let top = SparseGrad::from_dense(&g);
            net.backward_scalar(&cache, top, &bp, &mut counts).unwrap().1
        } else {
            let mut v = vec![0.0; 16];
            v[..4].copy_from_slice(&g);
            net.backward(&cache, &v, &bp, &mut counts).unwrap().1
        };
        net.apply_update(&grads, lr).unwrap();
    }
    let acc = accuracy(&net, &task, 2000, seed ^ 3);
    (net, acc)
}

/// At least 1 MB of English prose: `POLYCHRON_CORPUS` if set, otherwise the
/// license texts and Perl manuals shipped with the system.
pub fn english_corpus() -> Option<Vec<u8>> {
    if let Ok(p) = std::env::var("POLYCHRON_CORPUS") {
        return std::fs::read(p).ok();
    }
    let mut files: Vec<PathBuf> = Vec::new();
    if let Ok(rd) = std::fs::read_dir("/usr/share/common-licenses") {
        let mut v: Vec<PathBuf> = rd.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_file()).collect();
        v.sort();
        files.extend(v);
    }
    for root in ["/usr/share/perl", "/usr/lib/x86_64-linux-gnu/perl"] {
        let mut stack = vec![PathBuf::from(root)];
        let mut pods = Vec::new();
        while let Some(d) = stack.pop() {
            let Ok(rd) = std::fs::read_dir(&d) else { continue };
            for e in rd.flatten() {
                let p = e.path();
                if p.is_dir() {
                    stack.push(p);
                } else if p.extension().is_some_and(|x| x == "pod") {
                    pods.push(p);
                }
            }
        }
        pods.sort();
        files.extend(pods);
    }
    let mut out = Vec::new();
    for f in files {
        if let Ok(b) = std::fs::read(f) {
            out.extend(b);
        }
    }
    (out.len() >= 1 << 20).then_some(out)
}

// ---- f64 oracles -------------------------------------------------------

use polychron::lut::{AnchorSet, LutTransform, RowIndex};

pub fn bump(u: f64) -> f64 {
    0.5 / (1.0 + u.abs())
}

/// Row reached by flipping comparison `r` (comparison 0 is the top bit).
pub fn flipped(row: RowIndex, r: usize, bits: usize) -> RowIndex {
    row ^ (1 << (bits - 1 - r))
}

/// Margin of comparison `r` on `x`, recomputed from the anchor definition.
/// `planes` overrides hyperplane coefficients when given.
pub fn margin(anchors: &AnchorSet, r: usize, x: &[f64], planes: Option<&[Vec<f64>]>) -> f64 {
    match anchors {
        AnchorSet::PairwiseSign { pairs } => x[pairs[r].0] - x[pairs[r].1],
        AnchorSet::ComponentSign { singles } => x[singles[r]],
        AnchorSet::HyperplaneSign { planes: p } => match planes {
            Some(q) => q[r].iter().zip(x).map(|(c, x)| c * x).sum(),
            None => p[r].iter().zip(x).map(|(&c, x)| c as f64 * x).sum(),
        },
        AnchorSet::Mixed { pairs, singles } => {
            if r < pairs.len() {
                x[pairs[r].0] - x[pairs[r].1]
            } else {
                x[singles[r - pairs.len()]]
            }
        }
        AnchorSet::BinQuantized { .. } => unimplemented!("not used by the oracles"),
    }
}

/// Smoothed transform with every table's row and flip position frozen.
/// Returns the output and the smallest margin over all comparisons.
pub fn frozen_layer(
    t: &LutTransform,
    sel: &[(RowIndex, usize)],
    x: &[f64],
    no_flip: bool,
    planes: Option<&[Vec<Vec<f64>>]>,
) -> (Vec<f64>, f64) {
    let mut y = if t.residual() { x.to_vec() } else { vec![0.0; t.n_out()] };
    let mut min_m = f64::INFINITY;
    for (k, (tab, &(row, r))) in t.tables().iter().zip(sel).enumerate() {
        let p = planes.map(|p| p[k].as_slice());
        let bits = tab.n_comparisons();
        for q in 0..bits {
            min_m = min_m.min(margin(tab.anchors(), q, x, p).abs());
        }
        let w = bump(margin(tab.anchors(), r, x, p));
        let here = tab.row(row);
        if no_flip {
            for (y, &s) in y.iter_mut().zip(here) {
                *y += s as f64 * (1.0 - w);
            }
        } else {
            let there = tab.row(flipped(row, r, bits));
            for ((y, &s), &s2) in y.iter_mut().zip(here).zip(there) {
                *y += s as f64 + w * (s2 as f64 - s as f64);
            }
        }
    }
    (y, min_m)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

/// Reference norms below this are treated as this: the models compute in
/// f32, so a gradient of size 1e-6 built from O(1) rows carries absolute
/// rounding error near 1e-9 that no tolerance on its own scale can absorb.
pub const NORM_FLOOR: f64 = 1e-3;

/// `||a - b|| / max(||b||, NORM_FLOOR)` with `b` the reference.
pub fn rel_err(analytic: &[f64], reference: &[f64]) -> f64 {
    let num: f64 = analytic.iter().zip(reference).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = reference.iter().map(|b| b * b).sum();
    num.sqrt() / den.sqrt().max(NORM_FLOOR)
}

/// Central differences of `f` at `x`.
pub fn central_diff(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|k| {
            let (mut a, mut b) = (x.to_vec(), x.to_vec());
            a[k] += h;
            b[k] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}

pub fn randomize(t: &mut LutTransform, scale: f32, rng: &mut impl Rng) {
    for tab in t.tables_mut() {
        tab.rows_mut().iter_mut().for_each(|s| *s = rng.random_range(-scale..scale));
    }
}

pub fn to64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

/// Small RNN that trains in well under a second per hundred steps.
pub fn tiny_rnn_config() -> polychron::train::TrainConfig {
    let mut cfg = polychron::train::TrainConfig::default();
    for (k, v) in [
        ("model.n", "8"),
        ("model.n_t", "4"),
        ("model.n_c", "4"),
        ("model.n_t_u", "4"),
        ("model.n_c_u", "4"),
        ("model.n_inp", "8"),
        ("train.schedule", "constant"),
        ("train.lr_scale", "5"),
        ("train.batch_size", "4"),
        ("train.max_steps", "40"),
        ("train.eval_interval", "10"),
        ("train.eval_windows", "16"),
        ("train.seed", "7"),
    ] {
        cfg.set(k, v).unwrap();
    }
    cfg
}

/// Deterministic pseudo-text for fast training tests.
pub fn toy_corpus(len: usize, seed: u64) -> Vec<u8> {
    let words: [&[u8]; 8] = [b"the ", b"cat ", b"sat ", b"on ", b"a ", b"mat. ", b"and ", b"dog "];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(len + 8);
    while out.len() < len {
        out.extend_from_slice(words[rng.random_range(0..words.len())]);
    }
    out.truncate(len);
    out
}
