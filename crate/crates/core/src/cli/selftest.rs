//! Built-in consistency suites, runnable from the binary in well under a
//! minute.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autograd::{Backprop, LearningRule};
use crate::error::Result;
use crate::lut::{AnchorSet, HashMode, LutTransform, OpCounts, RowIndex};
use crate::models::{
    fine_tune_add_table, fine_tune_split_table, AttentionHead, Combine, DeepSnn, RnnConfig, SequenceModel,
    SnnTransformer, SpikingRnn, TransformerConfig,
};
use crate::resources::{rnn_forward_counts, transformer_forward_counts};

/// Index concatenation under test; swapped out by mutation checks.
pub type ConcatFn = fn(RowIndex, RowIndex, RowIndex, usize, usize) -> RowIndex;

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl SuiteResult {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        SuiteResult { name, passed, detail }
    }

    fn from_result(name: &'static str, r: Result<SuiteResult>) -> Self {
        r.unwrap_or_else(|e| SuiteResult::new(name, false, format!("error: {e}")))
    }
}

fn randomize(t: &mut LutTransform, scale: f32, rng: &mut ChaCha8Rng) {
    for tab in t.tables_mut() {
        tab.rows_mut().iter_mut().for_each(|s| *s = rng.random_range(-scale..scale));
    }
}

/// `w . f(x)` for the smoothed deep network with every table's row and
/// flip position held fixed; computed in f64.
fn frozen_surrogate(net: &DeepSnn, frozen: &[Vec<(RowIndex, usize)>], x0: &[f64], w: &[f64]) -> (f64, f64) {
    let mut x = x0.to_vec();
    let mut min_margin = f64::INFINITY;
    for (layer, sel) in net.layers().iter().zip(frozen) {
        let mut y = if layer.residual() { x.clone() } else { vec![0.0; layer.n_out()] };
        for (t, &(row, r)) in layer.tables().iter().zip(sel) {
            let AnchorSet::PairwiseSign { pairs } = t.anchors() else {
                unreachable!("pairwise network")
            };
            for &(a, b) in pairs {
                min_margin = min_margin.min((x[a] - x[b]).abs());
            }
            let (a, b) = pairs[r];
            let u = x[a] - x[b];
            let flip = row ^ (1 << (pairs.len() - 1 - r));
            let wt = 0.5 / (1.0 + u.abs());
            for ((y, &s), &s2) in y.iter_mut().zip(t.row(row)).zip(t.row(flip)) {
                *y += s as f64 + wt * (s2 as f64 - s as f64);
            }
        }
        x = y;
    }
    (x.iter().zip(w).map(|(a, b)| a * b).sum(), min_margin)
}

/// Normwise relative error of the deep-network input gradient against
/// central differences of the frozen surrogate.
pub fn deep_gradient_error(net: &DeepSnn, x0: &[f32], w: &[f32]) -> Result<Option<f64>> {
    let bp = Backprop::surrogate(LearningRule::MinPairFlip);
    let (_, cache) = net.forward_train(x0, &bp, &mut OpCounts::default())?;
    let (g, _) = net.backward(&cache, w, &bp, &mut OpCounts::default())?;
    let frozen: Vec<Vec<(RowIndex, usize)>> =
        cache.layers.iter().map(|l| l.tables.iter().map(|c| (c.row, c.r_min)).collect()).collect();
    let x: Vec<f64> = x0.iter().map(|&v| v as f64).collect();
    let w: Vec<f64> = w.iter().map(|&v| v as f64).collect();
    if frozen_surrogate(net, &frozen, &x, &w).1 <= 1e-3 {
        return Ok(None);
    }
    let h = 1e-6;
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for k in 0..x.len() {
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp[k] += h;
        xm[k] -= h;
        let fd = (frozen_surrogate(net, &frozen, &xp, &w).0 - frozen_surrogate(net, &frozen, &xm, &w).0) / (2.0 * h);
        num += (g[k] as f64 - fd).powi(2);
        den += fd * fd;
    }
    Ok(Some(num.sqrt() / den.sqrt().max(1e-12)))
}

pub fn gradient_check(instances: usize, seed: u64) -> SuiteResult {
    SuiteResult::from_result("gradient-check", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut done, mut worst) = (0, 0.0f64);
        for _ in 0..instances * 20 {
            if done == instances {
                break;
            }
            let n = rng.random_range(4..=8);
            let mut net = DeepSnn::new(n, 2, rng.random_range(1..=3), rng.random_range(1..=3), HashMode::PairwiseSign, rng.random())?;
            net.layers_mut().iter_mut().for_each(|l| randomize(l, 0.5, &mut rng));
            let x: Vec<f32> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let w: Vec<f32> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            if let Some(e) = deep_gradient_error(&net, &x, &w)? {
                worst = worst.max(e);
                done += 1;
            }
        }
        Ok(SuiteResult::new(
            "gradient-check",
            done == instances && worst < 1e-4,
            format!("{done} instances, max relative error {worst:.2e}"),
        ))
    })())
}

/// Cached attention indices (combined with `concat`) against hashing the
/// explicit concatenation `[z_i, z_j, PE_{i-j}]`.
pub fn cache_equivalence(instances: usize, seed: u64, concat: ConcatFn) -> SuiteResult {
    SuiteResult::from_result("cache-equivalence", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut checked, mut bad) = (0u64, 0u64);
        for _ in 0..instances {
            let n = rng.random_range(2..=6);
            let len = rng.random_range(2..=6);
            let head = AttentionHead::new(n, rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=3), len, &mut rng)?;
            let z: Vec<Vec<f32>> = (0..len).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let cache = head.build_v_index_cache(&z, &mut OpCounts::default())?;
            for (t, table) in head.v().tables().iter().enumerate() {
                for i in 0..len {
                    for j in 0..i {
                        checked += 1;
                        if cache.row_index_with(t, i, j, concat) != table.compute_index(&head.concat_input(&z, i, j))? {
                            bad += 1;
                        }
                    }
                }
            }
        }
        Ok(SuiteResult::new(
            "cache-equivalence",
            bad == 0,
            format!("{bad} of {checked} indices differ"),
        ))
    })())
}

pub fn finetune_noop(seed: u64) -> SuiteResult {
    SuiteResult::from_result("fine-tune-no-op", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bad = 0;
        for _ in 0..20 {
            let n = rng.random_range(3..=8);
            let mut t = LutTransform::new(n, n, rng.random_range(1..=4), rng.random_range(1..=4), HashMode::PairwiseSign, true, &mut rng)?;
            randomize(&mut t, 1.0, &mut rng);
            let a = rng.random_range(0..n);
            let b = (a + rng.random_range(1..n)) % n;
            let added = fine_tune_add_table(&t, 3, HashMode::PairwiseSign, true, &mut rng)?;
            let split = fine_tune_split_table(&t, 0, (a, b), true)?;
            for _ in 0..20 {
                let x: Vec<f32> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let y = t.forward(&x)?;
                bad += (added.forward(&x)? != y) as u32 + (split.forward(&x)? != y) as u32;
            }
        }
        Ok(SuiteResult::new("fine-tune-no-op", bad == 0, format!("{bad} of 800 outputs changed")))
    })())
}

/// The full-size RNN and the attention-only transformer at a
/// short context, measured against the analytic counts.
pub fn counter_match(seed: u64) -> SuiteResult {
    SuiteResult::from_result("counter-match", (|| {
        let mut msgs = Vec::new();
        let rnn_cfg = RnnConfig {
            n: 64,
            n_t: 64,
            n_c: 10,
            n_t_u: 64,
            n_c_u: 6,
            mode: HashMode::PairwiseSign,
            combine: Combine::Additive,
        };
        let rnn = SpikingRnn::new(&rnn_cfg, seed)?;
        let text = b"counting every comparison";
        let mut c = OpCounts::default();
        rnn.forward_counted(text, &mut c)?;
        for m in rnn_forward_counts(&rnn_cfg, text.len())?.mismatches(&c) {
            msgs.push(format!("rnn {}: expected {} measured {}", m.0, m.1, m.2));
        }
        let tf_cfg = TransformerConfig {
            n: 16,
            n_t: 10,
            n_c: 6,
            p: 4,
            n_inp: 8,
            heads: 1,
            layers: 6,
            ffn: false,
            ffn_n_t: 0,
            ffn_n_c: 0,
            n_t_u: 16,
            n_c_u: 6,
        };
        let tf = SnnTransformer::new(&tf_cfg, seed)?;
        let mut c = OpCounts::default();
        tf.forward_counted(b"8 tokens", &mut c)?;
        for m in transformer_forward_counts(&tf_cfg, 8).mismatches(&c) {
            msgs.push(format!("transformer {}: expected {} measured {}", m.0, m.1, m.2));
        }
        let passed = msgs.is_empty();
        Ok(SuiteResult::new(
            "counter-match",
            passed,
            if passed { "all counters agree, zero multiplications".into() } else { msgs.join("; ") },
        ))
    })())
}

pub fn run_all(seed: u64, concat: ConcatFn) -> Vec<SuiteResult> {
    vec![
        gradient_check(100, seed),
        cache_equivalence(200, seed, concat),
        finetune_noop(seed),
        counter_match(seed),
    ]
}
