//! Surrogate gradients against central finite differences of independent
//! f64 re-implementations, with every table's selection frozen.

use polychron::autograd::{Backprop, LearningRule, ReciprocalAbs};
use polychron::lut::{AnchorSet, HashMode, LutTransform, OpCounts, RowIndex};
use polychron::models::{AttentionHead, DeepSnn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

pub const H: f64 = 1e-6;
pub const TOL: f64 = 1e-4;
/// Points with any margin at or below this are skipped.
pub const MARGIN: f64 = 1e-3;

fn deep_case(rng: &mut ChaCha8Rng, rule: LearningRule) -> Option<f64> {
    let n = rng.random_range(4..=8);
    let mut net = DeepSnn::new(n, 2, rng.random_range(1..=3), rng.random_range(1..=3), HashMode::PairwiseSign, rng.random()).unwrap();
    net.layers_mut().iter_mut().for_each(|l| randomize(l, 0.5, rng));
    let x: Vec<f32> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w: Vec<f32> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let bp = Backprop::surrogate(rule);
    let (_, cache) = net.forward_train(&x, &bp, &mut OpCounts::default()).unwrap();
    let (g, _) = net.backward(&cache, &w, &bp, &mut OpCounts::default()).unwrap();
    let sel: Vec<Vec<(RowIndex, usize)>> = cache.layers.iter().map(|l| l.tables.iter().map(|c| (c.row, c.r_min)).collect()).collect();
    let no_flip = rule == LearningRule::NoFlip;
    let f = |x: &[f64]| {
        let mut h = x.to_vec();
        let mut m = f64::INFINITY;
        for (l, s) in net.layers().iter().zip(&sel) {
            let (y, mm) = frozen_layer(l, s, &h, no_flip, None);
            m = m.min(mm);
            h = y;
        }
        (dot(&h, &to64(&w)), m)
    };
    if f(&to64(&x)).1 <= MARGIN {
        return None;
    }
    let fd = central_diff(&to64(&x), H, |x| f(x).0);
    Some(rel_err(&to64(&g), &fd))
}

/// Worst relative error of the deep-SNN input gradient over `instances`
/// accepted random cases.
pub fn deep_worst(rule: LearningRule, seed: u64, instances: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut done, mut worst) = (0, 0.0f64);
    while done < instances {
        if let Some(e) = deep_case(&mut rng, rule) {
            worst = worst.max(e);
            done += 1;
        }
    }
    worst
}

/// Attention contribution with frozen rows and flip positions; `pe` is
/// `(len - 1) x p`.
fn frozen_attention(head: &AttentionHead, sel: &[Vec<Vec<(RowIndex, usize)>>], z: &[Vec<f64>], pe: &[Vec<f64>], w: &[Vec<f64>], no_flip: bool) -> (f64, f64) {
    let n = head.n();
    let mut loss = 0.0;
    let mut min_m = f64::INFINITY;
    for i in 0..z.len() {
        for j in 0..i {
            let mut x: Vec<f64> = z[i].clone();
            x.extend(&z[j]);
            x.extend(&pe[i - j - 1]);
            for (t, tab) in head.v().tables().iter().enumerate() {
                let (row, r) = sel[t][i][j];
                let bits = tab.n_comparisons();
                for q in 0..bits {
                    min_m = min_m.min(margin(tab.anchors(), q, &x, None).abs());
                }
                let u = bump(margin(tab.anchors(), r, &x, None));
                let here = tab.row(row);
                let there = tab.row(flipped(row, r, bits));
                for k in 0..n {
                    let y = if no_flip {
                        here[k] as f64 * (1.0 - u)
                    } else {
                        here[k] as f64 + u * (there[k] as f64 - here[k] as f64)
                    };
                    loss += w[i][k] * y;
                }
            }
        }
    }
    (loss, min_m)
}

fn attention_case(rng: &mut ChaCha8Rng, rule: LearningRule) -> Option<(f64, f64)> {
    let (n, len) = (rng.random_range(3..=5), 3);
    let (n_t, n_c, p) = (rng.random_range(1..=2), rng.random_range(1..=2), rng.random_range(1..=2));
    let mut head = AttentionHead::new(n, n_t, n_c, p, len, rng).unwrap();
    randomize(head.v_mut(), 0.5, rng);
    let z: Vec<Vec<f32>> = (0..len).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let w: Vec<Vec<f32>> = (0..len).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let bp = Backprop::surrogate(rule);
    let (_, cache) = head.forward_train(&z, &bp, &mut OpCounts::default()).unwrap();
    let (dz, grads) = head.backward(&cache, &w, &bp, &mut OpCounts::default()).unwrap();
    let sel: Vec<Vec<Vec<(RowIndex, usize)>>> = (0..n_t)
        .map(|t| (0..len).map(|i| (0..i).map(|j| (cache.row_index(t, i, j), cache.selection(t, i, j).r)).collect()).collect())
        .collect();
    let z64: Vec<Vec<f64>> = z.iter().map(|v| to64(v)).collect();
    let w64: Vec<Vec<f64>> = w.iter().map(|v| to64(v)).collect();
    let pe64: Vec<Vec<f64>> = (0..len - 1).map(|d| to64(head.pe().row(d))).collect();
    let no_flip = rule == LearningRule::NoFlip;
    if frozen_attention(&head, &sel, &z64, &pe64, &w64, no_flip).1 <= MARGIN {
        return None;
    }
    let flat_z: Vec<f64> = z64.concat();
    let fd_z = central_diff(&flat_z, H, |v| {
        let zz: Vec<Vec<f64>> = v.chunks(n).map(|c| c.to_vec()).collect();
        frozen_attention(&head, &sel, &zz, &pe64, &w64, no_flip).0
    });
    let flat_pe: Vec<f64> = pe64.concat();
    let fd_pe = central_diff(&flat_pe, H, |v| {
        let pp: Vec<Vec<f64>> = v.chunks(p).map(|c| c.to_vec()).collect();
        frozen_attention(&head, &sel, &z64, &pp, &w64, no_flip).0
    });
    let an_pe: Vec<f64> = (0..len - 1)
        .flat_map(|d| grads.pe.get(0, d as RowIndex).map_or(vec![0.0; p], to64))
        .collect();
    let ez = rel_err(&to64(&dz.concat()), &fd_z);
    let epe = rel_err(&an_pe, &fd_pe);
    Some((ez, epe))
}

/// Worst relative errors of `dL/dz` and `dL/dPE` on three-token heads.
pub fn attention_worst(rule: LearningRule, seed: u64, instances: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut done, mut wz, mut wpe) = (0, 0.0f64, 0.0f64);
    while done < instances {
        if let Some((ez, epe)) = attention_case(&mut rng, rule) {
            wz = wz.max(ez);
            wpe = wpe.max(epe);
            done += 1;
        }
    }
    (wz, wpe)
}

/// Worst relative errors of hyperplane anchor and input gradients.
pub fn hyperplane_worst(seed: u64, instances: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut done, mut worst_c, mut worst_x) = (0, 0.0f64, 0.0f64);
    while done < instances {
        let (n, n_out) = (rng.random_range(3..=6), rng.random_range(2..=4));
        let mut t = LutTransform::new(n, n_out, rng.random_range(1..=3), rng.random_range(1..=3), HashMode::HyperplaneSign, false, &mut rng).unwrap();
        randomize(&mut t, 0.5, &mut rng);
        let x: Vec<f32> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f32> = (0..n_out).map(|_| rng.random_range(-1.0..1.0)).collect();
        let bp = Backprop::surrogate(LearningRule::MinPairFlip);
        let (_, cache) = t.forward_train(&x, &bp, &mut OpCounts::default()).unwrap();
        let sel: Vec<(RowIndex, usize)> = cache.tables.iter().map(|c| (c.row, c.r_min)).collect();
        let planes: Vec<Vec<Vec<f64>>> = t
            .tables()
            .iter()
            .map(|tab| match tab.anchors() {
                AnchorSet::HyperplaneSign { planes } => planes.iter().map(|p| to64(p)).collect(),
                _ => unreachable!(),
            })
            .collect();
        let (x64, v64) = (to64(&x), to64(&v));
        if frozen_layer(&t, &sel, &x64, false, Some(&planes)).1 <= MARGIN {
            continue;
        }
        done += 1;
        let pg = t.hyperplane_anchor_grads(&cache, &x, &v, &ReciprocalAbs).unwrap();
        for g in &pg {
            let fd = central_diff(&planes[g.table][g.plane], H, |c| {
                let mut p = planes.clone();
                p[g.table][g.plane] = c.to_vec();
                dot(&frozen_layer(&t, &sel, &x64, false, Some(&p)).0, &v64)
            });
            worst_c = worst_c.max(rel_err(&to64(&g.grad), &fd));
        }
        let (dx, _) = t.backward(&cache, &v, &bp, &mut OpCounts::default()).unwrap();
        let fd = central_diff(&x64, H, |x| dot(&frozen_layer(&t, &sel, x, false, Some(&planes)).0, &v64));
        worst_x = worst_x.max(rel_err(&to64(&dx), &fd));
    }
    (worst_c, worst_x)
}
