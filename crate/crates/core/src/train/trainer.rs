//! Training and evaluation loops.
//!
//! Per step, `batch_size` windows of `n_inp + 1` bytes are drawn from the
//! run's random stream; each window is processed independently (in
//! parallel) and the resulting gradients are merged in slot order, so the
//! outcome does not depend on the thread count.

use std::fs::{File, OpenOptions};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::autograd::Backprop;
use crate::error::{Error, Result};
use crate::lut::OpCounts;
use crate::models::{Gradients, SequenceModel};
use crate::train::checkpoint::{save_checkpoint, Checkpoint};
use crate::train::config::TrainConfig;
use crate::train::corpus::{eval_windows, Corpus};
use crate::train::loss::{nats_to_bits, softmax_cross_entropy};
use crate::train::model::Model;

/// One row of the training curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub step: u64,
    pub train_loss_nats: f64,
    pub val_bpc: f64,
}

/// Model plus the position of the run.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub model: Model,
    pub step: u64,
    pub rng: ChaCha8Rng,
}

impl TrainState {
    /// Fresh run. The model seed and the window stream both come from the
    /// single generator seeded with `train.seed`.
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
        let model_seed = rng.random::<u64>();
        let model = Model::build(&cfg.model, model_seed)?;
        Ok(TrainState { model, step: 0, rng })
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(ckpt.config.train.seed);
        rng.set_word_pos(ckpt.rng_word_pos);
        TrainState {
            model: ckpt.model,
            step: ckpt.step,
            rng,
        }
    }

    pub fn checkpoint(&self, cfg: &TrainConfig) -> Checkpoint {
        Checkpoint {
            config: cfg.clone(),
            step: self.step,
            rng_word_pos: self.rng.get_word_pos(),
            model: self.model.clone(),
        }
    }
}

/// Where and how the loop reports.
#[derive(Default)]
pub struct TrainOptions<'a> {
    /// Directory for `curve.csv` and `step_<k>.ckpt`.
    pub out_dir: Option<&'a Path>,
    /// Worker threads; `0` lets rayon decide.
    pub threads: usize,
    pub on_point: Option<&'a mut dyn FnMut(&CurvePoint)>,
}

pub const CURVE_HEADER: [&str; 3] = ["step", "train_loss_nats", "val_bpc"];

fn curve_writer(out: &Path, fresh: bool) -> Result<csv::Writer<File>> {
    let path = out.join("curve.csv");
    let exists = path.exists();
    let file = if fresh {
        File::create(&path)?
    } else {
        OpenOptions::new().append(true).create(true).open(&path)?
    };
    let mut w = csv::Writer::from_writer(file);
    if fresh || !exists {
        w.write_record(CURVE_HEADER).map_err(csv_err)?;
        w.flush()?;
    }
    Ok(w)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn write_point(w: &mut csv::Writer<File>, p: &CurvePoint) -> Result<()> {
    w.write_record([p.step.to_string(), p.train_loss_nats.to_string(), p.val_bpc.to_string()])
        .map_err(csv_err)?;
    w.flush()?;
    Ok(())
}

/// Summed next-byte loss over a window (`window[1..]` are the targets) and
/// the gradients of `scale * loss`.
pub fn window_grads<M: SequenceModel>(model: &M, window: &[u8], bp: &Backprop<'_>, scale: f32) -> Result<(f64, M::Grads)> {
    if window.len() < 2 {
        return Err(Error::EmptySequence);
    }
    let mut counts = OpCounts::default();
    let (logits, cache) = model.forward_train(&window[..window.len() - 1], bp, &mut counts)?;
    let mut loss = 0.0;
    let mut dl = Vec::with_capacity(logits.len());
    for (l, &t) in logits.iter().zip(&window[1..]) {
        let (c, mut g) = softmax_cross_entropy(l, t);
        loss += c;
        g.iter_mut().for_each(|g| *g *= scale);
        dl.push(g);
    }
    if !loss.is_finite() {
        // diverged: the caller reports it, there is nothing to differentiate
        return Ok((loss, M::Grads::default()));
    }
    let grads = model.backward(&cache, &dl, bp, &mut counts)?;
    Ok((loss, grads))
}

/// Mean loss (nats per byte) of a batch and its merged gradients.
pub fn batch_grads<M: SequenceModel + Sync>(
    model: &M,
    windows: &[&[u8]],
    bp: &Backprop<'_>,
    pool: Option<&ThreadPool>,
) -> Result<(f64, M::Grads)> {
    let targets: usize = windows.iter().map(|w| w.len() - 1).sum();
    let scale = 1.0 / targets as f32;
    let work = || -> Vec<Result<(f64, M::Grads)>> {
        windows.par_iter().map(|w| window_grads(model, w, bp, scale)).collect()
    };
    let results = match pool {
        Some(p) => p.install(work),
        None => work(),
    };
    let mut loss = 0.0;
    let mut grads = M::Grads::default();
    for r in results {
        let (l, g) = r?;
        loss += l;
        grads.merge(&g);
    }
    Ok((loss / targets as f64, grads))
}

fn window_loss<M: SequenceModel>(model: &M, w: &[u8]) -> Result<f64> {
    let logits = model.forward(&w[..w.len() - 1])?;
    Ok(logits.iter().zip(&w[1..]).map(|(l, &t)| softmax_cross_entropy(l, t).0).sum())
}

/// Mean base-2 cross-entropy over the validation windows (inference mode).
/// `max_windows == 0` uses all of them.
pub fn evaluate_model<M: SequenceModel + Sync>(model: &M, val: &[u8], n_inp: usize, max_windows: usize, pool: Option<&ThreadPool>) -> Result<f64> {
    let mut windows = eval_windows(val, n_inp);
    if windows.is_empty() {
        return Err(Error::Corpus(format!(
            "validation split of {} bytes holds no window of {}",
            val.len(),
            n_inp + 1
        )));
    }
    if max_windows > 0 {
        windows.truncate(max_windows);
    }
    let work = || -> Vec<Result<f64>> { windows.par_iter().map(|w| window_loss(model, w)).collect() };
    let losses = match pool {
        Some(p) => p.install(work),
        None => work(),
    };
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(nats_to_bits(total / (windows.len() * n_inp) as f64))
}

pub fn evaluate(model: &Model, val: &[u8], n_inp: usize, max_windows: usize) -> Result<f64> {
    match model {
        Model::Rnn(m) => evaluate_model(m, val, n_inp, max_windows, None),
        Model::Transformer(m) => evaluate_model(m, val, n_inp, max_windows, None),
    }
}

struct Ctx<'a> {
    cfg: &'a TrainConfig,
    corpus: &'a Corpus,
    pool: &'a ThreadPool,
    bp: Backprop<'static>,
}

fn eval_any(model: &Model, ctx: &Ctx<'_>) -> Result<f64> {
    let t = &ctx.cfg.train;
    let n_inp = ctx.cfg.model.n_inp;
    match model {
        Model::Rnn(m) => evaluate_model(m, &ctx.corpus.val, n_inp, t.eval_windows, Some(ctx.pool)),
        Model::Transformer(m) => evaluate_model(m, &ctx.corpus.val, n_inp, t.eval_windows, Some(ctx.pool)),
    }
}

fn step_any(model: &mut Model, windows: &[&[u8]], lr: f32, ctx: &Ctx<'_>) -> Result<f64> {
    fn go<M: SequenceModel + Sync>(m: &mut M, windows: &[&[u8]], lr: f32, ctx: &Ctx<'_>) -> Result<f64> {
        let (loss, grads) = batch_grads(m, windows, &ctx.bp, Some(ctx.pool))?;
        if loss.is_finite() {
            m.apply_update(&grads, lr)?;
        }
        Ok(loss)
    }
    match model {
        Model::Rnn(m) => go(m, windows, lr, ctx),
        Model::Transformer(m) => go(m, windows, lr, ctx),
    }
}

fn loss_any(model: &Model, windows: &[&[u8]], ctx: &Ctx<'_>) -> Result<f64> {
    fn go<M: SequenceModel + Sync>(m: &M, windows: &[&[u8]], ctx: &Ctx<'_>) -> Result<f64> {
        let work = || -> Vec<Result<f64>> { windows.par_iter().map(|w| window_loss(m, w)).collect() };
        let mut total = 0.0;
        for l in ctx.pool.install(work) {
            total += l?;
        }
        let targets: usize = windows.iter().map(|w| w.len() - 1).sum();
        Ok(total / targets as f64)
    }
    match model {
        Model::Rnn(m) => go(m, windows, ctx),
        Model::Transformer(m) => go(m, windows, ctx),
    }
}

/// Run from `state.step` to `train.max_steps` (or until validation BPC
/// drops below `train.stop_bpc`). A fresh run (step 0) first records a
/// baseline point whose training loss comes from a probe batch.
/// A fresh run with `max_steps == 0` checkpoints the untrained model.
pub fn train_loop(state: &mut TrainState, corpus: &Corpus, cfg: &TrainConfig, mut opts: TrainOptions<'_>) -> Result<Vec<CurvePoint>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let ctx = Ctx {
        cfg,
        corpus,
        pool: &pool,
        bp: Backprop::with_rule(cfg.train.rule),
    };
    let t = &cfg.train;
    let win = cfg.model.n_inp + 1;
    let schedule = cfg.lr_schedule();
    let mut curve = Vec::new();
    let fresh = state.step == 0;
    let mut writer = opts.out_dir.map(|d| curve_writer(d, fresh)).transpose()?;
    let mut emit = |p: CurvePoint, curve: &mut Vec<CurvePoint>| -> Result<()> {
        if let Some(w) = writer.as_mut() {
            write_point(w, &p)?;
        }
        if let Some(f) = opts.on_point.as_mut() {
            f(&p);
        }
        curve.push(p);
        Ok(())
    };
    let save = |state: &TrainState| -> Result<()> {
        if let Some(d) = opts.out_dir {
            save_checkpoint(&d.join(format!("step_{}.ckpt", state.step)), &state.checkpoint(cfg))?;
        }
        Ok(())
    };

    if fresh {
        let mut probe_rng = ChaCha8Rng::seed_from_u64(t.seed ^ 0x9e37_79b9_7f4a_7c15);
        let probe: Vec<&[u8]> = (0..t.batch_size)
            .map(|_| corpus.sample_train(win, &mut probe_rng))
            .collect::<Result<_>>()?;
        let p = CurvePoint {
            step: 0,
            train_loss_nats: loss_any(&state.model, &probe, &ctx)?,
            val_bpc: eval_any(&state.model, &ctx)?,
        };
        emit(p, &mut curve)?;
    }

    while state.step < t.max_steps {
        let step = state.step + 1;
        let windows: Vec<&[u8]> = (0..t.batch_size)
            .map(|_| corpus.sample_train(win, &mut state.rng))
            .collect::<Result<_>>()?;
        let loss = match step_any(&mut state.model, &windows, schedule.lr(step), &ctx) {
            Err(Error::NonFinite(_)) => f64::NAN,
            r => r?,
        };
        if !loss.is_finite() {
            return Err(Error::Divergence { step });
        }
        state.step = step;
        let last = step == t.max_steps;
        let mut stop = false;
        if step.is_multiple_of(t.eval_interval) || last {
            let val_bpc = eval_any(&state.model, &ctx)?;
            emit(
                CurvePoint {
                    step,
                    train_loss_nats: loss,
                    val_bpc,
                },
                &mut curve,
            )?;
            stop = t.stop_bpc.is_some_and(|s| val_bpc < s);
        }
        if step.is_multiple_of(cfg.ckpt_interval()) || last || stop {
            save(state)?;
        }
        if stop {
            break;
        }
    }
    if fresh && t.max_steps == 0 {
        save(state)?;
    }
    Ok(curve)
}
