//! Command-line front end. [`run`] parses arguments, dispatches, and
//! returns the process exit code: 0 ok, 1 runtime failure, 2 usage error.

pub mod selftest;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::models::concat_index;
use crate::resources::{
    ann_transformer_report, binned_capacity, capacity, factorial_capacity, snn_rnn_report, snn_transformer_report,
    snn_transformer_table, AnnTransformerConfig, ResourceReport, SnnTransformerShape,
};
use crate::train::{evaluate, load_checkpoint, load_corpus, train_loop, CurvePoint, TrainConfig, TrainOptions, TrainState};

#[derive(Parser, Debug)]
#[command(name = "polychron", version, about = "Look-up-table spiking networks: train, evaluate, generate and cost them")]
pub struct Cli {
    /// Worker threads for batch-parallel training and evaluation (0 = one per core)
    #[arg(long, global = true, env = "POLYCHRON_THREADS", default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

// parsed once per process; boxing buys nothing
#[allow(clippy::large_enum_variant)]
#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a byte-level language model
    Train(TrainArgs),
    /// Print validation bits per character of a checkpoint
    Eval(EvalArgs),
    /// Sample bytes from a checkpoint
    Generate(GenerateArgs),
    /// Print memory, bandwidth and compute costs
    Resources(ResourcesArgs),
    /// Print pattern capacities
    Capacity(CapacityArgs),
    /// Run the built-in consistency suites
    Selftest(SelftestArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// INI file with [model], [train] and [data] sections
    #[arg(long)]
    pub config: PathBuf,
    /// Training text
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for curve.csv and step_<k>.ckpt
    #[arg(long)]
    pub out: PathBuf,
    /// Continue from a checkpoint
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Override train.seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override any config key, e.g. --set train.max_steps=500 (repeatable)
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Text whose validation split is scored
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long, default_value = "")]
    pub prompt: String,
    /// Bytes to generate
    #[arg(long, default_value_t = 200)]
    pub len: usize,
    /// Softmax temperature
    #[arg(long, default_value_t = 1.0)]
    pub temp: f32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelChoice {
    Rnn,
    SnnTransformer,
    AnnTransformer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Scope {
    /// One layer and one head (SNN transformer) or one layer (transformer)
    Layer,
    /// Every layer and head plus embedder and unembedder
    Model,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

/// Unset parameters take the defaults of the chosen model: rnn n=64 n_t=64
/// n_c=10 n_t_u=64 n_c_u=6; snn-transformer n=16 n_t=10 n_c=6 p=4 n_inp=32
/// heads=1 layers=6 n_t_u=16 n_c_u=6; ann-transformer d_model=512 d_k=64
/// d_ff=2048 n_inp=32 heads=8 layers=6.
#[derive(Args, Debug)]
pub struct ResourcesArgs {
    #[arg(long, value_enum)]
    pub model: ModelChoice,
    /// Latency vector width (rnn, snn-transformer)
    #[arg(long)]
    pub n: Option<u128>,
    /// Tables per transform (rnn S, snn-transformer V and FFN)
    #[arg(long)]
    pub n_t: Option<u128>,
    /// Comparisons per table
    #[arg(long)]
    pub n_c: Option<u128>,
    /// Unembedder tables
    #[arg(long)]
    pub n_t_u: Option<u128>,
    /// Unembedder comparisons per table
    #[arg(long)]
    pub n_c_u: Option<u128>,
    /// Positional-encoding bits (snn-transformer)
    #[arg(long)]
    pub p: Option<u128>,
    /// Context length (transformers)
    #[arg(long)]
    pub n_inp: Option<u128>,
    /// Heads per layer (transformers)
    #[arg(long)]
    pub heads: Option<u128>,
    /// Layers (transformers)
    #[arg(long)]
    pub layers: Option<u128>,
    /// Include the feed-forward transform in whole-model costs (snn-transformer)
    #[arg(long)]
    pub ffn: bool,
    /// Model width (ann-transformer)
    #[arg(long)]
    pub d_model: Option<u128>,
    /// Key width (ann-transformer)
    #[arg(long)]
    pub d_k: Option<u128>,
    /// Feed-forward width (ann-transformer)
    #[arg(long)]
    pub d_ff: Option<u128>,
    #[arg(long, value_enum, default_value_t = Scope::Layer)]
    pub scope: Scope,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct CapacityArgs {
    /// Tables, for the 2^(n_t*n_c) pattern count
    #[arg(long, default_value_t = 64)]
    pub n_t: u64,
    /// Comparisons per table
    #[arg(long, default_value_t = 10)]
    pub n_c: u64,
    /// Neurons, for the n! orderings
    #[arg(long, default_value_t = 60)]
    pub n: u64,
    /// Latency levels, for the m^n binned patterns
    #[arg(long)]
    pub bins: Option<u64>,
}

#[derive(Args, Debug)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Swap query and key bits in cached attention indices (mutation check)
    #[arg(long, hide = true)]
    pub inject_bit_order_bug: bool,
}

/// Parse `args` (including the program name) and run. Output goes to `out`,
/// diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            if code == 0 {
                let _ = write!(out, "{}", e.render());
                return 0;
            }
            let _ = write!(err, "{}", e.render());
            return 2;
        }
    };
    match dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Train(a) => cmd_train(a, cli.threads, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Generate(a) => cmd_generate(a, out),
        Command::Resources(a) => cmd_resources(a, out),
        Command::Capacity(a) => cmd_capacity(a, out),
        Command::Selftest(a) => cmd_selftest(a, out, err),
    }
}

fn cmd_train(a: &TrainArgs, threads: usize, out: &mut dyn Write) -> Result<i32> {
    let mut cfg = TrainConfig::from_file(&a.config)?;
    for kv in &a.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{kv}' is not SECTION.KEY=VALUE")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = a.seed {
        cfg.train.seed = s;
    }
    cfg.data.path = Some(a.data.clone());
    cfg.validate()?;
    let corpus = load_corpus(&a.data, cfg.data.val_fraction)?;
    let mut state = match &a.resume {
        Some(p) => {
            let ckpt = load_checkpoint(p)?;
            if ckpt.config.model != cfg.model {
                return Err(Error::Config("the [model] section differs from the checkpoint's".into()));
            }
            if ckpt.config.train.seed != cfg.train.seed {
                return Err(Error::Config("train.seed differs from the checkpoint's".into()));
            }
            TrainState::from_checkpoint(ckpt)
        }
        None => TrainState::new(&cfg)?,
    };
    std::fs::create_dir_all(&a.out)?;
    let mut io_err = None;
    let mut print = |p: &CurvePoint| {
        if let Err(e) = writeln!(out, "step {} train_loss {:.4} val_bpc {:.4}", p.step, p.train_loss_nats, p.val_bpc) {
            io_err.get_or_insert(e);
        }
    };
    train_loop(
        &mut state,
        &corpus,
        &cfg,
        TrainOptions {
            out_dir: Some(&a.out),
            threads,
            on_point: Some(&mut print),
        },
    )?;
    match io_err {
        Some(e) => Err(e.into()),
        None => Ok(0),
    }
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<i32> {
    let ckpt = load_checkpoint(&a.ckpt)?;
    let cfg = &ckpt.config;
    let corpus = load_corpus(&a.data, cfg.data.val_fraction)?;
    let bpc = evaluate(&ckpt.model, &corpus.val, cfg.model.n_inp, cfg.train.eval_windows)?;
    writeln!(out, "{bpc:.4}")?;
    Ok(0)
}

fn cmd_generate(a: &GenerateArgs, out: &mut dyn Write) -> Result<i32> {
    let ckpt = load_checkpoint(&a.ckpt)?;
    let bytes = ckpt
        .model
        .generate(a.prompt.as_bytes(), a.len, a.temp, ckpt.config.model.n_inp, a.seed)?;
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(0)
}

/// Build the report selected by `a`.
pub fn resources_report(a: &ResourcesArgs) -> Result<ResourceReport> {
    match a.model {
        ModelChoice::Rnn => snn_rnn_report(
            a.n.unwrap_or(64),
            a.n_t.unwrap_or(64),
            a.n_c.unwrap_or(10),
            a.n_t_u.unwrap_or(64),
            a.n_c_u.unwrap_or(6),
        ),
        ModelChoice::SnnTransformer => {
            let d = SnnTransformerShape::attention_only();
            let s = SnnTransformerShape {
                n: a.n.unwrap_or(d.n),
                n_t: a.n_t.unwrap_or(d.n_t),
                n_c: a.n_c.unwrap_or(d.n_c),
                p: a.p.unwrap_or(d.p),
                n_inp: a.n_inp.unwrap_or(d.n_inp),
                heads: a.heads.unwrap_or(d.heads),
                layers: a.layers.unwrap_or(d.layers),
                ffn: a.ffn,
                n_t_u: a.n_t_u.unwrap_or(d.n_t_u),
                n_c_u: a.n_c_u.unwrap_or(d.n_c_u),
            };
            match a.scope {
                Scope::Layer => snn_transformer_table(&s),
                Scope::Model => snn_transformer_report(&s),
            }
        }
        ModelChoice::AnnTransformer => {
            let d = AnnTransformerConfig::default();
            let c = AnnTransformerConfig {
                d_model: a.d_model.unwrap_or(d.d_model),
                d_k: a.d_k.unwrap_or(d.d_k),
                d_ff: a.d_ff.unwrap_or(d.d_ff),
                n_inp: a.n_inp.unwrap_or(d.n_inp),
                layers: a.layers.unwrap_or(d.layers),
                heads: a.heads.unwrap_or(d.heads),
            };
            let mut r = ann_transformer_report(&c);
            if a.scope == Scope::Model {
                for comp in &mut r.components {
                    comp.footprint *= c.layers;
                    comp.bandwidth.fixed *= c.layers;
                    comp.bandwidth.per_inp *= c.layers;
                    comp.compute.multiplications *= c.layers;
                    comp.compute.additions *= c.layers;
                }
                r.title = "transformer, whole model (embeddings excluded)".into();
            }
            Ok(r)
        }
    }
}

fn cmd_resources(a: &ResourcesArgs, out: &mut dyn Write) -> Result<i32> {
    let r = resources_report(a)?;
    match a.format {
        Format::Text => write!(out, "{}", r.to_text())?,
        Format::Csv => write!(out, "{}", r.to_csv()?)?,
    }
    Ok(0)
}

fn cmd_capacity(a: &CapacityArgs, out: &mut dyn Write) -> Result<i32> {
    writeln!(out, "patterns  log2(2^(n_t*n_c)) = {} bits (n_t={}, n_c={})", capacity(a.n_t, a.n_c), a.n_t, a.n_c)?;
    writeln!(out, "orderings log10({}!) = {:.4}", a.n, factorial_capacity(a.n))?;
    if let Some(m) = a.bins {
        writeln!(out, "binned    log10({m}^{}) = {:.4}", a.n, binned_capacity(a.n, m))?;
    }
    Ok(0)
}

fn cmd_selftest(a: &SelftestArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    fn swapped(q: u64, k: u64, pe: u64, n_c: usize, p: usize) -> u64 {
        concat_index(k, q, pe, n_c, p)
    }
    let concat = if a.inject_bit_order_bug { swapped } else { concat_index };
    let results = selftest::run_all(a.seed, concat);
    let mut ok = true;
    for r in &results {
        writeln!(out, "{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail)?;
        ok &= r.passed;
    }
    if !ok {
        writeln!(err, "selftest failed")?;
    }
    Ok(if ok { 0 } else { 1 })
}
