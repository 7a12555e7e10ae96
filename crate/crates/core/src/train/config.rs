//! Run configuration: INI files with `[model]`, `[train]` and `[data]`
//! sections, flag overrides, and the flat `section.key=value` form stored in
//! checkpoints.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use crate::autograd::LearningRule;
use crate::error::{Error, Result};
use crate::lut::HashMode;
use crate::models::{Combine, RnnConfig, TransformerConfig};
use crate::train::schedule::{LrSchedule, ScheduleKind};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ModelKind {
    #[default]
    Rnn,
    Transformer,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Rnn => "rnn",
            ModelKind::Transformer => "transformer",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rnn" => Ok(ModelKind::Rnn),
            "transformer" | "snn-transformer" => Ok(ModelKind::Transformer),
            _ => Err(Error::Config(format!("unknown model kind `{s}` (expected rnn or transformer)"))),
        }
    }
}

/// `pairwise`, `component`, `hyperplane`, `bins:M` or `bins:M:LO:HI`.
pub fn parse_mode(s: &str) -> Result<HashMode> {
    let bad = || Error::Config(format!("bad hash mode `{s}`"));
    match s {
        "pairwise" => Ok(HashMode::PairwiseSign),
        "component" => Ok(HashMode::ComponentSign),
        "hyperplane" => Ok(HashMode::HyperplaneSign),
        _ => {
            let parts: Vec<&str> = s.split(':').collect();
            match parts.as_slice() {
                ["bins", m] => Ok(HashMode::bins(m.parse().map_err(|_| bad())?)),
                ["bins", m, lo, hi] => Ok(HashMode::BinQuantized {
                    bins: m.parse().map_err(|_| bad())?,
                    lo: lo.parse().map_err(|_| bad())?,
                    hi: hi.parse().map_err(|_| bad())?,
                }),
                _ => Err(bad()),
            }
        }
    }
}

pub fn mode_to_string(mode: HashMode) -> String {
    match mode {
        HashMode::PairwiseSign => "pairwise".into(),
        HashMode::ComponentSign => "component".into(),
        HashMode::HyperplaneSign => "hyperplane".into(),
        HashMode::BinQuantized { bins, lo, hi } => format!("bins:{bins}:{lo}:{hi}"),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub n: usize,
    pub n_t: usize,
    pub n_c: usize,
    pub n_t_u: usize,
    pub n_c_u: usize,
    pub mode: HashMode,
    pub combine: Combine,
    pub p: usize,
    pub heads: usize,
    pub layers: usize,
    pub ffn: bool,
    pub ffn_n_t: usize,
    pub ffn_n_c: usize,
    pub n_inp: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: ModelKind::Rnn,
            n: 32,
            n_t: 16,
            n_c: 8,
            n_t_u: 16,
            n_c_u: 6,
            mode: HashMode::PairwiseSign,
            combine: Combine::Additive,
            p: 4,
            heads: 1,
            layers: 2,
            ffn: true,
            ffn_n_t: 16,
            ffn_n_c: 6,
            n_inp: 32,
        }
    }
}

impl ModelConfig {
    pub fn rnn(&self) -> RnnConfig {
        RnnConfig {
            n: self.n,
            n_t: self.n_t,
            n_c: self.n_c,
            n_t_u: self.n_t_u,
            n_c_u: self.n_c_u,
            mode: self.mode,
            combine: self.combine,
        }
    }

    pub fn transformer(&self) -> TransformerConfig {
        TransformerConfig {
            n: self.n,
            n_t: self.n_t,
            n_c: self.n_c,
            p: self.p,
            n_inp: self.n_inp,
            heads: self.heads,
            layers: self.layers,
            ffn: self.ffn,
            ffn_n_t: self.ffn_n_t,
            ffn_n_c: self.ffn_n_c,
            n_t_u: self.n_t_u,
            n_c_u: self.n_c_u,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSettings {
    pub rule: LearningRule,
    pub schedule: ScheduleKind,
    /// `None` means `n^{-1/2}`.
    pub lr_scale: Option<f32>,
    pub warmup_steps: u64,
    pub batch_size: usize,
    pub max_steps: u64,
    pub eval_interval: u64,
    /// `0` means "same as `eval_interval`".
    pub ckpt_interval: u64,
    pub seed: u64,
    pub stop_bpc: Option<f64>,
    /// Cap on validation windows per evaluation; `0` evaluates all of them.
    pub eval_windows: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            rule: LearningRule::MinPairFlip,
            schedule: ScheduleKind::Warmup,
            lr_scale: None,
            warmup_steps: 4000,
            batch_size: 16,
            max_steps: 1000,
            eval_interval: 100,
            ckpt_interval: 0,
            seed: 0,
            stop_bpc: None,
            eval_windows: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataConfig {
    pub val_fraction: f64,
    pub path: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            val_fraction: 0.05,
            path: None,
        }
    }
}

/// Everything that determines a training run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub train: TrainSettings,
    pub data: DataConfig,
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected a boolean, got `{value}`"))),
    }
}

fn optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value.trim() {
        "" | "none" => Ok(None),
        v => num(key, v).map(Some),
    }
}

fn opt_to_string<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".into(), T::to_string)
}

impl TrainConfig {
    /// Every key accepted by [`set`](Self::set), in `section.key` form.
    pub const KEYS: [&'static str; 28] = [
        "model.kind",
        "model.n",
        "model.n_t",
        "model.n_c",
        "model.n_t_u",
        "model.n_c_u",
        "model.mode",
        "model.combine",
        "model.p",
        "model.heads",
        "model.layers",
        "model.ffn",
        "model.ffn_n_t",
        "model.ffn_n_c",
        "model.n_inp",
        "train.rule",
        "train.schedule",
        "train.lr_scale",
        "train.warmup_steps",
        "train.batch_size",
        "train.max_steps",
        "train.eval_interval",
        "train.ckpt_interval",
        "train.seed",
        "train.stop_bpc",
        "train.eval_windows",
        "data.val_fraction",
        "data.path",
    ];

    /// Set one `section.key`. Unknown keys are rejected by name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let m = &mut self.model;
        let t = &mut self.train;
        match key {
            "model.kind" => m.kind = v.parse()?,
            "model.n" => m.n = num(key, v)?,
            "model.n_t" => m.n_t = num(key, v)?,
            "model.n_c" => m.n_c = num(key, v)?,
            "model.n_t_u" => m.n_t_u = num(key, v)?,
            "model.n_c_u" => m.n_c_u = num(key, v)?,
            "model.mode" => m.mode = parse_mode(v)?,
            "model.combine" => m.combine = v.parse()?,
            "model.p" => m.p = num(key, v)?,
            "model.heads" => m.heads = num(key, v)?,
            "model.layers" => m.layers = num(key, v)?,
            "model.ffn" => m.ffn = flag(key, v)?,
            "model.ffn_n_t" => m.ffn_n_t = num(key, v)?,
            "model.ffn_n_c" => m.ffn_n_c = num(key, v)?,
            "model.n_inp" => m.n_inp = num(key, v)?,
            "train.rule" => t.rule = v.trim().parse()?,
            "train.schedule" => t.schedule = v.parse()?,
            "train.lr_scale" => t.lr_scale = optional(key, v)?,
            "train.warmup_steps" => t.warmup_steps = num(key, v)?,
            "train.batch_size" => t.batch_size = num(key, v)?,
            "train.max_steps" => t.max_steps = num(key, v)?,
            "train.eval_interval" => t.eval_interval = num(key, v)?,
            "train.ckpt_interval" => t.ckpt_interval = num(key, v)?,
            "train.seed" => t.seed = num(key, v)?,
            "train.stop_bpc" => t.stop_bpc = optional(key, v)?,
            "train.eval_windows" => t.eval_windows = num(key, v)?,
            "data.val_fraction" => self.data.val_fraction = num(key, v)?,
            "data.path" => self.data.path = (!v.is_empty() && v != "none").then(|| PathBuf::from(v)),
            _ => return Err(Error::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Result<String> {
        let m = &self.model;
        let t = &self.train;
        Ok(match key {
            "model.kind" => m.kind.to_string(),
            "model.n" => m.n.to_string(),
            "model.n_t" => m.n_t.to_string(),
            "model.n_c" => m.n_c.to_string(),
            "model.n_t_u" => m.n_t_u.to_string(),
            "model.n_c_u" => m.n_c_u.to_string(),
            "model.mode" => mode_to_string(m.mode),
            "model.combine" => m.combine.to_string(),
            "model.p" => m.p.to_string(),
            "model.heads" => m.heads.to_string(),
            "model.layers" => m.layers.to_string(),
            "model.ffn" => m.ffn.to_string(),
            "model.ffn_n_t" => m.ffn_n_t.to_string(),
            "model.ffn_n_c" => m.ffn_n_c.to_string(),
            "model.n_inp" => m.n_inp.to_string(),
            "train.rule" => t.rule.to_string(),
            "train.schedule" => t.schedule.to_string(),
            "train.lr_scale" => opt_to_string(&t.lr_scale),
            "train.warmup_steps" => t.warmup_steps.to_string(),
            "train.batch_size" => t.batch_size.to_string(),
            "train.max_steps" => t.max_steps.to_string(),
            "train.eval_interval" => t.eval_interval.to_string(),
            "train.ckpt_interval" => t.ckpt_interval.to_string(),
            "train.seed" => t.seed.to_string(),
            "train.stop_bpc" => opt_to_string(&t.stop_bpc),
            "train.eval_windows" => t.eval_windows.to_string(),
            "data.val_fraction" => self.data.val_fraction.to_string(),
            "data.path" => self
                .data
                .path
                .as_ref()
                .map_or_else(|| "none".into(), |p| p.display().to_string()),
            _ => return Err(Error::UnknownKey(key.to_string())),
        })
    }

    /// Parse INI text on top of the defaults.
    pub fn from_ini_str(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str_noescape(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut cfg = TrainConfig::default();
        for (section, props) in &ini {
            match section {
                None => {
                    if let Some((k, _)) = props.iter().next() {
                        return Err(Error::Config(format!("key `{k}` appears before any [section]")));
                    }
                }
                Some(s) => {
                    for (k, v) in props.iter() {
                        cfg.set(&format!("{s}.{k}"), v)?;
                    }
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_ini_str(&std::fs::read_to_string(path)?)
    }

    /// `section.key=value` lines covering every key.
    pub fn to_kv_lines(&self) -> String {
        Self::KEYS
            .iter()
            .map(|k| format!("{k}={}\n", self.get(k).expect("listed key")))
            .collect()
    }

    pub fn from_kv_lines(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got `{line}`")))?;
            cfg.set(k.trim(), v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn lr_schedule(&self) -> LrSchedule {
        let scale = self.train.lr_scale.unwrap_or(1.0 / (self.model.n as f32).sqrt());
        LrSchedule::new(self.train.schedule, scale, self.train.warmup_steps)
    }

    pub fn ckpt_interval(&self) -> u64 {
        if self.train.ckpt_interval == 0 {
            self.train.eval_interval
        } else {
            self.train.ckpt_interval
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        let t = &self.train;
        let positive = [
            ("model.n", m.n),
            ("model.n_t", m.n_t),
            ("model.n_c", m.n_c),
            ("model.n_t_u", m.n_t_u),
            ("model.n_c_u", m.n_c_u),
            ("model.n_inp", m.n_inp),
            ("train.batch_size", t.batch_size),
        ];
        for (k, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("`{k}` must be positive")));
            }
        }
        if t.eval_interval == 0 {
            return Err(Error::Config("`train.eval_interval` must be positive".into()));
        }
        if m.kind == ModelKind::Transformer {
            for (k, v) in [("model.heads", m.heads), ("model.layers", m.layers)] {
                if v == 0 {
                    return Err(Error::Config(format!("`{k}` must be positive")));
                }
            }
            if m.ffn && (m.ffn_n_t == 0 || m.ffn_n_c == 0) {
                return Err(Error::Config("feed-forward needs positive ffn_n_t and ffn_n_c".into()));
            }
            if !matches!(t.rule, LearningRule::MinPairFlip | LearningRule::NoFlip) {
                return Err(Error::Config(format!(
                    "the transformer trains with min-pair-flip or no-flip, not {}",
                    t.rule
                )));
            }
            if m.mode != HashMode::PairwiseSign {
                return Err(Error::Config("the transformer uses pairwise hashing only".into()));
            }
        }
        if t.rule == LearningRule::SpikingScalar {
            return Err(Error::Config(
                "spiking-scalar is a deep-network rule; sequence models use the dense rules".into(),
            ));
        }
        if !(self.data.val_fraction > 0.0 && self.data.val_fraction < 1.0) {
            return Err(Error::Config(format!(
                "`data.val_fraction` must be in (0, 1), got {}",
                self.data.val_fraction
            )));
        }
        if let Some(s) = t.lr_scale {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::Config(format!("`train.lr_scale` must be finite and >= 0, got {s}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_defaults() {
        let cfg = TrainConfig::from_ini_str("[model]\nn = 8\nmode = bins:4\n[train]\nseed = 7\nstop_bpc = 2.5\n").unwrap();
        assert_eq!(cfg.model.n, 8);
        assert_eq!(cfg.model.mode, HashMode::bins(4));
        assert_eq!(cfg.train.seed, 7);
        assert_eq!(cfg.train.stop_bpc, Some(2.5));
        assert_eq!(cfg.model.n_t, ModelConfig::default().n_t);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = TrainConfig::from_ini_str("[model]\nwidth = 8\n").unwrap_err();
        assert!(matches!(err, Error::UnknownKey(ref k) if k == "model.width"), "{err}");
        let err = TrainConfig::from_ini_str("[optim]\nlr = 1\n").unwrap_err();
        assert!(matches!(err, Error::UnknownKey(ref k) if k == "optim.lr"), "{err}");
    }

    #[test]
    fn kv_round_trip() {
        let mut cfg = TrainConfig::default();
        cfg.set("train.lr_scale", "0.1").unwrap();
        cfg.set("model.mode", "bins:3:-0.5:0.25").unwrap();
        cfg.set("data.path", "/tmp/x.txt").unwrap();
        assert_eq!(TrainConfig::from_kv_lines(&cfg.to_kv_lines()).unwrap(), cfg);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(TrainConfig::from_ini_str("[model]\nn = 0\n").is_err());
        assert!(TrainConfig::from_ini_str("[model]\nn = many\n").is_err());
        assert!(TrainConfig::from_ini_str("[data]\nval_fraction = 1.5\n").is_err());
        assert!(TrainConfig::from_ini_str("n = 3\n").is_err());
    }
}
