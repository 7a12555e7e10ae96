use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ScheduleKind {
    /// `scale * min(step^{-1/2}, step * warmup^{-3/2})`.
    #[default]
    Warmup,
    Constant,
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScheduleKind::Warmup => "warmup",
            ScheduleKind::Constant => "constant",
        })
    }
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "warmup" => Ok(ScheduleKind::Warmup),
            "constant" => Ok(ScheduleKind::Constant),
            _ => Err(Error::Config(format!("unknown schedule `{s}` (expected warmup or constant)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrSchedule {
    pub kind: ScheduleKind,
    pub scale: f32,
    pub warmup: u64,
}

impl LrSchedule {
    pub fn new(kind: ScheduleKind, scale: f32, warmup: u64) -> Self {
        LrSchedule { kind, scale, warmup }
    }

    pub fn constant(scale: f32) -> Self {
        Self::new(ScheduleKind::Constant, scale, 0)
    }

    /// Learning rate at `step` (1-based).
    pub fn lr(&self, step: u64) -> f32 {
        match self.kind {
            ScheduleKind::Constant => self.scale,
            ScheduleKind::Warmup => {
                let s = step.max(1) as f64;
                let w = self.warmup.max(1) as f64;
                (self.scale as f64 * s.powf(-0.5).min(s * w.powf(-1.5))) as f32
            }
        }
    }
}
