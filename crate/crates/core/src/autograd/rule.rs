use std::fmt;
use std::str::FromStr;

use crate::autograd::uncertainty::{ReciprocalAbs, UncertaintyFn};
use crate::error::Error;

/// How the gradient is routed back through a look-up transform.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum LearningRule {
    /// Per table, the comparison nearest zero and its flipped row.
    #[default]
    MinPairFlip,
    /// Every comparison of every table, scaled by `1 / n_c`.
    AllPairs,
    /// Per table min pair, but the flipped row is taken as zero.
    NoFlip,
    /// Only the table holding the layer-wide smallest margin contributes.
    LayerMinimal,
    /// `NoFlip` and `LayerMinimal` together; the signal between layers is a
    /// single scalar per layer.
    SpikingScalar,
}

impl LearningRule {
    pub const ALL: [LearningRule; 5] = [
        LearningRule::MinPairFlip,
        LearningRule::AllPairs,
        LearningRule::NoFlip,
        LearningRule::LayerMinimal,
        LearningRule::SpikingScalar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LearningRule::MinPairFlip => "min-pair-flip",
            LearningRule::AllPairs => "all-pairs",
            LearningRule::NoFlip => "no-flip",
            LearningRule::LayerMinimal => "layer-minimal",
            LearningRule::SpikingScalar => "spiking-scalar",
        }
    }

    /// Whether the forward pass must keep every margin.
    pub fn needs_all_margins(self) -> bool {
        self == LearningRule::AllPairs
    }

    /// Whether backward reads the neighbouring row.
    pub fn uses_flipped_row(self) -> bool {
        matches!(
            self,
            LearningRule::MinPairFlip | LearningRule::AllPairs | LearningRule::LayerMinimal
        )
    }

    pub(crate) fn layer_minimal_only(self) -> bool {
        matches!(self, LearningRule::LayerMinimal | LearningRule::SpikingScalar)
    }
}

impl fmt::Display for LearningRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LearningRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LearningRule::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown learning rule `{s}`")))
    }
}

/// Which function the forward pass evaluates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ForwardMode {
    /// Plain look-up; the surrogate only shapes the backward pass.
    #[default]
    Inference,
    /// The smoothed surrogate matching the active rule. Backward is then the
    /// exact gradient of what was computed (given the cached selections).
    Surrogate,
}

/// Settings shared by a training forward pass and its backward pass.
#[derive(Clone, Copy, Debug)]
pub struct Backprop<'a> {
    pub rule: LearningRule,
    pub mode: ForwardMode,
    pub uncertainty: &'a dyn UncertaintyFn,
}

impl Default for Backprop<'static> {
    fn default() -> Self {
        Backprop {
            rule: LearningRule::MinPairFlip,
            mode: ForwardMode::Inference,
            uncertainty: &ReciprocalAbs,
        }
    }
}

impl Backprop<'static> {
    pub fn with_rule(rule: LearningRule) -> Self {
        Backprop {
            rule,
            ..Default::default()
        }
    }

    pub fn surrogate(rule: LearningRule) -> Self {
        Backprop {
            rule,
            mode: ForwardMode::Surrogate,
            ..Default::default()
        }
    }
}
