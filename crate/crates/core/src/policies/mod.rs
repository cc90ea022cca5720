//! Online learners and the baselines they are compared against.
//!
//! Every learner follows the same two-phase protocol per time step: ask
//! for a [`ArmDistribution`] with [`Learner::distribution`], play an arm,
//! then report the reward with [`Learner::update`]. Rewards must lie in
//! `[0, 1]`. Weights are kept in the log domain.

mod exp3;
mod periodic_exp4;
mod reference;

pub use exp3::Exp3;
pub use periodic_exp4::PeriodicExp4;
pub use reference::{ReferenceExp4, DEFAULT_EXPERT_CAP};

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logspace;
use crate::partitions::{PartitionFunction, PartitionSet};

/// Learning-rate schedule `gamma(t)`, with `t` the one-based step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaSchedule {
    Fixed(f64),
    /// `gamma(t) = t^(-exponent)`.
    Power(f64),
}

impl Default for GammaSchedule {
    fn default() -> Self {
        GammaSchedule::Power(0.1)
    }
}

impl GammaSchedule {
    pub fn at(&self, t: usize) -> f64 {
        match *self {
            GammaSchedule::Fixed(g) => g,
            GammaSchedule::Power(exponent) => (t.max(1) as f64).powf(-exponent),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            GammaSchedule::Fixed(g) if !(g > 0.0 && g <= 1.0) => Err(Error::PolicyConfig(format!(
                "fixed gamma {g} outside (0, 1]"
            ))),
            GammaSchedule::Power(e) if !(e.is_finite() && e >= 0.0) => Err(Error::PolicyConfig(
                format!("gamma exponent {e} must be finite and non-negative"),
            )),
            _ => Ok(()),
        }
    }
}

/// Which form of the per-arm score Periodic EXP4 computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Product over labels seen so far only.
    #[default]
    AsWritten,
    /// Also counts the `K^(P_f - |f([t])|)` experts that are free on labels
    /// not seen yet; matches enumerated-expert EXP4 exactly.
    Corrected,
}

/// How sums of exponentials over partitions are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NumericMode {
    #[default]
    Exact,
    /// Replace `log Σ exp(x)` by `max x`.
    MaxApprox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub num_arms: usize,
    #[serde(default)]
    pub gamma: GammaSchedule,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub numeric: NumericMode,
    /// Weight of uniform exploration mixed into every distribution.
    #[serde(default)]
    pub mixing: f64,
}

impl PolicyConfig {
    pub fn new(num_arms: usize) -> Self {
        Self {
            num_arms,
            gamma: GammaSchedule::default(),
            variant: Variant::default(),
            numeric: NumericMode::default(),
            mixing: 0.0,
        }
    }

    pub fn with_gamma(mut self, gamma: GammaSchedule) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_numeric(mut self, numeric: NumericMode) -> Self {
        self.numeric = numeric;
        self
    }

    pub fn with_mixing(mut self, mixing: f64) -> Self {
        self.mixing = mixing;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_arms == 0 {
            return Err(Error::PolicyConfig("need at least one arm".into()));
        }
        if !(0.0..1.0).contains(&self.mixing) {
            return Err(Error::PolicyConfig(format!(
                "mixing {} outside [0, 1)",
                self.mixing
            )));
        }
        self.gamma.validate()
    }
}

/// A distribution over arms together with the log-domain scores it was
/// normalized from.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmDistribution {
    pub probs: Vec<f64>,
    /// `ln r_i`; for baselines these are simply `ln p_i`.
    pub scores: Vec<f64>,
}

impl ArmDistribution {
    pub fn from_scores(scores: Vec<f64>) -> Self {
        let probs = logspace::softmax(&scores);
        Self { probs, scores }
    }

    /// Wraps an explicit probability vector after checking it.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Distribution("no arms".into()));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Distribution(format!("bad entry in {probs:?}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Distribution(format!("sums to {total}")));
        }
        let scores = probs.iter().map(|p| p.ln()).collect();
        Ok(Self { probs, scores })
    }

    pub fn uniform(k: usize) -> Self {
        Self {
            probs: vec![1.0 / k as f64; k],
            scores: vec![0.0; k],
        }
    }

    pub fn num_arms(&self) -> usize {
        self.probs.len()
    }

    /// `(1 - mixing) p + mixing / K`.
    pub fn mixed(mut self, mixing: f64) -> Self {
        if mixing > 0.0 {
            let k = self.probs.len() as f64;
            for p in &mut self.probs {
                *p = (1.0 - mixing) * *p + mixing / k;
            }
        }
        self
    }
}

/// Common interface of the adaptive policies.
pub trait Learner: Send {
    fn num_arms(&self) -> usize;

    /// One-based index of the step the next distribution is for.
    fn time_step(&self) -> usize;

    /// Distribution for the current step; cached until the next update.
    fn distribution(&mut self) -> Result<ArmDistribution>;

    /// Applies the reward of `arm`, importance-weighted by `probability`,
    /// the chance with which the arm was actually drawn.
    fn update_with_probability(&mut self, arm: usize, reward: f64, probability: f64) -> Result<()>;

    /// Applies the reward using the cached distribution's probability.
    fn update(&mut self, arm: usize, reward: f64) -> Result<()>;
}

pub(crate) fn check_update(
    num_arms: usize,
    arm: usize,
    reward: f64,
    probability: f64,
) -> Result<()> {
    if arm >= num_arms {
        return Err(Error::PolicyState(format!(
            "arm {arm} out of range for {num_arms} arms"
        )));
    }
    if !(0.0..=1.0).contains(&reward) {
        return Err(Error::RewardOutOfRange(reward));
    }
    if !(probability > 0.0 && probability <= 1.0 + 1e-12) {
        return Err(Error::PolicyState(format!(
            "played arm {arm} with probability {probability}"
        )));
    }
    Ok(())
}

/// Uniformly random arm choice; a no-learning control.
#[derive(Debug, Clone)]
pub struct UniformRandom {
    num_arms: usize,
    t: usize,
    pending: Option<ArmDistribution>,
}

impl UniformRandom {
    pub fn new(num_arms: usize) -> Result<Self> {
        PolicyConfig::new(num_arms).validate()?;
        Ok(Self {
            num_arms,
            t: 0,
            pending: None,
        })
    }
}

impl Learner for UniformRandom {
    fn num_arms(&self) -> usize {
        self.num_arms
    }

    fn time_step(&self) -> usize {
        self.t + 1
    }

    fn distribution(&mut self) -> Result<ArmDistribution> {
        let dist = ArmDistribution::uniform(self.num_arms);
        self.pending = Some(dist.clone());
        Ok(dist)
    }

    fn update_with_probability(&mut self, arm: usize, reward: f64, p: f64) -> Result<()> {
        check_update(self.num_arms, arm, reward, p)?;
        if self.pending.take().is_none() {
            return Err(Error::PolicyState("update without a distribution".into()));
        }
        self.t += 1;
        Ok(())
    }

    fn update(&mut self, arm: usize, reward: f64) -> Result<()> {
        let p = 1.0 / self.num_arms as f64;
        self.update_with_probability(arm, reward, p)
    }
}

/// Named policies selectable from scenario configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    PeriodicExp4,
    Exp3,
    OptimalRandom,
    UniformRandom,
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::PeriodicExp4 => "periodic_exp4",
            PolicyKind::Exp3 => "exp3",
            PolicyKind::OptimalRandom => "optimal_random",
            PolicyKind::UniformRandom => "uniform_random",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name.replace('-', "_").as_str() {
            "periodic_exp4" | "pexp4" => Some(PolicyKind::PeriodicExp4),
            "exp3" => Some(PolicyKind::Exp3),
            "optimal_random" => Some(PolicyKind::OptimalRandom),
            "uniform_random" | "uniform" => Some(PolicyKind::UniformRandom),
            _ => None,
        }
    }

    /// Builds the learner, or `None` for the omniscient baseline which has no
    /// learning state.
    pub fn build(
        &self,
        config: &PolicyConfig,
        partitions: &Arc<PartitionSet>,
    ) -> Result<Option<Box<dyn Learner>>> {
        Ok(match self {
            PolicyKind::PeriodicExp4 => Some(Box::new(PeriodicExp4::new(
                Arc::clone(partitions),
                config.clone(),
            )?)),
            PolicyKind::Exp3 => Some(Box::new(Exp3::new(config.clone())?)),
            PolicyKind::UniformRandom => Some(Box::new(UniformRandom::new(config.num_arms)?)),
            PolicyKind::OptimalRandom => None,
        })
    }
}

/// Samples proportionally to bandwidth over the available networks.
pub fn optimal_random_distribution(
    bandwidths: &[f64],
    available: &[bool],
) -> Result<ArmDistribution> {
    if bandwidths.len() != available.len() {
        return Err(Error::Distribution(format!(
            "{} bandwidths but {} availability flags",
            bandwidths.len(),
            available.len()
        )));
    }
    let total: f64 = bandwidths
        .iter()
        .zip(available)
        .filter(|(_, &a)| a)
        .map(|(b, _)| b.max(0.0))
        .sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::Distribution(
            "no available network with positive bandwidth".into(),
        ));
    }
    let probs = bandwidths
        .iter()
        .zip(available)
        .map(|(b, &a)| if a { b.max(0.0) / total } else { 0.0 })
        .collect::<Vec<_>>();
    let scores = probs.iter().map(|p: &f64| p.ln()).collect();
    Ok(ArmDistribution { probs, scores })
}

/// Zeroes unavailable arms and renormalizes. When the available arms carry
/// no mass the result is uniform over them and the flag is `true`.
pub fn restrict_to_available(
    dist: &ArmDistribution,
    available: &[bool],
) -> Result<(ArmDistribution, bool)> {
    if available.len() != dist.num_arms() {
        return Err(Error::Distribution(format!(
            "mask of length {} for {} arms",
            available.len(),
            dist.num_arms()
        )));
    }
    let count = available.iter().filter(|&&a| a).count();
    if count == 0 {
        return Err(Error::Distribution("no available arm".into()));
    }
    if available.iter().all(|&a| a) {
        return Ok((dist.clone(), false));
    }
    let mass: f64 = dist
        .probs
        .iter()
        .zip(available)
        .filter(|(_, &a)| a)
        .map(|(p, _)| p)
        .sum();
    let (probs, fallback) = if mass > 0.0 {
        let probs = dist
            .probs
            .iter()
            .zip(available)
            .map(|(p, &a)| if a { p / mass } else { 0.0 })
            .collect::<Vec<_>>();
        (probs, false)
    } else {
        let probs = available
            .iter()
            .map(|&a| if a { 1.0 / count as f64 } else { 0.0 })
            .collect::<Vec<_>>();
        (probs, true)
    };
    let scores = probs.iter().map(|p: &f64| p.ln()).collect();
    Ok((ArmDistribution { probs, scores }, fallback))
}

/// Inverse-CDF lookup of a uniform draw `u` in `[0, 1)`.
pub fn sample_with_uniform(probs: &[f64], u: f64) -> usize {
    let mut cumulative = 0.0;
    for (i, p) in probs.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return i;
        }
    }
    // Rounding left u above the final cumulative sum.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

pub fn sample_arm<R: Rng + ?Sized>(dist: &ArmDistribution, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    sample_with_uniform(&dist.probs, u)
}

/// Single-label partition set, for running Periodic EXP4 as EXP3.
pub fn constant_partition_set(horizon: usize) -> Result<PartitionSet> {
    PartitionSet::new(vec![PartitionFunction::constant(horizon)?])
}
