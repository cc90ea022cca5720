use std::sync::Arc;

use crate::error::{Error, Result};
use crate::logspace::log_sum_exp;
use crate::partitions::PartitionSet;

use super::{check_update, ArmDistribution, Learner, PolicyConfig};

pub const DEFAULT_EXPERT_CAP: usize = 1_000_000;

/// EXP4 with every expert `theta ∘ f` materialized.
///
/// Exponential in the label count, so only usable on tiny instances. It is
/// the ground truth Periodic EXP4 (corrected variant) is checked against.
#[derive(Debug, Clone)]
pub struct ReferenceExp4 {
    config: PolicyConfig,
    partitions: Arc<PartitionSet>,
    t: usize,
    /// `(partition index, theta)` with `theta` packed as base-K digits, the
    /// digit at position `ℓ` being the arm assigned to label `ℓ`.
    experts: Vec<(usize, u64)>,
    powers: Vec<u64>,
    log_weights: Vec<f64>,
    pending: Option<ArmDistribution>,
}

impl ReferenceExp4 {
    pub fn new(partitions: Arc<PartitionSet>, config: PolicyConfig) -> Result<Self> {
        Self::with_cap(partitions, config, DEFAULT_EXPERT_CAP)
    }

    pub fn with_cap(
        partitions: Arc<PartitionSet>,
        config: PolicyConfig,
        cap: usize,
    ) -> Result<Self> {
        config.validate()?;
        let k = config.num_arms as u128;
        let mut total: u128 = 0;
        for f in partitions.functions() {
            let count = k.checked_pow(f.num_labels() as u32).unwrap_or(u128::MAX);
            total = total.saturating_add(count);
        }
        if total > cap as u128 {
            return Err(Error::OracleInfeasible {
                experts: total,
                cap,
            });
        }
        let mut experts = Vec::with_capacity(total as usize);
        for (fi, f) in partitions.functions().iter().enumerate() {
            let count = (config.num_arms as u64).pow(f.num_labels() as u32);
            experts.extend((0..count).map(|code| (fi, code)));
        }
        let powers = (0..partitions.max_labels())
            .map(|l| (config.num_arms as u64).pow(l as u32))
            .collect();
        Ok(Self {
            log_weights: vec![0.0; experts.len()],
            config,
            partitions,
            t: 0,
            experts,
            powers,
            pending: None,
        })
    }

    pub fn num_experts(&self) -> usize {
        self.experts.len()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    fn recommendation(&self, expert: usize) -> usize {
        let (fi, code) = self.experts[expert];
        let label = self.partitions.functions()[fi].label(self.t);
        ((code / self.powers[label]) % self.config.num_arms as u64) as usize
    }

    /// Log of the total expert weight recommending each arm.
    pub fn scores(&self) -> Result<Vec<f64>> {
        if self.t >= self.partitions.horizon() {
            return Err(Error::TimeOutOfRange {
                t: self.t + 1,
                horizon: self.partitions.horizon(),
            });
        }
        let mut per_arm = vec![Vec::new(); self.config.num_arms];
        for (e, lw) in self.log_weights.iter().enumerate() {
            per_arm[self.recommendation(e)].push(*lw);
        }
        Ok(per_arm.iter().map(|w| log_sum_exp(w)).collect())
    }
}

impl Learner for ReferenceExp4 {
    fn num_arms(&self) -> usize {
        self.config.num_arms
    }

    fn time_step(&self) -> usize {
        self.t + 1
    }

    fn distribution(&mut self) -> Result<ArmDistribution> {
        if let Some(d) = &self.pending {
            return Ok(d.clone());
        }
        let dist = ArmDistribution::from_scores(self.scores()?).mixed(self.config.mixing);
        self.pending = Some(dist.clone());
        Ok(dist)
    }

    fn update_with_probability(&mut self, arm: usize, reward: f64, probability: f64) -> Result<()> {
        let k = self.config.num_arms;
        check_update(k, arm, reward, probability)?;
        if self.pending.take().is_none() {
            return Err(Error::PolicyState(
                "update without a preceding distribution".into(),
            ));
        }
        let step = self.config.gamma.at(self.t + 1) / k as f64 * reward / probability;
        for e in 0..self.experts.len() {
            if self.recommendation(e) == arm {
                self.log_weights[e] += step;
            }
        }
        self.t += 1;
        Ok(())
    }

    fn update(&mut self, arm: usize, reward: f64) -> Result<()> {
        let p = self
            .pending
            .as_ref()
            .and_then(|d| d.probs.get(arm).copied())
            .ok_or_else(|| Error::PolicyState("update without a preceding distribution".into()))?;
        self.update_with_probability(arm, reward, p)
    }
}
