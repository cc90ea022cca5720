use crate::error::{Error, Result};

use super::{check_update, ArmDistribution, Learner, PolicyConfig};

/// EXP3 with log-domain weights, no horizon.
///
/// Same update rule and gamma schedule as [`super::PeriodicExp4`]; running
/// that learner over the single-label partition set gives the same
/// distributions.
#[derive(Debug, Clone)]
pub struct Exp3 {
    config: PolicyConfig,
    t: usize,
    log_weights: Vec<f64>,
    pending: Option<ArmDistribution>,
}

impl Exp3 {
    pub fn new(config: PolicyConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            log_weights: vec![0.0; config.num_arms],
            config,
            t: 0,
            pending: None,
        })
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }
}

impl Learner for Exp3 {
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
        let dist = ArmDistribution::from_scores(self.log_weights.clone()).mixed(self.config.mixing);
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
        let gamma = self.config.gamma.at(self.t + 1);
        self.log_weights[arm] += gamma / k as f64 * reward / probability;
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
