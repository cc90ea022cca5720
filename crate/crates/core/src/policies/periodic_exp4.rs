//! Periodic EXP4.
//!
//! EXP4 over the experts `theta ∘ f` (one per partition `f` and per arm
//! assignment `theta` to its labels) never needs the individual expert
//! weights: the mass of experts recommending arm `i` at step `t` factors as
//!
//! ```text
//! r_i(t) = Σ_f  b_i^{f(t),f} · Π_{ℓ ∈ f([t]) \ f(t)} S_f^ℓ
//! ```
//!
//! where `b_i^{ℓ,f}` is the exponentiated importance-weighted reward of arm
//! `i` on the steps labeled `ℓ` and `S_f^ℓ = Σ_j b_j^{ℓ,f}`. The state keeps
//! `ln b`, `ln S` and `ln B_f = Σ_ℓ ln S_f^ℓ` (over all labels of `f`), so a
//! step costs `O(K |F|)` plus one `O(K)` row refresh per partition.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::logspace::{log_max, log_sum_exp};
use crate::partitions::PartitionSet;

use super::{check_update, ArmDistribution, Learner, NumericMode, PolicyConfig, Variant};

#[derive(Debug, Clone)]
pub struct PeriodicExp4 {
    config: PolicyConfig,
    partitions: Arc<PartitionSet>,
    ln_k: f64,
    /// Zero-based index of the current step.
    t: usize,
    /// Per partition, `label * K + arm` -> `ln b`.
    log_weights: Vec<Vec<f64>>,
    /// Per partition and label, `ln S`.
    log_label_sums: Vec<Vec<f64>>,
    /// Per partition, `ln B` over every label of the partition.
    log_products: Vec<f64>,
    /// Per partition, `|f([t-1])|`, labels seen before the current step.
    seen: Vec<usize>,
    pending: Option<ArmDistribution>,
}

impl PeriodicExp4 {
    pub fn new(partitions: Arc<PartitionSet>, config: PolicyConfig) -> Result<Self> {
        config.validate()?;
        if partitions.is_empty() {
            return Err(Error::PolicyConfig("empty partition set".into()));
        }
        let k = config.num_arms;
        let ln_k = (k as f64).ln();
        let fs = partitions.functions();
        let log_weights = fs.iter().map(|f| vec![0.0; f.num_labels() * k]).collect();
        let log_label_sums = fs.iter().map(|f| vec![ln_k; f.num_labels()]).collect();
        let log_products = fs.iter().map(|f| f.num_labels() as f64 * ln_k).collect();
        Ok(Self {
            seen: vec![0; fs.len()],
            config,
            partitions,
            ln_k,
            t: 0,
            log_weights,
            log_label_sums,
            log_products,
            pending: None,
        })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    pub fn partitions(&self) -> &PartitionSet {
        &self.partitions
    }

    /// `ln b_i^{ℓ,f}` for partition index `f`.
    pub fn log_weight(&self, f: usize, label: usize, arm: usize) -> f64 {
        self.log_weights[f][label * self.config.num_arms + arm]
    }

    pub fn log_label_sums(&self) -> &[Vec<f64>] {
        &self.log_label_sums
    }

    pub fn log_products(&self) -> &[f64] {
        &self.log_products
    }

    fn check_time(&self) -> Result<()> {
        if self.t >= self.partitions.horizon() {
            return Err(Error::TimeOutOfRange {
                t: self.t + 1,
                horizon: self.partitions.horizon(),
            });
        }
        Ok(())
    }

    /// `|f([t])|` for the current step, i.e. including the current label.
    fn seen_including_current(&self, f: usize, label: usize) -> usize {
        self.seen[f].max(label + 1)
    }

    fn combine(&self, terms: &[f64]) -> f64 {
        match self.config.numeric {
            NumericMode::Exact => log_sum_exp(terms),
            NumericMode::MaxApprox => log_max(terms),
        }
    }

    /// `ln r_i(t)` from the maintained aggregates.
    pub fn scores(&self) -> Result<Vec<f64>> {
        self.check_time()?;
        let k = self.config.num_arms;
        let fs = self.partitions.functions();
        let mut terms = vec![vec![0.0; fs.len()]; k];
        for (fi, f) in fs.iter().enumerate() {
            let label = f.label(self.t);
            let mut base = self.log_products[fi] - self.log_label_sums[fi][label];
            if self.config.variant == Variant::AsWritten {
                let unseen = f.num_labels() - self.seen_including_current(fi, label);
                // Unseen labels were never updated, so each has S = K.
                base -= unseen as f64 * self.ln_k;
            }
            let row = &self.log_weights[fi][label * k..(label + 1) * k];
            for (arm, lw) in row.iter().enumerate() {
                terms[arm][fi] = lw + base;
            }
        }
        Ok(terms.iter().map(|t| self.combine(t)).collect())
    }

    /// `ln r_i(t)` recomputed from raw weights with the product over labels
    /// written out, bypassing `S` and `B`.
    pub fn naive_scores(&self) -> Result<Vec<f64>> {
        self.check_time()?;
        let k = self.config.num_arms;
        let fs = self.partitions.functions();
        let mut terms = vec![vec![0.0; fs.len()]; k];
        for (fi, f) in fs.iter().enumerate() {
            let label = f.label(self.t);
            let seen = self.seen_including_current(fi, label);
            let mut base = 0.0;
            for other in (0..seen).filter(|&l| l != label) {
                base += log_sum_exp(&self.log_weights[fi][other * k..(other + 1) * k]);
            }
            if self.config.variant == Variant::Corrected {
                base += (f.num_labels() - seen) as f64 * self.ln_k;
            }
            for (arm, t) in terms.iter_mut().enumerate() {
                t[fi] = self.log_weights[fi][label * k + arm] + base;
            }
        }
        Ok(terms.iter().map(|t| self.combine(t)).collect())
    }

    /// `(ln S, ln B)` recomputed from the raw weights.
    pub fn recomputed_aggregates(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let k = self.config.num_arms;
        let sums: Vec<Vec<f64>> = self
            .log_weights
            .iter()
            .map(|w| w.chunks(k).map(log_sum_exp).collect())
            .collect();
        let products = sums.iter().map(|s| s.iter().sum()).collect();
        (sums, products)
    }

    /// Text dump of every `ln b` entry, one `f label arm value` row each.
    pub fn dump_state(&self) -> String {
        let k = self.config.num_arms;
        let mut out = format!("# periodic_exp4 t={} K={}\n", self.t + 1, k);
        for (fi, w) in self.log_weights.iter().enumerate() {
            for (idx, value) in w.iter().enumerate() {
                let _ = writeln!(out, "{}\t{}\t{}\t{:?}", fi, idx / k, idx % k, value);
            }
        }
        out
    }
}

impl Learner for PeriodicExp4 {
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
        let step = self.gamma_at_current() / k as f64 * reward / probability;
        for (fi, f) in self.partitions.functions().iter().enumerate() {
            let label = f.label(self.t);
            self.seen[fi] = self.seen[fi].max(label + 1);
            if step == 0.0 {
                continue;
            }
            let row = &mut self.log_weights[fi][label * k..(label + 1) * k];
            row[arm] += step;
            let new_sum = log_sum_exp(row);
            let old_sum = std::mem::replace(&mut self.log_label_sums[fi][label], new_sum);
            self.log_products[fi] += new_sum - old_sum;
        }
        self.t += 1;
        Ok(())
    }

    fn update(&mut self, arm: usize, reward: f64) -> Result<()> {
        let p = match &self.pending {
            Some(d) if arm < d.num_arms() => d.probs[arm],
            Some(_) => return Err(Error::PolicyState(format!("arm {arm} out of range"))),
            None => {
                return Err(Error::PolicyState(
                    "update without a preceding distribution".into(),
                ))
            }
        };
        self.update_with_probability(arm, reward, p)
    }
}

impl PeriodicExp4 {
    fn gamma_at_current(&self) -> f64 {
        self.config.gamma.at(self.t + 1)
    }
}
