use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policies::{
    optimal_random_distribution, restrict_to_available, sample_arm, ArmDistribution, Learner,
};
use crate::regret::RewardMatrix;
use crate::scenario::{AvailabilityMode, CompiledScenario};
use crate::seeds::derive_seed;

use super::{client_counts, combined_probabilities, distance_pct, optimal_min_rate};

/// One slot of simulation output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// One-based slot over the whole run.
    pub slot: usize,
    /// One-based iteration.
    pub iteration: usize,
    pub choices: Vec<usize>,
    /// Mbps.
    pub gains: Vec<f64>,
    pub min_rate: f64,
    pub optimal_min_rate: f64,
    pub distance_pct: f64,
    /// Mean over devices of the distribution each sampled from.
    pub combined_probs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub records: Vec<StepRecord>,
    /// Per device, summed Mbps over all slots.
    pub cumulative_mbps: Vec<f64>,
    /// Per device, the normalized reward every network would have paid it
    /// with everyone else's choices fixed. Only filled when requested.
    pub counterfactual: Option<Vec<RewardMatrix>>,
    /// Per device, the normalized reward it actually received.
    pub realized_rewards: Vec<Vec<f64>>,
    /// Slots where an availability-aware device found no probability mass
    /// on its reachable networks and fell back to uniform.
    pub fallbacks: usize,
}

impl SimulationOutput {
    /// Mean distance per iteration.
    pub fn distance_by_iteration(&self, iteration_length: usize) -> Vec<f64> {
        self.records
            .chunks(iteration_length)
            .map(|c| c.iter().map(|r| r.distance_pct).sum::<f64>() / c.len() as f64)
            .collect()
    }
}

enum Agent {
    Learner(Box<dyn Learner>),
    OptimalRandom,
}

/// RNG stream used for environment noise; device `d` uses stream `d + 1`.
const ENV_STREAM: u64 = 0;

/// Runs the scenario with its configured policy on every device.
///
/// Deterministic in `(scenario, seed)`. Environment noise is drawn from a
/// generator of its own, so the same seed yields the same bandwidths
/// whatever policy the devices run.
pub fn run_simulation(
    scenario: &CompiledScenario,
    seed: u64,
    track_counterfactual: bool,
) -> Result<SimulationOutput> {
    let n = scenario.num_devices();
    let k = scenario.num_networks();
    let horizon = scenario.horizon();
    let len = scenario.scenario.iteration_length;
    let kind = scenario.scenario.policy.kind;

    let mut agents = (0..n)
        .map(|_| {
            Ok(match kind.build(&scenario.policy, &scenario.partitions)? {
                Some(learner) => Agent::Learner(learner),
                None => Agent::OptimalRandom,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut env_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, ENV_STREAM));
    let mut device_rngs: Vec<ChaCha8Rng> = (0..n)
        .map(|d| ChaCha8Rng::seed_from_u64(derive_seed(seed, d as u64 + 1)))
        .collect();

    let noiseless = scenario.networks.iter().all(|net| net.noise_pct == 0.0);
    let mut opt_cache: Vec<Option<f64>> = vec![None; if noiseless { len } else { 0 }];

    let mut records = Vec::with_capacity(horizon);
    let mut cumulative = vec![0.0; n];
    let mut realized = vec![Vec::with_capacity(horizon); n];
    let mut counterfactual = track_counterfactual.then(|| vec![RewardMatrix::zeros(k, horizon); n]);
    let mut fallbacks = 0;
    let mut bandwidths = vec![0.0; k];
    let mut dists: Vec<ArmDistribution> = Vec::with_capacity(n);
    let mut choices = vec![0usize; n];

    for slot in 0..horizon {
        for (j, net) in scenario.networks.iter().enumerate() {
            bandwidths[j] = net.bandwidth_at(slot, &mut env_rng);
        }
        let phase = scenario.phase_at(slot);
        let masks = &scenario.masks[phase];

        dists.clear();
        for d in 0..n {
            let dist = match &mut agents[d] {
                Agent::Learner(learner) => {
                    let raw = learner.distribution()?;
                    if scenario.modes[d] == AvailabilityMode::AvailabilityAware {
                        let (restricted, fell_back) = restrict_to_available(&raw, &masks[d])?;
                        fallbacks += usize::from(fell_back);
                        restricted
                    } else {
                        raw
                    }
                }
                Agent::OptimalRandom => optimal_random_distribution(&bandwidths, &masks[d])
                    .or_else(|_| {
                        // every reachable network is down this slot
                        let (u, _) =
                            restrict_to_available(&ArmDistribution::uniform(k), &masks[d])?;
                        Ok::<_, Error>(u)
                    })?,
            };
            choices[d] = sample_arm(&dist, &mut device_rngs[d]);
            dists.push(dist);
        }

        let counts = client_counts(k, &choices, masks);
        let gains: Vec<f64> = (0..n)
            .map(|d| {
                let j = choices[d];
                if masks[d][j] {
                    bandwidths[j] / counts[j] as f64
                } else {
                    0.0
                }
            })
            .collect();

        for d in 0..n {
            let reward = (gains[d] / scenario.reward_scale).clamp(0.0, 1.0);
            if let Agent::Learner(learner) = &mut agents[d] {
                let p = dists[d].probs[choices[d]];
                learner.update_with_probability(choices[d], reward, p)?;
            }
            cumulative[d] += gains[d];
            realized[d].push(reward);
            if let Some(cf) = counterfactual.as_mut() {
                for j in 0..k {
                    let value = if !masks[d][j] {
                        0.0
                    } else if choices[d] == j && masks[d][choices[d]] {
                        bandwidths[j] / counts[j] as f64
                    } else {
                        bandwidths[j] / (counts[j] + 1) as f64
                    };
                    cf[d].set(j, slot, value / scenario.reward_scale);
                }
            }
        }

        let opt = if noiseless {
            // bandwidths and masks both repeat every iteration
            match opt_cache[slot % len] {
                Some(v) => v,
                None => {
                    let v = optimal_min_rate(&bandwidths, masks)?;
                    opt_cache[slot % len] = Some(v);
                    v
                }
            }
        } else {
            optimal_min_rate(&bandwidths, masks)?
        };
        let min_rate = gains.iter().copied().fold(f64::INFINITY, f64::min);
        let probs: Vec<Vec<f64>> = dists.iter().map(|d| d.probs.clone()).collect();
        records.push(StepRecord {
            slot: slot + 1,
            iteration: slot / len + 1,
            choices: choices.clone(),
            gains,
            min_rate,
            optimal_min_rate: opt,
            distance_pct: distance_pct(opt, min_rate),
            combined_probs: combined_probabilities(&probs),
        });
    }

    Ok(SimulationOutput {
        records,
        cumulative_mbps: cumulative,
        counterfactual,
        realized_rewards: realized,
        fallbacks,
    })
}
