//! Scenario configuration: networks, devices, availability phases, the
//! period set and the policy every device runs.
//!
//! Scenarios are JSON documents (see `scenarios/` for the built-in ones).
//! [`Scenario::compile`] validates one and evaluates everything the
//! simulator needs.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netsim::{CompiledNetwork, NetworkProfile};
use crate::partitions::{make_period_set, PartitionFunction, PartitionSet, PartitionStyle};
use crate::policies::{GammaSchedule, NumericMode, PolicyConfig, PolicyKind, Variant};

pub const CONFIG_VERSION: u32 = 1;

const BUILTINS: &[(&str, &str)] = &[
    ("discrete", include_str!("../scenarios/discrete.json")),
    ("continuous", include_str!("../scenarios/continuous.json")),
    (
        "continuous_hard",
        include_str!("../scenarios/continuous_hard.json"),
    ),
    (
        "noisy_discrete",
        include_str!("../scenarios/noisy_discrete.json"),
    ),
    (
        "noisy_continuous",
        include_str!("../scenarios/noisy_continuous.json"),
    ),
    ("mobility", include_str!("../scenarios/mobility.json")),
    (
        "alternating_toy",
        include_str!("../scenarios/alternating_toy.json"),
    ),
];

fn default_iteration_length() -> usize {
    1440
}

fn default_iterations() -> usize {
    60
}

fn default_runs() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub name: String,
    #[serde(default = "default_iteration_length")]
    pub iteration_length: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    pub networks: Vec<NetworkProfile>,
    /// Last slot (one-based, inclusive) of each availability phase within an
    /// iteration. Empty means a single phase.
    #[serde(default)]
    pub phases: Vec<usize>,
    pub devices: Vec<DeviceGroup>,
    #[serde(default)]
    pub period_set: PeriodSetSpec,
    #[serde(default)]
    pub policy: PolicySpec,
    /// Mbps that map to reward 1; defaults to the largest noiseless
    /// bandwidth of any network.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward_scale: Option<f64>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
}

/// `count` identical devices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceGroup {
    pub count: usize,
    /// Network ids reachable in each phase; empty means every network in
    /// every phase.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub availability: Vec<Vec<String>>,
    #[serde(default)]
    pub mode: AvailabilityMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AvailabilityMode {
    /// Samples over every network and earns nothing on unreachable ones.
    #[default]
    Vanilla,
    /// Restricts its distribution to the reachable networks before sampling.
    AvailabilityAware,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PeriodSetSpec {
    /// Periods `1..=max_period`.
    Range {
        max_period: usize,
        #[serde(default)]
        style: PartitionStyle,
    },
    Periods {
        periods: Vec<usize>,
        #[serde(default)]
        style: PartitionStyle,
    },
    /// Label sequences over one iteration, repeated every iteration.
    Explicit { labels: Vec<Vec<u32>> },
}

impl Default for PeriodSetSpec {
    fn default() -> Self {
        PeriodSetSpec::Range {
            max_period: 24,
            style: PartitionStyle::Contiguous,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub numeric: NumericMode,
    #[serde(default)]
    pub gamma: GammaSchedule,
    #[serde(default)]
    pub mixing: f64,
}

impl Default for PolicySpec {
    fn default() -> Self {
        Self {
            kind: PolicyKind::PeriodicExp4,
            variant: Variant::default(),
            numeric: NumericMode::default(),
            gamma: GammaSchedule::default(),
            mixing: 0.0,
        }
    }
}

impl PolicySpec {
    pub fn config(&self, num_arms: usize) -> PolicyConfig {
        PolicyConfig {
            num_arms,
            gamma: self.gamma,
            variant: self.variant,
            numeric: self.numeric,
            mixing: self.mixing,
        }
    }
}

/// A validated scenario with curves, masks and partitions evaluated.
#[derive(Debug, Clone)]
pub struct CompiledScenario {
    pub scenario: Scenario,
    pub networks: Vec<CompiledNetwork>,
    /// Zero-based end (exclusive) of each phase within an iteration.
    pub phase_ends: Vec<usize>,
    /// `masks[phase][device][network]`.
    pub masks: Vec<Vec<Vec<bool>>>,
    pub modes: Vec<AvailabilityMode>,
    pub partitions: Arc<PartitionSet>,
    pub reward_scale: f64,
    pub policy: PolicyConfig,
}

impl CompiledScenario {
    pub fn num_devices(&self) -> usize {
        self.modes.len()
    }

    pub fn num_networks(&self) -> usize {
        self.networks.len()
    }

    pub fn horizon(&self) -> usize {
        self.scenario.iteration_length * self.scenario.iterations
    }

    /// Phase index of zero-based `slot`.
    pub fn phase_at(&self, slot: usize) -> usize {
        let s = slot % self.scenario.iteration_length;
        self.phase_ends.partition_point(|&end| end <= s)
    }
}

impl Scenario {
    /// Parses JSON, reporting the path of the offending field on failure.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let text = BUILTINS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| *t)
            .ok_or_else(|| Error::UnknownScenario(name.to_string()))?;
        Self::from_json(text)
    }

    pub fn builtin_names() -> Vec<&'static str> {
        BUILTINS.iter().map(|(n, _)| *n).collect()
    }

    /// Loads a builtin by name, or else a JSON file at that path.
    pub fn load(name_or_path: &str) -> Result<Self> {
        if BUILTINS.iter().any(|(n, _)| *n == name_or_path) {
            return Self::builtin(name_or_path);
        }
        let path = Path::new(name_or_path);
        if !path.exists() {
            return Err(Error::UnknownScenario(name_or_path.to_string()));
        }
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn num_devices(&self) -> usize {
        self.devices.iter().map(|g| g.count).sum()
    }

    pub fn validate(&self) -> Result<()> {
        self.compile().map(|_| ())
    }

    pub fn compile(&self) -> Result<CompiledScenario> {
        if self.version != CONFIG_VERSION {
            return Err(Error::config(
                "version",
                format!(
                    "unsupported version {} (expected {CONFIG_VERSION})",
                    self.version
                ),
            ));
        }
        let len = self.iteration_length;
        if len == 0 {
            return Err(Error::config("iteration_length", "must be at least 1"));
        }
        if self.iterations == 0 {
            return Err(Error::config("iterations", "must be at least 1"));
        }
        if self.runs == 0 {
            return Err(Error::config("runs", "must be at least 1"));
        }
        if self.networks.is_empty() {
            return Err(Error::config("networks", "at least one network required"));
        }

        let mut index = HashMap::new();
        let mut networks = Vec::with_capacity(self.networks.len());
        for (j, net) in self.networks.iter().enumerate() {
            if index.insert(net.id.as_str(), j).is_some() {
                return Err(Error::config(
                    format!("networks[{j}].id"),
                    format!("duplicate id `{}`", net.id),
                ));
            }
            if !(net.noise_pct.is_finite() && net.noise_pct >= 0.0) {
                return Err(Error::config(
                    format!("networks[{j}].noise_pct"),
                    "must be non-negative",
                ));
            }
            let compiled = CompiledNetwork::new(net, len).map_err(|e| match e {
                Error::Config { path, message } => {
                    Error::config(format!("networks[{j}].bandwidth.{path}"), message)
                }
                other => other,
            })?;
            networks.push(compiled);
        }

        let phase_ends = if self.phases.is_empty() {
            vec![len]
        } else {
            for (p, w) in self.phases.windows(2).enumerate() {
                if w[1] <= w[0] {
                    return Err(Error::config(
                        format!("phases[{}]", p + 1),
                        "phase ends must increase",
                    ));
                }
            }
            if self.phases[0] == 0 || *self.phases.last().unwrap() != len {
                return Err(Error::config(
                    "phases",
                    format!("phases must end at slot {len} and be non-empty"),
                ));
            }
            self.phases.clone()
        };
        let num_phases = phase_ends.len();

        if self.devices.is_empty() || self.num_devices() == 0 {
            return Err(Error::config("devices", "at least one device required"));
        }
        let mut masks = vec![Vec::new(); num_phases];
        let mut modes = Vec::new();
        for (g, group) in self.devices.iter().enumerate() {
            let per_phase: Vec<Vec<bool>> = if group.availability.is_empty() {
                vec![vec![true; networks.len()]; num_phases]
            } else {
                if group.availability.len() != num_phases {
                    return Err(Error::config(
                        format!("devices[{g}].availability"),
                        format!(
                            "{} entries for {num_phases} phases",
                            group.availability.len()
                        ),
                    ));
                }
                let mut out = Vec::with_capacity(num_phases);
                for (p, ids) in group.availability.iter().enumerate() {
                    let mut mask = vec![false; networks.len()];
                    for (i, id) in ids.iter().enumerate() {
                        let j = index.get(id.as_str()).ok_or_else(|| {
                            Error::config(
                                format!("devices[{g}].availability[{p}][{i}]"),
                                format!("unknown network `{id}`"),
                            )
                        })?;
                        mask[*j] = true;
                    }
                    if !mask.iter().any(|&a| a) {
                        return Err(Error::config(
                            format!("devices[{g}].availability[{p}]"),
                            "every phase must grant at least one network",
                        ));
                    }
                    out.push(mask);
                }
                out
            };
            for _ in 0..group.count {
                for (p, mask) in per_phase.iter().enumerate() {
                    masks[p].push(mask.clone());
                }
                modes.push(group.mode);
            }
        }

        let horizon = len * self.iterations;
        let partitions = match &self.period_set {
            PeriodSetSpec::Range { max_period, style } => {
                let periods: Vec<usize> = (1..=*max_period).collect();
                self.period_set_from(&periods, *style, horizon)?
            }
            PeriodSetSpec::Periods { periods, style } => {
                self.period_set_from(periods, *style, horizon)?
            }
            PeriodSetSpec::Explicit { labels } => {
                if labels.is_empty() {
                    return Err(Error::config("period_set.explicit.labels", "empty"));
                }
                let mut fs = Vec::with_capacity(labels.len());
                for (i, seq) in labels.iter().enumerate() {
                    if seq.len() != len {
                        return Err(Error::config(
                            format!("period_set.explicit.labels[{i}]"),
                            format!("{} labels for an iteration of {len}", seq.len()),
                        ));
                    }
                    let full: Vec<u32> = seq.iter().copied().cycle().take(horizon).collect();
                    fs.push(PartitionFunction::from_labels(&full)?);
                }
                PartitionSet::new(fs)?
            }
        };

        let reward_scale = match self.reward_scale {
            Some(s) if s.is_finite() && s > 0.0 => s,
            Some(s) => {
                return Err(Error::config(
                    "reward_scale",
                    format!("must be positive, got {s}"),
                ))
            }
            None => networks
                .iter()
                .flat_map(|n| n.curve.iter().copied())
                .fold(0.0, f64::max),
        };
        if reward_scale.is_nan() || reward_scale <= 0.0 {
            return Err(Error::config("networks", "every bandwidth curve is zero"));
        }

        let policy = self.policy.config(networks.len());
        policy
            .validate()
            .map_err(|e| Error::config("policy", e.to_string()))?;

        Ok(CompiledScenario {
            scenario: self.clone(),
            networks,
            phase_ends,
            masks,
            modes,
            partitions: Arc::new(partitions),
            reward_scale,
            policy,
        })
    }

    fn period_set_from(
        &self,
        periods: &[usize],
        style: PartitionStyle,
        horizon: usize,
    ) -> Result<PartitionSet> {
        if periods.is_empty() {
            return Err(Error::config("period_set", "no periods"));
        }
        if let Some(&p) = periods
            .iter()
            .find(|&&p| p == 0 || p > self.iteration_length)
        {
            return Err(Error::config(
                "period_set",
                format!("period {p} outside 1..={}", self.iteration_length),
            ));
        }
        make_period_set(periods, self.iteration_length, horizon, style)
            .map_err(|e| Error::config("period_set", e.to_string()))
    }
}
