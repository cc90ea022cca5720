//! Multi-device wireless network selection environment.
//!
//! Devices act in lock step once per slot. Each network's bandwidth for the
//! slot comes from a periodic curve (optionally perturbed by relative
//! Gaussian noise) and is split equally among the devices that picked it.

mod maxmin;
mod sim;

pub use maxmin::optimal_min_rate;
pub use sim::{run_simulation, SimulationOutput, StepRecord};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One iteration's worth of bandwidth, in Mbps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthCurve {
    Constant(f64),
    /// Piecewise constant; each segment holds through slot `until`
    /// (one-based, inclusive). The last segment must end at the iteration
    /// length.
    Segments(Vec<Segment>),
    /// Explicit value for every slot of the iteration.
    Samples(Vec<f64>),
    /// `base + Σ amplitude · sin(2π · cycles · s / L + phase)` for slot
    /// `s = 0..L`, clipped at zero.
    Harmonic {
        base: f64,
        terms: Vec<HarmonicTerm>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub until: usize,
    pub mbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicTerm {
    pub amplitude: f64,
    pub cycles: f64,
    #[serde(default)]
    pub phase: f64,
}

impl BandwidthCurve {
    /// Evaluates the curve at every slot of one iteration.
    pub fn materialize(&self, iteration_length: usize) -> Result<Vec<f64>> {
        let values = match self {
            BandwidthCurve::Constant(v) => vec![*v; iteration_length],
            BandwidthCurve::Segments(segments) => {
                let mut values = Vec::with_capacity(iteration_length);
                for seg in segments {
                    if seg.until <= values.len() || seg.until > iteration_length {
                        return Err(Error::config(
                            "segments",
                            format!(
                                "segment end {} must increase and stay within {}",
                                seg.until, iteration_length
                            ),
                        ));
                    }
                    values.resize(seg.until, seg.mbps);
                }
                if values.len() != iteration_length {
                    return Err(Error::config(
                        "segments",
                        format!(
                            "segments cover {} of {} slots",
                            values.len(),
                            iteration_length
                        ),
                    ));
                }
                values
            }
            BandwidthCurve::Samples(samples) => {
                if samples.len() != iteration_length {
                    return Err(Error::config(
                        "samples",
                        format!("{} samples for {} slots", samples.len(), iteration_length),
                    ));
                }
                samples.clone()
            }
            BandwidthCurve::Harmonic { base, terms } => (0..iteration_length)
                .map(|s| {
                    let x = s as f64 / iteration_length as f64;
                    let v: f64 = terms
                        .iter()
                        .map(|h| {
                            h.amplitude
                                * (2.0 * std::f64::consts::PI * h.cycles * x + h.phase).sin()
                        })
                        .sum();
                    (base + v).max(0.0)
                })
                .collect(),
        };
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::config("bandwidth", format!("bad bandwidth {bad}")));
        }
        Ok(values)
    }
}

/// A network as written in a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkProfile {
    pub id: String,
    pub bandwidth: BandwidthCurve,
    /// Relative standard deviation of per-slot Gaussian noise.
    #[serde(default)]
    pub noise_pct: f64,
}

/// A network with its curve evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledNetwork {
    pub curve: Vec<f64>,
    pub noise_pct: f64,
}

impl CompiledNetwork {
    pub fn new(profile: &NetworkProfile, iteration_length: usize) -> Result<Self> {
        Ok(Self {
            curve: profile.bandwidth.materialize(iteration_length)?,
            noise_pct: profile.noise_pct,
        })
    }

    /// Noiseless bandwidth at zero-based slot `slot`.
    pub fn base_at(&self, slot: usize) -> f64 {
        self.curve[slot % self.curve.len()]
    }

    /// Bandwidth at zero-based `slot`, scaled by `max(0, 1 + noise · z)`.
    /// Draws from `rng` only when noise is enabled.
    pub fn bandwidth_at<R: Rng + ?Sized>(&self, slot: usize, rng: &mut R) -> f64 {
        let base = self.base_at(slot);
        if self.noise_pct == 0.0 {
            return base;
        }
        let z: f64 = rng.sample(StandardNormal);
        base * (1.0 + self.noise_pct * z).max(0.0)
    }
}

/// Per-device gains when the bandwidth of each network is split equally
/// among the devices on it. A pick of a network the device cannot reach
/// yields nothing and does not count as a client.
pub fn simulate_round(bandwidths: &[f64], choices: &[usize], masks: &[Vec<bool>]) -> Vec<f64> {
    let counts = client_counts(bandwidths.len(), choices, masks);
    choices
        .iter()
        .enumerate()
        .map(|(d, &j)| {
            if masks[d][j] {
                bandwidths[j] / counts[j] as f64
            } else {
                0.0
            }
        })
        .collect()
}

pub fn client_counts(networks: usize, choices: &[usize], masks: &[Vec<bool>]) -> Vec<usize> {
    let mut counts = vec![0usize; networks];
    for (d, &j) in choices.iter().enumerate() {
        if masks[d][j] {
            counts[j] += 1;
        }
    }
    counts
}

/// Shortfall of the worst-off device relative to the max-min optimum, as a
/// percentage. Zero when the optimum itself is zero.
pub fn distance_pct(optimal_min: f64, observed_min: f64) -> f64 {
    if optimal_min > 0.0 {
        (100.0 * (optimal_min - observed_min) / optimal_min).max(0.0)
    } else {
        0.0
    }
}

/// Mean of the devices' distributions.
pub fn combined_probabilities(distributions: &[Vec<f64>]) -> Vec<f64> {
    let Some(first) = distributions.first() else {
        return Vec::new();
    };
    let mut mean = vec![0.0; first.len()];
    for d in distributions {
        for (m, p) in mean.iter_mut().zip(d) {
            *m += p;
        }
    }
    let n = distributions.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net(curve: BandwidthCurve, noise: f64, len: usize) -> CompiledNetwork {
        CompiledNetwork::new(
            &NetworkProfile {
                id: "n".into(),
                bandwidth: curve,
                noise_pct: noise,
            },
            len,
        )
        .unwrap()
    }

    #[test]
    fn constant_curve_without_noise() {
        let n = net(BandwidthCurve::Constant(10.0), 0.0, 1440);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for slot in [0, 17, 1439, 1440, 99_999] {
            assert_eq!(n.bandwidth_at(slot, &mut rng), 10.0);
        }
    }

    #[test]
    fn curve_repeats_every_iteration() {
        let n = net(
            BandwidthCurve::Segments(vec![
                Segment {
                    until: 2,
                    mbps: 3.0,
                },
                Segment {
                    until: 5,
                    mbps: 7.0,
                },
            ]),
            0.0,
            5,
        );
        assert_eq!(n.curve, vec![3.0, 3.0, 7.0, 7.0, 7.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for s in 0..5 {
            assert_eq!(n.bandwidth_at(s, &mut rng), n.bandwidth_at(s + 5, &mut rng));
        }
    }

    #[test]
    fn noise_is_unbiased_and_non_negative() {
        let n = net(BandwidthCurve::Constant(10.0), 0.1, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws: Vec<f64> = (0..100_000).map(|s| n.bandwidth_at(s, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mean - 10.0).abs() / 10.0 < 0.005, "mean {mean}");
        assert!(draws.iter().all(|&v| v >= 0.0));
        // heavy noise still clamps at zero
        let wild = net(BandwidthCurve::Constant(10.0), 3.0, 4);
        assert!((0..10_000).all(|s| wild.bandwidth_at(s, &mut rng) >= 0.0));
    }

    #[test]
    fn bad_curves_rejected() {
        let short = BandwidthCurve::Segments(vec![Segment {
            until: 3,
            mbps: 1.0,
        }]);
        assert!(short.materialize(4).is_err());
        assert!(BandwidthCurve::Samples(vec![1.0; 3])
            .materialize(4)
            .is_err());
        assert!(BandwidthCurve::Constant(-1.0).materialize(4).is_err());
        let h = BandwidthCurve::Harmonic {
            base: 1.0,
            terms: vec![HarmonicTerm {
                amplitude: 5.0,
                cycles: 1.0,
                phase: 0.0,
            }],
        };
        assert!(h.materialize(8).unwrap().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn equal_sharing() {
        let all = vec![vec![true, true]; 2];
        assert_eq!(simulate_round(&[12.0, 6.0], &[0, 0], &all), vec![6.0, 6.0]);
        let masks = vec![vec![false, true]];
        assert_eq!(simulate_round(&[12.0, 6.0], &[0], &masks), vec![0.0]);
    }

    #[test]
    fn distance_examples() {
        assert!((distance_pct(5.0, 3.0) - 40.0).abs() < 1e-12);
        assert_eq!(distance_pct(5.0, 5.0), 0.0);
        assert_eq!(distance_pct(0.0, 0.0), 0.0);
    }

    #[test]
    fn combined_probability_examples() {
        let u = vec![1.0 / 3.0; 3];
        let c = combined_probabilities(&[u.clone(), u.clone(), u.clone()]);
        for p in c {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        let d = vec![0.2, 0.5, 0.3];
        assert_eq!(combined_probabilities(std::slice::from_ref(&d)), d);
    }

    mod properties {
        use super::super::maxmin::tests::brute_force_min_rate;
        use super::super::*;
        use proptest::prelude::*;

        fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<bool>>)> {
            (1usize..=4, 1usize..=6).prop_flat_map(|(k, n)| {
                (
                    prop::collection::vec(
                        prop::sample::select(vec![0.0, 1.0, 2.0, 3.0, 5.0, 6.0, 8.0, 12.0]),
                        k,
                    ),
                    prop::collection::vec(prop::collection::vec(any::<bool>(), k), n),
                )
                    .prop_map(|(b, mut masks)| {
                        for (d, m) in masks.iter_mut().enumerate() {
                            if !m.iter().any(|&a| a) {
                                let i = d % m.len();
                                m[i] = true;
                            }
                        }
                        (b, masks)
                    })
            })
        }

        proptest! {
            #[test]
            fn conservation((bw, masks) in instance(), picks in prop::collection::vec(0usize..4, 6)) {
                let k = bw.len();
                let choices: Vec<usize> = picks[..masks.len()].iter().map(|p| p % k).collect();
                let gains = simulate_round(&bw, &choices, &masks);
                let counts = client_counts(k, &choices, &masks);
                let occupied: f64 = (0..k).filter(|&j| counts[j] > 0).map(|j| bw[j]).sum();
                let delivered: f64 = gains.iter().sum();
                prop_assert!(delivered <= occupied + 1e-9);
                let all_available = choices.iter().enumerate().all(|(d, &j)| masks[d][j]);
                if all_available {
                    prop_assert!((delivered - occupied).abs() < 1e-9);
                }
            }

            #[test]
            fn max_min_matches_enumeration((bw, masks) in instance()) {
                let fast = optimal_min_rate(&bw, &masks).unwrap();
                let slow = brute_force_min_rate(&bw, &masks);
                prop_assert_eq!(fast, slow);
            }
        }
    }
}
