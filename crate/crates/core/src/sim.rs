//! Discrete-time Monte Carlo simulation of the whole network.
//!
//! Each step draws the hypothesis, lets every sensor observe and apply its
//! battery-gated threshold test, passes the bit through the sensor's channel,
//! updates the battery by `b' = min(b - w + e, K)` and lets the fusion center
//! decide with the MAP rule computed from the analytic steady-state laws.
//!
//! Every random purpose of every sensor owns its own ChaCha stream, seeded
//! from the master seed, so one sensor's parameters never perturb another
//! sensor's sample path. A run is single-threaded and bit-reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::network::{NetworkScenario, MAX_ENUMERATED_SENSORS};
use crate::observation::Hypothesis;

pub const DEFAULT_BURN_IN: u64 = 10_000;

/// Number of batches for batch-means standard errors.
pub const BATCHES: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialBattery {
    #[default]
    Empty,
    Full,
    Level(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub scenario: NetworkScenario,
    pub steps: u64,
    pub seed: u64,
    pub burn_in: u64,
    pub initial_battery: InitialBattery,
}

impl SimConfig {
    pub fn new(scenario: NetworkScenario, steps: u64, seed: u64) -> Self {
        Self {
            scenario,
            steps,
            seed,
            burn_in: DEFAULT_BURN_IN.min(steps / 10),
            initial_battery: InitialBattery::Empty,
        }
    }

    pub fn validate(&self) -> Result<Vec<u32>> {
        self.scenario.validate()?;
        if self.steps <= self.burn_in {
            return Err(invalid("steps", "must exceed burn_in"));
        }
        if self.scenario.sensors.len() > MAX_ENUMERATED_SENSORS {
            return Err(Error::TooManySensors {
                sensors: self.scenario.sensors.len(),
                limit: MAX_ENUMERATED_SENSORS,
            });
        }
        let capacities = self
            .scenario
            .sensors
            .iter()
            .map(|s| {
                s.capacity
                    .finite()
                    .ok_or(Error::InfiniteCapacity("simulation"))
            })
            .collect::<Result<Vec<_>>>()?;
        if let InitialBattery::Level(level) = self.initial_battery {
            if capacities.iter().any(|&k| level > k) {
                return Err(invalid(
                    "initial_battery",
                    format!("level {level} exceeds a capacity"),
                ));
            }
        }
        Ok(capacities)
    }
}

/// Per-sensor statistics collected after burn-in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorStats {
    /// Empirical law of the battery charge at decision time.
    pub battery_histogram: Vec<f64>,
    pub depletion_frequency: f64,
    /// Batch-means standard error of the depletion frequency.
    pub depletion_batch_se: Option<f64>,
    pub transmissions: u64,
    /// Number of received ones under H0 and H1.
    pub ones_received: [u64; 2],
    /// Empirical `Pr(y = 1 | h)` for `h = 0, 1`.
    pub y1_given_h: [Option<f64>; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub seed: u64,
    pub steps: u64,
    pub burn_in: u64,
    pub measured_steps: u64,
    /// Steps spent under H0 and H1.
    pub hypothesis_counts: [u64; 2],
    pub fc_errors: u64,
    pub fc_error_rate: f64,
    pub fc_error_batch_se: Option<f64>,
    pub sensors: Vec<SensorStats>,
}

/// What a random stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    Observation = 0,
    Channel = 1,
    Energy = 2,
}

pub const HYPOTHESIS_STREAM: u64 = 0;

/// Stream id of one purpose of one sensor; id 0 is the hypothesis stream.
pub fn stream_id(sensor: usize, purpose: StreamPurpose) -> u64 {
    1 + 3 * sensor as u64 + purpose as u64
}

/// Seed of stream `stream` under `master`. For a fixed master seed the map
/// is a bijection of the stream id, so distinct streams never share a seed.
pub fn derive_stream_seed(master: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(master) ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream(master: u64, id: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_stream_seed(master, id))
}

struct SensorState {
    capacity: u32,
    battery: u32,
    observation_rng: ChaCha8Rng,
    channel_rng: ChaCha8Rng,
    energy_rng: ChaCha8Rng,
    histogram: Vec<u64>,
    empty_by_batch: Vec<u64>,
    transmissions: u64,
    ones: [u64; 2],
}

pub fn run(config: &SimConfig) -> Result<SimReport> {
    let capacities = config.validate()?;
    let scenario = &config.scenario;
    let rule = scenario.map_rule()?;
    let measured = config.steps - config.burn_in;
    let batch_len = measured / BATCHES;

    let mut sensors: Vec<SensorState> = capacities
        .iter()
        .enumerate()
        .map(|(n, &capacity)| SensorState {
            capacity,
            battery: match config.initial_battery {
                InitialBattery::Empty => 0,
                InitialBattery::Full => capacity,
                InitialBattery::Level(k) => k,
            },
            observation_rng: stream(config.seed, stream_id(n, StreamPurpose::Observation)),
            channel_rng: stream(config.seed, stream_id(n, StreamPurpose::Channel)),
            energy_rng: stream(config.seed, stream_id(n, StreamPurpose::Energy)),
            histogram: vec![0; capacity as usize + 1],
            empty_by_batch: vec![0; BATCHES as usize],
            transmissions: 0,
            ones: [0; 2],
        })
        .collect();
    let mut hypothesis_rng = stream(config.seed, HYPOTHESIS_STREAM);
    let mut hypothesis_counts = [0u64; 2];
    let mut errors = 0u64;
    let mut errors_by_batch = vec![0u64; BATCHES as usize];

    for t in 0..config.steps {
        let h = Hypothesis::from_bool(hypothesis_rng.random::<f64>() < scenario.prior);
        let batch = match t.checked_sub(config.burn_in) {
            Some(m) if batch_len > 0 && m / batch_len < BATCHES => Some((m / batch_len) as usize),
            _ => None,
        };
        let measuring = t >= config.burn_in;
        let mut outcome = 0usize;

        for (n, (state, design)) in sensors.iter_mut().zip(&scenario.sensors).enumerate() {
            let x = design.model.sample(h, &mut state.observation_rng);
            let send = x >= design.threshold && state.battery > 0;
            let flip: f64 = state.channel_rng.random();
            let y = if send {
                flip >= design.channel.eps1
            } else {
                flip < design.channel.eps0
            };
            let arrival = state.energy_rng.random::<f64>() < design.harvest_prob;

            if measuring {
                state.histogram[state.battery as usize] += 1;
                if state.battery == 0 {
                    if let Some(b) = batch {
                        state.empty_by_batch[b] += 1;
                    }
                }
                state.transmissions += u64::from(send);
                state.ones[h.index()] += u64::from(y);
            }
            if y {
                outcome |= 1 << n;
            }
            state.battery =
                (state.battery - u32::from(send) + u32::from(arrival)).min(state.capacity);
        }

        if measuring {
            hypothesis_counts[h.index()] += 1;
            if rule[outcome] != h {
                errors += 1;
                if let Some(b) = batch {
                    errors_by_batch[b] += 1;
                }
            }
        }
    }

    let per_step = |count: u64| count as f64 / measured as f64;
    let sensors = sensors
        .into_iter()
        .map(|s| SensorStats {
            battery_histogram: s.histogram.iter().map(|&c| per_step(c)).collect(),
            depletion_frequency: per_step(s.histogram[0]),
            depletion_batch_se: batch_standard_error(&s.empty_by_batch, batch_len),
            transmissions: s.transmissions,
            ones_received: s.ones,
            y1_given_h: [0, 1].map(|h| {
                (hypothesis_counts[h] > 0).then(|| s.ones[h] as f64 / hypothesis_counts[h] as f64)
            }),
        })
        .collect();

    Ok(SimReport {
        seed: config.seed,
        steps: config.steps,
        burn_in: config.burn_in,
        measured_steps: measured,
        hypothesis_counts,
        fc_errors: errors,
        fc_error_rate: per_step(errors),
        fc_error_batch_se: batch_standard_error(&errors_by_batch, batch_len),
        sensors,
    })
}

/// Standard error of the grand mean from equal-length batch counts.
fn batch_standard_error(counts: &[u64], batch_len: u64) -> Option<f64> {
    if batch_len == 0 || counts.len() < 2 {
        return None;
    }
    let means: Vec<f64> = counts
        .iter()
        .map(|&c| c as f64 / batch_len as f64)
        .collect();
    let b = means.len() as f64;
    let mean = means.iter().sum::<f64>() / b;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (b - 1.0);
    Some((var / b).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::battery::Capacity;
    use crate::metrics::{ChannelModel, SensorDesign};
    use crate::observation::ObservationModel;
    use std::collections::HashSet;

    fn sensor(k: u32, pe: f64, tau: f64) -> SensorDesign {
        SensorDesign {
            model: ObservationModel::rician(5.0).unwrap(),
            threshold: tau,
            capacity: Capacity::Finite(k),
            harvest_prob: pe,
            channel: ChannelModel::new(0.1, 0.2).unwrap(),
        }
    }

    #[test]
    fn stream_seeds_are_deterministic_and_distinct() {
        assert_eq!(derive_stream_seed(42, 7), derive_stream_seed(42, 7));
        let seeds: HashSet<u64> = (0..1_000_000u64)
            .map(|id| derive_stream_seed(42, id))
            .collect();
        assert_eq!(seeds.len(), 1_000_000);
        assert_ne!(derive_stream_seed(1, 0), derive_stream_seed(2, 0));
    }

    #[test]
    fn no_harvest_means_no_transmissions() {
        let scenario = NetworkScenario::new(0.2, vec![sensor(2, 0.0, 3.0); 2]).unwrap();
        let report = run(&SimConfig::new(scenario, 20_000, 1)).unwrap();
        for s in &report.sensors {
            assert_eq!(s.transmissions, 0);
            assert_eq!(s.depletion_frequency, 1.0);
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let scenario = NetworkScenario::new(0.2, vec![sensor(2, 0.15, 3.4); 3]).unwrap();
        let config = SimConfig::new(scenario, 50_000, 99);
        let a = serde_json::to_string(&run(&config).unwrap()).unwrap();
        let b = serde_json::to_string(&run(&config).unwrap()).unwrap();
        assert_eq!(a, b);
        let mut other = config.clone();
        other.seed = 100;
        assert_ne!(a, serde_json::to_string(&run(&other).unwrap()).unwrap());
    }

    #[test]
    fn changing_one_sensor_leaves_the_others_paths_alone() {
        let base =
            NetworkScenario::new(0.2, vec![sensor(2, 0.15, 3.4), sensor(1, 0.3, 2.0)]).unwrap();
        let mut changed = base.clone();
        changed.sensors[1].threshold = 4.0;
        let a = run(&SimConfig::new(base, 30_000, 5)).unwrap();
        let b = run(&SimConfig::new(changed, 30_000, 5)).unwrap();
        assert_eq!(a.sensors[0], b.sensors[0]);
        assert_eq!(a.hypothesis_counts, b.hypothesis_counts);
        assert_ne!(a.sensors[1], b.sensors[1]);
    }

    #[test]
    fn configuration_errors() {
        let mut inf = sensor(1, 0.15, 3.0);
        inf.capacity = Capacity::Infinite;
        let scenario = NetworkScenario::new(0.2, vec![inf]).unwrap();
        assert_eq!(
            run(&SimConfig::new(scenario, 1000, 1)).unwrap_err(),
            Error::InfiniteCapacity("simulation")
        );
        let scenario = NetworkScenario::new(0.2, vec![sensor(2, 0.15, 3.0)]).unwrap();
        let mut c = SimConfig::new(scenario, 1000, 1);
        c.burn_in = 1000;
        assert!(run(&c).is_err());
        c.burn_in = 0;
        c.initial_battery = InitialBattery::Level(3);
        assert!(run(&c).is_err());
    }

    #[test]
    fn report_counts_are_consistent() {
        let scenario = NetworkScenario::new(0.2, vec![sensor(3, 0.15, 3.4); 2]).unwrap();
        let mut c = SimConfig::new(scenario, 100_000, 3);
        c.burn_in = 1234;
        c.initial_battery = InitialBattery::Full;
        let r = run(&c).unwrap();
        assert_eq!(r.measured_steps, 100_000 - 1234);
        assert_eq!(r.hypothesis_counts.iter().sum::<u64>(), r.measured_steps);
        for s in &r.sensors {
            assert_eq!(s.battery_histogram.len(), 4);
            assert!((s.battery_histogram.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(s.depletion_batch_se.unwrap() > 0.0);
        }
    }
}
