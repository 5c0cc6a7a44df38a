//! Exact evaluation of a parallel network of N sensors by enumerating the
//! `2^N` fusion-center input vectors.

use serde::{Deserialize, Serialize};

use crate::battery::{BatteryChain, BatteryParams};
use crate::error::{invalid, Error, Result};
use crate::metrics::{kailath_bound, ExtendedReal, SensorDesign, SensorEvaluation};
use crate::observation::Hypothesis;

/// Largest network evaluated by enumeration.
pub const MAX_ENUMERATED_SENSORS: usize = 24;

/// Largest joint battery state space handled by
/// [`NetworkScenario::joint_battery_error_probability`].
pub const MAX_JOINT_STATES: usize = 1 << 20;

const JOINT_MAX_ITERATIONS: usize = 1_000_000;
const JOINT_TOLERANCE: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkScenario {
    /// `π1 = Pr(H = 1)`.
    pub prior: f64,
    pub sensors: Vec<SensorDesign>,
}

impl NetworkScenario {
    pub fn new(prior: f64, sensors: Vec<SensorDesign>) -> Result<Self> {
        let scenario = Self { prior, sensors };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.prior > 0.0 && self.prior < 1.0) {
            return Err(invalid("prior", format!("{} is not in (0, 1)", self.prior)));
        }
        if self.sensors.is_empty() {
            return Err(invalid("sensors", "at least one sensor required"));
        }
        self.sensors.iter().try_for_each(SensorDesign::validate)
    }

    fn check_size(&self) -> Result<()> {
        if self.sensors.len() > MAX_ENUMERATED_SENSORS {
            return Err(Error::TooManySensors {
                sensors: self.sensors.len(),
                limit: MAX_ENUMERATED_SENSORS,
            });
        }
        Ok(())
    }

    pub fn evaluations(&self) -> Result<Vec<SensorEvaluation>> {
        self.validate()?;
        self.sensors
            .iter()
            .map(|s| s.evaluate(self.prior))
            .collect()
    }

    /// `Pr(y | h)` for every `y ∈ {0,1}^N`, indexed so that bit `n` of the
    /// index is `y_n`.
    pub fn joint_pmf(&self, h: Hypothesis) -> Result<Vec<f64>> {
        self.check_size()?;
        let evals = self.evaluations()?;
        Ok(product_law(evals.iter().map(|e| e.output.law(h))))
    }

    /// MAP decision for every outcome vector; exact ties decide `H0`.
    pub fn map_rule(&self) -> Result<Vec<Hypothesis>> {
        let (p0, p1) = (
            self.joint_pmf(Hypothesis::H0)?,
            self.joint_pmf(Hypothesis::H1)?,
        );
        let (pi0, pi1) = (1.0 - self.prior, self.prior);
        Ok(p0
            .iter()
            .zip(&p1)
            .map(|(a, b)| Hypothesis::from_bool(pi1 * b > pi0 * a))
            .collect())
    }

    /// `P_E = 1 - Σ_y max_j π_j Pr(y | j)`, accumulated as `Σ_y min_j` to
    /// avoid cancellation when the error is small.
    pub fn map_error_probability(&self) -> Result<f64> {
        let (p0, p1) = (
            self.joint_pmf(Hypothesis::H0)?,
            self.joint_pmf(Hypothesis::H1)?,
        );
        let (pi0, pi1) = (1.0 - self.prior, self.prior);
        let pe: f64 = p0
            .iter()
            .zip(&p1)
            .map(|(a, b)| (pi0 * a).min(pi1 * b))
            .sum();
        Ok(pe.clamp(0.0, pi0.min(pi1)))
    }

    /// Sum of the per-sensor constrained BDs.
    pub fn total_bd(&self) -> Result<ExtendedReal> {
        Ok(self.evaluations()?.iter().map(|e| e.bd).sum())
    }

    /// BD between the two joint laws, `-ln Σ_y √(Pr(y|0) Pr(y|1))`.
    pub fn joint_bd(&self) -> Result<ExtendedReal> {
        let (p0, p1) = (
            self.joint_pmf(Hypothesis::H0)?,
            self.joint_pmf(Hypothesis::H1)?,
        );
        let coefficient: f64 = p0.iter().zip(&p1).map(|(a, b)| (a * b).sqrt()).sum();
        Ok(if coefficient <= 0.0 {
            ExtendedReal::Infinite
        } else {
            ExtendedReal::Finite((-coefficient.ln()).max(0.0))
        })
    }

    pub fn kailath_bound(&self) -> Result<f64> {
        Ok(kailath_bound(self.total_bd()?, self.prior))
    }

    /// Long-run error of the MAP table from [`Self::map_rule`] when the
    /// batteries evolve jointly in time.
    ///
    /// Every sensor sees the same hypothesis in an interval, so battery
    /// levels are correlated across sensors and the product law behind
    /// [`Self::map_error_probability`] is only exact for one sensor. This
    /// solves the stationary law of the joint chain on `Π (K_n + 1)` states
    /// by power iteration (lazy, so periodic corner cases still converge)
    /// and averages the error over it. Finite capacities only.
    pub fn joint_battery_error_probability(&self) -> Result<f64> {
        self.check_size()?;
        self.validate()?;
        let mut sizes = Vec::with_capacity(self.sensors.len());
        for s in &self.sensors {
            let k = s
                .capacity
                .finite()
                .ok_or(Error::InfiniteCapacity("joint battery chain"))?;
            sizes.push(k as usize + 1);
        }
        let states = sizes
            .iter()
            .try_fold(1usize, |acc, &m| {
                acc.checked_mul(m).filter(|&v| v <= MAX_JOINT_STATES)
            })
            .ok_or_else(|| {
                invalid(
                    "sensors",
                    format!("joint battery chain exceeds {MAX_JOINT_STATES} states"),
                )
            })?;

        let priors = [1.0 - self.prior, self.prior];
        // per-sensor chains conditioned on each hypothesis
        let mut chains = Vec::with_capacity(self.sensors.len());
        let mut tails = Vec::with_capacity(self.sensors.len());
        for s in &self.sensors {
            let t = s.model.tail_probabilities(s.threshold)?;
            let chain =
                |q: f64| BatteryChain::new(BatteryParams::new(s.capacity, s.harvest_prob, q)?);
            chains.push([chain(t.q0)?, chain(t.q1)?]);
            tails.push([(t.q0, t.below0), (t.q1, t.below1)]);
        }

        // start from the product of the marginal steady states
        let mut law = vec![1.0];
        for s in &self.sensors {
            let marginal = BatteryChain::new(s.battery(self.prior)?)?
                .steady_state()
                .to_vec();
            law = marginal
                .iter()
                .flat_map(|m| law.iter().map(move |v| v * m))
                .collect();
        }
        debug_assert_eq!(law.len(), states);

        let mut converged = false;
        for _ in 0..JOINT_MAX_ITERATIONS {
            let mut next: Vec<f64> = law.iter().map(|v| 0.5 * v).collect();
            for h in 0..2 {
                let mut part = law.clone();
                let mut stride = 1;
                for (n, &m) in sizes.iter().enumerate() {
                    part = apply_mode(&part, &chains[n][h], m, stride);
                    stride *= m;
                }
                for (v, p) in next.iter_mut().zip(&part) {
                    *v += 0.5 * priors[h] * p;
                }
            }
            let diff: f64 = next.iter().zip(&law).map(|(a, b)| (a - b).abs()).sum();
            law = next;
            if diff < JOINT_TOLERANCE {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence(JOINT_MAX_ITERATIONS));
        }

        // Only whether each battery is empty matters for the FC input.
        let n = self.sensors.len();
        let mut alive = vec![0.0; 1 << n];
        for (idx, p) in law.iter().enumerate() {
            let (mut rest, mut pattern) = (idx, 0usize);
            for (i, &m) in sizes.iter().enumerate() {
                if rest % m > 0 {
                    pattern |= 1 << i;
                }
                rest /= m;
            }
            alive[pattern] += p;
        }
        let rule = self.map_rule()?;
        let mut error = 0.0;
        for (pattern, &pa) in alive.iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            for h in 0..2 {
                let laws = self.sensors.iter().enumerate().map(|(i, s)| {
                    let ch = s.channel;
                    if (pattern >> i) & 1 == 1 {
                        let (q, below) = tails[i][h];
                        (ch.eps0 + ch.delta() * q, ch.eps1 + ch.delta() * below)
                    } else {
                        (ch.eps0, 1.0 - ch.eps0)
                    }
                });
                let wrong: f64 = product_law(laws)
                    .iter()
                    .zip(&rule)
                    .filter(|(_, d)| d.index() != h)
                    .map(|(p, _)| p)
                    .sum();
                error += pa * priors[h] * wrong;
            }
        }
        Ok(error.clamp(0.0, 1.0))
    }
}

/// Applies one sensor's battery transition along its axis of the flattened
/// joint law (sensor `n` has `m` levels at stride `stride`).
fn apply_mode(law: &[f64], chain: &BatteryChain, m: usize, stride: usize) -> Vec<f64> {
    let mut out = vec![0.0; law.len()];
    for (idx, &p) in law.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let b = (idx / stride) % m;
        let lo = b.saturating_sub(1);
        let hi = (b + 1).min(m - 1);
        for j in lo..=hi {
            let t = chain.transition(b, j);
            if t > 0.0 {
                out[idx + j * stride - b * stride] += p * t;
            }
        }
    }
    out
}

/// Product of independent Bernoulli laws over `{0,1}^N`, each given as
/// `(Pr(1), Pr(0))`.
fn product_law(laws: impl Iterator<Item = (f64, f64)>) -> Vec<f64> {
    let mut law = vec![1.0];
    for (p, p_zero) in laws {
        let zero: Vec<f64> = law.iter().map(|v| v * p_zero).collect();
        law.iter_mut().for_each(|v| *v *= p);
        let one = std::mem::replace(&mut law, zero);
        law.extend(one);
    }
    law
}

/// Index of an outcome vector in [`NetworkScenario::joint_pmf`].
pub fn outcome_index(outcome: &[bool]) -> usize {
    outcome
        .iter()
        .enumerate()
        .fold(0, |acc, (n, &y)| acc | (usize::from(y) << n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::battery::Capacity;
    use crate::metrics::ChannelModel;
    use crate::observation::{ObservationModel, TableEntry};

    fn table_sensor(q0: f64, q1: f64, cap: Capacity, pe: f64, ch: ChannelModel) -> SensorDesign {
        SensorDesign {
            model: ObservationModel::table(vec![TableEntry {
                threshold: 1.0,
                q0,
                q1,
            }])
            .unwrap(),
            threshold: 1.0,
            capacity: cap,
            harvest_prob: pe,
            channel: ch,
        }
    }

    fn noisy() -> ChannelModel {
        ChannelModel::new(0.1, 0.2).unwrap()
    }

    /// Oracle: `1 - Σ max`, evaluated literally.
    fn error_by_max(s: &NetworkScenario) -> f64 {
        let p0 = s.joint_pmf(Hypothesis::H0).unwrap();
        let p1 = s.joint_pmf(Hypothesis::H1).unwrap();
        1.0 - p0
            .iter()
            .zip(&p1)
            .map(|(a, b)| ((1.0 - s.prior) * a).max(s.prior * b))
            .sum::<f64>()
    }

    #[test]
    fn joint_battery_error_matches_product_form_when_exact() {
        // one sensor: no cross-sensor correlation to speak of
        for (cap, pe) in [(Capacity::Finite(1), 0.15), (Capacity::Finite(4), 0.4)] {
            let s =
                NetworkScenario::new(0.3, vec![table_sensor(0.1, 0.7, cap, pe, noisy())]).unwrap();
            let exact = s.map_error_probability().unwrap();
            assert!((s.joint_battery_error_probability().unwrap() - exact).abs() < 1e-12);
        }
        // p_e = 1 keeps every battery full, so batteries never matter
        let sensors = vec![
            table_sensor(0.1, 0.7, Capacity::Finite(1), 1.0, noisy()),
            table_sensor(0.2, 0.6, Capacity::Finite(2), 1.0, ChannelModel::NOISELESS),
            table_sensor(0.3, 0.9, Capacity::Finite(3), 1.0, noisy()),
        ];
        let s = NetworkScenario::new(0.4, sensors).unwrap();
        let exact = s.map_error_probability().unwrap();
        assert!((s.joint_battery_error_probability().unwrap() - exact).abs() < 1e-12);
    }

    #[test]
    fn joint_battery_error_needs_finite_capacity() {
        let s = NetworkScenario::new(
            0.3,
            vec![table_sensor(0.1, 0.7, Capacity::Infinite, 0.2, noisy())],
        )
        .unwrap();
        assert!(matches!(
            s.joint_battery_error_probability(),
            Err(Error::InfiniteCapacity(_))
        ));
    }

    #[test]
    fn single_sensor_law() {
        // p_e = 1 keeps the battery full, so Pr(y=1|h) = ε0 + δ q_h.
        let s = NetworkScenario::new(
            0.2,
            vec![table_sensor(0.05, 0.9, Capacity::Finite(1), 1.0, noisy())],
        )
        .unwrap();
        let law = s.joint_pmf(Hypothesis::H1).unwrap();
        assert!((law[1] - (0.1 + 0.7 * 0.9)).abs() < 1e-15);
        assert!((law[0] + law[1] - 1.0).abs() < 1e-15);
        assert_eq!(
            s.total_bd().unwrap(),
            s.sensors[0].constrained_bd(0.2).unwrap()
        );
    }

    #[test]
    fn product_form_for_identical_sensors() {
        let sensor = table_sensor(0.05, 0.9, Capacity::Finite(2), 0.15, noisy());
        let s = NetworkScenario::new(0.2, vec![sensor.clone(), sensor.clone()]).unwrap();
        let a = sensor.evaluate(0.2).unwrap().output.given_h0;
        let law = s.joint_pmf(Hypothesis::H0).unwrap();
        assert!((law[outcome_index(&[true, true])] - a * a).abs() < 1e-16);
        assert!((law[outcome_index(&[true, false])] - a * (1.0 - a)).abs() < 1e-16);

        let four = NetworkScenario::new(0.2, vec![sensor.clone(); 4]).unwrap();
        let single = sensor.constrained_bd(0.2).unwrap().value();
        assert!((four.total_bd().unwrap().value() - 4.0 * single).abs() < 1e-14);
        assert!((four.joint_bd().unwrap().value() - 4.0 * single).abs() < 1e-12);
    }

    #[test]
    fn uninformative_network_errs_at_the_smaller_prior() {
        let sensor = table_sensor(0.3, 0.3, Capacity::Finite(1), 0.5, noisy());
        let s = NetworkScenario::new(0.35, vec![sensor; 3]).unwrap();
        assert!((s.map_error_probability().unwrap() - 0.35).abs() < 1e-15);
        assert!(s.map_rule().unwrap().iter().all(|&h| h == Hypothesis::H0));
    }

    #[test]
    fn separable_sensor_makes_no_errors() {
        let sensor = table_sensor(0.0, 1.0, Capacity::Infinite, 0.9, ChannelModel::NOISELESS);
        let s = NetworkScenario::new(0.2, vec![sensor]).unwrap();
        assert_eq!(s.map_error_probability().unwrap(), 0.0);
        assert_eq!(s.total_bd().unwrap(), ExtendedReal::Infinite);
        assert_eq!(s.joint_bd().unwrap(), ExtendedReal::Infinite);
        assert_eq!(s.kailath_bound().unwrap(), 0.0);
    }

    #[test]
    fn heterogeneous_decoupling_and_bounds() {
        let sensors = vec![
            table_sensor(0.05, 0.9, Capacity::Finite(1), 0.15, noisy()),
            table_sensor(0.2, 0.7, Capacity::Finite(3), 0.3, ChannelModel::NOISELESS),
            table_sensor(
                0.01,
                0.5,
                Capacity::Infinite,
                0.1,
                ChannelModel::new(0.05, 0.3).unwrap(),
            ),
        ];
        let s = NetworkScenario::new(0.3, sensors.clone()).unwrap();
        let sum = s.total_bd().unwrap().value();
        let joint = s.joint_bd().unwrap().value();
        assert!((sum - joint).abs() < 1e-10, "{sum} vs {joint}");
        let pe = s.map_error_probability().unwrap();
        assert!((pe - error_by_max(&s)).abs() < 1e-14);
        assert!(pe <= s.kailath_bound().unwrap());
        for h in [Hypothesis::H0, Hypothesis::H1] {
            assert!((s.joint_pmf(h).unwrap().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        // dropping an informative sensor cannot help
        let fewer = NetworkScenario::new(0.3, sensors[..2].to_vec()).unwrap();
        assert!(fewer.map_error_probability().unwrap() >= pe);
    }

    #[test]
    fn size_and_prior_limits() {
        let sensor = table_sensor(0.05, 0.9, Capacity::Finite(1), 0.15, noisy());
        let big = NetworkScenario::new(0.2, vec![sensor.clone(); 25]).unwrap();
        assert_eq!(
            big.map_error_probability().unwrap_err(),
            Error::TooManySensors {
                sensors: 25,
                limit: 24
            }
        );
        assert!(NetworkScenario::new(0.0, vec![sensor.clone()]).is_err());
        assert!(NetworkScenario::new(1.0, vec![sensor]).is_err());
        assert!(NetworkScenario::new(0.5, vec![]).is_err());
    }

    #[test]
    fn outcome_indexing() {
        assert_eq!(outcome_index(&[]), 0);
        assert_eq!(outcome_index(&[true, false, true]), 0b101);
    }
}
