//! Bhattacharyya distances at the fusion-center input.

use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::battery::{BatteryParams, Capacity};
use crate::error::{check_probability, invalid, Result};
use crate::observation::{Hypothesis, ObservationModel, TailPair};

/// A nonnegative distance that may be `+∞` (disjoint laws). Serialized as a
/// JSON number, or `null` when unbounded.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum ExtendedReal {
    Finite(f64),
    Infinite,
}

impl ExtendedReal {
    pub const ZERO: ExtendedReal = ExtendedReal::Finite(0.0);

    /// As an `f64`, with `f64::INFINITY` for the unbounded case.
    pub fn value(self) -> f64 {
        match self {
            ExtendedReal::Finite(v) => v,
            ExtendedReal::Infinite => f64::INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            ExtendedReal::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, ExtendedReal::Infinite)
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl Add for ExtendedReal {
    type Output = ExtendedReal;

    fn add(self, rhs: Self) -> Self {
        match (self, rhs) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => ExtendedReal::Finite(a + b),
            _ => ExtendedReal::Infinite,
        }
    }
}

impl std::iter::Sum for ExtendedReal {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(ExtendedReal::ZERO, Add::add)
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(v) => write!(f, "{v}"),
            ExtendedReal::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.finite().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ExtendedReal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(match Option::<f64>::deserialize(deserializer)? {
            Some(v) => ExtendedReal::Finite(v),
            None => ExtendedReal::Infinite,
        })
    }
}

/// Binary asymmetric channel: `eps0 = Pr(y=1 | u=0)`, `eps1 = Pr(y=0 | u=1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub eps0: f64,
    pub eps1: f64,
}

impl ChannelModel {
    pub const NOISELESS: ChannelModel = ChannelModel {
        eps0: 0.0,
        eps1: 0.0,
    };

    pub fn new(eps0: f64, eps1: f64) -> Result<Self> {
        let ch = Self { eps0, eps1 };
        ch.validate()?;
        Ok(ch)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, eps) in [("eps0", self.eps0), ("eps1", self.eps1)] {
            if !(0.0..0.5).contains(&eps) {
                return Err(invalid(name, format!("{eps} is not in [0, 0.5)")));
            }
        }
        Ok(())
    }

    /// `δ = 1 - ε0 - ε1`.
    pub fn delta(&self) -> f64 {
        1.0 - self.eps0 - self.eps1
    }

    pub fn is_noiseless(&self) -> bool {
        self.eps0 == 0.0 && self.eps1 == 0.0
    }
}

/// Bernoulli parameters of the channel output: `Pr(y = 1 | H0)` and
/// `Pr(y = 1 | H1)`, with the matching `Pr(y = 0 | h)` kept separately
/// (summed from non-negative terms, not formed as `1 - Pr(y = 1 | h)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputPmf {
    pub given_h0: f64,
    pub given_h1: f64,
    pub zero_given_h0: f64,
    pub zero_given_h1: f64,
}

impl OutputPmf {
    /// `(Pr(y = 1 | h), Pr(y = 0 | h))`.
    pub fn law(&self, h: Hypothesis) -> (f64, f64) {
        match h {
            Hypothesis::H0 => (self.given_h0, self.zero_given_h0),
            Hypothesis::H1 => (self.given_h1, self.zero_given_h1),
        }
    }

    /// Bhattacharyya distance between the two output laws.
    pub fn bd(&self) -> ExtendedReal {
        if self.given_h0 == self.given_h1 && self.zero_given_h0 == self.zero_given_h1 {
            return ExtendedReal::ZERO;
        }
        distance_from_coefficient(
            (self.given_h0 * self.given_h1).sqrt()
                + (self.zero_given_h0 * self.zero_given_h1).sqrt(),
        )
    }
}

/// Law of the fusion-center input when the sensor fires with probability
/// `q_h` and its battery is empty with probability `p0`:
/// `Pr(y = 1 | h) = ε0 + δ q_h (1 - p0)` and
/// `Pr(y = 0 | h) = (1 - ε0) p0 + (1 - p0)(ε1 + δ Pr(X < τ | h))`.
pub fn channel_output_pmf(tails: TailPair, p0: f64, channel: &ChannelModel) -> OutputPmf {
    let live = 1.0 - p0;
    let delta = channel.delta();
    let dead = (1.0 - channel.eps0) * p0;
    OutputPmf {
        given_h0: channel.eps0 + delta * tails.q0 * live,
        given_h1: channel.eps0 + delta * tails.q1 * live,
        zero_given_h0: dead + live * (channel.eps1 + delta * tails.below0),
        zero_given_h1: dead + live * (channel.eps1 + delta * tails.below1),
    }
}

fn distance_from_coefficient(coefficient: f64) -> ExtendedReal {
    if coefficient <= 0.0 {
        ExtendedReal::Infinite
    } else {
        ExtendedReal::Finite((-coefficient.ln()).max(0.0))
    }
}

/// Bhattacharyya distance `-ln[√(ab) + √((1-a)(1-b))]` between
/// Bernoulli(a) and Bernoulli(b).
pub fn bhattacharyya(a: f64, b: f64) -> ExtendedReal {
    if a == b {
        return ExtendedReal::ZERO;
    }
    distance_from_coefficient((a * b).sqrt() + ((1.0 - a) * (1.0 - b)).max(0.0).sqrt())
}

/// BD with the sensor always able to transmit (`p0 = 0`).
pub fn unconstrained_bd(tails: TailPair, channel: &ChannelModel) -> ExtendedReal {
    channel_output_pmf(tails, 0.0, channel).bd()
}

/// Largest BD any threshold can deliver from a sensor with this battery,
/// attained by a separable test (`q0 = 0`, `q1 = 1`):
/// `-ln[√(ε0 (1 - ε1 - p̄0 δ)) + √((1 - ε0)(ε1 + p̄0 δ))]`, where `p̄0` is
/// the depletion probability at `q = π1`.
pub fn bd_upper_bound(
    capacity: Capacity,
    harvest_prob: f64,
    prior: f64,
    channel: &ChannelModel,
) -> Result<ExtendedReal> {
    channel.validate()?;
    check_probability("prior", prior)?;
    let p0_bar = BatteryParams::new(capacity, harvest_prob, prior)?.depletion_probability();
    let (eps0, eps1, delta) = (channel.eps0, channel.eps1, channel.delta());
    let coefficient = (eps0 * (1.0 - eps1 - p0_bar * delta)).max(0.0).sqrt()
        + ((1.0 - eps0) * (eps1 + p0_bar * delta)).sqrt();
    Ok(if coefficient <= 0.0 {
        ExtendedReal::Infinite
    } else {
        ExtendedReal::Finite((-coefficient.ln()).max(0.0))
    })
}

/// Kailath bound on the MAP error: `√(π0 π1) e^{-B}`, clamped to
/// `[0, min(π0, π1)]`.
pub fn kailath_bound(total_bd: ExtendedReal, prior: f64) -> f64 {
    let cap = prior.min(1.0 - prior);
    match total_bd {
        ExtendedReal::Infinite => 0.0,
        ExtendedReal::Finite(b) => ((prior * (1.0 - prior)).sqrt() * (-b).exp()).clamp(0.0, cap),
    }
}

/// One sensor: observation law, threshold, battery and channel to the FC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorDesign {
    pub model: ObservationModel,
    pub threshold: f64,
    pub capacity: Capacity,
    pub harvest_prob: f64,
    pub channel: ChannelModel,
}

/// Everything derived from a [`SensorDesign`] under a given prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorEvaluation {
    pub tails: TailPair,
    /// `q = π0 q0 + π1 q1`.
    pub transmit_prob: f64,
    pub depletion: f64,
    pub output: OutputPmf,
    pub bd: ExtendedReal,
}

impl SensorDesign {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.channel.validate()?;
        check_probability("harvest_prob", self.harvest_prob)?;
        if self.capacity == Capacity::Finite(0) {
            return Err(invalid("capacity", "must be >= 1"));
        }
        Ok(())
    }

    pub fn with_threshold(&self, threshold: f64) -> Self {
        Self {
            threshold,
            ..self.clone()
        }
    }

    pub fn battery(&self, prior: f64) -> Result<BatteryParams> {
        let tails = self.model.tail_probabilities(self.threshold)?;
        BatteryParams::new(
            self.capacity,
            self.harvest_prob,
            transmit_prob(tails, prior),
        )
    }

    pub fn evaluate(&self, prior: f64) -> Result<SensorEvaluation> {
        self.validate()?;
        check_probability("prior", prior)?;
        let tails = self.model.tail_probabilities(self.threshold)?;
        let q = transmit_prob(tails, prior);
        let depletion =
            BatteryParams::new(self.capacity, self.harvest_prob, q)?.depletion_probability();
        let output = channel_output_pmf(tails, depletion, &self.channel);
        Ok(SensorEvaluation {
            tails,
            transmit_prob: q,
            depletion,
            output,
            bd: output.bd(),
        })
    }

    /// BD delivered to the FC in steady state, battery depletion included.
    pub fn constrained_bd(&self, prior: f64) -> Result<ExtendedReal> {
        Ok(self.evaluate(prior)?.bd)
    }

    /// BD this threshold would deliver if energy were never short.
    pub fn unconstrained_bd(&self) -> Result<ExtendedReal> {
        self.validate()?;
        let tails = self.model.tail_probabilities(self.threshold)?;
        Ok(unconstrained_bd(tails, &self.channel))
    }

    pub fn bd_upper_bound(&self, prior: f64) -> Result<ExtendedReal> {
        bd_upper_bound(self.capacity, self.harvest_prob, prior, &self.channel)
    }
}

fn transmit_prob(tails: TailPair, prior: f64) -> f64 {
    ((1.0 - prior) * tails.q0 + prior * tails.q1).clamp(0.0, 1.0)
}
