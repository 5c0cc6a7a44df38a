//! Conditional observation laws at a sensor and threshold tail probabilities.
//!
//! Thresholds live in observation space: for the Rayleigh/Rician pair with
//! equal scales the likelihood ratio is increasing in `x`, so a likelihood
//! ratio test `l(x) >= Θ` is the same test as `x >= τ` for a matching `τ`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, invalid, Result};
use crate::special::{ln_i0, marcum_p1, marcum_q1};

/// The hypothesis in force during one interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

impl Hypothesis {
    pub fn index(self) -> usize {
        match self {
            Hypothesis::H0 => 0,
            Hypothesis::H1 => 1,
        }
    }

    pub fn from_bool(h1: bool) -> Self {
        if h1 {
            Hypothesis::H1
        } else {
            Hypothesis::H0
        }
    }
}

/// False-alarm (`q0`) and detection (`q1`) probability of a threshold test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPair {
    pub q0: f64,
    pub q1: f64,
    /// `Pr(X < τ | H0)` and `Pr(X < τ | H1)`, evaluated directly rather than
    /// as `1 - q` so they stay accurate when a tail is within rounding of one.
    pub below0: f64,
    pub below1: f64,
}

impl TailPair {
    pub fn new(q0: f64, q1: f64) -> Result<Self> {
        check_probability("q0", q0)?;
        check_probability("q1", q1)?;
        Ok(Self::complementary(q0, q1))
    }

    fn complementary(q0: f64, q1: f64) -> Self {
        Self {
            q0,
            q1,
            below0: 1.0 - q0,
            below1: 1.0 - q1,
        }
    }

    pub fn below(&self, h: Hypothesis) -> f64 {
        match h {
            Hypothesis::H0 => self.below0,
            Hypothesis::H1 => self.below1,
        }
    }

    pub fn get(&self, h: Hypothesis) -> f64 {
        match h {
            Hypothesis::H0 => self.q0,
            Hypothesis::H1 => self.q1,
        }
    }
}

/// One row of a tabulated observation model: the tails at `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub threshold: f64,
    pub q0: f64,
    pub q1: f64,
}

/// Observation law under both hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObservationModel {
    /// Rayleigh magnitude (scale `sigma0`) under H0, Rician magnitude with
    /// noncentrality `s` and scale `sigma1` under H1.
    RayleighRician { s: f64, sigma0: f64, sigma1: f64 },
    /// Tabulated tails, read as a discrete law with atoms at the listed
    /// thresholds: `Pr(X >= τ | h)` is the `q_h` of the first entry whose
    /// threshold is `>= τ`, and zero past the last entry.
    Table { entries: Vec<TableEntry> },
}

impl ObservationModel {
    /// Rayleigh/Rician pair with unit scales.
    pub fn rician(s: f64) -> Result<Self> {
        Self::rayleigh_rician(s, 1.0, 1.0)
    }

    pub fn rayleigh_rician(s: f64, sigma0: f64, sigma1: f64) -> Result<Self> {
        let model = ObservationModel::RayleighRician { s, sigma0, sigma1 };
        model.validate()?;
        Ok(model)
    }

    pub fn table(entries: Vec<TableEntry>) -> Result<Self> {
        let model = ObservationModel::Table { entries };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ObservationModel::RayleighRician { s, sigma0, sigma1 } => {
                if !(s.is_finite() && *s >= 0.0) {
                    return Err(invalid("s", format!("{s} must be finite and >= 0")));
                }
                if !(sigma0.is_finite() && *sigma0 > 0.0) {
                    return Err(invalid("sigma0", format!("{sigma0} must be > 0")));
                }
                if !(sigma1.is_finite() && *sigma1 > 0.0) {
                    return Err(invalid("sigma1", format!("{sigma1} must be > 0")));
                }
            }
            ObservationModel::Table { entries } => {
                if entries.is_empty() {
                    return Err(invalid("entries", "table must not be empty"));
                }
                for e in entries {
                    if !e.threshold.is_finite() {
                        return Err(invalid("threshold", "table thresholds must be finite"));
                    }
                    check_probability("q0", e.q0)?;
                    check_probability("q1", e.q1)?;
                }
                for w in entries.windows(2) {
                    if w[1].threshold <= w[0].threshold {
                        return Err(invalid("threshold", "table thresholds must increase"));
                    }
                    if w[1].q0 > w[0].q0 || w[1].q1 > w[0].q1 {
                        return Err(invalid("entries", "table tails must be non-increasing"));
                    }
                }
            }
        }
        Ok(())
    }

    /// `(Pr(X >= τ | H0), Pr(X >= τ | H1))`.
    pub fn tail_probabilities(&self, tau: f64) -> Result<TailPair> {
        self.validate()?;
        match *self {
            ObservationModel::RayleighRician { s, sigma0, sigma1 } => {
                if tau.is_nan() || tau < 0.0 {
                    return Err(invalid("threshold", format!("{tau} must be >= 0")));
                }
                let (q0, below0) = rayleigh_tails(tau, sigma0);
                let (q1, below1) = if s == 0.0 {
                    rayleigh_tails(tau, sigma1)
                } else {
                    (
                        marcum_q1(s / sigma1, tau / sigma1),
                        marcum_p1(s / sigma1, tau / sigma1),
                    )
                };
                Ok(TailPair {
                    q0,
                    q1,
                    below0,
                    below1,
                })
            }
            ObservationModel::Table { ref entries } => {
                if tau.is_nan() {
                    return Err(invalid("threshold", "NaN threshold"));
                }
                let idx = entries.partition_point(|e| e.threshold < tau);
                Ok(entries
                    .get(idx)
                    .map(|e| TailPair::complementary(e.q0, e.q1))
                    .unwrap_or(TailPair::complementary(0.0, 0.0)))
            }
        }
    }

    /// Conditional density `f(x | h)`. Table models have no density.
    pub fn density(&self, x: f64, h: Hypothesis) -> Result<f64> {
        self.validate()?;
        let ObservationModel::RayleighRician { s, sigma0, sigma1 } = *self else {
            return Err(invalid("model", "tabulated models have no density"));
        };
        if x.is_nan() || x < 0.0 {
            return Err(invalid("x", format!("{x} must be >= 0")));
        }
        if x == 0.0 {
            return Ok(0.0);
        }
        let ln_f = match h {
            Hypothesis::H0 => {
                let v = sigma0 * sigma0;
                x.ln() - v.ln() - x * x / (2.0 * v)
            }
            Hypothesis::H1 => {
                let v = sigma1 * sigma1;
                x.ln() - v.ln() - (x * x + s * s) / (2.0 * v) + ln_i0(x * s / v)
            }
        };
        Ok(ln_f.exp())
    }

    /// Draws one observation under `h`.
    pub fn sample<R: Rng + ?Sized>(&self, h: Hypothesis, rng: &mut R) -> f64 {
        match *self {
            ObservationModel::RayleighRician { s, sigma0, sigma1 } => match h {
                Hypothesis::H0 => {
                    // inverse CDF; 1 - U lies in (0, 1]
                    let u: f64 = 1.0 - rng.random::<f64>();
                    sigma0 * (-2.0 * u.ln()).sqrt()
                }
                Hypothesis::H1 => {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    (sigma1 * re + s).hypot(sigma1 * im)
                }
            },
            ObservationModel::Table { ref entries } => {
                let u: f64 = rng.random();
                let q = |e: &TableEntry| match h {
                    Hypothesis::H0 => e.q0,
                    Hypothesis::H1 => e.q1,
                };
                // Largest atom whose tail exceeds u; the tails are non-increasing.
                let count = entries.partition_point(|e| q(e) > u);
                if count == 0 {
                    f64::NEG_INFINITY
                } else {
                    entries[count - 1].threshold
                }
            }
        }
    }

    /// Upper end of the default threshold search range.
    pub fn default_threshold_max(&self) -> f64 {
        match *self {
            ObservationModel::RayleighRician { s, sigma1, .. } => 12f64.max(s + 6.0 * sigma1),
            ObservationModel::Table { ref entries } => entries[entries.len() - 1].threshold,
        }
    }

    pub fn default_threshold_min(&self) -> f64 {
        match *self {
            ObservationModel::RayleighRician { .. } => 0.0,
            ObservationModel::Table { ref entries } => entries[0].threshold,
        }
    }
}

/// Upper and lower Rayleigh tails at `tau`.
fn rayleigh_tails(tau: f64, sigma: f64) -> (f64, f64) {
    let x = -tau * tau / (2.0 * sigma * sigma);
    (x.exp(), -x.exp_m1())
}
