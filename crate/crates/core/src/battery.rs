//! Battery of a harvesting sensor as a birth-death Markov chain.
//!
//! Per interval at most one packet arrives (probability `p_e`) and at most
//! one is spent (probability `q`, the chance the threshold test fires), so
//! the charge moves by at most one step. The arrival of interval `t` is only
//! usable from `t + 1`, and an empty battery cannot transmit.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{check_probability, invalid, Error, Result};

/// Battery capacity in energy packets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Capacity {
    Finite(u32),
    Infinite,
}

impl Capacity {
    pub fn finite(self) -> Option<u32> {
        match self {
            Capacity::Finite(k) => Some(k),
            Capacity::Infinite => None,
        }
    }
}

impl fmt::Display for Capacity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Capacity::Finite(k) => write!(f, "{k}"),
            Capacity::Infinite => f.write_str("inf"),
        }
    }
}

// JSON form: a positive integer, or the string "inf".
impl Serialize for Capacity {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Capacity::Finite(k) => serializer.serialize_u32(*k),
            Capacity::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Capacity {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct CapacityVisitor;

        impl Visitor<'_> for CapacityVisitor {
            type Value = Capacity;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a positive integer or \"inf\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Capacity, E> {
                match u32::try_from(v) {
                    Ok(k) if k >= 1 => Ok(Capacity::Finite(k)),
                    _ => Err(E::custom(format!("capacity {v} out of range [1, 2^32)"))),
                }
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Capacity, E> {
                if v < 1 {
                    return Err(E::custom(format!("capacity {v} must be >= 1")));
                }
                self.visit_u64(v as u64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Capacity, E> {
                if v.eq_ignore_ascii_case("inf") {
                    Ok(Capacity::Infinite)
                } else {
                    Err(E::custom(format!("unknown capacity \"{v}\"")))
                }
            }
        }

        deserializer.deserialize_any(CapacityVisitor)
    }
}

/// Parameters of one battery: capacity, arrival probability `p_e` and
/// intended-transmission probability `q = π0 q0 + π1 q1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryParams {
    pub capacity: Capacity,
    pub harvest_prob: f64,
    pub transmit_prob: f64,
}

/// Parameter combinations for which the chain is reducible and the closed
/// forms divide by zero; each has an explicit absorbing limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Degeneracy {
    /// `p_e = 0`: nothing ever arrives, the battery absorbs at 0.
    NoHarvest,
    /// `p_e = 1`: a packet arrives every interval, state 0 is transient.
    AlwaysHarvest,
    /// `q = 0`: the sensor never spends, the battery fills up.
    NoTransmission,
}

impl BatteryParams {
    pub fn new(capacity: Capacity, harvest_prob: f64, transmit_prob: f64) -> Result<Self> {
        let params = Self {
            capacity,
            harvest_prob,
            transmit_prob,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("harvest_prob", self.harvest_prob)?;
        check_probability("transmit_prob", self.transmit_prob)?;
        if self.capacity == Capacity::Finite(0) {
            return Err(invalid("capacity", "must be >= 1"));
        }
        Ok(())
    }

    pub fn degeneracy(&self) -> Option<Degeneracy> {
        if self.harvest_prob == 0.0 {
            Some(Degeneracy::NoHarvest)
        } else if self.harvest_prob == 1.0 {
            Some(Degeneracy::AlwaysHarvest)
        } else if self.transmit_prob == 0.0 {
            Some(Degeneracy::NoTransmission)
        } else {
            None
        }
    }

    /// Geometric ratio `Ω = p_e (1 - q) / (q (1 - p_e))` of the stationary law.
    pub fn omega(&self) -> f64 {
        let (pe, q) = (self.harvest_prob, self.transmit_prob);
        pe * (1.0 - q) / (q * (1.0 - pe))
    }

    /// Steady-state probability that the battery is empty.
    ///
    /// Finite capacity: `p0 = [1 + Σ_{k=1..K} Ω^k / (1 - q)]^-1`, with the sum
    /// rewritten as `c Σ_{j<K} Ω^j`, `c = p_e / (q (1 - p_e))`, so that `q = 1`
    /// needs no special case and large `K` is evaluated in log space.
    /// Infinite capacity: `0` if `p_e >= q`, else `1 - p_e / q`.
    pub fn depletion_probability(&self) -> f64 {
        match self.degeneracy() {
            Some(Degeneracy::NoHarvest) => return 1.0,
            Some(Degeneracy::AlwaysHarvest) | Some(Degeneracy::NoTransmission) => return 0.0,
            None => {}
        }
        let (pe, q) = (self.harvest_prob, self.transmit_prob);
        let k = match self.capacity {
            Capacity::Infinite => {
                return if pe >= q { 0.0 } else { 1.0 - pe / q };
            }
            Capacity::Finite(k) => f64::from(k),
        };
        let omega = self.omega();
        let ln_c = pe.ln() - q.ln() - (1.0 - pe).ln();
        let ln_geometric = if omega == 1.0 {
            k.ln()
        } else if omega < 1.0 {
            (-(k * omega.ln()).exp_m1() / (1.0 - omega)).ln()
        } else {
            let k_ln = k * omega.ln();
            k_ln + (-(-k_ln).exp_m1()).ln() - (omega - 1.0).ln()
        };
        logistic_complement(ln_c + ln_geometric)
    }

    /// The same depletion probability through `(p_e - q) / (p_e Ω^K - q)`.
    /// `None` where that form is 0/0 or undefined (`p_e = q`, infinite or
    /// degenerate parameters).
    pub fn depletion_probability_ratio_form(&self) -> Option<f64> {
        let k = self.capacity.finite()?;
        if self.degeneracy().is_some() || self.harvest_prob == self.transmit_prob {
            return None;
        }
        let (pe, q) = (self.harvest_prob, self.transmit_prob);
        Some((pe - q) / (pe * self.omega().powi(k as i32) - q))
    }

    /// Steady-state probability of holding `k` packets, `Ω^k p0 / (1 - q)`
    /// for `1 <= k <= K` (non-degenerate, finite capacity only).
    pub fn state_probability(&self, k: u32) -> Option<f64> {
        let cap = self.capacity.finite()?;
        if k > cap || self.degeneracy().is_some() {
            return None;
        }
        let p0 = self.depletion_probability();
        if k == 0 {
            return Some(p0);
        }
        let (pe, q) = (self.harvest_prob, self.transmit_prob);
        let c = pe / (q * (1.0 - pe));
        Some(c * self.omega().powi(k as i32 - 1) * p0)
    }
}

/// `1 / (1 + e^x)` without overflow.
fn logistic_complement(x: f64) -> f64 {
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Finite-capacity battery chain: tridiagonal transition law and its
/// stationary distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryChain {
    params: BatteryParams,
    up: Vec<f64>,
    stay: Vec<f64>,
    down: Vec<f64>,
    steady: Vec<f64>,
}

impl BatteryChain {
    pub fn new(params: BatteryParams) -> Result<Self> {
        params.validate()?;
        let k = params
            .capacity
            .finite()
            .ok_or(Error::InfiniteCapacity("the battery chain"))? as usize;
        let (pe, q) = (params.harvest_prob, params.transmit_prob);

        let mut up = vec![0.0; k + 1];
        let mut stay = vec![0.0; k + 1];
        let mut down = vec![0.0; k + 1];
        up[0] = pe;
        stay[0] = 1.0 - pe;
        for i in 1..k {
            up[i] = (1.0 - q) * pe;
            down[i] = q * (1.0 - pe);
            stay[i] = q * pe + (1.0 - q) * (1.0 - pe);
        }
        down[k] = q * (1.0 - pe);
        stay[k] = 1.0 - q * (1.0 - pe);

        let mut chain = Self {
            params,
            up,
            stay,
            down,
            steady: Vec::new(),
        };
        chain.steady = chain.solve_stationary()?;
        Ok(chain)
    }

    pub fn params(&self) -> &BatteryParams {
        &self.params
    }

    pub fn capacity(&self) -> usize {
        self.stay.len() - 1
    }

    /// `Pr(B_t = j | B_{t-1} = i)`.
    pub fn transition(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.stay[i]
        } else if j == i + 1 {
            self.up[i]
        } else if i == j + 1 {
            self.down[i]
        } else {
            0.0
        }
    }

    /// Dense `(K+1) x (K+1)` transition matrix. Meant for small `K`.
    pub fn transition_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.stay.len();
        (0..n)
            .map(|i| (0..n).map(|j| self.transition(i, j)).collect())
            .collect()
    }

    /// Stationary distribution `(p_0, ..., p_K)`.
    pub fn steady_state(&self) -> &[f64] {
        &self.steady
    }

    pub fn degeneracy(&self) -> Option<Degeneracy> {
        self.params.degeneracy()
    }

    fn solve_stationary(&self) -> Result<Vec<f64>> {
        let n = self.stay.len();
        let k = n - 1;
        let point = |state: usize| {
            let mut v = vec![0.0; n];
            v[state] = 1.0;
            v
        };
        match self.degeneracy() {
            Some(Degeneracy::NoHarvest) => return Ok(point(0)),
            Some(Degeneracy::AlwaysHarvest) if self.params.transmit_prob == 1.0 => {
                return Ok(point(1))
            }
            Some(Degeneracy::AlwaysHarvest) | Some(Degeneracy::NoTransmission) => {
                return Ok(point(k))
            }
            None => {}
        }

        // Balance equations (P^T - I) p = 0 with one of them replaced by
        // pinning the heaviest end state to 1, then normalized.
        let pinned = if self.params.omega() > 1.0 { k } else { 0 };
        let mut sub = vec![0.0; n - 1];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n - 1];
        let mut rhs = vec![0.0; n];
        for row in 0..n {
            if row == pinned {
                diag[row] = 1.0;
                rhs[row] = 1.0;
                continue;
            }
            diag[row] = -(self.up[row] + self.down[row]);
            if row > 0 {
                sub[row - 1] = self.up[row - 1];
            }
            if row < k {
                sup[row] = self.down[row + 1];
            }
        }
        let mut p = solve_tridiagonal(sub, diag, sup, rhs)?;
        let total: f64 = p.iter().sum();
        for v in &mut p {
            *v = (*v / total).max(0.0);
        }
        Ok(p)
    }
}

/// Solves a tridiagonal system by Gaussian elimination with partial
/// pivoting. `sub[i]` is entry `(i+1, i)`, `sup[i]` is entry `(i, i+1)`.
pub fn solve_tridiagonal(
    mut sub: Vec<f64>,
    mut diag: Vec<f64>,
    mut sup: Vec<f64>,
    mut rhs: Vec<f64>,
) -> Result<Vec<f64>> {
    let n = diag.len();
    assert!(sub.len() + 1 == n && sup.len() + 1 == n && rhs.len() == n);
    if n == 1 {
        return if diag[0] == 0.0 {
            Err(Error::Singular(0))
        } else {
            Ok(vec![rhs[0] / diag[0]])
        };
    }
    // After elimination `sub[i]` holds the fill-in on the second superdiagonal.
    for i in 0..n - 1 {
        if diag[i].abs() >= sub[i].abs() {
            if diag[i] == 0.0 {
                return Err(Error::Singular(i));
            }
            let fact = sub[i] / diag[i];
            diag[i + 1] -= fact * sup[i];
            rhs[i + 1] -= fact * rhs[i];
            sub[i] = 0.0;
        } else {
            let fact = diag[i] / sub[i];
            diag[i] = sub[i];
            let temp = diag[i + 1];
            diag[i + 1] = sup[i] - fact * temp;
            if i + 1 < n - 1 {
                sub[i] = sup[i + 1];
                sup[i + 1] = -fact * sub[i];
            } else {
                sub[i] = 0.0;
            }
            sup[i] = temp;
            rhs.swap(i, i + 1);
            rhs[i + 1] -= fact * rhs[i];
        }
    }
    if diag[n - 1] == 0.0 {
        return Err(Error::Singular(n - 1));
    }
    rhs[n - 1] /= diag[n - 1];
    rhs[n - 2] = (rhs[n - 2] - sup[n - 2] * rhs[n - 1]) / diag[n - 2];
    for i in (0..n.saturating_sub(2)).rev() {
        rhs[i] = (rhs[i] - sup[i] * rhs[i + 1] - sub[i] * rhs[i + 2]) / diag[i];
    }
    Ok(rhs)
}
