//! Threshold design by grid search.
//!
//! The adapted threshold maximizes the steady-state BD including battery
//! depletion; the unconstrained one maximizes the BD of a sensor that never
//! runs out of energy. Both objectives are evaluated through
//! [`SensorDesign`](crate::metrics::SensorDesign), so the optimizer only
//! decides where to look.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::battery::Capacity;
use crate::error::{invalid, Error, Result};
use crate::metrics::{unconstrained_bd, ChannelModel, ExtendedReal, SensorDesign};
use crate::observation::{ObservationModel, TailPair};

/// Uniform threshold grid `[min, max]` with `points` samples, followed by
/// `refinement_rounds` re-grids of ±1 step around the incumbent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub refinement_rounds: u32,
}

impl GridSpec {
    pub const DEFAULT_POINTS: usize = 4096;
    pub const DEFAULT_ROUNDS: u32 = 3;

    pub fn new(min: f64, max: f64, points: usize, refinement_rounds: u32) -> Result<Self> {
        let grid = Self {
            min,
            max,
            points,
            refinement_rounds,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// `[0, max(12, s + 6 σ1)]` for the Rician model, the table's own range
    /// otherwise; 4096 points, 3 refinement rounds.
    pub fn default_for(model: &ObservationModel) -> Self {
        Self {
            min: model.default_threshold_min(),
            max: model.default_threshold_max(),
            points: Self::DEFAULT_POINTS,
            refinement_rounds: Self::DEFAULT_ROUNDS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(invalid("grid", "bounds must be finite"));
        }
        if self.min > self.max {
            return Err(invalid(
                "grid",
                format!("min {} > max {}", self.min, self.max),
            ));
        }
        if self.points < 2 {
            return Err(invalid("grid", "at least 2 points required"));
        }
        Ok(())
    }

    fn step(&self) -> f64 {
        (self.max - self.min) / (self.points - 1) as f64
    }

    fn samples(&self) -> Vec<f64> {
        let step = self.step();
        (0..self.points)
            .map(|i| {
                if i + 1 == self.points {
                    self.max
                } else {
                    self.min + step * i as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub bd: ExtendedReal,
}

/// Outcome of a threshold search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub threshold: f64,
    pub bd: ExtendedReal,
    pub tails: TailPair,
    /// Depletion probability at the chosen threshold; zero for the
    /// unconstrained objective, which assumes energy is always there.
    pub depletion: f64,
    /// Every evaluated `(τ, BD)` sample, sorted by threshold.
    pub curve: Vec<CurvePoint>,
    /// Incumbent BD after the coarse pass and after each refinement round.
    pub incumbents: Vec<ExtendedReal>,
}

/// Adapted threshold: maximizes the depletion-aware BD.
pub fn optimize_constrained(
    model: &ObservationModel,
    capacity: Capacity,
    harvest_prob: f64,
    prior: f64,
    channel: &ChannelModel,
    grid: &GridSpec,
) -> Result<DesignResult> {
    let base = SensorDesign {
        model: model.clone(),
        threshold: grid.min,
        capacity,
        harvest_prob,
        channel: *channel,
    };
    base.validate()?;
    let search = grid_search(model, grid, |tau| {
        base.with_threshold(tau).constrained_bd(prior)
    })?;
    let eval = base.with_threshold(search.threshold).evaluate(prior)?;
    Ok(DesignResult {
        threshold: search.threshold,
        bd: search.bd,
        tails: eval.tails,
        depletion: eval.depletion,
        curve: search.curve,
        incumbents: search.incumbents,
    })
}

/// Unconstrained threshold: maximizes the BD of an always-powered sensor.
pub fn optimize_unconstrained(
    model: &ObservationModel,
    channel: &ChannelModel,
    grid: &GridSpec,
) -> Result<DesignResult> {
    model.validate()?;
    channel.validate()?;
    let search = grid_search(model, grid, |tau| {
        Ok(unconstrained_bd(model.tail_probabilities(tau)?, channel))
    })?;
    Ok(DesignResult {
        threshold: search.threshold,
        bd: search.bd,
        tails: model.tail_probabilities(search.threshold)?,
        depletion: 0.0,
        curve: search.curve,
        incumbents: search.incumbents,
    })
}

struct Search {
    threshold: f64,
    bd: ExtendedReal,
    curve: Vec<CurvePoint>,
    incumbents: Vec<ExtendedReal>,
}

fn grid_search<F>(model: &ObservationModel, grid: &GridSpec, objective: F) -> Result<Search>
where
    F: Fn(f64) -> Result<ExtendedReal> + Sync,
{
    grid.validate()?;
    let evaluate = |taus: Vec<f64>| -> Result<Vec<CurvePoint>> {
        taus.into_par_iter()
            .map(|threshold| {
                Ok(CurvePoint {
                    threshold,
                    bd: objective(threshold)?,
                })
            })
            .collect()
    };

    // A tabulated objective is piecewise constant; its breakpoints are the
    // only distinct candidates.
    let (first, refinable) = match model {
        ObservationModel::Table { entries } => {
            let taus: Vec<f64> = entries
                .iter()
                .map(|e| e.threshold)
                .filter(|t| (grid.min..=grid.max).contains(t))
                .collect();
            if taus.is_empty() {
                return Err(invalid("grid", "no table threshold inside the grid range"));
            }
            (taus, false)
        }
        ObservationModel::RayleighRician { .. } => (grid.samples(), true),
    };

    let mut curve = evaluate(first)?;
    let mut best = *curve.first().expect("grid is never empty");
    for p in &curve {
        if improves(p, &best) {
            best = *p;
        }
    }
    let mut incumbents = vec![best.bd];

    if refinable {
        let mut step = grid.step();
        for _ in 0..grid.refinement_rounds {
            let local = GridSpec {
                min: (best.threshold - step).max(grid.min),
                max: (best.threshold + step).min(grid.max),
                points: grid.points,
                refinement_rounds: 0,
            };
            let round = evaluate(local.samples())?;
            for p in &round {
                if improves(p, &best) {
                    best = *p;
                }
            }
            incumbents.push(best.bd);
            curve.extend(round);
            step = local.step();
        }
    }

    if curve.iter().all(|p| p.bd == ExtendedReal::ZERO) {
        return Err(Error::DegenerateObjective);
    }
    curve.sort_by(|a, b| a.threshold.total_cmp(&b.threshold));
    curve.dedup_by(|a, b| a.threshold == b.threshold);
    Ok(Search {
        threshold: best.threshold,
        bd: best.bd,
        curve,
        incumbents,
    })
}

/// Strictly better, or equal with a larger threshold.
fn improves(candidate: &CurvePoint, incumbent: &CurvePoint) -> bool {
    candidate.bd > incumbent.bd
        || (candidate.bd == incumbent.bd && candidate.threshold > incumbent.threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::bd_upper_bound;
    use crate::observation::TableEntry;

    fn noisy() -> ChannelModel {
        ChannelModel::new(0.1, 0.2).unwrap()
    }

    fn separable_table() -> ObservationModel {
        ObservationModel::table(vec![
            TableEntry {
                threshold: 0.0,
                q0: 1.0,
                q1: 1.0,
            },
            TableEntry {
                threshold: 1.0,
                q0: 0.4,
                q1: 1.0,
            },
            TableEntry {
                threshold: 2.0,
                q0: 0.0,
                q1: 1.0,
            },
            TableEntry {
                threshold: 3.0,
                q0: 0.0,
                q1: 0.5,
            },
        ])
        .unwrap()
    }

    #[test]
    fn separable_table_reaches_the_bound() {
        let model = separable_table();
        let grid = GridSpec::default_for(&model);
        for cap in [Capacity::Finite(1), Capacity::Finite(3), Capacity::Infinite] {
            let r = optimize_constrained(&model, cap, 0.15, 0.2, &noisy(), &grid).unwrap();
            assert_eq!(r.threshold, 2.0);
            let bound = bd_upper_bound(cap, 0.15, 0.2, &noisy()).unwrap();
            assert!((r.bd.value() - bound.value()).abs() < 1e-14);
        }
    }

    #[test]
    fn separable_noiseless_unconstrained_is_unbounded() {
        let model = separable_table();
        let r = optimize_unconstrained(
            &model,
            &ChannelModel::NOISELESS,
            &GridSpec::default_for(&model),
        )
        .unwrap();
        assert_eq!(r.bd, ExtendedReal::Infinite);
        assert_eq!(r.threshold, 2.0);
    }

    #[test]
    fn uninformative_models_are_degenerate() {
        let flat = ObservationModel::table(vec![
            TableEntry {
                threshold: 0.0,
                q0: 0.9,
                q1: 0.9,
            },
            TableEntry {
                threshold: 1.0,
                q0: 0.3,
                q1: 0.3,
            },
        ])
        .unwrap();
        let grid = GridSpec::default_for(&flat);
        let err = optimize_constrained(&flat, Capacity::Finite(1), 0.15, 0.2, &noisy(), &grid);
        assert_eq!(err.unwrap_err(), Error::DegenerateObjective);

        let s0 = ObservationModel::rician(0.0).unwrap();
        let grid = GridSpec::new(0.0, 12.0, 512, 1).unwrap();
        let err = optimize_unconstrained(&s0, &noisy(), &grid);
        assert_eq!(err.unwrap_err(), Error::DegenerateObjective);
    }

    fn exhaustive_best<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> f64 {
        (0..n)
            .map(|i| f(lo + (hi - lo) * i as f64 / (n - 1) as f64))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn refined_search_beats_a_ten_times_finer_grid() {
        let model = ObservationModel::rician(5.0).unwrap();
        let grid = GridSpec::new(0.0, 12.0, 4096, 3).unwrap();
        let cap = Capacity::Finite(1);
        let r = optimize_constrained(&model, cap, 0.15, 0.2, &noisy(), &grid).unwrap();
        let sensor = SensorDesign {
            model: model.clone(),
            threshold: 0.0,
            capacity: cap,
            harvest_prob: 0.15,
            channel: noisy(),
        };
        let fine = exhaustive_best(
            |t| {
                sensor
                    .with_threshold(t)
                    .constrained_bd(0.2)
                    .unwrap()
                    .value()
            },
            0.0,
            12.0,
            40_960,
        );
        assert!(fine - r.bd.value() < 1e-8, "{} vs {fine}", r.bd.value());

        let u = optimize_unconstrained(&model, &noisy(), &grid).unwrap();
        let fine_u = exhaustive_best(
            |t| sensor.with_threshold(t).unconstrained_bd().unwrap().value(),
            0.0,
            12.0,
            40_960,
        );
        assert!(fine_u - u.bd.value() < 1e-8);
        // adapted threshold is more conservative
        assert!(r.threshold >= u.threshold);
    }

    #[test]
    fn incumbents_never_decrease_and_curve_holds_the_max() {
        let model = ObservationModel::rician(3.0).unwrap();
        let grid = GridSpec::new(0.0, 12.0, 64, 4).unwrap();
        let r =
            optimize_constrained(&model, Capacity::Finite(2), 0.15, 0.2, &noisy(), &grid).unwrap();
        assert_eq!(r.incumbents.len(), 5);
        for w in r.incumbents.windows(2) {
            assert!(w[1] >= w[0]);
        }
        let max = r
            .curve
            .iter()
            .map(|p| p.bd)
            .fold(ExtendedReal::ZERO, ExtendedReal::max);
        assert_eq!(max, r.bd);
        assert!(r.curve.windows(2).all(|w| w[0].threshold < w[1].threshold));
        let tails = model.tail_probabilities(r.threshold).unwrap();
        assert_eq!(tails, r.tails);
    }

    #[test]
    fn ties_go_to_the_larger_threshold() {
        // Three breakpoints with identical objective.
        let model = ObservationModel::table(vec![
            TableEntry {
                threshold: 1.0,
                q0: 0.0,
                q1: 1.0,
            },
            TableEntry {
                threshold: 2.0,
                q0: 0.0,
                q1: 1.0,
            },
            TableEntry {
                threshold: 3.0,
                q0: 0.0,
                q1: 1.0,
            },
        ])
        .unwrap();
        let r = optimize_unconstrained(&model, &noisy(), &GridSpec::default_for(&model)).unwrap();
        assert_eq!(r.threshold, 3.0);
    }

    #[test]
    fn bad_grids() {
        assert!(GridSpec::new(1.0, 0.0, 10, 0).is_err());
        assert!(GridSpec::new(0.0, 1.0, 1, 0).is_err());
        assert!(GridSpec::new(0.0, f64::INFINITY, 10, 0).is_err());
        let model = ObservationModel::rician(2.0).unwrap();
        let grid = GridSpec {
            min: -1.0,
            max: 2.0,
            points: 8,
            refinement_rounds: 0,
        };
        assert!(optimize_unconstrained(&model, &noisy(), &grid).is_err());
    }
}
