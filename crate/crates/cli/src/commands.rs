use ehsense_core::sim::{self, SimConfig, SimReport};
use ehsense_core::{
    optimize_constrained, optimize_unconstrained, BatteryParams, Capacity, Error, ExtendedReal,
    GridSpec, NetworkScenario, ObservationModel, SensorDesign, MAX_ENUMERATED_SENSORS,
    MAX_JOINT_STATES,
};
use rayon::prelude::*;
use serde_json::json;

use crate::output::{Cell, Table};
use crate::scenario::{sweep_values, Entry, Scenario, SweepVariable};
use crate::CliError;

/// Grid overrides from the command line.
#[derive(Debug, Clone, Copy, Default)]
pub struct GridOptions {
    pub points: Option<usize>,
    pub max: Option<f64>,
    pub refine: Option<u32>,
}

impl GridOptions {
    fn grid_for(&self, model: &ObservationModel) -> Result<GridSpec, CliError> {
        let mut grid = GridSpec::default_for(model);
        if let Some(p) = self.points {
            grid.points = p;
        }
        if let Some(m) = self.max {
            grid.max = m;
        }
        if let Some(r) = self.refine {
            grid.refinement_rounds = r;
        }
        grid.validate()
            .map_err(|e| CliError::Input(format!("grid: {e}")))?;
        Ok(grid)
    }
}

/// Adapted and unconstrained thresholds of one entry.
#[derive(Debug, Clone, Copy)]
struct Thresholds {
    adapted: f64,
    unconstrained: f64,
}

fn optimize(entry: &Entry, prior: f64, grid: &GridOptions) -> Result<Thresholds, CliError> {
    if let Some(t) = entry.threshold {
        return Ok(Thresholds {
            adapted: t,
            unconstrained: t,
        });
    }
    let g = grid.grid_for(&entry.model)?;
    let adapted = optimize_constrained(
        &entry.model,
        entry.capacity,
        entry.harvest_prob,
        prior,
        &entry.channel,
        &g,
    )
    .map_err(CliError::from)?
    .threshold;
    let unconstrained = optimize_unconstrained(&entry.model, &entry.channel, &g)
        .map_err(CliError::from)?
        .threshold;
    Ok(Thresholds {
        adapted,
        unconstrained,
    })
}

/// Like [`optimize`], but an uninformative sensor (BD zero at every
/// threshold) falls back to the top of the grid instead of failing.
fn optimize_or_fallback(
    entry: &Entry,
    prior: f64,
    grid: &GridOptions,
) -> Result<Thresholds, CliError> {
    match optimize(entry, prior, grid) {
        Err(CliError::Degenerate(_)) => {
            let top = grid.grid_for(&entry.model)?.max;
            Ok(Thresholds {
                adapted: top,
                unconstrained: top,
            })
        }
        other => other,
    }
}

fn expand(entries: &[Entry], thresholds: impl Fn(usize) -> f64) -> Vec<SensorDesign> {
    entries
        .iter()
        .enumerate()
        .flat_map(|(i, e)| std::iter::repeat(e.design(thresholds(i))).take(e.count))
        .collect()
}

fn check_enumerable(scenario: &Scenario) -> Result<(), CliError> {
    if scenario.sensor_count() > MAX_ENUMERATED_SENSORS {
        return Err(CliError::Input(format!(
            "sensors: {} sensors, error probabilities are enumerated for at most {MAX_ENUMERATED_SENSORS}",
            scenario.sensor_count()
        )));
    }
    Ok(())
}

fn at(i: usize) -> impl Fn(Error) -> CliError {
    move |e| match CliError::from(e) {
        CliError::Input(m) => CliError::Input(format!("sensors[{i}]: {m}")),
        CliError::Degenerate(m) => CliError::Degenerate(format!("sensors[{i}]: {m}")),
        other => other,
    }
}

pub const DESIGN_HEADER: [&str; 11] = [
    "sensor",
    "capacity",
    "harvest_prob",
    "tau_adapted",
    "bd_adapted",
    "p0_adapted",
    "tau_unconstrained",
    "bd_unconstrained",
    "p0_unconstrained",
    "bd_unconstrained_powered",
    "bd_bound",
];

/// Per-sensor adapted and unconstrained designs. `bd_unconstrained` is the
/// delivered BD at the unconstrained threshold (depletion included);
/// `bd_unconstrained_powered` is what that threshold would give with a
/// battery that never runs out.
pub fn design(scenario: &Scenario, grid: &GridOptions) -> Result<Table, CliError> {
    let prior = scenario.prior;
    let rows = scenario
        .entries
        .par_iter()
        .enumerate()
        .map(|(i, entry)| {
            let t = optimize(entry, prior, grid).map_err(|e| match e {
                CliError::Degenerate(m) => CliError::Degenerate(format!("sensors[{i}]: {m}")),
                other => other,
            })?;
            let a = entry.design(t.adapted).evaluate(prior).map_err(at(i))?;
            let u_design = entry.design(t.unconstrained);
            let u = u_design.evaluate(prior).map_err(at(i))?;
            let powered = u_design.unconstrained_bd().map_err(at(i))?;
            let bound = u_design.bd_upper_bound(prior).map_err(at(i))?;
            Ok(vec![
                Cell::Capacity(entry.capacity),
                Cell::Float(entry.harvest_prob),
                Cell::Float(t.adapted),
                Cell::Extended(a.bd),
                Cell::Float(a.depletion),
                Cell::Float(t.unconstrained),
                Cell::Extended(u.bd),
                Cell::Float(u.depletion),
                Cell::Extended(powered),
                Cell::Extended(bound),
            ])
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut table = Table::new(DESIGN_HEADER.to_vec());
    let mut index = 0u64;
    for (entry, row) in scenario.entries.iter().zip(rows) {
        for _ in 0..entry.count {
            let mut full = vec![Cell::Int(index)];
            full.extend(row.iter().cloned());
            table.push(full);
            index += 1;
        }
    }
    Ok(table)
}

pub const SWEEP_HEADER: [&str; 7] = [
    "value",
    "bd_adapted",
    "bd_unconstrained",
    "bd_bound",
    "pe_adapted",
    "pe_unconstrained",
    "kailath_bound",
];

fn apply(entry: &Entry, variable: SweepVariable, v: f64) -> Result<Entry, CliError> {
    let mut e = entry.clone();
    match variable {
        SweepVariable::Snr => {
            if let ObservationModel::RayleighRician { sigma0, sigma1, .. } = e.model {
                e.model =
                    ObservationModel::rayleigh_rician(v, sigma0, sigma1).map_err(CliError::from)?;
            }
        }
        SweepVariable::Capacity => e.capacity = Capacity::Finite(v as u32),
        SweepVariable::Harvest => e.harvest_prob = v,
        SweepVariable::Threshold => e.threshold = Some(v),
    }
    Ok(e)
}

/// One row per sweep value, network totals across all sensors.
///
/// For `s`, `K` and `p_e` sweeps every sensor without a fixed threshold is
/// re-optimized at each point. For a `tau` sweep every threshold is set to
/// the sweep value, and the `unconstrained` columns describe the same
/// network with batteries that never run out.
pub fn sweep(scenario: &Scenario, grid: &GridOptions) -> Result<Table, CliError> {
    let spec = scenario
        .sweep
        .ok_or_else(|| CliError::Input("sweep: block required for the sweep command".into()))?;
    check_enumerable(scenario)?;
    let prior = scenario.prior;
    let rows = sweep_values(&spec)
        .into_par_iter()
        .map(|v| {
            let entries = scenario
                .entries
                .iter()
                .map(|e| apply(e, spec.variable, v))
                .collect::<Result<Vec<_>, _>>()?;
            let thresholds = entries
                .iter()
                .map(|e| optimize_or_fallback(e, prior, grid))
                .collect::<Result<Vec<_>, _>>()?;
            let adapted = NetworkScenario::new(prior, expand(&entries, |i| thresholds[i].adapted))?;
            let unconstrained = if spec.variable == SweepVariable::Threshold {
                let powered: Vec<Entry> = entries
                    .iter()
                    .map(|e| Entry {
                        capacity: Capacity::Infinite,
                        harvest_prob: 1.0,
                        ..e.clone()
                    })
                    .collect();
                NetworkScenario::new(prior, expand(&powered, |i| thresholds[i].unconstrained))?
            } else {
                NetworkScenario::new(prior, expand(&entries, |i| thresholds[i].unconstrained))?
            };
            let bound: ExtendedReal = adapted
                .sensors
                .iter()
                .map(|s| s.bd_upper_bound(prior))
                .sum::<Result<ExtendedReal, Error>>()?;
            Ok(vec![
                Cell::Float(v),
                Cell::Extended(adapted.total_bd()?),
                Cell::Extended(unconstrained.total_bd()?),
                Cell::Extended(bound),
                Cell::Float(adapted.map_error_probability()?),
                Cell::Float(unconstrained.map_error_probability()?),
                Cell::Float(adapted.kailath_bound()?),
            ])
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut table = Table::new(SWEEP_HEADER.to_vec());
    rows.into_iter().for_each(|r| table.push(r));
    Ok(table)
}

pub const BOUND_HEADER: [&str; 7] = [
    "sensor",
    "capacity",
    "harvest_prob",
    "eps0",
    "eps1",
    "p0_bar",
    "bd_bound",
];

/// Capacity-limited BD ceiling of every sensor; `p0_bar` is the depletion
/// probability at the largest possible transmission rate `q = π1`.
pub fn bound(scenario: &Scenario) -> Result<Table, CliError> {
    let prior = scenario.prior;
    let mut table = Table::new(BOUND_HEADER.to_vec());
    let mut index = 0u64;
    for (i, e) in scenario.entries.iter().enumerate() {
        let p0_bar = BatteryParams::new(e.capacity, e.harvest_prob, prior)
            .map_err(at(i))?
            .depletion_probability();
        let b = ehsense_core::bd_upper_bound(e.capacity, e.harvest_prob, prior, &e.channel)
            .map_err(at(i))?;
        for _ in 0..e.count {
            table.push(vec![
                Cell::Int(index),
                Cell::Capacity(e.capacity),
                Cell::Float(e.harvest_prob),
                Cell::Float(e.channel.eps0),
                Cell::Float(e.channel.eps1),
                Cell::Float(p0_bar),
                Cell::Extended(b),
            ]);
            index += 1;
        }
    }
    Ok(table)
}

pub const COMPARISON_HEADER: [&str; 8] = [
    "quantity",
    "sensor",
    "analytic",
    "empirical",
    "std_error",
    "z",
    "within_3_sigma",
    "error_bar",
];

pub struct Simulation {
    pub report: SimReport,
    pub comparison: Table,
}

impl Simulation {
    pub fn to_json(&self) -> serde_json::Value {
        json!({ "report": self.report, "comparison": self.comparison.to_json_value() })
    }
}

fn compare(
    table: &mut Table,
    quantity: &str,
    sensor: Option<usize>,
    analytic: f64,
    empirical: f64,
    se: f64,
    bar: &str,
) {
    let z = if se > 0.0 {
        (empirical - analytic) / se
    } else if (empirical - analytic).abs() < 1e-12 {
        0.0
    } else {
        f64::INFINITY
    };
    table.push(vec![
        Cell::Text(quantity.into()),
        Cell::Text(sensor.map_or(String::new(), |s| s.to_string())),
        Cell::Float(analytic),
        Cell::Float(empirical),
        Cell::Float(se),
        Cell::Float(z),
        Cell::Flag(z.abs() <= 3.0),
        Cell::Text(bar.into()),
    ]);
}

fn binomial_se(p: f64, n: u64) -> f64 {
    if n == 0 {
        f64::NAN
    } else {
        (p * (1.0 - p) / n as f64).sqrt()
    }
}

/// Runs the simulator on the designed network and compares its statistics
/// with the analytic values. Sensors without a fixed threshold use their
/// adapted threshold. The error rate is compared with both the product-form
/// MAP error and, when the joint battery state space is small enough, the
/// exact error of the jointly evolving batteries.
pub fn simulate(
    scenario: &Scenario,
    grid: &GridOptions,
    seed: Option<u64>,
) -> Result<Simulation, CliError> {
    let spec = scenario
        .sim
        .ok_or_else(|| CliError::Input("sim: block required for the simulate command".into()))?;
    if scenario
        .entries
        .iter()
        .any(|e| e.capacity == Capacity::Infinite)
    {
        return Err(CliError::Input(
            Error::InfiniteCapacity("simulation").to_string(),
        ));
    }
    check_enumerable(scenario)?;
    let prior = scenario.prior;
    let thresholds = scenario
        .entries
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            optimize(e, prior, grid).map_err(|err| match err {
                CliError::Degenerate(m) => CliError::Degenerate(format!("sensors[{i}]: {m}")),
                other => other,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let network =
        NetworkScenario::new(prior, expand(&scenario.entries, |i| thresholds[i].adapted))?;
    let mut config = SimConfig::new(network.clone(), spec.steps, seed.unwrap_or(spec.seed));
    if let Some(b) = spec.burn_in {
        config.burn_in = b;
    }
    config.initial_battery = spec.initial_battery;
    let report = sim::run(&config)?;

    let mut table = Table::new(COMPARISON_HEADER.to_vec());
    for (n, (stats, eval)) in report
        .sensors
        .iter()
        .zip(network.evaluations()?)
        .enumerate()
    {
        compare(
            &mut table,
            "p0",
            Some(n),
            eval.depletion,
            stats.depletion_frequency,
            stats.depletion_batch_se.unwrap_or(f64::NAN),
            "batch_means",
        );
        for (h, analytic) in [eval.output.given_h0, eval.output.given_h1]
            .into_iter()
            .enumerate()
        {
            let quantity = if h == 0 {
                "pr_y1_given_h0"
            } else {
                "pr_y1_given_h1"
            };
            compare(
                &mut table,
                quantity,
                Some(n),
                analytic,
                stats.y1_given_h[h].unwrap_or(f64::NAN),
                binomial_se(analytic, report.hypothesis_counts[h]),
                "binomial",
            );
        }
    }
    let fc_se = report.fc_error_batch_se.unwrap_or(f64::NAN);
    compare(
        &mut table,
        "fc_error_product_form",
        None,
        network.map_error_probability()?,
        report.fc_error_rate,
        fc_se,
        "batch_means",
    );
    let joint_states: Option<usize> = network.sensors.iter().try_fold(1usize, |acc, s| {
        acc.checked_mul(s.capacity.finite()? as usize + 1)
    });
    if joint_states.is_some_and(|n| n <= MAX_JOINT_STATES) {
        compare(
            &mut table,
            "fc_error_joint_battery",
            None,
            network.joint_battery_error_probability()?,
            report.fc_error_rate,
            fc_se,
            "batch_means",
        );
    }
    Ok(Simulation {
        report,
        comparison: table,
    })
}

/// Human-readable version of the comparison table.
pub fn summary(table: &Table) -> String {
    let mut out = format!(
        "{:<24} {:>6} {:>12} {:>12} {:>10} {:>7}  result\n",
        "quantity", "sensor", "analytic", "empirical", "std_err", "z"
    );
    for row in &table.rows {
        let text = |c: &Cell| match c {
            Cell::Text(s) => s.clone(),
            _ => String::new(),
        };
        let num = |c: &Cell| match c {
            Cell::Float(v) => *v,
            _ => f64::NAN,
        };
        let pass = matches!(row[6], Cell::Flag(true));
        out.push_str(&format!(
            "{:<24} {:>6} {:>12.6} {:>12.6} {:>10.2e} {:>7.2}  {}\n",
            text(&row[0]),
            text(&row[1]),
            num(&row[2]),
            num(&row[3]),
            num(&row[4]),
            num(&row[5]),
            if pass { "PASS" } else { "FAIL" }
        ));
    }
    out
}
