//! Helpers shared by the integration suites.
#![allow(dead_code)]

use ehsense_core::{
    optimize_constrained, Capacity, ChannelModel, GridSpec, Hypothesis, NetworkScenario,
    ObservationModel, SensorDesign,
};

pub const PRIOR: f64 = 0.2;
pub const HARVEST: f64 = 0.15;

pub fn noisy() -> ChannelModel {
    ChannelModel::new(0.1, 0.2).unwrap()
}

pub fn designed_sensor(
    s: f64,
    capacity: Capacity,
    harvest: f64,
    prior: f64,
    ch: ChannelModel,
) -> SensorDesign {
    let model = ObservationModel::rician(s).unwrap();
    let grid = GridSpec::default_for(&model);
    let r = optimize_constrained(&model, capacity, harvest, prior, &ch, &grid).unwrap();
    SensorDesign {
        model,
        threshold: r.threshold,
        capacity,
        harvest_prob: harvest,
        channel: ch,
    }
}

/// Steady-state MAP error of the *joint* battery process.
///
/// All sensors see the same hypothesis each interval, so their batteries are
/// correlated; this evaluates the exact long-run FC error of the simulated
/// dynamics (MAP table from the product-form analysis) on the
/// `(K+1)^N`-state joint chain by power iteration. Small networks only.
pub fn joint_chain_error(scenario: &NetworkScenario) -> f64 {
    let rule = scenario.map_rule().unwrap();
    let n = scenario.sensors.len();
    let caps: Vec<usize> = scenario
        .sensors
        .iter()
        .map(|s| s.capacity.finite().unwrap() as usize)
        .collect();
    let tails: Vec<[f64; 2]> = scenario
        .sensors
        .iter()
        .map(|s| {
            let t = s.model.tail_probabilities(s.threshold).unwrap();
            [t.q0, t.q1]
        })
        .collect();
    let states: usize = caps.iter().map(|k| k + 1).product();
    let decode = |mut idx: usize| -> Vec<usize> {
        caps.iter()
            .map(|k| {
                let b = idx % (k + 1);
                idx /= k + 1;
                b
            })
            .collect()
    };
    let encode = |b: &[usize]| -> usize {
        b.iter()
            .zip(&caps)
            .rev()
            .fold(0, |acc, (bi, k)| acc * (k + 1) + bi)
    };

    let priors = [1.0 - scenario.prior, scenario.prior];
    let mut transitions: Vec<Vec<(usize, f64)>> = vec![Vec::new(); states];
    let mut error_at = vec![0.0; states];
    for idx in 0..states {
        let b = decode(idx);
        for h in 0..2 {
            let send: Vec<f64> = (0..n)
                .map(|i| if b[i] > 0 { tails[i][h] } else { 0.0 })
                .collect();
            // error: sum over outcome vectors of the FC
            for (y, decision) in rule.iter().enumerate() {
                let mut p = priors[h];
                for (i, s) in scenario.sensors.iter().enumerate() {
                    let one = send[i] * (1.0 - s.channel.eps1) + (1.0 - send[i]) * s.channel.eps0;
                    p *= if (y >> i) & 1 == 1 { one } else { 1.0 - one };
                }
                if decision.index() != h {
                    error_at[idx] += p;
                }
            }
            // next battery: independent across sensors given h
            let mut dist: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), priors[h])];
            for (i, s) in scenario.sensors.iter().enumerate() {
                let pe = s.harvest_prob;
                let mut moves = Vec::new();
                for (w, pw) in [(0usize, 1.0 - send[i]), (1, send[i])] {
                    for (e, pa) in [(0usize, 1.0 - pe), (1, pe)] {
                        let p = pw * pa;
                        if p > 0.0 {
                            moves.push(((b[i] - w + e).min(caps[i]), p));
                        }
                    }
                }
                dist = dist
                    .into_iter()
                    .flat_map(|(prefix, p)| {
                        moves.iter().map(move |(nb, pm)| {
                            let mut v = prefix.clone();
                            v.push(*nb);
                            (v, p * pm)
                        })
                    })
                    .collect();
            }
            for (next, p) in dist {
                transitions[idx].push((encode(&next), p));
            }
        }
    }

    let mut pi = vec![1.0 / states as f64; states];
    for _ in 0..100_000 {
        let mut next = vec![0.0; states];
        for (i, row) in transitions.iter().enumerate() {
            for &(j, p) in row {
                next[j] += pi[i] * p;
            }
        }
        let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if diff < 1e-15 {
            break;
        }
    }
    pi.iter().zip(&error_at).map(|(p, e)| p * e).sum()
}

/// Hypothesis index helper for report arrays.
pub fn idx(h: Hypothesis) -> usize {
    h.index()
}
