//! Fixtures shared by the benchmarks.

use ehsense_core::{
    optimize_constrained, Capacity, ChannelModel, GridSpec, NetworkScenario, ObservationModel,
    SensorDesign,
};

pub const PRIOR: f64 = 0.2;
pub const HARVEST: f64 = 0.15;

pub fn noisy() -> ChannelModel {
    ChannelModel::new(0.1, 0.2).expect("valid channel")
}

/// One Rician sensor with its adapted threshold.
pub fn sensor(s: f64, capacity: u32) -> SensorDesign {
    let model = ObservationModel::rician(s).expect("valid model");
    let grid = GridSpec::default_for(&model);
    let capacity = Capacity::Finite(capacity);
    let threshold = optimize_constrained(&model, capacity, HARVEST, PRIOR, &noisy(), &grid)
        .expect("informative model")
        .threshold;
    SensorDesign {
        model,
        threshold,
        capacity,
        harvest_prob: HARVEST,
        channel: noisy(),
    }
}

/// `n` identical sensors at `s = 5`.
pub fn network(n: usize, capacity: u32) -> NetworkScenario {
    NetworkScenario::new(PRIOR, vec![sensor(5.0, capacity); n]).expect("valid scenario")
}
