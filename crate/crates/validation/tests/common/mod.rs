#![allow(dead_code)]

use irs_relay::channel::{sample_channel_set, ArraySpec, Arrays, ChannelModel, ChannelSet, NodeGeometry, PathLossModel};
use irs_relay::experiments::default_scenario;
use irs_relay::irs::IrsModelParams;
use irs_relay::power::PowerBudget;

/// Small deployment for exhaustive comparisons. The surface is a linear
/// array so that two elements are allowed.
pub fn tiny_channels(seed: u64, ni: usize) -> ChannelSet {
    let model = ChannelModel {
        geometry: NodeGeometry {
            source: [0.0, 0.0, 3.0],
            relay: [10.0, -10.0, 3.0],
            destination: [20.0, 0.0, 1.5],
            irs: [10.0, 10.0, 3.0],
        },
        arrays: Arrays {
            source: ArraySpec::ula(4),
            relay: ArraySpec::ula(2),
            destination: ArraySpec::ula(2),
            irs: ArraySpec::ula(ni),
        },
        path_count: 2,
        path_loss: PathLossModel {
            k0_db: 0.0,
            reference_distance: 10.0,
            exponent: 5.76,
        },
    };
    sample_channel_set(&model, seed).unwrap()
}

pub fn irs_params(ni: usize, bits: u32) -> IrsModelParams {
    IrsModelParams::new(default_scenario().amplitude, ni, bits).unwrap()
}

pub fn default_budget() -> PowerBudget {
    default_scenario().budget()
}
