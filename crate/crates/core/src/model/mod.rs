//! Network configurations, weight files, reference architectures and the
//! analytic cost model.

pub mod config;
pub mod cost;
pub mod network;
pub mod reference;
pub mod weights;

pub use config::{
    parse_config, parse_config_with_warnings, Activation, ConvSpec, LayerSpec, NetInput,
    NetworkConfig, PoolSpec, RegionSpec,
};
pub use cost::{count_ops, LayerCost, OpsReport};
pub use network::{forward, Model};
pub use reference::{reference_configs, toy_config, ReferenceModel, TOY_CONFIG};
pub use weights::{load_weights, read_header, save_weights, WeightsHeader};
