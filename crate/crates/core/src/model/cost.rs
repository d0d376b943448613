//! Analytic multiply-accumulate and parameter counts.

use serde::Serialize;

use crate::model::config::{LayerSpec, NetworkConfig};
use crate::tensor::Shape;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LayerCost {
    pub index: usize,
    pub kind: &'static str,
    pub output_shape: Shape,
    pub macs: u64,
    pub parameters: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OpsReport {
    pub layers: Vec<LayerCost>,
    pub total_macs: u64,
    pub total_parameters: u64,
}

/// Convolutions cost `K·K·Cin·Cout·H'·W'` MACs and hold `Cout·(Cin·K·K + 1)`
/// parameters, plus `3·Cout` batch-norm statistics. Pools are free.
pub fn count_ops(config: &NetworkConfig) -> OpsReport {
    let mut layers = Vec::new();
    for (index, (layer, input)) in config.layer_inputs().skip(1).enumerate() {
        let output_shape = config.shapes()[index + 1];
        let (kind, macs, parameters) = match layer {
            LayerSpec::Convolutional(c) => {
                let (k, cin, cout) = (c.size as u64, input.channels as u64, c.filters as u64);
                let macs = k * k * cin * cout * output_shape.plane() as u64;
                let bn = if c.batch_normalize { 3 * cout } else { 0 };
                ("convolutional", macs, cout * (cin * k * k + 1) + bn)
            }
            LayerSpec::MaxPool(_) => ("maxpool", 0, 0),
            LayerSpec::Region(_) => ("region", 0, 0),
            LayerSpec::Net(_) => continue,
        };
        layers.push(LayerCost {
            index,
            kind,
            output_shape,
            macs,
            parameters,
        });
    }
    OpsReport {
        total_macs: layers.iter().map(|l| l.macs).sum(),
        total_parameters: layers.iter().map(|l| l.parameters).sum(),
        layers,
    }
}
