use rand::Rng;

use crate::error::{Error, Result};
use crate::model::config::{Activation, LayerSpec, NetworkConfig};
use crate::ops::{conv2d, fold_batch_norm, maxpool2d, BatchNorm, ConvKernel, DEFAULT_LEAKY_SLOPE};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// A network configuration with one kernel per convolutional layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<S: Scalar> {
    config: NetworkConfig,
    kernels: Vec<ConvKernel<S>>,
}

impl<S: Scalar> Model<S> {
    pub fn new(config: NetworkConfig, kernels: Vec<ConvKernel<S>>) -> Result<Self> {
        let mut it = kernels.iter();
        for ((layer, input), index) in config.layer_inputs().zip(0..) {
            let LayerSpec::Convolutional(spec) = layer else {
                continue;
            };
            let kernel = it.next().ok_or_else(|| {
                Error::config(format!("missing kernel for convolutional layer {index}"))
            })?;
            kernel.validate()?;
            let expected = (
                spec.filters,
                input.channels,
                spec.size,
                spec.stride,
                spec.padding(),
            );
            let actual = (
                kernel.out_channels,
                kernel.in_channels,
                kernel.size,
                kernel.stride,
                kernel.pad,
            );
            if expected != actual {
                return Err(Error::config(format!(
                    "layer {index}: kernel geometry {actual:?} does not match config {expected:?}"
                )));
            }
            if spec.batch_normalize != kernel.batch_norm.is_some() {
                return Err(Error::config(format!(
                    "layer {index}: batch-norm presence differs from config"
                )));
            }
        }
        if it.next().is_some() {
            return Err(Error::config("more kernels than convolutional layers"));
        }
        Ok(Self { config, kernels })
    }

    /// Builds a model with one `init(spec, input_channels)` kernel per convolution.
    fn build(
        config: NetworkConfig,
        mut init: impl FnMut(&crate::model::ConvSpec, usize) -> ConvKernel<S>,
    ) -> Self {
        let kernels = config
            .layer_inputs()
            .filter_map(|(layer, input)| match layer {
                LayerSpec::Convolutional(spec) => Some(init(spec, input.channels)),
                _ => None,
            })
            .collect();
        Self { config, kernels }
    }

    /// All weights and biases zero; batch-norm statistics are identity.
    pub fn zeros(config: NetworkConfig) -> Self {
        Self::build(config, |spec, inputs| {
            let mut k =
                ConvKernel::zeros(spec.filters, inputs, spec.size, spec.stride, spec.padding());
            if spec.batch_normalize {
                k.batch_norm = Some(BatchNorm::identity(spec.filters));
            }
            k
        })
    }

    /// Weights and biases uniform in `[-scale, scale]`; batch-norm statistics identity.
    pub fn random<R: Rng + ?Sized>(config: NetworkConfig, scale: f64, rng: &mut R) -> Self {
        Self::build(config, |spec, inputs| {
            let mut k =
                ConvKernel::zeros(spec.filters, inputs, spec.size, spec.stride, spec.padding());
            for w in k.weights.iter_mut().chain(k.bias.iter_mut()) {
                *w = S::lit(rng.gen_range(-scale..=scale));
            }
            if spec.batch_normalize {
                k.batch_norm = Some(BatchNorm::identity(spec.filters));
            }
            k
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn kernels(&self) -> &[ConvKernel<S>] {
        &self.kernels
    }

    pub fn kernels_mut(&mut self) -> &mut [ConvKernel<S>] {
        &mut self.kernels
    }

    /// Number of stored scalars, matching the analytic parameter count.
    pub fn parameter_count(&self) -> usize {
        self.kernels
            .iter()
            .map(|k| {
                k.weights.len()
                    + k.bias.len()
                    + k.batch_norm.as_ref().map_or(0, |_| 3 * k.out_channels)
            })
            .sum()
    }

    /// Equivalent model with every batch-norm folded into its convolution.
    ///
    /// The config keeps its layer list but drops the `batch_normalize` flags.
    pub fn fold_batch_norm(&self) -> Result<Self> {
        let kernels = self
            .kernels
            .iter()
            .map(|k| {
                if k.batch_norm.is_some() {
                    fold_batch_norm(k)
                } else {
                    Ok(k.clone())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let layers = self
            .config
            .layers()
            .iter()
            .cloned()
            .map(|l| match l {
                LayerSpec::Convolutional(mut c) => {
                    c.batch_normalize = false;
                    LayerSpec::Convolutional(c)
                }
                other => other,
            })
            .collect();
        let config = NetworkConfig::new(self.config.name(), layers)?;
        Self::new(config, kernels)
    }

    /// The same kernels on a square `size × size` input. Convolution weights
    /// do not depend on spatial extent, so only shapes are re-propagated.
    pub fn with_input_size(&self, size: usize) -> Result<Self> {
        Self::new(self.config.with_input_size(size)?, self.kernels.clone())
    }

    /// Converts every parameter to another scalar type.
    pub fn cast<T: Scalar>(&self) -> Model<T> {
        let kernels = self.kernels.iter().map(ConvKernel::cast).collect();
        Model {
            config: self.config.clone(),
            kernels,
        }
    }
}

/// Runs every layer in order and returns the raw prediction map that the
/// region decoder consumes.
pub fn forward<S: Scalar>(model: &Model<S>, input: &Tensor<S>) -> Result<Tensor<S>> {
    if input.shape() != model.config.input_shape() {
        return Err(Error::config(format!(
            "input shape {} does not match network input {}",
            input.shape(),
            model.config.input_shape()
        )));
    }
    let slope = S::lit(DEFAULT_LEAKY_SLOPE);
    let mut kernels = model.kernels.iter();
    let mut x = input.clone();
    for layer in &model.config.layers()[1..] {
        match layer {
            LayerSpec::Convolutional(spec) => {
                let kernel = kernels.next().expect("validated kernel count");
                x = conv2d(&x, kernel)?;
                if spec.activation == Activation::Leaky {
                    crate::ops::activation::leaky_relu_in_place(&mut x, slope);
                }
            }
            LayerSpec::MaxPool(p) => x = maxpool2d(&x, p.size, p.stride)?,
            LayerSpec::Region(_) | LayerSpec::Net(_) => {}
        }
    }
    Ok(x)
}
