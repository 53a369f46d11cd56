use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{conv2d_output_size, Shape2D};

/// Clamp to [0, 1]: zero for `x <= 0`, identity on `(0, 1]`, one above.
#[inline]
pub fn relu1(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x > 1.0 {
        1.0
    } else {
        x
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Relu1,
    /// Unbounded ReLU, only used to reproduce the "no ReLU1" ablation.
    Relu,
    /// Raw pre-activation; the final layer is read out as membrane potential.
    None,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu1 => relu1(x),
            Activation::Relu => x.max(0.0),
            Activation::None => x,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LayerSpec {
    Dense {
        inputs: usize,
        outputs: usize,
        activation: Activation,
    },
    Conv2d {
        input: Shape2D,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        activation: Activation,
    },
    AvgPool {
        input: Shape2D,
        window: usize,
    },
    Dropout {
        p: f64,
    },
    Flatten {
        input: Shape2D,
    },
}

impl LayerSpec {
    pub fn dense(inputs: usize, outputs: usize, activation: Activation) -> Self {
        LayerSpec::Dense {
            inputs,
            outputs,
            activation,
        }
    }

    pub fn input_len(&self) -> usize {
        match self {
            LayerSpec::Dense { inputs, .. } => *inputs,
            LayerSpec::Conv2d { input, .. }
            | LayerSpec::AvgPool { input, .. }
            | LayerSpec::Flatten { input } => input.len(),
            // dropout is shape-preserving; resolved by the network
            LayerSpec::Dropout { .. } => 0,
        }
    }

    pub fn output_shape2d(&self) -> Result<Option<Shape2D>> {
        match self {
            LayerSpec::Conv2d {
                input,
                out_channels,
                kernel,
                stride,
                padding,
                ..
            } => Ok(Some(Shape2D::new(
                *out_channels,
                conv2d_output_size(input.height, *kernel, *stride, *padding)?,
                conv2d_output_size(input.width, *kernel, *stride, *padding)?,
            )?)),
            LayerSpec::AvgPool { input, window } => {
                if *window == 0 || input.height % window != 0 || input.width % window != 0 {
                    return Err(Error::shape(format!(
                        "pool window {window} does not divide {}x{}",
                        input.height, input.width
                    )));
                }
                Ok(Some(Shape2D::new(
                    input.channels,
                    input.height / window,
                    input.width / window,
                )?))
            }
            _ => Ok(None),
        }
    }

    /// Output length given the length flowing in (needed for dropout).
    pub fn output_len(&self, incoming: usize) -> Result<usize> {
        Ok(match self {
            LayerSpec::Dense { outputs, .. } => *outputs,
            LayerSpec::Conv2d { .. } | LayerSpec::AvgPool { .. } => {
                self.output_shape2d()?.map(|s| s.len()).unwrap_or(0)
            }
            LayerSpec::Dropout { .. } => incoming,
            LayerSpec::Flatten { input } => input.len(),
        })
    }

    /// Shape of the trainable weight tensor, if any.
    pub fn param_shape(&self) -> Option<Vec<usize>> {
        match self {
            LayerSpec::Dense { inputs, outputs, .. } => Some(vec![*outputs, *inputs]),
            LayerSpec::Conv2d {
                input,
                out_channels,
                kernel,
                ..
            } => Some(vec![*out_channels, input.channels, *kernel, *kernel]),
            _ => None,
        }
    }

    /// Number of synapses summed per neuron (row length of the weight tensor).
    pub fn fan_in(&self) -> Option<usize> {
        self.param_shape().map(|s| s[1..].iter().product())
    }

    /// Layers whose weight sums are driven to one.
    pub fn is_constrained(&self) -> bool {
        self.param_shape().is_some()
    }

    /// Layers that become a population of spiking neurons with their own
    /// time window after conversion.
    pub fn is_weighted(&self) -> bool {
        matches!(
            self,
            LayerSpec::Dense { .. } | LayerSpec::Conv2d { .. } | LayerSpec::AvgPool { .. }
        )
    }

    pub fn activation(&self) -> Activation {
        match self {
            LayerSpec::Dense { activation, .. } | LayerSpec::Conv2d { activation, .. } => *activation,
            _ => Activation::None,
        }
    }

    pub fn has_activation(&self) -> bool {
        self.activation() != Activation::None
    }

    pub(crate) fn set_activation(&mut self, act: Activation) {
        match self {
            LayerSpec::Dense { activation, .. } | LayerSpec::Conv2d { activation, .. } => *activation = act,
            _ => {}
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::AvgPool { .. } => "avgpool",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Flatten { .. } => "flatten",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu1_branches() {
        assert_eq!(relu1(-0.5), 0.0);
        assert_eq!(relu1(0.0), 0.0);
        assert_eq!(relu1(0.3), 0.3);
        assert_eq!(relu1(1.0), 1.0);
        assert_eq!(relu1(1.7), 1.0);
    }

    #[test]
    fn conv_output_geometry() {
        let conv = LayerSpec::Conv2d {
            input: Shape2D::new(1, 28, 28).unwrap(),
            out_channels: 8,
            kernel: 5,
            stride: 1,
            padding: 0,
            activation: Activation::Relu1,
        };
        assert_eq!(conv.output_shape2d().unwrap(), Some(Shape2D::new(8, 24, 24).unwrap()));
        assert_eq!(conv.param_shape(), Some(vec![8, 1, 5, 5]));
        assert_eq!(conv.fan_in(), Some(25));
    }

    #[test]
    fn spec_serializes_with_kind_tag() {
        let d = LayerSpec::dense(3, 2, Activation::None);
        let json = serde_json::to_string(&d).unwrap();
        assert!(json.contains("\"kind\":\"dense\""), "{json}");
        assert_eq!(serde_json::from_str::<LayerSpec>(&json).unwrap(), d);
    }
}
