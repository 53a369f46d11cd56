use super::ops::{avgpool2d_backward, conv2d_backward, gemm};
use super::Tensor;
use crate::error::{Error, Result};

/// A layer kind together with whatever its forward pass cached.
#[derive(Clone, Copy, Debug)]
pub enum BackwardOp<'a> {
    /// `y = input · param`, input `[m×k]`, param `[k×n]`.
    Matmul { input: &'a Tensor, param: &'a Tensor },
    /// Fully connected, bias-free: `y = input · weightsᵀ`, input `[batch×in]`,
    /// weights `[out×in]`.
    Dense { input: &'a Tensor, weights: &'a Tensor },
    Conv2d {
        input: &'a Tensor,
        kernels: &'a Tensor,
        stride: usize,
        padding: usize,
    },
    AvgPool { input_shape: &'a [usize], window: usize },
    /// ReLU clamped to [0, 1]; `pre` is the pre-activation.
    Relu1 { pre: &'a Tensor },
    Relu { pre: &'a Tensor },
    /// `mask` holds 0 for dropped units and 1/(1-p) for survivors.
    Dropout { mask: &'a Tensor },
}

#[derive(Clone, Debug)]
pub struct Gradients {
    pub input: Tensor,
    pub params: Option<Tensor>,
}

pub fn layer_backward(op: BackwardOp<'_>, upstream: &Tensor) -> Result<Gradients> {
    match op {
        BackwardOp::Matmul { input, param } => {
            let [m, k] = input.dims2()?;
            let [k2, n] = param.dims2()?;
            if k != k2 || upstream.shape() != [m, n] {
                return Err(Error::shape(format!(
                    "matmul backward: input {:?}, param {:?}, upstream {:?}",
                    input.shape(),
                    param.shape(),
                    upstream.shape()
                )));
            }
            // d_input = G · Bᵀ
            let mut d_input = vec![0.0; m * k];
            gemm(m, n, k, upstream.data(), (n as isize, 1), param.data(), (1, n as isize), &mut d_input, false);
            // d_param = Aᵀ · G
            let mut d_param = vec![0.0; k * n];
            gemm(k, m, n, input.data(), (1, k as isize), upstream.data(), (n as isize, 1), &mut d_param, false);
            Ok(Gradients {
                input: Tensor::new(vec![m, k], d_input)?,
                params: Some(Tensor::new(vec![k, n], d_param)?),
            })
        }
        BackwardOp::Dense { input, weights } => {
            let [batch, n_in] = input.dims2()?;
            let [n_out, n_in2] = weights.dims2()?;
            if n_in != n_in2 || upstream.shape() != [batch, n_out] {
                return Err(Error::shape(format!(
                    "dense backward: input {:?}, weights {:?}, upstream {:?}",
                    input.shape(),
                    weights.shape(),
                    upstream.shape()
                )));
            }
            // d_input = G · W
            let mut d_input = vec![0.0; batch * n_in];
            gemm(
                batch,
                n_out,
                n_in,
                upstream.data(),
                (n_out as isize, 1),
                weights.data(),
                (n_in as isize, 1),
                &mut d_input,
                false,
            );
            // d_weights = Gᵀ · X
            let mut d_w = vec![0.0; n_out * n_in];
            gemm(
                n_out,
                batch,
                n_in,
                upstream.data(),
                (1, n_out as isize),
                input.data(),
                (n_in as isize, 1),
                &mut d_w,
                false,
            );
            Ok(Gradients {
                input: Tensor::new(vec![batch, n_in], d_input)?,
                params: Some(Tensor::new(vec![n_out, n_in], d_w)?),
            })
        }
        BackwardOp::Conv2d {
            input,
            kernels,
            stride,
            padding,
        } => {
            let (dx, dk) = conv2d_backward(input, kernels, stride, padding, upstream)?;
            Ok(Gradients {
                input: dx,
                params: Some(dk),
            })
        }
        BackwardOp::AvgPool { input_shape, window } => Ok(Gradients {
            input: avgpool2d_backward(input_shape, window, upstream)?,
            params: None,
        }),
        BackwardOp::Relu1 { pre } => Ok(Gradients {
            input: pre.zip_map(upstream, |x, g| if x > 0.0 && x <= 1.0 { g } else { 0.0 })?,
            params: None,
        }),
        BackwardOp::Relu { pre } => Ok(Gradients {
            input: pre.zip_map(upstream, |x, g| if x > 0.0 { g } else { 0.0 })?,
            params: None,
        }),
        BackwardOp::Dropout { mask } => Ok(Gradients {
            input: mask.zip_map(upstream, |m, g| m * g)?,
            params: None,
        }),
    }
}
