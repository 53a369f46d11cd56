use super::Tensor;
use crate::error::{Error, Result};

/// `c = a * b (+ c if accumulate)` on raw row-major buffers with explicit
/// strides, so transposed operands need no copy.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (isize, isize),
    b: &[f64],
    b_strides: (isize, isize),
    c: &mut [f64],
    accumulate: bool,
) {
    assert!(c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the strides address only elements inside `a`, `b` and `c`, whose
    // lengths cover the m*k, k*n and m*n index spaces checked by the callers.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let [m, k] = a.dims2()?;
    let [k2, n] = b.dims2()?;
    if k != k2 {
        return Err(Error::shape(format!(
            "matmul inner dimensions disagree: {:?} x {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut out = vec![0.0; m * n];
    gemm(
        m,
        k,
        n,
        a.data(),
        (k as isize, 1),
        b.data(),
        (n as isize, 1),
        &mut out,
        false,
    );
    Tensor::new(vec![m, n], out)
}

/// Output extent along one axis, or a shape error when the kernel does not
/// tile the padded input exactly.
pub fn conv2d_output_size(input: usize, kernel: usize, stride: usize, padding: usize) -> Result<usize> {
    if stride == 0 {
        return Err(Error::shape("conv2d stride must be at least 1"));
    }
    let padded = input + 2 * padding;
    if kernel == 0 || kernel > padded {
        return Err(Error::shape(format!(
            "kernel {kernel} does not fit padded input {padded}"
        )));
    }
    if !(padded - kernel).is_multiple_of(stride) {
        return Err(Error::shape(format!(
            "non-integral conv output: ({input} + 2*{padding} - {kernel}) / {stride}"
        )));
    }
    Ok((padded - kernel) / stride + 1)
}

pub(crate) struct ConvGeometry {
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub k: usize,
    pub stride: usize,
    pub padding: usize,
    pub h_out: usize,
    pub w_out: usize,
}

impl ConvGeometry {
    pub fn new(input: &Tensor, kernels: &Tensor, stride: usize, padding: usize) -> Result<Self> {
        let [c_in, h, w] = input.dims3()?;
        let (c_out, kc, kh, kw) = match kernels.shape() {
            &[a, b, c, d] => (a, b, c, d),
            other => {
                return Err(Error::shape(format!(
                    "conv kernels must be Cout x Cin x k x k, got {other:?}"
                )))
            }
        };
        if kc != c_in || kh != kw {
            return Err(Error::shape(format!(
                "kernels {:?} incompatible with input {:?}",
                kernels.shape(),
                input.shape()
            )));
        }
        let h_out = conv2d_output_size(h, kh, stride, padding)?;
        let w_out = conv2d_output_size(w, kw, stride, padding)?;
        Ok(Self {
            c_in,
            h,
            w,
            c_out,
            k: kh,
            stride,
            padding,
            h_out,
            w_out,
        })
    }

    /// Input coordinate feeding output (oy, ox) through kernel tap (ky, kx),
    /// or `None` when the tap lands in the zero padding.
    #[inline]
    pub fn source(&self, oy: usize, ox: usize, ky: usize, kx: usize) -> Option<(usize, usize)> {
        let y = (oy * self.stride + ky) as isize - self.padding as isize;
        let x = (ox * self.stride + kx) as isize - self.padding as isize;
        if y < 0 || x < 0 || y >= self.h as isize || x >= self.w as isize {
            None
        } else {
            Some((y as usize, x as usize))
        }
    }
}

/// 2-D cross-correlation (no kernel flip).
pub fn conv2d(input: &Tensor, kernels: &Tensor, stride: usize, padding: usize) -> Result<Tensor> {
    let g = ConvGeometry::new(input, kernels, stride, padding)?;
    let x = input.data();
    let kd = kernels.data();
    let mut out = vec![0.0; g.c_out * g.h_out * g.w_out];
    for co in 0..g.c_out {
        for oy in 0..g.h_out {
            for ox in 0..g.w_out {
                let mut acc = 0.0;
                for ci in 0..g.c_in {
                    for ky in 0..g.k {
                        for kx in 0..g.k {
                            if let Some((y, xx)) = g.source(oy, ox, ky, kx) {
                                acc += kd[((co * g.c_in + ci) * g.k + ky) * g.k + kx]
                                    * x[(ci * g.h + y) * g.w + xx];
                            }
                        }
                    }
                }
                out[(co * g.h_out + oy) * g.w_out + ox] = acc;
            }
        }
    }
    Tensor::new(vec![g.c_out, g.h_out, g.w_out], out)
}

/// Returns (input gradient, kernel gradient).
pub(crate) fn conv2d_backward(
    input: &Tensor,
    kernels: &Tensor,
    stride: usize,
    padding: usize,
    upstream: &Tensor,
) -> Result<(Tensor, Tensor)> {
    let g = ConvGeometry::new(input, kernels, stride, padding)?;
    if upstream.shape() != [g.c_out, g.h_out, g.w_out] {
        return Err(Error::shape(format!(
            "conv upstream gradient {:?} does not match output [{}, {}, {}]",
            upstream.shape(),
            g.c_out,
            g.h_out,
            g.w_out
        )));
    }
    let x = input.data();
    let kd = kernels.data();
    let up = upstream.data();
    let mut dx = vec![0.0; x.len()];
    let mut dk = vec![0.0; kd.len()];
    for co in 0..g.c_out {
        for oy in 0..g.h_out {
            for ox in 0..g.w_out {
                let gval = up[(co * g.h_out + oy) * g.w_out + ox];
                if gval == 0.0 {
                    continue;
                }
                for ci in 0..g.c_in {
                    for ky in 0..g.k {
                        for kx in 0..g.k {
                            if let Some((y, xx)) = g.source(oy, ox, ky, kx) {
                                let ki = ((co * g.c_in + ci) * g.k + ky) * g.k + kx;
                                let xi = (ci * g.h + y) * g.w + xx;
                                dk[ki] += gval * x[xi];
                                dx[xi] += gval * kd[ki];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((
        Tensor::new(input.shape().to_vec(), dx)?,
        Tensor::new(kernels.shape().to_vec(), dk)?,
    ))
}

pub fn avgpool2d(input: &Tensor, window: usize) -> Result<Tensor> {
    let [c, h, w] = input.dims3()?;
    check_pool(h, w, window)?;
    let (ho, wo) = (h / window, w / window);
    let x = input.data();
    let norm = (window * window) as f64;
    let mut out = vec![0.0; c * ho * wo];
    for ch in 0..c {
        for oy in 0..ho {
            for ox in 0..wo {
                let mut acc = 0.0;
                for dy in 0..window {
                    for dx in 0..window {
                        acc += x[(ch * h + oy * window + dy) * w + ox * window + dx];
                    }
                }
                out[(ch * ho + oy) * wo + ox] = acc / norm;
            }
        }
    }
    Tensor::new(vec![c, ho, wo], out)
}

pub(crate) fn avgpool2d_backward(input_shape: &[usize], window: usize, upstream: &Tensor) -> Result<Tensor> {
    let (c, h, w) = match input_shape {
        &[c, h, w] => (c, h, w),
        other => return Err(Error::shape(format!("avgpool input must be CxHxW, got {other:?}"))),
    };
    check_pool(h, w, window)?;
    let (ho, wo) = (h / window, w / window);
    if upstream.shape() != [c, ho, wo] {
        return Err(Error::shape(format!(
            "avgpool upstream gradient {:?} does not match output [{c}, {ho}, {wo}]",
            upstream.shape()
        )));
    }
    let up = upstream.data();
    let norm = (window * window) as f64;
    let mut dx = vec![0.0; c * h * w];
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                dx[(ch * h + y) * w + x] = up[(ch * ho + y / window) * wo + x / window] / norm;
            }
        }
    }
    Tensor::new(input_shape.to_vec(), dx)
}

fn check_pool(h: usize, w: usize, window: usize) -> Result<()> {
    if window == 0 || !h.is_multiple_of(window) || !w.is_multiple_of(window) {
        return Err(Error::shape(format!(
            "pool window {window} does not divide {h}x{w}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity() {
        let m = Tensor::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(matmul(&Tensor::eye(2), &m).unwrap(), m);
    }

    #[test]
    fn matmul_row_by_column() {
        let a = Tensor::from_rows(&[&[1.0, 2.0]]);
        let b = Tensor::from_rows(&[&[3.0], &[4.0]]);
        assert_eq!(matmul(&a, &b).unwrap().data(), &[11.0]);
    }

    #[test]
    fn matmul_zero_annihilates() {
        let z = Tensor::zeros(&[3, 2]);
        let b = Tensor::from_fn(&[2, 4], |i| i as f64 - 3.5);
        assert!(matmul(&z, &b).unwrap().data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let err = matmul(&Tensor::zeros(&[2, 3]), &Tensor::zeros(&[2, 3])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3] x [2, 3]"), "{msg}");
    }

    #[test]
    fn conv_unit_kernel_is_identity() {
        let x = Tensor::from_fn(&[1, 3, 4], |i| i as f64 * 0.25);
        let k = Tensor::filled(&[1, 1, 1, 1], 1.0);
        assert_eq!(conv2d(&x, &k, 1, 0).unwrap(), x);
    }

    #[test]
    fn conv_hand_sum() {
        let x = Tensor::new(vec![1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let k = Tensor::filled(&[1, 1, 2, 2], 1.0);
        let y = conv2d(&x, &k, 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1]);
        assert_eq!(y.data(), &[10.0]);
    }

    #[test]
    fn conv_zero_kernel() {
        let x = Tensor::from_fn(&[2, 5, 5], |i| i as f64);
        let k = Tensor::zeros(&[3, 2, 3, 3]);
        let y = conv2d(&x, &k, 1, 1).unwrap();
        assert_eq!(y.shape(), &[3, 5, 5]);
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv_is_cross_correlation() {
        // A kernel with a single tap at (0, 1) reads the right neighbour.
        let x = Tensor::from_fn(&[1, 1, 3], |i| i as f64);
        let mut k = Tensor::zeros(&[1, 1, 1, 2]);
        assert!(conv2d(&x, &k, 1, 0).is_err(), "non-square kernels are rejected");
        k = Tensor::new(vec![1, 1, 2, 2], vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let x = Tensor::from_fn(&[1, 2, 3], |i| i as f64);
        let y = conv2d(&x, &k, 1, 0).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0]);
    }

    #[test]
    fn conv_non_integral_output() {
        let x = Tensor::zeros(&[1, 6, 6]);
        let k = Tensor::zeros(&[1, 1, 3, 3]);
        assert!(conv2d(&x, &k, 2, 0).is_err());
        assert_eq!(conv2d(&x, &k, 3, 0).unwrap().shape(), &[1, 2, 2]);
    }

    #[test]
    fn avgpool_examples() {
        let c = Tensor::filled(&[2, 4, 4], 0.3);
        let pooled = avgpool2d(&c, 2).unwrap();
        assert!(pooled.data().iter().all(|&v| (v - 0.3).abs() < 1e-15));

        let x = Tensor::new(vec![1, 2, 2], vec![1.0, 3.0, 5.0, 7.0]).unwrap();
        assert_eq!(avgpool2d(&x, 2).unwrap().data(), &[4.0]);

        let y = Tensor::from_fn(&[1, 3, 3], |i| i as f64);
        assert_eq!(avgpool2d(&y, 1).unwrap(), y);
        assert!(avgpool2d(&y, 2).is_err());
    }
}
