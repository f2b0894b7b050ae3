use super::{LayerGrads, Real, SeqTensor};
use crate::error::{shape_err, Error, Result};

/// Borrowed view of a `(k, cin, cout)` row-major convolution kernel.
#[derive(Debug, Clone, Copy)]
pub struct ConvKernel<'a, T> {
    k: usize,
    cin: usize,
    cout: usize,
    weights: &'a [T],
}

impl<'a, T: Real> ConvKernel<'a, T> {
    pub fn new(k: usize, cin: usize, cout: usize, weights: &'a [T]) -> Result<Self> {
        if k == 0 || cin == 0 || cout == 0 {
            return Err(shape_err(
                "conv kernel",
                "k, cin, cout >= 1",
                format!("({k}, {cin}, {cout})"),
            ));
        }
        if weights.len() != k * cin * cout {
            return Err(shape_err(
                "conv kernel weights",
                format!("{k}x{cin}x{cout} = {}", k * cin * cout),
                weights.len(),
            ));
        }
        Ok(Self {
            k,
            cin,
            cout,
            weights,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn cin(&self) -> usize {
        self.cin
    }

    pub fn cout(&self) -> usize {
        self.cout
    }

    pub fn weights(&self) -> &'a [T] {
        self.weights
    }

    /// The `(cin, cout)` slab for tap `j`.
    fn tap(&self, j: usize) -> &'a [T] {
        let n = self.cin * self.cout;
        &self.weights[j * n..(j + 1) * n]
    }
}

fn check(input_channels: usize, kernel: &ConvKernel<'_, impl Real>, dilation: usize) -> Result<()> {
    if kernel.k % 2 == 0 {
        return Err(Error::EvenKernel(kernel.k));
    }
    if dilation == 0 {
        return Err(Error::ZeroDilation);
    }
    if input_channels != kernel.cin {
        return Err(shape_err("conv1d input channels", kernel.cin, input_channels));
    }
    Ok(())
}

/// Input row feeding output row `t` through tap `j`, or `None` if it lies in
/// the zero padding.
#[inline]
fn source_row(t: usize, j: usize, half: usize, dilation: usize, len: usize) -> Option<usize> {
    let src = (t + j * dilation).checked_sub(half * dilation)?;
    (src < len).then_some(src)
}

/// Dilated 1-D convolution with symmetric zero same-padding.
///
/// `out[t, o] = bias[o] + Σ_{j,i} w[j, i, o] · in[t + (j − k/2)·dilation, i]`,
/// with out-of-range input rows read as zero. Output length equals input length.
pub fn conv1d_forward<T: Real>(
    input: &SeqTensor<T>,
    kernel: &ConvKernel<'_, T>,
    bias: &[T],
    dilation: usize,
) -> Result<SeqTensor<T>> {
    check(input.channels(), kernel, dilation)?;
    if bias.len() != kernel.cout {
        return Err(shape_err("conv1d bias", kernel.cout, bias.len()));
    }
    let len = input.len();
    let cout = kernel.cout;
    let half = kernel.k / 2;

    let mut out = Vec::with_capacity(len * cout);
    for _ in 0..len {
        out.extend_from_slice(bias);
    }
    for t in 0..len {
        let out_row = &mut out[t * cout..(t + 1) * cout];
        for j in 0..kernel.k {
            let Some(src) = source_row(t, j, half, dilation, len) else {
                continue;
            };
            let tap = kernel.tap(j);
            for (i, &x) in input.row(src).iter().enumerate() {
                if x == T::zero() {
                    continue;
                }
                let w = &tap[i * cout..(i + 1) * cout];
                for (o, &wv) in out_row.iter_mut().zip(w) {
                    *o += x * wv;
                }
            }
        }
    }
    SeqTensor::new(len, cout, out)
}

/// Accumulating backward pass.
///
/// Adds `∂L/∂W` into `d_kernel` (layout `(k, cin, cout)`), `∂L/∂b` into
/// `d_bias`, and, when `d_input` is given, `∂L/∂input` into it.
pub fn conv1d_backward_into<T: Real>(
    input: &SeqTensor<T>,
    kernel: &ConvKernel<'_, T>,
    dilation: usize,
    d_output: &SeqTensor<T>,
    d_input: Option<&mut SeqTensor<T>>,
    d_kernel: &mut [T],
    d_bias: &mut [T],
) -> Result<()> {
    check(input.channels(), kernel, dilation)?;
    let len = input.len();
    let (cin, cout) = (kernel.cin, kernel.cout);
    if d_output.shape() != (len, cout) {
        return Err(shape_err(
            "conv1d dOutput",
            format!("{:?}", (len, cout)),
            format!("{:?}", d_output.shape()),
        ));
    }
    if d_kernel.len() != kernel.weights.len() {
        return Err(shape_err("conv1d dW", kernel.weights.len(), d_kernel.len()));
    }
    if d_bias.len() != cout {
        return Err(shape_err("conv1d dBias", cout, d_bias.len()));
    }
    let half = kernel.k / 2;

    for t in 0..len {
        for (db, &g) in d_bias.iter_mut().zip(d_output.row(t)) {
            *db += g;
        }
    }

    let tap_size = cin * cout;
    for t in 0..len {
        let g = d_output.row(t);
        for j in 0..kernel.k {
            let Some(src) = source_row(t, j, half, dilation, len) else {
                continue;
            };
            let dtap = &mut d_kernel[j * tap_size..(j + 1) * tap_size];
            for (i, &x) in input.row(src).iter().enumerate() {
                if x == T::zero() {
                    continue;
                }
                for (dw, &gv) in dtap[i * cout..(i + 1) * cout].iter_mut().zip(g) {
                    *dw += x * gv;
                }
            }
        }
    }

    if let Some(d_input) = d_input {
        if d_input.shape() != input.shape() {
            return Err(shape_err(
                "conv1d dInput",
                format!("{:?}", input.shape()),
                format!("{:?}", d_input.shape()),
            ));
        }
        for t in 0..len {
            let g = d_output.row(t);
            for j in 0..kernel.k {
                let Some(src) = source_row(t, j, half, dilation, len) else {
                    continue;
                };
                let tap = kernel.tap(j);
                let drow = d_input.row_mut(src);
                for (i, di) in drow.iter_mut().enumerate() {
                    let w = &tap[i * cout..(i + 1) * cout];
                    let mut acc = T::zero();
                    for (&wv, &gv) in w.iter().zip(g) {
                        acc += wv * gv;
                    }
                    *di += acc;
                }
            }
        }
    }
    Ok(())
}

/// Backward pass returning fresh gradients; `d_weights` is `dW` followed by `dBias`.
pub fn conv1d_backward<T: Real>(
    input: &SeqTensor<T>,
    kernel: &ConvKernel<'_, T>,
    dilation: usize,
    d_output: &SeqTensor<T>,
) -> Result<LayerGrads<T>> {
    let mut d_input = SeqTensor::zeros(input.len(), input.channels())?;
    let nw = kernel.weights.len();
    let mut d_weights = vec![T::zero(); nw + kernel.cout];
    let (dw, db) = d_weights.split_at_mut(nw);
    conv1d_backward_into(input, kernel, dilation, d_output, Some(&mut d_input), dw, db)?;
    Ok(LayerGrads { d_input, d_weights })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(v: &[f64]) -> SeqTensor<f64> {
        SeqTensor::new(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn identity_kernel() {
        let w = [1.0];
        let k = ConvKernel::new(1, 1, 1, &w).unwrap();
        let out = conv1d_forward(&column(&[5.0, -2.0, 3.0]), &k, &[0.0], 1).unwrap();
        assert_eq!(out.data(), &[5.0, -2.0, 3.0]);
    }

    #[test]
    fn zero_input_gives_bias() {
        let w = vec![0.3; 3 * 2 * 4];
        let k = ConvKernel::new(3, 2, 4, &w).unwrap();
        let input = SeqTensor::zeros(6, 2).unwrap();
        let out = conv1d_forward(&input, &k, &[0.7; 4], 2).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.7));
    }

    #[test]
    fn box_filter_with_padding() {
        let w = [1.0, 1.0, 1.0];
        let k = ConvKernel::new(3, 1, 1, &w).unwrap();
        let out = conv1d_forward(&column(&[1.0, 2.0, 3.0]), &k, &[0.0], 1).unwrap();
        assert_eq!(out.data(), &[3.0, 6.0, 5.0]);
        let out = conv1d_forward(&column(&[1.0, 2.0, 3.0, 4.0, 5.0]), &k, &[0.0], 2).unwrap();
        // Naive triple loop and torch conv1d(padding=2, dilation=2) agree.
        assert_eq!(out.data(), &[4.0, 6.0, 9.0, 6.0, 8.0]);
    }

    #[test]
    fn rejects_even_kernel_and_channel_mismatch() {
        let w = [1.0, 1.0];
        let k = ConvKernel::new(2, 1, 1, &w).unwrap();
        assert!(matches!(
            conv1d_forward(&column(&[1.0]), &k, &[0.0], 1),
            Err(Error::EvenKernel(2))
        ));
        let w = [1.0; 2];
        let k = ConvKernel::new(1, 2, 1, &w).unwrap();
        assert!(matches!(
            conv1d_forward(&column(&[1.0]), &k, &[0.0], 1),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(ConvKernel::new(3, 1, 1, &w).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let w = [0.5, -1.0, 2.0];
        let k = ConvKernel::new(3, 1, 1, &w).unwrap();
        let x = column(&[1.0, 2.0, 3.0, 4.0]);
        let g = conv1d_backward(&x, &k, 1, &SeqTensor::zeros(4, 1).unwrap()).unwrap();
        assert!(g.d_input.data().iter().all(|&v| v == 0.0));
        assert!(g.d_weights.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_kernel_passes_gradient_through() {
        let w = [1.0];
        let k = ConvKernel::new(1, 1, 1, &w).unwrap();
        let x = column(&[1.0, -1.0, 0.5]);
        let upstream = column(&[0.1, 0.2, 0.3]);
        let g = conv1d_backward(&x, &k, 1, &upstream).unwrap();
        assert_eq!(g.d_input.data(), upstream.data());
        assert!((g.d_weights[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn backward_rejects_wrong_upstream_shape() {
        let w = [1.0];
        let k = ConvKernel::new(1, 1, 1, &w).unwrap();
        let x = column(&[1.0, 2.0]);
        assert!(conv1d_backward(&x, &k, 1, &column(&[1.0])).is_err());
    }
}
