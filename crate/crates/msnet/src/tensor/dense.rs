use super::{LayerGrads, Real, SeqTensor};
use crate::error::{shape_err, Result};

/// `out = inᵀ W + b` with `W` row-major `(n, m)`.
pub fn dense_forward<T: Real>(input: &[T], weights: &[T], bias: &[T]) -> Result<Vec<T>> {
    let (n, m) = (input.len(), bias.len());
    if weights.len() != n * m {
        return Err(shape_err("dense weights", format!("{n}x{m}"), weights.len()));
    }
    let mut out = bias.to_vec();
    for (&x, row) in input.iter().zip(weights.chunks_exact(m)) {
        for (o, &w) in out.iter_mut().zip(row) {
            *o += x * w;
        }
    }
    Ok(out)
}

/// Accumulates `∂L/∂W`, `∂L/∂b` and returns `∂L/∂input`.
pub fn dense_backward_into<T: Real>(
    input: &[T],
    weights: &[T],
    d_output: &[T],
    d_weights: &mut [T],
    d_bias: &mut [T],
) -> Result<Vec<T>> {
    let (n, m) = (input.len(), d_output.len());
    if weights.len() != n * m {
        return Err(shape_err("dense weights", format!("{n}x{m}"), weights.len()));
    }
    if d_weights.len() != n * m || d_bias.len() != m {
        return Err(shape_err(
            "dense grads",
            format!("{} + {m}", n * m),
            format!("{} + {}", d_weights.len(), d_bias.len()),
        ));
    }
    for (db, &g) in d_bias.iter_mut().zip(d_output) {
        *db += g;
    }
    let mut d_input = Vec::with_capacity(n);
    for ((&x, row), drow) in input
        .iter()
        .zip(weights.chunks_exact(m))
        .zip(d_weights.chunks_exact_mut(m))
    {
        let mut acc = T::zero();
        for ((dw, &w), &g) in drow.iter_mut().zip(row).zip(d_output) {
            *dw += x * g;
            acc += w * g;
        }
        d_input.push(acc);
    }
    Ok(d_input)
}

/// Fresh-gradient form; `d_input` is a single-row tensor and `d_weights`
/// holds `dW` followed by `dBias`.
pub fn dense_backward<T: Real>(input: &[T], weights: &[T], d_output: &[T]) -> Result<LayerGrads<T>> {
    let nw = input.len() * d_output.len();
    let mut d_weights = vec![T::zero(); nw + d_output.len()];
    let (dw, db) = d_weights.split_at_mut(nw);
    let d_in = dense_backward_into(input, weights, d_output, dw, db)?;
    Ok(LayerGrads {
        d_input: SeqTensor::new(1, input.len(), d_in)?,
        d_weights,
    })
}
