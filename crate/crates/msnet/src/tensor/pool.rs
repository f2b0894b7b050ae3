use super::{Real, SeqTensor};
use crate::error::{shape_err, Error, Result};

/// Result of a global max-pool: per-channel maxima and the row each came from.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxPool<T = f64> {
    pub values: Vec<T>,
    pub argmax: Vec<usize>,
}

/// Max over all rows, per channel (a pooling window the length of the whole
/// sequence). Ties go to the smallest row index.
pub fn global_maxpool_forward<T: Real>(input: &SeqTensor<T>) -> Result<MaxPool<T>> {
    if input.is_empty() {
        return Err(Error::EmptyVolume);
    }
    let mut values = input.row(0).to_vec();
    let mut argmax = vec![0; input.channels()];
    for t in 1..input.len() {
        for ((best, idx), &v) in values.iter_mut().zip(argmax.iter_mut()).zip(input.row(t)) {
            if v > *best {
                *best = v;
                *idx = t;
            }
        }
    }
    Ok(MaxPool { values, argmax })
}

/// Routes each channel's upstream gradient to the row that won the max.
pub fn global_maxpool_backward<T: Real>(
    argmax: &[usize],
    d_output: &[T],
    len: usize,
) -> Result<SeqTensor<T>> {
    if argmax.len() != d_output.len() {
        return Err(shape_err("maxpool dOutput", argmax.len(), d_output.len()));
    }
    let channels = argmax.len();
    let mut d_input = SeqTensor::zeros(len, channels)?;
    for (c, (&t, &g)) in argmax.iter().zip(d_output).enumerate() {
        if t >= len {
            return Err(Error::IndexOutOfRange { index: t, len });
        }
        d_input.data_mut()[t * channels + c] = g;
    }
    Ok(d_input)
}
