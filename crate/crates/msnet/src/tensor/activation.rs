use super::{Real, SeqTensor};
use crate::error::{shape_err, Result};

pub fn relu_forward<T: Real>(input: &SeqTensor<T>) -> SeqTensor<T> {
    let mut out = input.clone();
    for v in out.data_mut() {
        *v = v.max(T::zero());
    }
    out
}

/// Passes `d_output` where `input > 0`; the gradient at exactly zero is zero.
pub fn relu_backward<T: Real>(input: &SeqTensor<T>, d_output: &SeqTensor<T>) -> Result<SeqTensor<T>> {
    if input.shape() != d_output.shape() {
        return Err(shape_err(
            "relu dOutput",
            format!("{:?}", input.shape()),
            format!("{:?}", d_output.shape()),
        ));
    }
    let mut d_input = d_output.clone();
    for (d, &x) in d_input.data_mut().iter_mut().zip(input.data()) {
        if x <= T::zero() {
            *d = T::zero();
        }
    }
    Ok(d_input)
}
