//! Dense sequence tensors and the layer primitives of the network.
//!
//! There is no autodiff here. Every layer is a pair of free functions, a
//! forward pass and a backward pass with its gradient written out by hand.
//! All functions are generic over [`Real`] so the same code serves the 64-bit
//! training path and the 32-bit inference path.
//!
//! Layouts:
//!
//! - [`SeqTensor`] is row-major `(len, channels)`: row `t` is the feature
//!   vector of slice `t`.
//! - Convolution kernels are row-major `(k, cin, cout)`.
//! - Dense weights are row-major `(n_in, n_out)`, so `out = inᵀ W + b`.

mod activation;
mod conv;
mod dense;
mod pool;

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::AddAssign;

use num_traits::{Float, FromPrimitive, ToPrimitive};

use crate::error::{shape_err, Error, Result};

pub use activation::{relu_backward, relu_forward};
pub use conv::{conv1d_backward, conv1d_backward_into, conv1d_forward, ConvKernel};
pub use dense::{dense_backward, dense_backward_into, dense_forward};
pub use pool::{global_maxpool_backward, global_maxpool_forward, MaxPool};

/// Floating-point element type usable by every layer.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + AddAssign + Debug + Default + Send + Sync + 'static
{
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any float type")
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + Sum + AddAssign + Debug + Default + Send + Sync + 'static
{
}

/// A `(len, channels)` row-major matrix; one row per slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqTensor<T = f64> {
    len: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Real> SeqTensor<T> {
    pub fn new(len: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if len == 0 {
            return Err(Error::EmptyVolume);
        }
        if channels == 0 {
            return Err(shape_err("SeqTensor", "channels >= 1", 0));
        }
        if data.len() != len * channels {
            return Err(shape_err(
                "SeqTensor buffer",
                format!("{len}x{channels} = {}", len * channels),
                data.len(),
            ));
        }
        Ok(Self {
            len,
            channels,
            data,
        })
    }

    pub fn zeros(len: usize, channels: usize) -> Result<Self> {
        Self::new(len, channels, vec![T::zero(); len * channels])
    }

    /// Builds a tensor from rows; every row must have the same width.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let channels = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * channels);
        for (t, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != channels {
                return Err(shape_err(
                    "SeqTensor row",
                    channels,
                    format!("{} (row {t})", row.len()),
                ));
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), channels, data)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    /// Always false: a tensor holds at least one slice.
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.len, self.channels)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, t: usize) -> &[T] {
        &self.data[t * self.channels..(t + 1) * self.channels]
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [T] {
        let c = self.channels;
        &mut self.data[t * c..(t + 1) * c]
    }

    pub fn get(&self, t: usize, c: usize) -> T {
        self.data[t * self.channels + c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Element-wise conversion to another precision.
    pub fn cast<U: Real>(&self) -> SeqTensor<U> {
        SeqTensor {
            len: self.len,
            channels: self.channels,
            data: self
                .data
                .iter()
                .map(|v| U::from(*v).unwrap_or_else(U::nan))
                .collect(),
        }
    }

    pub(crate) fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }
}

/// Gradients produced by a layer's backward pass.
///
/// `d_weights` follows the layer's parameter layout: weights first, then bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads<T = f64> {
    pub d_input: SeqTensor<T>,
    pub d_weights: Vec<T>,
}
