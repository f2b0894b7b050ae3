//! Forward and backward passes over a flat parameter vector.

use super::arch::{ConvSlot, DenseSlot, MsNetArch, ParamLayout};
use crate::error::{shape_err, Result};
use crate::loss::softmax;
use crate::tensor::{
    conv1d_backward_into, conv1d_forward, dense_backward_into, dense_forward,
    global_maxpool_backward, global_maxpool_forward, relu_backward, relu_forward, ConvKernel,
    MaxPool, Real, SeqTensor,
};

#[derive(Debug, Clone)]
pub(crate) struct BlockCache<T> {
    pub input: SeqTensor<T>,
    pub pre_activation: SeqTensor<T>,
    pub activation: SeqTensor<T>,
}

/// Intermediates of one forward pass, consumed by the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T = f64> {
    pub(crate) stamp: u64,
    pub(crate) input: SeqTensor<T>,
    pub(crate) blocks: Vec<BlockCache<T>>,
    pub(crate) pool: MaxPool<T>,
    pub(crate) trunk_len: usize,
    pub(crate) pooled: Vec<T>,
    pub(crate) hidden_pre: Vec<T>,
    pub(crate) hidden: Vec<T>,
    pub(crate) logits: Vec<T>,
    pub(crate) probs: Vec<T>,
}

impl<T: Real> ForwardCache<T> {
    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn logits(&self) -> &[T] {
        &self.logits
    }

    /// The 64-d (block width) pooled patient descriptor.
    pub fn pooled(&self) -> &[T] {
        &self.pooled
    }

    pub fn len(&self) -> usize {
        self.input.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input.is_empty()
    }

    /// True when both passes took the same piecewise-linear branch: every
    /// ReLU input has the same sign and every pooled channel the same argmax.
    /// Within one regime the network is smooth in its parameters.
    pub(crate) fn same_regime(&self, other: &Self) -> bool {
        let signs = |a: &[T], b: &[T]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (*x > T::zero()) == (*y > T::zero()));
        self.pool.argmax == other.pool.argmax
            && signs(&self.hidden_pre, &other.hidden_pre)
            && self.blocks.len() == other.blocks.len()
            && self
                .blocks
                .iter()
                .zip(&other.blocks)
                .all(|(a, b)| signs(a.pre_activation.data(), b.pre_activation.data()))
    }
}

fn kernel<'a, T: Real>(params: &'a [T], slot: &ConvSlot) -> Result<ConvKernel<'a, T>> {
    ConvKernel::new(slot.k, slot.cin, slot.cout, &params[slot.weights.clone()])
}

fn conv<T: Real>(
    params: &[T],
    slot: &ConvSlot,
    input: &SeqTensor<T>,
    dilation: usize,
) -> Result<SeqTensor<T>> {
    conv1d_forward(input, &kernel(params, slot)?, &params[slot.bias.clone()], dilation)
}

fn dense<T: Real>(params: &[T], slot: &DenseSlot, input: &[T]) -> Result<Vec<T>> {
    dense_forward(input, &params[slot.weights.clone()], &params[slot.bias.clone()])
}

pub(crate) fn forward<T: Real>(
    arch: &MsNetArch,
    layout: &ParamLayout,
    params: &[T],
    input: SeqTensor<T>,
    stamp: u64,
) -> Result<ForwardCache<T>> {
    if params.len() != layout.total {
        return Err(shape_err("parameter vector", layout.total, params.len()));
    }
    if input.channels() != arch.input_channels {
        return Err(crate::Error::FeatureDim {
            expected: arch.input_channels,
            actual: input.channels(),
        });
    }

    let mut x = conv(params, &layout.input, &input, 1)?;
    let mut blocks = Vec::with_capacity(layout.blocks.len());
    for b in &layout.blocks {
        let pre = conv(params, &b.dilated, &x, b.dilation)?;
        let act = relu_forward(&pre);
        let mut out = conv(params, &b.pointwise, &act, 1)?;
        out.add_assign(&x);
        blocks.push(BlockCache {
            input: std::mem::replace(&mut x, out),
            pre_activation: pre,
            activation: act,
        });
    }

    let pool = global_maxpool_forward(&x)?;
    let pooled = pool.values.clone();
    let hidden_pre = dense(params, &layout.hidden, &pooled)?;
    let hidden: Vec<T> = hidden_pre.iter().map(|v| v.max(T::zero())).collect();
    let logits = dense(params, &layout.output, &hidden)?;
    let probs = softmax(&logits);

    Ok(ForwardCache {
        stamp,
        trunk_len: x.len(),
        input,
        blocks,
        pool,
        pooled,
        hidden_pre,
        hidden,
        logits,
        probs,
    })
}

/// Gradient of the loss with respect to every parameter, given the gradient
/// with respect to the logits.
pub(crate) fn backward<T: Real>(
    layout: &ParamLayout,
    params: &[T],
    cache: &ForwardCache<T>,
    d_logits: &[T],
) -> Result<Vec<T>> {
    if d_logits.len() != layout.output.n_out {
        return Err(shape_err("dLoss/dLogits", layout.output.n_out, d_logits.len()));
    }
    let mut grads = vec![T::zero(); layout.total];

    let (out, hid) = (&layout.output, &layout.hidden);
    let d_hidden = {
        let (dw, db) = split_two(&mut grads, out.weights.clone(), out.bias.clone());
        dense_backward_into(&cache.hidden, &params[out.weights.clone()], d_logits, dw, db)?
    };
    let d_hidden_pre: Vec<T> = d_hidden
        .iter()
        .zip(&cache.hidden_pre)
        .map(|(&g, &z)| if z > T::zero() { g } else { T::zero() })
        .collect();
    let d_pooled = {
        let (dw, db) = split_two(&mut grads, hid.weights.clone(), hid.bias.clone());
        dense_backward_into(&cache.pooled, &params[hid.weights.clone()], &d_hidden_pre, dw, db)?
    };

    let mut d_x = global_maxpool_backward(&cache.pool.argmax, &d_pooled, cache.trunk_len)?;

    for (b, bc) in layout.blocks.iter().zip(&cache.blocks).rev() {
        // out = x + pointwise(relu(dilated(x))): the residual path passes d_x through.
        let mut d_act = SeqTensor::zeros(d_x.len(), d_x.channels())?;
        {
            let s = &b.pointwise;
            let (dw, db) = split_two(&mut grads, s.weights.clone(), s.bias.clone());
            conv1d_backward_into(
                &bc.activation,
                &kernel(params, s)?,
                1,
                &d_x,
                Some(&mut d_act),
                dw,
                db,
            )?;
        }
        let d_pre = relu_backward(&bc.pre_activation, &d_act)?;
        {
            let s = &b.dilated;
            let (dw, db) = split_two(&mut grads, s.weights.clone(), s.bias.clone());
            conv1d_backward_into(
                &bc.input,
                &kernel(params, s)?,
                b.dilation,
                &d_pre,
                Some(&mut d_x),
                dw,
                db,
            )?;
        }
    }

    let s = &layout.input;
    let (dw, db) = split_two(&mut grads, s.weights.clone(), s.bias.clone());
    conv1d_backward_into(&cache.input, &kernel(params, s)?, 1, &d_x, None, dw, db)?;
    Ok(grads)
}

/// Two disjoint mutable sub-slices; `a` must end where `b` starts.
fn split_two<T>(
    v: &mut [T],
    a: std::ops::Range<usize>,
    b: std::ops::Range<usize>,
) -> (&mut [T], &mut [T]) {
    debug_assert_eq!(a.end, b.start);
    let (left, right) = v[a.start..b.end].split_at_mut(a.len());
    (left, right)
}
