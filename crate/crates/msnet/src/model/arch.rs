use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::DiagnosisLabel;

/// Trainable-parameter count reported for the published network.
pub const REFERENCE_PARAM_COUNT: usize = 207_683;

/// Hyperparameters of the aggregation network.
///
/// The default is the published configuration: a pointwise 2048→64 input
/// projection, four dilated residual blocks of width 64 with dilations
/// 1, 2, 4, 8, and a 64→32→3 classification head.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MsNetArch {
    pub input_channels: usize,
    pub initial_conv_kernel: usize,
    pub block_count: usize,
    pub block_channels: usize,
    pub block_kernel: usize,
    pub dilations: Vec<usize>,
    pub dense_hidden: usize,
    pub classes: usize,
}

impl Default for MsNetArch {
    fn default() -> Self {
        Self {
            input_channels: 2048,
            initial_conv_kernel: 1,
            block_count: 4,
            block_channels: 64,
            block_kernel: 3,
            dilations: vec![1, 2, 4, 8],
            dense_hidden: 32,
            classes: DiagnosisLabel::COUNT,
        }
    }
}

impl MsNetArch {
    /// `count` blocks with dilations `1, 2, 4, …` and everything else default.
    pub fn with_blocks(count: usize) -> Self {
        Self {
            block_count: count,
            dilations: doubling_dilations(count),
            ..Self::default()
        }
    }

    /// A shrunken variant for gradient checks and doc examples.
    pub fn tiny(input_channels: usize, block_channels: usize) -> Self {
        Self {
            input_channels,
            block_channels,
            dense_hidden: 8,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArch(m));
        if self.input_channels == 0 || self.block_channels == 0 || self.dense_hidden == 0 {
            return bad("channel counts must be positive".into());
        }
        if self.initial_conv_kernel % 2 == 0 {
            return bad(format!(
                "initial_conv_kernel must be odd, got {}",
                self.initial_conv_kernel
            ));
        }
        if self.block_kernel % 2 == 0 {
            return bad(format!("block_kernel must be odd, got {}", self.block_kernel));
        }
        if self.dilations.len() != self.block_count {
            return bad(format!(
                "block_count {} but {} dilations",
                self.block_count,
                self.dilations.len()
            ));
        }
        if self.dilations.contains(&0) {
            return bad("dilations must be >= 1".into());
        }
        if self.classes != DiagnosisLabel::COUNT {
            return bad(format!(
                "classes must be {}, got {}",
                DiagnosisLabel::COUNT,
                self.classes
            ));
        }
        Ok(())
    }

    /// Closed-form number of trainable parameters.
    pub fn param_count(&self) -> usize {
        let c = self.block_channels;
        let init = self.initial_conv_kernel * self.input_channels * c + c;
        let block = (self.block_kernel * c * c + c) + (c * c + c);
        let head = (c * self.dense_hidden + self.dense_hidden)
            + (self.dense_hidden * self.classes + self.classes);
        init + self.block_count * block + head
    }

    /// Number of consecutive slices that can influence one pooled position.
    pub fn receptive_field(&self) -> usize {
        self.initial_conv_kernel
            + self
                .dilations
                .iter()
                .map(|d| (self.block_kernel - 1) * d)
                .sum::<usize>()
    }
}

pub fn doubling_dilations(count: usize) -> Vec<usize> {
    (0..count).map(|i| 1 << i).collect()
}

/// Free-function form of [`MsNetArch::param_count`].
pub fn param_count(arch: &MsNetArch) -> usize {
    arch.param_count()
}

/// Free-function form of [`MsNetArch::receptive_field`].
pub fn receptive_field(arch: &MsNetArch) -> usize {
    arch.receptive_field()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ConvSlot {
    pub k: usize,
    pub cin: usize,
    pub cout: usize,
    pub weights: Range<usize>,
    pub bias: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct DenseSlot {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Range<usize>,
    pub bias: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct BlockSlots {
    pub dilation: usize,
    pub dilated: ConvSlot,
    pub pointwise: ConvSlot,
}

/// Offsets of every layer inside the flat parameter vector.
///
/// Order: input conv (W, b); per block dilated conv (W, b) then pointwise
/// conv (W, b); hidden dense (W, b); output dense (W, b).
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ParamLayout {
    pub input: ConvSlot,
    pub blocks: Vec<BlockSlots>,
    pub hidden: DenseSlot,
    pub output: DenseSlot,
    pub total: usize,
}

struct Cursor(usize);

impl Cursor {
    fn take(&mut self, n: usize) -> Range<usize> {
        let r = self.0..self.0 + n;
        self.0 += n;
        r
    }

    fn conv(&mut self, k: usize, cin: usize, cout: usize) -> ConvSlot {
        ConvSlot {
            k,
            cin,
            cout,
            weights: self.take(k * cin * cout),
            bias: self.take(cout),
        }
    }

    fn dense(&mut self, n_in: usize, n_out: usize) -> DenseSlot {
        DenseSlot {
            n_in,
            n_out,
            weights: self.take(n_in * n_out),
            bias: self.take(n_out),
        }
    }
}

impl ParamLayout {
    pub fn new(arch: &MsNetArch) -> Self {
        let c = arch.block_channels;
        let mut cur = Cursor(0);
        let input = cur.conv(arch.initial_conv_kernel, arch.input_channels, c);
        let blocks = arch
            .dilations
            .iter()
            .map(|&dilation| BlockSlots {
                dilation,
                dilated: cur.conv(arch.block_kernel, c, c),
                pointwise: cur.conv(1, c, c),
            })
            .collect();
        let hidden = cur.dense(c, arch.dense_hidden);
        let output = cur.dense(arch.dense_hidden, arch.classes);
        Self {
            input,
            blocks,
            hidden,
            output,
            total: cur.0,
        }
    }

    /// Every bias range, in layout order.
    pub fn bias_ranges(&self) -> Vec<Range<usize>> {
        let mut v = vec![self.input.bias.clone()];
        for b in &self.blocks {
            v.push(b.dilated.bias.clone());
            v.push(b.pointwise.bias.clone());
        }
        v.push(self.hidden.bias.clone());
        v.push(self.output.bias.clone());
        v
    }
}
