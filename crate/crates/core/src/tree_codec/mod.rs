//! Binary-tree segmentation codec.
//!
//! A length-`M = 2^d0` signal is split into the `2^d` uniform segments of a full
//! depth-`d` binary tree. Each segment is represented by its mean, uniformly
//! quantized to `q_bits`. Sibling segments are merged bottom-up while doing so
//! lowers the Lagrangian cost `squared error + ν · q_bits · leaves`.

mod bitstream;

pub use bitstream::{parse, Bitstream, ParseError, HEADER_LEN, MAGIC};

use std::ops::Range;

use thiserror::Error;

pub const MAX_Q_BITS: u8 = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeCodecError {
    #[error("signal length {0} is not a power of two (>= 2)")]
    NotPowerOfTwo(usize),
    #[error("tree depth {depth} outside 1..={max}")]
    InvalidDepth { depth: u8, max: u8 },
    #[error("q_bits {0} outside 1..={MAX_Q_BITS}")]
    InvalidQBits(u8),
    #[error("Lagrange multiplier must be finite and non-negative, got {0}")]
    InvalidMultiplier(f64),
    #[error("segment {start}..{end} is empty or exceeds signal length {len}")]
    BadInterval { start: usize, end: usize, len: usize },
}

/// Which bottom-up pruning comparison to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PruneRule {
    /// A node becomes a leaf when its leaf cost is strictly below the cost of
    /// the best pruned subtree beneath it. Sweeps every level up to the root and
    /// yields the minimum-cost pruned subtree.
    #[default]
    SubtreeCost,
    /// Only pairs of sibling leaves are compared, and the sweep stops at the
    /// first level without a merge.
    SiblingLeaves,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Leaf {
    pub level: u8,
    pub start: usize,
    pub len: usize,
    /// Quantizer index of the segment mean.
    pub index: u32,
}

impl Leaf {
    pub fn interval(&self) -> Range<usize> {
        self.start..self.start + self.len
    }
}

/// The pruned tree: leaves in left-to-right (pre-order) order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeCode {
    log2_len: u8,
    depth: u8,
    q_bits: u8,
    leaves: Vec<Leaf>,
}

impl TreeCode {
    pub(crate) fn from_parts(log2_len: u8, depth: u8, q_bits: u8, leaves: Vec<Leaf>) -> Self {
        Self {
            log2_len,
            depth,
            q_bits,
            leaves,
        }
    }

    pub fn signal_len(&self) -> usize {
        1 << self.log2_len
    }

    pub fn log2_len(&self) -> u8 {
        self.log2_len
    }

    pub fn depth(&self) -> u8 {
        self.depth
    }

    pub fn q_bits(&self) -> u8 {
        self.q_bits
    }

    pub fn leaves(&self) -> &[Leaf] {
        &self.leaves
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    /// Reported rate: `q_bits · |leaves|`. Tree-shape bits are not counted.
    pub fn rate_bits(&self) -> u64 {
        u64::from(self.q_bits) * self.leaves.len() as u64
    }

    /// Piecewise-constant signal of the dequantized leaf values.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.signal_len());
        for leaf in &self.leaves {
            let value = dequantize(leaf.index, self.q_bits);
            out.extend(std::iter::repeat_n(value, leaf.len));
        }
        out
    }

    pub fn to_bitstream(&self) -> Bitstream {
        bitstream::serialize(self)
    }
}

pub fn segment_mean(w: &[f64], interval: Range<usize>) -> Result<f64, TreeCodecError> {
    if interval.is_empty() || interval.end > w.len() {
        return Err(TreeCodecError::BadInterval {
            start: interval.start,
            end: interval.end,
            len: w.len(),
        });
    }
    let n = interval.len() as f64;
    Ok(w[interval].iter().sum::<f64>() / n)
}

fn levels(q_bits: u8) -> f64 {
    ((1u64 << q_bits) - 1) as f64
}

/// Uniform quantizer on `[0, 1]` with both endpoints representable. Inputs are
/// clamped first; NaN maps to index 0.
pub fn quantize(value: f64, q_bits: u8) -> (u32, f64) {
    debug_assert!((1..=MAX_Q_BITS).contains(&q_bits));
    let top = levels(q_bits);
    let index = (value.clamp(0.0, 1.0) * top).round() as u32;
    (index, dequantize(index, q_bits))
}

pub fn dequantize(index: u32, q_bits: u8) -> f64 {
    f64::from(index) / levels(q_bits)
}

/// Result of one encoder run.
#[derive(Debug, Clone)]
pub struct Encoded {
    pub code: TreeCode,
    pub bitstream: Bitstream,
    pub reconstruction: Vec<f64>,
    /// `Σ (w_k − ŵ^Q)²` over all leaves.
    pub squared_error: f64,
    /// `Σ_leaves (squared error + ν·q_bits)`, accumulated pairwise up the tree.
    pub lagrangian_cost: f64,
    pub nu: f64,
}

/// Encoder settings. `depth: None` uses the finest segmentation, `d = d0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeCodec {
    pub depth: Option<u8>,
    pub q_bits: u8,
    pub rule: PruneRule,
}

impl Default for TreeCodec {
    fn default() -> Self {
        Self {
            depth: None,
            q_bits: 8,
            rule: PruneRule::SubtreeCost,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct NodeStats {
    index: u32,
    squared_error: f64,
    cost: f64,
}

fn node_stats(segment: &[f64], nu: f64, q_bits: u8) -> NodeStats {
    let mean = segment.iter().sum::<f64>() / segment.len() as f64;
    let (index, q) = quantize(mean, q_bits);
    let squared_error: f64 = segment.iter().map(|&x| (x - q) * (x - q)).sum();
    NodeStats {
        index,
        squared_error,
        cost: squared_error + nu * f64::from(q_bits),
    }
}

impl TreeCodec {
    pub fn new(depth: Option<u8>, q_bits: u8) -> Self {
        Self {
            depth,
            q_bits,
            rule: PruneRule::SubtreeCost,
        }
    }

    pub fn with_rule(mut self, rule: PruneRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn encode(&self, w: &[f64], nu: f64) -> Result<Encoded, TreeCodecError> {
        let len = w.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(TreeCodecError::NotPowerOfTwo(len));
        }
        let log2_len = len.trailing_zeros() as u8;
        let depth = self.depth.unwrap_or(log2_len);
        if depth == 0 || depth > log2_len {
            return Err(TreeCodecError::InvalidDepth {
                depth,
                max: log2_len,
            });
        }
        if !(1..=MAX_Q_BITS).contains(&self.q_bits) {
            return Err(TreeCodecError::InvalidQBits(self.q_bits));
        }
        if !(nu >= 0.0 && nu.is_finite()) {
            return Err(TreeCodecError::InvalidMultiplier(nu));
        }

        // stats[h][j]: node j at level h, covering len >> h samples.
        let stats: Vec<Vec<NodeStats>> = (0..=depth)
            .map(|h| {
                w.chunks_exact(len >> h)
                    .map(|seg| node_stats(seg, nu, self.q_bits))
                    .collect()
            })
            .collect();
        let is_leaf = match self.rule {
            PruneRule::SubtreeCost => prune_subtree_cost(&stats, depth),
            PruneRule::SiblingLeaves => prune_sibling_leaves(&stats, depth),
        };

        let mut leaves = Vec::new();
        let mut squared_error = 0.0;
        let lagrangian_cost = collect_leaves(&stats, &is_leaf, 0, 0, len, &mut leaves, &mut squared_error);

        let code = TreeCode::from_parts(log2_len, depth, self.q_bits, leaves);
        let bitstream = code.to_bitstream();
        let reconstruction = code.reconstruct();
        Ok(Encoded {
            code,
            bitstream,
            reconstruction,
            squared_error,
            lagrangian_cost,
            nu,
        })
    }
}

/// Pre-order walk emitting leaves; returns the subtree cost summed pairwise
/// (`cost(left) + cost(right)`), the same association the pruning uses.
fn collect_leaves(
    stats: &[Vec<NodeStats>],
    is_leaf: &[Vec<bool>],
    h: usize,
    j: usize,
    len: usize,
    leaves: &mut Vec<Leaf>,
    squared_error: &mut f64,
) -> f64 {
    let node = &stats[h][j];
    if is_leaf[h][j] {
        let seg = len >> h;
        leaves.push(Leaf {
            level: h as u8,
            start: j * seg,
            len: seg,
            index: node.index,
        });
        *squared_error += node.squared_error;
        node.cost
    } else {
        let left = collect_leaves(stats, is_leaf, h + 1, 2 * j, len, leaves, squared_error);
        let right = collect_leaves(stats, is_leaf, h + 1, 2 * j + 1, len, leaves, squared_error);
        left + right
    }
}

/// Bottom-up dynamic program over subtree costs. Ties keep the children.
fn prune_subtree_cost(stats: &[Vec<NodeStats>], depth: u8) -> Vec<Vec<bool>> {
    let d = depth as usize;
    let mut is_leaf: Vec<Vec<bool>> = stats.iter().map(|lvl| vec![false; lvl.len()]).collect();
    is_leaf[d].fill(true);
    let mut best: Vec<f64> = stats[d].iter().map(|s| s.cost).collect();
    for h in (0..d).rev() {
        best = (0..stats[h].len())
            .map(|j| {
                let children = best[2 * j] + best[2 * j + 1];
                let own = stats[h][j].cost;
                if children > own {
                    is_leaf[h][j] = true;
                    own
                } else {
                    children
                }
            })
            .collect();
    }
    is_leaf
}

/// Literal sibling-leaf merging with early stop.
fn prune_sibling_leaves(stats: &[Vec<NodeStats>], depth: u8) -> Vec<Vec<bool>> {
    let d = depth as usize;
    let mut is_leaf: Vec<Vec<bool>> = stats.iter().map(|lvl| vec![false; lvl.len()]).collect();
    is_leaf[d].fill(true);
    for h in (0..d).rev() {
        let mut merged = false;
        for j in 0..stats[h].len() {
            let (l, r) = (2 * j, 2 * j + 1);
            if is_leaf[h + 1][l]
                && is_leaf[h + 1][r]
                && stats[h + 1][l].cost + stats[h + 1][r].cost > stats[h][j].cost
            {
                is_leaf[h + 1][l] = false;
                is_leaf[h + 1][r] = false;
                is_leaf[h][j] = true;
                merged = true;
            }
        }
        if !merged {
            break;
        }
    }
    // Above the stop level every node stays internal.
    is_leaf
}

pub fn decode(bitstream: &Bitstream) -> Result<Vec<f64>, ParseError> {
    Ok(bitstream.parse()?.reconstruct())
}

#[derive(Debug, Error)]
pub enum TreeBlobError {
    #[error(transparent)]
    Encode(#[from] TreeCodecError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// `θ` is the Lagrange multiplier ν; the rate is `q_bits · |leaves|`.
impl crate::admm::Codec for TreeCodec {
    type Error = TreeBlobError;

    fn compress(&self, signal: &[f64], theta: f64) -> Result<Vec<u8>, Self::Error> {
        Ok(self.encode(signal, theta)?.bitstream.into_bytes())
    }

    fn decompress(&self, blob: &[u8]) -> Result<Vec<f64>, Self::Error> {
        Ok(parse(blob)?.reconstruct())
    }

    fn rate_bits(&self, blob: &[u8]) -> Result<u64, Self::Error> {
        Ok(parse(blob)?.rate_bits())
    }
}
