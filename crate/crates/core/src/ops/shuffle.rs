//! Channel permutations applied at the end of the reusable block.
//!
//! The plain group shuffle views the channel axis as `(g, C/g)`, transposes it
//! to `(C/g, g)` and flattens, so that a following grouped convolution sees
//! channels from every group. It always leaves channels `0` and `C - 1` in
//! place. The half-swap variant first exchanges the two channel halves,
//! `c -> (c + C/2) mod C`, and then applies the group shuffle, so no channel
//! keeps feeding the same filters from one reuse to the next.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor4};

/// A channel permutation stored as `source[out_channel] = in_channel`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelShuffle {
    groups: usize,
    source: Vec<usize>,
}

impl ChannelShuffle {
    /// Reshape-transpose shuffle without the half swap.
    pub fn plain(channels: usize, groups: usize) -> Result<Self> {
        if groups == 0 || channels == 0 || channels % groups != 0 {
            return Err(Error::Config(format!(
                "channel shuffle: {channels} channels not divisible by {groups} groups"
            )));
        }
        let per = channels / groups;
        let source = (0..channels).map(|o| (o % groups) * per + o / groups).collect();
        Ok(ChannelShuffle { groups, source })
    }

    /// Half swap followed by the group shuffle.
    pub fn half_swap(channels: usize, groups: usize) -> Result<Self> {
        if channels % 2 != 0 {
            return Err(Error::Config(format!(
                "channel shuffle: half swap needs an even channel count, got {channels}"
            )));
        }
        let plain = Self::plain(channels, groups)?;
        let half = channels / 2;
        let source = plain.source.iter().map(|&s| (s + half) % channels).collect();
        Ok(ChannelShuffle { groups, source })
    }

    pub fn channels(&self) -> usize {
        self.source.len()
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    /// `source()[o]` is the input channel copied to output channel `o`.
    pub fn source(&self) -> &[usize] {
        &self.source
    }

    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.source.len()];
        for (o, &s) in self.source.iter().enumerate() {
            inv[s] = o;
        }
        inv
    }

    pub fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.source.len()];
        for &s in &self.source {
            if s >= seen.len() || std::mem::replace(&mut seen[s], true) {
                return false;
            }
        }
        true
    }

    fn check<T: Scalar>(&self, x: &Tensor4<T>, op: &str) -> Result<()> {
        if x.shape().c != self.source.len() {
            return Err(Error::Shape(format!(
                "{op}: permutation over {} channels applied to {}",
                self.source.len(),
                x.shape()
            )));
        }
        Ok(())
    }

    pub fn forward<T: Scalar>(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        self.check(x, "channel shuffle")?;
        let mut y = x.zeros_like();
        for n in 0..x.shape().n {
            for (o, &s) in self.source.iter().enumerate() {
                y.plane_mut(n, o).copy_from_slice(x.plane(n, s));
            }
        }
        Ok(y)
    }

    /// Applies the inverse permutation to an upstream gradient.
    pub fn backward<T: Scalar>(&self, dy: &Tensor4<T>) -> Result<Tensor4<T>> {
        self.check(dy, "channel shuffle backward")?;
        let mut dx = dy.zeros_like();
        for n in 0..dy.shape().n {
            for (o, &s) in self.source.iter().enumerate() {
                dx.plane_mut(n, s).copy_from_slice(dy.plane(n, o));
            }
        }
        Ok(dx)
    }
}

/// Functional form of [`ChannelShuffle::half_swap`] followed by `forward`.
pub fn channel_shuffle_halfswap<T: Scalar>(x: &Tensor4<T>, groups: usize) -> Result<Tensor4<T>> {
    ChannelShuffle::half_swap(x.shape().c, groups)?.forward(x)
}
