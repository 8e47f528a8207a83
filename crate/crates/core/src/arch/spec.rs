use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::BatchNormConfig;

/// Base filter counts of the 1x network.
pub const BASE_STEM: usize = 64;
pub const BASE_STAGES: [usize; 4] = [64, 128, 256, 512];
pub const BASE_HEAD: usize = 256;
/// Group count of every grouped pointwise convolution.
pub const POINTWISE_GROUPS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReuseMode {
    /// One conv pair per block applied at every reuse site.
    Shared,
    /// A fresh conv pair per reuse site; same depth and topology.
    Unrolled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

/// What follows a stage's block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StageTail {
    PoolThenConcat,
    Concat,
    Pool,
}

pub const STAGE_TAILS: [StageTail; 4] = [
    StageTail::PoolThenConcat,
    StageTail::PoolThenConcat,
    StageTail::Concat,
    StageTail::Pool,
];

/// Declarative description of one network instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Number of times each block is applied.
    pub reuse: usize,
    /// Width multiplier on every filter count.
    pub width: f64,
    pub num_classes: usize,
    pub input: InputShape,
    pub reuse_mode: ReuseMode,
    pub dropout: f64,
    pub shuffle_groups: usize,
    pub batchnorm: BatchNormConfig,
}

/// Filter counts after applying the width multiplier.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Widths {
    pub stem: usize,
    pub stages: [usize; 4],
    pub head: usize,
}

impl NetworkSpec {
    pub fn new(reuse: usize, width: f64, num_classes: usize, input: InputShape) -> Self {
        NetworkSpec {
            reuse,
            width,
            num_classes,
            input,
            reuse_mode: ReuseMode::Shared,
            dropout: 0.5,
            shuffle_groups: POINTWISE_GROUPS,
            batchnorm: BatchNormConfig::default(),
        }
    }

    pub fn cifar10(reuse: usize, width: f64) -> Self {
        Self::new(reuse, width, 10, InputShape { channels: 3, height: 32, width: 32 })
    }

    /// CIFAR-100 runs use a heavier dropout of 0.7.
    pub fn cifar100(reuse: usize, width: f64) -> Self {
        Self {
            dropout: 0.7,
            ..Self::new(reuse, width, 100, InputShape { channels: 3, height: 32, width: 32 })
        }
    }

    pub fn fashion_mnist(reuse: usize, width: f64) -> Self {
        Self::new(reuse, width, 10, InputShape { channels: 1, height: 28, width: 28 })
    }

    pub fn with_mode(mut self, mode: ReuseMode) -> Self {
        self.reuse_mode = mode;
        self
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout = rate;
        self
    }

    pub fn with_input(mut self, input: InputShape) -> Self {
        self.input = input;
        self
    }

    /// `round(base * width / 8) * 8`, never below 8.
    pub fn scale(&self, base: usize) -> usize {
        let units = (base as f64 * self.width / POINTWISE_GROUPS as f64).round() as usize;
        units.max(1) * POINTWISE_GROUPS
    }

    pub fn widths(&self) -> Widths {
        Widths {
            stem: self.scale(BASE_STEM),
            stages: BASE_STAGES.map(|b| self.scale(b)),
            head: self.scale(BASE_HEAD),
        }
    }

    /// Conv layers on the longest path: stem, two per block application, two in the head.
    pub fn depth(&self) -> usize {
        1 + 2 * BASE_STAGES.len() * self.reuse + 2
    }

    /// `"N-LruNet-αx"`, e.g. `"14-LruNet-1x"`.
    pub fn name(&self) -> String {
        ArchName {
            reuse: self.reuse,
            width: self.width,
        }
        .to_string()
    }

    pub fn validate(&self) -> Result<()> {
        if self.reuse == 0 {
            return Err(Error::Config("reuse count must be at least 1".into()));
        }
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::Config(format!("width multiplier must be positive, got {}", self.width)));
        }
        if self.num_classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {}", self.num_classes)));
        }
        let InputShape { channels, height, width } = self.input;
        if channels == 0 || height < 16 || width < 16 {
            return Err(Error::Config(format!(
                "input must have channels >= 1 and spatial extents >= 16, got {channels}x{height}x{width}"
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout rate must lie in [0,1), got {}", self.dropout)));
        }
        if self.shuffle_groups == 0 {
            return Err(Error::Config("shuffle groups must be positive".into()));
        }
        self.batchnorm.validate()?;
        let w = self.widths();
        for &f in w.stages.iter() {
            if f % self.shuffle_groups != 0 || f % 2 != 0 {
                return Err(Error::Config(format!(
                    "block width {f} must be divisible by 2 and by {} shuffle groups",
                    self.shuffle_groups
                )));
            }
        }
        Ok(())
    }

    /// Spatial extent after the stem and each stage, for one input axis.
    pub fn spatial_chain(&self, input: usize) -> [usize; 5] {
        let stem = (input + 2 - 3) / 2 + 1;
        let pool = |v: usize| (v + 2 - 3) / 2 + 1;
        let mut out = [stem; 5];
        let mut cur = stem;
        for (i, tail) in STAGE_TAILS.iter().enumerate() {
            if matches!(tail, StageTail::PoolThenConcat | StageTail::Pool) {
                cur = pool(cur);
            }
            out[i + 1] = cur;
        }
        out
    }

    /// Spatial size of the map entering the head.
    pub fn final_map(&self) -> (usize, usize) {
        (self.spatial_chain(self.input.height)[4], self.spatial_chain(self.input.width)[4])
    }
}

/// Parsed form of the `"N-LruNet-αx"` naming convention.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArchName {
    pub reuse: usize,
    pub width: f64,
}

impl fmt::Display for ArchName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-LruNet-{}x", self.reuse, self.width)
    }
}

impl FromStr for ArchName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("expected a name like \"14-LruNet-1x\", got {s:?}"));
        let (reuse, rest) = s.split_once('-').ok_or_else(bad)?;
        let width = rest
            .strip_prefix("LruNet-")
            .and_then(|w| w.strip_suffix('x'))
            .ok_or_else(bad)?;
        let reuse: usize = reuse.parse().map_err(|_| bad())?;
        let width: f64 = width.parse().map_err(|_| bad())?;
        if reuse == 0 || !(width > 0.0) {
            return Err(bad());
        }
        Ok(ArchName { reuse, width })
    }
}
