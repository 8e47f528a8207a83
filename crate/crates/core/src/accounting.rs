//! Closed-form parameter and FLOP accounting over a [`NetworkSpec`].
//!
//! Nothing here allocates tensors. FLOPs are counted at batch 1 with the
//! following convention:
//!
//! | layer                 | cost                         |
//! |-----------------------|------------------------------|
//! | convolution           | 1 per multiply-accumulate    |
//! | batch norm            | 2 per output element         |
//! | ReLU, shortcut add    | 1 per output element         |
//! | pooling, shuffle, concat, dropout | 0                |
//!
//! Parameters are conv kernel weights (no biases) plus BN `gamma`/`beta`;
//! BN running statistics are state, not parameters.

use std::fmt::Write as _;

use serde::Serialize;

use crate::arch::spec::{NetworkSpec, ReuseMode, StageTail, POINTWISE_GROUPS, STAGE_TAILS};
use crate::tensor::Shape4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    BatchNorm,
    Relu,
    Add,
    Shuffle,
    MaxPool,
    Concat,
    Dropout,
    AvgPool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayerCost {
    pub name: String,
    pub kind: LayerKind,
    /// Parameters first introduced by this row; a shared conv reports its
    /// weights at reuse site 0 and zero afterwards.
    pub params: usize,
    pub flops: u64,
    pub output: [usize; 4],
    /// Parameter-name prefix owning `params`, when nonzero.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub owner: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostReport {
    pub arch: String,
    pub reuse_mode: ReuseMode,
    pub rows: Vec<LayerCost>,
    pub total_params: usize,
    pub conv_params: usize,
    pub bn_params: usize,
    pub flops: u64,
    pub depth: usize,
}

impl CostReport {
    pub fn mflops(&self) -> f64 {
        self.flops as f64 / 1e6
    }

    /// FLOPs spent in convolutions only.
    pub fn conv_flops(&self) -> u64 {
        self.rows.iter().filter(|r| r.kind == LayerKind::Conv).map(|r| r.flops).sum()
    }

    /// Aligned text table followed by a totals line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(4).max(5);
        let _ = writeln!(out, "{}", self.arch);
        let _ = writeln!(
            out,
            "{:<width$}  {:<9}  {:>10}  {:>12}  output",
            "layer", "kind", "params", "flops"
        );
        for r in &self.rows {
            let kind = serde_json::to_value(r.kind).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
            let [n, c, h, w] = r.output;
            let _ = writeln!(
                out,
                "{:<width$}  {:<9}  {:>10}  {:>12}  {n}x{c}x{h}x{w}",
                r.name,
                kind,
                group_thousands(r.params as u64),
                group_thousands(r.flops)
            );
        }
        let _ = writeln!(
            out,
            "totals: {} params {} ({}k), conv params {} ({}k), bn params {}, MFLOPs {:.2}, depth {}",
            self.arch,
            group_thousands(self.total_params as u64),
            ceil_k(self.total_params),
            group_thousands(self.conv_params as u64),
            ceil_k(self.conv_params),
            group_thousands(self.bn_params as u64),
            self.mflops(),
            self.depth
        );
        out
    }

    /// One JSON object per layer, then one `"totals"` record.
    pub fn to_records(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            out.push_str(&serde_json::to_string(r).expect("serializable row"));
            out.push('\n');
        }
        let totals = serde_json::json!({
            "record": "totals",
            "arch": self.arch,
            "reuse_mode": self.reuse_mode,
            "total_params": self.total_params,
            "conv_params": self.conv_params,
            "bn_params": self.bn_params,
            "flops": self.flops,
            "mflops": (self.mflops() * 100.0).round() / 100.0,
            "depth": self.depth,
        });
        out.push_str(&totals.to_string());
        out.push('\n');
        out
    }
}

/// Rounds a count to the nearest thousand, in thousands.
pub fn round_k(count: usize) -> usize {
    (count + 500) / 1000
}

/// Rounds a count up to whole thousands, in thousands. This is the rounding
/// under which the published parameter tables are reproduced cell for cell
/// (148,160 is listed as 149k, 171,200 as 172k).
pub fn ceil_k(count: usize) -> usize {
    count.div_ceil(1000)
}

pub fn group_thousands(v: u64) -> String {
    let s = v.to_string();
    let mut out = String::with_capacity(s.len() + s.len() / 3);
    for (i, ch) in s.chars().enumerate() {
        if i > 0 && (s.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

struct Builder {
    rows: Vec<LayerCost>,
}

impl Builder {
    fn push(&mut self, name: String, kind: LayerKind, params: usize, flops: u64, out: Shape4, owner: Option<String>) {
        self.rows.push(LayerCost {
            name,
            kind,
            params,
            flops,
            output: out.as_array(),
            owner: if params > 0 { owner } else { None },
        });
    }

    /// Conv row: `params = out * in/groups * k * k`, MACs = params * output plane.
    #[allow(clippy::too_many_arguments)]
    fn conv(&mut self, name: String, cin: usize, cout: usize, k: usize, groups: usize, out: Shape4, counted: bool, owner: String) {
        let weights = cout * (cin / groups) * k * k;
        let macs = (weights * out.plane()) as u64;
        self.push(name, LayerKind::Conv, if counted { weights } else { 0 }, macs, out, Some(owner));
    }

    fn bn(&mut self, name: String, out: Shape4) {
        let owner = name.clone();
        self.push(name, LayerKind::BatchNorm, 2 * out.c, 2 * out.len() as u64, out, Some(owner));
    }

    fn elementwise(&mut self, name: String, kind: LayerKind, out: Shape4) {
        self.push(name, kind, 0, out.len() as u64, out, None);
    }

    fn free(&mut self, name: String, kind: LayerKind, out: Shape4) {
        self.push(name, kind, 0, 0, out, None);
    }
}

fn pool_extent(v: usize) -> usize {
    (v + 2 - 3) / 2 + 1
}

/// Full per-layer cost breakdown. `count_params` and `count_flops` are views
/// of the same report.
pub fn cost_report(spec: &NetworkSpec) -> CostReport {
    let w = spec.widths();
    let n = spec.reuse;
    let shared = spec.reuse_mode == ReuseMode::Shared;
    let mut b = Builder { rows: Vec::new() };

    let mut h = (spec.input.height + 2 - 3) / 2 + 1;
    let mut wd = (spec.input.width + 2 - 3) / 2 + 1;
    let stem = Shape4::new(1, w.stem, h, wd);
    b.conv("stem.conv".into(), spec.input.channels, w.stem, 3, 1, stem, true, "stem.conv".into());
    b.bn("stem.bn".into(), stem);
    b.elementwise("stem.relu".into(), LayerKind::Relu, stem);

    let mut channels = w.stem;
    for (bi, (&f, tail)) in w.stages.iter().zip(STAGE_TAILS.iter()).enumerate() {
        debug_assert_eq!(channels, f);
        let wide = Shape4::new(1, 2 * f, h, wd);
        let narrow = Shape4::new(1, f, h, wd);
        for r in 0..n {
            let site = format!("block{bi}.reuse{r}");
            let counted = !shared || r == 0;
            let conv_owner = |role: &str| {
                if shared {
                    format!("block{bi}.{role}")
                } else {
                    format!("{site}.{role}")
                }
            };
            b.conv(format!("{site}.dw"), f, 2 * f, 3, f, wide, counted, conv_owner("dw"));
            b.bn(format!("{site}.bn1"), wide);
            b.conv(format!("{site}.pw"), 2 * f, f, 1, POINTWISE_GROUPS, narrow, counted, conv_owner("pw"));
            b.bn(format!("{site}.bn2"), narrow);
            b.elementwise(format!("{site}.add"), LayerKind::Add, narrow);
            b.elementwise(format!("{site}.relu"), LayerKind::Relu, narrow);
            if r + 1 < n {
                b.free(format!("{site}.shuffle"), LayerKind::Shuffle, narrow);
            }
        }
        channels = f;
        if matches!(tail, StageTail::PoolThenConcat | StageTail::Pool) {
            h = pool_extent(h);
            wd = pool_extent(wd);
            b.free(format!("block{bi}.pool"), LayerKind::MaxPool, Shape4::new(1, channels, h, wd));
        }
        if matches!(tail, StageTail::PoolThenConcat | StageTail::Concat) {
            channels *= 2;
            b.free(format!("block{bi}.concat"), LayerKind::Concat, Shape4::new(1, channels, h, wd));
        }
    }

    let head1 = Shape4::new(1, w.head, h, wd);
    b.conv("head.pw1".into(), channels, w.head, 1, POINTWISE_GROUPS, head1, true, "head.pw1".into());
    b.elementwise("head.relu".into(), LayerKind::Relu, head1);
    b.free("head.dropout".into(), LayerKind::Dropout, head1);
    let head2 = Shape4::new(1, spec.num_classes, h, wd);
    b.conv("head.pw2".into(), w.head, spec.num_classes, 1, 1, head2, true, "head.pw2".into());
    b.free("head.avgpool".into(), LayerKind::AvgPool, Shape4::new(1, spec.num_classes, 1, 1));

    let rows = b.rows;
    let conv_params = rows.iter().filter(|r| r.kind == LayerKind::Conv).map(|r| r.params).sum();
    let bn_params = rows.iter().filter(|r| r.kind == LayerKind::BatchNorm).map(|r| r.params).sum();
    let flops = rows.iter().map(|r| r.flops).sum();
    CostReport {
        arch: spec.name(),
        reuse_mode: spec.reuse_mode,
        total_params: conv_params + bn_params,
        conv_params,
        bn_params,
        flops,
        depth: depth(spec),
        rows,
    }
}

pub fn count_params(spec: &NetworkSpec) -> CostReport {
    cost_report(spec)
}

pub fn count_flops(spec: &NetworkSpec) -> CostReport {
    cost_report(spec)
}

/// Conv layers on the forward path: `1 + 8N + 2`.
pub fn depth(spec: &NetworkSpec) -> usize {
    spec.depth()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_lrunet_1x_cifar10() {
        let r = count_params(&NetworkSpec::cifar10(1, 1.0));
        assert_eq!(r.conv_params, 124_992);
        assert_eq!(r.total_params, 130_880);
        assert_eq!(r.bn_params, 128 + 5_760);
        assert_eq!(r.total_params, r.conv_params + r.bn_params);
        assert_eq!(r.conv_flops(), 3_016_704);
        assert_eq!(r.depth, 11);
    }

    #[test]
    fn shared_conv_params_do_not_grow() {
        let base = count_params(&NetworkSpec::cifar10(1, 1.0)).conv_params;
        for n in 2..=16 {
            assert_eq!(count_params(&NetworkSpec::cifar10(n, 1.0)).conv_params, base);
        }
    }

    #[test]
    fn text_and_records() {
        let r = count_params(&NetworkSpec::cifar10(14, 1.0));
        let text = r.to_text();
        assert!(text.contains("14-LruNet-1x"));
        assert!(text.contains("205,760"));
        assert!(text.contains("124,992"));
        let records = r.to_records();
        let lines: Vec<&str> = records.lines().collect();
        assert_eq!(lines.len(), r.rows.len() + 1);
        let totals: serde_json::Value = serde_json::from_str(lines.last().unwrap()).unwrap();
        assert_eq!(totals["total_params"], 205_760);
        for line in &lines[..lines.len() - 1] {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v["name"].is_string() && v["flops"].is_u64());
        }
    }

    #[test]
    fn thousands() {
        assert_eq!(group_thousands(0), "0");
        assert_eq!(group_thousands(999), "999");
        assert_eq!(group_thousands(1_000), "1,000");
        assert_eq!(group_thousands(1_561_568), "1,561,568");
        assert_eq!(round_k(130_880), 131);
        assert_eq!(round_k(136_640), 137);
        assert_eq!((round_k(148_160), ceil_k(148_160)), (148, 149));
        assert_eq!(ceil_k(124_000), 124);
    }
}
