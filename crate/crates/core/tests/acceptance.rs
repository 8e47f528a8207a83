//! Acceptance suite. Prints one `[PASS]`, `[FAIL]` or `[BLOCKED]` line per
//! criterion and fails if any criterion fails. Run with `--nocapture` to see
//! the report.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use lrunet::accounting::{ceil_k, cost_report, round_k};
use lrunet::arch::{Network, NetworkSpec, ReuseMode};
use lrunet::data::{
    load_checkpoint, load_fashion_mnist, parse_cifar10, parse_cifar100, parse_idx_images, parse_idx_labels,
    save_checkpoint, Split,
};
use lrunet::gradcheck::{check_network, check_ops, toy_spec, Fault, GradCheckConfig};
use lrunet::ops::{softmax_cross_entropy, ChannelShuffle};
use lrunet::train::{evaluate, train, AugmentConfig, RunFiles, Schedule, TrainConfig};
use lrunet::{Error, Shape4, Tensor4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Blocked(String),
}

type Check = fn() -> Outcome;

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    ((value - target) / target).abs() <= rel
}

const CIFAR10_REUSE: [usize; 9] = [1, 2, 4, 6, 8, 10, 12, 14, 16];
const CIFAR10_PARAMS_K: [usize; 9] = [131, 137, 149, 160, 172, 183, 195, 206, 218];
const CIFAR10_MFLOPS: [f64; 9] = [3.47, 6.30, 11.97, 17.63, 23.29, 28.95, 34.61, 40.27, 45.93];
const CIFAR100_X2_PARAMS_K: [f64; 9] = [514.0, 525.0, 549.0, 572.0, 595.0, 618.0, 641.0, 664.0, 687.0];
const CIFAR100_X2_MFLOPS: [f64; 9] = [10.44, 19.77, 38.44, 57.10, 75.76, 94.42, 113.08, 131.74, 150.40];
const FASHION_REUSE: [usize; 7] = [1, 2, 4, 6, 8, 10, 12];
const FASHION_PARAMS_K: [usize; 7] = [130, 136, 148, 159, 171, 182, 194];
const FASHION_MFLOPS: [f64; 7] = [2.85, 5.40, 10.50, 15.61, 20.71, 25.81, 30.92];

/// The tables list counts rounded up to whole thousands; nearest rounding is
/// reported alongside for reference.
fn c1_parameter_tables() -> Outcome {
    let t = Instant::now();
    let mut bad = Vec::new();
    let mut nearest_misses = 0;
    let mut cells = 0;
    let mut check = |label: String, count: usize, k: usize| {
        cells += 1;
        nearest_misses += usize::from(round_k(count) != k);
        if ceil_k(count) != k {
            bad.push(format!("{label}: {count} vs {k}k"));
        }
    };
    for (&n, &k) in CIFAR10_REUSE.iter().zip(&CIFAR10_PARAMS_K) {
        let r = cost_report(&NetworkSpec::cifar10(n, 1.0));
        check(format!("cifar10 N={n}"), r.total_params, k);
        check(format!("cifar10 N={n} conv"), r.conv_params, 125);
    }
    for (&n, &k) in FASHION_REUSE.iter().zip(&FASHION_PARAMS_K) {
        let r = cost_report(&NetworkSpec::fashion_mnist(n, 1.0));
        check(format!("fashion N={n}"), r.total_params, k);
        check(format!("fashion N={n} conv"), r.conv_params, 124);
    }
    let elapsed = t.elapsed();
    let ok = bad.is_empty() && elapsed < Duration::from_secs(1);
    verdict(
        ok,
        format!(
            "{cells} cells match rounding up ({nearest_misses} would differ under nearest), {elapsed:.2?} {}",
            bad.join("; ")
        ),
    )
}

fn c2_unrolled() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (n, shared_k, unrolled_k, depth) in [(8, 172, 902, 67), (14, 206, 1562, 115)] {
        let s = NetworkSpec::cifar10(n, 1.0);
        let u = s.clone().with_mode(ReuseMode::Unrolled);
        let (rs, ru) = (cost_report(&s), cost_report(&u));
        let net_depth = Network::<f32>::build(u).unwrap().depth();
        ok &= ceil_k(rs.total_params) == shared_k
            && ceil_k(ru.total_params) == unrolled_k
            && rs.depth == depth
            && ru.depth == depth
            && net_depth == depth;
        parts.push(format!("N={n}: {}k/{}k depth {net_depth}", ceil_k(rs.total_params), ceil_k(ru.total_params)));
    }
    verdict(ok, parts.join(", "))
}

fn c3_width_two() -> Outcome {
    let mut worst = 0.0f64;
    let mut conv = 0;
    for (&n, &k) in CIFAR10_REUSE.iter().zip(&CIFAR100_X2_PARAMS_K) {
        let r = cost_report(&NetworkSpec::cifar100(n, 2.0));
        conv = r.conv_params;
        worst = worst.max(((r.total_params as f64 / 1000.0 - k) / k).abs());
    }
    let conv_err = (conv as f64 / 501_000.0 - 1.0).abs();
    verdict(
        conv_err <= 0.005 && worst <= 0.005,
        format!("conv {conv} ({:.2}% off 501k), worst total {:.2}% off", conv_err * 100.0, worst * 100.0),
    )
}

fn mflops(spec: NetworkSpec) -> f64 {
    cost_report(&spec).mflops()
}

fn c4_flops() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    let series = [
        ("cifar10 1x", (1..=16).map(|n| cost_report(&NetworkSpec::cifar10(n, 1.0)).flops).collect::<Vec<_>>()),
        ("cifar100 2x", (1..=16).map(|n| cost_report(&NetworkSpec::cifar100(n, 2.0)).flops).collect()),
        ("fashion 1x", (1..=16).map(|n| cost_report(&NetworkSpec::fashion_mnist(n, 1.0)).flops).collect()),
    ];
    for (name, f) in &series {
        let step = f[1] - f[0];
        ok &= f.windows(2).all(|w| w[1] - w[0] == step);
        notes.push(format!("{name} +{:.2}/reuse", step as f64 / 1e6));
    }
    let inc1 = (series[0].1[1] - series[0].1[0]) as f64 / 1e6;
    let inc2 = (series[1].1[1] - series[1].1[0]) as f64 / 1e6;
    // The published rows step N by two, so their spacing is twice the per-reuse cost.
    ok &= within(inc1, 2.83, 0.15) && within(2.0 * inc2, 18.66, 0.15);
    let mut worst = 0.0f64;
    for (i, &n) in CIFAR10_REUSE.iter().enumerate() {
        worst = worst.max(((mflops(NetworkSpec::cifar10(n, 1.0)) - CIFAR10_MFLOPS[i]) / CIFAR10_MFLOPS[i]).abs());
        worst = worst.max(((mflops(NetworkSpec::cifar100(n, 2.0)) - CIFAR100_X2_MFLOPS[i]) / CIFAR100_X2_MFLOPS[i]).abs());
    }
    for (i, &n) in FASHION_REUSE.iter().enumerate() {
        worst = worst.max(((mflops(NetworkSpec::fashion_mnist(n, 1.0)) - FASHION_MFLOPS[i]) / FASHION_MFLOPS[i]).abs());
    }
    ok &= worst <= 0.15;
    notes.push(format!("worst cell {:.1}% off", worst * 100.0));
    verdict(ok, notes.join(", "))
}

fn c5_gradients() -> Outcome {
    let t = Instant::now();
    let cfg = GradCheckConfig::default();
    let ops = check_ops(&cfg, Fault::None).unwrap();
    let worst_op = ops.iter().map(|r| r.worst_rel_err).fold(0.0, f64::max);
    let net = check_network(toy_spec(2), 7, &cfg).unwrap();
    let elapsed = t.elapsed();
    verdict(
        ops.iter().all(|r| r.passed()) && net.passed() && elapsed < Duration::from_secs(120),
        format!("{} ops worst {worst_op:.1e}, network {:.1e}, {elapsed:.1?}", ops.len(), net.worst_rel_err),
    )
}

fn c6_reuse_gradient() -> Outcome {
    let spec = toy_spec(3);
    let mut shared = Network::<f64>::new(spec.clone(), 21).unwrap();
    let mut unrolled = Network::<f64>::build(spec.with_mode(ReuseMode::Unrolled)).unwrap();
    let tied = |name: &str| {
        let p: Vec<&str> = name.split('.').collect();
        if p.len() == 4 && (p[2] == "dw" || p[2] == "pw") {
            format!("{}.{}.{}", p[0], p[2], p[3])
        } else {
            name.to_string()
        }
    };
    let names: Vec<String> = unrolled.store().params().map(|(n, _)| n.to_string()).collect();
    for n in &names {
        unrolled.store_mut().get_mut(n).unwrap().value = shared.store().get(&tied(n)).unwrap().value.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = Tensor4::from_vec(Shape4::new(2, 3, 16, 16), (0..1536).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let (_, d) = softmax_cross_entropy(&shared.forward_train(&x).unwrap(), &[1, 8]).unwrap();
    shared.backward(&d).unwrap();
    let (_, d) = softmax_cross_entropy(&unrolled.forward_train(&x).unwrap(), &[1, 8]).unwrap();
    unrolled.backward(&d).unwrap();
    let mut sums: BTreeMap<String, Tensor4<f64>> = BTreeMap::new();
    for (n, p) in unrolled.store().params() {
        match sums.get_mut(&tied(n)) {
            Some(acc) => acc.add_assign(&p.grad).unwrap(),
            None => {
                sums.insert(tied(n), p.grad.clone());
            }
        }
    }
    let worst = shared
        .store()
        .params()
        .map(|(n, p)| p.grad.max_abs_diff(&sums[n]).unwrap())
        .fold(0.0, f64::max);
    verdict(worst < 1e-10, format!("max |shared - sum over sites| = {worst:.1e}"))
}

fn c7_shuffle() -> Outcome {
    let mut ok = true;
    for c in [64, 128, 256, 512] {
        let s = ChannelShuffle::half_swap(c, 8).unwrap();
        let x = Tensor4::from_vec(Shape4::new(1, c, 2, 2), (0..4 * c).map(|v| v as f32 * 0.37).collect()).unwrap();
        let back = s.backward(&s.forward(&x).unwrap()).unwrap();
        ok &= s.is_bijection() && back.data() == x.data() && s.source()[0] == c / 2;
    }
    verdict(ok, "C in {64,128,256,512}, g=8".into())
}

fn trace_shapes(spec: NetworkSpec) -> Vec<(String, [usize; 4])> {
    let i = spec.input;
    let net = Network::<f32>::new(spec, 0).unwrap();
    let x = Tensor4::full(Shape4::new(1, i.channels, i.height, i.width), 0.1).unwrap();
    net.forward_trace(&x)
        .unwrap()
        .into_iter()
        .filter(|e| !e.name.contains(".reuse") || e.name.ends_with(".reuse0"))
        .filter(|e| !e.name.ends_with(".unshuffled"))
        .map(|e| (e.name, e.value.shape().as_array()))
        .collect()
}

fn c8_shapes() -> Outcome {
    let chain = |s: [usize; 3]| -> Vec<[usize; 4]> {
        // stem, F64 block, pool, concat, F128, pool, concat, F256, concat, F512, pool, pw1, pw2, avgpool
        let [a, b, c] = s;
        vec![
            [1, 64, a, a], [1, 64, a, a], [1, 64, b, b], [1, 128, b, b], [1, 128, b, b], [1, 128, c, c],
            [1, 256, c, c], [1, 256, c, c], [1, 512, c, c], [1, 512, c, c], [1, 512, 2, 2], [1, 256, 2, 2],
            [1, 10, 2, 2], [1, 10, 1, 1],
        ]
    };
    let got32: Vec<_> = trace_shapes(NetworkSpec::cifar10(2, 1.0)).into_iter().map(|e| e.1).collect();
    let got28: Vec<_> = trace_shapes(NetworkSpec::fashion_mnist(2, 1.0)).into_iter().map(|e| e.1).collect();
    verdict(
        got32 == chain([16, 8, 4]) && got28 == chain([14, 7, 4]),
        "32x32: 64x16x16 .. 512x2x2 .. 10; 28x28: 64x14x14 .. 512x2x2 .. 10".into(),
    )
}

fn c9a_overfit() -> Outcome {
    let t = Instant::now();
    let set = common::cifar10_set(32, 2024);
    let cfg = TrainConfig {
        batch_size: 32,
        schedule: Schedule::constant(200, 0.05),
        dropout: Some(0.0),
        augment: AugmentConfig::none(),
        max_steps: Some(200),
        seed: 3,
        ..TrainConfig::default()
    };
    let spec = NetworkSpec::cifar10(2, 0.25);
    assert_eq!(spec.widths().stages[0], 16);
    let out = train(&spec, &cfg, &set, None, &RunFiles::default()).unwrap();
    let first_full = out.history.iter().find(|m| m.train_acc == 1.0).map(|m| m.steps);
    let eval_acc = evaluate(&out.network, &set, &out.normalization, 32).unwrap();
    let elapsed = t.elapsed();
    verdict(
        first_full.is_some() && eval_acc == 1.0 && elapsed < Duration::from_secs(300),
        format!(
            "train acc 100% at step {}, eval-mode acc {:.2}% after {} steps, {elapsed:.1?}",
            first_full.map_or("-".into(), |s| s.to_string()),
            eval_acc * 100.0,
            out.steps
        ),
    )
}

fn fashion_dir() -> Option<PathBuf> {
    let root = PathBuf::from(std::env::var_os("LRUNET_DATA")?);
    [root.join("fashion-mnist"), root]
        .into_iter()
        .find(|d| d.join("train-images-idx3-ubyte").exists() || d.join("train-images-idx3-ubyte.gz").exists())
}

fn c9b_fashion_mnist() -> Outcome {
    let Some(dir) = fashion_dir() else {
        return Outcome::Blocked("Fashion-MNIST not found (set LRUNET_DATA to a directory holding its IDX files)".into());
    };
    let (train_set, test_set) = match load_fashion_mnist(&dir) {
        Ok(s) => s,
        Err(e) => return Outcome::Fail(format!("loading {}: {e}", dir.display())),
    };
    let cfg = TrainConfig {
        schedule: Schedule::constant(10, 0.1),
        ..TrainConfig::default()
    };
    let out = train(&NetworkSpec::fashion_mnist(1, 0.5), &cfg, &train_set, Some(&test_set), &RunFiles::default()).unwrap();
    let best = out.history.iter().filter_map(|m| m.val_acc).fold(0.0, f64::max);
    verdict(best >= 0.85, format!("best test accuracy {:.2}% in 10 epochs", best * 100.0))
}

fn c10_data_and_persistence() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    let mut truncated = common::cifar10_bytes(3, 1);
    truncated.truncate(2 * 3073 + 10);
    let e = parse_cifar10(&truncated, Split::Train).unwrap_err();
    ok &= matches!(&e, Error::Format(m) if m.contains("6146"));
    let mut bad_label = common::cifar10_bytes(1, 1);
    bad_label[0] = 11;
    ok &= matches!(parse_cifar10(&bad_label, Split::Train), Err(Error::Data(_)));
    ok &= parse_cifar100(&[0u8; 3075], Split::Train).is_err();
    ok &= matches!(parse_idx_images(&common::idx_labels(&[1])), Err(Error::Format(_)));
    ok &= matches!(parse_idx_labels(&common::idx_images(1, 28, 28, 0)), Err(Error::Format(_)));
    let mut short = common::idx_images(2, 28, 28, 0);
    short.pop();
    ok &= matches!(parse_idx_images(&short), Err(Error::Format(_)));
    notes.push(format!("malformed fixtures rejected: {ok}"));

    let set = common::cifar10_set(24, 5);
    let cfg = TrainConfig {
        batch_size: 8,
        schedule: Schedule::constant(2, 0.05),
        seed: 9,
        ..TrainConfig::default()
    };
    let out = train(&NetworkSpec::cifar10(2, 0.25), &cfg, &set, None, &RunFiles::default()).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a.ckpt"), tmp.path().join("b.ckpt"));
    save_checkpoint(&out.network, &out.normalization, &a).unwrap();
    let (net, norm) = load_checkpoint(&a).unwrap();
    save_checkpoint(&net, &norm, &b).unwrap();
    let identical = std::fs::read(&a).unwrap() == std::fs::read(&b).unwrap();
    let acc0 = evaluate(&out.network, &set, &out.normalization, 8).unwrap();
    let acc1 = evaluate(&net, &set, &norm, 8).unwrap();
    ok &= identical && acc0.to_bits() == acc1.to_bits();
    notes.push(format!("checkpoint bytes identical: {identical}, accuracy {:.2}% == {:.2}%", acc0 * 100.0, acc1 * 100.0));
    verdict(ok, notes.join(", "))
}

#[test]
fn acceptance() {
    let criteria: [(&str, &str, Check); 11] = [
        ("1", "parameter tables", c1_parameter_tables),
        ("2", "unrolled comparison", c2_unrolled),
        ("3", "width-2 CIFAR-100 counts", c3_width_two),
        ("4", "FLOP accounting", c4_flops),
        ("5", "gradient correctness", c5_gradients),
        ("6", "reuse-gradient oracle", c6_reuse_gradient),
        ("7", "shuffle properties", c7_shuffle),
        ("8", "architecture shapes", c8_shapes),
        ("9a", "overfit fixture", c9a_overfit),
        ("9b", "Fashion-MNIST 1-LruNet-0.5x >= 85%", c9b_fashion_mnist),
        ("10", "data and persistence", c10_data_and_persistence),
    ];
    let mut failed = Vec::new();
    for (id, name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::Fail(format!("panicked: {msg}"))
        });
        match outcome {
            Outcome::Pass(d) => println!("[PASS] {id} {name}: {d}"),
            Outcome::Blocked(d) => println!("[BLOCKED] {id} {name}: {d}"),
            Outcome::Fail(d) => {
                println!("[FAIL] {id} {name}: {d}");
                failed.push(id);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
