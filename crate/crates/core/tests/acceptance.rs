//! Acceptance suite: runs the twelve criteria in order and prints one
//! `PASS`/`FAIL` line for each. Exits nonzero if any criterion fails.
//!
//! Criteria 7, 8, 10, 11 and 12 share one run on the reference dataset
//! (4 timesteps of 64³, 32 blocks of 16³, both codecs, 20 bounds in
//! [1e-4, 1e-2], odd/even split, desk epochs, seed 2024).

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng as _;

use cqsurrogate::autodiff::{grad_check, Binding, Graph, Tensor, Var};
use cqsurrogate::codec::{compress_roundtrip, huffman, CodecId};
use cqsurrogate::field::{Dims, Manifest, SyntheticSpec};
use cqsurrogate::pipeline::{
    ablation_moe, build_labels, efficiency, evaluate_blocks, evaluate_fields, log_uniform_grid, split, timing_sweep,
    train_backbone, train_heads, write_ablation_csv, BlockSpec, Dataset, LabelTable, SplitSpec, TrainConfig,
};
use cqsurrogate::quality::{
    mape, percentage_error, psnr_from, ssim3d, ssim3d_bruteforce, ssim3d_with_range, SsimParams,
};
use cqsurrogate::rng::rng;
use cqsurrogate::surrogate::{
    load_model, save_model, BackboneConfig, HeadConfig, HeadKind, HeadRows, Metric, PredictionHead, SurrogateModel,
};

const SEED: u64 = 2024;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// 1 ------------------------------------------------------------------------

fn adversarial_block(r: &mut cqsurrogate::rng::Rng, case: usize, n: usize) -> Vec<f32> {
    match case % 8 {
        0 => vec![r.random_range(-1e3..1e3); n],
        1 => {
            let (a, b) = (r.random_range(-5.0..5.0f32), r.random_range(-1.0..1.0f32));
            (0..n).map(|i| a + b * i as f32).collect()
        }
        2 => (0..n).map(|_| r.random_range(-1.0..1.0)).collect(),
        3 => (0..n).map(|_| r.random_range(-1.0..1.0) * 1e-40).collect(),
        4 => (0..n).map(|_| 1e6 + r.random_range(0.0..1.0f32)).collect(),
        5 => (0..n)
            .map(|i| {
                if i % 7 == 0 {
                    r.random_range(-1e4..1e4)
                } else {
                    r.random_range(-1.0..1.0)
                }
            })
            .collect(),
        6 => (0..n)
            .map(|i| ((i as f32) * 0.37).sin() * 3.0 + r.random_range(-0.01..0.01))
            .collect(),
        _ => (0..n)
            .map(|_| {
                if r.random_bool(0.5) {
                    f32::MAX / 4.0
                } else {
                    -f32::MAX / 4.0
                }
            })
            .collect(),
    }
}

fn c1_error_bound() -> Outcome {
    let mut r = rng(1);
    let mut cases = 0;
    for case in 0..1200 {
        let dims = Dims::new(r.random_range(1..=16), r.random_range(1..=16), r.random_range(1..=16));
        let block = adversarial_block(&mut r, case, dims.len());
        let eb = 10f64.powf(r.random_range(-7.0..-0.3));
        for codec in CodecId::ALL {
            let out = compress_roundtrip(codec, dims, &block, eb).map_err(err)?;
            ensure(out.max_abs_error <= out.eb.abs, || {
                format!(
                    "{codec} case {case} dims {dims} eb {eb}: error {} > bound {}",
                    out.max_abs_error, out.eb.abs
                )
            })?;
            cases += 1;
        }
    }
    Ok(format!("{cases} (block, eb, codec) cases within bound"))
}

// 2 ------------------------------------------------------------------------

fn c2_entropy_roundtrip() -> Outcome {
    let mut r = rng(2);
    for i in 0..1000 {
        let n = r.random_range(1..4000);
        let spread = 10f64.powf(r.random_range(0.0..4.5)) as i32;
        let symbols: Vec<i32> = match i % 4 {
            0 => vec![r.random_range(-spread..=spread); n],
            1 => (0..n).map(|_| r.random_range(-spread..=spread)).collect(),
            2 => (0..n)
                .map(|_| (r.random_range(-3.0..3.0f64).powi(3) * spread as f64) as i32)
                .collect(),
            _ => (0..n)
                .map(|_| {
                    if r.random_bool(0.9) {
                        0
                    } else {
                        r.random_range(i32::MIN / 2..i32::MAX / 2)
                    }
                })
                .collect(),
        };
        let bytes = huffman::encode(&symbols).map_err(err)?.to_bytes();
        let (decoded, used) = huffman::decode(&bytes, symbols.len()).map_err(err)?;
        ensure(decoded == symbols && used == bytes.len(), || {
            format!("stream {i} did not round-trip")
        })?;
    }
    Ok("1000 streams decoded exactly".into())
}

// 3 ------------------------------------------------------------------------

fn c3_ssim_oracle() -> Outcome {
    let mut r = rng(3);
    let p = SsimParams::default();
    let mut worst = 0f64;
    for _ in 0..100 {
        let dims = Dims::new(r.random_range(7..=16), r.random_range(7..=16), r.random_range(7..=16));
        let a: Vec<f32> = (0..dims.len()).map(|_| r.random_range(-2.0..2.0)).collect();
        let noise = r.random_range(0.001..1.0f32);
        let b: Vec<f32> = a.iter().map(|v| v + r.random_range(-noise..noise)).collect();
        let l = cqsurrogate::quality::ssim3d(&a, &a, dims, p).map_err(err)?;
        ensure(l == Some(1.0), || "ssim3d(x, x) != 1".into())?;
        let range = a.iter().cloned().fold(f32::NEG_INFINITY, f32::max) as f64
            - a.iter().cloned().fold(f32::INFINITY, f32::min) as f64;
        let fast = ssim3d_with_range(&a, &b, dims, p, range).map_err(err)?;
        let slow = ssim3d_bruteforce(&a, &b, dims, p, range);
        worst = worst.max((fast - slow).abs());
    }
    ensure(worst <= 1e-10, || format!("max deviation {worst:e}"))?;
    Ok(format!("100 pairs, max |sliding - brute force| = {worst:.2e}"))
}

// 4 ------------------------------------------------------------------------

fn c4_metric_identities() -> Outcome {
    let db = psnr_from(1.0, 1e-4).ok_or("psnr undefined")?;
    ensure((db - 40.0).abs() <= 1e-9, || format!("psnr(R=1, MSE=1e-4) = {db}"))?;
    let db = psnr_from(100.0, 1.0).ok_or("psnr undefined")?;
    ensure((db - 40.0).abs() <= 1e-9, || format!("psnr(R=100, MSE=1) = {db}"))?;
    ensure(psnr_from(1.0, 0.0).is_none(), || {
        "psnr with MSE 0 should be undefined".into()
    })?;
    let dims = Dims::cube(9);
    let x: Vec<f32> = (0..dims.len()).map(|i| ((i * 31) % 17) as f32).collect();
    ensure(
        ssim3d(&x, &x, dims, SsimParams::default()).map_err(err)? == Some(1.0),
        || "ssim(x,x) != 1".into(),
    )?;
    ensure(percentage_error(100.0, 90.0).map_err(err)? == 10.0, || {
        "PE(100, 90)".into()
    })?;
    ensure(percentage_error(7.5, 7.5).map_err(err)? == 0.0, || "PE(x, x)".into())?;
    ensure(percentage_error(50.0, 55.0).map_err(err)? == -10.0, || {
        "PE(50, 55)".into()
    })?;
    ensure(percentage_error(0.0, 1.0).is_err(), || "PE(0, _) should fail".into())?;
    ensure(mape(&[(100.0, 90.0), (50.0, 55.0)]).map_err(err)? == 10.0, || {
        "MAPE pair case".into()
    })?;
    ensure(mape(&[(3.0, 3.0), (4.0, 4.0)]).map_err(err)? == 0.0, || {
        "MAPE perfect".into()
    })?;
    ensure(mape(&[(10.0, 5.0)]).map_err(err)? == 50.0, || "MAPE (10, 5)".into())?;
    ensure(mape(&[]).is_err(), || "MAPE of empty set should fail".into())?;
    Ok("PSNR, SSIM, PE and MAPE hand cases exact".into())
}

// 5 ------------------------------------------------------------------------

fn rand_tensor(r: &mut cqsurrogate::rng::Rng, shape: Vec<usize>) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
}

type Build = Box<dyn Fn(&mut Graph<f64>, &[Var]) -> cqsurrogate::Result<Var>>;

fn c5_gradients() -> Outcome {
    let mut r = rng(5);
    let mut lines = Vec::new();
    let mut check = |name: &str, leaves: Vec<Tensor<f64>>, tol: f64, f: Build| -> Result<(), String> {
        let rep = grad_check(&leaves, 11, f).map_err(err)?;
        ensure(rep.max_rel_error < tol, || {
            format!("{name}: max rel error {:.2e} >= {tol:e}", rep.max_rel_error)
        })?;
        lines.push(format!("{name} {:.1e}", rep.max_rel_error));
        Ok(())
    };
    let (a, b) = (rand_tensor(&mut r, vec![4, 6]), rand_tensor(&mut r, vec![4, 6]));
    check(
        "linear",
        vec![
            rand_tensor(&mut r, vec![5, 4]),
            rand_tensor(&mut r, vec![3, 4]),
            rand_tensor(&mut r, vec![3]),
        ],
        1e-6,
        Box::new(|g, v| g.linear(v[0], v[1], v[2])),
    )?;
    for (stride, pad) in [(1, 1), (2, 1), (1, 0), (2, 0)] {
        check(
            &format!("conv3d s{stride}p{pad}"),
            vec![
                rand_tensor(&mut r, vec![2, 2, 5, 5, 5]),
                rand_tensor(&mut r, vec![3, 2, 3, 3, 3]),
                rand_tensor(&mut r, vec![3]),
            ],
            1e-4,
            Box::new(move |g, v| g.conv3d(v[0], v[1], v[2], stride, pad)),
        )?;
    }
    check("relu", vec![a.clone()], 1e-6, Box::new(|g, v| Ok(g.relu(v[0]))))?;
    check("softmax", vec![a.clone()], 1e-6, Box::new(|g, v| g.softmax(v[0])))?;
    check(
        "add",
        vec![a.clone(), b.clone()],
        1e-6,
        Box::new(|g, v| g.add(v[0], v[1])),
    )?;
    check(
        "concat",
        vec![a.clone(), rand_tensor(&mut r, vec![4, 3])],
        1e-6,
        Box::new(|g, v| g.concat(&[v[0], v[1]])),
    )?;
    check(
        "gather",
        vec![a.clone()],
        1e-6,
        Box::new(|g, v| g.gather(v[0], &[2, 0, 2, 3])),
    )?;
    check(
        "row_dot",
        vec![a.clone(), b.clone()],
        1e-6,
        Box::new(|g, v| g.row_dot(v[0], v[1])),
    )?;
    check(
        "global_avg_pool",
        vec![rand_tensor(&mut r, vec![2, 3, 2, 3, 2])],
        1e-6,
        Box::new(|g, v| g.global_avg_pool(v[0])),
    )?;
    check(
        "mse",
        vec![a.clone(), b.clone()],
        1e-6,
        Box::new(|g, v| g.mse(v[0], v[1])),
    )?;
    check(
        "rmse",
        vec![a.clone(), b.clone()],
        1e-6,
        Box::new(|g, v| g.rmse(v[0], v[1])),
    )?;

    let mut cfg = HeadConfig::new(HeadKind::Moe, Metric::Cr);
    cfg.embedder.hidden = [8, 12];
    cfg.embedder.embedding_dim = 6;
    cfg.expert_hidden = 5;
    let head = PredictionHead::new(cfg, 5, &mut r).map_err(err)?;
    let mut leaves: Vec<Tensor<f64>> = head.params().iter().map(|p| p.tensor.cast()).collect();
    let np = leaves.len();
    leaves.push(rand_tensor(&mut r, vec![3, 5]));
    leaves.push(Tensor::new(vec![2, 1], vec![0.2, 0.7]).unwrap());
    let rows = HeadRows::grid(3, 2);
    check(
        "moe head",
        leaves,
        1e-3,
        Box::new(move |g, v| {
            Ok(head
                .forward(g, &Binding(v[..np].to_vec()), v[np], v[np + 1], &rows)?
                .prediction)
        }),
    )?;
    Ok(lines.join(", "))
}

// 6 ------------------------------------------------------------------------

fn c6_moe_properties() -> Outcome {
    let mut r = rng(6);
    let mut head = PredictionHead::new(HeadConfig::new(HeadKind::Moe, Metric::Cr), 64, &mut r).map_err(err)?;
    let feats: Vec<Vec<f32>> = (0..50)
        .map(|_| (0..64).map(|_| r.random_range(-3.0..3.0)).collect())
        .collect();
    let ebs: Vec<f64> = (0..20).map(|_| 10f64.powf(r.random_range(-6.0..0.0))).collect();
    let (_, weights) = head.predict_normalized(&feats, &ebs).map_err(err)?;
    ensure(weights.len() == 1000, || format!("{} weight rows", weights.len()))?;
    let mut worst_sum = 0f64;
    for w in &weights {
        ensure(w.iter().all(|&x| x >= 0.0), || "negative router weight".into())?;
        worst_sum = worst_sum.max((w.iter().sum::<f64>() - 1.0).abs());
    }
    ensure(worst_sum <= 1e-6, || format!("weights sum off by {worst_sum:e}"))?;

    head.tie_experts();
    let (base, _) = head.predict_normalized(&feats[..10], &ebs).map_err(err)?;
    let (w, b) = head.router_params().unwrap();
    let mut worst = 0f64;
    for _ in 0..5 {
        for id in [w, b] {
            for v in head.params_mut().get_mut(id).tensor.data_mut() {
                *v = r.random_range(-5.0..5.0);
            }
        }
        let (out, _) = head.predict_normalized(&feats[..10], &ebs).map_err(err)?;
        for (x, y) in base.iter().zip(&out) {
            worst = worst.max((x - y).abs());
        }
    }
    ensure(worst <= 1e-6, || format!("collapse deviation {worst:e}"))?;
    Ok(format!(
        "1000 inputs, |sum - 1| <= {worst_sum:.1e}; collapse deviation {worst:.1e}"
    ))
}

// Reference run -------------------------------------------------------------

struct Reference {
    dir: PathBuf,
    labels: LabelTable,
    train: Dataset,
    test: Dataset,
    test_labels: LabelTable,
    model: SurrogateModel,
    phase1_hash: String,
    hash_after_heads: String,
    model_path: PathBuf,
}

fn reference_labels(dir: &Path) -> cqsurrogate::Result<LabelTable> {
    let spec = SyntheticSpec::reference(Dims::cube(64), SEED);
    let manifest = cqsurrogate::pipeline::generate_dataset(&spec, 4, dir)?;
    build_labels(
        &manifest,
        &CodecId::ALL,
        &log_uniform_grid(1e-4, 1e-2, 20)?,
        BlockSpec {
            dims: Dims::cube(16),
            count: 32,
        },
        SEED,
    )
}

fn reference_run(dir: &Path) -> cqsurrogate::Result<Reference> {
    let t = Instant::now();
    let labels = reference_labels(dir)?;
    let (train_labels, test_labels) = split(&labels, SplitSpec::OddEven)?;
    let train = Dataset::from_labels(&train_labels)?;
    let test = Dataset::from_labels(&test_labels)?;
    println!(
        "  reference labels: {} rows in {:.1}s",
        labels.rows.len(),
        t.elapsed().as_secs_f64()
    );

    let t = Instant::now();
    let run = train_backbone(&train, BackboneConfig::default(), TrainConfig::backbone(SEED, true))?;
    println!(
        "  phase 1: {} epochs in {:.1}s, loss {:.4} -> {:.4}",
        run.log.losses.len(),
        t.elapsed().as_secs_f64(),
        run.log.first().unwrap_or(f64::NAN),
        run.log.last().unwrap_or(f64::NAN)
    );
    let phase1_hash = run.backbone.params().hash();
    let mut model = SurrogateModel::new(run.backbone, SEED);
    let t = Instant::now();
    train_heads(
        &mut model,
        &train,
        &train.pairs(),
        HeadKind::Moe,
        TrainConfig::head(SEED, true),
    )?;
    println!(
        "  phase 2: {} heads in {:.1}s",
        model.heads.len(),
        t.elapsed().as_secs_f64()
    );
    let hash_after_heads = model.backbone.params().hash();
    let model_path = dir.join("reference.dcqm");
    save_model(&model, &model_path)?;
    Ok(Reference {
        dir: dir.to_path_buf(),
        labels,
        train,
        test,
        test_labels,
        model,
        phase1_hash,
        hash_after_heads,
        model_path,
    })
}

// 7 ------------------------------------------------------------------------

fn c7_two_stage_contract(r: &Reference) -> Outcome {
    ensure(r.phase1_hash == r.hash_after_heads, || {
        "backbone hash changed during phase 2".into()
    })?;
    let loaded = load_model(&r.model_path).map_err(err)?;
    ensure(loaded.backbone.params().hash() == r.phase1_hash, || {
        "loaded backbone hash differs".into()
    })?;
    let blocks = r.test.block_refs();
    let mut compared = 0;
    for &(codec, metric) in r.model.heads.keys() {
        let a = r
            .model
            .predict_blocks(codec, metric, &blocks, &r.test.ebs)
            .map_err(err)?;
        let b = loaded
            .predict_blocks(codec, metric, &blocks, &r.test.ebs)
            .map_err(err)?;
        for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
            ensure(x.to_bits() == y.to_bits(), || {
                format!("({codec}, {metric}) prediction differs after load")
            })?;
            compared += 1;
        }
    }
    Ok(format!(
        "hash {}..., {compared} predictions bit-identical after reload",
        &r.phase1_hash[..12]
    ))
}

// 8 ------------------------------------------------------------------------

fn c8_learnability(r: &Reference) -> Outcome {
    let report = evaluate_blocks(&r.model, &r.test).map_err(err)?;
    ensure(report.rows.len() == 6, || format!("{} report rows", report.rows.len()))?;
    let mut parts = Vec::new();
    let mut failures = Vec::new();
    for row in &report.rows {
        let limit = if row.metric == Metric::Ssim { 10.0 } else { 15.0 };
        parts.push(format!("{}/{} {:.2}%", row.codec, row.metric, row.mape));
        if !(row.mape <= limit) {
            failures.push(format!("{}/{} MAPE {:.2}% > {limit}%", row.codec, row.metric, row.mape));
        }
    }
    let field = evaluate_fields(&r.model, &r.test_labels, SEED).map_err(err)?;
    let field_parts: Vec<String> = field
        .rows
        .iter()
        .map(|row| format!("{}/{} {:.2}%", row.codec, row.metric, row.mape))
        .collect();
    println!("  field-level MAPE (informational): {}", field_parts.join(", "));
    let memo = evaluate_blocks(&r.model, &r.train).map_err(err)?;
    let memo_parts: Vec<String> = memo
        .rows
        .iter()
        .map(|row| format!("{}/{} {:.2}%", row.codec, row.metric, row.mape))
        .collect();
    println!("  train-split MAPE (informational): {}", memo_parts.join(", "));
    if failures.is_empty() {
        Ok(format!("block-level held-out MAPE: {}", parts.join(", ")))
    } else {
        Err(failures.join("; "))
    }
}

// 9 ------------------------------------------------------------------------

fn c9_efficiency(r: &Reference) -> Outcome {
    // Equal, reduced epoch budgets in both arms (5 backbone, 3 head epochs,
    // the desk preset's 100:60 ratio), three repetitions.
    let bb = TrainConfig {
        epochs: 5,
        ..TrainConfig::backbone(SEED, true)
    };
    let head = TrainConfig {
        epochs: 3,
        ..TrainConfig::head(SEED, true)
    };
    let rep = efficiency(&r.train, &BackboneConfig::default(), bb, head, HeadKind::Moe, 3).map_err(err)?;
    let ratio = rep.ratio();
    let detail = format!(
        "two-stage {:?}s vs joint {:?}s, median ratio {ratio:.3}",
        rep.two_stage_s
            .iter()
            .map(|s| (s * 10.0).round() / 10.0)
            .collect::<Vec<_>>(),
        rep.joint_s
            .iter()
            .map(|s| (s * 10.0).round() / 10.0)
            .collect::<Vec<_>>()
    );
    ensure(ratio <= 0.75, || detail.clone())?;
    Ok(detail)
}

// 10 -----------------------------------------------------------------------

fn c10_timing(r: &Reference) -> Outcome {
    let (manifest, base) = Manifest::read(&r.labels.provenance.manifest).map_err(err)?;
    let field = manifest.load(&base, "synthetic", 0).map_err(err)?;
    let grid = log_uniform_grid(1e-4, 1e-2, 20).map_err(err)?;
    let rep = timing_sweep(&field, CodecId::PredEb, &grid, &r.model_path, 32, 5, SEED).map_err(err)?;
    let path = r.dir.join("timing_pred-eb.csv");
    rep.write_csv(std::fs::File::create(&path).map_err(err)?).map_err(err)?;
    let text = std::fs::read_to_string(&path).map_err(err)?;
    ensure(text.lines().count() == 22, || {
        "timing CSV should have a marker, a header and 20 rows".into()
    })?;
    let gt = rep.gt_cumulative();
    let sur = rep.surrogate_cumulative();
    ensure(
        gt.windows(2).all(|w| w[0] <= w[1]) && sur.windows(2).all(|w| w[0] <= w[1]),
        || "cumulative curves not monotone".into(),
    )?;
    let (g, s) = (rep.gt_incremental(), rep.surrogate_incremental());
    let detail = format!(
        "per-eb ground truth {:.2} ms, surrogate {:.3} ms (ratio {:.4})",
        g * 1e3,
        s * 1e3,
        s / g
    );
    ensure(s < g / 5.0, || detail.clone())?;
    Ok(detail)
}

// 11 -----------------------------------------------------------------------

fn c11_ablation(r: &Reference) -> Outcome {
    let rows = ablation_moe(
        Some(&r.model.backbone),
        &r.train,
        &r.test,
        &BackboneConfig::default(),
        TrainConfig::backbone(SEED, true),
        TrainConfig::head(SEED, true),
        &[SEED],
    )
    .map_err(err)?;
    let path = r.dir.join("ablation_moe.csv");
    write_ablation_csv(&rows, std::fs::File::create(&path).map_err(err)?).map_err(err)?;
    let text = std::fs::read_to_string(&path).map_err(err)?;
    let header = text.lines().next().unwrap_or_default().to_owned();
    ensure(header.split(',').count() == 2 + 12, || format!("header {header}"))?;
    ensure(rows.iter().all(|r| r.entries.len() == 6), || {
        "missing (codec, metric) pairs".into()
    })?;
    let cells: Vec<String> = rows[0]
        .entries
        .iter()
        .map(|(c, m, b, moe)| format!("{c}/{m} B {b:.2}% M {moe:.2}%"))
        .collect();
    Ok(cells.join(", "))
}

// 12 -----------------------------------------------------------------------

fn c12_determinism(r: &Reference) -> Outcome {
    // Labels: regenerate the reference table from the same provenance.
    let again = reference_labels(&r.dir.join("rerun")).map_err(err)?;
    ensure(
        again.to_csv_bytes().map_err(err)? == r.labels.to_csv_bytes().map_err(err)?,
        || "label CSV differs on rerun".into(),
    )?;

    // Training and evaluation: a shortened two-stage run, twice.
    let short = |tag: &str| -> cqsurrogate::Result<(Vec<u8>, String)> {
        let run = train_backbone(
            &r.train,
            BackboneConfig::default(),
            TrainConfig {
                epochs: 3,
                ..TrainConfig::backbone(SEED, true)
            },
        )?;
        let mut m = SurrogateModel::new(run.backbone, SEED);
        train_heads(
            &mut m,
            &r.train,
            &r.train.pairs(),
            HeadKind::Moe,
            TrainConfig {
                epochs: 5,
                ..TrainConfig::head(SEED, true)
            },
        )?;
        let path = r.dir.join(format!("det_{tag}.dcqm"));
        save_model(&m, &path)?;
        let report = evaluate_blocks(&load_model(&path)?, &r.test)?.to_json()?;
        Ok((
            std::fs::read(&path).map_err(|e| cqsurrogate::Error::io(&path, e))?,
            report,
        ))
    };
    let (m1, e1) = short("a").map_err(err)?;
    let (m2, e2) = short("b").map_err(err)?;
    ensure(m1 == m2, || "model files differ".into())?;
    ensure(e1 == e2, || "eval reports differ".into())?;
    Ok(format!(
        "labels ({} rows), model file ({} bytes) and eval report byte-identical",
        r.labels.rows.len(),
        m1.len()
    ))
}

fn report(n: usize, name: &str, start: Instant, outcome: Outcome, failed: &mut Vec<usize>) {
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => println!("criterion {n:>2} PASS [{secs:6.1}s] {name}: {detail}"),
        Err(e) => {
            println!("criterion {n:>2} FAIL [{secs:6.1}s] {name}: {e}");
            failed.push(n);
        }
    }
}

fn main() {
    let mut failed = Vec::new();
    let simple: [(usize, &str, fn() -> Outcome); 6] = [
        (1, "error-bound guarantee", c1_error_bound),
        (2, "entropy-coding round trip", c2_entropy_roundtrip),
        (3, "SSIM oracle equivalence", c3_ssim_oracle),
        (4, "metric unit identities", c4_metric_identities),
        (5, "gradient verification", c5_gradients),
        (6, "MoE structural properties", c6_moe_properties),
    ];
    for (n, name, f) in simple {
        let t = Instant::now();
        report(n, name, t, f(), &mut failed);
    }

    let dir = tempfile::tempdir().expect("temp dir");
    let t = Instant::now();
    match reference_run(dir.path()) {
        Ok(r) => {
            println!("  reference run ready in {:.1}s", t.elapsed().as_secs_f64());
            let shared: [(usize, &str, fn(&Reference) -> Outcome); 6] = [
                (7, "two-stage contract", c7_two_stage_contract),
                (8, "end-to-end learnability", c8_learnability),
                (9, "two-stage efficiency", c9_efficiency),
                (10, "timing-sweep shape", c10_timing),
                (11, "MoE ablation harness", c11_ablation),
                (12, "determinism", c12_determinism),
            ];
            for (n, name, f) in shared {
                let t = Instant::now();
                report(n, name, t, f(&r), &mut failed);
            }
        }
        Err(e) => {
            for n in 7..=12 {
                println!("criterion {n:>2} FAIL reference run failed: {e}");
                failed.push(n);
            }
        }
    }

    if failed.is_empty() {
        println!("acceptance: all 12 criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
