//! Acceptance suite. Prints one line per criterion and exits non-zero when
//! any criterion fails.
//!
//! The desk-scale ablation criterion needs CIFAR-10 and hours of CPU time.
//! It runs only when `CIFAR10_DIR` is set and `--include-ignored` (or
//! `--ignored`) is passed:
//!
//! ```text
//! CIFAR10_DIR=/data/cifar-10-batches-bin cargo test --release -p featspace-cli \
//!     --test acceptance -- --include-ignored
//! ```

use std::env;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use featspace::analyzer::{audit_reduction, count_params, receptive_field, rf_chain, LintRule};
use featspace::data::{
    encode_cifar, load_cifar_batch, load_cifar_dir, make_sampler, parse_cifar, preprocess_eval,
    synthetic_images, write_cifar_batch, Balancing, LabeledImage, CLASSES, DATASET_ENV, RECORD_PIXELS,
    TEST_FILE, TRAIN_FILES,
};
use featspace::infoloss::{
    gaussian_mutual_info, retention_curve, svd_project, DMatrix, GaussianModel, JointGaussian,
};
use featspace::netspec::{builtin_design, parse_spec, BlockKind, NetSpec};
use featspace::optim::{DecayPolicy, PolicyKind};
use featspace::verify;
use featspace_cli::ablate::{ablation, AblationName, AblationOptions, AblationRow};
use featspace_cli::dataset::DataSource;
use featspace_cli::runfile::Scale;
use featspace_cli::{run, Cli};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    /// Prerequisites are missing.
    Blocked(String),
    /// Skipped unless requested.
    NotRun(String),
}

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// 1 ---------------------------------------------------------------------

/// Published totals in thousands.
const PUBLISHED_K: [(&str, f64); 5] = [
    ("design1", 20173.0),
    ("design2", 20173.0),
    ("design3", 20025.0),
    ("design1_conv", 20948.0),
    ("design4", 21573.0),
];

fn param_counts() -> Check {
    let start = Instant::now();
    let mut parts = Vec::new();
    for (name, want) in PUBLISHED_K {
        let got = count_params(&builtin_design(name).map_err(e2s)?).map_err(e2s)?.total as f64 / 1000.0;
        let dev = (got - want).abs() / want;
        ensure(dev <= 0.01, || format!("{name}: {got:.1}K vs {want}K ({:.2}%)", 100.0 * dev))?;
        parts.push(format!("{name} {got:.0}K ({:+.2}%)", 100.0 * (got - want) / want));
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("{} in {elapsed:.1?}", parts.join(", ")))
}

// 2 ---------------------------------------------------------------------

/// `r = 1 + Σ (k_i − 1)·Π_{j<i} s_j`, `jump = Π s`, written out directly.
fn unrolled_rf(layers: &[(usize, usize)]) -> (usize, usize) {
    let mut r = 1;
    for i in 0..layers.len() {
        let mut prod = 1;
        for layer in &layers[..i] {
            prod *= layer.1;
        }
        r += (layers[i].0 - 1) * prod;
    }
    (r, layers.iter().map(|l| l.1).product())
}

fn receptive_fields() -> Check {
    let single = rf_chain(&[(3, 1)]);
    ensure(single.last().map(|r| r.r) == Some(3), || format!("single conv3x3: {single:?}"))?;
    let four = rf_chain(&[(3, 1); 4]);
    ensure(four.last().map(|r| r.r) == Some(9), || format!("4 x conv3x3: {four:?}"))?;
    let spec = parse_spec("input: 32 x 32 x 3\na: 4 x conv3x3, 1, 8\nout: 1 x conv1x1, 1, 10").map_err(e2s)?;
    let rfs = receptive_field(&spec).map_err(e2s)?;
    ensure(rfs[0].r == 9, || format!("spec 4 x conv3x3: {}", rfs[0].r))?;

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..100 {
        let len = rng.random_range(1..=12);
        let layers: Vec<(usize, usize)> = (0..len)
            .map(|_| (rng.random_range(1..=7), rng.random_range(1..=3)))
            .collect();
        let chain = rf_chain(&layers);
        for i in 0..len {
            let (r, j) = unrolled_rf(&layers[..=i]);
            ensure(chain[i].r == r && chain[i].j == j, || {
                format!("chain {case} {layers:?} prefix {i}: got ({}, {}) want ({r}, {j})", chain[i].r, chain[i].j)
            })?;
            let prev_j = if i == 0 { 1 } else { chain[i - 1].j };
            ensure(chain[i].j == prev_j * layers[i].1, || format!("chain {case}: jump does not multiply"))?;
        }
    }
    Ok("conv3x3 -> 3, 4 x conv3x3 -> 9, 100 random chains match the unrolled sum".into())
}

// 3 ---------------------------------------------------------------------

fn gradients() -> Check {
    let start = Instant::now();
    let cases = verify::all_cases(20).map_err(e2s)?;
    let elapsed = start.elapsed();
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for c in &cases {
        worst = worst.max(c.max_rel_error);
        failures.extend(c.failures.iter().map(|f| format!("{}: {f}", c.name)));
    }
    ensure(failures.is_empty(), || failures.join("; "))?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    let checks: usize = cases.iter().map(|c| c.checks).sum();
    Ok(format!(
        "{} cases, {checks} gradient tensors, worst rel error {worst:.2e} < 1e-4, {elapsed:.1?}",
        cases.len()
    ))
}

// 4 ---------------------------------------------------------------------

fn random_psd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::<f64>::from_fn(n, n + 2, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() / (n + 2) as f64 + DMatrix::identity(n, n) * 1e-3
}

fn gaussian_mi() -> Check {
    for rho in [0.0, 0.3, -0.3, 0.9, -0.9] {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
        let mi = gaussian_mutual_info(&JointGaussian::from_joint_cov(&cov, 1).map_err(e2s)?).map_err(e2s)?;
        let want = -0.5 * (1.0 - rho * rho).ln();
        ensure((mi.nats - want).abs() <= 1e-9, || format!("rho {rho}: {} vs {want}", mi.nats))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..100 {
        let (dx, dy) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let joint = JointGaussian::from_joint_cov(&random_psd(dx + dy, &mut rng), dx).map_err(e2s)?;
        let a = gaussian_mutual_info(&joint).map_err(e2s)?.nats;
        let b = gaussian_mutual_info(&joint.swapped()).map_err(e2s)?.nats;
        ensure((a - b).abs() <= 1e-9 * a.abs().max(1.0), || format!("case {case}: I(X;Y)={a} I(Y;X)={b}"))?;
        ensure(a >= -1e-12, || format!("case {case}: negative MI {a}"))?;

        let x = GaussianModel::centered(joint.x().cov().clone()).map_err(e2s)?;
        let y = GaussianModel::centered(joint.y().cov().clone()).map_err(e2s)?;
        let indep = JointGaussian::new(x, y, DMatrix::zeros(dx, dy)).map_err(e2s)?;
        let z = gaussian_mutual_info(&indep).map_err(e2s)?.nats;
        ensure(z.abs() <= 1e-9, || format!("case {case}: independent MI {z}"))?;
    }
    Ok("rho sweep within 1e-9 of -ln(1-rho^2)/2; symmetry and independence on 100 random joints".into())
}

// 5 ---------------------------------------------------------------------

fn direct_lr(p: &DecayPolicy, iter: u64) -> f64 {
    let t = iter as f64;
    match p.kind {
        PolicyKind::Fixed => p.c,
        PolicyKind::Exponential => p.lambda0 * (t * p.gamma.ln()).exp(),
        PolicyKind::Step => p.lambda0 * p.gamma.powi((iter / p.step) as i32),
        PolicyKind::Inverse => p.lambda0 / (1.0 + p.gamma * t).powf(p.c),
        PolicyKind::Poly => p.lambda0 * ((p.max_iter as f64 - t) / p.max_iter as f64).powf(p.c),
        PolicyKind::Sigmoid => p.lambda0 / (1.0 + (t - p.step as f64 - p.gamma).exp()),
    }
}

fn random_policy(kind: PolicyKind, rng: &mut ChaCha8Rng) -> DecayPolicy {
    let l0 = rng.random_range(1e-3..1.0);
    match kind {
        PolicyKind::Fixed => DecayPolicy::fixed(rng.random_range(1e-4..1.0)),
        PolicyKind::Exponential => DecayPolicy::exponential(l0, rng.random_range(0.9..1.0)),
        PolicyKind::Step => DecayPolicy::step(l0, rng.random_range(0.01..1.0), rng.random_range(1..500)),
        PolicyKind::Inverse => DecayPolicy::inverse(l0, rng.random_range(1e-4..1.0), rng.random_range(0.1..2.0)),
        PolicyKind::Poly => DecayPolicy::poly(l0, rng.random_range(0.1..3.0), rng.random_range(1..10_000)),
        PolicyKind::Sigmoid => DecayPolicy::sigmoid(l0, rng.random_range(-5.0..5.0), rng.random_range(1..1000)),
    }
}

fn max_iter_for(p: &DecayPolicy) -> u64 {
    match p.kind {
        PolicyKind::Poly => p.max_iter,
        PolicyKind::Sigmoid => 3 * p.step,
        _ => 5000,
    }
}

fn decay_policies() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for kind in PolicyKind::ALL {
        for point in 0..1000 {
            let p = random_policy(kind, &mut rng);
            let it = rng.random_range(0..=max_iter_for(&p));
            let (got, want) = (p.lr_at(it), direct_lr(&p, it));
            let err = (got - want).abs() / want.abs().max(1.0);
            worst = worst.max(err);
            ensure(err <= 1e-12, || format!("{} point {point} {p:?} iter {it}: {got} vs {want}", kind.name()))?;
        }
        if kind == PolicyKind::Sigmoid {
            continue;
        }
        for case in 0..50 {
            let p = random_policy(kind, &mut rng);
            let mut prev = p.lr_at(0);
            for it in 1..=max_iter_for(&p).min(3000) {
                let lr = p.lr_at(it);
                let ok = if kind == PolicyKind::Fixed { lr == prev } else { lr <= prev };
                ensure(ok, || format!("{} case {case}: lr rose at {it}: {prev} -> {lr}", kind.name()))?;
                prev = lr;
            }
        }
    }
    Ok(format!("6 policies x 1000 points, worst rel error {worst:.1e}; monotone where stated"))
}

// 6 ---------------------------------------------------------------------

/// Cyclic Jacobi eigenvalues of a symmetric matrix.
fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| m[(i, j)]).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

fn svd_retention() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for n in [1usize, 2, 3, 5, 8, 13, 21, 32] {
        for rep in 0..5 {
            // Every other matrix is rank deficient.
            let k = if rep % 2 == 0 { n + 2 } else { n.div_ceil(2) };
            let a = DMatrix::<f64>::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0));
            let m = &a * a.transpose();
            let ev = jacobi_eigenvalues(&m);
            let trace: f64 = ev.iter().map(|v| v.max(0.0)).sum();
            let curve = retention_curve(&m).map_err(e2s)?;
            let mut acc = 0.0;
            for d in 1..=n {
                acc += ev[d - 1].max(0.0);
                let want = acc / trace;
                worst = worst.max((curve[d - 1] - want).abs());
                ensure((curve[d - 1] - want).abs() <= 1e-9, || {
                    format!("n {n} rep {rep} d {d}: {} vs {want}", curve[d - 1])
                })?;
                if d > 1 {
                    ensure(curve[d - 1] >= curve[d - 2], || format!("n {n} rep {rep}: not monotone at {d}"))?;
                }
            }
            let mid = n.div_ceil(2);
            let proj = svd_project(&m, mid).map_err(e2s)?;
            ensure((proj.retention - curve[mid - 1]).abs() <= 1e-12, || format!("n {n}: projection retention"))?;
            count += 1;
        }
    }
    Ok(format!("{count} PSD matrices up to 32x32, worst deviation {worst:.1e} from Jacobi; monotone in d"))
}

// 7 ---------------------------------------------------------------------

/// The five directional comparisons: (ablation, better row, worse row).
const COMPARISONS: [(AblationName, usize, usize); 5] = [
    (AblationName::ConvVsPool, 0, 1),
    (AblationName::Designs, 0, 1),
    (AblationName::LrPolicy, 0, 1),
    (AblationName::Regularization, 0, 1),
    (AblationName::ReductionRate, 0, 1),
];

const MIN_RUN_ACC: f64 = 0.40;

fn desk_ablations(requested: bool) -> Outcome {
    let dir = match env::var_os(DATASET_ENV) {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => {
            return Outcome::Blocked(format!(
                "CIFAR-10 is not available; set {DATASET_ENV} and pass --include-ignored"
            ))
        }
    };
    if !requested {
        return Outcome::NotRun("takes hours at small scale; pass --include-ignored".into());
    }
    let out = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-ablations");
    let opts = AblationOptions::new(Scale::Small, vec![1, 2, 3], DataSource::Cifar(dir), out);
    let data = match opts.load_data() {
        Ok(d) => d,
        Err(e) => return Outcome::Blocked(format!("{e:#}")),
    };
    let mut held = 0;
    let mut notes = Vec::new();
    let mut low_runs = Vec::new();
    for (name, better, worse) in COMPARISONS {
        let ab = ablation(name);
        let row = |i: usize| -> Result<AblationRow, String> {
            featspace_cli::ablate::run_variant(&ab.variants[i], &opts, &data).map_err(|e| format!("{e:#}"))
        };
        let (b, w) = match (row(better), row(worse)) {
            (Ok(b), Ok(w)) => (b, w),
            (Err(e), _) | (_, Err(e)) => return Outcome::Fail(format!("{}: {e}", name.name())),
        };
        for r in [&b, &w] {
            if r.failed() {
                return Outcome::Fail(format!("{} {}: {:?}", r.model, r.variant, r.failures));
            }
            for (seed, acc) in r.seeds.iter().zip(&r.test_accs) {
                if acc.is_none_or(|a| a <= MIN_RUN_ACC) {
                    low_runs.push(format!("{} {} seed {seed}: {acc:?}", r.model, r.variant));
                }
            }
        }
        let (mb, mw) = (b.mean_test_acc.unwrap_or(0.0), w.mean_test_acc.unwrap_or(0.0));
        if mb > mw {
            held += 1;
        }
        notes.push(format!(
            "{} {:.1} vs {:.1} {}",
            name.name(),
            100.0 * mb,
            100.0 * mw,
            if mb > mw { "ok" } else { "reversed" }
        ));
    }
    let summary = format!("{held}/5 orderings hold [{}]", notes.join("; "));
    if held >= 4 && low_runs.is_empty() {
        Outcome::Pass(summary)
    } else {
        Outcome::Fail(format!("{summary}; runs at or below 40%: {low_runs:?}"))
    }
}

// 8 ---------------------------------------------------------------------

fn rules(spec: &NetSpec) -> Result<Vec<LintRule>, String> {
    Ok(audit_reduction(spec).map_err(e2s)?.violations().map(|l| l.rule).collect())
}

fn reduction_lints() -> Check {
    for name in ["design1", "design1_conv", "design2", "design3", "design4"] {
        let v = rules(&builtin_design(name).map_err(e2s)?)?;
        ensure(v.is_empty(), || format!("{name}: {v:?}"))?;
    }
    let mut pool_first = builtin_design("design1").map_err(e2s)?;
    pool_first.blocks.swap(0, 1);
    let v = rules(&pool_first)?;
    ensure(v.contains(&LintRule::MinConv), || format!("pool-first mutant: {v:?}"))?;

    let mut deep = builtin_design("design1").map_err(e2s)?;
    let idx = deep.index_of("block5").ok_or("no block5")?;
    if let BlockKind::ConvComposition { repeat, .. } = &mut deep.blocks[idx].kind {
        *repeat = 5;
    }
    let v = rules(&deep)?;
    ensure(v == [LintRule::MaxComp], || format!("5-conv composition: {v:?}"))?;
    Ok("builtins clean; pool-first -> RULE-MIN-CONV; 5-conv composition -> RULE-MAX-COMP".into())
}

// 9 ---------------------------------------------------------------------

fn data_pipeline() -> Check {
    let images = synthetic_images(60, 9);
    let labels: Vec<u8> = images.iter().map(|i| i.label).collect();
    ensure((0..CLASSES as u8).all(|c| labels.contains(&c)), || "synthetic set misses a class".into())?;
    ensure(images == synthetic_images(60, 9), || "synthetic generator not deterministic".into())?;

    let bytes = encode_cifar(&images);
    ensure(parse_cifar(&bytes).map_err(e2s)? == images, || "byte round trip".into())?;
    let dir = tempfile::tempdir().map_err(e2s)?;
    for (k, name) in TRAIN_FILES.iter().enumerate() {
        write_cifar_batch(&dir.path().join(name), &images[k * 10..(k + 1) * 10]).map_err(e2s)?;
    }
    write_cifar_batch(&dir.path().join(TEST_FILE), &images[50..]).map_err(e2s)?;
    ensure(load_cifar_batch(&dir.path().join(TEST_FILE)).map_err(e2s)? == images[50..], || "file round trip".into())?;
    let (train, test) = load_cifar_dir(dir.path()).map_err(e2s)?;
    ensure(train == images[..50] && test == images[50..], || "directory round trip".into())?;

    for img in &images {
        let x = preprocess_eval(img);
        let n = x.len() as f64;
        let mean = x.data().iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = x.data().iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
        ensure(mean.abs() < 1e-5 && (var.sqrt() - 1.0).abs() < 1e-4, || {
            format!("standardized mean {mean} std {}", var.sqrt())
        })?;
    }
    let flat = LabeledImage::new(vec![77; RECORD_PIXELS], 0).map_err(e2s)?;
    ensure(preprocess_eval(&flat).data().iter().all(|&v| v == 0.0), || "constant image not zeroed".into())?;

    // Unequal class sizes: 10 classes with 5..=50 samples each.
    let labels: Vec<usize> = (0..10).flat_map(|c| std::iter::repeat_n(c, 5 + 5 * c)).collect();
    let sampler = make_sampler(&labels, Balancing::Stratified, 20, 3).map_err(e2s)?;
    for epoch in 0..3 {
        for (b, batch) in sampler.epoch(epoch).iter().enumerate() {
            let mut counts = [0usize; 10];
            for &i in batch {
                counts[labels[i]] += 1;
            }
            ensure(counts.iter().all(|&c| c == 2), || format!("epoch {epoch} batch {b}: {counts:?}"))?;
        }
    }
    Ok("CIFAR byte/file/dir round trips, standardization mean 0 std 1, stratified batches exact, synthetic data".into())
}

// 10 --------------------------------------------------------------------

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(e2s)?;
    let runfile = dir.path().join("run.toml");
    fs::write(
        &runfile,
        "design = \"design1\"\nscale = \"tiny\"\nsynthetic = true\ntrain_images = 96\ntest_images = 32\n\
         [train]\nepochs = 2\nbatch_size = 16\nseed = 7\n",
    )
    .map_err(e2s)?;
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let cli = Cli::from_args([
            "featspace".as_ref(),
            "train".as_ref(),
            runfile.as_os_str(),
            "--deterministic".as_ref(),
            "--output".as_ref(),
            out.as_os_str(),
        ])
        .map_err(|e| format!("{e:#}"))?;
        let code = run(cli, &mut Vec::new()).map_err(|e| format!("{e:#}"))?;
        ensure(code == 0, || format!("exit code {code}"))?;
        outputs.push((
            fs::read(out.join("metrics.csv")).map_err(e2s)?,
            fs::read(out.join("summary.json")).map_err(e2s)?,
        ));
    }
    ensure(outputs[0].0 == outputs[1].0, || "metrics.csv differs between runs".into())?;
    ensure(outputs[0].1 == outputs[1].1, || "summary.json differs between runs".into())?;
    let lines = outputs[0].0.iter().filter(|&&b| b == b'\n').count();
    ensure(lines == 3, || format!("expected header + 2 epochs, got {lines} lines"))?;
    Ok(format!("two runs, byte-identical metrics.csv ({} bytes) and summary.json", outputs[0].0.len()))
}

// -----------------------------------------------------------------------

fn main() -> ExitCode {
    let args: Vec<String> = env::args().skip(1).collect();
    let requested = args.iter().any(|a| a == "--include-ignored" || a == "--ignored");
    let checks: [(u32, &str, Box<dyn Fn() -> Outcome>); 10] = [
        (1, "parameter counts", Box::new(|| lift(param_counts()))),
        (2, "receptive fields", Box::new(|| lift(receptive_fields()))),
        (3, "gradient checks", Box::new(|| lift(gradients()))),
        (4, "gaussian mutual information", Box::new(|| lift(gaussian_mi()))),
        (5, "decay policies", Box::new(|| lift(decay_policies()))),
        (6, "svd retention", Box::new(|| lift(svd_retention()))),
        (7, "desk-scale ablations", Box::new(move || desk_ablations(requested))),
        (8, "reduction lints", Box::new(|| lift(reduction_lints()))),
        (9, "data pipeline", Box::new(|| lift(data_pipeline()))),
        (10, "determinism", Box::new(|| lift(determinism()))),
    ];
    let mut failed = 0;
    for (id, name, check) in &checks {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        let (tag, msg) = match outcome {
            Outcome::Pass(m) => ("PASS", m),
            Outcome::Fail(m) => {
                failed += 1;
                ("FAIL", m)
            }
            Outcome::Blocked(m) => {
                if requested && *id == 7 {
                    failed += 1;
                }
                ("BLOCKED", m)
            }
            Outcome::NotRun(m) => ("NOT RUN", m),
        };
        println!("criterion {id:>2} [{tag}] {name} ({secs:.2}s): {msg}");
    }
    if failed > 0 {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    } else {
        println!("acceptance: ok");
        ExitCode::SUCCESS
    }
}

fn lift(c: Check) -> Outcome {
    match c {
        Ok(m) => Outcome::Pass(m),
        Err(m) => Outcome::Fail(m),
    }
}
