//! Acceptance suite. Each criterion prints one `[PASS]`/`[FAIL]` line; the
//! process exits 1 if any criterion fails.
//!
//! Run with `cargo test -p dcor-embed --test acceptance`.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use dcor_embed::diagnostics::grad_check;
use dcor_embed::distance::{build_laplacians, classical_dcor2, classical_dcov2, quadratic_trace};
use dcor_embed::evaluation::{cv_rmse, kfold_plan, random_projection};
use dcor_embed::linalg::{pinv_psd, psd_order_check, RANK_TOL};
use dcor_embed::solver::{
    cccp_step, gamma_interval, loss_g, mm_step, prescale, run, t_prime_radius, GammaPolicy, Init,
    SolverConfig, UpdateRule, WSchedule,
};
use dcor_embed::{Dataset, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Random `(X, Y, X̂)` triples with n ∈ [5, 30] and p, q, d ∈ [1, 5].
fn instances(count: usize, seed: u64) -> Vec<(Matrix, Matrix, Matrix)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(5..=30);
            let p = rng.random_range(1..=5);
            let q = rng.random_range(1..=5);
            let d = rng.random_range(1..=5);
            (
                gaussian(n, p, &mut rng),
                gaussian(n, q, &mut rng),
                gaussian(n, d, &mut rng),
            )
        })
        .collect()
}

/// `Y = X₁² + X₂ + 0.1·ε` with standard normal features.
fn synthetic(n: usize, p: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = gaussian(n, p, &mut rng);
    let noise = gaussian(n, 1, &mut rng);
    let y: Vec<f64> = (0..n)
        .map(|i| x[(i, 0)].powi(2) + x[(i, 1)] + 0.1 * noise[(i, 0)])
        .collect();
    Dataset::new(x, Matrix::column(&y).unwrap()).unwrap()
}

fn end_to_end_config(seed: u64) -> SolverConfig {
    SolverConfig {
        target_dim: 2,
        update_rule: UpdateRule::Mm,
        w_schedule: WSchedule::DcorPerIteration,
        gamma_policy: GammaPolicy::AutoMidpoint,
        max_iter: 300,
        loss_tol: 0.0,
        seed,
        init: Init::Gaussian,
        rescale: true,
    }
}

fn brute_force_trace(xhat: &Matrix, y: &Matrix) -> f64 {
    // S = ½ J E J over squared response distances, then ½ Σ S_ij ‖x̂_i − x̂_j‖²
    let n = y.rows();
    let sq = |m: &Matrix, i: usize, j: usize| -> f64 {
        m.row(i)
            .iter()
            .zip(m.row(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    };
    let e: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| sq(y, i, j)).collect())
        .collect();
    let row_mean: Vec<f64> = e.iter().map(|r| r.iter().sum::<f64>() / n as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let mut total = 0.0;
    for (i, row) in e.iter().enumerate() {
        for (j, eij) in row.iter().enumerate() {
            let s = 0.5 * (eij - row_mean[i] - row_mean[j] + grand);
            total += s * sq(xhat, i, j);
        }
    }
    0.5 * total
}

fn trace_identity() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0_f64;
    for (_, y, xhat) in instances(100, 1) {
        let pair = build_laplacians(&xhat, &y).unwrap();
        let fast = quadratic_trace(&pair.ly, &xhat).unwrap();
        worst = worst.max(rel_err(fast, brute_force_trace(&xhat, &y)));
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: worst <= 1e-8 && secs < 10.0,
        detail: format!("worst rel err {worst:.2e}, {secs:.2}s (limits 1e-8, 10s)"),
    }
}

fn trace_symmetry() -> Outcome {
    let mut worst = 0.0_f64;
    for (x, y, _) in instances(100, 1) {
        let pair = build_laplacians(&x, &y).unwrap();
        let a = quadratic_trace(&pair.ly, &x).unwrap();
        let b = quadratic_trace(&pair.lx, &y).unwrap();
        worst = worst.max(rel_err(a, b));
    }
    Outcome {
        pass: worst <= 1e-8,
        detail: format!("worst rel err {worst:.2e} (limit 1e-8)"),
    }
}

fn classical_dcor_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut affine_worst = 0.0_f64;
    let mut range_ok = true;
    for _ in 0..100 {
        let n = rng.random_range(3..=40);
        let p = gaussian(n, 1, &mut rng);
        let mut a: f64 = rng.random_range(-5.0..5.0);
        if a.abs() < 0.05 {
            a = 1.0;
        }
        let b: f64 = rng.random_range(-5.0..5.0);
        affine_worst =
            affine_worst.max((classical_dcor2(&p, &p.map(|v| a * v + b)).unwrap() - 1.0).abs());

        let q = gaussian(n, rng.random_range(1..=4), &mut rng);
        let r = classical_dcor2(&gaussian(n, rng.random_range(1..=4), &mut rng), &q).unwrap();
        range_ok &= (0.0..=1.0 + 1e-10).contains(&r);
    }
    let line = Matrix::column(&[0.0, 1.0, 2.0]).unwrap();
    let dcov_err = (classical_dcov2(&line, &line).unwrap() - 360.0 / 729.0).abs();
    Outcome {
        pass: affine_worst <= 1e-8 && range_ok && dcov_err <= 1e-12,
        detail: format!(
            "affine |dCor²−1| ≤ {affine_worst:.2e}, range ok {range_ok}, line dCov² err {dcov_err:.2e}"
        ),
    }
}

fn gradient_contract() -> Outcome {
    let mut worst = 0.0_f64;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for (i, (x, y, xhat)) in instances(20, 4).into_iter().enumerate() {
        let pair = build_laplacians(&x, &y).unwrap();
        let w: f64 = rng.random_range(0.05..1.0);
        worst = worst.max(grad_check(&xhat, &pair, w, 1e-5, i as u64).unwrap());
    }
    Outcome {
        pass: worst <= 1e-5,
        detail: format!("worst rel err {worst:.2e} over 20×20 directions (limit 1e-5)"),
    }
}

fn cccp_monotone() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_rise = f64::NEG_INFINITY;
    let mut violations = 0;
    for _ in 0..25 {
        let n = rng.random_range(10..=40);
        let p = rng.random_range(2..=6);
        let d = rng.random_range(1..=p);
        let x = gaussian(n, p, &mut rng);
        let y = gaussian(n, 1, &mut rng);
        let xs = prescale(&x, gamma_interval(&x, &y).unwrap().midpoint()).unwrap();
        let pair = build_laplacians(&xs, &y).unwrap();
        let lx_pinv = pinv_psd(&pair.lx, RANK_TOL).unwrap();
        let w: f64 = rng.random_range(0.1..1.0);
        // start inside the column space of X
        let mut xhat = xs.matmul(&gaussian(p, d, &mut rng)).unwrap();
        let mut g = loss_g(&xhat, &pair, w).unwrap();
        for _ in 0..50 {
            xhat = cccp_step(&xhat, &pair, w, &lx_pinv).unwrap();
            let next = loss_g(&xhat, &pair, w).unwrap();
            let rise = (next - g) / (1.0 + g.abs());
            worst_rise = worst_rise.max(rise);
            if rise > 1e-8 {
                violations += 1;
            }
            g = next;
        }
    }
    Outcome {
        pass: violations == 0,
        detail: format!(
            "{violations} violating steps, worst relative rise {worst_rise:.2e} (limit 1e-8)"
        ),
    }
}

fn mm_fixed_point() -> Outcome {
    let mut worst = 0.0_f64;
    for (x, _, xhat) in instances(50, 6) {
        // w·L_Y = L_X exactly: Y = X with w = 1, and Y = 2X with w = ¼
        for (c, w) in [(1.0, 1.0), (2.0, 0.25)] {
            let pair = build_laplacians(&x, &x.scale(c)).unwrap();
            let out = mm_step(&xhat, &pair, w).unwrap();
            worst = worst.max(out.sub(&xhat).unwrap().max_abs());
        }
    }
    Outcome {
        pass: worst <= 1e-12,
        detail: format!("max |T(X̂) − X̂| = {worst:.2e} (limit 1e-12)"),
    }
}

fn psd_ordering_bounds_radius() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut passing = 0;
    let mut violations = 0;
    let mut max_radius = f64::NEG_INFINITY;
    for i in 0..200 {
        let n = rng.random_range(5..=30);
        let p = rng.random_range(1..=5);
        let x = gaussian(n, p, &mut rng);
        let y = if i % 2 == 0 {
            let c: f64 = rng.random_range(1.001..1.05);
            x.scale(c)
        } else {
            let q = rng.random_range(1..=5);
            gaussian(n, q, &mut rng)
        };
        let pair = build_laplacians(&x, &y).unwrap();
        let a = pair.ly.sub(&pair.lx).unwrap().scale(2.0);
        let b = Matrix::from_diag(&pair.lx.diag()).scale(8.0);
        if !psd_order_check(&a, &b, 1e-9).unwrap() {
            continue;
        }
        passing += 1;
        let r = t_prime_radius(&pair, i, None).unwrap().value;
        max_radius = max_radius.max(r);
        if r > 1.0 + 1e-6 {
            violations += 1;
        }
    }
    Outcome {
        pass: passing >= 20 && violations == 0,
        detail: format!(
            "{passing} instances pass the PSD ordering, {violations} of them have radius > 1+1e-6 \
             (max radius {max_radius:.6})"
        ),
    }
}

fn gamma_interval_arithmetic() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0_f64;
    let mut lower_ok = true;
    for _ in 0..100 {
        let n = rng.random_range(5..=30);
        let x = gaussian(n, rng.random_range(1..=5), &mut rng);
        let y = gaussian(n, rng.random_range(1..=5), &mut rng);
        let matched = y.scale(x.frobenius_norm() / y.frobenius_norm());
        let g = gamma_interval(&x, &matched).unwrap();
        worst = worst
            .max((g.lo - 0.2_f64.sqrt()).abs())
            .max((g.hi - 1.0).abs());

        let mid = gamma_interval(&x, &y).unwrap().midpoint();
        let tx: f64 = x.as_slice().iter().map(|v| mid * mid * v * v).sum();
        let ty: f64 = y.as_slice().iter().map(|v| v * v).sum();
        lower_ok &= tx <= ty;
    }
    Outcome {
        pass: worst <= 1e-12 && lower_ok,
        detail: format!(
            "endpoint err {worst:.2e} (limit 1e-12), midpoint lower inequality {lower_ok}"
        ),
    }
}

fn decile_means(values: &[f64]) -> (f64, f64) {
    let k = (values.len() / 10).max(1);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    (mean(&values[..k]), mean(&values[values.len() - k..]))
}

fn end_to_end_improvement() -> Outcome {
    let start = Instant::now();
    let mut improved = 0;
    let mut trending = 0;
    let mut gains = Vec::new();
    for seed in 0..10 {
        let ds = synthetic(150, 10, seed);
        let result = run(&ds, &end_to_end_config(seed)).unwrap();
        let series: Vec<f64> = result.trace.iter().map(|r| r.dcor2_lap_norm).collect();
        let last = *series.last().unwrap_or(&result.initial_dcor2);
        if last >= result.initial_dcor2 {
            improved += 1;
        }
        let (first, tail) = decile_means(&series);
        if tail >= first {
            trending += 1;
        }
        gains.push(format!("{:+.3}", last - result.initial_dcor2));
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: improved >= 9 && trending >= 9 && secs < 60.0,
        detail: format!(
            "improved {improved}/10, trending {trending}/10, {secs:.1}s; gains [{}]",
            gains.join(" ")
        ),
    }
}

fn evaluation_protocol() -> Outcome {
    let mut wins = 0;
    let mut pairs = Vec::new();
    for seed in 0..10 {
        let ds = synthetic(150, 10, seed);
        let result = run(&ds, &end_to_end_config(seed)).unwrap();
        let plan = kfold_plan(ds.n(), 5, seed).unwrap();
        let y = ds.y.col(0);
        let ours = cv_rmse("dcor_embedding", &result.embedding, &y, &plan, 5).unwrap();
        let rp = random_projection(&ds.x, 2, seed).unwrap();
        let base = cv_rmse("random_projection", &rp, &y, &plan, 5).unwrap();
        if ours.mean_rmse <= base.mean_rmse {
            wins += 1;
        }
        pairs.push(format!("{:.3}/{:.3}", ours.mean_rmse, base.mean_rmse));
    }
    Outcome {
        pass: wins >= 7,
        detail: format!(
            "embedding ≤ random projection in {wins}/10 seeds; rmse [{}]",
            pairs.join(" ")
        ),
    }
}

fn write_dataset(path: &Path, ds: &Dataset) {
    let mut w = csv::Writer::from_path(path).unwrap();
    let mut header = ds.feature_names.clone();
    header.push("y".into());
    w.write_record(&header).unwrap();
    for i in 0..ds.n() {
        let mut row: Vec<String> = ds.x.row(i).iter().map(|v| format!("{v:e}")).collect();
        row.push(format!("{:e}", ds.y[(i, 0)]));
        w.write_record(&row).unwrap();
    }
    w.flush().unwrap();
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("data.csv");
    write_dataset(&input, &synthetic(60, 5, 11));
    let embed = |tag: &str| -> Vec<Vec<u8>> {
        let out = dir.path().join(format!("{tag}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_dcor-embed"))
            .args(["embed", "--input"])
            .arg(&input)
            .args([
                "--response",
                "y",
                "--dim",
                "2",
                "--iters",
                "40",
                "--seed",
                "9",
                "--out",
            ])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        [".csv", ".csv.trace.json", ".csv.manifest.json"]
            .iter()
            .map(|s| std::fs::read(dir.path().join(format!("{tag}{s}"))).unwrap())
            .collect()
    };
    let first = embed("a");
    let second = embed("b");
    // the manifest names the input, not the output, so it may be compared as is
    let same = first == second;
    Outcome {
        pass: same,
        detail: format!(
            "embedding, trace and manifest byte-identical across two runs: {same} ({} + {} + {} bytes)",
            first[0].len(),
            first[1].len(),
            first[2].len()
        ),
    }
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        (
            "trace equals brute-force weighted distance sum",
            trace_identity,
        ),
        ("covariance trace symmetry", trace_symmetry),
        ("classical dCor properties", classical_dcor_properties),
        ("gradient contract", gradient_contract),
        ("CCCP monotone for fixed w", cccp_monotone),
        ("MM fixed point when w·L_Y = L_X", mm_fixed_point),
        ("PSD ordering implies T′ radius ≤ 1", psd_ordering_bounds_radius),
        ("γ interval arithmetic", gamma_interval_arithmetic),
        ("end-to-end dCor improvement", end_to_end_improvement),
        ("k-NN RMSE versus random projection", evaluation_protocol),
        ("byte-identical reruns", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = check();
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        if !outcome.pass {
            failed += 1;
        }
        println!("[{tag}] {:>2} {name}: {}", i + 1, outcome.detail);
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
