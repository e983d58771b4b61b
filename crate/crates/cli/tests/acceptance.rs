//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use rug::Float;
use subres::direct::{check_domination, submodel_fisher, Psf, PsfFamily};
use subres::hankel::{factorize, lambda_min_profile};
use subres::measure::STANDARD_GAUSSIAN_VARIANCE;
use subres::scaling::{sweep, DeltaGrid, Evaluator, SweepConfig, SweepPoint};
use subres::spade::{build_spade, mode_probabilities, run_replicates, Measurement, ModeProbabilities, SpadeModel};
use subres::submodel::{purified_score_norm, TiltedSubmodel, Truncation};
use subres::Measure;

const PREC: u32 = 256;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Ordinary least squares of `ln y` on `ln Δ`, kept independent of the library fit.
fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn pairs(points: &[SweepPoint]) -> Vec<(f64, f64)> {
    points.iter().map(|p| (p.delta, p.value)).collect()
}

fn gaussian_q() -> Measure {
    Measure::gaussian_frequency(STANDARD_GAUSSIAN_VARIANCE, PREC).unwrap()
}

fn uniform_shape() -> Measure {
    Measure::uniform(1.0, PREC).unwrap()
}

fn slopes_match(label: &str, theory: impl Fn(usize) -> f64, tol: f64, evaluator: impl Fn(usize) -> Evaluator, grid: DeltaGrid) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for mu in 1..=4 {
        let cfg = SweepConfig::new(uniform_shape(), evaluator(mu)).with_grid(grid.clone());
        let points = sweep(&cfg).unwrap();
        let slope = loglog_slope(&pairs(&points));
        let ok = (slope - theory(mu)).abs() <= tol && points.iter().all(|p| p.value > 0.0);
        pass &= ok;
        parts.push(format!("μ={mu}: {slope:.4} (want {})", theory(mu)));
    }
    outcome(pass, format!("{label} {}", parts.join(", ")))
}

fn quantum_bound_exponents() -> Outcome {
    slopes_match(
        "bound_lower slopes",
        |mu| (2 * (mu / 2)) as f64,
        0.15,
        |mu| Evaluator::QuantumBound {
            mu,
            q: gaussian_q(),
            n_photons: 1.0,
            truncation: Truncation::default(),
        },
        DeltaGrid::geometric(0.01, 0.1, 8).unwrap(),
    )
}

fn purified_score_exponents() -> Outcome {
    slopes_match(
        "⟨Φ̇|Φ̇⟩ slopes",
        |mu| (2 * mu.div_ceil(2)) as f64,
        0.15,
        |mu| Evaluator::PurifiedScore {
            mu,
            q: gaussian_q(),
            truncation: Truncation::default(),
        },
        DeltaGrid::geometric(0.01, 0.1, 8).unwrap(),
    )
}

fn structural_zeros() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut smallest_allowed = f64::INFINITY;
    for mu in 1..=6 {
        let sub = TiltedSubmodel::with_cap(&Measure::uniform(0.1, PREC).unwrap(), mu, 12).unwrap();
        let dl = sub.dot_l(12).unwrap();
        let zero_rows = mu.div_ceil(2);
        for p in 0..=12 {
            let row_max = (0..=p).map(|n| dl[(p, n)].to_f64().abs()).fold(0.0, f64::max);
            if p < zero_rows {
                worst = worst.max(row_max);
            } else if p == zero_rows {
                smallest_allowed = smallest_allowed.min(row_max);
            }
        }
    }
    outcome(
        worst < 1e-25 && smallest_allowed > 1e-25,
        format!("max |L̇_pn| over p < ⌈μ/2⌉: {worst:.3e}; smallest first allowed row: {smallest_allowed:.3e}"),
    )
}

fn cholesky_derivative_oracle() -> Outcome {
    const J: usize = 9;
    let h = 1e-12;
    let mut worst_rel: f64 = 0.0;
    let mut worst_zero: f64 = 0.0;
    for mu in 1..=3 {
        let sub = TiltedSubmodel::with_cap(&Measure::uniform(0.5, PREC).unwrap(), mu, J + 1).unwrap();
        let formula = sub.dot_l(J).unwrap();
        let plus = factorize(&sub.tilted_measure(h).unwrap(), J).unwrap().cholesky.entries;
        let minus = factorize(&sub.tilted_measure(-h).unwrap(), J).unwrap().cholesky.entries;
        for p in 0..=J {
            for n in 0..=p {
                let fd = Float::with_val(PREC, &plus[(p, n)] - &minus[(p, n)]) / (2.0 * h);
                let fd = fd.to_f64();
                let f = formula[(p, n)].to_f64();
                if f.abs() > 1e-40 {
                    worst_rel = worst_rel.max((fd - f).abs() / f.abs());
                } else {
                    worst_zero = worst_zero.max(fd.abs());
                }
            }
        }
    }
    outcome(
        worst_rel < 1e-5 && worst_zero < 1e-20,
        format!("max relative error {worst_rel:.3e}; structural zeros differ by at most {worst_zero:.3e}"),
    )
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn gaussian_spade_constants() -> Outcome {
    let model = build_spade(&gaussian_q(), 5).unwrap();
    let mut worst: f64 = 0.0;
    for n in 0..=5 {
        let r = 1.0 / (4f64.powi(n as i32) * factorial(n));
        let l = factorial(n).sqrt() / 2f64.powi(n as i32);
        worst = worst.max((model.r[n] - r).abs()).max((model.tilde_l_diag(n) - l).abs());
    }
    outcome(worst < 1e-10, format!("max deviation from 1/(4ⁿn!) and √(n!)/2ⁿ: {worst:.3e}"))
}

/// Exact variance of `β̌_order` from the multinomial counts.
fn exact_variance(model: &SpadeModel, probs: &ModeProbabilities, order: usize, m: f64, eps: f64) -> f64 {
    let n = order / 2;
    let big_n = m * eps;
    if order % 2 == 0 {
        let p = eps * probs.pad[n];
        m * p * (1.0 - p) / (model.r[n] * big_n).powi(2)
    } else {
        let (a, b) = (eps * probs.ipad_plus[n], eps * probs.ipad_minus[n]);
        m * (a * (1.0 - a) + b * (1.0 - b) + 2.0 * a * b) / (model.s[n] * big_n).powi(2)
    }
}

fn spade_suite() -> Outcome {
    let (m, eps, reps, seed) = (1e7, 0.01, 1000, 7);
    let model = build_spade(&gaussian_q(), 4).unwrap();
    let p0 = Measure::uniform(0.2, PREC).unwrap();
    let probs = mode_probabilities(&model, &p0).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for measurement in [Measurement::Pad(vec![1]), Measurement::Ipad(0)] {
        let run = run_replicates(&model, &p0, &measurement, m as u64, eps, seed, reps).unwrap();
        let s = &run.summary[0];
        let exact = exact_variance(&model, &probs, s.order, m, eps);
        let ratio = s.empirical_variance / exact;
        let z = (s.mean - s.truth) / (exact / reps as f64).sqrt();
        let ok = z.abs() <= 4.0 && (ratio - 1.0).abs() <= 0.1;
        pass &= ok;
        parts.push(format!("β̌_{}: z = {z:.3}, var ratio = {ratio:.4}", s.order));
    }
    let grid = DeltaGrid::geometric(0.02, 0.2, 8).unwrap();
    for order in 0..=5 {
        let pts: Vec<(f64, f64)> = grid
            .values()
            .iter()
            .map(|&d| {
                let probs = mode_probabilities(&model, &Measure::uniform(d, PREC).unwrap()).unwrap();
                (d, exact_variance(&model, &probs, order, m, eps))
            })
            .collect();
        let slope = loglog_slope(&pts);
        let want = (2 * (order / 2)) as f64;
        let ok = (slope - want).abs() <= 0.1;
        pass &= ok;
        parts.push(format!("order {order} slope {slope:.4} (want {want})"));
    }
    outcome(pass, parts.join("; "))
}

fn direct_suite() -> Outcome {
    let psf = Psf::gaussian(1.0).unwrap();
    let grid = DeltaGrid::geometric(0.02, 0.2, 8).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for mu in 1..=4 {
        let template = TiltedSubmodel::with_cap(&uniform_shape(), mu, mu + 1).unwrap();
        let mut fisher = Vec::new();
        let mut crb = Vec::new();
        for &d in grid.values() {
            let r = submodel_fisher(&psf, &template.at_delta(d).unwrap(), 1.0, false).unwrap();
            fisher.push((d, r.fisher));
            crb.push((d, r.dot_beta * r.dot_beta / r.fisher));
        }
        let (fs, cs) = (loglog_slope(&fisher), loglog_slope(&crb));
        let ok = (fs - 2.0 * mu as f64).abs() <= 0.2 && cs.abs() <= 0.2;
        pass &= ok;
        parts.push(format!("μ={mu}: fisher {fs:.4}, crb {cs:.4}"));
    }
    let n_photons = 1e5;
    for (mu, constant) in [(1usize, 1.0), (2, 2.0)] {
        let sub = TiltedSubmodel::with_cap(&Measure::uniform(0.01, PREC).unwrap(), mu, mu + 1).unwrap();
        let r = submodel_fisher(&psf, &sub, n_photons, false).unwrap();
        let scaled = r.crb * n_photons;
        pass &= (scaled - constant).abs() <= 0.05 * constant;
        parts.push(format!("N·crb(μ={mu}) = {scaled:.5}"));
    }
    let smooth = [
        PsfFamily::Gaussian { sigma: 1.0 },
        PsfFamily::SuperGaussian { d2: 1.0, p: 2 },
        PsfFamily::GeneralizedLorentzian { d2: 1.0, p: 2 },
    ];
    for family in smooth {
        let rep = check_domination(&Psf::new(family).unwrap(), 0.5, 2).unwrap();
        pass &= rep.pass;
        parts.push(format!("{} dominated: {}", rep.family, rep.pass));
    }
    let sinc = check_domination(&Psf::new(PsfFamily::HardAperture { k: 1.0 }).unwrap(), 0.5, 2).unwrap();
    pass &= !sinc.pass;
    parts.push(format!("sinc2 dominated: {}", sinc.pass));
    outcome(pass, parts.join("; "))
}

fn data_processing_inequality() -> Outcome {
    let q = gaussian_q();
    let psf = Psf::matched_to(&q).unwrap();
    let mut pass = true;
    let mut tightest = f64::INFINITY;
    let mut points = 0;
    for mu in 1..=4 {
        let template = TiltedSubmodel::new(&uniform_shape(), mu).unwrap();
        for &d in DeltaGrid::default().values() {
            let sub = template.at_delta(d).unwrap();
            let gram = purified_score_norm(&sub, &q, Truncation::default()).unwrap().gram;
            let fisher = submodel_fisher(&psf, &sub, 1.0, false).unwrap().fisher;
            let slack = 1.0 - fisher / (4.0 * gram);
            pass &= fisher <= 4.0 * gram;
            tightest = tightest.min(slack);
            points += 1;
        }
    }
    outcome(pass, format!("{points} grid points; smallest relative slack 1 − F/(4⟨Φ̇|Φ̇⟩) = {tightest:.3e}"))
}

fn orthonormality_residual(shape: &Measure, j: usize) -> f64 {
    let f = factorize(shape, j).unwrap();
    let prec = shape.prec();
    let values: Vec<Vec<Float>> = shape
        .nodes()
        .iter()
        .map(|x| (0..=j).map(|n| f.basis.eval(n, x)).collect())
        .collect();
    let mut worst: f64 = 0.0;
    for a in 0..=j {
        for b in 0..=a {
            let mut acc = Float::with_val(prec, 0);
            for (w, v) in shape.weights().iter().zip(&values) {
                acc += Float::with_val(prec, &v[a] * &v[b]) * w;
            }
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((acc.to_f64() - target).abs());
        }
    }
    worst
}

fn hankel_numerics() -> Outcome {
    let shapes = [
        uniform_shape(),
        Measure::quadratic(1.0, PREC).unwrap(),
        Measure::truncated_gaussian(1.0, 0.5, PREC).unwrap(),
    ];
    let mut worst: f64 = 0.0;
    for s in &shapes {
        for j in [5, 10, 20, 30] {
            worst = worst.max(orthonormality_residual(s, j));
        }
    }
    let profile = lambda_min_profile(&uniform_shape(), 20).unwrap();
    // G_(1) = [[1, 0], [0, 1/3]] for the uniform law on [−1, 1]
    let first = (profile.values[1] - 1.0 / 3.0).abs() < 1e-14;
    let decreasing = profile.values.windows(2).all(|w| w[1] < w[0]);
    let pass = worst < 1e-10
        && first
        && decreasing
        && profile.strictly_decreasing
        && profile.r_squared > 0.99
        && profile.rate > 0.0
        && profile.rate < 1.0;
    outcome(
        pass,
        format!(
            "max orthonormality residual (J ≤ 30) {worst:.3e}; λ_min strictly decreasing: {decreasing}; r² = {:.6}; rate = {:.6}",
            profile.r_squared, profile.rate
        ),
    )
}

fn run_spade_cli(out: &PathBuf, threads: Option<&str>) -> Vec<u8> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_subres"));
    cmd.args([
        "spade", "--q", "gaussian", "--p0", "uniform", "--delta", "0.2", "--mode", "odd:0", "--m", "1e7", "--eps",
        "0.01", "--replicates", "200", "--seed", "7", "--out",
    ])
    .arg(out);
    if let Some(t) = threads {
        cmd.env("RAYON_NUM_THREADS", t);
    }
    let status = cmd.output().unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    std::fs::read(out.join("spade_replicates.csv")).unwrap()
}

fn determinism() -> Outcome {
    let base = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-determinism");
    let _ = std::fs::remove_dir_all(&base);
    let a = run_spade_cli(&base.join("a"), None);
    let b = run_spade_cli(&base.join("b"), None);
    let c = run_spade_cli(&base.join("c"), Some("1"));
    outcome(
        !a.is_empty() && a == b && a == c,
        format!("{} bytes; identical across reruns: {}; identical on one thread: {}", a.len(), a == b, a == c),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("quantum-bound exponents", quantum_bound_exponents),
        ("purified-score exponents", purified_score_exponents),
        ("structural-zero law", structural_zeros),
        ("Cholesky-derivative oracle", cholesky_derivative_oracle),
        ("Gaussian SPADE constants", gaussian_spade_constants),
        ("SPADE estimator suite", spade_suite),
        ("direct-imaging suite", direct_suite),
        ("data-processing inequality", data_processing_inequality),
        ("Hankel numerics", hankel_numerics),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failures += 1;
        }
        println!(
            "{} {:>2} {name} ({:.1}s): {}",
            if result.pass { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64(),
            result.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
