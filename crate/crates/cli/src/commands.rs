use std::time::Instant;

use serde::Serialize;
use subres::direct::{check_domination, submodel_fisher, DominationReport, FisherReport, Psf, PsfFamily};
use subres::measure::STANDARD_GAUSSIAN_VARIANCE;
use subres::scaling::{fit_loglog, sweep, write_points_csv, DeltaGrid, Evaluator, ScalingFit, SweepConfig, SweepPoint};
use subres::spade::{build_spade, run_replicates, Measurement, ModeProbabilities, OrderSummary};
use subres::submodel::{quantum_bound, MomentFunctional, QuantumBoundReport, TiltedSubmodel, Truncation};
use subres::{Atom, Measure};

use crate::config::{Command, RunConfig};
use crate::manifest::{CheckResult, OutputSet, RunManifest};
use crate::CliError;

const BOUND_TOLERANCE: f64 = 0.15;
const SPADE_SLOPE_TOLERANCE: f64 = 0.1;
const DIRECT_TOLERANCE: f64 = 0.2;
const BIAS_Z_LIMIT: f64 = 4.0;
const VARIANCE_RATIO_TOLERANCE: f64 = 0.1;
const DEFAULT_M: f64 = 1e7;
const DEFAULT_EPS: f64 = 0.01;

pub fn run(cfg: &RunConfig) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    let mut out = OutputSet::new(&cfg.out)?;
    let checks = match cfg.command {
        Command::Bound => cmd_bound(cfg, &mut out)?,
        Command::Spade => cmd_spade(cfg, &mut out)?,
        Command::Direct => cmd_direct(cfg, &mut out)?,
        Command::Demo => cmd_demo(cfg, &mut out)?,
        Command::Sweep => cmd_sweep(cfg, &mut out)?,
    };
    if !cfg.json {
        for c in &checks {
            println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
    }
    out.finish(cfg, checks, start.elapsed().as_secs_f64())
}

fn field_error(field: &str, value: &str, expected: &str) -> CliError {
    CliError::Config(format!("{field}: cannot parse `{value}`, expected {expected}"))
}

fn parse_number<T: std::str::FromStr>(field: &str, value: &str, expected: &str) -> Result<T, CliError> {
    value.trim().parse().map_err(|_| field_error(field, value, expected))
}

pub fn parse_p0(text: &str, delta: f64, prec: u32) -> Result<Measure, CliError> {
    const EXPECTED: &str = "uniform, quadratic, truncated-gaussian[:σ/Δ], two-point or csv:PATH";
    let (kind, arg) = text.split_once(':').unwrap_or((text, ""));
    let m = match (kind, arg) {
        ("uniform", "") => Measure::uniform(delta, prec)?,
        ("quadratic", "") => Measure::quadratic(delta, prec)?,
        ("truncated-gaussian", "") => Measure::truncated_gaussian(delta, 0.5, prec)?,
        ("truncated-gaussian", s) => Measure::truncated_gaussian(delta, parse_number("p0", s, EXPECTED)?, prec)?,
        ("two-point", "") => Measure::atoms(
            vec![
                Atom { position: -delta, weight: 0.5 },
                Atom { position: delta, weight: 0.5 },
            ],
            prec,
        )?,
        ("csv", path) if !path.is_empty() => {
            let file = std::fs::File::open(path).map_err(|e| CliError::Config(format!("p0: cannot open {path}: {e}")))?;
            Measure::atoms_from_csv(file, prec)?
        }
        _ => return Err(field_error("p0", text, EXPECTED)),
    };
    Ok(m)
}

pub fn parse_q(text: &str, prec: u32) -> Result<Measure, CliError> {
    const EXPECTED: &str = "gaussian[:variance] or uniform:K";
    let (kind, arg) = text.split_once(':').unwrap_or((text, ""));
    match (kind, arg) {
        ("gaussian", "") => Ok(Measure::gaussian_frequency(STANDARD_GAUSSIAN_VARIANCE, prec)?),
        ("gaussian", v) => Ok(Measure::gaussian_frequency(parse_number("q", v, EXPECTED)?, prec)?),
        ("uniform", k) if !k.is_empty() => Ok(Measure::uniform(parse_number("q", k, EXPECTED)?, prec)?),
        _ => Err(field_error("q", text, EXPECTED)),
    }
}

/// `None` takes the PSF generated by `q`.
pub fn parse_psf(text: Option<&str>, q: &Measure) -> Result<Psf, CliError> {
    const EXPECTED: &str = "gaussian[:σ], super-gaussian:d2:p, lorentzian:d2:p or sinc2[:K]";
    let Some(text) = text else {
        return Ok(Psf::matched_to(q)?);
    };
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| parse_number::<f64>("psf", s, EXPECTED);
    let order = |s: &str| parse_number::<u32>("psf", s, EXPECTED);
    let family = match parts.as_slice() {
        ["gaussian"] => match Psf::matched_to(q) {
            Ok(p) if matches!(p.family, PsfFamily::Gaussian { .. }) => return Ok(p),
            _ => PsfFamily::Gaussian { sigma: 1.0 },
        },
        ["gaussian", s] => PsfFamily::Gaussian { sigma: num(s)? },
        ["super-gaussian", d2, p] => PsfFamily::SuperGaussian { d2: num(d2)?, p: order(p)? },
        ["lorentzian", d2, p] => PsfFamily::GeneralizedLorentzian { d2: num(d2)?, p: order(p)? },
        ["sinc2"] => match Psf::matched_to(q) {
            Ok(p) if p.is_experimental() => return Ok(p),
            _ => PsfFamily::HardAperture { k: 1.0 },
        },
        ["sinc2", k] => PsfFamily::HardAperture { k: num(k)? },
        _ => return Err(field_error("psf", text, EXPECTED)),
    };
    Ok(Psf::new(family)?)
}

pub fn parse_truncation(text: &str) -> Result<Truncation, CliError> {
    const EXPECTED: &str = "adaptive or fixed:J";
    match text.split_once(':') {
        None if text == "adaptive" => Ok(Truncation::default()),
        Some(("fixed", j)) => Ok(Truncation::Fixed(parse_number("truncation", j, EXPECTED)?)),
        _ => Err(field_error("truncation", text, EXPECTED)),
    }
}

pub fn parse_mode(text: &str) -> Result<Measurement, CliError> {
    const EXPECTED: &str = "even:n or odd:n";
    match text.split_once(':') {
        Some(("even", n)) => Ok(Measurement::Pad(vec![parse_number("mode", n, EXPECTED)?])),
        Some(("odd", n)) => Ok(Measurement::Ipad(parse_number("mode", n, EXPECTED)?)),
        _ => Err(field_error("mode", text, EXPECTED)),
    }
}

fn grid(cfg: &RunConfig) -> Result<DeltaGrid, CliError> {
    match &cfg.sweep {
        Some(s) => Ok(DeltaGrid::parse(s)?),
        None => Ok(DeltaGrid::default()),
    }
}

fn slope_check(name: String, fit: &ScalingFit) -> CheckResult {
    CheckResult {
        name,
        pass: fit.pass.unwrap_or(false),
        detail: format!(
            "slope {:.4} vs {} ± {}",
            fit.slope,
            fit.theory.unwrap_or(f64::NAN),
            fit.tolerance.unwrap_or(f64::NAN)
        ),
    }
}

fn emit_json<T: Serialize>(cfg: &RunConfig, value: &T) -> Result<(), CliError> {
    if cfg.json {
        println!("{}", serde_json::to_string_pretty(value)?);
    }
    Ok(())
}

fn points_csv(points: &[SweepPoint]) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_points_csv(points, &mut buf)?;
    Ok(buf)
}

fn rows_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

#[derive(Serialize)]
struct BoundOutput<'a> {
    report: &'a QuantumBoundReport,
    fit: Option<&'a ScalingFit>,
}

fn cmd_bound(cfg: &RunConfig, out: &mut OutputSet) -> Result<Vec<CheckResult>, CliError> {
    let prec = cfg.precision_bits;
    let p0 = parse_p0(&cfg.p0, cfg.delta, prec)?;
    let q = parse_q(&cfg.q, prec)?;
    let truncation = parse_truncation(&cfg.truncation)?;
    let cap = match truncation {
        Truncation::Fixed(j) => j.max(cfg.mu),
        Truncation::Adaptive { cap, .. } => cap,
    };
    let n = cfg.photons();
    let sub = TiltedSubmodel::with_cap(&p0, cfg.mu, cap)?;
    let report = quantum_bound(&sub, &MomentFunctional::power(cfg.mu), &q, n, truncation)?;
    out.write_json("bound.json", &report)?;
    if !cfg.json {
        println!(
            "bound_lower = {:e}  bound_fs = {:e}  (β̇ = {:e}, ⟨Φ̇|Φ̇⟩ = {:e}, j = {})",
            report.bound_lower, report.bound_fs, report.dot_beta, report.score.gram, report.score.truncation_order
        );
    }
    let mut checks = Vec::new();
    let mut fit = None;
    if cfg.sweep.is_some() {
        let evaluator = Evaluator::QuantumBound {
            mu: cfg.mu,
            q,
            n_photons: n,
            truncation,
        };
        let theory = evaluator.theoretical_exponent();
        let mut sc = SweepConfig::new(p0, evaluator).with_grid(grid(cfg)?);
        sc.cap = cap;
        let points = sweep(&sc)?;
        let f = fit_loglog(&points)?.against(theory, BOUND_TOLERANCE);
        if !cfg.json {
            out.write("bound_sweep.csv", &points_csv(&points)?)?;
        }
        out.write_json("bound_fit.json", &f)?;
        if cfg.check {
            checks.push(slope_check(format!("bound slope, μ = {}", cfg.mu), &f));
        }
        fit = Some(f);
    }
    emit_json(cfg, &BoundOutput { report: &report, fit: fit.as_ref() })?;
    Ok(checks)
}

#[derive(Serialize)]
struct SpadeSummary<'a> {
    q: &'a str,
    p0: &'a str,
    delta: f64,
    measurement: &'a Measurement,
    m: u64,
    epsilon: f64,
    n_photons: f64,
    seed: u64,
    replicates: u64,
    r: &'a [f64],
    s: &'a [f64],
    probabilities: &'a ModeProbabilities,
    summary: &'a [OrderSummary],
}

fn cmd_spade(cfg: &RunConfig, out: &mut OutputSet) -> Result<Vec<CheckResult>, CliError> {
    let prec = cfg.precision_bits;
    let p0 = parse_p0(&cfg.p0, cfg.delta, prec)?;
    let q = parse_q(&cfg.q, prec)?;
    let measurement = parse_mode(&cfg.mode)?;
    let m = cfg.m.unwrap_or(DEFAULT_M);
    let eps = cfg.eps.unwrap_or(DEFAULT_EPS);
    let seed = cfg.seed.ok_or_else(|| CliError::Config("seed: spade needs an explicit --seed".into()))?;
    let n_max = measurement.orders().iter().max().copied().unwrap_or(0) / 2 + 1;
    let model = build_spade(&q, n_max)?;
    let run = run_replicates(&model, &p0, &measurement, m as u64, eps, seed, cfg.replicates)?;
    if !cfg.json {
        let mut buf = Vec::new();
        run.write_csv(&mut buf)?;
        out.write("spade_replicates.csv", &buf)?;
    }
    let summary = SpadeSummary {
        q: q.name(),
        p0: p0.name(),
        delta: cfg.delta,
        measurement: &measurement,
        m: m as u64,
        epsilon: eps,
        n_photons: m * eps,
        seed,
        replicates: cfg.replicates,
        r: &model.r,
        s: &model.s,
        probabilities: &run.probabilities,
        summary: &run.summary,
    };
    out.write_json("spade_summary.json", &summary)?;
    emit_json(cfg, &summary)?;
    let mut checks = Vec::new();
    for o in &run.summary {
        if !cfg.json {
            println!(
                "β̌_{}: truth {:e}  mean {:e}  bias z {:.3}  variance ratio {:.4}",
                o.order, o.truth, o.mean, o.bias_z, o.variance_ratio
            );
        }
        if cfg.check {
            checks.push(CheckResult {
                name: format!("bias of β̌_{}", o.order),
                pass: o.bias_z.abs() <= BIAS_Z_LIMIT,
                detail: format!("z = {:.3}, limit ±{BIAS_Z_LIMIT}", o.bias_z),
            });
            checks.push(CheckResult {
                name: format!("variance of β̌_{}", o.order),
                pass: (o.variance_ratio - 1.0).abs() <= VARIANCE_RATIO_TOLERANCE,
                detail: format!("empirical / exact = {:.4}", o.variance_ratio),
            });
        }
    }
    Ok(checks)
}

#[derive(Serialize)]
struct DirectRow {
    delta: f64,
    fisher: f64,
    crb: f64,
}

#[derive(Serialize)]
struct DirectOutput<'a> {
    report: &'a FisherReport,
    domination: Option<&'a DominationReport>,
    fisher_fit: Option<&'a ScalingFit>,
    crb_fit: Option<&'a ScalingFit>,
}

fn cmd_direct(cfg: &RunConfig, out: &mut OutputSet) -> Result<Vec<CheckResult>, CliError> {
    let prec = cfg.precision_bits;
    let p0 = parse_p0(&cfg.p0, cfg.delta, prec)?;
    let q = parse_q(&cfg.q, prec)?;
    let psf = parse_psf(cfg.psf.as_deref(), &q)?;
    let n = cfg.photons();
    let sub = TiltedSubmodel::with_cap(&p0, cfg.mu, cfg.mu + 1)?;
    let domination = if psf.is_experimental() {
        None
    } else {
        Some(check_domination(&psf, sub.delta(), cfg.mu)?)
    };
    let report = submodel_fisher(&psf, &sub, n, cfg.experimental)?;
    if !cfg.json {
        println!(
            "fisher = {:e}  crb = {:e}  N·crb = {:.6}{}",
            report.fisher,
            report.crb,
            report.crb * n,
            if report.validated { "" } else { "  (unvalidated)" }
        );
    }
    let mut checks = Vec::new();
    let (mut fisher_fit, mut crb_fit) = (None, None);
    if cfg.sweep.is_some() {
        let evaluator = Evaluator::DirectFisher {
            psf: psf.clone(),
            mu: cfg.mu,
            experimental: cfg.experimental,
        };
        let theory = evaluator.theoretical_exponent();
        let points = sweep(&SweepConfig::new(p0, evaluator).with_grid(grid(cfg)?))?;
        let beta = MomentFunctional::power(cfg.mu);
        let mut rows = Vec::with_capacity(points.len());
        let mut crb_points = Vec::with_capacity(points.len());
        for p in &points {
            let dot_beta = sub.at_delta(p.delta)?.dot_beta(&beta)?;
            let crb = subres::direct::crb(dot_beta, n, p.value)?;
            rows.push(DirectRow {
                delta: p.delta,
                fisher: p.value,
                crb,
            });
            crb_points.push(SweepPoint { delta: p.delta, value: crb });
        }
        let ff = fit_loglog(&points)?.against(theory, DIRECT_TOLERANCE);
        let cf = fit_loglog(&crb_points)?.against(0.0, DIRECT_TOLERANCE);
        if !cfg.json {
            out.write("direct_sweep.csv", &rows_csv(&rows)?)?;
        }
        out.write_json("direct_fit.json", &serde_json::json!({ "fisher": ff, "crb": cf }))?;
        if cfg.check {
            checks.push(slope_check(format!("fisher slope, μ = {}", cfg.mu), &ff));
            checks.push(slope_check(format!("crb slope, μ = {}", cfg.mu), &cf));
        }
        fisher_fit = Some(ff);
        crb_fit = Some(cf);
    }
    let output = DirectOutput {
        report: &report,
        domination: domination.as_ref(),
        fisher_fit: fisher_fit.as_ref(),
        crb_fit: crb_fit.as_ref(),
    };
    out.write_json("direct.json", &output)?;
    emit_json(cfg, &output)?;
    Ok(checks)
}

#[derive(Clone, Debug, Serialize)]
pub struct DemoRow {
    pub mu: usize,
    pub quantum_slope: f64,
    pub quantum_theory: f64,
    pub spade_slope: f64,
    pub spade_theory: f64,
    pub direct_crb_slope: f64,
    pub direct_crb_theory: f64,
}

fn cmd_demo(cfg: &RunConfig, out: &mut OutputSet) -> Result<Vec<CheckResult>, CliError> {
    let prec = cfg.precision_bits;
    let shape = parse_p0(&cfg.p0, 1.0, prec)?;
    let q = parse_q(&cfg.q, prec)?;
    let psf = parse_psf(cfg.psf.as_deref(), &q)?;
    let truncation = parse_truncation(&cfg.truncation)?;
    let g = grid(cfg)?;
    let n = cfg.photons();
    let eps = cfg.eps.unwrap_or(DEFAULT_EPS);
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for mu in 1..=cfg.mu_max {
        let run = |evaluator: Evaluator, tol: f64| -> Result<ScalingFit, CliError> {
            let theory = evaluator.theoretical_exponent();
            let points = sweep(&SweepConfig::new(shape.clone(), evaluator).with_grid(g.clone()))?;
            Ok(fit_loglog(&points)?.against(theory, tol))
        };
        let quantum = run(
            Evaluator::QuantumBound {
                mu,
                q: q.clone(),
                n_photons: n,
                truncation,
            },
            BOUND_TOLERANCE,
        )?;
        let spade = run(
            Evaluator::SpadeVariance {
                q: q.clone(),
                order: mu,
                n_photons: n,
                epsilon: eps,
            },
            SPADE_SLOPE_TOLERANCE,
        )?;
        let direct = run(
            Evaluator::DirectCrb {
                psf: psf.clone(),
                mu,
                n_photons: n,
                experimental: cfg.experimental,
            },
            DIRECT_TOLERANCE,
        )?;
        if cfg.check {
            checks.push(slope_check(format!("quantum slope, μ = {mu}"), &quantum));
            checks.push(slope_check(format!("SPADE variance slope, μ = {mu}"), &spade));
            checks.push(slope_check(format!("direct CRB slope, μ = {mu}"), &direct));
        }
        rows.push(DemoRow {
            mu,
            quantum_slope: quantum.slope,
            quantum_theory: quantum.theory.unwrap_or(f64::NAN),
            spade_slope: spade.slope,
            spade_theory: spade.theory.unwrap_or(f64::NAN),
            direct_crb_slope: direct.slope,
            direct_crb_theory: direct.theory.unwrap_or(f64::NAN),
        });
    }
    if !cfg.json {
        out.write("demo.csv", &rows_csv(&rows)?)?;
        println!("  μ  quantum  SPADE  direct-CRB");
        for r in &rows {
            println!(
                "{:>3}  {:>7.3}  {:>5.3}  {:>10.3}",
                r.mu, r.quantum_slope, r.spade_slope, r.direct_crb_slope
            );
        }
    }
    out.write_json("demo.json", &rows)?;
    emit_json(cfg, &rows)?;
    Ok(checks)
}

fn cmd_sweep(cfg: &RunConfig, out: &mut OutputSet) -> Result<Vec<CheckResult>, CliError> {
    let prec = cfg.precision_bits;
    let shape = parse_p0(&cfg.p0, 1.0, prec)?;
    let q = parse_q(&cfg.q, prec)?;
    let n = cfg.photons();
    let truncation = parse_truncation(&cfg.truncation)?;
    let mu = cfg.mu;
    let (evaluator, tol) = match cfg.evaluator.as_str() {
        "bound" => (
            Evaluator::QuantumBound {
                mu,
                q,
                n_photons: n,
                truncation,
            },
            BOUND_TOLERANCE,
        ),
        "gram" => (Evaluator::PurifiedScore { mu, q, truncation }, BOUND_TOLERANCE),
        "spade-variance" => (
            Evaluator::SpadeVariance {
                q,
                order: mu,
                n_photons: n,
                epsilon: cfg.eps.unwrap_or(DEFAULT_EPS),
            },
            SPADE_SLOPE_TOLERANCE,
        ),
        "fisher" => (
            Evaluator::DirectFisher {
                psf: parse_psf(cfg.psf.as_deref(), &q)?,
                mu,
                experimental: cfg.experimental,
            },
            DIRECT_TOLERANCE,
        ),
        "crb" => (
            Evaluator::DirectCrb {
                psf: parse_psf(cfg.psf.as_deref(), &q)?,
                mu,
                n_photons: n,
                experimental: cfg.experimental,
            },
            DIRECT_TOLERANCE,
        ),
        "moment" => (Evaluator::Moment { p: mu }, 1e-9),
        other => {
            return Err(field_error(
                "evaluator",
                other,
                "bound, gram, spade-variance, fisher, crb or moment",
            ))
        }
    };
    let label = evaluator.label();
    let theory = evaluator.theoretical_exponent();
    let points = sweep(&SweepConfig::new(shape, evaluator).with_grid(grid(cfg)?))?;
    let fit = fit_loglog(&points)?.against(theory, tol);
    if !cfg.json {
        out.write("sweep.csv", &points_csv(&points)?)?;
        println!("{label}: slope {:.4} (theory {theory}), r² = {:.6}", fit.slope, fit.r_squared);
    }
    out.write_json("sweep_fit.json", &fit)?;
    emit_json(cfg, &fit)?;
    Ok(if cfg.check { vec![slope_check(label, &fit)] } else { Vec::new() })
}
