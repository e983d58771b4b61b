//! Δ-sweeps with `R₀` held fixed, and log-log exponent fits.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::direct::{submodel_fisher, Psf};
use crate::error::{Error, Result};
use crate::hankel::least_squares;
use crate::measure::Measure;
use crate::spade::{analytic_variance, build_spade, mode_probabilities};
use crate::submodel::{purified_score_norm, quantum_bound, MomentFunctional, TiltedSubmodel, Truncation};

pub const DEFAULT_GRID_LO: f64 = 0.01;
pub const DEFAULT_GRID_HI: f64 = 0.1;
pub const DEFAULT_GRID_POINTS: usize = 8;

/// Strictly increasing grid of positive object sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaGrid(Vec<f64>);

impl DeltaGrid {
    pub fn geometric(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(lo > 0.0) || !(hi > lo) || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "geometric grid needs 0 < lo < hi and at least 2 points, got {lo}:{hi}:{n}"
            )));
        }
        let ratio = (hi / lo).ln() / (n - 1) as f64;
        let mut values: Vec<f64> = (0..n).map(|i| lo * (ratio * i as f64).exp()).collect();
        values[n - 1] = hi;
        Ok(Self(values))
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("Δ grid is empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument(format!("Δ grid values must be positive, got {v}")));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("Δ grid must be strictly increasing".into()));
        }
        Ok(Self(values))
    }

    /// Parses `lo:hi:n`.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("expected a grid of the form lo:hi:n, got `{text}`"));
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        Self::geometric(lo, hi, n)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for DeltaGrid {
    fn default() -> Self {
        Self::geometric(DEFAULT_GRID_LO, DEFAULT_GRID_HI, DEFAULT_GRID_POINTS).expect("default grid")
    }
}

/// Quantity evaluated at each grid point.
#[derive(Clone, Debug)]
pub enum Evaluator {
    Constant(f64),
    /// `m_p(P₀)`.
    Moment { p: usize },
    /// `bound_lower` of the quantum bound for `β = m_μ`.
    QuantumBound { mu: usize, q: Measure, n_photons: f64, truncation: Truncation },
    /// `⟨Φ̇|Φ̇⟩`.
    PurifiedScore { mu: usize, q: Measure, truncation: Truncation },
    /// Exact variance of the SPADE estimator `β̌_order`.
    SpadeVariance { q: Measure, order: usize, n_photons: f64, epsilon: f64 },
    DirectFisher { psf: Psf, mu: usize, experimental: bool },
    DirectCrb { psf: Psf, mu: usize, n_photons: f64, experimental: bool },
}

impl Evaluator {
    pub fn label(&self) -> String {
        match self {
            Evaluator::Constant(_) => "constant".into(),
            Evaluator::Moment { p } => format!("moment_{p}"),
            Evaluator::QuantumBound { mu, .. } => format!("quantum_bound_mu{mu}"),
            Evaluator::PurifiedScore { mu, .. } => format!("purified_score_mu{mu}"),
            Evaluator::SpadeVariance { order, .. } => format!("spade_variance_order{order}"),
            Evaluator::DirectFisher { psf, mu, .. } => format!("{}_fisher_mu{mu}", psf.label()),
            Evaluator::DirectCrb { psf, mu, .. } => format!("{}_crb_mu{mu}", psf.label()),
        }
    }

    /// Predicted log-log slope against Δ.
    pub fn theoretical_exponent(&self) -> f64 {
        match self {
            Evaluator::Constant(_) => 0.0,
            Evaluator::Moment { p } => *p as f64,
            Evaluator::QuantumBound { mu, .. } => (2 * (mu / 2)) as f64,
            Evaluator::PurifiedScore { mu, .. } => (2 * mu.div_ceil(2)) as f64,
            Evaluator::SpadeVariance { order, .. } => (2 * (order / 2)) as f64,
            Evaluator::DirectFisher { mu, .. } => (2 * mu) as f64,
            Evaluator::DirectCrb { .. } => 0.0,
        }
    }

    fn mu(&self) -> Option<usize> {
        match self {
            Evaluator::QuantumBound { mu, .. }
            | Evaluator::PurifiedScore { mu, .. }
            | Evaluator::DirectFisher { mu, .. }
            | Evaluator::DirectCrb { mu, .. } => Some(*mu),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    /// Standardized shape `R₀` on `[−1, 1]`; any measure is standardized first.
    pub base: Measure,
    pub grid: DeltaGrid,
    pub evaluator: Evaluator,
    /// Truncation cap for the submodel factorization.
    pub cap: usize,
}

impl SweepConfig {
    pub fn new(base: Measure, evaluator: Evaluator) -> Self {
        Self {
            base,
            grid: DeltaGrid::default(),
            evaluator,
            cap: crate::submodel::DEFAULT_TRUNCATION_CAP,
        }
    }

    pub fn with_grid(mut self, grid: DeltaGrid) -> Self {
        self.grid = grid;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub delta: f64,
    pub value: f64,
}

enum Prepared {
    None,
    Submodel(TiltedSubmodel),
    Spade(crate::spade::SpadeModel),
}

/// One value per Δ, evaluated with `P₀ = rescale(R₀, Δ)`, in grid order.
pub fn sweep(config: &SweepConfig) -> Result<Vec<SweepPoint>> {
    let standard = config.base.standardize()?;
    let ev = &config.evaluator;
    let prepared = match ev {
        Evaluator::QuantumBound { mu, .. } | Evaluator::PurifiedScore { mu, .. } => {
            Prepared::Submodel(TiltedSubmodel::with_cap(&standard.base, *mu, config.cap)?)
        }
        Evaluator::DirectFisher { mu, .. } | Evaluator::DirectCrb { mu, .. } => {
            Prepared::Submodel(TiltedSubmodel::with_cap(&standard.base, *mu, *mu + 1)?)
        }
        Evaluator::SpadeVariance { q, order, .. } => Prepared::Spade(build_spade(q, order / 2 + 2)?),
        _ => Prepared::None,
    };
    if let Some(0) = ev.mu() {
        return Err(Error::InvalidArgument("μ must be at least 1".into()));
    }
    let results: Vec<Result<SweepPoint>> = config
        .grid
        .values()
        .par_iter()
        .map(|&delta| {
            let at = |delta| -> Result<f64> {
                match (ev, &prepared) {
                    (Evaluator::Constant(c), _) => Ok(*c),
                    (Evaluator::Moment { p }, _) => Ok(standard.at_scale(delta)?.moment(*p)?.to_f64()),
                    (Evaluator::QuantumBound { mu, q, n_photons, truncation }, Prepared::Submodel(sub)) => {
                        let sub = sub.at_delta(delta)?;
                        Ok(quantum_bound(&sub, &MomentFunctional::power(*mu), q, *n_photons, *truncation)?.bound_lower)
                    }
                    (Evaluator::PurifiedScore { q, truncation, .. }, Prepared::Submodel(sub)) => {
                        Ok(purified_score_norm(&sub.at_delta(delta)?, q, *truncation)?.gram)
                    }
                    (Evaluator::SpadeVariance { order, n_photons, epsilon, .. }, Prepared::Spade(model)) => {
                        let probs = mode_probabilities(model, &standard.at_scale(delta)?)?;
                        Ok(analytic_variance(model, &probs, *order, *n_photons, *epsilon))
                    }
                    (Evaluator::DirectFisher { psf, experimental, .. }, Prepared::Submodel(sub)) => {
                        Ok(submodel_fisher(psf, &sub.at_delta(delta)?, 1.0, *experimental)?.fisher)
                    }
                    (Evaluator::DirectCrb { psf, n_photons, experimental, .. }, Prepared::Submodel(sub)) => {
                        Ok(submodel_fisher(psf, &sub.at_delta(delta)?, *n_photons, *experimental)?.crb)
                    }
                    _ => unreachable!("evaluator prepared above"),
                }
            };
            at(delta)
                .map(|value| SweepPoint { delta, value })
                .map_err(|e| Error::Sweep {
                    delta,
                    source: Box::new(e),
                })
        })
        .collect();
    results.into_iter().collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub points: Vec<SweepPoint>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub theory: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: Option<bool>,
}

impl ScalingFit {
    pub fn against(mut self, theory: f64, tolerance: f64) -> Self {
        self.pass = Some(compare_exponent(&self, theory, tolerance));
        self.theory = Some(theory);
        self.tolerance = Some(tolerance);
        self
    }
}

/// Least squares of `ln value` on `ln Δ`.
pub fn fit_loglog(points: &[SweepPoint]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "a log-log fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points.iter().find(|p| !(p.value > 0.0 && p.value.is_finite() && p.delta > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "log-log fit needs finite positive values, got {} at Δ = {}",
            p.value, p.delta
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.delta.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.value.ln()).collect();
    let (slope, intercept, r_squared) = least_squares(&xs, &ys);
    Ok(ScalingFit {
        points: points.to_vec(),
        slope,
        intercept,
        r_squared,
        theory: None,
        tolerance: None,
        pass: None,
    })
}

pub fn compare_exponent(fit: &ScalingFit, theory: f64, tol: f64) -> bool {
    (fit.slope - theory).abs() <= tol
}

/// Two columns, `delta,value`.
pub fn write_points_csv<W: Write>(points: &[SweepPoint], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for p in points {
        out.serialize(p).map_err(|e| Error::Numeric(format!("CSV write failed: {e}")))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::STANDARD_GAUSSIAN_VARIANCE;

    const P: u32 = 256;

    fn points(f: impl Fn(f64) -> f64) -> Vec<SweepPoint> {
        DeltaGrid::default()
            .values()
            .iter()
            .map(|&delta| SweepPoint { delta, value: f(delta) })
            .collect()
    }

    #[test]
    fn grids() {
        let g = DeltaGrid::default();
        assert_eq!(g.len(), 8);
        assert_eq!(g.values()[0], 0.01);
        assert_eq!(g.values()[7], 0.1);
        assert!(g.values().windows(2).all(|w| w[1] > w[0]));
        assert_eq!(DeltaGrid::parse("0.01:0.1:8").unwrap(), g);
        assert!(DeltaGrid::parse("0.1:0.01:8").is_err());
        assert!(DeltaGrid::parse("0.01:0.1").is_err());
        assert!(DeltaGrid::from_values(vec![0.1, 0.05]).is_err());
        assert!(DeltaGrid::from_values(vec![0.0, 0.05]).is_err());
    }

    #[test]
    fn fit_examples() {
        let f = fit_loglog(&points(|d| d * d)).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-9 && (f.r_squared - 1.0).abs() < 1e-12);
        let f = fit_loglog(&points(|_| 7.0)).unwrap();
        assert!(f.slope.abs() < 1e-9);
        let f = fit_loglog(&points(|d| d.powi(3) * (1.0 + 0.1 * d))).unwrap();
        assert!(f.slope > 3.0 && f.slope < 3.1, "{}", f.slope);
        assert!(fit_loglog(&points(|d| d - 0.05)).is_err());
        assert!(fit_loglog(&points(|d| d)[..2]).is_err());
    }

    #[test]
    fn compare_examples() {
        let fit = |slope| ScalingFit {
            points: vec![],
            slope,
            intercept: 0.0,
            r_squared: 1.0,
            theory: None,
            tolerance: None,
            pass: None,
        };
        assert!(compare_exponent(&fit(2.05), 2.0, 0.15));
        assert!(!compare_exponent(&fit(2.30), 2.0, 0.15));
        assert!(compare_exponent(&fit(0.05), 0.0, 0.2));
        assert_eq!(fit(2.05).against(2.0, 0.15).pass, Some(true));
    }

    #[test]
    fn trivial_sweeps() {
        let u = Measure::uniform(1.0, P).unwrap();
        let c = sweep(&SweepConfig::new(u.clone(), Evaluator::Constant(3.5))).unwrap();
        assert!(c.iter().all(|p| p.value == 3.5));
        let m = sweep(&SweepConfig::new(u, Evaluator::Moment { p: 2 })).unwrap();
        for p in &m {
            assert!((p.value - p.delta * p.delta / 3.0).abs() <= 1e-15 * p.value);
        }
    }

    #[test]
    fn bound_sweep_is_positive_and_pure() {
        let q = Measure::gaussian_frequency(STANDARD_GAUSSIAN_VARIANCE, P).unwrap();
        let cfg = SweepConfig::new(
            Measure::uniform(1.0, P).unwrap(),
            Evaluator::QuantumBound {
                mu: 1,
                q,
                n_photons: 1.0,
                truncation: Truncation::Fixed(4),
            },
        )
        .with_grid(DeltaGrid::geometric(0.01, 0.1, 4).unwrap());
        let a = sweep(&cfg).unwrap();
        assert!(a.iter().all(|p| p.value > 0.0 && p.value.is_finite()));
        assert_eq!(a, sweep(&cfg).unwrap());
    }

    #[test]
    fn failures_name_the_delta() {
        let q = Measure::uniform(1.0, P).unwrap();
        let cfg = SweepConfig::new(
            Measure::uniform(1.0, P).unwrap(),
            Evaluator::DirectFisher {
                psf: Psf::matched_to(&q).unwrap(),
                mu: 1,
                experimental: false,
            },
        );
        match sweep(&cfg) {
            Err(Error::Sweep { delta, source }) => {
                assert_eq!(delta, 0.01);
                assert!(matches!(*source, Error::Domination(_)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_has_two_columns() {
        let mut buf = Vec::new();
        write_points_csv(&points(|d| d), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("delta,value\n"));
        assert_eq!(text.lines().count(), 9);
    }
}
