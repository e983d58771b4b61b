//! The unfavorable one-parameter submodel `P_θ = g_θ P₀` with score `a_μ`,
//! its purified-state derivative and the resulting quantum lower bound.
//!
//! Everything that does not depend on the object size is computed once for
//! the standardized measure `R₀` (the factor `V`, its inverse `B` and the
//! derivative `∂V`) and shared between every `Δ` through an [`Arc`]. At
//! size `Δ` the derivative of the unstandardized factor is `L̇_pn = Δ^p ∂V_pn`.

use std::fmt;
use std::sync::Arc;

use rug::{Assign, Float};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hankel::{cholesky_derivative, factorize_with_cap, Factorization};
use crate::measure::Measure;
use crate::precision::{factorial, mp, powi, MpMatrix};

/// Hard cap on the purified-score truncation order.
pub const DEFAULT_TRUNCATION_CAP: usize = 25;

/// Relative change of `gram` at which adaptive truncation stops.
pub const DEFAULT_TRUNCATION_TOLERANCE: f64 = 1e-8;

/// Default half-width of the θ interval.
pub const DEFAULT_THETA_HALF_WIDTH: f64 = 1.0;

const BITS_PER_ORDER: u32 = 8;

/// Mantissa width used for a standardized factorization of order `order`.
pub fn working_precision(base: u32, order: usize) -> u32 {
    let want = base + BITS_PER_ORDER * order as u32;
    want.div_ceil(64) * 64
}

/// Δ-independent part of the submodel.
#[derive(Debug)]
pub struct StandardSubmodel {
    pub base: Measure,
    pub mu: usize,
    pub cap: usize,
    pub factor: Factorization,
    /// `∂V` of order `cap` for the tilt `dG_qr = V_{q+r,μ}`.
    pub dv: MpMatrix,
}

impl StandardSubmodel {
    /// `base` must have half-width one.
    pub fn new(base: &Measure, mu: usize, cap: usize) -> Result<Self> {
        if mu == 0 {
            return Err(Error::InvalidArgument("score order μ must be at least 1".into()));
        }
        if cap == 0 || cap < mu.div_ceil(2) {
            return Err(Error::InvalidArgument(format!("truncation cap {cap} too small for μ = {mu}")));
        }
        let order = (2 * cap).max(mu);
        if let Some(m) = base.atom_count() {
            return Err(Error::FiniteSupport { order, atoms: m });
        }
        let prec = working_precision(base.prec(), order);
        let work = base.with_precision(prec)?.with_max_order(base.max_order().max(2 * order));
        let factor = factorize_with_cap(&work, order, order)?;
        let dg = dot_hankel_from(&factor.cholesky.entries, mu, cap)?;
        let v = crate::hankel::CholeskyFactor {
            entries: factor.cholesky.entries.leading(cap + 1),
            standardized: true,
        };
        let b = crate::hankel::OrthoBasis {
            coefficients: factor.basis.coefficients.leading(cap + 1),
            standardized: true,
        };
        let dv = cholesky_derivative(&v, &b, &dg)?;
        Ok(Self {
            base: work,
            mu,
            cap,
            factor,
            dv,
        })
    }

    pub fn prec(&self) -> u32 {
        self.base.prec()
    }

    pub fn v(&self) -> &MpMatrix {
        &self.factor.cholesky.entries
    }
}

fn dot_hankel_from(v: &MpMatrix, mu: usize, j: usize) -> Result<MpMatrix> {
    if 2 * j >= v.rows() {
        return Err(Error::OrderCap {
            requested: 2 * j,
            cap: v.rows() - 1,
        });
    }
    Ok(MpMatrix::from_fn(j + 1, j + 1, v.prec(), |q, r| v[(q + r, mu)].clone()))
}

/// `P₀` together with its score `a_μ` and the tilt `g_θ`.
#[derive(Clone)]
pub struct TiltedSubmodel {
    p0: Measure,
    std: Arc<StandardSubmodel>,
    delta: Float,
    theta_half_width: f64,
}

impl fmt::Debug for TiltedSubmodel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TiltedSubmodel")
            .field("p0", &self.p0.name())
            .field("mu", &self.std.mu)
            .field("delta", &self.delta.to_f64())
            .field("precision_bits", &self.std.prec())
            .finish()
    }
}

impl TiltedSubmodel {
    pub fn new(p0: &Measure, mu: usize) -> Result<Self> {
        Self::with_cap(p0, mu, DEFAULT_TRUNCATION_CAP)
    }

    pub fn with_cap(p0: &Measure, mu: usize, cap: usize) -> Result<Self> {
        if let Some(m) = p0.atom_count() {
            return Err(Error::FiniteSupport {
                order: (2 * cap).max(mu),
                atoms: m,
            });
        }
        let s = p0.standardize()?;
        let std = Arc::new(StandardSubmodel::new(&s.base, mu, cap)?);
        Ok(Self {
            p0: p0.clone(),
            std,
            delta: s.delta,
            theta_half_width: DEFAULT_THETA_HALF_WIDTH,
        })
    }

    /// Same standardized shape at another object size.
    pub fn at_delta(&self, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("Δ must be positive, got {delta}")));
        }
        let prec = self.p0.prec();
        let p0 = self.std.base.with_precision(prec)?.rescaled(&mp(prec, delta))?;
        Ok(Self {
            p0: p0.with_name(self.p0.name()),
            std: Arc::clone(&self.std),
            delta: mp(self.std.prec(), delta),
            theta_half_width: self.theta_half_width,
        })
    }

    pub fn with_theta_half_width(mut self, c: f64) -> Self {
        self.theta_half_width = c;
        self
    }

    pub fn p0(&self) -> &Measure {
        &self.p0
    }

    pub fn mu(&self) -> usize {
        self.std.mu
    }

    pub fn cap(&self) -> usize {
        self.std.cap
    }

    pub fn delta(&self) -> f64 {
        self.delta.to_f64()
    }

    pub fn delta_mp(&self) -> &Float {
        &self.delta
    }

    pub fn precision_bits(&self) -> u32 {
        self.std.prec()
    }

    pub fn standard(&self) -> &StandardSubmodel {
        &self.std
    }

    /// Score `a_μ(x) = b_μ(x/Δ)` at working precision.
    pub fn score(&self, x: &Float) -> Float {
        let prec = self.std.prec();
        let y = Float::with_val(prec, x / &self.delta);
        self.std.factor.basis.eval(self.std.mu, &y)
    }

    pub fn score_f64(&self, x: f64) -> f64 {
        self.score(&mp(self.std.prec(), x)).to_f64()
    }

    fn check_theta(&self, theta: f64) -> Result<()> {
        if !(theta.abs() <= self.theta_half_width) {
            return Err(Error::InvalidArgument(format!(
                "|θ| = {} exceeds the interval half-width {}",
                theta.abs(),
                self.theta_half_width
            )));
        }
        Ok(())
    }

    fn tilt_factor(&self, x: &Float, theta: &Float) -> Float {
        let s = self.score(x);
        Float::with_val(s.prec(), &s * theta).tanh() + 1u32
    }

    /// `∫ (1 + tanh(θ a_μ)) dP₀`.
    fn tilt_normalizer(&self, theta: &Float) -> Result<Float> {
        self.p0.integrate(|x| self.tilt_factor(x, theta))
    }

    /// Density `g_θ(x)` of `P_θ` relative to `P₀`.
    pub fn g_theta(&self, x: f64, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        if !self.p0.contains(x) {
            return Err(Error::OutsideSupport { x });
        }
        let prec = self.std.prec();
        let t = mp(prec, theta);
        let z = self.tilt_normalizer(&t)?;
        Ok((self.tilt_factor(&mp(prec, x), &t) / z).to_f64())
    }

    /// `P_θ` as a reweighted copy of `P₀`.
    pub fn tilted_measure(&self, theta: f64) -> Result<Measure> {
        self.check_theta(theta)?;
        let t = mp(self.std.prec(), theta);
        let p = self.p0.prec();
        self.p0.reweighted(|x| Float::with_val(p, self.tilt_factor(x, &t)))
    }

    /// `Ġ_qr = V_{q+r,μ}` for `q, r ≤ j`.
    pub fn dot_hankel(&self, j: usize) -> Result<MpMatrix> {
        dot_hankel_from(self.std.v(), self.std.mu, j)
    }

    /// `L̇_pn = Δ^p ∂V_pn` for `p, n ≤ j`.
    pub fn dot_l(&self, j: usize) -> Result<MpMatrix> {
        if j > self.std.cap {
            return Err(Error::OrderCap {
                requested: j,
                cap: self.std.cap,
            });
        }
        Ok(scale_rows(&self.std.dv.leading(j + 1), &self.delta))
    }

    /// Unstandardized factor `L_pn = Δ^p V_pn` for `p, n ≤ j`.
    pub fn l(&self, j: usize) -> Result<MpMatrix> {
        if j >= self.std.v().rows() {
            return Err(Error::OrderCap {
                requested: j,
                cap: self.std.v().rows() - 1,
            });
        }
        Ok(scale_rows(&self.std.v().leading(j + 1), &self.delta))
    }

    /// `β̇ = ⟨b, a_μ⟩_{P₀}`.
    pub fn dot_beta(&self, b: &MomentFunctional) -> Result<f64> {
        Ok(self.dot_beta_mp(b)?.to_f64())
    }

    pub fn dot_beta_mp(&self, b: &MomentFunctional) -> Result<Float> {
        let prec = self.std.prec();
        match &b.kind {
            FunctionalKind::Power(k) if *k == self.std.mu => {
                let v = &self.std.v()[(*k, *k)];
                Ok(Float::with_val(prec, v * powi(&self.delta, *k as u32)))
            }
            FunctionalKind::Constant => Ok(Float::new(prec)),
            _ => {
                let p = self.p0.prec();
                self.p0
                    .integrate(|x| Float::with_val(p, b.eval(x) * self.score(x)))
                    .map(|v| Float::with_val(prec, v))
            }
        }
    }
}

fn scale_rows(m: &MpMatrix, delta: &Float) -> MpMatrix {
    let prec = m.prec();
    let mut out = m.clone();
    let mut s = Float::with_val(prec, 1);
    for p in 0..out.rows() {
        for n in 0..out.cols() {
            out[(p, n)] *= &s;
        }
        s *= delta;
    }
    out
}

#[derive(Clone)]
enum FunctionalKind {
    Power(usize),
    Constant,
    Custom {
        name: String,
        f: Arc<dyn Fn(&Float) -> Float + Send + Sync>,
    },
}

/// Linear functional `β(P) = ∫ b dP`.
#[derive(Clone)]
pub struct MomentFunctional {
    kind: FunctionalKind,
}

impl fmt::Debug for MomentFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl MomentFunctional {
    /// `b(x) = x^μ`.
    pub fn power(mu: usize) -> Self {
        Self {
            kind: FunctionalKind::Power(mu),
        }
    }

    pub fn constant() -> Self {
        Self {
            kind: FunctionalKind::Constant,
        }
    }

    pub fn custom(name: impl Into<String>, f: impl Fn(&Float) -> Float + Send + Sync + 'static) -> Self {
        Self {
            kind: FunctionalKind::Custom {
                name: name.into(),
                f: Arc::new(f),
            },
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            FunctionalKind::Power(k) => format!("x^{k}"),
            FunctionalKind::Constant => "1".into(),
            FunctionalKind::Custom { name, .. } => name.clone(),
        }
    }

    pub fn eval(&self, x: &Float) -> Float {
        match &self.kind {
            FunctionalKind::Power(k) => powi(x, *k as u32),
            FunctionalKind::Constant => Float::with_val(x.prec(), 1),
            FunctionalKind::Custom { f, .. } => f(x),
        }
    }

    /// `β(P)`.
    pub fn value(&self, p: &Measure) -> Result<f64> {
        p.integrate(|x| self.eval(x)).map(|v| v.to_f64())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Truncation {
    Fixed(usize),
    Adaptive { tolerance: f64, cap: usize },
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::Adaptive {
            tolerance: DEFAULT_TRUNCATION_TOLERANCE,
            cap: DEFAULT_TRUNCATION_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PurifiedScoreReport {
    /// `⟨Φ̇|Φ̇⟩`.
    pub gram: f64,
    /// `|⟨Φ₀|Φ̇⟩|`.
    pub overlap: f64,
    pub truncation_order: usize,
    /// Relative change of `gram` at the last increment of `j`.
    pub tail_estimate: f64,
    pub score_norm_sq_upper: f64,
    pub score_norm_sq_fs: f64,
    /// `gram` at each visited truncation order, starting from the first one.
    pub history: Vec<f64>,
    pub converged: bool,
}

/// `Σ_n Σ_{p,q} i^{s(q−p)} m_{p+q} X_pn Y_qn / (p! q!)` as (real, imaginary).
fn i_power_series(x: &MpMatrix, y: &MpMatrix, m: &[Float], fact: &[Float], j: usize, sign: i64) -> (Float, Float) {
    let prec = x.prec();
    let mut re = Float::new(prec);
    let mut im = Float::new(prec);
    let mut t = Float::new(prec);
    let mut term = Float::new(prec);
    for p in 0..=j {
        for q in 0..=j {
            if m[p + q].is_zero() {
                continue;
            }
            t.assign(0);
            for n in 0..=j {
                t += Float::with_val(prec, &x[(p, n)] * &y[(q, n)]);
            }
            if t.is_zero() {
                continue;
            }
            term.assign(&t * &m[p + q]);
            term /= &fact[p];
            term /= &fact[q];
            match (sign * (q as i64 - p as i64)).rem_euclid(4) {
                0 => re += &term,
                1 => im += &term,
                2 => re -= &term,
                _ => im -= &term,
            }
        }
    }
    (re, im)
}

struct SeriesInputs {
    dot_l: MpMatrix,
    l: MpMatrix,
    moments: Vec<Float>,
    fact: Vec<Float>,
}

fn series_inputs(sub: &TiltedSubmodel, q: &Measure, j: usize) -> Result<SeriesInputs> {
    let prec = sub.precision_bits();
    let raw = q.moments(2 * j)?;
    Ok(SeriesInputs {
        dot_l: sub.dot_l(j)?,
        l: sub.l(j)?,
        moments: raw.iter().map(|v| Float::with_val(prec, v)).collect(),
        fact: (0..=j as u32).map(|k| factorial(prec, k)).collect(),
    })
}

fn gram_and_overlap(inp: &SeriesInputs, j: usize) -> (Float, Float) {
    let dl = inp.dot_l.leading(j + 1);
    let l = inp.l.leading(j + 1);
    let (gram, gram_im) = i_power_series(&dl, &dl, &inp.moments, &inp.fact, j, 1);
    debug_assert!(
        gram_im.clone().abs() < 1e-20,
        "purified-score norm has imaginary part {}",
        gram_im.to_f64()
    );
    let (ov_re, ov_im) = i_power_series(&l, &dl, &inp.moments, &inp.fact, j, -1);
    let modulus = Float::with_val(gram.prec(), ov_re.hypot_ref(&ov_im));
    (gram, modulus)
}

fn report(gram: &Float, overlap: &Float, j: usize, tail: f64, history: Vec<f64>, converged: bool) -> PurifiedScoreReport {
    let g = gram.to_f64();
    let o = overlap.to_f64();
    let fs = Float::with_val(gram.prec(), gram - Float::with_val(gram.prec(), overlap.square_ref())) * 4u32;
    PurifiedScoreReport {
        gram: g,
        overlap: o,
        truncation_order: j,
        tail_estimate: tail,
        score_norm_sq_upper: 4.0 * g,
        score_norm_sq_fs: fs.to_f64(),
        history,
        converged,
    }
}

fn check_frequency_measure(q: &Measure) -> Result<()> {
    if q.atom_count().is_some() {
        return Err(Error::UnsupportedFrequencyMeasure(format!(
            "`{}` is finitely supported; the purified state needs infinitely many moments",
            q.name()
        )));
    }
    Ok(())
}

/// Truncated `⟨Φ̇|Φ̇⟩` and `⟨Φ₀|Φ̇⟩` of the purified submodel under `Q`.
pub fn purified_score_norm(sub: &TiltedSubmodel, q: &Measure, truncation: Truncation) -> Result<PurifiedScoreReport> {
    check_frequency_measure(q)?;
    match truncation {
        Truncation::Fixed(j) => {
            let inp = series_inputs(sub, q, j)?;
            let (g, o) = gram_and_overlap(&inp, j);
            let tail = if j > 0 {
                let (prev, _) = gram_and_overlap(&inp, j - 1);
                relative_change(&g, &prev)
            } else {
                f64::NAN
            };
            Ok(report(&g, &o, j, tail, vec![g.to_f64()], true))
        }
        Truncation::Adaptive { tolerance, cap } => {
            let cap = cap.min(sub.cap());
            let start = sub.mu().min(cap).max(1);
            let inp = series_inputs(sub, q, cap)?;
            let (mut prev, _) = gram_and_overlap(&inp, start - 1);
            let mut history = Vec::new();
            let mut tail = f64::INFINITY;
            for j in start..=cap {
                let (g, o) = gram_and_overlap(&inp, j);
                history.push(g.to_f64());
                tail = relative_change(&g, &prev);
                if j > start && tail < tolerance {
                    return Ok(report(&g, &o, j, tail, history, true));
                }
                prev = g;
                if j == cap {
                    let r = report(&prev, &o, j, tail, history, false);
                    return Err(Error::NotConverged(Box::new(r)));
                }
            }
            unreachable!("cap {cap} below start {start} (tail {tail})")
        }
    }
}

fn relative_change(new: &Float, old: &Float) -> f64 {
    let d = Float::with_val(new.prec(), new - old).abs();
    if new.is_zero() {
        return if d.is_zero() { 0.0 } else { f64::INFINITY };
    }
    (d / Float::with_val(new.prec(), new.abs_ref())).to_f64()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub measure: String,
    pub frequency_measure: String,
    pub functional: String,
    pub mu: usize,
    pub delta: f64,
    pub truncation_order: usize,
    pub precision_bits: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumBoundReport {
    pub dot_beta: f64,
    pub score: PurifiedScoreReport,
    pub n_photons: f64,
    pub bound_lower: f64,
    pub bound_fs: f64,
    pub provenance: Provenance,
}

/// `β̇² / (N ‖S‖²)` with `‖S‖²` both as `4⟨Φ̇|Φ̇⟩` and as the Fubini–Study metric.
pub fn quantum_bound(
    sub: &TiltedSubmodel,
    b: &MomentFunctional,
    q: &Measure,
    n_photons: f64,
    truncation: Truncation,
) -> Result<QuantumBoundReport> {
    if !(n_photons > 0.0 && n_photons.is_finite()) {
        return Err(Error::InvalidArgument(format!("photon number N must be positive, got {n_photons}")));
    }
    let score = purified_score_norm(sub, q, truncation)?;
    if !(score.gram > 0.0) {
        return Err(Error::Degenerate(format!(
            "purified score norm is {} for μ = {}",
            score.gram,
            sub.mu()
        )));
    }
    let dot_beta = sub.dot_beta(b)?;
    let num = dot_beta * dot_beta;
    let bound_lower = num / (n_photons * score.score_norm_sq_upper);
    let bound_fs = if score.score_norm_sq_fs > 0.0 {
        num / (n_photons * score.score_norm_sq_fs)
    } else {
        f64::INFINITY
    };
    Ok(QuantumBoundReport {
        dot_beta,
        n_photons,
        bound_lower,
        bound_fs,
        provenance: Provenance {
            measure: sub.p0().name().to_owned(),
            frequency_measure: q.name().to_owned(),
            functional: b.label(),
            mu: sub.mu(),
            delta: sub.delta(),
            truncation_order: score.truncation_order,
            precision_bits: sub.precision_bits(),
        },
        score,
    })
}
