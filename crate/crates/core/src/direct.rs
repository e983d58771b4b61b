//! Direct imaging: point-spread functions, the photon density
//! `η(ξ) = ∫ h(ξ − x) P(dx)`, the Fisher information of the tilted submodel
//! and its Cramér–Rao bound.
//!
//! For the smooth families the derivatives are exact: Hermite polynomials for
//! the Gaussian, and polynomial recurrences for the super-Gaussian
//! `exp(−s^{2p})` and the generalized Lorentzian `1 / (1 + s^{2p})`. The
//! hard-aperture `sinc²` PSF vanishes on a lattice and is only available
//! as an unvalidated experimental mode.

use std::sync::OnceLock;

use rayon::prelude::*;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{Measure, MeasureKind};
use crate::quadrature::QuadratureRule;
use crate::submodel::TiltedSubmodel;

/// Target ratio of the certified tail to the accumulated Fisher integral.
pub const TAIL_TOLERANCE: f64 = 1e-10;

/// Floor applied to `η₀` in the experimental hard-aperture mode.
pub const EXPERIMENTAL_FLOOR: f64 = 1e-30;

const PANEL_RELATIVE_TOLERANCE: f64 = 1e-9;
const MAX_PANEL_DEPTH: u32 = 12;
const MAX_DOUBLINGS: u32 = 24;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PsfFamily {
    Gaussian { sigma: f64 },
    /// Proportional to `exp(−(ξ/d2)^{2p})`.
    SuperGaussian { d2: f64, p: u32 },
    /// Proportional to `1 / (1 + (ξ/d2)^{2p})`.
    GeneralizedLorentzian { d2: f64, p: u32 },
    /// `(K/π) sinc²(Kξ)`, the image of a uniform pupil on `[−K, K]`.
    HardAperture { k: f64 },
}

/// A normalized point-spread function `h = d1 · f(ξ / d2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Psf {
    pub family: PsfFamily,
    /// Amplitude fixed by `∫ h dξ = 1`.
    pub d1: f64,
}

/// Polynomial with coefficients in increasing degree.
#[derive(Clone, Debug, PartialEq)]
struct Poly(Vec<f64>);

impl Poly {
    fn one() -> Self {
        Poly(vec![1.0])
    }

    fn eval(&self, s: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * s + c)
    }

    /// `Σ |c_k| s^k` for `s ≥ 0`: bounds `|poly(t)|` on `|t| ≤ s`.
    fn eval_abs(&self, s: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * s + c.abs())
    }

    /// `ln Σ |c_k| s^k`, factoring out the leading power for large `s`.
    fn ln_eval_abs(&self, s: f64) -> f64 {
        if s <= 1.0 {
            return self.eval_abs(s).ln();
        }
        let deg = self.0.len() - 1;
        let inv = s.recip();
        let rest = self.0.iter().fold(0.0, |acc, c| acc * inv + c.abs());
        deg as f64 * s.ln() + rest.ln()
    }

    fn derivative(&self) -> Self {
        if self.0.len() <= 1 {
            return Poly(vec![0.0]);
        }
        Poly(self.0.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect())
    }

    /// `self · c · s^k`.
    fn times_monomial(&self, c: f64, k: usize) -> Self {
        let mut out = vec![0.0; self.0.len() + k];
        for (i, v) in self.0.iter().enumerate() {
            out[i + k] = v * c;
        }
        Poly(out)
    }

    fn add(&self, other: &Self) -> Self {
        let n = self.0.len().max(other.0.len());
        Poly((0..n)
            .map(|i| self.0.get(i).copied().unwrap_or(0.0) + other.0.get(i).copied().unwrap_or(0.0))
            .collect())
    }
}

impl Psf {
    pub fn new(family: PsfFamily) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        let integral = match family {
            PsfFamily::Gaussian { sigma } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return bad(format!("Gaussian PSF width must be positive, got {sigma}"));
                }
                sigma * (2.0 * std::f64::consts::PI).sqrt()
            }
            PsfFamily::SuperGaussian { d2, p } => {
                if !(d2 > 0.0 && d2.is_finite()) || p == 0 {
                    return bad(format!("super-Gaussian needs d2 > 0 and p ≥ 1, got d2 = {d2}, p = {p}"));
                }
                2.0 * d2 * statrs::function::gamma::gamma(1.0 + 1.0 / (2.0 * p as f64))
            }
            PsfFamily::GeneralizedLorentzian { d2, p } => {
                if !(d2 > 0.0 && d2.is_finite()) || p == 0 {
                    return bad(format!("generalized Lorentzian needs d2 > 0 and p ≥ 1, got d2 = {d2}, p = {p}"));
                }
                let a = std::f64::consts::PI / (2.0 * p as f64);
                2.0 * d2 * a / a.sin()
            }
            PsfFamily::HardAperture { k } => {
                if !(k > 0.0 && k.is_finite()) {
                    return bad(format!("aperture half-width must be positive, got {k}"));
                }
                std::f64::consts::PI / k
            }
        };
        Ok(Self {
            family,
            d1: 1.0 / integral,
        })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(PsfFamily::Gaussian { sigma })
    }

    /// The PSF generated by the frequency measure `Q`: a Gaussian of variance
    /// `1/(4v)` for the Gaussian law of variance `v`, `sinc²` for a uniform pupil.
    pub fn matched_to(q: &Measure) -> Result<Self> {
        match q.kind() {
            MeasureKind::GaussianFrequency { variance } => Self::gaussian(0.5 / variance.sqrt()),
            MeasureKind::Density {
                interval,
                shape: crate::measure::DensityShape::Uniform,
                ..
            } if interval.0 == -interval.1 => Self::new(PsfFamily::HardAperture { k: interval.1 }),
            _ => Err(Error::Mismatch(format!(
                "no PSF is defined for the frequency measure `{}`",
                q.name()
            ))),
        }
    }

    /// Rejects `(Q, h)` pairs that do not describe the same optical system.
    pub fn check_matches(&self, q: &Measure) -> Result<()> {
        let matched = Self::matched_to(q)?;
        let same = match (matched.family, self.family) {
            (PsfFamily::Gaussian { sigma: a }, PsfFamily::Gaussian { sigma: b }) => (a - b).abs() <= 1e-12 * a,
            (PsfFamily::HardAperture { k: a }, PsfFamily::HardAperture { k: b }) => (a - b).abs() <= 1e-12 * a,
            _ => false,
        };
        if same {
            Ok(())
        } else {
            Err(Error::Mismatch(format!(
                "PSF {:?} is not the image of frequency measure `{}` (expected {:?})",
                self.family,
                q.name(),
                matched.family
            )))
        }
    }

    pub fn is_experimental(&self) -> bool {
        matches!(self.family, PsfFamily::HardAperture { .. })
    }

    pub fn label(&self) -> &'static str {
        match self.family {
            PsfFamily::Gaussian { .. } => "gaussian",
            PsfFamily::SuperGaussian { .. } => "super_gaussian",
            PsfFamily::GeneralizedLorentzian { .. } => "generalized_lorentzian",
            PsfFamily::HardAperture { .. } => "sinc2",
        }
    }

    /// Characteristic width used to lay out quadrature panels.
    pub fn width(&self) -> f64 {
        match self.family {
            PsfFamily::Gaussian { sigma } => sigma,
            PsfFamily::SuperGaussian { d2, .. } | PsfFamily::GeneralizedLorentzian { d2, .. } => d2,
            PsfFamily::HardAperture { k } => 1.0 / k,
        }
    }

    fn scale(&self) -> f64 {
        match self.family {
            PsfFamily::Gaussian { sigma } => sigma,
            PsfFamily::SuperGaussian { d2, .. } | PsfFamily::GeneralizedLorentzian { d2, .. } => d2,
            PsfFamily::HardAperture { k } => 1.0 / k,
        }
    }

    /// `h(ξ)`.
    pub fn h(&self, xi: f64) -> f64 {
        let s = xi / self.scale();
        self.d1
            * match self.family {
                PsfFamily::Gaussian { .. } => (-0.5 * s * s).exp(),
                PsfFamily::SuperGaussian { p, .. } => (-s.powi(2 * p as i32)).exp(),
                PsfFamily::GeneralizedLorentzian { p, .. } => 1.0 / (1.0 + s.powi(2 * p as i32)),
                PsfFamily::HardAperture { .. } => {
                    if s == 0.0 {
                        1.0
                    } else {
                        (s.sin() / s).powi(2)
                    }
                }
            }
    }

    /// Numerator polynomial of the `n`-th derivative in the scaled variable.
    fn derivative_poly(&self, n: usize) -> Option<Poly> {
        match self.family {
            PsfFamily::Gaussian { .. } => {
                // f^{(n)} = (−1)ⁿ Heₙ(s) f with He_{k+1} = s He_k − k He_{k−1}
                let mut prev = Poly(vec![0.0]);
                let mut cur = Poly::one();
                for k in 0..n {
                    let next = cur.times_monomial(1.0, 1).add(&prev.times_monomial(-(k as f64), 0));
                    prev = cur;
                    cur = next;
                }
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                Some(cur.times_monomial(sign, 0))
            }
            PsfFamily::SuperGaussian { p, .. } => {
                // f^{(n)} = Yₙ f with Y_{k+1} = Y_k' − 2p s^{2p−1} Y_k
                let two_p = 2 * p as usize;
                let mut y = Poly::one();
                for _ in 0..n {
                    y = y.derivative().add(&y.times_monomial(-(two_p as f64), two_p - 1));
                }
                Some(y)
            }
            PsfFamily::GeneralizedLorentzian { p, .. } => {
                // f^{(n)} = Rₙ / (1 + s^{2p})^{n+1} with
                // R_{k+1} = R_k' (1 + s^{2p}) − (k+1) 2p s^{2p−1} R_k
                let two_p = 2 * p as usize;
                let mut r = Poly::one();
                for k in 0..n {
                    let d = r.derivative();
                    r = d
                        .add(&d.times_monomial(1.0, two_p))
                        .add(&r.times_monomial(-(((k + 1) * two_p) as f64), two_p - 1));
                }
                Some(r)
            }
            PsfFamily::HardAperture { .. } => None,
        }
    }

    /// Scaled-variable envelope multiplying the derivative polynomial.
    /// `ln` of the scaled-variable envelope multiplying the derivative polynomial.
    fn ln_envelope(&self, s: f64, n: usize) -> f64 {
        let s = s.abs();
        match self.family {
            PsfFamily::Gaussian { .. } => -0.5 * s * s,
            PsfFamily::SuperGaussian { p, .. } => -s.powi(2 * p as i32),
            PsfFamily::GeneralizedLorentzian { p, .. } => {
                let two_p = 2.0 * p as f64;
                let ln_1p_u = if s > 1.0 {
                    two_p * s.ln() + s.powf(-two_p).ln_1p()
                } else {
                    s.powf(two_p).ln_1p()
                };
                -(n as f64 + 1.0) * ln_1p_u
            }
            PsfFamily::HardAperture { .. } => f64::NAN,
        }
    }

    /// `h^{(n)}(ξ)`.
    pub fn derivative(&self, n: usize, xi: f64) -> f64 {
        if n == 0 {
            return self.h(xi);
        }
        let sc = self.scale();
        match self.derivative_poly(n) {
            Some(poly) => {
                let s = xi / sc;
                let v = poly.eval(s);
                v.signum() * (self.d1.ln() + v.abs().ln() + self.ln_envelope(s, n) - n as f64 * sc.ln()).exp()
            }
            None => richardson_derivative(|t| self.h(t), xi, n, 0.1 * sc),
        }
    }

    /// `ln |h^{(n)}(ξ)|` for the smooth families.
    fn ln_abs_derivative(&self, n: usize, xi: f64) -> Option<f64> {
        let poly = self.derivative_poly(n)?;
        let sc = self.scale();
        let s = xi / sc;
        Some(self.d1.ln() + poly.eval(s).abs().ln() + self.ln_envelope(s, n) - n as f64 * sc.ln())
    }

    /// `h̲(ξ) = h(|ξ| + Δ₀)`: lower bound of `h(ξ − x)` over `|x| ≤ Δ₀`.
    pub fn lower_dominator(&self, xi: f64, delta0: f64) -> f64 {
        self.h(xi.abs() + delta0)
    }

    fn ln_lower_dominator(&self, xi: f64, delta0: f64) -> f64 {
        self.d1.ln() + self.ln_envelope((xi.abs() + delta0) / self.scale(), 0)
    }

    /// `h̄(ξ)`: upper bound of `|h^{(n)}(ξ − x)|` over `|x| ≤ Δ₀`, from the
    /// absolute-coefficient polynomial at `|ξ| + Δ₀` times the envelope at
    /// `max(|ξ| − Δ₀, 0)`.
    pub fn upper_dominator(&self, n: usize, xi: f64, delta0: f64) -> Option<f64> {
        self.ln_upper_dominator(n, xi, delta0).map(f64::exp)
    }

    fn ln_upper_dominator(&self, n: usize, xi: f64, delta0: f64) -> Option<f64> {
        let poly = self.derivative_poly(n)?;
        let sc = self.scale();
        let far = (xi.abs() + delta0) / sc;
        let near = (xi.abs() - delta0).max(0.0) / sc;
        Some(self.d1.ln() + poly.ln_eval_abs(far) + self.ln_envelope(near, n) - n as f64 * sc.ln())
    }
}

/// `exp(a) + exp(b)` in log space.
fn ln_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

/// `n`-th derivative by central differences with Richardson extrapolation.
pub fn richardson_derivative(f: impl Fn(f64) -> f64, x: f64, n: usize, h0: f64) -> f64 {
    let binom: Vec<f64> = {
        let mut row = vec![1.0];
        for k in 0..n {
            let mut next = vec![1.0; k + 2];
            for i in 1..=k {
                next[i] = row[i - 1] + row[i];
            }
            row = next;
        }
        row
    };
    let diff = |h: f64| {
        let mut acc = 0.0;
        for (k, c) in binom.iter().enumerate() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * c * f(x + (n as f64 / 2.0 - k as f64) * h);
        }
        acc / h.powi(n as i32)
    };
    const LEVELS: usize = 5;
    let mut table = vec![vec![0.0; LEVELS]; LEVELS];
    let mut h = h0;
    for i in 0..LEVELS {
        table[i][0] = diff(h);
        let mut factor = 4.0;
        for j in 1..=i {
            table[i][j] = table[i][j - 1] + (table[i][j - 1] - table[i - 1][j - 1]) / (factor - 1.0);
            factor *= 4.0;
        }
        h /= 2.0;
    }
    table[LEVELS - 1][LEVELS - 1]
}

/// `η(ξ) = ∫ h(ξ − x) P(dx)`.
pub fn intensity(psf: &Psf, p: &Measure, xi: f64) -> Result<f64> {
    p.integrate_f64(|x| psf.h(xi - x))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub family: String,
    pub delta0: f64,
    pub mu: usize,
    pub pass: bool,
    pub lower_violations: usize,
    pub upper_violations: usize,
    /// `∫ [h^{(μ)}]² / h̲ dξ`.
    pub integral_h_mu: f64,
    /// `∫ h̄² / h̲ dξ`.
    pub integral_bar_h: f64,
    pub grid_points: usize,
    pub reason: Option<String>,
}

const GRID_XI: usize = 2001;
const GRID_X: usize = 41;

/// Checks both pointwise inequalities on a grid and evaluates both integrals.
pub fn check_domination(psf: &Psf, delta0: f64, mu: usize) -> Result<DominationReport> {
    if !(delta0 > 0.0 && delta0.is_finite()) {
        return Err(Error::InvalidArgument(format!("Δ₀ must be positive, got {delta0}")));
    }
    let base = DominationReport {
        family: psf.label().to_owned(),
        delta0,
        mu,
        pass: false,
        lower_violations: 0,
        upper_violations: 0,
        integral_h_mu: f64::NAN,
        integral_bar_h: f64::NAN,
        grid_points: 0,
        reason: None,
    };
    if psf.is_experimental() {
        let k = psf.width().recip();
        return Ok(DominationReport {
            reason: Some(format!(
                "h vanishes at ξ = mπ/K (first zero at {:.6}), so no positive lower dominator exists",
                std::f64::consts::PI / k
            )),
            ..base
        });
    }
    let n = mu + 1;
    let span = 30.0 * psf.width() + 2.0 * delta0;
    let mut lower_violations = 0;
    let mut upper_violations = 0;
    for i in 0..GRID_XI {
        let xi = -span + 2.0 * span * i as f64 / (GRID_XI - 1) as f64;
        let lo = psf.lower_dominator(xi, delta0);
        let hi = psf.upper_dominator(n, xi, delta0).expect("smooth family");
        for j in 0..GRID_X {
            let x = -delta0 + 2.0 * delta0 * j as f64 / (GRID_X - 1) as f64;
            if psf.h(xi - x) < lo * (1.0 - 1e-12) {
                lower_violations += 1;
            }
            if psf.derivative(n, xi - x).abs() > hi * (1.0 + 1e-12) + 1e-300 {
                upper_violations += 1;
            }
        }
    }
    let w = psf.width();
    let ratio = |ln_num: f64, xi: f64| (2.0 * ln_num - psf.ln_lower_dominator(xi, delta0)).exp();
    let integral_h_mu = integrate_real_line(|xi| ratio(psf.ln_abs_derivative(mu, xi).expect("smooth family"), xi), w);
    let integral_bar_h =
        integrate_real_line(|xi| ratio(psf.ln_upper_dominator(n, xi, delta0).expect("smooth family"), xi), w);
    let finite = integral_h_mu.is_finite() && integral_bar_h.is_finite();
    let pass = lower_violations == 0 && upper_violations == 0 && finite;
    let reason = (!pass).then(|| {
        format!(
            "{lower_violations} lower and {upper_violations} upper violations; integrals {integral_h_mu:e}, {integral_bar_h:e}"
        )
    });
    Ok(DominationReport {
        pass,
        lower_violations,
        upper_violations,
        integral_h_mu,
        integral_bar_h,
        grid_points: GRID_XI * GRID_X,
        reason,
        ..base
    })
}

fn gauss_pair() -> &'static (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    static RULES: OnceLock<(Vec<(f64, f64)>, Vec<(f64, f64)>)> = OnceLock::new();
    RULES.get_or_init(|| {
        let rule = |n| {
            let q = QuadratureRule::gauss_legendre(n, 128).expect("Gauss–Legendre rule");
            q.nodes().iter().zip(q.weights()).map(|(x, w)| (x.to_f64(), w.to_f64())).collect()
        };
        (rule(16), rule(32))
    })
}

/// 16- and 32-point rules on `[a, b]`, plus the 32-point integral of the
/// integrand's rounding-noise estimate.
fn panel_pair(f: &impl Fn(f64) -> (f64, f64), a: f64, b: f64) -> (f64, f64, f64) {
    let (g16, g32) = gauss_pair();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let coarse: f64 = g16.iter().map(|(x, w)| w * f(mid + half * x).0).sum::<f64>() * half;
    let (mut fine, mut noise) = (0.0, 0.0);
    for (x, w) in g32 {
        let (v, n) = f(mid + half * x);
        fine += w * v;
        noise += w * n;
    }
    (coarse, fine * half, noise * half)
}

struct PanelResult {
    value: f64,
    panels: usize,
}

fn adaptive_panel(f: &impl Fn(f64) -> (f64, f64), a: f64, b: f64, abs_tol: f64, depth: u32) -> PanelResult {
    let (coarse, fine, noise) = panel_pair(f, a, b);
    let err = (fine - coarse).abs();
    let tol = abs_tol.max(PANEL_RELATIVE_TOLERANCE * fine.abs()).max(4.0 * noise);
    if !err.is_finite() || err <= tol || depth >= MAX_PANEL_DEPTH {
        return PanelResult { value: fine, panels: 1 };
    }
    let m = 0.5 * (a + b);
    let l = adaptive_panel(f, a, m, abs_tol / 2.0, depth + 1);
    let r = adaptive_panel(f, m, b, abs_tol / 2.0, depth + 1);
    PanelResult {
        value: l.value + r.value,
        panels: l.panels + r.panels,
    }
}

/// Panel edges on `[−t, t]`: geometric widths from `w/4` outward, each cell
/// split in four.
fn panel_edges(t: f64, w: f64) -> Vec<f64> {
    let mut pos = vec![0.0];
    let mut e = 0.25 * w;
    while e < t {
        pos.push(e);
        e *= 2.0;
    }
    pos.push(t);
    let mut fine = Vec::new();
    for win in pos.windows(2) {
        for k in 0..4 {
            fine.push(win[0] + (win[1] - win[0]) * k as f64 / 4.0);
        }
    }
    fine.push(t);
    let mut edges: Vec<f64> = fine.iter().rev().map(|x| -x).collect();
    edges.pop();
    edges.extend(fine);
    edges
}

/// `∫_{−t}^{t} f` over parallel adaptive panels; panel sums are reduced in
/// order, so the result does not depend on scheduling.
fn integrate_panels(f: &(impl Fn(f64) -> (f64, f64) + Sync), t: f64, w: f64) -> (f64, usize) {
    let edges = panel_edges(t, w);
    let coarse: Vec<f64> = edges.par_windows(2).map(|e| panel_pair(f, e[0], e[1]).1).collect();
    let scale: f64 = coarse.iter().map(|v| v.abs()).sum();
    let abs_tol = 1e-11 * scale / (edges.len() - 1) as f64;
    let parts: Vec<PanelResult> = edges
        .par_windows(2)
        .map(|e| adaptive_panel(f, e[0], e[1], abs_tol, 0))
        .collect();
    let mut value = 0.0;
    let mut panels = 0;
    for p in parts {
        value += p.value;
        panels += p.panels;
    }
    (value, panels)
}

/// `∫_t^∞ f` over doubling panels until they stop contributing.
fn integrate_tail(f: &impl Fn(f64) -> f64, t: f64) -> f64 {
    let mut sum = 0.0;
    let mut a = t;
    for k in 0..200 {
        let b = 2.0 * a;
        let v = panel_pair(&|x| (f(x), 0.0), a, b).1;
        sum += v;
        if !sum.is_finite() {
            return f64::INFINITY;
        }
        if k >= 3 && v.abs() <= 1e-6 * sum.abs() {
            return sum;
        }
        if sum == 0.0 && v == 0.0 && k >= 3 {
            return 0.0;
        }
        a = b;
    }
    f64::INFINITY
}

fn integrate_real_line(f: impl Fn(f64) -> f64 + Sync, w: f64) -> f64 {
    let t = 16.0 * w;
    let (core, _) = integrate_panels(&|x| (f(x), 0.0), t, w);
    core + integrate_tail(&f, t) + integrate_tail(&|x| f(-x), t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FisherReport {
    pub family: String,
    pub mu: usize,
    pub delta: f64,
    /// `∫ η̇² / η₀ dξ`.
    pub fisher: f64,
    pub dot_beta: f64,
    pub n_photons: f64,
    pub crb: f64,
    /// Half-width `T` of the integration domain.
    pub truncation_point: f64,
    /// Certified bound on the omitted `∫_{|ξ|>T}`; `None` without dominators.
    pub tail_bound: Option<f64>,
    pub panels: usize,
    pub validated: bool,
    pub note: Option<String>,
}

/// `β̇² / (N · fisher)`.
pub fn crb(dot_beta: f64, n_photons: f64, fisher: f64) -> Result<f64> {
    if !(n_photons > 0.0) {
        return Err(Error::InvalidArgument(format!("photon number N must be positive, got {n_photons}")));
    }
    if !(fisher > 0.0 && fisher.is_finite()) {
        return Err(Error::Degenerate(format!("Fisher information is {fisher}")));
    }
    Ok(dot_beta * dot_beta / (n_photons * fisher))
}

/// Fisher information of direct imaging along the tilted submodel.
///
/// Smooth PSFs must pass [`check_domination`] at `Δ₀ = Δ`; the hard aperture
/// runs only with `experimental` set and its result is marked unvalidated.
pub fn submodel_fisher(psf: &Psf, sub: &TiltedSubmodel, n_photons: f64, experimental: bool) -> Result<FisherReport> {
    let mu = sub.mu();
    let delta = sub.delta();
    let p0 = sub.p0();
    if psf.is_experimental() && !experimental {
        return Err(Error::Domination(
            "the sinc² PSF has zeros, so no positive lower dominator exists; \
             rerun with the experimental flag for an unvalidated estimate"
                .into(),
        ));
    }
    if !psf.is_experimental() {
        let dom = check_domination(psf, delta, mu)?;
        if !dom.pass {
            return Err(Error::Domination(dom.reason.unwrap_or_default()));
        }
    }

    let prec = p0.prec();
    let nodes: Vec<f64> = p0.nodes_f64();
    let weights: Vec<f64> = p0.weights_f64();
    let score_weights: Vec<f64> = p0
        .nodes()
        .iter()
        .zip(p0.weights())
        .map(|(x, w)| Float::with_val(prec, sub.score(x) * w).to_f64())
        .collect();
    let floor = if psf.is_experimental() { EXPERIMENTAL_FLOOR } else { 0.0 };
    // returns η̇²/η₀ with the rounding noise left by cancellation in η̇
    let integrand = |xi: f64| {
        let mut eta = 0.0;
        let mut dot = 0.0;
        let mut mass = 0.0;
        for ((x, w), c) in nodes.iter().zip(&weights).zip(&score_weights) {
            let h = psf.h(xi - x);
            eta += w * h;
            dot += c * h;
            mass += c.abs() * h;
        }
        let eta = eta.max(floor);
        if eta > 0.0 {
            let jitter = 8.0 * f64::EPSILON * mass;
            (dot * dot / eta, (2.0 * dot.abs() + jitter) * jitter / eta)
        } else {
            (0.0, 0.0)
        }
    };

    let dot_beta = sub.dot_beta(&crate::submodel::MomentFunctional::power(mu))?;
    let w = psf.width();
    let (fisher, t, panels, tail_bound) = if psf.is_experimental() {
        let t = 2000.0 * w;
        let (v, panels) = integrate_panels(&integrand, t, w);
        (v, t, panels, None)
    } else {
        // η̇²/η₀ ≤ (Δ^μ/μ!)² (V_μμ |h^{(μ)}| + Δ h̄/(μ+1))² / h̲
        let v_mm = sub.standard().v()[(mu, mu)].to_f64();
        let fact: f64 = (1..=mu).map(|k| k as f64).product();
        let lead = delta.powi(mu as i32) / fact;
        let bound = |xi: f64| {
            let ln_hbar = psf.ln_upper_dominator(mu + 1, xi, delta).expect("smooth family");
            let ln_hmu = psf.ln_abs_derivative(mu, xi).expect("smooth family");
            let ln_num = lead.ln() + ln_add_exp(v_mm.ln() + ln_hmu, (delta / (mu as f64 + 1.0)).ln() + ln_hbar);
            (2.0 * ln_num - psf.ln_lower_dominator(xi, delta)).exp()
        };
        let mut t = 8.0 * w + delta;
        let mut result = None;
        for _ in 0..MAX_DOUBLINGS {
            let tail = 2.0 * integrate_tail(&bound, t);
            let (v, panels) = integrate_panels(&integrand, t, w);
            if tail <= TAIL_TOLERANCE * v {
                result = Some((v, t, panels, Some(tail)));
                break;
            }
            t *= 2.0;
        }
        result.ok_or_else(|| Error::Numeric(format!("Fisher tail not certified below {TAIL_TOLERANCE:e} by ξ = {t}")))?
    };
    let crb_value = crb(dot_beta, n_photons, fisher)?;
    Ok(FisherReport {
        family: psf.label().to_owned(),
        mu,
        delta,
        fisher,
        dot_beta,
        n_photons,
        crb: crb_value,
        truncation_point: t,
        tail_bound,
        panels,
        validated: !psf.is_experimental(),
        note: psf
            .is_experimental()
            .then(|| "unvalidated: PSF with zeros, Fisher information is an open conjecture regime".to_owned()),
    })
}
