//! Probability measures on the real line: object distributions `P` and
//! spatial-frequency laws `Q`.
//!
//! Every measure carries an extended-precision discretization (atoms exactly,
//! densities through a mapped Gauss–Legendre rule, the Gaussian frequency law
//! through Gauss–Hermite). Moments of the Gaussian law come from the closed
//! form instead of the rule.

use std::fmt;
use std::sync::Arc;

use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precision::{mp, DEFAULT_PRECISION_BITS};
use crate::quadrature::QuadratureRule;

/// Gauss–Legendre nodes used for densities unless overridden.
pub const DEFAULT_DENSITY_NODES: usize = 200;

/// Gauss–Hermite nodes used to integrate against the Gaussian frequency law.
pub const DEFAULT_HERMITE_NODES: usize = 64;

/// Largest moment order served by [`Measure::moment`] unless overridden.
pub const DEFAULT_MAX_MOMENT_ORDER: usize = 160;

/// Variance of the frequency law `Q(dk) = sqrt(2/π) exp(-2k²) dk`.
pub const STANDARD_GAUSSIAN_VARIANCE: f64 = 0.25;

const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub position: f64,
    pub weight: f64,
}

/// Unnormalized density shape on the declared interval.
#[derive(Clone)]
pub enum DensityShape {
    Uniform,
    /// `1 + curvature · x²`.
    Quadratic { curvature: f64 },
    /// `exp(-x² / (2σ²))`.
    TruncatedGaussian { sigma: f64 },
    /// `f(x / scale)`, evaluated in double precision.
    Custom {
        name: String,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        scale: f64,
    },
}

impl DensityShape {
    fn eval(&self, x: &Float) -> Float {
        let prec = x.prec();
        match self {
            DensityShape::Uniform => Float::with_val(prec, 1),
            DensityShape::Quadratic { curvature } => {
                Float::with_val(prec, 1) + Float::with_val(prec, x.square_ref()) * mp(prec, *curvature)
            }
            DensityShape::TruncatedGaussian { sigma } => {
                let s = mp(prec, *sigma);
                let t = Float::with_val(prec, x / &s);
                let e = -Float::with_val(prec, t.square_ref()) / 2u32;
                e.exp()
            }
            DensityShape::Custom { f, scale, .. } => mp(prec, f(x.to_f64() / scale)),
        }
    }

    fn rescaled(&self, s: f64) -> Self {
        match self {
            DensityShape::Uniform => DensityShape::Uniform,
            DensityShape::Quadratic { curvature } => DensityShape::Quadratic {
                curvature: curvature / (s * s),
            },
            DensityShape::TruncatedGaussian { sigma } => DensityShape::TruncatedGaussian { sigma: sigma * s },
            DensityShape::Custom { name, f, scale } => DensityShape::Custom {
                name: name.clone(),
                f: Arc::clone(f),
                scale: scale * s,
            },
        }
    }

    fn label(&self) -> String {
        match self {
            DensityShape::Uniform => "uniform".into(),
            DensityShape::Quadratic { curvature } => format!("quadratic(1+{curvature}x^2)"),
            DensityShape::TruncatedGaussian { sigma } => format!("truncated-gaussian(sigma={sigma})"),
            DensityShape::Custom { name, .. } => name.clone(),
        }
    }

    fn is_even(&self) -> bool {
        !matches!(self, DensityShape::Custom { .. })
    }
}

impl fmt::Debug for DensityShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Clone, Debug)]
pub enum MeasureKind {
    Atoms(Vec<Atom>),
    Density {
        interval: (f64, f64),
        shape: DensityShape,
        nodes: usize,
    },
    /// Centred normal law on the whole line; only meaningful as `Q`.
    GaussianFrequency { variance: f64 },
}

/// An immutable probability measure with its extended-precision discretization.
#[derive(Clone)]
pub struct Measure {
    name: String,
    kind: MeasureKind,
    prec: u32,
    max_order: usize,
    half_width: Option<Float>,
    nodes: Arc<Vec<Float>>,
    weights: Arc<Vec<Float>>,
}

impl fmt::Debug for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Measure")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("prec", &self.prec)
            .field("half_width", &self.half_width_f64())
            .finish()
    }
}

impl Measure {
    pub fn atoms(atoms: Vec<Atom>, prec: u32) -> Result<Self> {
        Self::build("atoms".into(), MeasureKind::Atoms(atoms), prec)
    }

    /// Symmetric pair `{-a, +a}` with weights one half.
    pub fn two_point(a: f64, prec: u32) -> Result<Self> {
        let atoms = vec![
            Atom { position: -a, weight: 0.5 },
            Atom { position: a, weight: 0.5 },
        ];
        Self::build("two-point".into(), MeasureKind::Atoms(atoms), prec)
    }

    pub fn point_mass(x: f64, prec: u32) -> Result<Self> {
        Self::build(
            "point-mass".into(),
            MeasureKind::Atoms(vec![Atom { position: x, weight: 1.0 }]),
            prec,
        )
    }

    pub fn density(interval: (f64, f64), shape: DensityShape, prec: u32) -> Result<Self> {
        Self::density_with_nodes(interval, shape, DEFAULT_DENSITY_NODES, prec)
    }

    pub fn density_with_nodes(interval: (f64, f64), shape: DensityShape, nodes: usize, prec: u32) -> Result<Self> {
        let name = shape.label();
        Self::build(name, MeasureKind::Density { interval, shape, nodes }, prec)
    }

    /// Uniform density on `[-delta, delta]`.
    pub fn uniform(delta: f64, prec: u32) -> Result<Self> {
        Self::density((-delta, delta), DensityShape::Uniform, prec)
    }

    /// Density proportional to `1 + (x/delta)²` on `[-delta, delta]`; the
    /// standardized shape is `1 + y²` for every `delta`.
    pub fn quadratic(delta: f64, prec: u32) -> Result<Self> {
        Self::density(
            (-delta, delta),
            DensityShape::Quadratic {
                curvature: 1.0 / (delta * delta),
            },
            prec,
        )
    }

    /// Normal density with standard deviation `sigma · delta` truncated to
    /// `[-delta, delta]`.
    pub fn truncated_gaussian(delta: f64, sigma: f64, prec: u32) -> Result<Self> {
        Self::density(
            (-delta, delta),
            DensityShape::TruncatedGaussian { sigma: sigma * delta },
            prec,
        )
    }

    /// The Gaussian spatial-frequency law with the given variance.
    pub fn gaussian_frequency(variance: f64, prec: u32) -> Result<Self> {
        Self::build(
            "gaussian-frequency".into(),
            MeasureKind::GaussianFrequency { variance },
            prec,
        )
    }

    /// Reads atoms from two-column CSV rows `position,weight`. A header row is
    /// skipped when its first field is not numeric.
    pub fn atoms_from_csv<R: std::io::Read>(reader: R, prec: u32) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut atoms = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::InvalidMeasure(format!("atoms CSV: {e}")))?;
            if rec.len() < 2 {
                return Err(Error::InvalidMeasure(format!("atoms CSV line {}: expected two columns", line + 1)));
            }
            let pos = rec[0].parse::<f64>();
            let w = rec[1].parse::<f64>();
            match (pos, w) {
                (Ok(position), Ok(weight)) => atoms.push(Atom { position, weight }),
                _ if line == 0 => continue,
                _ => {
                    return Err(Error::InvalidMeasure(format!(
                        "atoms CSV line {}: could not parse `{}`",
                        line + 1,
                        rec.iter().collect::<Vec<_>>().join(",")
                    )))
                }
            }
        }
        Self::atoms(atoms, prec)
    }

    fn build(name: String, kind: MeasureKind, prec: u32) -> Result<Self> {
        if prec < crate::precision::MIN_PRECISION_BITS {
            return Err(Error::InvalidArgument(format!("precision must be at least 64 bits, got {prec}")));
        }
        let (nodes, weights, half_width) = match &kind {
            MeasureKind::Atoms(atoms) => discretize_atoms(atoms, prec)?,
            MeasureKind::Density { interval, shape, nodes } => discretize_density(*interval, shape, *nodes, prec)?,
            MeasureKind::GaussianFrequency { variance } => {
                let rule = QuadratureRule::gauss_hermite(DEFAULT_HERMITE_NODES, *variance, prec)?;
                (rule.nodes().to_vec(), rule.weights().to_vec(), None)
            }
        };
        Ok(Self {
            name,
            kind,
            prec,
            max_order: DEFAULT_MAX_MOMENT_ORDER,
            half_width,
            nodes: Arc::new(nodes),
            weights: Arc::new(weights),
        })
    }

    /// Same measure recomputed at a different precision.
    pub fn with_precision(&self, prec: u32) -> Result<Self> {
        let mut m = Self::build(self.name.clone(), self.kind.clone(), prec)?;
        m.max_order = self.max_order;
        Ok(m)
    }

    pub fn with_max_order(mut self, cap: usize) -> Self {
        self.max_order = cap;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &MeasureKind {
        &self.kind
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// `sup |x|` over the support; `None` for the whole-line Gaussian law.
    pub fn half_width(&self) -> Option<&Float> {
        self.half_width.as_ref()
    }

    pub fn half_width_f64(&self) -> Option<f64> {
        self.half_width.as_ref().map(Float::to_f64)
    }

    pub fn nodes(&self) -> &[Float] {
        &self.nodes
    }

    pub fn weights(&self) -> &[Float] {
        &self.weights
    }

    pub fn nodes_f64(&self) -> Vec<f64> {
        self.nodes.iter().map(Float::to_f64).collect()
    }

    pub fn weights_f64(&self) -> Vec<f64> {
        self.weights.iter().map(Float::to_f64).collect()
    }

    /// Number of support points for atomic measures.
    pub fn atom_count(&self) -> Option<usize> {
        match &self.kind {
            MeasureKind::Atoms(_) => Some(self.nodes.len()),
            _ => None,
        }
    }

    pub fn is_gaussian_frequency(&self) -> bool {
        matches!(self.kind, MeasureKind::GaussianFrequency { .. })
    }

    /// Density on a compact interval, bounded away from zero at every node:
    /// sufficient for the log-integrability condition of the Szegő class.
    pub fn is_szego_class(&self) -> bool {
        match &self.kind {
            MeasureKind::Density { .. } => self.weights.iter().all(|w| *w > 0),
            _ => false,
        }
    }

    /// Whether the measure is invariant under `x ↦ -x` (checked on the declaration).
    pub fn is_symmetric(&self) -> bool {
        match &self.kind {
            MeasureKind::GaussianFrequency { .. } => true,
            MeasureKind::Density { interval, shape, .. } => shape.is_even() && interval.0 == -interval.1,
            MeasureKind::Atoms(atoms) => atoms.iter().all(|a| {
                atoms
                    .iter()
                    .any(|b| (b.position + a.position).abs() <= 1e-15 * a.position.abs().max(1.0) && b.weight == a.weight)
            }),
        }
    }

    /// Whether `x` belongs to the support (atoms within relative 1e-12).
    pub fn contains(&self, x: f64) -> bool {
        match &self.kind {
            MeasureKind::Atoms(atoms) => atoms
                .iter()
                .any(|a| a.weight > 0.0 && (a.position - x).abs() <= 1e-12 * a.position.abs().max(1e-300)),
            MeasureKind::Density { .. } => {
                let hw = self.half_width_f64().unwrap_or(f64::INFINITY);
                let (lo, hi) = self.interval_f64();
                x >= lo - 1e-15 * hw && x <= hi + 1e-15 * hw
            }
            MeasureKind::GaussianFrequency { .. } => x.is_finite(),
        }
    }

    /// Smallest interval containing the support.
    pub fn interval_f64(&self) -> (f64, f64) {
        let nodes = self.nodes_f64();
        match &self.kind {
            MeasureKind::Density { interval, .. } => *interval,
            MeasureKind::GaussianFrequency { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            MeasureKind::Atoms(_) => (
                nodes.iter().copied().fold(f64::INFINITY, f64::min),
                nodes.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ),
        }
    }

    fn check_order(&self, p: usize) -> Result<()> {
        if p > self.max_order {
            return Err(Error::OrderCap {
                requested: p,
                cap: self.max_order,
            });
        }
        Ok(())
    }

    /// `∫ x^p P(dx)` in extended precision.
    pub fn moment(&self, p: usize) -> Result<Float> {
        self.check_order(p)?;
        Ok(self.moments(p)?.pop().expect("non-empty"))
    }

    /// All moments of orders `0..=p_max`.
    pub fn moments(&self, p_max: usize) -> Result<Vec<Float>> {
        self.check_order(p_max)?;
        let prec = self.prec;
        if let MeasureKind::GaussianFrequency { variance } = self.kind {
            // E[k^{2m}] = (2m-1)!! σ^{2m}
            let var = mp(prec, variance);
            let mut out = Vec::with_capacity(p_max + 1);
            let mut even = Float::with_val(prec, 1);
            for p in 0..=p_max {
                if p % 2 == 1 {
                    out.push(Float::new(prec));
                } else {
                    if p > 0 {
                        even *= (p - 1) as u32;
                        even *= &var;
                    }
                    out.push(even.clone());
                }
            }
            return Ok(out);
        }
        let mut out = vec![Float::new(prec); p_max + 1];
        for (x, w) in self.nodes.iter().zip(self.weights.iter()) {
            let mut term = w.clone();
            for slot in out.iter_mut() {
                *slot += &term;
                term *= x;
            }
        }
        Ok(out)
    }

    /// `∫ f dP` through the attached discretization.
    pub fn integrate(&self, f: impl Fn(&Float) -> Float) -> Result<Float> {
        let mut acc = Float::new(self.prec);
        for (x, w) in self.nodes.iter().zip(self.weights.iter()) {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::NonFinite { node: x.to_f64() });
            }
            acc += v * w;
        }
        Ok(acc)
    }

    /// Double-precision counterpart of [`Measure::integrate`].
    pub fn integrate_f64(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(self.weights.iter()) {
            let x = x.to_f64();
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::NonFinite { node: x });
            }
            acc += w.to_f64() * v;
        }
        Ok(acc)
    }

    /// Pushforward under `x ↦ s·x` for `s > 0`.
    pub fn rescaled(&self, s: &Float) -> Result<Self> {
        if *s <= 0 || !s.is_finite() {
            return Err(Error::InvalidArgument(format!("rescale factor must be positive, got {s}")));
        }
        let prec = self.prec;
        let s64 = s.to_f64();
        let kind = match &self.kind {
            MeasureKind::Atoms(atoms) => MeasureKind::Atoms(
                atoms
                    .iter()
                    .map(|a| Atom {
                        position: a.position * s64,
                        weight: a.weight,
                    })
                    .collect(),
            ),
            MeasureKind::Density { interval, shape, nodes } => MeasureKind::Density {
                interval: (interval.0 * s64, interval.1 * s64),
                shape: shape.rescaled(s64),
                nodes: *nodes,
            },
            MeasureKind::GaussianFrequency { .. } => {
                return Err(Error::InvalidMeasure("the Gaussian frequency law cannot be rescaled".into()))
            }
        };
        Ok(Self {
            name: self.name.clone(),
            kind,
            prec,
            max_order: self.max_order,
            half_width: self.half_width.as_ref().map(|h| Float::with_val(prec, h * s)),
            nodes: Arc::new(self.nodes.iter().map(|x| Float::with_val(prec, x * s)).collect()),
            weights: Arc::clone(&self.weights),
        })
    }

    /// Reweights the discretization by `g(x)`, renormalizing to a probability
    /// measure. Used for tilted submodels; the result keeps the same support.
    pub fn reweighted(&self, g: impl Fn(&Float) -> Float) -> Result<Self> {
        if self.is_gaussian_frequency() {
            return Err(Error::InvalidMeasure("cannot reweight the Gaussian frequency law".into()));
        }
        let prec = self.prec;
        let mut weights = Vec::with_capacity(self.nodes.len());
        let mut total = Float::new(prec);
        for (x, w) in self.nodes.iter().zip(self.weights.iter()) {
            let gx = g(x);
            if !gx.is_finite() || gx < 0 {
                return Err(Error::InvalidMeasure(format!("reweighting factor {gx} at x = {x}")));
            }
            let v = Float::with_val(prec, w * &gx);
            total += &v;
            weights.push(v);
        }
        for w in &mut weights {
            *w /= &total;
        }
        Ok(Self {
            name: format!("{}-tilted", self.name),
            kind: self.kind.clone(),
            prec,
            max_order: self.max_order,
            half_width: self.half_width.clone(),
            nodes: Arc::clone(&self.nodes),
            weights: Arc::new(weights),
        })
    }

    /// Splits into the unit-half-width shape and its half-width.
    pub fn standardize(&self) -> Result<StandardizedMeasure> {
        let Some(hw) = &self.half_width else {
            return Err(Error::InvalidMeasure(format!(
                "`{}` has unbounded support and cannot be standardized",
                self.name
            )));
        };
        if hw.is_zero() || !hw.is_finite() {
            return Err(Error::InvalidMeasure(format!(
                "`{}` has zero or non-finite half-width {hw}",
                self.name
            )));
        }
        let inv = Float::with_val(self.prec, 1) / hw;
        let mut base = self.rescaled(&inv)?;
        base.half_width = Some(Float::with_val(self.prec, 1));
        Ok(StandardizedMeasure {
            base,
            delta: hw.clone(),
        })
    }
}

/// A measure of unit half-width together with the scale that maps it back.
#[derive(Clone, Debug)]
pub struct StandardizedMeasure {
    pub base: Measure,
    pub delta: Float,
}

impl StandardizedMeasure {
    pub fn delta_f64(&self) -> f64 {
        self.delta.to_f64()
    }

    /// The original-scale measure `P(·) = R(· / Δ)`.
    pub fn at_scale(&self, delta: f64) -> Result<Measure> {
        self.base.rescaled(&mp(self.base.prec(), delta))
    }
}

fn discretize_atoms(atoms: &[Atom], prec: u32) -> Result<(Vec<Float>, Vec<Float>, Option<Float>)> {
    if atoms.is_empty() {
        return Err(Error::InvalidMeasure("no atoms".into()));
    }
    let mut total = 0.0;
    for a in atoms {
        if !(a.position.is_finite() && a.weight.is_finite()) {
            return Err(Error::InvalidMeasure(format!("non-finite atom {a:?}")));
        }
        if a.weight < 0.0 {
            return Err(Error::InvalidMeasure(format!("negative weight {} at {}", a.weight, a.position)));
        }
        total += a.weight;
    }
    if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(Error::InvalidMeasure(format!("atom weights sum to {total}, expected 1")));
    }
    let kept: Vec<&Atom> = atoms.iter().filter(|a| a.weight > 0.0).collect();
    let nodes: Vec<Float> = kept.iter().map(|a| mp(prec, a.position)).collect();
    let weights: Vec<Float> = kept.iter().map(|a| mp(prec, a.weight)).collect();
    let hw = kept.iter().map(|a| a.position.abs()).fold(0.0, f64::max);
    Ok((nodes, weights, Some(mp(prec, hw))))
}

fn discretize_density(
    interval: (f64, f64),
    shape: &DensityShape,
    n: usize,
    prec: u32,
) -> Result<(Vec<Float>, Vec<Float>, Option<Float>)> {
    let (c1, c2) = interval;
    if !(c1.is_finite() && c2.is_finite() && c1 < c2) {
        return Err(Error::InvalidMeasure(format!("density interval [{c1}, {c2}] must be finite and non-empty")));
    }
    let rule = QuadratureRule::gauss_legendre(n, prec)?.mapped(&mp(prec, c1), &mp(prec, c2))?;
    let mut weights = Vec::with_capacity(n);
    let mut total = Float::new(prec);
    for (x, w) in rule.nodes().iter().zip(rule.weights()) {
        let f = shape.eval(x);
        if !f.is_finite() || f < 0 {
            return Err(Error::InvalidMeasure(format!("density {} is {f} at x = {x}", shape.label())));
        }
        let v = Float::with_val(prec, &f * w);
        total += &v;
        weights.push(v);
    }
    if total <= 0 {
        return Err(Error::InvalidMeasure(format!("density {} integrates to zero", shape.label())));
    }
    for w in &mut weights {
        *w /= &total;
    }
    Ok((rule.nodes().to_vec(), weights, Some(mp(prec, c1.abs().max(c2.abs())))))
}

impl Default for Measure {
    fn default() -> Self {
        Measure::uniform(1.0, DEFAULT_PRECISION_BITS).expect("uniform measure")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: u32 = 256;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn point_mass_moments_vanish() {
        let m = Measure::point_mass(0.0, P).unwrap();
        assert_eq!(m.moment(3).unwrap().to_f64(), 0.0);
        assert_eq!(m.moment(0).unwrap().to_f64(), 1.0);
    }

    #[test]
    fn uniform_moments() {
        let m = Measure::uniform(1.0, P).unwrap();
        let m2 = m.moment(2).unwrap();
        let third = Float::with_val(P, 1) / 3u32;
        assert!(Float::with_val(P, &m2 - &third).abs() < 1e-60);
        assert!(m.moment(3).unwrap().to_f64().abs() < 1e-70);
    }

    #[test]
    fn order_cap_is_reported() {
        let m = Measure::uniform(1.0, P).unwrap().with_max_order(10);
        match m.moment(11) {
            Err(Error::OrderCap { requested: 11, cap: 10 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn integrate_examples() {
        let u = Measure::uniform(1.0, P).unwrap();
        assert!(close(u.integrate_f64(|_| 1.0).unwrap(), 1.0, 1e-14));
        assert!(close(u.integrate_f64(|x| x * x).unwrap(), 1.0 / 3.0, 1e-14));
        let a = Measure::atoms(vec![Atom { position: 1.0, weight: 1.0 }], P).unwrap();
        assert!(close(a.integrate(|x| x.clone().exp()).unwrap().to_f64(), std::f64::consts::E, 1e-15));
    }

    #[test]
    fn integrate_reports_non_finite_node() {
        let a = Measure::two_point(0.5, P).unwrap();
        match a.integrate_f64(|x| if x > 0.0 { f64::NAN } else { 1.0 }) {
            Err(Error::NonFinite { node }) => assert_eq!(node, 0.5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn standardize_uniform_and_atoms() {
        let u = Measure::uniform(0.1, P).unwrap().standardize().unwrap();
        assert!(close(u.delta_f64(), 0.1, 1e-15));
        assert_eq!(u.base.half_width_f64(), Some(1.0));
        assert!(close(u.base.moment(2).unwrap().to_f64(), 1.0 / 3.0, 1e-14));

        let a = Measure::atoms(
            vec![
                Atom { position: -0.05, weight: 0.5 },
                Atom { position: 0.05, weight: 0.5 },
            ],
            P,
        )
        .unwrap()
        .standardize()
        .unwrap();
        assert!(close(a.delta_f64(), 0.05, 1e-15));
        let nodes = a.base.nodes_f64();
        assert!(close(nodes[0], -1.0, 1e-15) && close(nodes[1], 1.0, 1e-15));
    }

    #[test]
    fn standardize_quadratic_changes_variables() {
        // f(x) ∝ 1 + x² on [-Δ, Δ] becomes ∝ 1 + Δ² y² on [-1, 1].
        let delta = 0.3;
        let p = Measure::density((-delta, delta), DensityShape::Quadratic { curvature: 1.0 }, P).unwrap();
        let r = p.standardize().unwrap().base;
        let expect = Measure::density((-1.0, 1.0), DensityShape::Quadratic { curvature: delta * delta }, P).unwrap();
        for k in [0, 2, 4, 6] {
            assert!(close(r.moment(k).unwrap().to_f64(), expect.moment(k).unwrap().to_f64(), 1e-14));
        }
    }

    #[test]
    fn rejects_invalid_measures() {
        assert!(Measure::atoms(vec![Atom { position: 0.0, weight: 0.7 }], P).is_err());
        assert!(Measure::atoms(
            vec![
                Atom { position: 0.0, weight: 1.5 },
                Atom { position: 1.0, weight: -0.5 }
            ],
            P
        )
        .is_err());
        assert!(Measure::density((1.0, 1.0), DensityShape::Uniform, P).is_err());
        assert!(Measure::gaussian_frequency(0.25, P).unwrap().standardize().is_err());
        assert!(Measure::point_mass(0.0, P).unwrap().standardize().is_err());
    }

    #[test]
    fn gaussian_frequency_moments() {
        let q = Measure::gaussian_frequency(STANDARD_GAUSSIAN_VARIANCE, P).unwrap();
        let m = q.moments(6).unwrap();
        let expect = [1.0, 0.0, 0.25, 0.0, 3.0 / 16.0, 0.0, 15.0 / 64.0];
        for (got, want) in m.iter().zip(expect) {
            assert!(close(got.to_f64(), want, 1e-15));
        }
        assert!(close(q.integrate_f64(|k| k.powi(4)).unwrap(), 3.0 / 16.0, 1e-14));
        assert!(q.half_width().is_none());
    }

    #[test]
    fn atoms_csv_with_header() {
        let data = "position,weight\n-1,0.25\n0.5,0.75\n";
        let m = Measure::atoms_from_csv(data.as_bytes(), P).unwrap();
        assert_eq!(m.atom_count(), Some(2));
        assert!(close(m.moment(1).unwrap().to_f64(), -0.25 + 0.375, 1e-15));
        assert!(Measure::atoms_from_csv("1,0.5\nx,y\n".as_bytes(), P).is_err());
    }

    #[test]
    fn symmetry_and_support() {
        assert!(Measure::uniform(0.2, P).unwrap().is_symmetric());
        assert!(Measure::two_point(0.2, P).unwrap().is_symmetric());
        let skew = Measure::atoms(
            vec![
                Atom { position: -0.1, weight: 0.3 },
                Atom { position: 0.1, weight: 0.7 },
            ],
            P,
        )
        .unwrap();
        assert!(!skew.is_symmetric());
        assert!(skew.contains(0.1) && !skew.contains(0.05));
        let u = Measure::uniform(0.2, P).unwrap();
        assert!(u.contains(0.2) && u.contains(-0.1) && !u.contains(0.3));
    }
}
