//! Spatial-mode demultiplexing: PAD/iPAD mode amplitudes built from the
//! orthonormal polynomials of the frequency measure `Q`, photon-count
//! simulation and the unbiased moment estimators.
//!
//! The amplitude of mode `n` for a point source at `x` is
//! `C_n(x) = Σ_p (−ix)^p iⁿ L̃_pn / p!`, where `L̃` is the Cholesky factor of
//! the Hankel matrix of `Q`. For the Gaussian law with variance `v` it reduces
//! to `exp(−v x²/2) (√v x)ⁿ / √n!`.

use std::io::Write;

use num_complex::Complex64;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hankel::{factorize_with_cap, DEFAULT_ORDER_CAP};
use crate::measure::{Measure, MeasureKind};
use crate::precision::{factorial, MpMatrix};
use crate::rng::replicate_rng;

/// Relative size of the first omitted term of the amplitude series.
pub const SERIES_TOLERANCE: f64 = 1e-12;

/// Default radius (in object coordinates) over which the series is certified.
pub const DEFAULT_SERIES_RADIUS: f64 = 1.0;

const PROBABILITY_SLACK: f64 = 1e-10;
const ROUNDING_FLOOR: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct SpadeModel {
    q_name: String,
    n_max: usize,
    /// `L̃` of order `n_max + 1` (Gaussian) or of the series order (generic).
    pub tilde_l: MpMatrix,
    pub r: Vec<f64>,
    pub s: Vec<f64>,
    pub closed_form_gaussian: bool,
    gaussian_variance: Option<f64>,
    /// `coeffs[n][p]` multiplies `x^p` in `C_n(x)`.
    coeffs: Vec<Vec<Complex64>>,
    radius: f64,
}

/// Builds the mode table for modes `0..=n_max` (and `n_max + 1` for the
/// last iPAD pair).
pub fn build_spade(q: &Measure, n_max: usize) -> Result<SpadeModel> {
    build_spade_with_radius(q, n_max, DEFAULT_SERIES_RADIUS)
}

pub fn build_spade_with_radius(q: &Measure, n_max: usize, radius: f64) -> Result<SpadeModel> {
    let top = n_max + 1;
    match q.kind() {
        MeasureKind::Atoms(_) => Err(Error::UnsupportedFrequencyMeasure(format!(
            "`{}` is finitely supported; the mode construction needs a frequency measure with \
             infinite bounded support or the Gaussian law",
            q.name()
        ))),
        MeasureKind::GaussianFrequency { variance } => {
            let fac = factorize_with_cap(q, top, DEFAULT_ORDER_CAP)?;
            let tilde_l = fac.cholesky.entries;
            let (r, s) = r_and_s(&tilde_l, n_max)?;
            Ok(SpadeModel {
                q_name: q.name().to_owned(),
                n_max,
                tilde_l,
                r,
                s,
                closed_form_gaussian: true,
                gaussian_variance: Some(*variance),
                coeffs: Vec::new(),
                radius: f64::INFINITY,
            })
        }
        MeasureKind::Density { .. } => {
            if !(radius > 0.0 && radius.is_finite()) {
                return Err(Error::InvalidArgument(format!("series radius must be positive, got {radius}")));
            }
            let hw = q.half_width_f64().expect("densities have compact support");
            let order = series_order(q, top, radius, hw)?;
            let fac = factorize_with_cap(q, order, DEFAULT_ORDER_CAP)?;
            let tilde_l = fac.cholesky.entries;
            let (r, s) = r_and_s(&tilde_l, n_max)?;
            let prec = tilde_l.prec();
            let coeffs = (0..=top)
                .map(|n| {
                    (0..=order)
                        .map(|p| {
                            let mag = Float::with_val(prec, &tilde_l[(p, n)] / factorial(prec, p as u32)).to_f64();
                            i_pow(n as i64 - p as i64) * mag
                        })
                        .collect()
                })
                .collect();
            Ok(SpadeModel {
                q_name: q.name().to_owned(),
                n_max,
                tilde_l,
                r,
                s,
                closed_form_gaussian: false,
                gaussian_variance: None,
                coeffs,
                radius,
            })
        }
    }
}

fn i_pow(k: i64) -> Complex64 {
    match k.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Smallest order whose first omitted term, bounded by `(R·w)^{K+1}/(K+1)!`
/// through `|L̃_pn| ≤ w^p`, falls below the tolerance relative to the
/// smallest leading term `L̃_nn Rⁿ / n!`.
fn series_order(q: &Measure, top: usize, radius: f64, hw: f64) -> Result<usize> {
    let fac = factorize_with_cap(q, top, DEFAULT_ORDER_CAP)?;
    let smallest = (0..=top)
        .map(|n| {
            let l = fac.cholesky.entries[(n, n)].to_f64();
            l * radius.powi(n as i32) / factorial(64, n as u32).to_f64()
        })
        .fold(f64::INFINITY, f64::min);
    let rw = radius * hw;
    let mut term = 1.0;
    for k in 1..=DEFAULT_ORDER_CAP {
        term *= rw / k as f64;
        if k > top && term < SERIES_TOLERANCE * smallest {
            return Ok(k - 1);
        }
    }
    Err(Error::InvalidArgument(format!(
        "amplitude series for `{}` needs more than {DEFAULT_ORDER_CAP} terms at radius {radius}",
        q.name()
    )))
}

fn r_and_s(l: &MpMatrix, n_max: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let prec = l.prec();
    let mut r = Vec::with_capacity(n_max + 1);
    let mut s = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let fact_n = factorial(prec, n as u32);
        let fact_n1 = factorial(prec, n as u32 + 1);
        let rn = Float::with_val(prec, l[(n, n)].square_ref()) / Float::with_val(prec, fact_n.square_ref());
        let sn = Float::with_val(prec, &l[(n, n)] * &l[(n + 1, n + 1)]) * 2u32 / (fact_n * fact_n1);
        let (rn, sn) = (rn.to_f64(), sn.to_f64());
        for (name, v) in [("r", rn), ("s", sn)] {
            if !(v.is_normal() && v > 0.0) {
                return Err(Error::Underflow(format!("{name}_{n} = {v:e}")));
            }
        }
        r.push(rn);
        s.push(sn);
    }
    Ok((r, s))
}

impl SpadeModel {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn q_name(&self) -> &str {
        &self.q_name
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `L̃_nn`.
    pub fn tilde_l_diag(&self, n: usize) -> f64 {
        self.tilde_l[(n, n)].to_f64()
    }

    /// Amplitude `C_n(x)`, for `n ≤ n_max + 1`.
    pub fn amplitude(&self, n: usize, x: f64) -> Complex64 {
        if let Some(v) = self.gaussian_variance {
            let sigma = v.sqrt();
            let mut t = (-v * x * x / 2.0).exp();
            for k in 1..=n {
                t *= sigma * x / (k as f64).sqrt();
            }
            return Complex64::new(t, 0.0);
        }
        let c = &self.coeffs[n];
        let mut acc = Complex64::new(0.0, 0.0);
        for p in (0..c.len()).rev() {
            acc = acc * x + c[p];
        }
        acc
    }

    fn check_support(&self, p: &Measure) -> Result<()> {
        if let Some(hw) = p.half_width_f64() {
            if hw > self.radius {
                return Err(Error::InvalidArgument(format!(
                    "object half-width {hw} exceeds the certified series radius {}",
                    self.radius
                )));
            }
        } else {
            return Err(Error::InvalidMeasure("object measure must have bounded support".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeProbabilities {
    /// `q_n`, `n = 0..=n_max`.
    pub pad: Vec<f64>,
    /// `q_n^+` for the pair `(n, n+1)`.
    pub ipad_plus: Vec<f64>,
    pub ipad_minus: Vec<f64>,
    /// `q_n^+ − q_n^-` evaluated directly as `2 Re ∫ C_n C̄_{n+1} dP`.
    pub ipad_difference: Vec<f64>,
}

fn check_probability(what: String, v: f64) -> Result<f64> {
    if !(v >= -ROUNDING_FLOOR && v <= 1.0 + PROBABILITY_SLACK) {
        return Err(Error::Probability { what, value: v });
    }
    Ok(v.max(0.0))
}

pub fn mode_probabilities(model: &SpadeModel, p: &Measure) -> Result<ModeProbabilities> {
    model.check_support(p)?;
    let top = model.n_max + 1;
    let mut q = Vec::with_capacity(top + 1);
    for n in 0..=top {
        let v = p.integrate_f64(|x| model.amplitude(n, x).norm_sqr())?;
        q.push(check_probability(format!("q_{n}"), v)?);
    }
    let total: f64 = q[..=model.n_max].iter().sum();
    check_probability(format!("Σ q_n up to n = {}", model.n_max), total)?;
    let mut plus = Vec::with_capacity(top);
    let mut minus = Vec::with_capacity(top);
    let mut diff = Vec::with_capacity(top);
    for n in 0..top {
        let d = 2.0 * p.integrate_f64(|x| (model.amplitude(n, x) * model.amplitude(n + 1, x).conj()).re)?;
        let mean = 0.5 * (q[n] + q[n + 1]);
        plus.push(check_probability(format!("q_{n}^+"), mean + 0.5 * d)?);
        minus.push(check_probability(format!("q_{n}^-"), mean - 0.5 * d)?);
        diff.push(d);
    }
    q.truncate(model.n_max + 1);
    Ok(ModeProbabilities {
        pad: q,
        ipad_plus: plus,
        ipad_minus: minus,
        ipad_difference: diff,
    })
}

/// `β_k` for `k = 0..=2 n_max + 1`: `β_{2n} = q_n / r_n`, `β_{2n+1} = (q_n^+ − q_n^-) / s_n`.
pub fn generalized_moments(model: &SpadeModel, p: &Measure) -> Result<Vec<f64>> {
    let probs = mode_probabilities(model, p)?;
    Ok(moments_from_probabilities(model, &probs))
}

pub fn moments_from_probabilities(model: &SpadeModel, probs: &ModeProbabilities) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * model.n_max + 2);
    for n in 0..=model.n_max {
        out.push(probs.pad[n] / model.r[n]);
        out.push(probs.ipad_difference[n] / model.s[n]);
    }
    out
}

/// Which projections one run performs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Measurement {
    /// PAD modes counted individually.
    Pad(Vec<usize>),
    /// Both branches of the iPAD pair `(n, n+1)`.
    Ipad(usize),
}

impl Measurement {
    /// Moment orders estimated by this measurement.
    pub fn orders(&self) -> Vec<usize> {
        match self {
            Measurement::Pad(modes) => modes.iter().map(|n| 2 * n).collect(),
            Measurement::Ipad(n) => vec![2 * n + 1],
        }
    }

    fn validate(&self, model: &SpadeModel) -> Result<()> {
        let ok = match self {
            Measurement::Pad(modes) => {
                let mut sorted = modes.clone();
                sorted.sort_unstable();
                sorted.dedup();
                !modes.is_empty() && sorted.len() == modes.len() && modes.iter().all(|&n| n <= model.n_max)
            }
            Measurement::Ipad(n) => *n <= model.n_max,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "measurement {self:?} is not available with n_max = {}",
                model.n_max
            )))
        }
    }

    fn category_probabilities(&self, probs: &ModeProbabilities) -> Vec<f64> {
        match self {
            Measurement::Pad(modes) => modes.iter().map(|&n| probs.pad[n]).collect(),
            Measurement::Ipad(n) => vec![probs.ipad_plus[*n], probs.ipad_minus[*n]],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub measurement: Measurement,
    /// Counts in measurement order: PAD modes, or `[N⁺, N⁻]` for an iPAD pair.
    pub counts: Vec<u64>,
    pub other_count: u64,
    pub m: u64,
    pub epsilon: f64,
    pub seed: u64,
    pub replicate: u64,
}

impl CountRecord {
    pub fn n_photons(&self) -> f64 {
        self.m as f64 * self.epsilon
    }
}

/// One multinomial draw over `M` temporal modes, realized as sequential
/// conditional binomials over the categories (measured modes, other photons,
/// no photon).
pub fn simulate_counts(
    model: &SpadeModel,
    probs: &ModeProbabilities,
    measurement: &Measurement,
    m: u64,
    epsilon: f64,
    seed: u64,
    replicate: u64,
) -> Result<CountRecord> {
    measurement.validate(model)?;
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!("ε must lie in [0, 1], got {epsilon}")));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("M must be at least 1".into()));
    }
    let cat = measurement.category_probabilities(probs);
    let measured: f64 = cat.iter().sum();
    if measured > 1.0 + PROBABILITY_SLACK {
        return Err(Error::Probability {
            what: "measured-mode total".into(),
            value: measured,
        });
    }
    let mut cells: Vec<f64> = cat.iter().map(|q| epsilon * q).collect();
    cells.push(epsilon * (1.0 - measured).max(0.0));

    let mut rng = replicate_rng(seed, replicate);
    let mut remaining = m;
    let mut mass = 1.0;
    let mut drawn = Vec::with_capacity(cells.len());
    for &c in &cells {
        let p = if mass > 0.0 { (c / mass).clamp(0.0, 1.0) } else { 0.0 };
        let k = if remaining == 0 || p == 0.0 {
            0
        } else {
            Binomial::new(remaining, p)
                .map_err(|e| Error::Numeric(format!("binomial({remaining}, {p}): {e}")))?
                .sample(&mut rng)
        };
        drawn.push(k);
        remaining -= k;
        mass -= c;
    }
    let other_count = drawn.pop().expect("other category");
    Ok(CountRecord {
        measurement: measurement.clone(),
        counts: drawn,
        other_count,
        m,
        epsilon,
        seed,
        replicate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub order: usize,
    pub value: f64,
    pub analytic_variance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimates: Vec<Estimate>,
    pub n_photons: f64,
}

/// Exact variance of `β̌_k` under the simulation law.
pub fn analytic_variance(model: &SpadeModel, probs: &ModeProbabilities, order: usize, n_photons: f64, epsilon: f64) -> f64 {
    let n = order / 2;
    if order % 2 == 0 {
        let q = probs.pad[n];
        q * (1.0 - epsilon * q) / (model.r[n] * model.r[n] * n_photons)
    } else {
        let (qp, qm) = (probs.ipad_plus[n], probs.ipad_minus[n]);
        let d = probs.ipad_difference[n];
        ((qp + qm) - epsilon * d * d) / (model.s[n] * model.s[n] * n_photons)
    }
}

/// `β̌_{2n} = 𝒩_n / (r_n N)` and `β̌_{2n+1} = (𝒩_n⁺ − 𝒩_n⁻) / (s_n N)`.
///
/// Variances use `probs` when given, otherwise the plug-in frequencies `𝒩/N`.
pub fn estimate(counts: &CountRecord, model: &SpadeModel, probs: Option<&ModeProbabilities>) -> Result<EstimateReport> {
    let big_n = counts.n_photons();
    if !(big_n > 0.0) {
        return Err(Error::InvalidArgument(format!("N = Mε must be positive, got {big_n}")));
    }
    let eps = counts.epsilon;
    let estimates = match &counts.measurement {
        Measurement::Pad(modes) => modes
            .iter()
            .zip(&counts.counts)
            .map(|(&n, &c)| {
                let q = probs.map_or(c as f64 / big_n, |p| p.pad[n]);
                Estimate {
                    order: 2 * n,
                    value: c as f64 / (model.r[n] * big_n),
                    analytic_variance: q * (1.0 - eps * q) / (model.r[n].powi(2) * big_n),
                }
            })
            .collect(),
        Measurement::Ipad(n) => {
            let (cp, cm) = (counts.counts[0] as f64, counts.counts[1] as f64);
            let variance = match probs {
                Some(p) => analytic_variance(model, p, 2 * n + 1, big_n, eps),
                None => {
                    let (qp, qm) = (cp / big_n, cm / big_n);
                    ((qp + qm) - eps * (qp - qm).powi(2)) / (model.s[*n].powi(2) * big_n)
                }
            };
            vec![Estimate {
                order: 2 * n + 1,
                value: (cp - cm) / (model.s[*n] * big_n),
                analytic_variance: variance,
            }]
        }
    };
    Ok(EstimateReport {
        estimates,
        n_photons: big_n,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderSummary {
    pub order: usize,
    pub truth: f64,
    pub mean: f64,
    pub empirical_variance: f64,
    pub analytic_variance: f64,
    /// `(mean − truth) / √(analytic variance / replicates)`.
    pub bias_z: f64,
    pub variance_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRun {
    pub measurement: Measurement,
    pub m: u64,
    pub epsilon: f64,
    pub seed: u64,
    pub replicates: u64,
    pub probabilities: ModeProbabilities,
    pub records: Vec<CountRecord>,
    pub estimates: Vec<EstimateReport>,
    pub summary: Vec<OrderSummary>,
}

/// Runs `replicates` independent experiments in parallel; replicate `i` uses
/// stream `i` of the seeded generator, so the output does not depend on the
/// thread count.
pub fn run_replicates(
    model: &SpadeModel,
    p: &Measure,
    measurement: &Measurement,
    m: u64,
    epsilon: f64,
    seed: u64,
    replicates: u64,
) -> Result<ReplicateRun> {
    if replicates == 0 {
        return Err(Error::InvalidArgument("at least one replicate is required".into()));
    }
    let probs = mode_probabilities(model, p)?;
    let truth = moments_from_probabilities(model, &probs);
    let records: Vec<CountRecord> = (0..replicates)
        .into_par_iter()
        .map(|i| simulate_counts(model, &probs, measurement, m, epsilon, seed, i))
        .collect::<Result<_>>()?;
    let estimates: Vec<EstimateReport> = records
        .iter()
        .map(|r| estimate(r, model, Some(&probs)))
        .collect::<Result<_>>()?;
    let big_n = m as f64 * epsilon;
    let summary = measurement
        .orders()
        .into_iter()
        .enumerate()
        .map(|(slot, order)| {
            let values: Vec<f64> = estimates.iter().map(|e| e.estimates[slot].value).collect();
            let r = values.len() as f64;
            let mean = values.iter().sum::<f64>() / r;
            let var = if values.len() > 1 {
                values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0)
            } else {
                f64::NAN
            };
            let analytic = analytic_variance(model, &probs, order, big_n, epsilon);
            OrderSummary {
                order,
                truth: truth[order],
                mean,
                empirical_variance: var,
                analytic_variance: analytic,
                bias_z: (mean - truth[order]) / (analytic / r).sqrt(),
                variance_ratio: var / analytic,
            }
        })
        .collect();
    Ok(ReplicateRun {
        measurement: measurement.clone(),
        m,
        epsilon,
        seed,
        replicates,
        probabilities: probs,
        records,
        estimates,
        summary,
    })
}

impl ReplicateRun {
    /// One row per replicate: index, raw counts, other photons, estimates.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["replicate".to_owned()];
        match &self.measurement {
            Measurement::Pad(modes) => header.extend(modes.iter().map(|n| format!("count_{n}"))),
            Measurement::Ipad(n) => {
                header.push(format!("count_{n}_plus"));
                header.push(format!("count_{n}_minus"));
            }
        }
        header.push("other".into());
        header.extend(self.measurement.orders().iter().map(|k| format!("beta_{k}")));
        wtr.write_record(&header).map_err(csv_err)?;
        for (rec, est) in self.records.iter().zip(&self.estimates) {
            let mut row = vec![rec.replicate.to_string()];
            row.extend(rec.counts.iter().map(u64::to_string));
            row.push(rec.other_count.to_string());
            row.extend(est.estimates.iter().map(|e| format!("{:e}", e.value)));
            wtr.write_record(&row).map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Numeric(format!("CSV output: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::STANDARD_GAUSSIAN_VARIANCE;

    const P: u32 = 256;

    fn gaussian(n_max: usize) -> SpadeModel {
        build_spade(&Measure::gaussian_frequency(STANDARD_GAUSSIAN_VARIANCE, P).unwrap(), n_max).unwrap()
    }

    #[test]
    fn gaussian_constants() {
        let m = gaussian(3);
        assert!((m.r[0] - 1.0).abs() < 1e-15);
        assert!((m.r[1] - 0.25).abs() < 1e-15);
        assert!((m.r[2] - 1.0 / 32.0).abs() < 1e-15);
        assert!((m.s[0] - 1.0).abs() < 1e-15);
        assert!((m.amplitude(0, 0.0).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn point_mass_probabilities() {
        let m = gaussian(4);
        let probs = mode_probabilities(&m, &Measure::point_mass(1.0, P).unwrap()).unwrap();
        let mut fact = 1.0;
        for n in 0..=4 {
            if n > 0 {
                fact *= n as f64;
            }
            let want = (-0.25f64).exp() / (4f64.powi(n as i32) * fact);
            assert!((probs.pad[n] - want).abs() < 1e-15, "n = {n}");
        }
        assert!((probs.pad[0] - 0.778801).abs() < 1e-6);

        let zero = mode_probabilities(&m, &Measure::point_mass(0.0, P).unwrap()).unwrap();
        assert_eq!(zero.pad[0], 1.0);
        assert!(zero.pad[1..].iter().all(|&q| q == 0.0));
        let beta = generalized_moments(&m, &Measure::point_mass(0.0, P).unwrap()).unwrap();
        assert!(beta.iter().skip(1).all(|&b| b == 0.0));
    }

    #[test]
    fn beta_two_closed_form() {
        let m = gaussian(2);
        for x0 in [0.1, 0.5, 1.0] {
            let beta = generalized_moments(&m, &Measure::point_mass(x0, P).unwrap()).unwrap();
            let want = x0 * x0 * (-x0 * x0 / 4.0).exp();
            assert!((beta[2] - want).abs() < 1e-14 * want.max(1.0));
        }
    }

    #[test]
    fn symmetric_objects_have_balanced_ipad() {
        let m = gaussian(3);
        let u = Measure::uniform(0.2, P).unwrap();
        let probs = mode_probabilities(&m, &u).unwrap();
        for n in 0..=3 {
            assert!((probs.ipad_plus[n] - probs.ipad_minus[n]).abs() < 1e-15);
        }
        let beta = generalized_moments(&m, &u).unwrap();
        assert!(beta[1].abs() < 1e-14 && beta[3].abs() < 1e-14);
        assert!(probs.pad.iter().sum::<f64>() <= 1.0 + 1e-10);
    }

    #[test]
    fn generic_series_matches_closed_form_amplitudes() {
        // a wide uniform Q checked against its own Cholesky-defined amplitudes:
        // C_0 is the characteristic function sin(Kx)/(Kx)
        let k = 2.0;
        let q = Measure::uniform(k, P).unwrap();
        let m = build_spade(&q, 3).unwrap();
        assert!(!m.closed_form_gaussian);
        for x in [0.0, 0.1, 0.5, 1.0] {
            let c0 = m.amplitude(0, x);
            let want = if x == 0.0 { 1.0 } else { (k * x).sin() / (k * x) };
            assert!((c0.re - want).abs() < 1e-12 && c0.im.abs() < 1e-15, "x = {x}");
        }
        let probs = mode_probabilities(&m, &Measure::uniform(0.3, P).unwrap()).unwrap();
        assert!(probs.pad.iter().all(|&q| (0.0..=1.0).contains(&q)));
        assert!(matches!(build_spade(&Measure::two_point(1.0, P).unwrap(), 2), Err(Error::UnsupportedFrequencyMeasure(_))));
        assert!(mode_probabilities(&m, &Measure::uniform(1.5, P).unwrap()).is_err());
    }

    #[test]
    fn zero_epsilon_gives_no_counts() {
        let m = gaussian(2);
        let probs = mode_probabilities(&m, &Measure::uniform(0.1, P).unwrap()).unwrap();
        let r = simulate_counts(&m, &probs, &Measurement::Pad(vec![0, 1, 2]), 1000, 0.0, 1, 0).unwrap();
        assert!(r.counts.iter().all(|&c| c == 0) && r.other_count == 0);
    }

    #[test]
    fn empty_mode_gives_zero_estimate() {
        let m = gaussian(2);
        let rec = CountRecord {
            measurement: Measurement::Pad(vec![1]),
            counts: vec![0],
            other_count: 0,
            m: 100,
            epsilon: 0.1,
            seed: 0,
            replicate: 0,
        };
        let e = estimate(&rec, &m, None).unwrap();
        assert_eq!(e.estimates[0].value, 0.0);
        assert_eq!(e.estimates[0].order, 2);
    }

    #[test]
    fn binomial_mean_and_variance_for_mode_zero() {
        let m = gaussian(1);
        let pm = Measure::point_mass(0.0, P).unwrap();
        let run = run_replicates(&m, &pm, &Measurement::Pad(vec![0]), 1_000_000, 0.01, 11, 100).unwrap();
        let counts: Vec<f64> = run.records.iter().map(|r| r.counts[0] as f64).collect();
        let mean = counts.iter().sum::<f64>() / 100.0;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / 99.0;
        let sigma = (1e6 * 0.01 * 0.99f64).sqrt();
        assert!((mean - 1e4).abs() < 4.0 * sigma / 10.0);
        // 100 replicates: the sample variance has about 14% relative spread
        assert!((var / (1e4 * 0.99) - 1.0).abs() < 0.5);
    }

    #[test]
    fn replicates_are_deterministic() {
        let m = gaussian(2);
        let u = Measure::uniform(0.2, P).unwrap();
        let a = run_replicates(&m, &u, &Measurement::Ipad(0), 100_000, 0.01, 7, 16).unwrap();
        let b = run_replicates(&m, &u, &Measurement::Ipad(0), 100_000, 0.01, 7, 16).unwrap();
        assert_eq!(a.records, b.records);
        let (mut x, mut y) = (Vec::new(), Vec::new());
        a.write_csv(&mut x).unwrap();
        b.write_csv(&mut y).unwrap();
        assert_eq!(x, y);
        let text = String::from_utf8(x).unwrap();
        assert!(text.starts_with("replicate,count_0_plus,count_0_minus,other,beta_1"));
        assert_eq!(text.lines().count(), 17);
    }

    #[test]
    fn rejects_bad_measurements() {
        let m = gaussian(2);
        let probs = mode_probabilities(&m, &Measure::uniform(0.1, P).unwrap()).unwrap();
        assert!(simulate_counts(&m, &probs, &Measurement::Pad(vec![3]), 10, 0.1, 0, 0).is_err());
        assert!(simulate_counts(&m, &probs, &Measurement::Pad(vec![1, 1]), 10, 0.1, 0, 0).is_err());
        assert!(simulate_counts(&m, &probs, &Measurement::Pad(vec![0]), 0, 0.1, 0, 0).is_err());
        assert!(simulate_counts(&m, &probs, &Measurement::Pad(vec![0]), 10, 1.5, 0, 0).is_err());
    }
}
