//! Hankel moment matrices, their Cholesky factors and the orthonormal
//! polynomials they define.
//!
//! With `H_pq = ∫ x^{p+q} dP` and `H = L Lᵀ`, the rows of `A = L⁻¹` hold the
//! coefficients of the orthonormal polynomials `a_n(x) = Σ_p A_np x^p`, and
//! `⟨x^p, a_n⟩_P = L_pn`. For a measure standardized to unit half-width the
//! same objects are written `G`, `V`, `B`.

use std::path::Path;

use rug::{Assign, Float};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{Measure, StandardizedMeasure};
use crate::precision::{epsilon, MpMatrix};

/// Largest Hankel order accepted by [`build_hankel`].
pub const DEFAULT_ORDER_CAP: usize = 60;

const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Clone, Debug)]
pub struct HankelMatrix {
    pub entries: MpMatrix,
    pub source: String,
    pub standardized: bool,
}

impl HankelMatrix {
    /// `J`, so that the matrix is `(J+1) × (J+1)`.
    pub fn order(&self) -> usize {
        self.entries.rows() - 1
    }

    pub fn prec(&self) -> u32 {
        self.entries.prec()
    }

    /// Upper-left block of order `j`.
    pub fn leading(&self, j: usize) -> Self {
        Self {
            entries: self.entries.leading(j + 1),
            source: self.source.clone(),
            standardized: self.standardized,
        }
    }
}

/// Lower-triangular `L` (or `V` when standardized) with positive diagonal.
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    pub entries: MpMatrix,
    pub standardized: bool,
}

impl CholeskyFactor {
    pub fn order(&self) -> usize {
        self.entries.rows() - 1
    }

    pub fn get(&self, p: usize, n: usize) -> &Float {
        &self.entries[(p, n)]
    }

    pub fn diagonal_f64(&self) -> Vec<f64> {
        (0..self.entries.rows()).map(|i| self.entries[(i, i)].to_f64()).collect()
    }

    /// `L_pn = Δ^p V_pn`: maps a standardized factor back to scale `Δ`.
    pub fn unstandardize(&self, delta: &Float) -> Self {
        let prec = self.entries.prec();
        let mut out = self.entries.clone();
        let mut scale = Float::with_val(prec, 1);
        for p in 0..out.rows() {
            for n in 0..=p {
                out[(p, n)] *= &scale;
            }
            scale *= delta;
        }
        Self {
            entries: out,
            standardized: false,
        }
    }
}

/// Coefficients `A = L⁻¹` of the orthonormal polynomials.
#[derive(Clone, Debug)]
pub struct OrthoBasis {
    pub coefficients: MpMatrix,
    pub standardized: bool,
}

impl OrthoBasis {
    pub fn order(&self) -> usize {
        self.coefficients.rows() - 1
    }

    /// `a_n(x)` by Horner's rule.
    pub fn eval(&self, n: usize, x: &Float) -> Float {
        let prec = self.coefficients.prec().max(x.prec());
        let mut acc = Float::new(prec);
        for p in (0..=n).rev() {
            acc *= x;
            acc += &self.coefficients[(n, p)];
        }
        acc
    }

    pub fn eval_f64(&self, n: usize, x: f64) -> f64 {
        self.eval(n, &Float::with_val(self.coefficients.prec(), x)).to_f64()
    }

    /// Polynomial coefficients of `a_n` in increasing degree.
    pub fn coefficients_of(&self, n: usize) -> Vec<Float> {
        (0..=n).map(|p| self.coefficients[(n, p)].clone()).collect()
    }
}

/// Hankel matrix, its factor and inverse, at the precision that succeeded.
#[derive(Clone, Debug)]
pub struct Factorization {
    pub hankel: HankelMatrix,
    pub cholesky: CholeskyFactor,
    pub basis: OrthoBasis,
    pub precision_bits: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigenDecayFit {
    pub orders: Vec<usize>,
    pub values: Vec<f64>,
    pub rate: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    pub strictly_decreasing: bool,
}

fn check_order(p: &Measure, j: usize, cap: usize) -> Result<()> {
    if j > cap {
        return Err(Error::OrderCap { requested: j, cap });
    }
    if let Some(m) = p.atom_count() {
        if j >= m {
            return Err(Error::FiniteSupport { order: j, atoms: m });
        }
    }
    Ok(())
}

fn hankel_entries(p: &Measure, j: usize) -> Result<MpMatrix> {
    let m = p.moments(2 * j)?;
    Ok(MpMatrix::from_fn(j + 1, j + 1, p.prec(), |a, b| m[a + b].clone()))
}

/// `(J+1) × (J+1)` Hankel matrix of `P`, after checking that every leading
/// minor is positive definite.
pub fn build_hankel(p: &Measure, j: usize) -> Result<HankelMatrix> {
    check_order(p, j, DEFAULT_ORDER_CAP)?;
    let h = HankelMatrix {
        entries: hankel_entries(p, j)?,
        source: p.name().to_owned(),
        standardized: false,
    };
    cholesky(&h)?;
    Ok(h)
}

/// Standardized Hankel matrix `G` of the unit-half-width base measure.
pub fn build_standardized_hankel(s: &StandardizedMeasure, j: usize) -> Result<HankelMatrix> {
    let mut h = build_hankel(&s.base, j)?;
    h.standardized = true;
    Ok(h)
}

/// Column-by-column Cholesky factorization.
pub fn cholesky(h: &HankelMatrix) -> Result<CholeskyFactor> {
    let a = &h.entries;
    let n = a.rows();
    let prec = a.prec();
    let mut l = MpMatrix::zeros(n, n, prec);
    let mut acc = Float::new(prec);
    for k in 0..n {
        acc.assign(&a[(k, k)]);
        for m in 0..k {
            acc -= Float::with_val(prec, l[(k, m)].square_ref());
        }
        if acc <= 0 || !acc.is_finite() {
            return Err(Error::NotPositiveDefinite {
                index: k,
                pivot: acc.to_f64(),
                bits: prec,
            });
        }
        let d = Float::with_val(prec, acc.sqrt_ref());
        for i in (k + 1)..n {
            acc.assign(&a[(i, k)]);
            for m in 0..k {
                acc -= Float::with_val(prec, &l[(i, m)] * &l[(k, m)]);
            }
            l[(i, k)] = Float::with_val(prec, &acc / &d);
        }
        l[(k, k)] = d;
    }
    Ok(CholeskyFactor {
        entries: l,
        standardized: h.standardized,
    })
}

/// `A = L⁻¹` by forward substitution.
pub fn invert_lower(l: &CholeskyFactor) -> OrthoBasis {
    let m = &l.entries;
    let n = m.rows();
    let prec = m.prec();
    let mut a = MpMatrix::zeros(n, n, prec);
    let mut acc = Float::new(prec);
    for col in 0..n {
        a[(col, col)] = Float::with_val(prec, 1) / &m[(col, col)];
        for i in (col + 1)..n {
            acc.assign(0);
            for k in col..i {
                acc += Float::with_val(prec, &m[(i, k)] * &a[(k, col)]);
            }
            a[(i, col)] = -Float::with_val(prec, &acc / &m[(i, i)]);
        }
    }
    OrthoBasis {
        coefficients: a,
        standardized: l.standardized,
    }
}

/// Builds and factors the Hankel matrix of order `j`; on a pivot failure the
/// measure is rebuilt at twice the precision and the factorization retried once.
pub fn factorize(p: &Measure, j: usize) -> Result<Factorization> {
    factorize_with_cap(p, j, DEFAULT_ORDER_CAP)
}

pub fn factorize_with_cap(p: &Measure, j: usize, cap: usize) -> Result<Factorization> {
    check_order(p, j, cap)?;
    match factorize_at(p, j) {
        Err(Error::NotPositiveDefinite { .. }) if p.atom_count().is_none() => {
            let wider = p.with_precision(p.prec() * 2)?;
            factorize_at(&wider, j)
        }
        other => other,
    }
}

fn factorize_at(p: &Measure, j: usize) -> Result<Factorization> {
    let hankel = HankelMatrix {
        entries: hankel_entries(p, j)?,
        source: p.name().to_owned(),
        standardized: false,
    };
    let chol = cholesky(&hankel)?;
    let basis = invert_lower(&chol);
    Ok(Factorization {
        hankel,
        cholesky: chol,
        basis,
        precision_bits: p.prec(),
    })
}

/// Factorization of the unit-half-width base measure (`G`, `V`, `B`).
pub fn factorize_standardized(s: &StandardizedMeasure, j: usize) -> Result<Factorization> {
    let mut f = factorize(&s.base, j)?;
    f.hankel.standardized = true;
    f.cholesky.standardized = true;
    f.basis.standardized = true;
    Ok(f)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(m: &MpMatrix) -> Result<Vec<Float>> {
    if !m.is_square() {
        return Err(Error::Shape(format!("{}x{} is not square", m.rows(), m.cols())));
    }
    let n = m.rows();
    let prec = m.prec();
    let mut a = m.clone();
    let tol = Float::with_val(prec, epsilon(prec) * 4u32);
    for _ in 0..JACOBI_MAX_SWEEPS {
        // relative off-diagonal test keeps small eigenvalues accurate
        let mut done = true;
        for p in 0..n {
            for q in (p + 1)..n {
                let scale = Float::with_val(prec, &a[(p, p)] * &a[(q, q)]).abs().sqrt();
                if Float::with_val(prec, a[(p, q)].abs_ref()) > Float::with_val(prec, &tol * &scale) {
                    done = false;
                    rotate(&mut a, p, q);
                }
            }
        }
        if done {
            let mut eig: Vec<Float> = (0..n).map(|i| a[(i, i)].clone()).collect();
            eig.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
            return Ok(eig);
        }
    }
    Err(Error::EigenNoConvergence {
        sweeps: JACOBI_MAX_SWEEPS,
    })
}

fn rotate(a: &mut MpMatrix, p: usize, q: usize) {
    let prec = a.prec();
    let n = a.rows();
    let apq = a[(p, q)].clone();
    if apq.is_zero() {
        return;
    }
    let theta = Float::with_val(prec, &a[(q, q)] - &a[(p, p)]) / Float::with_val(prec, &apq * 2u32);
    let root = (Float::with_val(prec, theta.square_ref()) + 1u32).sqrt();
    let t = if theta >= 0 {
        Float::with_val(prec, 1) / (Float::with_val(prec, &theta + &root))
    } else {
        Float::with_val(prec, -1) / (Float::with_val(prec, &root - &theta))
    };
    let c = (Float::with_val(prec, t.square_ref()) + 1u32).sqrt().recip();
    let s = Float::with_val(prec, &t * &c);
    let tau = Float::with_val(prec, &s / (Float::with_val(prec, &c + 1u32)));

    let t_apq = Float::with_val(prec, &t * &apq);
    a[(p, p)] -= &t_apq;
    a[(q, q)] += &t_apq;
    a[(p, q)] = Float::new(prec);
    a[(q, p)] = Float::new(prec);
    for r in 0..n {
        if r == p || r == q {
            continue;
        }
        let arp = a[(r, p)].clone();
        let arq = a[(r, q)].clone();
        let new_rp = Float::with_val(prec, &arp - Float::with_val(prec, &s * (Float::with_val(prec, &arq + Float::with_val(prec, &tau * &arp)))));
        let new_rq = Float::with_val(prec, &arq + Float::with_val(prec, &s * (Float::with_val(prec, &arp - Float::with_val(prec, &tau * &arq)))));
        a[(r, p)] = new_rp.clone();
        a[(p, r)] = new_rp;
        a[(r, q)] = new_rq.clone();
        a[(q, r)] = new_rq;
    }
}

/// `λ_min` of each leading block `G_(p)`, `p = 0..=p_max`, with a
/// least-squares fit of `log λ_min − ½ log p` against `p` over `p ≥ 1`.
pub fn lambda_min_profile(p: &Measure, p_max: usize) -> Result<EigenDecayFit> {
    match p.half_width_f64() {
        Some(hw) if (hw - 1.0).abs() < 1e-12 => {}
        other => {
            return Err(Error::InvalidMeasure(format!(
                "λ_min profile needs a standardized measure (half-width 1), got {other:?}"
            )))
        }
    }
    check_order(p, p_max, DEFAULT_ORDER_CAP)?;
    let g = hankel_entries(p, p_max)?;
    let mut values = Vec::with_capacity(p_max + 1);
    for k in 0..=p_max {
        let eig = symmetric_eigenvalues(&g.leading(k + 1))?;
        values.push(eig[0].to_f64());
    }
    let orders: Vec<usize> = (0..=p_max).collect();
    let strictly_decreasing = values.windows(2).all(|w| w[1] < w[0]);
    let (xs, ys): (Vec<f64>, Vec<f64>) = orders
        .iter()
        .zip(&values)
        .filter(|(k, v)| **k >= 1 && **v > 0.0)
        .map(|(k, v)| (*k as f64, v.ln() - 0.5 * (*k as f64).ln()))
        .unzip();
    let (slope, intercept, r_squared) = least_squares(&xs, &ys);
    Ok(EigenDecayFit {
        orders,
        values,
        rate: slope.exp(),
        prefactor: intercept.exp(),
        r_squared,
        strictly_decreasing,
    })
}

/// Ordinary least squares `y ≈ slope·x + intercept`, returning `(slope, intercept, r²)`.
pub(crate) fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    (slope, intercept, r2)
}

/// Derivative of the Cholesky factor under a symmetric perturbation `dG`:
/// `∂V = V · (W ∘ (B dG Bᵀ))` with `W` equal to 1 below, ½ on and 0 above
/// the diagonal.
pub fn cholesky_derivative(v: &CholeskyFactor, b: &OrthoBasis, dg: &MpMatrix) -> Result<MpMatrix> {
    let n = v.entries.rows();
    if b.coefficients.rows() != n || dg.rows() != n || dg.cols() != n {
        return Err(Error::Shape(format!(
            "V is {n}x{n}, B is {}x{}, dG is {}x{}",
            b.coefficients.rows(),
            b.coefficients.cols(),
            dg.rows(),
            dg.cols()
        )));
    }
    let prec = v.entries.prec();
    let bt = b.coefficients.transpose();
    let mut x = b.coefficients.matmul(dg).matmul(&bt);
    for m in 0..n {
        x[(m, m)] /= 2u32;
        for k in (m + 1)..n {
            x[(m, k)] = Float::new(prec);
        }
    }
    let mut out = MpMatrix::zeros(n, n, prec);
    let mut acc = Float::new(prec);
    for p in 0..n {
        for col in 0..=p {
            acc.assign(0);
            for m in col..=p {
                acc += Float::with_val(prec, &v.entries[(p, m)] * &x[(m, col)]);
            }
            out[(p, col)] = acc.clone();
        }
    }
    Ok(out)
}

/// Writes `H`, `L`, `A` and, when given, the λ_min profile as CSV files in `dir`.
pub fn dump_csv(dir: &Path, prefix: &str, f: &Factorization, profile: Option<&EigenDecayFit>) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (suffix, m) in [
        ("hankel", &f.hankel.entries),
        ("cholesky", &f.cholesky.entries),
        ("inverse", &f.basis.coefficients),
    ] {
        let path = dir.join(format!("{prefix}_{suffix}.csv"));
        m.write_csv(std::io::BufWriter::new(std::fs::File::create(&path)?))?;
        written.push(path);
    }
    if let Some(fit) = profile {
        use std::io::Write;
        let path = dir.join(format!("{prefix}_lambda_min.csv"));
        let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(w, "p,lambda_min")?;
        for (p, v) in fit.orders.iter().zip(&fit.values) {
            writeln!(w, "{p},{v:e}")?;
        }
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{Atom, Measure, STANDARD_GAUSSIAN_VARIANCE};

    const P: u32 = 256;

    fn f(x: &Float) -> f64 {
        x.to_f64()
    }

    #[test]
    fn uniform_hankel_order_two() {
        let h = build_hankel(&Measure::uniform(1.0, P).unwrap(), 2).unwrap();
        let want = [[1.0, 0.0, 1.0 / 3.0], [0.0, 1.0 / 3.0, 0.0], [1.0 / 3.0, 0.0, 0.2]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((f(&h.entries[(i, j)]) - want[i][j]).abs() < 1e-15);
            }
        }
        assert!(h.entries.is_symmetric());
    }

    #[test]
    fn point_pair_and_gaussian_hankel() {
        let h = build_hankel(&Measure::two_point(1.0, P).unwrap(), 1).unwrap();
        assert_eq!(h.entries.to_f64(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let l = cholesky(&h).unwrap();
        assert_eq!(l.entries, MpMatrix::identity(2, P));

        let g = build_hankel(&Measure::gaussian_frequency(STANDARD_GAUSSIAN_VARIANCE, P).unwrap(), 2).unwrap();
        let want = [[1.0, 0.0, 0.25], [0.0, 0.25, 0.0], [0.25, 0.0, 3.0 / 16.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(f(&g.entries[(i, j)]), want[i][j]);
            }
        }
        let l = cholesky(&g).unwrap();
        let d = l.diagonal_f64();
        assert!((d[0] - 1.0).abs() < 1e-15 && (d[1] - 0.5).abs() < 1e-15);
        assert!((d[2] - 2f64.sqrt() / 4.0).abs() < 1e-15);
        assert!((f(l.get(2, 0)) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn uniform_cholesky_and_legendre() {
        let fac = factorize(&Measure::uniform(1.0, P).unwrap(), 2).unwrap();
        let d = fac.cholesky.diagonal_f64();
        assert!((d[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((d[2] - 2.0 / 45f64.sqrt()).abs() < 1e-15);
        assert!((f(fac.cholesky.get(2, 0)) - 1.0 / 3.0).abs() < 1e-15);
        assert!(fac.cholesky.get(1, 0).to_f64().abs() < 1e-70 && fac.cholesky.get(2, 1).to_f64().abs() < 1e-70);

        let b = &fac.basis;
        for x in [-0.7, 0.0, 0.4, 1.0] {
            assert_eq!(b.eval_f64(0, x), 1.0);
            assert!((b.eval_f64(1, x) - 3f64.sqrt() * x).abs() < 1e-14);
            assert!((b.eval_f64(2, x) - 5f64.sqrt() * (3.0 * x * x - 1.0) / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn reconstruction_at_order_thirty() {
        let tol = Float::with_val(P, 1e-30);
        for m in [
            Measure::uniform(1.0, P).unwrap(),
            Measure::quadratic(1.0, P).unwrap(),
            Measure::truncated_gaussian(1.0, 0.5, P).unwrap(),
        ] {
            let fac = factorize(&m, 30).unwrap();
            let l = &fac.cholesky.entries;
            let err = l.matmul(&l.transpose()).max_abs_diff(&fac.hankel.entries);
            assert!(err < tol, "{}: {}", m.name(), err.to_f64());
            assert!(l.is_lower_triangular());
            let ident = fac.basis.coefficients.matmul(l);
            assert!(ident.max_abs_diff(&MpMatrix::identity(31, P)) < tol);
        }
    }

    #[test]
    fn finite_atoms_cap_the_order() {
        let m = Measure::atoms(
            vec![
                Atom { position: -1.0, weight: 0.25 },
                Atom { position: 0.0, weight: 0.5 },
                Atom { position: 1.0, weight: 0.25 },
            ],
            P,
        )
        .unwrap();
        assert!(build_hankel(&m, 2).is_ok());
        match build_hankel(&m, 3) {
            Err(Error::FiniteSupport { order: 3, atoms: 3 }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            build_hankel(&Measure::uniform(1.0, P).unwrap(), DEFAULT_ORDER_CAP + 1),
            Err(Error::OrderCap { .. })
        ));
    }

    #[test]
    fn cholesky_reports_failing_pivot() {
        let h = HankelMatrix {
            entries: MpMatrix::from_f64(&[vec![1.0, 1.0], vec![1.0, 1.0]], P),
            source: "singular".into(),
            standardized: false,
        };
        match cholesky(&h) {
            Err(Error::NotPositiveDefinite { index: 1, bits: P, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lambda_min_small_cases() {
        let u = lambda_min_profile(&Measure::uniform(1.0, P).unwrap(), 3).unwrap();
        assert_eq!(u.values[0], 1.0);
        let a = 0.6;
        let two = Measure::two_point(1.0, P).unwrap();
        // two atoms at ±1 have variance 1; use an asymmetric pair with half-width 1
        let skew = Measure::atoms(
            vec![
                Atom { position: -1.0, weight: 0.5 },
                Atom { position: a, weight: 0.5 },
            ],
            P,
        )
        .unwrap();
        let fit = lambda_min_profile(&two, 1).unwrap();
        assert!((fit.values[1] - 1.0).abs() < 1e-15);
        // [[1, m1], [m1, m2]] by hand
        let m1 = (a - 1.0) / 2.0;
        let m2 = (1.0 + a * a) / 2.0;
        let tr = 1.0 + m2;
        let det = m2 - m1 * m1;
        let want = (tr - (tr * tr - 4.0 * det).sqrt()) / 2.0;
        let got = lambda_min_profile(&skew, 1).unwrap().values[1];
        assert!((got - want).abs() < 1e-14, "{got} vs {want}");
    }

    #[test]
    fn jacobi_matches_known_spectrum() {
        let m = MpMatrix::from_f64(&[vec![2.0, 1.0, 0.0], vec![1.0, 2.0, 1.0], vec![0.0, 1.0, 2.0]], P);
        let e: Vec<f64> = symmetric_eigenvalues(&m).unwrap().iter().map(Float::to_f64).collect();
        let r2 = 2f64.sqrt();
        for (g, w) in e.iter().zip([2.0 - r2, 2.0, 2.0 + r2]) {
            assert!((g - w).abs() < 1e-14);
        }
    }

    #[test]
    fn cholesky_derivative_zero_and_identity() {
        let fac = factorize(&Measure::uniform(1.0, P).unwrap(), 6).unwrap();
        let zero = MpMatrix::zeros(7, 7, P);
        let dv = cholesky_derivative(&fac.cholesky, &fac.basis, &zero).unwrap();
        assert_eq!(dv, zero);

        let dg = MpMatrix::from_fn(7, 7, P, |i, j| Float::with_val(P, 1) / ((i + j + 1) as u32 * 3 + 1));
        let dv = cholesky_derivative(&fac.cholesky, &fac.basis, &dg).unwrap();
        assert!(dv.is_lower_triangular());
        let v = &fac.cholesky.entries;
        let recon = {
            let a = dv.matmul(&v.transpose());
            let b = v.matmul(&dv.transpose());
            MpMatrix::from_fn(7, 7, P, |i, j| Float::with_val(P, &a[(i, j)] + &b[(i, j)]))
        };
        assert!(recon.max_abs_diff(&dg) < 1e-60);
        assert!(matches!(
            cholesky_derivative(&fac.cholesky, &fac.basis, &MpMatrix::zeros(3, 3, P)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn csv_dump_writes_files() {
        let fac = factorize(&Measure::uniform(1.0, P).unwrap(), 3).unwrap();
        let dir = std::env::temp_dir().join(format!("subres-hankel-{}", std::process::id()));
        let files = dump_csv(&dir, "u", &fac, None).unwrap();
        assert_eq!(files.len(), 3);
        let text = std::fs::read_to_string(&files[0]).unwrap();
        assert_eq!(text.lines().count(), 4);
        std::fs::remove_dir_all(&dir).ok();
    }
}
