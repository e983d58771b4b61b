//! Gauss quadrature rules in extended precision.
//!
//! Rules are generated from the three-term recurrence of the orthonormal
//! polynomials of the weight: node guesses come from Sturm-sequence bisection
//! on the Jacobi matrix in `f64`, then each node is polished by Newton's method
//! in MPFR and the weights are the Christoffel numbers `1 / Σ_k p_k(x_i)²`.

use rug::Float;

use crate::error::{Error, Result};
use crate::precision::{epsilon, mp};

/// A Gauss rule: `Σ w_i f(x_i)` approximates `∫ f dλ` on the declared interval.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    nodes: Vec<Float>,
    weights: Vec<Float>,
    order: usize,
    interval: Option<(Float, Float)>,
}

/// Orthonormal three-term recurrence `x p_k = b_{k+1} p_{k+1} + a_k p_k + b_k p_{k-1}`
/// for a probability weight.
struct Recurrence<'a> {
    a: &'a dyn Fn(usize) -> Float,
    b: &'a dyn Fn(usize) -> Float,
    symmetric: bool,
}

impl QuadratureRule {
    /// Gauss–Legendre rule of `order` nodes for Lebesgue measure on `[-1, 1]`.
    pub fn gauss_legendre(order: usize, prec: u32) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("quadrature order must be positive".into()));
        }
        let a = |_k: usize| Float::new(prec);
        let b = move |k: usize| {
            let k = k as u64;
            let den = Float::with_val(prec, 4 * k * k - 1).sqrt();
            Float::with_val(prec, k) / den
        };
        let rec = Recurrence { a: &a, b: &b, symmetric: true };
        let (nodes, mut weights) = gauss_from_recurrence(&rec, order, prec)?;
        // Christoffel weights sum to one for the probability law dx/2.
        for w in &mut weights {
            *w *= 2;
        }
        Ok(Self {
            nodes,
            weights,
            order,
            interval: Some((mp(prec, -1.0), mp(prec, 1.0))),
        })
    }

    /// Gauss–Hermite rule of `order` nodes for the centred normal law with the
    /// given variance. Weights sum to one.
    pub fn gauss_hermite(order: usize, variance: f64, prec: u32) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("quadrature order must be positive".into()));
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::InvalidArgument(format!("variance must be positive, got {variance}")));
        }
        let sigma = Float::with_val(prec, variance).sqrt();
        let a = |_k: usize| Float::new(prec);
        let b = move |k: usize| Float::with_val(prec, k as u64).sqrt() * &sigma;
        let rec = Recurrence { a: &a, b: &b, symmetric: true };
        let (nodes, weights) = gauss_from_recurrence(&rec, order, prec)?;
        Ok(Self {
            nodes,
            weights,
            order,
            interval: None,
        })
    }

    /// Affine image of a rule on `[-1, 1]` onto `[lo, hi]`.
    pub fn mapped(&self, lo: &Float, hi: &Float) -> Result<Self> {
        let Some((a0, b0)) = &self.interval else {
            return Err(Error::InvalidArgument("cannot map a whole-line rule onto an interval".into()));
        };
        let prec = lo.prec().max(self.prec());
        let scale = Float::with_val(prec, hi - lo) / Float::with_val(prec, b0 - a0);
        let nodes = self
            .nodes
            .iter()
            .map(|x| {
                let t = Float::with_val(prec, x - a0);
                Float::with_val(prec, lo + &(t * &scale))
            })
            .collect();
        let weights = self.weights.iter().map(|w| Float::with_val(prec, w * &scale)).collect();
        Ok(Self {
            nodes,
            weights,
            order: self.order,
            interval: Some((lo.clone(), hi.clone())),
        })
    }

    pub fn nodes(&self) -> &[Float] {
        &self.nodes
    }

    pub fn weights(&self) -> &[Float] {
        &self.weights
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn interval(&self) -> Option<&(Float, Float)> {
        self.interval.as_ref()
    }

    pub fn prec(&self) -> u32 {
        self.nodes.first().map_or(crate::precision::DEFAULT_PRECISION_BITS, Float::prec)
    }

    pub fn integrate(&self, f: impl Fn(&Float) -> Float) -> Float {
        let mut acc = Float::new(self.prec());
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += f(x) * w;
        }
        acc
    }

    pub fn integrate_f64(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w.to_f64() * f(x.to_f64()))
            .sum()
    }
}

fn gauss_from_recurrence(rec: &Recurrence<'_>, n: usize, prec: u32) -> Result<(Vec<Float>, Vec<Float>)> {
    let a64: Vec<f64> = (0..n).map(|k| (rec.a)(k).to_f64()).collect();
    let b64: Vec<f64> = (0..n).map(|k| if k == 0 { 0.0 } else { (rec.b)(k).to_f64() }).collect();
    let guesses = tridiagonal_eigenvalues(&a64, &b64);

    let a: Vec<Float> = (0..=n).map(|k| (rec.a)(k)).collect();
    let b: Vec<Float> = (0..=n).map(|k| if k == 0 { Float::new(prec) } else { (rec.b)(k) }).collect();

    let half = if rec.symmetric { n / 2 } else { 0 };
    let mut nodes = vec![Float::new(prec); n];
    let mut weights = vec![Float::new(prec); n];
    let tol = Float::with_val(prec, epsilon(prec) * 64u32);

    let polish = |guess: f64| -> Result<(Float, Float)> {
        let mut x = mp(prec, guess);
        for _ in 0..16 {
            let (p, dp, _) = evaluate_orthonormal(&a, &b, n, &x);
            if dp.is_zero() {
                break;
            }
            let step = Float::with_val(prec, &p / &dp);
            x -= &step;
            let scale = Float::with_val(prec, x.abs_ref()).max(&Float::with_val(prec, 1));
            if Float::with_val(prec, step.abs_ref()) <= Float::with_val(prec, &tol * &scale) {
                let (_, _, norm) = evaluate_orthonormal(&a, &b, n, &x);
                return Ok((x, Float::with_val(prec, 1) / norm));
            }
        }
        Err(Error::Numeric(format!("Newton refinement of quadrature node near {guess} did not converge")))
    };

    if rec.symmetric {
        // Only the upper half; mirror the rest. Eigenvalues are ascending.
        for i in 0..half {
            let j = n - 1 - i;
            let (x, w) = polish(guesses[j].abs())?;
            nodes[i] = Float::with_val(prec, -&x);
            weights[i] = w.clone();
            nodes[j] = x;
            weights[j] = w;
        }
        if n % 2 == 1 {
            let zero = Float::new(prec);
            let (_, _, norm) = evaluate_orthonormal(&a, &b, n, &zero);
            nodes[half] = zero;
            weights[half] = Float::with_val(prec, 1) / norm;
        }
    } else {
        for i in 0..n {
            let (x, w) = polish(guesses[i])?;
            nodes[i] = x;
            weights[i] = w;
        }
    }
    Ok((nodes, weights))
}

/// Returns `(p_n(x), p_n'(x), Σ_{k<n} p_k(x)²)` for the orthonormal family.
fn evaluate_orthonormal(a: &[Float], b: &[Float], n: usize, x: &Float) -> (Float, Float, Float) {
    let prec = x.prec();
    let mut p_prev = Float::new(prec);
    let mut p = Float::with_val(prec, 1);
    let mut dp_prev = Float::new(prec);
    let mut dp = Float::new(prec);
    let mut norm = Float::new(prec);
    for k in 0..n {
        norm += Float::with_val(prec, p.square_ref());
        let xa = Float::with_val(prec, x - &a[k]);
        let p_next = (Float::with_val(prec, &xa * &p) - Float::with_val(prec, &b[k] * &p_prev)) / &b[k + 1];
        let dp_next = (Float::with_val(prec, &p + &(Float::with_val(prec, &xa * &dp)))
            - Float::with_val(prec, &b[k] * &dp_prev))
            / &b[k + 1];
        p_prev = std::mem::replace(&mut p, p_next);
        dp_prev = std::mem::replace(&mut dp, dp_next);
    }
    (p, dp, norm)
}

/// Eigenvalues (ascending) of the symmetric tridiagonal matrix with diagonal
/// `a` and sub-diagonal `b[1..]`, by Sturm-count bisection.
fn tridiagonal_eigenvalues(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = b.get(i).copied().unwrap_or(0.0).abs() + b.get(i + 1).copied().unwrap_or(0.0).abs();
        lo = lo.min(a[i] - r);
        hi = hi.max(a[i] + r);
    }
    let count_below = |x: f64| -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..n {
            let off = if i == 0 { 0.0 } else { b[i] * b[i] / q };
            q = a[i] - x - off;
            if q == 0.0 {
                q = -f64::EPSILON * (x.abs() + 1.0);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    };
    (0..n)
        .map(|k| {
            let (mut l, mut h) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (l + h);
                if mid == l || mid == h {
                    break;
                }
                if count_below(mid) > k {
                    h = mid;
                } else {
                    l = mid;
                }
            }
            0.5 * (l + h)
        })
        .collect()
}
