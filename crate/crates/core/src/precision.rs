//! Extended-precision scalars and dense matrices.
//!
//! Hankel moment matrices become ill-conditioned geometrically with their
//! order, so everything upstream of a reported number is carried in MPFR
//! floats at a configurable mantissa width and only converted to `f64` at
//! the very end.

use std::fmt;
use std::ops::{Index, IndexMut};

use rug::ops::Pow;
use rug::{Assign, Float};

/// Default mantissa width in bits.
pub const DEFAULT_PRECISION_BITS: u32 = 256;

/// Smallest mantissa width accepted anywhere in the crate.
pub const MIN_PRECISION_BITS: u32 = 64;

/// Environment variable consulted by [`precision_from_env`].
pub const PRECISION_ENV_VAR: &str = "SUBRES_PRECISION_BITS";

/// Reads the default precision from the environment, falling back to
/// [`DEFAULT_PRECISION_BITS`] when unset or unparsable.
pub fn precision_from_env() -> u32 {
    std::env::var(PRECISION_ENV_VAR)
        .ok()
        .and_then(|s| s.trim().parse::<u32>().ok())
        .filter(|&b| b >= MIN_PRECISION_BITS)
        .unwrap_or(DEFAULT_PRECISION_BITS)
}

#[inline]
pub fn mp(prec: u32, value: f64) -> Float {
    Float::with_val(prec, value)
}

#[inline]
pub fn mp_int(prec: u32, value: i64) -> Float {
    Float::with_val(prec, value)
}

/// `n!` as an extended-precision float.
pub fn factorial(prec: u32, n: u32) -> Float {
    let mut acc = Float::with_val(prec, 1);
    for k in 2..=n {
        acc *= k;
    }
    acc
}

/// `x^p` for a non-negative integer power.
pub fn powi(x: &Float, p: u32) -> Float {
    Float::with_val(x.prec(), x.pow(p))
}

/// Machine epsilon for a given mantissa width.
pub fn epsilon(prec: u32) -> Float {
    Float::with_val(prec, Float::i_exp(1, 1 - prec as i32))
}

/// Dense row-major matrix of MPFR floats sharing one precision.
#[derive(Clone, PartialEq)]
pub struct MpMatrix {
    rows: usize,
    cols: usize,
    prec: u32,
    data: Vec<Float>,
}

impl MpMatrix {
    pub fn zeros(rows: usize, cols: usize, prec: u32) -> Self {
        Self {
            rows,
            cols,
            prec,
            data: vec![Float::new(prec); rows * cols],
        }
    }

    pub fn identity(n: usize, prec: u32) -> Self {
        let mut m = Self::zeros(n, n, prec);
        for i in 0..n {
            m[(i, i)] = Float::with_val(prec, 1);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, prec: u32, mut f: impl FnMut(usize, usize) -> Float) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(Float::with_val(prec, f(i, j)));
            }
        }
        Self { rows, cols, prec, data }
    }

    pub fn from_f64(rows: &[Vec<f64>], prec: u32) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        Self::from_fn(n_rows, n_cols, prec, |i, j| mp(prec, rows[i][j]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[Float] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Upper-left `k × k` block.
    pub fn leading(&self, k: usize) -> Self {
        assert!(k <= self.rows && k <= self.cols, "leading block larger than matrix");
        Self::from_fn(k, k, self.prec, |i, j| self[(i, j)].clone())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, self.prec, |i, j| self[(j, i)].clone())
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let prec = self.prec.max(other.prec);
        let mut out = Self::zeros(self.rows, other.cols, prec);
        let mut tmp = Float::new(prec);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if b.is_zero() {
                        continue;
                    }
                    tmp.assign(a * b);
                    out[(i, j)] += &tmp;
                }
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self::from_fn(self.rows, self.cols, self.prec, |i, j| {
            Float::with_val(self.prec, &self[(i, j)] - &other[(i, j)])
        })
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> Float {
        let mut best = Float::new(self.prec);
        for v in &self.data {
            let a = Float::with_val(self.prec, v.abs_ref());
            if a > best {
                best = a;
            }
        }
        best
    }

    pub fn max_abs_diff(&self, other: &Self) -> Float {
        self.sub(other).max_abs()
    }

    pub fn is_lower_triangular(&self) -> bool {
        (0..self.rows).all(|i| ((i + 1)..self.cols).all(|j| self[(i, j)].is_zero()))
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(Float::to_f64).collect())
            .collect()
    }

    /// Writes the matrix as CSV, one row per line, every entry rendered with
    /// all significant decimal digits of its precision.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|v| v.to_string_radix(10, None)).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for MpMatrix {
    type Output = Float;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Float {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for MpMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Float {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for MpMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "MpMatrix {}x{} @ {} bits", self.rows, self.cols, self.prec)?;
        for row in self.to_f64() {
            writeln!(f, "  {row:?}")?;
        }
        Ok(())
    }
}
