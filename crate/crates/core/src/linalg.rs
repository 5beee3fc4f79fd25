//! Small dense linear algebra: LU factorization with partial pivoting.
//!
//! The systems solved here are dense and modest (a power-flow Jacobian or a
//! network admittance matrix for a ≤100-bus island), so a straightforward
//! dense LU beats pulling in a sparse solver.

use num_complex::Complex;
use num_traits::{Float, Num, NumAssign};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular at pivot column {col}")]
    Singular { col: usize },
    #[error("dimension mismatch: matrix is {n}x{n}, rhs has length {rhs}")]
    Dimension { n: usize, rhs: usize },
}

/// Field element usable by the LU routines: real floats and complex floats.
pub trait LinScalar: Num + NumAssign + Copy + std::ops::Neg<Output = Self> {
    /// Underlying real type used for pivot-magnitude comparisons.
    type Mag: Float;
    /// Squared magnitude.
    fn mag2(self) -> Self::Mag;
}

macro_rules! impl_lin_scalar_real {
    ($($t:ty),*) => {$(
        impl LinScalar for $t {
            type Mag = $t;
            fn mag2(self) -> $t {
                self * self
            }
        }
    )*};
}
impl_lin_scalar_real!(f32, f64);

impl<T: Float + NumAssign> LinScalar for Complex<T> {
    type Mag = T;
    fn mag2(self) -> T {
        self.norm_sqr()
    }
}

/// Square dense matrix, row major.
#[derive(Debug, Clone)]
pub struct DenseMatrix<T> {
    n: usize,
    a: Vec<T>,
}

impl<T: LinScalar> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            a: vec![T::zero(); n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.a[r * self.n + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.a[r * self.n + c] = v;
    }

    #[inline]
    pub fn add_to(&mut self, r: usize, c: usize, v: T) {
        self.a[r * self.n + c] += v;
    }

    /// Factorize in place. The matrix is consumed; singular matrices are
    /// reported with the offending column.
    pub fn factorize(mut self) -> Result<LuFactors<T>, LinalgError> {
        let n = self.n;
        let mut piv = vec![0usize; n];
        // Pivot threshold relative to the largest entry of the matrix.
        let scale = self
            .a
            .iter()
            .map(|v| v.mag2())
            .fold(<T::Mag as num_traits::Zero>::zero(), |a, b| a.max(b));
        let eps = T::Mag::epsilon();
        let tiny = scale * eps * eps * T::Mag::from(n as f64).unwrap_or(T::Mag::one());

        for col in 0..n {
            // select pivot
            let mut best = col;
            let mut best_mag = self.get(col, col).mag2();
            for r in (col + 1)..n {
                let m = self.get(r, col).mag2();
                if m > best_mag {
                    best = r;
                    best_mag = m;
                }
            }
            if !(best_mag > tiny) || !best_mag.is_finite() {
                return Err(LinalgError::Singular { col });
            }
            piv[col] = best;
            if best != col {
                for c in 0..n {
                    let t = self.get(col, c);
                    self.set(col, c, self.get(best, c));
                    self.set(best, c, t);
                }
            }
            let inv_piv = T::one() / self.get(col, col);
            for r in (col + 1)..n {
                let factor = self.get(r, col) * inv_piv;
                self.set(r, col, factor);
                if factor != T::zero() {
                    for c in (col + 1)..n {
                        let v = self.get(col, c);
                        let cur = self.get(r, c);
                        self.set(r, c, cur - factor * v);
                    }
                }
            }
        }
        Ok(LuFactors {
            n,
            lu: self.a,
            piv,
        })
    }
}

/// LU factors with the pivot permutation, reusable across many solves.
#[derive(Debug, Clone)]
pub struct LuFactors<T> {
    n: usize,
    lu: Vec<T>,
    piv: Vec<usize>,
}

impl<T: LinScalar> LuFactors<T> {
    pub fn solve(&self, b: &mut [T]) -> Result<(), LinalgError> {
        let n = self.n;
        if b.len() != n {
            return Err(LinalgError::Dimension { n, rhs: b.len() });
        }
        for col in 0..n {
            let p = self.piv[col];
            if p != col {
                b.swap(col, p);
            }
            let bc = b[col];
            if bc != T::zero() {
                for r in (col + 1)..n {
                    let l = self.lu[r * n + col];
                    b[r] -= l * bc;
                }
            }
        }
        for col in (0..n).rev() {
            let x = b[col] / self.lu[col * n + col];
            b[col] = x;
            if x != T::zero() {
                for r in 0..col {
                    let u = self.lu[r * n + col];
                    b[r] -= u * x;
                }
            }
        }
        Ok(())
    }
}

/// Least-squares straight-line fit `y = a + b t`; returns `(a, b, sse)`.
///
/// Used by the piecewise-linear change-point segmentation.
pub fn line_fit<T: Scalar>(ts: &[T], ys: &[T]) -> (T, T, T) {
    let n = T::of(ts.len() as f64);
    let st: T = ts.iter().copied().sum();
    let sy: T = ys.iter().copied().sum();
    let stt: T = ts.iter().map(|&t| t * t).sum();
    let sty: T = ts.iter().zip(ys).map(|(&t, &y)| t * y).sum();
    let det = n * stt - st * st;
    let (a, b) = if det.abs() < T::epsilon() {
        (sy / n, T::zero())
    } else {
        ((sy * stt - st * sty) / det, (n * sty - st * sy) / det)
    };
    let sse: T = ts
        .iter()
        .zip(ys)
        .map(|(&t, &y)| {
            let e = y - (a + b * t);
            e * e
        })
        .sum();
    (a, b, sse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    #[test]
    fn solves_real_3x3() {
        let mut m = DenseMatrix::<f64>::zeros(3);
        let a = [[2.0, 1.0, -1.0], [-3.0, -1.0, 2.0], [-2.0, 1.0, 2.0]];
        for r in 0..3 {
            for c in 0..3 {
                m.set(r, c, a[r][c]);
            }
        }
        let lu = m.factorize().unwrap();
        let mut b = vec![8.0, -11.0, -3.0];
        lu.solve(&mut b).unwrap();
        assert_relative_eq!(b[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(b[1], 3.0, epsilon = 1e-12);
        assert_relative_eq!(b[2], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn solves_complex_2x2() {
        let mut m = DenseMatrix::<Complex64>::zeros(2);
        m.set(0, 0, Complex64::new(1.0, 1.0));
        m.set(0, 1, Complex64::new(0.0, -1.0));
        m.set(1, 0, Complex64::new(2.0, 0.0));
        m.set(1, 1, Complex64::new(1.0, 0.0));
        // pick x = (1+2i, 3), compute b = A x
        let x0 = Complex64::new(1.0, 2.0);
        let x1 = Complex64::new(3.0, 0.0);
        let mut b = vec![
            Complex64::new(1.0, 1.0) * x0 + Complex64::new(0.0, -1.0) * x1,
            Complex64::new(2.0, 0.0) * x0 + x1,
        ];
        m.factorize().unwrap().solve(&mut b).unwrap();
        assert!((b[0] - x0).norm() < 1e-12);
        assert!((b[1] - x1).norm() < 1e-12);
    }

    #[test]
    fn reports_singular() {
        let mut m = DenseMatrix::<f64>::zeros(2);
        m.set(0, 0, 1.0);
        m.set(0, 1, 2.0);
        m.set(1, 0, 2.0);
        m.set(1, 1, 4.0);
        assert!(matches!(
            m.factorize(),
            Err(LinalgError::Singular { col: 1 })
        ));
    }

    #[test]
    fn f32_also_works() {
        let mut m = DenseMatrix::<f32>::zeros(2);
        m.set(0, 0, 4.0);
        m.set(0, 1, 1.0);
        m.set(1, 0, 1.0);
        m.set(1, 1, 3.0);
        let mut b = vec![1.0f32, 2.0];
        m.factorize().unwrap().solve(&mut b).unwrap();
        assert_relative_eq!(4.0 * b[0] + b[1], 1.0, epsilon = 1e-5);
        assert_relative_eq!(b[0] + 3.0 * b[1], 2.0, epsilon = 1e-5);
    }
}
