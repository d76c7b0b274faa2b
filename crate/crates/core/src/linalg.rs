//! Dense symmetric indefinite factorization.
//!
//! `LdltFactor` is an unblocked Bunch-Kaufman `P A P^T = L D L^T`
//! factorization with 1x1 and 2x2 pivots, following the lower-triangular
//! variant of LAPACK `dsytf2`/`dsytrs`: interchanges are applied to the
//! trailing submatrix only and replayed interleaved with the triangular
//! solves.

use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Pivot {
    /// 1x1 pivot at k, row k interchanged with `with`.
    One { with: usize },
    /// 2x2 pivot at (k, k+1), row k+1 interchanged with `with`.
    Two { with: usize },
}

#[derive(Debug, Clone)]
pub struct SingularPivot {
    pub index: usize,
}

#[derive(Debug, Clone)]
pub struct LdltFactor {
    n: usize,
    /// Row-major; lower triangle holds L (unit diagonal implied) and D.
    a: Vec<f64>,
    pivots: Vec<Pivot>,
    two_by_two: usize,
}

const ALPHA: f64 = 0.640_388_203_202_208_4; // (1 + sqrt(17)) / 8

impl LdltFactor {
    /// Factors the symmetric matrix stored row-major in `a` (`n * n` values,
    /// both triangles). Only symmetry up to round-off is assumed.
    pub fn factor(n: usize, mut a: Vec<f64>) -> Result<Self, SingularPivot> {
        assert_eq!(a.len(), n * n);
        let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let tiny = scale * f64::EPSILON * (n.max(1) as f64);
        let mut pivots = Vec::with_capacity(n);
        let mut two_by_two = 0;
        let idx = |i: usize, j: usize| i * n + j;

        let mut k = 0;
        while k < n {
            let absakk = a[idx(k, k)].abs();
            let (mut imax, mut colmax) = (k, 0.0_f64);
            for i in k + 1..n {
                let v = a[idx(i, k)].abs();
                if v > colmax {
                    colmax = v;
                    imax = i;
                }
            }
            if absakk.max(colmax) <= tiny {
                return Err(SingularPivot { index: k });
            }

            let (kp, step) = if absakk >= ALPHA * colmax {
                (k, 1)
            } else {
                let mut rowmax = 0.0_f64;
                for j in k..n {
                    if j != imax {
                        rowmax = rowmax.max(a[idx(imax, j)].abs());
                    }
                }
                if absakk * rowmax >= ALPHA * colmax * colmax {
                    (k, 1)
                } else if a[idx(imax, imax)].abs() >= ALPHA * rowmax {
                    (imax, 1)
                } else {
                    (imax, 2)
                }
            };

            let kk = k + step - 1;
            if kp != kk {
                // Symmetric interchange inside the trailing block a[k.., k..].
                for j in k..n {
                    a.swap(idx(kk, j), idx(kp, j));
                }
                for i in k..n {
                    a.swap(idx(i, kk), idx(i, kp));
                }
            }

            if step == 1 {
                let d = a[idx(k, k)];
                if d.abs() <= tiny {
                    return Err(SingularPivot { index: k });
                }
                let col: Vec<f64> = (k + 1..n).map(|i| a[idx(i, k)]).collect();
                for (ii, i) in (k + 1..n).enumerate() {
                    let li = col[ii] / d;
                    if li != 0.0 {
                        for (jj, j) in (k + 1..n).enumerate() {
                            a[idx(i, j)] -= li * col[jj];
                        }
                    }
                }
                for (ii, i) in (k + 1..n).enumerate() {
                    a[idx(i, k)] = col[ii] / d;
                    a[idx(k, i)] = 0.0;
                }
                pivots.push(Pivot::One { with: kp });
                k += 1;
            } else {
                let (d11, d21, d22) = (a[idx(k, k)], a[idx(k + 1, k)], a[idx(k + 1, k + 1)]);
                let det = d11 * d22 - d21 * d21;
                if det.abs() <= tiny * tiny || !det.is_finite() {
                    return Err(SingularPivot { index: k });
                }
                let c0: Vec<f64> = (k + 2..n).map(|i| a[idx(i, k)]).collect();
                let c1: Vec<f64> = (k + 2..n).map(|i| a[idx(i, k + 1)]).collect();
                let l: Vec<(f64, f64)> = c0
                    .iter()
                    .zip(&c1)
                    .map(|(&x0, &x1)| ((d22 * x0 - d21 * x1) / det, (d11 * x1 - d21 * x0) / det))
                    .collect();
                for (ii, i) in (k + 2..n).enumerate() {
                    let (l0, l1) = l[ii];
                    for (jj, j) in (k + 2..n).enumerate() {
                        a[idx(i, j)] -= l0 * c0[jj] + l1 * c1[jj];
                    }
                }
                for (ii, i) in (k + 2..n).enumerate() {
                    a[idx(i, k)] = l[ii].0;
                    a[idx(i, k + 1)] = l[ii].1;
                    a[idx(k, i)] = 0.0;
                    a[idx(k + 1, i)] = 0.0;
                }
                pivots.push(Pivot::Two { with: kp });
                two_by_two += 1;
                k += 2;
            }
        }
        Ok(Self { n, a, pivots, two_by_two })
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self, SingularPivot> {
        let n = m.nrows();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = m[(i, j)];
            }
        }
        Self::factor(n, a)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn two_by_two_pivots(&self) -> usize {
        self.two_by_two
    }

    /// Inertia `(positive, negative, zero)` of the factored matrix, read off D.
    pub fn inertia(&self) -> (usize, usize, usize) {
        let n = self.n;
        let (mut pos, mut neg, mut zero) = (0, 0, 0);
        let mut k = 0;
        for p in &self.pivots {
            match p {
                Pivot::One { .. } => {
                    let d = self.a[k * n + k];
                    if d > 0.0 {
                        pos += 1
                    } else if d < 0.0 {
                        neg += 1
                    } else {
                        zero += 1
                    }
                    k += 1;
                }
                Pivot::Two { .. } => {
                    let (d11, d21, d22) = (self.a[k * n + k], self.a[(k + 1) * n + k], self.a[(k + 1) * n + k + 1]);
                    let det = d11 * d22 - d21 * d21;
                    if det < 0.0 {
                        pos += 1;
                        neg += 1;
                    } else if d11 + d22 > 0.0 {
                        pos += 2;
                    } else {
                        neg += 2;
                    }
                    k += 2;
                }
            }
        }
        (pos, neg, zero)
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(rhs.len(), n);
        let a = &self.a;
        let mut b = rhs.to_vec();

        let mut k = 0;
        for p in &self.pivots {
            match *p {
                Pivot::One { with } => {
                    b.swap(k, with);
                    let bk = b[k];
                    for i in k + 1..n {
                        b[i] -= a[i * n + k] * bk;
                    }
                    b[k] = bk / a[k * n + k];
                    k += 1;
                }
                Pivot::Two { with } => {
                    b.swap(k + 1, with);
                    let (b0, b1) = (b[k], b[k + 1]);
                    for i in k + 2..n {
                        b[i] -= a[i * n + k] * b0 + a[i * n + k + 1] * b1;
                    }
                    let (d11, d21, d22) = (a[k * n + k], a[(k + 1) * n + k], a[(k + 1) * n + k + 1]);
                    let det = d11 * d22 - d21 * d21;
                    b[k] = (d22 * b0 - d21 * b1) / det;
                    b[k + 1] = (d11 * b1 - d21 * b0) / det;
                    k += 2;
                }
            }
        }

        for p in self.pivots.iter().rev() {
            match *p {
                Pivot::One { with } => {
                    k -= 1;
                    let mut s = 0.0;
                    for i in k + 1..n {
                        s += a[i * n + k] * b[i];
                    }
                    b[k] -= s;
                    b.swap(k, with);
                }
                Pivot::Two { with } => {
                    k -= 2;
                    let (mut s0, mut s1) = (0.0, 0.0);
                    for i in k + 2..n {
                        s0 += a[i * n + k] * b[i];
                        s1 += a[i * n + k + 1] * b[i];
                    }
                    b[k] -= s0;
                    b[k + 1] -= s1;
                    b.swap(k + 1, with);
                }
            }
        }
        b
    }
}
