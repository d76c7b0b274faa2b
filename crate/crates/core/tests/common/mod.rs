//! Test-side oracles written independently of the library internals.
#![allow(dead_code, clippy::needless_range_loop)]

use nalgebra::DMatrix;

/// A k-form stored as its full antisymmetric component array of length
/// `n^k`, indexed row-major by `(i_1, ..., i_k)`.
#[derive(Debug, Clone)]
pub struct TensorForm {
    pub dim: usize,
    pub degree: usize,
    pub comps: Vec<f64>,
}

fn multi_index(flat: usize, dim: usize, degree: usize) -> Vec<usize> {
    let mut idx = vec![0; degree];
    let mut r = flat;
    for slot in idx.iter_mut().rev() {
        *slot = r % dim;
        r /= dim;
    }
    idx
}

fn flat_index(idx: &[usize], dim: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * dim + i)
}

fn permutations(k: usize) -> Vec<(Vec<usize>, f64)> {
    if k == 0 {
        return vec![(Vec::new(), 1.0)];
    }
    let mut out = Vec::new();
    for (p, s) in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            // inserting at `pos` moves the new largest element past `len - pos` others
            let sign = if (p.len() - pos) % 2 == 0 { s } else { -s };
            out.push((q, sign));
        }
    }
    out
}

/// Sign of the permutation sorting `idx`, or 0 when an index repeats.
fn sort_sign(idx: &[usize]) -> f64 {
    let mut s = 1.0;
    for a in 0..idx.len() {
        for b in a + 1..idx.len() {
            if idx[a] == idx[b] {
                return 0.0;
            }
            if idx[a] > idx[b] {
                s = -s;
            }
        }
    }
    s
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|x| x as f64).product()
}

impl TensorForm {
    /// From coefficients on `dx^I`, `I` increasing; `order` lists the
    /// tuples in the same order as `coeffs`.
    pub fn from_coeffs(dim: usize, degree: usize, order: &[Vec<usize>], coeffs: &[f64]) -> Self {
        let mut comps = vec![0.0; dim.pow(degree as u32)];
        for f in 0..comps.len() {
            let idx = multi_index(f, dim, degree);
            let s = sort_sign(&idx);
            if s != 0.0 {
                let mut sorted = idx.clone();
                sorted.sort_unstable();
                let pos = order.iter().position(|t| *t == sorted).unwrap();
                comps[f] = s * coeffs[pos];
            }
        }
        Self { dim, degree, comps }
    }

    pub fn coeffs(&self, order: &[Vec<usize>]) -> Vec<f64> {
        order.iter().map(|t| self.comps[flat_index(t, self.dim)]).collect()
    }

    /// `(a ^ b)_{I} = 1/(k! l!) sum_sigma sgn(sigma) a_{sigma ...} b_{sigma ...}`.
    pub fn wedge(&self, other: &Self) -> Self {
        let (n, k, l) = (self.dim, self.degree, other.degree);
        let m = k + l;
        let perms = permutations(m);
        let norm = factorial(k) * factorial(l);
        let comps = (0..n.pow(m as u32))
            .map(|f| {
                let idx = multi_index(f, n, m);
                perms
                    .iter()
                    .map(|(p, s)| {
                        let a: Vec<usize> = p[..k].iter().map(|&q| idx[q]).collect();
                        let b: Vec<usize> = p[k..].iter().map(|&q| idx[q]).collect();
                        s * self.comps[flat_index(&a, n)] * other.comps[flat_index(&b, n)]
                    })
                    .sum::<f64>()
                    / norm
            })
            .collect();
        Self { dim: n, degree: m, comps }
    }

    /// `(F^* a)_{i...} = a_{j...} F_{j i} ...`, contracting every slot.
    pub fn pullback(&self, f: &DMatrix<f64>) -> Self {
        let (n, k) = (self.dim, self.degree);
        let comps = (0..n.pow(k as u32))
            .map(|out| {
                let i = multi_index(out, n, k);
                (0..n.pow(k as u32))
                    .map(|inp| {
                        let j = multi_index(inp, n, k);
                        let w: f64 = (0..k).map(|s| f[(j[s], i[s])]).product();
                        self.comps[inp] * w
                    })
                    .sum::<f64>()
            })
            .collect();
        Self { dim: n, degree: k, comps }
    }

    pub fn one_form(coeffs: &[f64]) -> Self {
        Self { dim: coeffs.len(), degree: 1, comps: coeffs.to_vec() }
    }

    /// Euclidean `*dx^a`: components `eps_{a i_2 ... i_n}`.
    pub fn star_dx(dim: usize, a: usize) -> Self {
        let comps = (0..dim.pow(dim as u32 - 1))
            .map(|f| {
                let mut idx = vec![a];
                idx.extend(multi_index(f, dim, dim - 1));
                sort_sign(&idx)
            })
            .collect();
        Self { dim, degree: dim - 1, comps }
    }

    pub fn add(&self, other: &Self) -> Self {
        let comps = self.comps.iter().zip(&other.comps).map(|(a, b)| a + b).collect();
        Self { dim: self.dim, degree: self.degree, comps }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { dim: self.dim, degree: self.degree, comps: self.comps.iter().map(|c| c * s).collect() }
    }

    /// Coefficient on `dx^0 ^ ... ^ dx^{n-1}` of a top form.
    pub fn volume_coefficient(&self) -> f64 {
        let idx: Vec<usize> = (0..self.dim).collect();
        self.comps[flat_index(&idx, self.dim)]
    }
}

/// `sum_a u^a ^ tau_a` for `u^a = U_aB dx^B` and `tau_a = T_aA *dx^A`,
/// expanded wedge by wedge; returns the volume coefficient.
pub fn pairing_oracle(t: &DMatrix<f64>, u: &DMatrix<f64>) -> f64 {
    let n = t.nrows();
    let mut total = 0.0;
    for a in 0..n {
        let ua = TensorForm::one_form(&(0..n).map(|b| u[(a, b)]).collect::<Vec<_>>());
        let mut tau = TensorForm::star_dx(n, 0).scale(t[(a, 0)]);
        for big_a in 1..n {
            tau = tau.add(&TensorForm::star_dx(n, big_a).scale(t[(a, big_a)]));
        }
        total += ua.wedge(&tau).volume_coefficient();
    }
    total
}

/// Cofactor-expansion determinant.
pub fn det_oracle(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n == 1 {
        return m[(0, 0)];
    }
    (0..n)
        .map(|c| {
            let minor = m.clone().remove_row(0).remove_column(c);
            let s = if c % 2 == 0 { 1.0 } else { -1.0 };
            s * m[(0, c)] * det_oracle(&minor)
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Material {
    Svk,
    NeoHookean,
}

/// Stored energy from the textbook formulas.
pub fn energy_oracle(kind: Material, lambda: f64, mu: f64, f: &DMatrix<f64>) -> f64 {
    let n = f.nrows();
    let c = f.transpose() * f;
    match kind {
        Material::Svk => {
            let e = (c - DMatrix::identity(n, n)) * 0.5;
            0.5 * lambda * e.trace().powi(2) + mu * (e.transpose() * &e).trace()
        }
        Material::NeoHookean => {
            let lnj = det_oracle(f).ln();
            0.5 * mu * (c.trace() - n as f64) - mu * lnj + 0.5 * lambda * lnj * lnj
        }
    }
}

/// First Piola-Kirchhoff stress from the textbook formulas.
pub fn pk1_oracle(kind: Material, lambda: f64, mu: f64, f: &DMatrix<f64>) -> DMatrix<f64> {
    let n = f.nrows();
    match kind {
        Material::Svk => {
            let e = (f.transpose() * f - DMatrix::identity(n, n)) * 0.5;
            let s = DMatrix::identity(n, n) * (lambda * e.trace()) + e * (2.0 * mu);
            f * s
        }
        Material::NeoHookean => {
            let fit = f.clone().try_inverse().unwrap().transpose();
            (f - &fit) * mu + fit * (lambda * det_oracle(f).ln())
        }
    }
}

/// Gradient of a P1 map on one simplex: solves `dphi (x_i - x_0) = y_i - y_0`.
pub fn p1_gradient(ref_pts: &[Vec<f64>], cur_pts: &[Vec<f64>]) -> DMatrix<f64> {
    let n = ref_pts[0].len();
    let dx = DMatrix::from_fn(n, n, |r, c| ref_pts[c + 1][r] - ref_pts[0][r]);
    let dy = DMatrix::from_fn(n, n, |r, c| cur_pts[c + 1][r] - cur_pts[0][r]);
    dy * dx.try_inverse().unwrap()
}

/// `|det(x_i - x_0)| / n!`.
pub fn simplex_volume(pts: &[Vec<f64>]) -> f64 {
    let n = pts[0].len();
    let dx = DMatrix::from_fn(n, n, |r, c| pts[c + 1][r] - pts[0][r]);
    det_oracle(&dx).abs() / factorial(n)
}

/// Random matrix with entries in `[-1, 1]` from a small LCG, for oracle tests
/// that must not share the library's RNG helpers.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((self.0 >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    pub fn matrix(&mut self, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |_, _| self.next_f64())
    }

    /// `I + 0.3 R` with determinant at least 0.2.
    pub fn admissible(&mut self, n: usize) -> DMatrix<f64> {
        loop {
            let f = DMatrix::identity(n, n) + self.matrix(n) * 0.3;
            if det_oracle(&f) >= 0.2 {
                return f;
            }
        }
    }
}
