//! Pointwise exterior algebra in dimensions 2 and 3.
//!
//! A k-form at a point is stored by its coefficients in the basis
//! `dx^I = dx^{i1} ^ ... ^ dx^{ik}` with `i1 < ... < ik`, ordered
//! lexicographically. For `n = 3, k = 2` that is `(dx^dy, dx^dz, dy^dz)`.
//! All sign conventions in the crate follow from this ordering.
//!
//! Multi-indices are handled internally as bitmasks (bit `i` set when
//! `dx^i` is present); for `n <= 3` the numeric order of the masks of a fixed
//! degree coincides with the lexicographic order of the index tuples.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

const MAX_LEN: usize = 3;

const BASIS_2: [&[u8]; 3] = [&[0b00], &[0b01, 0b10], &[0b11]];
const BASIS_3: [&[u8]; 4] = [&[0b000], &[0b001, 0b010, 0b100], &[0b011, 0b101, 0b110], &[0b111]];

/// Basis multi-indices (as bitmasks) of degree `degree` in dimension `dim`.
pub fn basis_masks(dim: usize, degree: usize) -> &'static [u8] {
    match dim {
        2 => BASIS_2[degree],
        3 => BASIS_3[degree],
        _ => unreachable!("dimension validated at construction"),
    }
}

/// Number of basis elements, `C(n, k)`.
pub fn basis_len(dim: usize, degree: usize) -> usize {
    basis_masks(dim, degree).len()
}

fn mask_index(dim: usize, degree: usize, mask: u8) -> usize {
    basis_masks(dim, degree).iter().position(|&m| m == mask).expect("mask belongs to basis")
}

/// Ascending coordinate indices of a bitmask.
pub fn mask_indices(mask: u8) -> Vec<usize> {
    (0..8).filter(|i| mask & (1 << i) != 0).collect()
}

/// Sign of the permutation that sorts the concatenation `I ++ J` of two
/// disjoint ascending multi-indices.
fn shuffle_sign(a: u8, b: u8) -> f64 {
    let mut inversions = 0;
    for i in mask_indices(a) {
        for j in mask_indices(b) {
            if i > j {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(dim))
    }
}

/// Coefficients of an alternating k-form at a single point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KFormPoint {
    dim: usize,
    degree: usize,
    coeffs: [f64; MAX_LEN],
}

impl KFormPoint {
    pub fn new(dim: usize, degree: usize, coeffs: &[f64]) -> Result<Self> {
        check_dim(dim)?;
        if degree > dim {
            return Err(Error::DegreeOutOfRange { dim, degree });
        }
        let len = basis_len(dim, degree);
        if coeffs.len() != len {
            return Err(Error::DimensionMismatch(format!(
                "{}-form in dimension {} needs {} coefficients, got {}",
                degree,
                dim,
                len,
                coeffs.len()
            )));
        }
        let mut c = [0.0; MAX_LEN];
        c[..len].copy_from_slice(coeffs);
        Ok(Self { dim, degree, coeffs: c })
    }

    pub fn zero(dim: usize, degree: usize) -> Result<Self> {
        check_dim(dim)?;
        if degree > dim {
            return Err(Error::DegreeOutOfRange { dim, degree });
        }
        Ok(Self { dim, degree, coeffs: [0.0; MAX_LEN] })
    }

    pub fn scalar(dim: usize, value: f64) -> Result<Self> {
        Self::new(dim, 0, &[value])
    }

    /// 1-form with the given coefficients on `dx^1 .. dx^n`.
    pub fn one_form(coeffs: &[f64]) -> Result<Self> {
        Self::new(coeffs.len(), 1, coeffs)
    }

    /// `dx^i` (zero-based coordinate index).
    pub fn dx(dim: usize, i: usize) -> Result<Self> {
        let mut f = Self::zero(dim, 1)?;
        if i >= dim {
            return Err(Error::DimensionMismatch(format!("dx^{i} in dimension {dim}")));
        }
        f.coeffs[i] = 1.0;
        Ok(f)
    }

    /// Basis element number `index` of degree `degree`.
    pub fn basis(dim: usize, degree: usize, index: usize) -> Result<Self> {
        let mut f = Self::zero(dim, degree)?;
        if index >= basis_len(dim, degree) {
            return Err(Error::DimensionMismatch(format!("basis index {index} out of range")));
        }
        f.coeffs[index] = 1.0;
        Ok(f)
    }

    /// The coordinate volume form `dx^1 ^ ... ^ dx^n`.
    pub fn volume(dim: usize) -> Result<Self> {
        Self::new(dim, dim, &[1.0])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs[..basis_len(self.dim, self.degree)]
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        let len = basis_len(self.dim, self.degree);
        &mut self.coeffs[..len]
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs().iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn scale(mut self, s: f64) -> Self {
        for c in self.coeffs_mut() {
            *c *= s;
        }
        self
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim || self.degree != other.degree {
            return Err(Error::DimensionMismatch(format!(
                "({}, {})-form vs ({}, {})-form",
                self.dim, self.degree, other.dim, other.degree
            )));
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let mut out = *self;
        for (a, b) in out.coeffs_mut().iter_mut().zip(other.coeffs()) {
            *a += b;
        }
        Ok(out)
    }
}

impl Add for KFormPoint {
    type Output = KFormPoint;

    /// Panics when the operands differ in dimension or degree.
    fn add(self, rhs: Self) -> Self {
        self.checked_add(&rhs).expect("adding forms of different shape")
    }
}

impl Sub for KFormPoint {
    type Output = KFormPoint;

    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for KFormPoint {
    type Output = KFormPoint;

    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl Mul<f64> for KFormPoint {
    type Output = KFormPoint;

    fn mul(self, rhs: f64) -> Self {
        self.scale(rhs)
    }
}

const AXIS_NAMES: [&str; 3] = ["dx", "dy", "dz"];

impl fmt::Display for KFormPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let masks = basis_masks(self.dim, self.degree);
        let mut first = true;
        for (c, &mask) in self.coeffs().iter().zip(masks) {
            if *c == 0.0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c:.16e}")?;
            if self.degree > 0 {
                let names: Vec<&str> = mask_indices(mask).iter().map(|&i| AXIS_NAMES[i]).collect();
                write!(f, "·{}", names.join("^"))?;
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// Wedge product of a k-form and an l-form.
pub fn wedge(a: &KFormPoint, b: &KFormPoint) -> Result<KFormPoint> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch(format!("wedge of forms in dimensions {} and {}", a.dim, b.dim)));
    }
    let n = a.dim;
    let degree = a.degree + b.degree;
    if degree > n {
        return Err(Error::DegreeOutOfRange { dim: n, degree });
    }
    let mut out = KFormPoint::zero(n, degree)?;
    let (ma, mb) = (basis_masks(n, a.degree), basis_masks(n, b.degree));
    for (ca, &ia) in a.coeffs().iter().zip(ma) {
        if *ca == 0.0 {
            continue;
        }
        for (cb, &ib) in b.coeffs().iter().zip(mb) {
            if ia & ib != 0 {
                continue;
            }
            let k = mask_index(n, degree, ia | ib);
            out.coeffs[k] += shuffle_sign(ia, ib) * ca * cb;
        }
    }
    Ok(out)
}

/// A Riemannian metric at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricPoint {
    g: DMatrix<f64>,
    inverse: DMatrix<f64>,
    det: f64,
}

impl MetricPoint {
    /// Validates exact symmetry and positive leading principal minors.
    pub fn new(g: DMatrix<f64>) -> Result<Self> {
        let n = g.nrows();
        check_dim(n)?;
        if g.ncols() != n {
            return Err(Error::NotSpd(format!("{}x{} matrix", n, g.ncols())));
        }
        if g != g.transpose() {
            return Err(Error::NotSpd("not symmetric".into()));
        }
        for k in 1..=n {
            let minor = g.view((0, 0), (k, k)).determinant();
            if !(minor > 0.0) {
                return Err(Error::NotSpd(format!("leading minor {k} = {minor:e}")));
            }
        }
        let inverse = g.clone().try_inverse().ok_or_else(|| Error::NotSpd("not invertible".into()))?;
        let det = g.determinant();
        Ok(Self { g, inverse, det })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    /// Riemannian volume form `sqrt(det g) dx^1 ^ ... ^ dx^n`.
    pub fn volume_form(&self) -> KFormPoint {
        KFormPoint::volume(self.dim()).expect("valid dim").scale(self.det.sqrt())
    }

    /// Induced inner product of two k-forms: `<dx^I, dx^J> = det(g^{-1}[I, J])`.
    pub fn inner(&self, a: &KFormPoint, b: &KFormPoint) -> Result<f64> {
        a.same_shape(b)?;
        if a.dim != self.dim() {
            return Err(Error::DimensionMismatch("metric vs form dimension".into()));
        }
        let masks = basis_masks(a.dim, a.degree);
        let mut sum = 0.0;
        for (ca, &ia) in a.coeffs().iter().zip(masks) {
            for (cb, &ib) in b.coeffs().iter().zip(masks) {
                sum += ca * cb * self.basis_inner(ia, ib);
            }
        }
        Ok(sum)
    }

    fn basis_inner(&self, ia: u8, ib: u8) -> f64 {
        let (ri, ci) = (mask_indices(ia), mask_indices(ib));
        if ri.is_empty() {
            return 1.0;
        }
        self.inverse.select_rows(&ri).select_columns(&ci).determinant()
    }
}

/// Hodge star, realized from `beta ^ *alpha = <beta, alpha>_g vol_g`.
///
/// Testing the relation against the basis `dx^I` gives the coefficient of
/// `*alpha` on the complementary index `I^c` directly, since `dx^I ^ dx^L`
/// vanishes unless `L = I^c`.
pub fn hodge(a: &KFormPoint, g: &MetricPoint) -> Result<KFormPoint> {
    let n = a.dim;
    if g.dim() != n {
        return Err(Error::DimensionMismatch("metric vs form dimension".into()));
    }
    let full: u8 = (1 << n) - 1;
    let sqrt_det = g.det.sqrt();
    let mut out = KFormPoint::zero(n, n - a.degree)?;
    let masks = basis_masks(n, a.degree);
    for &test in masks {
        let complement = full & !test;
        let mut pairing = 0.0;
        for (c, &ia) in a.coeffs().iter().zip(masks) {
            pairing += c * g.basis_inner(test, ia);
        }
        let k = mask_index(n, n - a.degree, complement);
        out.coeffs[k] = shuffle_sign(test, complement) * pairing * sqrt_det;
    }
    Ok(out)
}

/// Raises the index of a 1-form: `g^{-1} a`.
pub fn sharp(a: &KFormPoint, g: &MetricPoint) -> Result<DVector<f64>> {
    if a.degree != 1 || a.dim != g.dim() {
        return Err(Error::DimensionMismatch("sharp expects a 1-form of metric dimension".into()));
    }
    Ok(g.inverse() * DVector::from_column_slice(a.coeffs()))
}

/// Lowers the index of a vector: `g v`.
pub fn flat(v: &DVector<f64>, g: &MetricPoint) -> Result<KFormPoint> {
    if v.len() != g.dim() {
        return Err(Error::DimensionMismatch("flat expects a vector of metric dimension".into()));
    }
    KFormPoint::one_form((g.matrix() * v).as_slice())
}

/// Pullback by a linear map: `(F* a)(v1..vk) = a(F v1, .., F vk)`.
///
/// Coefficients are `(F* a)_I = sum_J a_J det(F[J, I])`.
pub fn pullback(a: &KFormPoint, f: &DMatrix<f64>) -> Result<KFormPoint> {
    let n = a.dim;
    if f.nrows() != n || f.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "pullback of a form in dimension {} by a {}x{} matrix",
            n,
            f.nrows(),
            f.ncols()
        )));
    }
    if a.degree == 0 {
        return Ok(*a);
    }
    let masks = basis_masks(n, a.degree);
    let mut out = KFormPoint::zero(n, a.degree)?;
    for (k, &target) in masks.iter().enumerate() {
        let cols = mask_indices(target);
        let mut s = 0.0;
        for (c, &source) in a.coeffs().iter().zip(masks) {
            if *c != 0.0 {
                s += c * f.select_rows(&mask_indices(source)).select_columns(&cols).determinant();
            }
        }
        out.coeffs[k] = s;
    }
    Ok(out)
}

fn check_legs(parts: &[KFormPoint]) -> Result<()> {
    let first = parts.first().ok_or_else(|| Error::DimensionMismatch("empty vector-valued form".into()))?;
    if parts.len() != first.dim {
        return Err(Error::DimensionMismatch(format!("{} legs for a form in dimension {}", parts.len(), first.dim)));
    }
    for p in parts {
        first.same_shape(p)?;
    }
    Ok(())
}

/// `u = f_a (x) u^a`: one k-form per leg of the orthonormal deformed frame.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorValuedForm {
    parts: Vec<KFormPoint>,
}

/// `tau = f^a (x) tau_a`: one k-form per leg of the dual coframe.
#[derive(Debug, Clone, PartialEq)]
pub struct CoVectorValuedForm {
    parts: Vec<KFormPoint>,
}

macro_rules! leg_form_impl {
    ($ty:ident) => {
        impl $ty {
            pub fn new(parts: Vec<KFormPoint>) -> Result<Self> {
                check_legs(&parts)?;
                Ok(Self { parts })
            }

            pub fn leg_dim(&self) -> usize {
                self.parts.len()
            }

            pub fn dim(&self) -> usize {
                self.parts[0].dim
            }

            pub fn degree(&self) -> usize {
                self.parts[0].degree
            }

            pub fn parts(&self) -> &[KFormPoint] {
                &self.parts
            }

            pub fn part(&self, leg: usize) -> &KFormPoint {
                &self.parts[leg]
            }
        }
    };
}

leg_form_impl!(VectorValuedForm);
leg_form_impl!(CoVectorValuedForm);

/// Duality pairing of a covector-valued (n-1)-form with a vector-valued
/// 1-form, contracting legs with `<f^a, f_b> = delta^a_b`.
///
/// The 1-form is placed first, `sum_a u^a ^ tau_a`, so that with
/// `tau_a = P_aA *dX^A` the result is `(P : U) vol` in every dimension.
pub fn pair_forms(tau: &CoVectorValuedForm, u: &VectorValuedForm) -> Result<KFormPoint> {
    if tau.dim() != u.dim() || tau.leg_dim() != u.leg_dim() {
        return Err(Error::DimensionMismatch("pairing forms of different shape".into()));
    }
    let n = tau.dim();
    if u.degree() != 1 || tau.degree() != n - 1 {
        return Err(Error::DimensionMismatch(format!(
            "pairing needs degrees ({}, 1), got ({}, {})",
            n - 1,
            tau.degree(),
            u.degree()
        )));
    }
    let mut out = KFormPoint::zero(n, n)?;
    for (ua, ta) in u.parts.iter().zip(&tau.parts) {
        out = out + wedge(ua, ta)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(dim: usize, degree: usize, c: &[f64]) -> KFormPoint {
        KFormPoint::new(dim, degree, c).unwrap()
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(KFormPoint::zero(4, 1), Err(Error::UnsupportedDimension(4))));
        assert!(matches!(KFormPoint::zero(2, 3), Err(Error::DegreeOutOfRange { .. })));
        assert!(KFormPoint::new(3, 2, &[1.0, 2.0]).is_err());
        let a = KFormPoint::dx(3, 0).unwrap();
        let b = KFormPoint::dx(2, 0).unwrap();
        assert!(wedge(&a, &b).is_err());
        let two = KFormPoint::zero(3, 2).unwrap();
        assert!(matches!(wedge(&two, &two), Err(Error::DegreeOutOfRange { .. })));
    }

    #[test]
    fn wedge_examples() {
        let dx = KFormPoint::dx(2, 0).unwrap();
        let dy = KFormPoint::dx(2, 1).unwrap();
        assert_eq!(wedge(&dx, &dx).unwrap().coeffs(), &[0.0]);
        assert_eq!(wedge(&dx, &dy).unwrap().coeffs(), &[1.0]);
        assert_eq!(wedge(&dy, &dx).unwrap().coeffs(), &[-1.0]);

        // (2dx + dy) ^ dz = 2 dx^dz + dy^dz
        let a = f(3, 1, &[2.0, 1.0, 0.0]);
        let dz = KFormPoint::dx(3, 2).unwrap();
        assert_eq!(wedge(&a, &dz).unwrap().coeffs(), &[0.0, 2.0, 1.0]);
    }

    #[test]
    fn hodge_euclidean_table() {
        let g = MetricPoint::identity(3).unwrap();
        let star = |c: &[f64], k| hodge(&f(3, k, c), &g).unwrap();
        assert_eq!(star(&[1.0, 0.0, 0.0], 1).coeffs(), &[0.0, 0.0, 1.0]);
        assert_eq!(star(&[0.0, 1.0, 0.0], 1).coeffs(), &[0.0, -1.0, 0.0]);
        assert_eq!(star(&[0.0, 0.0, 1.0], 1).coeffs(), &[1.0, 0.0, 0.0]);
        assert_eq!(star(&[1.0, 0.0, 0.0], 2).coeffs(), &[0.0, 0.0, 1.0]);
        assert_eq!(star(&[1.0], 0).coeffs(), &[1.0]);
        assert_eq!(star(&[1.0], 3).coeffs(), &[1.0]);

        let g2 = MetricPoint::identity(2).unwrap();
        assert_eq!(hodge(&KFormPoint::dx(2, 0).unwrap(), &g2).unwrap().coeffs(), &[0.0, 1.0]);
        assert_eq!(hodge(&KFormPoint::dx(2, 1).unwrap(), &g2).unwrap().coeffs(), &[-1.0, 0.0]);
    }

    #[test]
    fn hodge_scaled_metric() {
        let g = MetricPoint::new(DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0, 1.0]))).unwrap();
        let s = hodge(&KFormPoint::dx(3, 0).unwrap(), &g).unwrap();
        assert!((s.coeffs()[2] - 0.5).abs() < 1e-15);
        assert_eq!(s.coeffs()[0], 0.0);
        assert_eq!(s.coeffs()[1], 0.0);
    }

    #[test]
    fn hodge_involution_euclidean() {
        for n in [2, 3] {
            let g = MetricPoint::identity(n).unwrap();
            for k in 0..=n {
                for i in 0..basis_len(n, k) {
                    let a = KFormPoint::basis(n, k, i).unwrap();
                    let back = hodge(&hodge(&a, &g).unwrap(), &g).unwrap();
                    let sign = if (k * (n - k)) % 2 == 0 { 1.0 } else { -1.0 };
                    assert_eq!(back, a.scale(sign));
                }
            }
        }
    }

    #[test]
    fn metric_validation() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.2, 1.0]);
        assert!(matches!(MetricPoint::new(asym), Err(Error::NotSpd(_))));
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(MetricPoint::new(indef), Err(Error::NotSpd(_))));
    }

    #[test]
    fn musical_isomorphisms() {
        let g = MetricPoint::identity(3).unwrap();
        let e1 = sharp(&KFormPoint::dx(3, 0).unwrap(), &g).unwrap();
        assert_eq!(e1.as_slice(), &[1.0, 0.0, 0.0]);

        let g = MetricPoint::new(DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0, 1.0]))).unwrap();
        let v = sharp(&KFormPoint::dx(3, 0).unwrap(), &g).unwrap();
        assert_eq!(v.as_slice(), &[0.25, 0.0, 0.0]);
        assert_eq!(flat(&v, &g).unwrap(), KFormPoint::dx(3, 0).unwrap());
    }

    #[test]
    fn pullback_examples() {
        let f2 = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]);
        let dy = KFormPoint::dx(2, 1).unwrap();
        assert_eq!(pullback(&dy, &f2).unwrap().coeffs(), &[0.0, 3.0]);

        let id = DMatrix::identity(3, 3);
        let a = f(3, 2, &[1.0, -2.0, 0.5]);
        assert_eq!(pullback(&a, &id).unwrap(), a);

        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, -1.0, 0.5, 3.0, 0.2, 0.0, 1.5]);
        let vol = KFormPoint::volume(3).unwrap();
        let pulled = pullback(&vol, &m).unwrap();
        assert!((pulled.coeffs()[0] - m.determinant()).abs() < 1e-14);
        assert!(pullback(&vol, &f2).is_err());
    }

    #[test]
    fn pairing_examples() {
        let z3 = KFormPoint::zero(3, 2).unwrap();
        let z1 = KFormPoint::zero(3, 1).unwrap();
        let dydz = f(3, 2, &[0.0, 0.0, 1.0]);
        let dx = KFormPoint::dx(3, 0).unwrap();

        let tau = CoVectorValuedForm::new(vec![dydz, z3, z3]).unwrap();
        let u = VectorValuedForm::new(vec![dx, z1, z1]).unwrap();
        assert_eq!(pair_forms(&tau, &u).unwrap().coeffs(), &[1.0]);

        let u_other = VectorValuedForm::new(vec![z1, dx, z1]).unwrap();
        assert_eq!(pair_forms(&tau, &u_other).unwrap().coeffs(), &[0.0]);

        assert!(pair_forms(&tau, &VectorValuedForm::new(vec![dydz, z3, z3]).unwrap()).is_err());
    }

    #[test]
    fn display_terms() {
        let a = f(3, 2, &[1.5, 0.0, -2.0]);
        assert_eq!(a.to_string(), "1.5000000000000000e0·dx^dy + -2.0000000000000000e0·dy^dz");
        assert_eq!(KFormPoint::zero(2, 1).unwrap().to_string(), "0");
    }
}
