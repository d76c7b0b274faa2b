//! Newton systems of the Hu-Washizu functional.
//!
//! The Hessian of `E` in the unknown order `[phi_free, (Theta_e, T_e)_e]` is
//!
//! ```text
//! [ 0        0          vol B^T ]
//! [ 0        vol A     -vol I   ]   per element, A = dP/dTheta,
//! [ vol B   -vol I      0       ]   B = dphi_e as a linear map of phi.
//! ```
//!
//! The `(Theta_e, T_e)` block is invertible for every `A`, with inverse
//! `[[0, -I], [-I, -A]] / vol`, so the Newton step is computed by eliminating
//! it exactly and factoring the symmetric (possibly indefinite) reduced
//! matrix `K = sum_e vol B^T A B` with Bunch-Kaufman pivoting.

use nalgebra::DMatrix;

use super::functional::Residuals;
use super::{with_element, BoundaryData, HWState};
use crate::constitutive::EnergyModel;
use crate::kinematics::{dphi_element, DeformationField};
use crate::linalg::LdltFactor;
use crate::mesh::SimplicialMesh;
use crate::par::Policy;
use crate::{Error, Result};

/// Square sparse matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct KktMatrix {
    size: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl KktMatrix {
    /// Duplicate entries are summed.
    pub fn from_triplets(size: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; size + 1];
        let mut cols: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().expect("previous entry") += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..size {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { size, row_ptr, cols, vals }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.cols[range.clone()].binary_search(&col) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.size)
            .map(|r| (self.row_ptr[r]..self.row_ptr[r + 1]).map(|k| self.vals[k] * x[self.cols[k]]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.size, self.size);
        for r in 0..self.size {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k])] = self.vals[k];
            }
        }
        m
    }

    /// `max |a_ij - a_ji| / max |a_ij|`.
    pub fn symmetry_error(&self) -> f64 {
        let scale = self.vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0_f64;
        for r in 0..self.size {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                worst = worst.max((self.vals[k] - self.get(self.cols[k], r)).abs());
            }
        }
        worst / scale
    }
}

/// Assembled monolithic Newton system `H dx = -R`.
#[derive(Debug, Clone)]
pub struct KktSystem {
    pub matrix: KktMatrix,
    pub rhs: Vec<f64>,
    /// Flat `v * n + a` index of each deformation unknown.
    pub free_dofs: Vec<usize>,
    dim: usize,
    elements: usize,
}

impl KktSystem {
    fn local(&self) -> usize {
        self.dim * self.dim
    }

    pub fn theta_offset(&self, e: usize) -> usize {
        self.free_dofs.len() + 2 * e * self.local()
    }

    pub fn tau_offset(&self, e: usize) -> usize {
        self.theta_offset(e) + self.local()
    }

    /// Name of the field block an unknown belongs to.
    pub fn block_of(&self, index: usize) -> &'static str {
        if index < self.free_dofs.len() {
            "deformation"
        } else if (index - self.free_dofs.len()) % (2 * self.local()) < self.local() {
            "deformation 1-form"
        } else {
            "traction"
        }
    }

    /// Splits a solution vector into field increments; constrained
    /// deformation components are zero.
    pub fn unpack(&self, x: &[f64], num_vertices: usize) -> Result<HWState> {
        let n = self.dim;
        let mut phi = vec![0.0; n * num_vertices];
        for (k, &dof) in self.free_dofs.iter().enumerate() {
            phi[dof] = x[k];
        }
        let block = |off: usize| DMatrix::from_row_slice(n, n, &x[off..off + n * n]);
        Ok(HWState {
            phi: DeformationField::new(n, phi)?,
            theta: (0..self.elements).map(|e| block(self.theta_offset(e))).collect(),
            traction: (0..self.elements).map(|e| block(self.tau_offset(e))).collect(),
        })
    }

    /// Dense symmetric-indefinite solve of the full system.
    pub fn solve_dense(&self) -> Result<Vec<f64>> {
        let f = LdltFactor::from_matrix(&self.matrix.to_dense())
            .map_err(|p| Error::SingularKkt { block: self.block_of(p.index).to_string(), pivot: p.index })?;
        Ok(f.solve(&self.rhs))
    }
}

fn free_index(mesh: &SimplicialMesh, free_dofs: &[usize]) -> Vec<Option<usize>> {
    let mut map = vec![None; mesh.dim() * mesh.num_vertices()];
    for (k, &d) in free_dofs.iter().enumerate() {
        map[d] = Some(k);
    }
    map
}

fn tangents(policy: Policy, state: &HWState, model: &EnergyModel) -> Result<Vec<DMatrix<f64>>> {
    policy.try_map(state.theta.len(), |e| model.tangent(&state.theta[e]).map_err(|err| with_element(err, e)))
}

/// Full Hessian of `E` and the stacked negative residual.
pub fn assemble_kkt(
    mesh: &SimplicialMesh,
    state: &HWState,
    bcs: &BoundaryData,
    model: &EnergyModel,
) -> Result<KktSystem> {
    let policy = Policy::default();
    let n = mesh.dim();
    let nn = n * n;
    let free_dofs = bcs.free_dofs(mesh);
    let map = free_index(mesh, &free_dofs);
    let res = Residuals::evaluate(policy, mesh, state, bcs, model)?;
    let tans = tangents(policy, state, model)?;
    let system_shell = KktSystem {
        matrix: KktMatrix::from_triplets(0, Vec::new()),
        rhs: Vec::new(),
        free_dofs,
        dim: n,
        elements: mesh.num_elements(),
    };
    let size = system_shell.theta_offset(mesh.num_elements());

    let mut triplets = Vec::new();
    let mut rhs = vec![0.0; size];
    for (k, &d) in system_shell.free_dofs.iter().enumerate() {
        rhs[k] = -res.phi[d];
    }
    for e in 0..mesh.num_elements() {
        let geo = mesh.element_geometry(e);
        let vol = geo.volume;
        let (to, po) = (system_shell.theta_offset(e), system_shell.tau_offset(e));
        for p in 0..nn {
            for q in 0..nn {
                triplets.push((to + p, to + q, vol * tans[e][(p, q)]));
            }
            triplets.push((to + p, po + p, -vol));
            triplets.push((po + p, to + p, -vol));
            rhs[to + p] = -res.theta[e][(p / n, p % n)];
            rhs[po + p] = -res.tau[e][(p / n, p % n)];
        }
        for (lv, &v) in mesh.element(e).iter().enumerate() {
            for a in 0..n {
                let Some(col) = map[v * n + a] else { continue };
                for big_a in 0..n {
                    let row = po + a * n + big_a;
                    let val = vol * geo.grad_hats[(lv, big_a)];
                    triplets.push((row, col, val));
                    triplets.push((col, row, val));
                }
            }
        }
    }
    Ok(KktSystem { matrix: KktMatrix::from_triplets(size, triplets), rhs, ..system_shell })
}

/// Newton increment together with the reduced-system inertia.
#[derive(Debug, Clone)]
pub struct NewtonDirection {
    pub step: HWState,
    /// `(positive, negative, zero)` eigenvalue counts of the reduced matrix.
    pub inertia: (usize, usize, usize),
}

fn flatten(m: &DMatrix<f64>) -> nalgebra::DVector<f64> {
    let n = m.nrows();
    nalgebra::DVector::from_fn(n * n, |p, _| m[(p / n, p % n)])
}

fn unflatten(n: usize, v: &nalgebra::DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |a, b| v[a * n + b])
}

/// Newton step by exact elimination of the element unknowns.
///
/// When `condensed` is set the step keeps `Theta := dphi` and
/// `T := pk1(Theta)`, and only the deformation increment is meaningful.
pub fn newton_direction(
    policy: Policy,
    mesh: &SimplicialMesh,
    state: &HWState,
    bcs: &BoundaryData,
    model: &EnergyModel,
    res: &Residuals,
) -> Result<NewtonDirection> {
    let n = mesh.dim();
    let free_dofs = bcs.free_dofs(mesh);
    let map = free_index(mesh, &free_dofs);
    let nf = free_dofs.len();
    let tans = tangents(policy, state, model)?;

    // Per element: local stiffness vol g A g^T in (lv, a) order and the
    // load correction B^T (A R_tau + R_theta).
    let locals = policy.map(mesh.num_elements(), |e| {
        let geo = mesh.element_geometry(e);
        let g = &geo.grad_hats;
        let nv = n + 1;
        let a = &tans[e];
        let mut k = DMatrix::zeros(nv * n, nv * n);
        for lv in 0..nv {
            for ca in 0..n {
                for lw in 0..nv {
                    for cb in 0..n {
                        let mut s = 0.0;
                        for big_a in 0..n {
                            for big_b in 0..n {
                                s += g[(lv, big_a)] * a[(ca * n + big_a, cb * n + big_b)] * g[(lw, big_b)];
                            }
                        }
                        k[(lv * n + ca, lw * n + cb)] = geo.volume * s;
                    }
                }
            }
        }
        let corr = unflatten(n, &(a * flatten(&res.tau[e]))) + &res.theta[e];
        // row lv = (corr g_lv)^T
        (k, g * corr.transpose())
    });

    let mut kmat = vec![0.0; nf * nf];
    let mut rhs = vec![0.0; nf];
    for (k, &d) in free_dofs.iter().enumerate() {
        rhs[k] = -res.phi[d];
    }
    for (e, (k, corr)) in locals.iter().enumerate() {
        let verts = mesh.element(e);
        for (lv, &v) in verts.iter().enumerate() {
            for ca in 0..n {
                let Some(row) = map[v * n + ca] else { continue };
                rhs[row] -= corr[(lv, ca)];
                for (lw, &w) in verts.iter().enumerate() {
                    for cb in 0..n {
                        if let Some(col) = map[w * n + cb] {
                            kmat[row * nf + col] += k[(lv * n + ca, lw * n + cb)];
                        }
                    }
                }
            }
        }
    }
    let factor =
        LdltFactor::factor(nf, kmat).map_err(|p| Error::SingularKkt { block: "deformation".into(), pivot: p.index })?;
    let inertia = factor.inertia();
    let x = factor.solve(&rhs);

    let mut dphi_vals = vec![0.0; n * mesh.num_vertices()];
    for (k, &d) in free_dofs.iter().enumerate() {
        dphi_vals[d] = x[k];
    }
    let dphi_field = DeformationField::new(n, dphi_vals)?;
    let blocks = policy.map(mesh.num_elements(), |e| {
        let vol = mesh.element_geometry(e).volume;
        let d_theta = dphi_element(mesh, &dphi_field, e) + &res.tau[e] / vol;
        let d_tau = unflatten(n, &(&tans[e] * flatten(&d_theta))) + &res.theta[e] / vol;
        (d_theta, d_tau)
    });
    let (theta, traction) = blocks.into_iter().unzip();
    Ok(NewtonDirection { step: HWState { phi: dphi_field, theta, traction }, inertia })
}
