use nalgebra::DMatrix;

use super::{with_element, BoundaryData, HWState};
use crate::constitutive::EnergyModel;
use crate::kinematics::dphi_element;
use crate::mesh::SimplicialMesh;
use crate::par::Policy;
use crate::{Error, Result};

fn check_shapes(mesh: &SimplicialMesh, state: &HWState) -> Result<()> {
    let (n, ne) = (mesh.dim(), mesh.num_elements());
    if state.phi.dim() != n || state.phi.num_vertices() != mesh.num_vertices() {
        return Err(Error::DimensionMismatch("deformation does not match mesh".into()));
    }
    if state.theta.len() != ne || state.traction.len() != ne {
        return Err(Error::DimensionMismatch("element fields do not match mesh".into()));
    }
    if state.theta.iter().chain(&state.traction).any(|m| m.shape() != (n, n)) {
        return Err(Error::DimensionMismatch("element fields must be n x n".into()));
    }
    Ok(())
}

fn average(state: &HWState, vertices: &[usize]) -> Vec<f64> {
    let n = state.phi.dim();
    let mut avg = vec![0.0; n];
    for &v in vertices {
        for (s, p) in avg.iter_mut().zip(state.phi.position(v)) {
            *s += p;
        }
    }
    avg.iter().map(|s| s / vertices.len() as f64).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Hu-Washizu functional. Loads are integrated exactly against P1 via
/// barycentric averages.
pub fn assemble_functional(
    mesh: &SimplicialMesh,
    state: &HWState,
    bcs: &BoundaryData,
    model: &EnergyModel,
) -> Result<f64> {
    check_shapes(mesh, state)?;
    let per_element = Policy::default().try_map(mesh.num_elements(), |e| {
        let vol = mesh.element_geometry(e).volume;
        let theta = &state.theta[e];
        let w = model.energy(theta).map_err(|err| with_element(err, e))?;
        let gap = dphi_element(mesh, &state.phi, e) - theta;
        let mut local = vol * (w + state.traction[e].dot(&gap));
        if let Some(b) = &bcs.body_force {
            local -= vol * dot(b, &average(state, mesh.element(e)));
        }
        Ok::<f64, Error>(local)
    })?;
    let mut energy: f64 = per_element.iter().sum();
    for facet in mesh.boundary_facets() {
        if let Some(t) = bcs.neumann.get(&facet.marker) {
            energy -= mesh.facet_measure(facet) * dot(t, &average(state, &facet.vertices));
        }
    }
    Ok(energy)
}

/// Consistent nodal loads `sum vol b / (n+1) + sum area t / n`, flat
/// `v * n + a`. Constrained vertices keep their entries.
pub fn load_vector(mesh: &SimplicialMesh, bcs: &BoundaryData) -> Vec<f64> {
    let n = mesh.dim();
    let mut f = vec![0.0; n * mesh.num_vertices()];
    if let Some(b) = &bcs.body_force {
        for e in 0..mesh.num_elements() {
            let share = mesh.element_geometry(e).volume / (n + 1) as f64;
            for &v in mesh.element(e) {
                for a in 0..n {
                    f[v * n + a] += share * b[a];
                }
            }
        }
    }
    for facet in mesh.boundary_facets() {
        if let Some(t) = bcs.neumann.get(&facet.marker) {
            let share = mesh.facet_measure(facet) / n as f64;
            for &v in &facet.vertices {
                for a in 0..n {
                    f[v * n + a] += share * t[a];
                }
            }
        }
    }
    f
}

/// `dE/dT_e = vol_e (dphi_e - Theta_e)`.
pub fn residual_tau(mesh: &SimplicialMesh, state: &HWState) -> Vec<DMatrix<f64>> {
    residual_tau_with(Policy::default(), mesh, state)
}

pub(crate) fn residual_tau_with(policy: Policy, mesh: &SimplicialMesh, state: &HWState) -> Vec<DMatrix<f64>> {
    policy.map(mesh.num_elements(), |e| {
        (dphi_element(mesh, &state.phi, e) - &state.theta[e]) * mesh.element_geometry(e).volume
    })
}

/// `dE/dTheta_e = vol_e (pk1(Theta_e) - T_e)`.
pub fn residual_theta(mesh: &SimplicialMesh, state: &HWState, model: &EnergyModel) -> Result<Vec<DMatrix<f64>>> {
    residual_theta_with(Policy::default(), mesh, state, model)
}

pub(crate) fn residual_theta_with(
    policy: Policy,
    mesh: &SimplicialMesh,
    state: &HWState,
    model: &EnergyModel,
) -> Result<Vec<DMatrix<f64>>> {
    policy.try_map(mesh.num_elements(), |e| {
        let p = model.pk1(&state.theta[e]).map_err(|err| with_element(err, e))?;
        Ok((p - &state.traction[e]) * mesh.element_geometry(e).volume)
    })
}

/// `dE/dphi` on every component, constrained ones included:
/// `sum_e vol_e T_e grad N_v - loads`.
pub fn residual_phi_full(mesh: &SimplicialMesh, state: &HWState, bcs: &BoundaryData) -> Vec<f64> {
    residual_phi_full_with(Policy::default(), mesh, state, bcs)
}

pub(crate) fn residual_phi_full_with(
    policy: Policy,
    mesh: &SimplicialMesh,
    state: &HWState,
    bcs: &BoundaryData,
) -> Vec<f64> {
    let n = mesh.dim();
    let local = policy.map(mesh.num_elements(), |e| {
        let geo = mesh.element_geometry(e);
        // row v = vol * (T g_v)^T
        (&geo.grad_hats * state.traction[e].transpose()) * geo.volume
    });
    let mut r: Vec<f64> = load_vector(mesh, bcs).iter().map(|f| -f).collect();
    for (e, block) in local.iter().enumerate() {
        for (lv, &v) in mesh.element(e).iter().enumerate() {
            for a in 0..n {
                r[v * n + a] += block[(lv, a)];
            }
        }
    }
    r
}

/// Equilibrium residual with constrained components set to zero.
pub fn residual_phi(mesh: &SimplicialMesh, state: &HWState, bcs: &BoundaryData) -> Vec<f64> {
    let mut r = residual_phi_full(mesh, state, bcs);
    zero_constrained(mesh.dim(), bcs, &mut r);
    r
}

pub(crate) fn zero_constrained(n: usize, bcs: &BoundaryData, r: &mut [f64]) {
    for &v in bcs.dirichlet.keys() {
        r[v * n..(v + 1) * n].iter_mut().for_each(|x| *x = 0.0);
    }
}

/// All three residuals at one state.
#[derive(Debug, Clone)]
pub struct Residuals {
    /// Reduced equilibrium residual (constrained components zero).
    pub phi: Vec<f64>,
    pub theta: Vec<DMatrix<f64>>,
    pub tau: Vec<DMatrix<f64>>,
}

impl Residuals {
    pub fn evaluate(
        policy: Policy,
        mesh: &SimplicialMesh,
        state: &HWState,
        bcs: &BoundaryData,
        model: &EnergyModel,
    ) -> Result<Self> {
        check_shapes(mesh, state)?;
        let theta = residual_theta_with(policy, mesh, state, model)?;
        let tau = residual_tau_with(policy, mesh, state);
        let mut phi = residual_phi_full_with(policy, mesh, state, bcs);
        zero_constrained(mesh.dim(), bcs, &mut phi);
        Ok(Self { phi, theta, tau })
    }

    pub fn norm_phi(&self) -> f64 {
        self.phi.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn norm_theta(&self) -> f64 {
        self.theta.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
    }

    pub fn norm_tau(&self) -> f64 {
        self.tau.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
    }

    pub fn norm(&self) -> f64 {
        (self.norm_phi().powi(2) + self.norm_theta().powi(2) + self.norm_tau().powi(2)).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hw::initial_guess;
    use crate::kinematics::DeformationField;
    use crate::mesh::build_box_mesh;

    fn mesh() -> SimplicialMesh {
        build_box_mesh(2, &[3, 3], &[0.0, 0.0], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn undeformed_unloaded_state_has_zero_energy_and_residuals() {
        let m = mesh();
        let model = EnergyModel::svk(1.0, 1.0);
        let bcs = BoundaryData::default();
        let s = initial_guess(&m, &bcs, &model).unwrap();
        assert!(assemble_functional(&m, &s, &bcs, &model).unwrap().abs() < 1e-15);
        let r = Residuals::evaluate(Policy::Sequential, &m, &s, &bcs, &model).unwrap();
        assert!(r.norm() < 1e-14);
    }

    #[test]
    fn multiplier_term_vanishes_at_compatible_states() {
        let m = mesh();
        let model = EnergyModel::neo_hookean(2.0, 1.0);
        let bcs = BoundaryData::default();
        let a = DMatrix::from_row_slice(2, 2, &[1.1, 0.2, -0.1, 0.9]);
        let mut s = initial_guess(&m, &bcs, &model).unwrap();
        s.phi = DeformationField::affine(&m, &a, &[0.0, 0.0]);
        s.theta = vec![a.clone(); m.num_elements()];
        let e0 = assemble_functional(&m, &s, &bcs, &model).unwrap();
        s.traction.iter_mut().for_each(|t| *t *= 7.5);
        let e1 = assemble_functional(&m, &s, &bcs, &model).unwrap();
        assert!((e0 - e1).abs() < 1e-14);
        for r in residual_tau(&m, &s) {
            assert!(r.abs().max() < 1e-15);
        }
    }

    #[test]
    fn svk_at_identity_leaves_multiplier_remainder() {
        let m = mesh();
        let model = EnergyModel::svk(1.0, 1.0);
        let mut s = initial_guess(&m, &BoundaryData::default(), &model).unwrap();
        let t = DMatrix::from_row_slice(2, 2, &[0.3, -0.2, 0.1, 0.5]);
        s.traction = vec![t.clone(); m.num_elements()];
        for (e, r) in residual_theta(&m, &s, &model).unwrap().iter().enumerate() {
            let vol = m.element_geometry(e).volume;
            assert!((r + &t * vol).abs().max() < 1e-15);
        }
    }

    #[test]
    fn constant_traction_has_no_interior_residual() {
        let m = build_box_mesh(2, &[4, 4], &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let model = EnergyModel::svk(1.0, 1.0);
        let mut s = initial_guess(&m, &BoundaryData::default(), &model).unwrap();
        let t = DMatrix::from_row_slice(2, 2, &[0.7, -0.4, 0.25, 1.3]);
        s.traction = vec![t; m.num_elements()];
        let r = residual_phi_full(&m, &s, &BoundaryData::default());
        let boundary = m.boundary_vertices();
        for v in (0..m.num_vertices()).filter(|v| !boundary.contains(v)) {
            assert!(r[2 * v].abs() < 1e-14 && r[2 * v + 1].abs() < 1e-14);
        }
    }

    #[test]
    fn loads_sum_to_total_force() {
        let m = build_box_mesh(3, &[2, 2, 2], &[0.0; 3], &[1.0, 2.0, 3.0]).unwrap();
        let mut bcs = BoundaryData { body_force: Some(vec![0.0, 0.0, -2.0]), ..Default::default() };
        bcs.neumann.insert(2, vec![0.5, 0.0, 0.0]);
        let f = load_vector(&m, &bcs);
        let fx: f64 = f.iter().step_by(3).sum();
        let fz: f64 = f.iter().skip(2).step_by(3).sum();
        assert!((fx - 0.5 * 6.0).abs() < 1e-13);
        assert!((fz + 2.0 * 6.0).abs() < 1e-13);
    }
}
