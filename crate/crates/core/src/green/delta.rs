use super::DecayFit;
use crate::error::{Error, Result};
use crate::fem::{assemble_operators, load_at_point, lq_norm, Exponent, FeSpace, Operators, SurfaceTag};
use crate::mesh::MeshPoint;

/// `‖δ̄^ℓ - δ̃‖_{L^p(Γ)}` and its ratio to `‖δ̃‖_{L^p(Γ)}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeltaConsistency {
    pub difference: f64,
    pub reference_norm: f64,
    pub ratio: f64,
}

/// Compares the delta of `ops_h` with the delta of `ops_l`, both with the
/// point functional `e_i = φ_i(x₀)`, measured on the lifted surface.
pub fn delta_consistency_with(
    space: &FeSpace,
    ops_h: &Operators,
    ops_l: &Operators,
    x0: MeshPoint,
    p: Exponent,
) -> Result<DeltaConsistency> {
    if ops_h.n() != space.ndofs() || ops_l.n() != space.ndofs() {
        return Err(Error::MeshMismatch(format!(
            "operators of size {} and {} on a space with {} dofs",
            ops_h.n(),
            ops_l.n(),
            space.ndofs()
        )));
    }
    let e = load_at_point(space, x0);
    let dh = ops_h.mass_solve(&e, None)?.0;
    let dl = ops_l.mass_solve(&e, None)?.0;
    let diff: Vec<f64> = dh.iter().zip(&dl).map(|(a, b)| a - b).collect();
    let difference = lq_norm(space, SurfaceTag::Lifted, &diff, p)?;
    let reference_norm = lq_norm(space, SurfaceTag::Lifted, &dl, p)?;
    Ok(DeltaConsistency { difference, reference_norm, ratio: difference / reference_norm })
}

/// `δ̄_{h,x₀}` (mass matrix of `Γ_h`) lifted to `Γ`, against `δ̃_{h,q(x₀)}`
/// (mass matrix of the lifted space). The lifted basis at `q(x₀)` has the
/// values of the discrete basis at `x₀`, so both use the same functional.
pub fn delta_consistency(space: &FeSpace, x0: MeshPoint, p: Exponent) -> Result<DeltaConsistency> {
    let ops_h = assemble_operators(space, SurfaceTag::Discrete)?;
    let ops_l = assemble_operators(space, SurfaceTag::Lifted)?;
    delta_consistency_with(space, &ops_h, &ops_l, x0, p)
}

/// Regression of `log |δ̄(x_i)|` on `d(x_i, x₀) / h` over the nodes outside
/// the ball of radius `exclusion · h`. Values below `noise_floor · max |δ̄|`
/// are dropped: they are at the level of the linear solver residual.
pub fn delta_decay_fit(
    space: &FeSpace,
    ops: &Operators,
    x0: MeshPoint,
    exclusion: f64,
    noise_floor: f64,
) -> Result<DecayFit> {
    let mesh = space.mesh();
    let delta = ops.mass_solve(&load_at_point(space, x0), None)?.0;
    let (x, _) = mesh.map(x0.element, x0.xi);
    let y0 = mesh.lift_point(x)?;
    let h = mesh.h();
    let t = mesh.time();
    let peak = delta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut samples: Vec<(f64, f64)> = mesh
        .nodes()
        .iter()
        .zip(&delta)
        .filter_map(|(&xi, &v)| {
            let d = mesh.surface().geodesic_distance(t, xi, y0).0 / h;
            (d > exclusion && v.abs() > noise_floor * peak).then_some((d, v.abs()))
        })
        .collect();
    samples.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    DecayFit::fit(samples)
}
