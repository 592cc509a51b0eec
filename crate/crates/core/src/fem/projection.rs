use super::{assemble_load, FeSpace, Operators};
use crate::error::Result;
use crate::geometry::vec3::{self, Point};
use crate::mesh::MeshPoint;
use crate::sparse::{cg_solve, CgOptions};

/// Nodal interpolant `I_h f`.
pub fn interpolate<F: Fn(Point) -> f64>(space: &FeSpace, f: F) -> Vec<f64> {
    space.mesh().nodes().iter().map(|&x| f(x)).collect()
}

/// `L²` projection onto the space: solves `M u = (f, φ_i)` on the surface of `ops.tag`.
pub fn l2_project<F>(space: &FeSpace, ops: &Operators, f: F) -> Result<Vec<f64>>
where
    F: Fn(Point) -> f64 + Sync,
{
    let b = assemble_load(space, ops.tag, f)?;
    Ok(ops.mass_solve(&b, None)?.0)
}

/// Discrete Laplacian `Δ_h u = -M⁻¹ A u`.
pub fn discrete_laplacian(ops: &Operators, u: &[f64]) -> Result<Vec<f64>> {
    ops.laplacian(u, None)
}

/// Vector `e_i = φ_i(x₀)`.
pub fn load_at_point(space: &FeSpace, p: MeshPoint) -> Vec<f64> {
    let mut e = vec![0.0; space.ndofs()];
    for (i, v) in space.basis_at(p) {
        e[i] += v;
    }
    e
}

/// Discrete delta `δ̄_{x₀} = M⁻¹ e` with `e_i = φ_i(x₀)`, so `(δ̄, χ) = χ(x₀)`.
pub fn discrete_delta(space: &FeSpace, ops: &Operators, p: MeshPoint) -> Result<Vec<f64>> {
    let e = load_at_point(space, p);
    Ok(ops.mass_solve(&e, None)?.0)
}

/// Ritz projection for `-Δ + 1` on the surface of `ops.tag`:
/// `(∇R w, ∇χ) + (R w, χ) = (∇w, ∇χ) + (w, χ)`.
pub fn ritz_project<F, G>(space: &FeSpace, ops: &Operators, w: F, grad_w: G) -> Result<Vec<f64>>
where
    F: Fn(Point) -> f64 + Sync,
    G: Fn(Point) -> Point + Sync,
{
    let mesh = space.mesh();
    let chunks: Vec<Vec<(usize, f64)>> = space.map_chunks(ops.tag, |ev, acc: &mut Vec<(usize, f64)>| {
        let dofs = mesh.element(ev.element);
        for a in 0..ev.n_loc {
            let mut s = 0.0;
            for q in 0..ev.n_qp {
                let y = ev.points[q];
                s += ev.weights[q] * (w(y) * ev.phi(q)[a] + vec3::dot(grad_w(y), ev.grads(q)[a]));
            }
            acc.push((dofs[a], s));
        }
        Ok(())
    })?;
    let mut b = vec![0.0; space.ndofs()];
    for c in chunks {
        for (i, v) in c {
            b[i] += v;
        }
    }
    let system = ops.stiffness.linear_combination(1.0, &ops.mass, 1.0)?;
    Ok(cg_solve(&system, &b, CgOptions { context: "ritz projection", ..ops.cg })?.0)
}

impl Operators {
    /// `M u = b` for an already assembled load.
    pub fn project_load(&self, b: &[f64]) -> Result<Vec<f64>> {
        Ok(self.mass_solve(b, None)?.0)
    }
}
