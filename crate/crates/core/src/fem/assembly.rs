use super::{ElementValues, FeSpace, SurfaceTag};
use crate::error::{Error, Result};
use crate::geometry::vec3::{self, Point};
use crate::sparse::{cg_solve_with_guess, CgOptions, SolveReport, SparseMatrix};

type Triplets = Vec<(usize, usize, f64)>;

#[derive(Clone, Copy)]
enum Kind {
    Mass,
    Stiffness,
}

fn local_matrix(ev: &ElementValues, kind: Kind, dofs: &[usize], out: &mut Triplets) {
    let n = ev.n_loc;
    for a in 0..n {
        for b in 0..n {
            let mut s = 0.0;
            for q in 0..ev.n_qp {
                s += ev.weights[q]
                    * match kind {
                        Kind::Mass => ev.phi(q)[a] * ev.phi(q)[b],
                        Kind::Stiffness => vec3::dot(ev.grads(q)[a], ev.grads(q)[b]),
                    };
            }
            out.push((dofs[a], dofs[b], s));
        }
    }
}

fn assemble(space: &FeSpace, tag: SurfaceTag, kinds: &[Kind]) -> Result<Vec<SparseMatrix>> {
    let mesh = space.mesh();
    let chunks: Vec<Vec<Triplets>> = space.map_chunks(tag, |ev, acc: &mut Vec<Triplets>| {
        if acc.is_empty() {
            acc.resize(kinds.len(), Vec::new());
        }
        let dofs = mesh.element(ev.element);
        for (k, &kind) in kinds.iter().enumerate() {
            local_matrix(ev, kind, dofs, &mut acc[k]);
        }
        Ok(())
    })?;
    let n = space.ndofs();
    (0..kinds.len())
        .map(|k| {
            let total: usize = chunks.iter().map(|c| c.get(k).map_or(0, Vec::len)).sum();
            let mut all = Vec::with_capacity(total);
            for c in &chunks {
                if let Some(t) = c.get(k) {
                    all.extend_from_slice(t);
                }
            }
            SparseMatrix::from_triplets(n, all)
        })
        .collect()
}

/// Consistent mass matrix `M_ij = ∫ φ_i φ_j`.
pub fn assemble_mass(space: &FeSpace, tag: SurfaceTag) -> Result<SparseMatrix> {
    Ok(assemble(space, tag, &[Kind::Mass])?.remove(0))
}

/// Stiffness matrix `A_ij = ∫ ∇φ_i · ∇φ_j`.
pub fn assemble_stiffness(space: &FeSpace, tag: SurfaceTag) -> Result<SparseMatrix> {
    Ok(assemble(space, tag, &[Kind::Stiffness])?.remove(0))
}

/// Mass and stiffness in one pass over the elements.
pub fn assemble_operators(space: &FeSpace, tag: SurfaceTag) -> Result<Operators> {
    let mut v = assemble(space, tag, &[Kind::Mass, Kind::Stiffness])?;
    let stiffness = v.pop().unwrap();
    let mass = v.pop().unwrap();
    Ok(Operators { mass, stiffness, tag, cg: CgOptions::default() })
}

fn assemble_vector<F>(space: &FeSpace, tag: SurfaceTag, value: F) -> Result<Vec<f64>>
where
    F: Fn(&ElementValues, usize) -> Result<f64> + Sync,
{
    let mesh = space.mesh();
    let chunks: Vec<Vec<(usize, f64)>> = space.map_chunks(tag, |ev, acc: &mut Vec<(usize, f64)>| {
        let dofs = mesh.element(ev.element);
        let mut fq = vec![0.0; ev.n_qp];
        for (q, slot) in fq.iter_mut().enumerate() {
            *slot = value(ev, q)?;
            if !slot.is_finite() {
                return Err(Error::NonFiniteValue(format!("load integrand on element {}", ev.element)));
            }
        }
        for a in 0..ev.n_loc {
            let mut s = 0.0;
            for q in 0..ev.n_qp {
                s += ev.weights[q] * fq[q] * ev.phi(q)[a];
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
    Ok(b)
}

/// Load vector `b_i = ∫ f φ_i` with `f` evaluated at points of the tagged surface.
pub fn assemble_load<F>(space: &FeSpace, tag: SurfaceTag, f: F) -> Result<Vec<f64>>
where
    F: Fn(Point) -> f64 + Sync,
{
    assemble_vector(space, tag, |ev, q| Ok(f(ev.points[q])))
}

/// Load vector `b_i = ∫_{Γ_h} f(q(x)) φ_i(x) dx` of a function given on `Γ(t)`.
pub fn assemble_load_pulled<F>(space: &FeSpace, f: F) -> Result<Vec<f64>>
where
    F: Fn(Point) -> f64 + Sync,
{
    let table = space.lift_table()?;
    assemble_vector(space, SurfaceTag::Discrete, |ev, q| Ok(f(table.element(ev.element)[q].lifted)))
}

/// Mass and stiffness matrices of one snapshot with solver settings.
#[derive(Clone, Debug)]
pub struct Operators {
    pub mass: SparseMatrix,
    pub stiffness: SparseMatrix,
    pub tag: SurfaceTag,
    pub cg: CgOptions,
}

impl Operators {
    pub fn n(&self) -> usize {
        self.mass.n()
    }

    /// Solves `M x = b`, optionally warm-started.
    pub fn mass_solve(&self, b: &[f64], guess: Option<&[f64]>) -> Result<(Vec<f64>, SolveReport)> {
        let x0 = guess.map_or_else(|| vec![0.0; b.len()], <[f64]>::to_vec);
        cg_solve_with_guess(&self.mass, b, x0, self.cg.context("mass solve"))
    }

    /// `w = -M⁻¹ A u`.
    pub fn laplacian(&self, u: &[f64], guess: Option<&[f64]>) -> Result<Vec<f64>> {
        let mut rhs = self.stiffness.matvec(u)?;
        rhs.iter_mut().for_each(|v| *v = -*v);
        Ok(self.mass_solve(&rhs, guess)?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SurfaceSpec;
    use crate::mesh::{build_circle_mesh, build_sphere_mesh, build_torus_mesh};
    use crate::sparse::smallest_nonzero_generalized_eigenvalue;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn total_mass(m: &SparseMatrix) -> f64 {
        let ones = vec![1.0; m.n()];
        m.bilinear(&ones, &ones).unwrap()
    }

    #[test]
    fn mass_measures() {
        let space = FeSpace::new(Arc::new(build_circle_mesh(&SurfaceSpec::circle(1.0), 64, 1).unwrap()));
        let m = assemble_mass(&space, SurfaceTag::Discrete).unwrap();
        assert!((total_mass(&m) - 128.0 * (PI / 64.0).sin()).abs() < 1e-13);
        // the lifted density is not polynomial; a 7-point rule resolves it to round-off
        let fine = FeSpace::with_quadrature_order(Arc::clone(space.mesh()), 13);
        let ml = assemble_mass(&fine, SurfaceTag::Lifted).unwrap();
        assert!((total_mass(&ml) - 2.0 * PI).abs() < 1e-12);
        let ml = assemble_mass(&space, SurfaceTag::Lifted).unwrap();
        assert!((total_mass(&ml) - 2.0 * PI).abs() < 1e-8);
        assert!(m.symmetry_defect() < 1e-13);

        let space = FeSpace::new(Arc::new(build_sphere_mesh(&SurfaceSpec::sphere(1.0), 0, 1).unwrap()));
        let m = assemble_mass(&space, SurfaceTag::Discrete).unwrap();
        let mesh = space.mesh();
        let a = vec3::dist(mesh.node(mesh.element(0)[0]), mesh.node(mesh.element(0)[1]));
        assert!((total_mass(&m) - 5.0 * 3f64.sqrt() * a * a).abs() < 1e-13);
    }

    #[test]
    fn stiffness_annihilates_constants() {
        for mesh in [
            build_circle_mesh(&SurfaceSpec::circle(1.0), 20, 3).unwrap(),
            build_sphere_mesh(&SurfaceSpec::sphere(1.0), 2, 2).unwrap(),
            build_torus_mesh(&SurfaceSpec::torus(2.0, 0.7), 16, 1).unwrap(),
        ] {
            let space = FeSpace::new(Arc::new(mesh));
            for tag in [SurfaceTag::Discrete, SurfaceTag::Lifted] {
                let ops = assemble_operators(&space, tag).unwrap();
                let a1 = ops.stiffness.matvec(&vec![1.0; space.ndofs()]).unwrap();
                assert!(a1.iter().all(|v| v.abs() <= 1e-13));
                assert!(ops.stiffness.symmetry_defect() < 1e-13);
            }
        }
    }

    #[test]
    fn first_eigenvalues() {
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let space = FeSpace::new(Arc::new(build_circle_mesh(&SurfaceSpec::circle(1.0), n, 1).unwrap()));
            let ops = assemble_operators(&space, SurfaceTag::Discrete).unwrap();
            let ev = smallest_nonzero_generalized_eigenvalue(&ops.stiffness, &ops.mass, 500, 1e-13).unwrap();
            errs.push((ev.value - 1.0).abs());
        }
        assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
        let mut errs = Vec::new();
        for l in [1, 2, 3] {
            let space = FeSpace::new(Arc::new(build_sphere_mesh(&SurfaceSpec::sphere(1.0), l, 1).unwrap()));
            let ops = assemble_operators(&space, SurfaceTag::Discrete).unwrap();
            let ev = smallest_nonzero_generalized_eigenvalue(&ops.stiffness, &ops.mass, 500, 1e-13).unwrap();
            errs.push((ev.value - 2.0).abs() / 2.0);
        }
        assert!(errs[1] / errs[2] > 3.0, "{errs:?}");
    }

    #[test]
    fn assembly_is_independent_of_worker_count() {
        let space = FeSpace::new(Arc::new(build_sphere_mesh(&SurfaceSpec::sphere(1.0), 3, 2).unwrap()));
        let run = |k| {
            rayon::ThreadPoolBuilder::new().num_threads(k).build().unwrap().install(|| {
                let ops = assemble_operators(&space, SurfaceTag::Discrete).unwrap();
                let b = assemble_load(&space, SurfaceTag::Discrete, |x| x[0] * x[2] + 1.0).unwrap();
                (ops.mass, ops.stiffness, b)
            })
        };
        assert_eq!(run(1), run(4));
    }
}
