use std::sync::Arc;

use rayon::prelude::*;

use super::{run_kernel, DecayFit};
use crate::error::{Error, Result};
use crate::fem::{FeSpace, SurfaceTag};
use crate::geometry::vec3::Point;
use crate::mesh::{Locator, SurfaceMesh};
use crate::solver::{Observer, StepView, TimeGrid};
use crate::sparse::CgOptions;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelDifferenceOptions {
    /// Largest allowed `fine nodes × time steps` per source point.
    pub budget: usize,
    /// Start of the late window `(tail_start, T)`.
    pub tail_start: f64,
    pub cg: CgOptions,
}

impl Default for KernelDifferenceOptions {
    fn default() -> Self {
        Self { budget: 200_000_000, tail_start: 0.5, cg: CgOptions::default() }
    }
}

/// `sup_{x₀} ‖∂_t (H_h^ℓ - H_ref)(·, ·, x₀)‖_{L¹((0, T) × Γ)}` with the
/// fine-mesh kernel `H_ref` standing in for the continuous one.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelDifference {
    /// Value over `(0, T)`, maximized over the source points.
    pub value: f64,
    /// Share of `(tail_start, T)` in the value, for the maximizing source.
    pub late_fraction: f64,
    /// Bound on the contribution of `(T, ∞)` from an exponential fit of the
    /// late integrand, for the maximizing source.
    pub tail_bound: f64,
    /// Per source point: value over `(0, T)`.
    pub per_source: Vec<f64>,
    pub steps: usize,
}

struct Pairing {
    weight: f64,
    coarse: Vec<(usize, f64)>,
    fine_dofs: Vec<usize>,
    fine_phi: Vec<f64>,
}

fn pairings(coarse: &FeSpace, fine: &FeSpace) -> Result<Vec<Pairing>> {
    let locator = Locator::new(coarse.mesh());
    let mut buf = fine.new_element_values();
    let mut out = Vec::new();
    for e in 0..fine.n_elements() {
        fine.element_values(e, SurfaceTag::Lifted, &mut buf)?;
        for q in 0..buf.n_qp {
            let p = locator.locate_lifted(buf.points[q])?;
            out.push(Pairing {
                weight: buf.weights[q],
                coarse: coarse.basis_at(p),
                fine_dofs: fine.mesh().element(e).to_vec(),
                fine_phi: buf.phi(q).to_vec(),
            });
        }
    }
    Ok(out)
}

struct CoarseHistory(Vec<Vec<f64>>);

impl Observer for CoarseHistory {
    fn observe(&mut self, s: &StepView<'_>) -> Result<()> {
        self.0.push(s.u.to_vec());
        Ok(())
    }
}

/// Accumulates `∫_Γ |F^n - F^{n-1}|` per step, which is the exact `L¹` norm
/// of the time derivative of the piecewise linear interpolant in time.
struct Increments<'a> {
    pairs: &'a [Pairing],
    coarse: &'a [Vec<f64>],
    previous: Option<Vec<f64>>,
    /// `(t, ∫|ΔF|, ∫|ΔH_h|, ∫|ΔH_ref|)` per step.
    samples: Vec<(f64, f64, f64, f64)>,
}

impl Observer for Increments<'_> {
    fn observe(&mut self, s: &StepView<'_>) -> Result<()> {
        let n = s.index;
        if let Some(prev) = &self.previous {
            let (c1, c0) = (&self.coarse[n], &self.coarse[n - 1]);
            let (mut acc, mut acc_c, mut acc_f) = (0.0, 0.0, 0.0);
            for p in self.pairs {
                let mut dc = 0.0;
                for &(i, v) in &p.coarse {
                    dc += (c1[i] - c0[i]) * v;
                }
                let mut df = 0.0;
                for (&i, &v) in p.fine_dofs.iter().zip(&p.fine_phi) {
                    df += (s.u[i] - prev[i]) * v;
                }
                acc += p.weight * (dc - df).abs();
                acc_c += p.weight * dc.abs();
                acc_f += p.weight * df.abs();
            }
            self.samples.push((s.t, acc, acc_c, acc_f));
        }
        self.previous = Some(s.u.to_vec());
        Ok(())
    }
}

struct SourceResult {
    value: f64,
    late: f64,
    tail: f64,
}

fn one_source(
    coarse_space: &FeSpace,
    fine_space: &FeSpace,
    pairs: &[Pairing],
    y0: Point,
    grid: &TimeGrid,
    opts: &KernelDifferenceOptions,
) -> Result<SourceResult> {
    let x0c = Locator::new(coarse_space.mesh()).locate_lifted(y0)?;
    let x0f = Locator::new(fine_space.mesh()).locate_lifted(y0)?;
    let mut history = CoarseHistory(Vec::with_capacity(grid.n_steps() + 1));
    run_kernel(coarse_space.mesh(), x0c, grid, opts.cg, &mut history)?;
    let mut inc = Increments { pairs, coarse: &history.0, previous: None, samples: Vec::new() };
    run_kernel(fine_space.mesh(), x0f, grid, opts.cg, &mut inc)?;
    let value: f64 = inc.samples.iter().map(|s| s.1).sum();
    let late: f64 = inc.samples.iter().filter(|s| s.0 > opts.tail_start + 1e-12).map(|s| s.1).sum();
    let tail = tail_bound(&inc.samples, grid)?;
    Ok(SourceResult { value, late, tail })
}

/// `∫_T^∞ ‖∂_t F‖_{L¹}` bounded by the tails of both kernels, each from an
/// exponential fit of its own late increments: the difference itself may
/// change sign in time and is not log-linear.
fn tail_bound(samples: &[(f64, f64, f64, f64)], grid: &TimeGrid) -> Result<f64> {
    let t_half = 0.5 * grid.horizon();
    let late: Vec<_> = samples.iter().filter(|s| s.0 >= t_half).collect();
    if late.iter().all(|s| s.1 == 0.0) {
        return Ok(0.0);
    }
    let dt = grid.dt();
    let mut bound = 0.0;
    for pick in [|s: &(f64, f64, f64, f64)| s.2, |s: &(f64, f64, f64, f64)| s.3] {
        let density: Vec<(f64, f64)> = late.iter().map(|s| (s.0, pick(s) / dt)).filter(|s| s.1 > 0.0).collect();
        if density.is_empty() {
            continue;
        }
        let fit = DecayFit::fit(density)?;
        if !(fit.rate > 0.0) {
            return Ok(f64::INFINITY);
        }
        bound += fit.amplitude * (-fit.rate * grid.horizon()).exp() / fit.rate;
    }
    Ok(bound)
}

/// Compares the kernels of `coarse` and `fine` for every source `y0 ∈ Γ`.
///
/// `fine` must be the same mesh as `coarse` or at least four times finer
/// (`4 h_fine ≤ 1.1 h_coarse`, allowing for non-uniform refinement).
pub fn kernel_difference_l1(
    coarse: &Arc<SurfaceMesh>,
    fine: &Arc<SurfaceMesh>,
    sources: &[Point],
    grid: &TimeGrid,
    opts: &KernelDifferenceOptions,
) -> Result<KernelDifference> {
    if coarse.surface() != fine.surface() || coarse.time() != fine.time() {
        return Err(Error::MeshMismatch("coarse and fine meshes discretize different surfaces".into()));
    }
    let identical = Arc::ptr_eq(coarse, fine) || (coarse.same_topology(fine) && coarse.nodes() == fine.nodes());
    if !identical && 4.0 * fine.h() > 1.1 * coarse.h() {
        return Err(Error::MeshMismatch(format!(
            "reference mesh h = {:.3e} is not four times finer than h = {:.3e}",
            fine.h(),
            coarse.h()
        )));
    }
    if sources.is_empty() {
        return Err(Error::InsufficientSamples("no source points".into()));
    }
    let work = fine.n_nodes().saturating_mul(grid.n_steps() + 1);
    if work > opts.budget {
        return Err(Error::BudgetExceeded(format!("{work} fine node-steps exceed the cap {}", opts.budget)));
    }
    let coarse_space = FeSpace::new(Arc::clone(coarse));
    let fine_space = FeSpace::new(Arc::clone(fine));
    let pairs = pairings(&coarse_space, &fine_space)?;
    let results: Vec<SourceResult> = sources
        .par_iter()
        .map(|&y0| one_source(&coarse_space, &fine_space, &pairs, y0, grid, opts))
        .collect::<Result<_>>()?;
    let best = results.iter().enumerate().fold(0, |b, (i, r)| if r.value > results[b].value { i } else { b });
    let r = &results[best];
    Ok(KernelDifference {
        value: r.value,
        late_fraction: if r.value > 0.0 { r.late / r.value } else { 0.0 },
        tail_bound: r.tail,
        per_source: results.iter().map(|r| r.value).collect(),
        steps: grid.n_steps(),
    })
}
