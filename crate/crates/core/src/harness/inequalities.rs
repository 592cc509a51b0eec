use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::StudyConfig;
use crate::error::Result;
use crate::fem::{
    assemble_operators, discrete_laplacian, gradient_lq_norm, interpolate, l2_project, lq_norm, lq_norm_fn,
    ritz_project, w1q_error, w1q_norm, FeSpace, Operators, SurfaceTag,
};
use crate::geometry::vec3::{self, Point};
use crate::mesh::SurfaceMesh;
use crate::sparse::largest_generalized_eigenvalue;
use crate::stats::growth;

/// Largest accepted growth of a fitted constant across levels.
pub const CONSTANT_GROWTH: f64 = 0.10;

const SAMPLES: usize = 20;
const EPSILONS: [f64; 3] = [0.1, 0.3, 1.0];

/// One fitted constant per level.
#[derive(Clone, Debug, PartialEq)]
pub struct InequalityCheck {
    pub name: String,
    pub h: Vec<f64>,
    pub constants: Vec<f64>,
    /// `max_{i<j} C_j / C_i - 1`.
    pub growth: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct InequalityReport {
    pub checks: Vec<InequalityCheck>,
}

impl InequalityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&InequalityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Smooth ambient function `Σ a_i sin(k_i · x + φ_i)`.
#[derive(Clone, Debug)]
struct TrigSum {
    terms: Vec<(f64, Point, f64)>,
}

impl TrigSum {
    fn random(rng: &mut ChaCha8Rng, terms: usize, max_wave: f64) -> Self {
        let terms = (0..terms)
            .map(|_| {
                let k = [0; 3].map(|_: i32| rng.gen_range(-max_wave..max_wave));
                (rng.gen_range(-1.0..1.0), k, rng.gen_range(0.0..std::f64::consts::TAU))
            })
            .collect();
        Self { terms }
    }

    fn value(&self, x: Point) -> f64 {
        self.terms.iter().map(|(a, k, p)| a * (vec3::dot(*k, x) + p).sin()).sum()
    }
}

/// Test functions shared by all levels: smooth trigonometric sums.
fn smooth_family(seed: u64) -> Vec<TrigSum> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..SAMPLES / 2).map(|i| TrigSum::random(&mut rng, 3 + i % 4, 1.0 + i as f64 * 0.5)).collect()
}

/// Half interpolated smooth functions, half iid nodal values.
fn random_fe_functions(space: &FeSpace, smooth: &[TrigSum], seed: u64, level: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(level as u64 + 1)));
    let mut out: Vec<Vec<f64>> = smooth.iter().map(|g| interpolate(space, |x| g.value(x))).collect();
    for _ in 0..SAMPLES - smooth.len() {
        out.push((0..space.ndofs()).map(|_| rng.gen_range(-1.0..1.0)).collect());
    }
    out
}

struct Level {
    h: f64,
    space: FeSpace,
    ops: Operators,
}

fn level(mesh: &Arc<SurfaceMesh>) -> Result<Level> {
    let space = FeSpace::new(Arc::clone(mesh));
    let ops = assemble_operators(&space, SurfaceTag::Discrete)?;
    Ok(Level { h: mesh.h(), space, ops })
}

fn check(name: &str, h: Vec<f64>, constants: Vec<f64>) -> InequalityCheck {
    let g = growth(&constants);
    InequalityCheck { name: name.into(), h, passed: g <= CONSTANT_GROWTH, growth: g, constants }
}

/// `max |‖φ‖_{L^p(Γ)} / ‖φ‖_{L^p(Γ_h)} - 1| / h^{k+1}`; passes when every
/// level stays within `10 c h^{k+1}` for the `c` of the coarsest level.
fn norm_equivalence(levels: &[Level], samples: &[Vec<Vec<f64>>], k: usize) -> Result<Vec<InequalityCheck>> {
    let mut out = Vec::new();
    for p in [1.0, 2.0, 4.0, f64::INFINITY] {
        let mut c = Vec::new();
        for (lv, fs) in levels.iter().zip(samples) {
            let mut worst: f64 = 0.0;
            for f in fs {
                let a = lq_norm(&lv.space, SurfaceTag::Lifted, f, p)?;
                let b = lq_norm(&lv.space, SurfaceTag::Discrete, f, p)?;
                worst = worst.max((a / b - 1.0).abs());
            }
            c.push(worst / lv.h.powi(k as i32 + 1));
        }
        let h: Vec<f64> = levels.iter().map(|l| l.h).collect();
        let mut chk = check(&format!("norm-equivalence-p{p}"), h, c.clone());
        chk.passed = c.iter().all(|v| *v <= 10.0 * c[0]);
        out.push(chk);
    }
    Ok(out)
}

/// `max ‖P_h v‖_{L^p} / ‖v‖_{L^p}` over smooth and localized `v`.
fn projection_stability(levels: &[Level], seed: u64) -> Result<Vec<InequalityCheck>> {
    let smooth = smooth_family(seed.wrapping_add(1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
    let centers: Vec<Point> = (0..4).map(|_| vec3::normalize([0; 3].map(|_: i32| rng.gen_range(-1.0..1.0)))).collect();
    let bumps: Vec<Box<dyn Fn(Point) -> f64 + Sync>> = centers
        .into_iter()
        .map(|c| Box::new(move |x: Point| (-vec3::dot(vec3::sub(x, c), vec3::sub(x, c)) / 0.04).exp()) as Box<_>)
        .collect();
    let mut out = Vec::new();
    for p in [1.0, 2.0, 4.0] {
        let mut c = Vec::new();
        for lv in levels {
            let mut worst: f64 = 0.0;
            let mut visit = |f: &(dyn Fn(Point) -> f64 + Sync)| -> Result<()> {
                let ph = l2_project(&lv.space, &lv.ops, f)?;
                let a = lq_norm(&lv.space, SurfaceTag::Discrete, &ph, p)?;
                let b = lq_norm_fn(&lv.space, SurfaceTag::Discrete, f, p)?;
                worst = worst.max(a / b);
                Ok(())
            };
            for g in &smooth {
                visit(&|x| g.value(x))?;
            }
            for b in &bumps {
                visit(b.as_ref())?;
            }
            c.push(worst);
        }
        out.push(check(&format!("projection-stability-p{p}"), levels.iter().map(|l| l.h).collect(), c));
    }
    Ok(out)
}

/// `K = h · sqrt(1 + λ_max(A, M))`, the sharp constant of
/// `‖χ‖_{W^{1,2}} ≤ K h⁻¹ ‖χ‖_{L²}`; random samples are reported alongside.
fn inverse_inequality(levels: &[Level], samples: &[Vec<Vec<f64>>]) -> Result<Vec<InequalityCheck>> {
    let mut sharp = Vec::new();
    let mut sampled = Vec::new();
    for (lv, fs) in levels.iter().zip(samples) {
        let lambda = largest_generalized_eigenvalue(&lv.ops.stiffness, &lv.ops.mass, 50_000, 1e-10)?.value;
        sharp.push(lv.h * (1.0 + lambda).sqrt());
        let mut worst: f64 = 0.0;
        for f in fs {
            let a = w1q_norm(&lv.space, SurfaceTag::Discrete, f, 2.0)?;
            let b = lq_norm(&lv.space, SurfaceTag::Discrete, f, 2.0)?;
            worst = worst.max(lv.h * a / b);
        }
        sampled.push(worst);
    }
    let h: Vec<f64> = levels.iter().map(|l| l.h).collect();
    let mut s = check("inverse-inequality-samples", h.clone(), sampled);
    s.passed = s.constants.iter().zip(&sharp).all(|(a, b)| *a <= b * (1.0 + 1e-8));
    Ok(vec![check("inverse-inequality", h, sharp), s])
}

/// `max ‖∇u‖_q / (ε⁻¹ ‖u‖_q + ε ‖Δ_h u‖_q)` over samples, `ε` and `q`.
fn interpolation_inequality(levels: &[Level], samples: &[Vec<Vec<f64>>]) -> Result<InequalityCheck> {
    let mut c = Vec::new();
    for (lv, fs) in levels.iter().zip(samples) {
        let mut worst: f64 = 0.0;
        for f in fs {
            let lap = discrete_laplacian(&lv.ops, f)?;
            for q in [2.0, 4.0] {
                let g = gradient_lq_norm(&lv.space, SurfaceTag::Discrete, f, q)?;
                let u = lq_norm(&lv.space, SurfaceTag::Discrete, f, q)?;
                let l = lq_norm(&lv.space, SurfaceTag::Discrete, &lap, q)?;
                for eps in EPSILONS {
                    worst = worst.max(g / (u / eps + eps * l));
                }
            }
        }
        c.push(worst);
    }
    Ok(check("interpolation-inequality", levels.iter().map(|l| l.h).collect(), c))
}

/// `‖R_h w‖_{W^{1,q}} / ‖w‖_{W^{1,q}}` for `w = x₂` (`sin θ` on the unit
/// circle) and `w = x₁ x₂`, maximized over both.
fn ritz_stability(levels: &[Level]) -> Result<Vec<InequalityCheck>> {
    type Pair = (fn(Point) -> f64, fn(Point) -> Point);
    let tests: [Pair; 2] = [(|x| x[1], |_| [0.0, 1.0, 0.0]), (|x| x[0] * x[1], |x| [x[1], x[0], 0.0])];
    let mut out = Vec::new();
    for q in [2.0, 4.0] {
        let mut c = Vec::new();
        for lv in levels {
            let mut worst: f64 = 0.0;
            for (w, gw) in tests {
                let r = ritz_project(&lv.space, &lv.ops, w, gw)?;
                let a = w1q_norm(&lv.space, SurfaceTag::Discrete, &r, q)?;
                let zero = vec![0.0; lv.space.ndofs()];
                let b = w1q_error(&lv.space, SurfaceTag::Discrete, &zero, w, gw, q)?;
                worst = worst.max(a / b);
            }
            c.push(worst);
        }
        out.push(check(&format!("ritz-stability-q{q}"), levels.iter().map(|l| l.h).collect(), c));
    }
    Ok(out)
}

/// Fitted-constant checks on the frozen meshes of every level.
pub fn inequality_suite(cfg: &StudyConfig) -> Result<InequalityReport> {
    cfg.validate()?;
    let meshes = cfg.meshes()?;
    let levels: Vec<Level> = meshes.par_iter().map(level).collect::<Result<_>>()?;
    let smooth = smooth_family(cfg.seed);
    let samples: Vec<Vec<Vec<f64>>> =
        levels.iter().enumerate().map(|(i, lv)| random_fe_functions(&lv.space, &smooth, cfg.seed, i)).collect();
    let mut checks = Vec::new();
    checks.push(interpolation_inequality(&levels, &samples)?);
    checks.extend(ritz_stability(&levels)?);
    checks.extend(inverse_inequality(&levels, &samples)?);
    checks.extend(projection_stability(&levels, cfg.seed)?);
    checks.extend(norm_equivalence(&levels, &samples, cfg.degree)?);
    Ok(InequalityReport { checks })
}
