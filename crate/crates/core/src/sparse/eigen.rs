use super::{cg_solve_with_guess, dot, CgOptions, SparseMatrix};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct EigenEstimate {
    pub value: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
}

fn m_normalize(m: &SparseMatrix, x: &mut [f64]) -> Result<()> {
    let n = m.bilinear(x, x)?.sqrt();
    if !(n > 0.0) {
        return Err(Error::NonFiniteValue("zero iterate in eigenvalue iteration".into()));
    }
    x.iter_mut().for_each(|v| *v /= n);
    Ok(())
}

fn start_vector(n: usize) -> Vec<f64> {
    // deterministic, not orthogonal to low or high modes
    (0..n).map(|i| ((i as f64 * 0.754_877_666).fract() - 0.5) + 0.1 * ((i % 7) as f64)).collect()
}

/// Largest eigenvalue of `A x = λ M x` by power iteration on `M⁻¹A`.
pub fn largest_generalized_eigenvalue(
    a: &SparseMatrix,
    m: &SparseMatrix,
    max_iter: usize,
    tol: f64,
) -> Result<EigenEstimate> {
    let n = a.n();
    let mut x = start_vector(n);
    m_normalize(m, &mut x)?;
    let mut lambda = 0.0;
    let opts = CgOptions::with_tol(1e-12).context("power iteration");
    for it in 1..=max_iter {
        let ax = a.matvec(&x)?;
        let (mut y, _) = cg_solve_with_guess(m, &ax, x.clone(), opts)?;
        let new = dot(&x, &ax);
        m_normalize(m, &mut y)?;
        x = y;
        if it > 1 && (new - lambda).abs() <= tol * new.abs() {
            let value = dot(&x, &a.matvec(&x)?);
            return Ok(EigenEstimate { value, vector: x, iterations: it });
        }
        lambda = new;
    }
    Err(Error::NonConvergence { context: "power iteration", iterations: max_iter, residual: f64::NAN })
}

/// Smallest nonzero eigenvalue of `A x = λ M x` for a Laplace-type `A` whose
/// kernel is the constants: shifted inverse iteration on `(A + M)⁻¹ M` with
/// the constant mode deflated in the `M` inner product.
pub fn smallest_nonzero_generalized_eigenvalue(
    a: &SparseMatrix,
    m: &SparseMatrix,
    max_iter: usize,
    tol: f64,
) -> Result<EigenEstimate> {
    let n = a.n();
    let ones = vec![1.0; n];
    let m1 = m.matvec(&ones)?;
    let total: f64 = m1.iter().sum();
    let deflate = |x: &mut [f64]| {
        let c = dot(x, &m1) / total;
        x.iter_mut().for_each(|v| *v -= c);
    };
    let shifted = a.linear_combination(1.0, m, 1.0)?;
    let opts = CgOptions::with_tol(1e-12).context("inverse iteration");
    let mut x = start_vector(n);
    deflate(&mut x);
    m_normalize(m, &mut x)?;
    let mut lambda = f64::INFINITY;
    for it in 1..=max_iter {
        let mx = m.matvec(&x)?;
        let (mut y, _) = cg_solve_with_guess(&shifted, &mx, x.clone(), opts)?;
        deflate(&mut y);
        m_normalize(m, &mut y)?;
        x = y;
        let new = a.bilinear(&x, &x)?;
        if (new - lambda).abs() <= tol * new.abs() {
            return Ok(EigenEstimate { value: new, vector: x, iterations: it });
        }
        lambda = new;
    }
    Err(Error::NonConvergence { context: "inverse iteration", iterations: max_iter, residual: f64::NAN })
}
