use std::sync::Arc;

use super::{Observer, StepView};
use crate::error::{Error, Result};
use crate::fem::{lq_norm, Exponent, FeSpace, SurfaceTag};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Field {
    U,
    UDot,
    LapU,
    Forcing,
}

impl Field {
    pub fn name(self) -> &'static str {
        match self {
            Field::U => "u",
            Field::UDot => "dtu",
            Field::LapU => "lapu",
            Field::Forcing => "f",
        }
    }
}

fn pick<'a>(step: &'a StepView<'_>, field: Field) -> &'a [f64] {
    match field {
        Field::U => step.u,
        Field::UDot => step.u_dot,
        Field::LapU => step.lap_u,
        Field::Forcing => step.f_h,
    }
}

/// All per-node data of a solve.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub spaces: Vec<Arc<FeSpace>>,
    pub u: Vec<Vec<f64>>,
    pub u_dot: Vec<Vec<f64>>,
    pub lap_u: Vec<Vec<f64>>,
    pub f_h: Vec<Vec<f64>>,
    /// Discrete mass `1ᵀ M(t) u`.
    pub mass: Vec<f64>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn field(&self, field: Field) -> &[Vec<f64>] {
        match field {
            Field::U => &self.u,
            Field::UDot => &self.u_dot,
            Field::LapU => &self.lap_u,
            Field::Forcing => &self.f_h,
        }
    }

    pub fn last_u(&self) -> Option<&[f64]> {
        self.u.last().map(Vec::as_slice)
    }
}

impl Observer for Trajectory {
    fn observe(&mut self, step: &StepView<'_>) -> Result<()> {
        self.times.push(step.t);
        self.spaces.push(Arc::clone(step.space));
        self.u.push(step.u.to_vec());
        self.u_dot.push(step.u_dot.to_vec());
        self.lap_u.push(step.lap_u.to_vec());
        self.f_h.push(step.f_h.to_vec());
        let mu = step.ops.mass.matvec(step.u)?;
        self.mass.push(mu.iter().sum());
        Ok(())
    }
}

/// Spatial `L^q(Γ_h(t))` norms of selected fields at every node, recorded
/// during a solve without keeping the fields.
#[derive(Clone, Debug)]
pub struct NormSeries {
    pub fields: Vec<Field>,
    pub exponents: Vec<Exponent>,
    pub times: Vec<f64>,
    /// `values[f][e][n]`: field `f`, exponent `e`, node `n`.
    pub values: Vec<Vec<Vec<f64>>>,
}

impl NormSeries {
    pub fn new(fields: &[Field], exponents: &[Exponent]) -> Self {
        Self {
            fields: fields.to_vec(),
            exponents: exponents.to_vec(),
            times: Vec::new(),
            values: vec![vec![Vec::new(); exponents.len()]; fields.len()],
        }
    }

    pub fn series(&self, field: Field, q: Exponent) -> Option<&[f64]> {
        let f = self.fields.iter().position(|&x| x == field)?;
        let e = self.exponents.iter().position(|&x| x == q)?;
        Some(&self.values[f][e])
    }

    /// `‖field‖_{L^p(0,T; L^q)}`.
    pub fn spacetime_norm(&self, field: Field, p: Exponent, q: Exponent) -> Result<f64> {
        let s = self
            .series(field, q)
            .ok_or_else(|| Error::InvalidArgument(format!("field {} with q = {q} not recorded", field.name())))?;
        spacetime_norm_from_series(&self.times, s, p)
    }
}

impl Observer for NormSeries {
    fn observe(&mut self, step: &StepView<'_>) -> Result<()> {
        self.times.push(step.t);
        for (fi, &field) in self.fields.iter().enumerate() {
            let v = pick(step, field);
            for (ei, &q) in self.exponents.iter().enumerate() {
                let n = if v.is_empty() { f64::NAN } else { lq_norm(step.space, SurfaceTag::Discrete, v, q)? };
                self.values[fi][ei].push(n);
            }
        }
        Ok(())
    }
}

fn check_open(p: Exponent) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidExponent(p));
    }
    Ok(())
}

/// Composite trapezoid in `t` of `values(t)^p`, then the `p`-th root.
pub fn spacetime_norm_from_series(times: &[f64], values: &[f64], p: Exponent) -> Result<f64> {
    check_open(p)?;
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: times.len(), got: values.len() });
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("field not recorded at every node".into()));
    }
    let mut s = 0.0;
    for i in 1..times.len() {
        s += 0.5 * (times[i] - times[i - 1]) * (values[i - 1].powf(p) + values[i].powf(p));
    }
    Ok(s.powf(1.0 / p))
}

/// `‖field‖_{L^p(0,T; L^q(Γ_h(t)))}` of a stored trajectory, `p, q ∈ (1, ∞)`.
pub fn spacetime_norm(traj: &Trajectory, field: Field, p: Exponent, q: Exponent) -> Result<f64> {
    check_open(p)?;
    check_open(q)?;
    let data = traj.field(field);
    let mut series = Vec::with_capacity(traj.len());
    for (space, v) in traj.spaces.iter().zip(data) {
        if v.is_empty() {
            return Err(Error::InvalidArgument(format!("field {} not recorded", field.name())));
        }
        series.push(lq_norm(space, SurfaceTag::Discrete, v, q)?);
    }
    spacetime_norm_from_series(&traj.times, &series, p)
}
