//! Catalog of forcing profiles used by the regularity studies.
//!
//! All profiles depend on `x` only through the direction `x / |x|`, which
//! keeps them bounded and smooth on every surface in the catalog and makes
//! their values independent of the surface scaling. Profile ids:
//!
//! - `zero`
//! - `bump`: a Gaussian-type bump travelling once around the z-axis per unit time
//! - `osc-seed<N>`: a seeded low-frequency spatial pattern times a smoothed
//!   square wave in time
//! - `lowfreq-seed<N>`: a seeded sum of quadratic spatial monomials with
//!   seeded temporal cosines

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::vec3::{self, Point};
use crate::error::{Error, Result};

const BUMP_WIDTH: f64 = 0.25;
const OSC_FREQUENCY: f64 = 2.0;
const OSC_SHARPNESS: f64 = 4.0;
const MONOMIALS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub enum ForcingProfile {
    Zero,
    Bump,
    Oscillator { seed: u64, coeffs: [f64; MONOMIALS], phase: f64 },
    LowFrequency { seed: u64, coeffs: [f64; MONOMIALS], freqs: [f64; MONOMIALS], phases: [f64; MONOMIALS] },
}

fn monomials(d: Point) -> [f64; MONOMIALS] {
    [1.0, d[0], d[1], d[2], d[0] * d[0], d[1] * d[1], d[2] * d[2], d[0] * d[1], d[1] * d[2], d[2] * d[0]]
}

fn normalized_coeffs(rng: &mut ChaCha8Rng) -> [f64; MONOMIALS] {
    let mut c = [0.0; MONOMIALS];
    for v in c.iter_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    let total: f64 = c.iter().map(|v: &f64| v.abs()).sum();
    for v in c.iter_mut() {
        *v /= total;
    }
    c
}

impl ForcingProfile {
    pub fn parse(id: &str) -> Result<Self> {
        let seed_of = |rest: &str| rest.parse::<u64>().map_err(|_| Error::UnknownProfile(id.to_string()));
        if id == "zero" {
            Ok(ForcingProfile::Zero)
        } else if id == "bump" {
            Ok(ForcingProfile::Bump)
        } else if let Some(rest) = id.strip_prefix("osc-seed") {
            let seed = seed_of(rest)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let coeffs = normalized_coeffs(&mut rng);
            let phase = rng.gen_range(0.0..2.0 * PI);
            Ok(ForcingProfile::Oscillator { seed, coeffs, phase })
        } else if let Some(rest) = id.strip_prefix("lowfreq-seed") {
            let seed = seed_of(rest)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let coeffs = normalized_coeffs(&mut rng);
            let mut freqs = [0.0; MONOMIALS];
            let mut phases = [0.0; MONOMIALS];
            for i in 0..MONOMIALS {
                freqs[i] = rng.gen_range(0..3) as f64;
                phases[i] = rng.gen_range(0.0..2.0 * PI);
            }
            Ok(ForcingProfile::LowFrequency { seed, coeffs, freqs, phases })
        } else {
            Err(Error::UnknownProfile(id.to_string()))
        }
    }

    pub fn id(&self) -> String {
        match self {
            ForcingProfile::Zero => "zero".into(),
            ForcingProfile::Bump => "bump".into(),
            ForcingProfile::Oscillator { seed, .. } => format!("osc-seed{seed}"),
            ForcingProfile::LowFrequency { seed, .. } => format!("lowfreq-seed{seed}"),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ForcingProfile::Zero)
    }

    /// Center direction of the travelling bump at time `t`.
    pub fn bump_center(t: f64) -> Point {
        [(2.0 * PI * t).cos(), (2.0 * PI * t).sin(), 0.0]
    }

    pub fn eval(&self, t: f64, x: Point) -> f64 {
        let len = vec3::norm(x);
        if len == 0.0 {
            return 0.0;
        }
        let d = vec3::scale(1.0 / len, x);
        match self {
            ForcingProfile::Zero => 0.0,
            ForcingProfile::Bump => ((vec3::dot(d, Self::bump_center(t)) - 1.0) / BUMP_WIDTH).exp(),
            ForcingProfile::Oscillator { coeffs, phase, .. } => {
                let m = monomials(d);
                let g: f64 = coeffs.iter().zip(m.iter()).map(|(c, v)| c * v).sum();
                let s = (OSC_SHARPNESS * (2.0 * PI * OSC_FREQUENCY * t + phase).sin()).tanh() / OSC_SHARPNESS.tanh();
                s * g
            }
            ForcingProfile::LowFrequency { coeffs, freqs, phases, .. } => {
                let m = monomials(d);
                (0..MONOMIALS).map(|i| coeffs[i] * (2.0 * PI * freqs[i] * t + phases[i]).cos() * m[i]).sum()
            }
        }
    }
}

/// Evaluates profile `id` at `(t, x)`.
pub fn forcing_for_study(id: &str, t: f64, x: Point) -> Result<f64> {
    Ok(ForcingProfile::parse(id)?.eval(t, x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_peaks_at_center() {
        for &t in &[0.0, 0.3, 0.71] {
            let c = ForcingProfile::bump_center(t);
            assert!((forcing_for_study("bump", t, c).unwrap() - 1.0).abs() < 1e-15);
            // scaling the point does not matter
            assert!((forcing_for_study("bump", t, vec3::scale(1.3, c)).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_is_zero() {
        assert_eq!(forcing_for_study("zero", 0.4, [0.3, 0.2, 0.9]).unwrap(), 0.0);
    }

    #[test]
    fn seeded_profiles_are_reproducible() {
        let x = [0.3, -0.2, 0.9];
        let a = forcing_for_study("osc-seed42", 0.37, x).unwrap();
        let b = forcing_for_study("osc-seed42", 0.37, x).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        let c = forcing_for_study("osc-seed43", 0.37, x).unwrap();
        assert_ne!(a, c);
        let l1 = forcing_for_study("lowfreq-seed7", 0.1, x).unwrap();
        let l2 = forcing_for_study("lowfreq-seed7", 0.1, x).unwrap();
        assert_eq!(l1.to_bits(), l2.to_bits());
    }

    #[test]
    fn unknown_profile() {
        assert!(matches!(forcing_for_study("square", 0.0, [1.0, 0.0, 0.0]), Err(Error::UnknownProfile(_))));
        assert!(matches!(ForcingProfile::parse("osc-seedX"), Err(Error::UnknownProfile(_))));
    }

    #[test]
    fn profiles_are_bounded() {
        let ids = ["bump", "osc-seed42", "lowfreq-seed7", "osc-seed1"];
        for id in ids {
            let p = ForcingProfile::parse(id).unwrap();
            for i in 0..200 {
                let a = i as f64 * 0.37;
                let x = [a.cos() * (0.5 * a).sin(), a.sin() * (0.5 * a).sin(), (0.5 * a).cos()];
                let v = p.eval(i as f64 / 200.0, x);
                assert!(v.abs() <= 1.0 + 1e-12, "{id}: {v}");
            }
        }
    }
}
