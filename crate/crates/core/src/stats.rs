//! Small regression and rate helpers shared by the studies.

use crate::error::{Error, Result};

/// Least-squares line `y ≈ intercept + slope · x`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n: usize,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientSamples(format!("{n} samples for a linear fit")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientSamples("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    Ok(LinearFit { slope, intercept, r_squared: r_squared(x, y, slope, intercept), n })
}

/// Coefficient of determination of the line `a + b x` on the samples.
pub fn r_squared(x: &[f64], y: &[f64], slope: f64, intercept: f64) -> f64 {
    let my = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    }
}

/// Observed orders `log(e_i / e_{i+1}) / log(h_i / h_{i+1})` of consecutive levels.
pub fn observed_orders(h: &[f64], e: &[f64]) -> Vec<f64> {
    h.windows(2).zip(e.windows(2)).map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln()).collect()
}

/// Slope of `log e` against `log h` over all levels.
pub fn fitted_order(h: &[f64], e: &[f64]) -> Result<f64> {
    let lx: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    Ok(linear_fit(&lx, &ly)?.slope)
}

/// Largest `v_j / v_i - 1` over `i < j`: how much a later value exceeds an earlier one.
pub fn growth(values: &[f64]) -> f64 {
    let mut g = f64::NEG_INFINITY;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            g = g.max(values[j] / values[i] - 1.0);
        }
    }
    if g.is_finite() {
        g
    } else {
        0.0
    }
}

/// `max / min` of positive values.
pub fn spread(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14 && (f.intercept - 2.0).abs() < 1e-14);
        assert_eq!(f.r_squared, 1.0);
        assert!(linear_fit(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn orders_and_growth() {
        let h = [0.4, 0.2, 0.1];
        let e: Vec<f64> = h.iter().map(|v: &f64| 3.0 * v.powi(2)).collect();
        assert!(observed_orders(&h, &e).iter().all(|o| (o - 2.0).abs() < 1e-12));
        assert!((fitted_order(&h, &e).unwrap() - 2.0).abs() < 1e-12);
        assert!((growth(&[1.0, 1.05, 0.9, 1.1]) - 0.2 / 0.9).abs() < 1e-12);
        assert!((growth(&[3.0, 2.0, 1.0]) + 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(spread(&[2.0, 1.0, 4.0]), 4.0);
    }

    proptest! {
        #[test]
        fn r_squared_in_unit_interval(ys in proptest::collection::vec(-10.0f64..10.0, 3..20)) {
            let xs: Vec<f64> = (0..ys.len()).map(|i| i as f64).collect();
            let f = linear_fit(&xs, &ys).unwrap();
            prop_assert!(f.r_squared <= 1.0 + 1e-12);
            prop_assert!(f.r_squared >= -1e-12);
        }
    }
}
