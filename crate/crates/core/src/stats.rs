//! Small numeric helpers shared across modules.

use crate::error::{Error, Result};

/// Logistic function, evaluated without overflow for large `|z|`.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Pearson correlation. Errors if the lengths differ, fewer than two points
/// are given, or either vector is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::Invalid(format!(
            "correlation needs at least 2 points, got {}",
            a.len()
        )));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return Err(Error::ConstantVector);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); zero for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Standard error of the mean.
pub fn std_error(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    sample_std(xs) / (xs.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_symmetry_and_extremes() {
        for z in [-800.0, -3.0, 0.0, 0.5, 40.0, 800.0] {
            assert!((sigmoid(z) + sigmoid(-z) - 1.0).abs() < 1e-15);
            assert!(sigmoid(z).is_finite());
        }
        assert!(sigmoid(1.0) > sigmoid(0.9));
    }

    #[test]
    fn softplus_matches_naive_in_safe_range() {
        for z in [-20.0, -1.0, 0.0, 1.0, 20.0] {
            let naive = (1.0 + f64::exp(z)).ln();
            assert!((softplus(z) - naive).abs() < 1e-12);
        }
        assert_eq!(softplus(1000.0), 1000.0);
    }

    #[test]
    fn pearson_identities() {
        let a = [0.1, 0.4, 0.35, 0.9];
        assert!((pearson(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = a.iter().map(|x| 1.0 - x).collect();
        assert!((pearson(&a, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(pearson(&a, &[0.5; 4]), Err(Error::ConstantVector)));
        assert!(pearson(&[1.0], &[2.0]).is_err());
    }

    #[test]
    fn pearson_hand_computed() {
        // x = [1,2,3,4], y = [2,1,4,3]: means 2.5, 2.5;
        // deviations x: [-1.5,-.5,.5,1.5], y: [-.5,-1.5,1.5,.5]
        // sxy = .75 + .75 + .75 + .75 = 3.0 ; sxx = syy = 5.0 -> r = 0.6
        let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0]).unwrap();
        assert!((r - 0.6).abs() < 1e-15);
    }

    #[test]
    fn std_error_definition() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        // sample variance 2.5
        assert!((sample_std(&xs) - 2.5f64.sqrt()).abs() < 1e-15);
        assert!((std_error(&xs) - (2.5f64 / 5.0).sqrt()).abs() < 1e-15);
        assert_eq!(std_error(&[3.0]), 0.0);
    }
}
