//! Modified Bessel function of the first kind, order zero.

use crate::error::{Error, Result};

/// Largest |x| accepted. The series is still accurate here, but nothing in
/// the crate needs more than a few units.
pub const I0_ARGUMENT_LIMIT: f64 = 50.0;

/// `I₀(x) = Σ (x/2)^{2m} / (m!)²`, summed until a term drops below 1e-16 of
/// the running total.
pub fn bessel_i0(x: f64) -> Result<f64> {
    Ok(1.0 + bessel_i0_minus_one(x)?)
}

/// `I₀(x) − 1` without the cancellation of forming `I₀` first.
pub fn bessel_i0_minus_one(x: f64) -> Result<f64> {
    if x.is_nan() || x.abs() > I0_ARGUMENT_LIMIT {
        return Err(Error::OutOfRange {
            value: x,
            limit: I0_ARGUMENT_LIMIT,
        });
    }
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 0.0;
    let mut m = 1.0;
    loop {
        term *= q / (m * m);
        sum += term;
        if term <= 1e-16 * (1.0 + sum) {
            return Ok(sum);
        }
        m += 1.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    /// `(1/π)∫₀^π e^{x cos t} dt` by the trapezoid rule, which converges
    /// geometrically for this periodic integrand.
    fn integral_oracle(x: f64) -> f64 {
        let n = 400;
        let h = PI / n as f64;
        let mut s = 0.5 * (x.exp() + (-x).exp());
        for i in 1..n {
            s += (x * (i as f64 * h).cos()).exp();
        }
        s * h / PI
    }

    #[test]
    fn examples() {
        assert_eq!(bessel_i0(0.0).unwrap(), 1.0);
        assert!((bessel_i0(1.0).unwrap() - 1.266_065_877_752_008_4).abs() < 1e-15);
        assert!((bessel_i0(0.1).unwrap() - 1.002_501_562_934_095_6).abs() < 1e-15);
        assert!((bessel_i0(10.0).unwrap() / 2_815.716_628_466_254 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn range_guard() {
        assert!(bessel_i0(50.0).is_ok());
        assert_eq!(
            bessel_i0(50.5),
            Err(Error::OutOfRange {
                value: 50.5,
                limit: 50.0
            })
        );
        assert!(bessel_i0(f64::NAN).is_err());
    }

    #[test]
    fn minus_one_keeps_small_arguments() {
        let x = 1e-6;
        assert!((bessel_i0_minus_one(x).unwrap() / (x * x / 4.0) - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn agrees_with_integral_representation(x in -50.0f64..=50.0) {
            let want = integral_oracle(x);
            let got = bessel_i0(x).unwrap();
            prop_assert!((got / want - 1.0).abs() < 1e-13, "{x}: {got} vs {want}");
        }

        #[test]
        fn even(x in 0.0f64..=50.0) {
            prop_assert_eq!(bessel_i0(x).unwrap(), bessel_i0(-x).unwrap());
        }
    }
}
