use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Constants of Hansen's standardized skewed t with skew `lambda` and tail
/// `eta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HansenConstants {
    pub lambda: f64,
    pub eta: f64,
    pub a: f64,
    pub b: f64,
    pub ln_c: f64,
}

impl HansenConstants {
    pub fn new(lambda: f64, eta: f64) -> Result<Self> {
        if !(eta > 2.0) {
            return Err(Error::InvalidTailParameter(eta));
        }
        assert!(lambda.abs() < 1.0, "skewness must lie in (-1, 1)");
        let ln_c = ln_gamma((eta + 1.0) / 2.0)
            - 0.5 * (std::f64::consts::PI * (eta - 2.0)).ln()
            - ln_gamma(eta / 2.0);
        let c = ln_c.exp();
        let a = 4.0 * lambda * c * (eta - 2.0) / (eta - 1.0);
        let b = (1.0 + 3.0 * lambda * lambda - a * a).sqrt();
        Ok(Self {
            lambda,
            eta,
            a,
            b,
            ln_c,
        })
    }

    /// Log density at `z` of the zero-mean, unit-variance variate.
    #[inline]
    pub fn logpdf(&self, z: f64) -> f64 {
        let side = if z < -self.a / self.b {
            1.0 - self.lambda
        } else {
            1.0 + self.lambda
        };
        let w = (self.b * z + self.a) / side;
        self.b.ln() + self.ln_c - 0.5 * (self.eta + 1.0) * (w * w / (self.eta - 2.0)).ln_1p()
    }
}

/// Log density of the standardized skewed t at `z`.
pub fn skewt_std_logpdf(z: f64, delta: f64, omega: f64) -> Result<f64> {
    Ok(HansenConstants::new(delta, omega)?.logpdf(z))
}

/// Log density of the skewed t with mean `mu` and variance `tau`.
pub fn skewt_logpdf(g: f64, mu: f64, tau: f64, delta: f64, omega: f64) -> Result<f64> {
    let sd = tau.sqrt();
    Ok(skewt_std_logpdf((g - mu) / sd, delta, omega)? - 0.5 * tau.ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_at_two_is_rejected() {
        assert!(matches!(
            skewt_logpdf(0.0, 0.0, 1.0, 0.0, 2.0),
            Err(Error::InvalidTailParameter(_))
        ));
    }

    #[test]
    fn symmetric_case_is_standardized_student() {
        // lambda = 0 gives a = 0, b = 1
        let h = HansenConstants::new(0.0, 5.0).unwrap();
        assert_eq!(h.a, 0.0);
        assert_eq!(h.b, 1.0);
        assert!((h.logpdf(0.7) - h.logpdf(-0.7)).abs() < 1e-15);
    }

    #[test]
    fn density_continuous_at_mode_split() {
        let h = HansenConstants::new(0.4, 6.0).unwrap();
        let z0 = -h.a / h.b;
        assert!((h.logpdf(z0 - 1e-12) - h.logpdf(z0 + 1e-12)).abs() < 1e-9);
    }
}
