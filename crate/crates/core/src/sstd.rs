//! Skewed Student-t innovation distribution.
//!
//! Fernandez-Steel skewing applied to the unit-variance Student-t, then
//! re-centred and re-scaled so the resulting variable has mean 0 and
//! variance 1 — the convention GARCH filters expect for standardized
//! innovations. The skew parameter `xi > 0` stretches the right tail for
//! `xi > 1` and the left tail for `xi < 1`; `xi = 1` recovers the
//! symmetric standardized t.

use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Standardized symmetric Student-t (variance 1), valid for nu > 2.
#[derive(Debug, Clone, Copy)]
pub struct StdT {
    nu: f64,
    ln_norm: f64,
}

impl StdT {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu > 2.0) {
            return Err(Error::Domain(format!("student-t nu {nu} must exceed 2")));
        }
        let ln_norm = ln_gamma((nu + 1.0) / 2.0)
            - ln_gamma(nu / 2.0)
            - 0.5 * (std::f64::consts::PI * (nu - 2.0)).ln();
        Ok(StdT { nu, ln_norm })
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        self.ln_norm - (self.nu + 1.0) / 2.0 * (1.0 + x * x / (self.nu - 2.0)).ln()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let t = StudentsT::new(0.0, 1.0, self.nu).unwrap();
        t.cdf(x * (self.nu / (self.nu - 2.0)).sqrt())
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let t = StudentsT::new(0.0, 1.0, self.nu).unwrap();
        t.inverse_cdf(p) * ((self.nu - 2.0) / self.nu).sqrt()
    }
}

/// Standardized (zero-mean, unit-variance) Fernandez-Steel skewed t.
#[derive(Debug, Clone, Copy)]
pub struct SkewT {
    base: StdT,
    xi: f64,
    /// Mean of the raw skewed density before standardization.
    mu_xi: f64,
    /// Standard deviation of the raw skewed density.
    sigma_xi: f64,
    ln_scale: f64,
}

impl SkewT {
    pub fn new(nu: f64, xi: f64) -> Result<Self> {
        if !(xi > 0.0) {
            return Err(Error::Domain(format!("skew parameter xi {xi} must be > 0")));
        }
        let base = StdT::new(nu)?;
        // First absolute half-moment of the unit-variance t.
        let m1 = 2.0 * (nu - 2.0).sqrt() / (nu - 1.0)
            * (ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0)).exp()
            / std::f64::consts::PI.sqrt();
        let mu_xi = m1 * (xi - 1.0 / xi);
        let var_xi = (xi * xi + 1.0 / (xi * xi) - 1.0) - mu_xi * mu_xi;
        if !(var_xi > 0.0) {
            return Err(Error::Domain(format!(
                "degenerate skew-t variance at nu={nu}, xi={xi}"
            )));
        }
        let sigma_xi = var_xi.sqrt();
        let ln_scale = (2.0 / (xi + 1.0 / xi)).ln();
        Ok(SkewT {
            base,
            xi,
            mu_xi,
            sigma_xi,
            ln_scale,
        })
    }

    pub fn nu(&self) -> f64 {
        self.base.nu
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// Log-density of the standardized variable.
    pub fn ln_pdf(&self, z: f64) -> f64 {
        let x = self.mu_xi + self.sigma_xi * z;
        let arg = if x >= 0.0 { x / self.xi } else { x * self.xi };
        self.sigma_xi.ln() + self.ln_scale + self.base.ln_pdf(arg)
    }

    /// CDF of the standardized variable.
    pub fn cdf(&self, z: f64) -> f64 {
        let x = self.mu_xi + self.sigma_xi * z;
        let xi2 = self.xi * self.xi;
        let u = if x < 0.0 {
            2.0 / (1.0 + xi2) * self.base.cdf(x * self.xi)
        } else {
            1.0 / (1.0 + xi2) + 2.0 * xi2 / (1.0 + xi2) * (self.base.cdf(x / self.xi) - 0.5)
        };
        u.clamp(0.0, 1.0)
    }

    /// Quantile of the standardized variable.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("quantile level {p} outside (0,1)")));
        }
        let xi2 = self.xi * self.xi;
        let threshold = 1.0 / (1.0 + xi2);
        let x = if p < threshold {
            self.base.quantile(p * (1.0 + xi2) / 2.0) / self.xi
        } else {
            self.base
                .quantile(0.5 + (p - threshold) * (1.0 + xi2) / (2.0 * xi2))
                * self.xi
        };
        Ok((x - self.mu_xi) / self.sigma_xi)
    }
}
