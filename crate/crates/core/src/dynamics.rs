//! Time-varying dependence parameter drivers.
//!
//! The primary driver is a GAS(1,1) recursion in link space,
//! `θ̃_{t+1} = k + A·s̃_t + B·θ̃_t`, where `s̃_t` is the (optionally
//! Fisher-scaled) score of the pair-copula log-density with respect to
//! the link-space parameter and the natural parameter is recovered
//! through a family-specific link. A Patton-style ARMA(1,q) recursion is
//! available as a baseline. Per-pair coefficients are estimated by
//! maximum likelihood over unconstrained reparameterizations, and family
//! selection minimizes AIC.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::optim::NelderMead;
use crate::paircopula::{self, CopulaParam, Family};
use crate::stats;

/// Link-space magnitude beyond which the recursion is considered
/// saturated; the path is clamped there and the step counted.
pub const SATURATION_LIMIT: f64 = 50.0;

/// Family-specific link-space clamp keeping the natural parameter in a
/// numerically stable region: |ρ| stays below 1 by ~2e-8 for the (-1,1)
/// families, and the Gumbel θ stays below ~150.
pub fn saturation_bounds(family: Family) -> (f64, f64) {
    match family {
        Family::Gaussian | Family::StudentT => (-18.0, 18.0),
        Family::Gumbel | Family::RotGumbel180 => (-SATURATION_LIMIT, 5.0),
    }
}

/// Driver tag for the time-varying recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Driver {
    Gas,
    Patton,
}

impl Driver {
    pub fn name(&self) -> &'static str {
        match self {
            Driver::Gas => "gas",
            Driver::Patton => "patton",
        }
    }

    pub fn parse(s: &str) -> Result<Driver> {
        match s.to_ascii_lowercase().as_str() {
            "gas" => Ok(Driver::Gas),
            "patton" => Ok(Driver::Patton),
            other => Err(Error::Domain(format!("unknown driver `{other}`"))),
        }
    }
}

/// GAS(1,1) coefficients ξ = (k, A, B) plus the optional static
/// Student-t tail parameter and the score-scaling exponent γ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasCoef {
    pub k: f64,
    pub a: f64,
    pub b: f64,
    pub nu_static: Option<f64>,
    /// Scaling exponent in {0, 0.5, 1}. Non-zero values require the
    /// Gaussian family, whose Fisher information is analytic.
    pub gamma: f64,
}

impl GasCoef {
    pub fn new(k: f64, a: f64, b: f64) -> Self {
        GasCoef {
            k,
            a,
            b,
            nu_static: None,
            gamma: 0.0,
        }
    }

    fn validate(&self, family: Family) -> Result<()> {
        if !(self.b.abs() < 1.0) {
            return Err(Error::Domain(format!(
                "gas persistence |B| = {} must be < 1",
                self.b.abs()
            )));
        }
        if self.gamma != 0.0 && self.gamma != 0.5 && self.gamma != 1.0 {
            return Err(Error::Domain(format!(
                "gamma {} not in {{0, 0.5, 1}}",
                self.gamma
            )));
        }
        if self.gamma != 0.0 && family != Family::Gaussian {
            return Err(Error::Domain(
                "fisher scaling (gamma > 0) is only available for the gaussian family".into(),
            ));
        }
        if family == Family::StudentT {
            match self.nu_static {
                Some(nu) if nu > 2.0 => {}
                _ => {
                    return Err(Error::Domain(
                        "student-t driver requires nu_static > 2".into(),
                    ))
                }
            }
        }
        Ok(())
    }
}

/// Patton ARMA(1,q) coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PattonCoef {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub q: usize,
    pub nu_static: Option<f64>,
}

impl PattonCoef {
    pub fn new(omega: f64, alpha: f64, beta: f64, q: usize) -> Self {
        PattonCoef {
            omega,
            alpha,
            beta,
            q,
            nu_static: None,
        }
    }

    fn validate(&self, family: Family) -> Result<()> {
        if self.q == 0 || self.q > 10 {
            return Err(Error::Domain(format!(
                "patton window q={} outside 1..=10",
                self.q
            )));
        }
        if family == Family::StudentT {
            match self.nu_static {
                Some(nu) if nu > 2.0 => {}
                _ => {
                    return Err(Error::Domain(
                        "student-t driver requires nu_static > 2".into(),
                    ))
                }
            }
        }
        Ok(())
    }
}

/// Coefficients for either driver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DriverCoef {
    Gas(GasCoef),
    Patton(PattonCoef),
}

impl DriverCoef {
    pub fn driver(&self) -> Driver {
        match self {
            DriverCoef::Gas(_) => Driver::Gas,
            DriverCoef::Patton(_) => Driver::Patton,
        }
    }

    pub fn nu_static(&self) -> Option<f64> {
        match self {
            DriverCoef::Gas(c) => c.nu_static,
            DriverCoef::Patton(c) => c.nu_static,
        }
    }

    /// Number of free parameters estimated for this driver/family pair.
    pub fn n_params(&self) -> usize {
        3 + usize::from(self.nu_static().is_some())
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            DriverCoef::Gas(c) => vec![c.k, c.a, c.b],
            DriverCoef::Patton(c) => vec![c.omega, c.alpha, c.beta],
        }
    }
}

/// Filtered path of a time-varying parameter.
#[derive(Debug, Clone)]
pub struct GasPath {
    /// Link-space parameter, one entry per observation.
    pub theta_tilde: Vec<f64>,
    /// Natural-space parameter, `theta[t] = Λ(theta_tilde[t])`.
    pub theta: Vec<f64>,
    /// One-step-ahead natural parameter past the end of the sample.
    pub theta_next: f64,
    pub loglik: f64,
    pub saturated_steps: usize,
}

impl GasPath {
    pub fn saturation_warning(&self) -> bool {
        self.saturated_steps > 0
    }

    /// Natural parameter at `t`, where `t == len` selects the
    /// one-step-ahead forecast.
    pub fn theta_at(&self, t: usize) -> Option<f64> {
        if t < self.theta.len() {
            Some(self.theta[t])
        } else if t == self.theta.len() {
            Some(self.theta_next)
        } else {
            None
        }
    }
}

/// Forward link Λ: ℝ → natural parameter space.
pub fn link_forward(family: Family, x: f64) -> f64 {
    match family {
        // (1 - e^-x) / (1 + e^-x) onto (-1, 1)
        Family::Gaussian | Family::StudentT => {
            let e = (-x).exp();
            (1.0 - e) / (1.0 + e)
        }
        // 1 + e^x onto (1, ∞)
        Family::Gumbel | Family::RotGumbel180 => 1.0 + x.exp(),
    }
}

/// Inverse link Λ⁻¹.
pub fn link_inverse(family: Family, theta: f64) -> f64 {
    match family {
        Family::Gaussian | Family::StudentT => ((1.0 + theta) / (1.0 - theta)).ln(),
        Family::Gumbel | Family::RotGumbel180 => (theta - 1.0).ln(),
    }
}

/// Derivative dΛ/dx evaluated at link-space x.
pub fn link_derivative(family: Family, x: f64) -> f64 {
    match family {
        Family::Gaussian | Family::StudentT => {
            let l = link_forward(family, x);
            (1.0 - l * l) / 2.0
        }
        Family::Gumbel | Family::RotGumbel180 => x.exp(),
    }
}

fn copula_param(family: Family, theta: f64, nu: Option<f64>) -> CopulaParam {
    match family {
        Family::StudentT => CopulaParam { theta, nu },
        _ => CopulaParam { theta, nu: None },
    }
}

/// Scaled link-space score of one observation. Identity scaling when
/// γ = 0; for the Gaussian family the Fisher information of ρ,
/// I(ρ) = (1+ρ²)/(1-ρ²)², supports γ = 0.5 or 1.
fn scaled_score(
    family: Family,
    prep: &paircopula::PreparedColumns,
    theta_tilde: f64,
    theta: f64,
    gamma: f64,
    t: usize,
) -> Result<f64> {
    let natural = prep
        .score_at(theta, t)
        .map_err(|e| Error::Domain(format!("non-finite score at t={t}: {e}")))?;
    let dlink = link_derivative(family, theta_tilde);
    let mut s = natural * dlink;
    if gamma > 0.0 {
        let rho = theta;
        let fisher_nat = (1.0 + rho * rho) / (1.0 - rho * rho).powi(2);
        let fisher_link = fisher_nat * dlink * dlink;
        s *= fisher_link.powf(-gamma);
    }
    if !s.is_finite() {
        return Err(Error::Domain(format!("non-finite scaled score at t={t}")));
    }
    Ok(s)
}

fn check_columns(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::Dimension(format!(
            "column length mismatch: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    if u.is_empty() {
        return Err(Error::Degenerate("empty columns".into()));
    }
    Ok(())
}

/// Runs the GAS(1,1) recursion over paired uniforms, starting from the
/// stationary point θ̃₁ = k / (1 - B).
pub fn gas_filter(family: Family, coef: &GasCoef, u: &[f64], v: &[f64]) -> Result<GasPath> {
    coef.validate(family)?;
    check_columns(u, v)?;
    let n = u.len();
    let prep = paircopula::prepare_columns(family, coef.nu_static, u, v)?;
    let mut theta_tilde = Vec::with_capacity(n);
    let mut theta = Vec::with_capacity(n);
    let mut loglik = 0.0;
    let mut saturated = 0usize;
    let (lo, hi) = saturation_bounds(family);

    let mut tt = coef.k / (1.0 - coef.b);
    for t in 0..n {
        if tt < lo || tt > hi {
            saturated += 1;
            tt = tt.clamp(lo, hi);
        }
        let th = link_forward(family, tt);
        let ld = prep.log_density_at(th, t);
        if !ld.is_finite() {
            return Err(Error::Domain(format!("non-finite log-density at t={t}")));
        }
        loglik += ld;
        theta_tilde.push(tt);
        theta.push(th);

        let s = scaled_score(family, &prep, tt, th, coef.gamma, t)?;
        tt = coef.k + coef.a * s + coef.b * tt;
    }
    let theta_next = link_forward(family, tt.clamp(lo, hi));
    Ok(GasPath {
        theta_tilde,
        theta,
        theta_next,
        loglik,
        saturated_steps: saturated,
    })
}

/// Patton ARMA(1,q) recursion: the natural parameter is the link of an
/// affine function of its own lag and a q-window forcing term. For the
/// (-1,1) families the forcing averages quantile products
/// Φ⁻¹(u)Φ⁻¹(v); for the Gumbel families it averages |u - v|.
pub fn patton_filter(family: Family, coef: &PattonCoef, u: &[f64], v: &[f64]) -> Result<GasPath> {
    coef.validate(family)?;
    check_columns(u, v)?;
    let n = u.len();
    let prep = paircopula::prepare_columns(family, coef.nu_static, u, v)?;
    let normal = Normal::new(0.0, 1.0).unwrap();
    let forcing_terms: Vec<f64> = match family {
        Family::Gaussian | Family::StudentT => (0..n)
            .map(|t| {
                normal.inverse_cdf(u[t].clamp(1e-10, 1.0 - 1e-10))
                    * normal.inverse_cdf(v[t].clamp(1e-10, 1.0 - 1e-10))
            })
            .collect(),
        Family::Gumbel | Family::RotGumbel180 => (0..n).map(|t| (u[t] - v[t]).abs()).collect(),
    };

    let mut theta_tilde = Vec::with_capacity(n);
    let mut theta = Vec::with_capacity(n);
    let mut loglik = 0.0;
    let mut saturated = 0usize;
    let (lo, hi) = saturation_bounds(family);

    let step = |prev_theta: f64, t: usize| -> f64 {
        let window = t.min(coef.q);
        let forcing = if window == 0 {
            0.0
        } else {
            forcing_terms[t - window..t].iter().sum::<f64>() / window as f64
        };
        coef.omega + coef.beta * prev_theta + coef.alpha * forcing
    };

    // Zero-forcing fixed point of the linear part as the starting value.
    let mut tt = coef.omega / (1.0 - coef.beta.clamp(-0.999, 0.999));
    let mut prev_theta = link_forward(family, tt.clamp(lo, hi));
    for t in 0..n {
        if t > 0 {
            tt = step(prev_theta, t);
        }
        if tt < lo || tt > hi {
            saturated += 1;
            tt = tt.clamp(lo, hi);
        }
        let th = link_forward(family, tt);
        let ld = prep.log_density_at(th, t);
        if !ld.is_finite() {
            return Err(Error::Domain(format!("non-finite log-density at t={t}")));
        }
        loglik += ld;
        theta_tilde.push(tt);
        theta.push(th);
        prev_theta = th;
    }
    let next = step(prev_theta, n).clamp(lo, hi);
    Ok(GasPath {
        theta_tilde,
        theta,
        theta_next: link_forward(family, next),
        loglik,
        saturated_steps: saturated,
    })
}

/// Filters with either driver.
pub fn filter(family: Family, coef: &DriverCoef, u: &[f64], v: &[f64]) -> Result<GasPath> {
    match coef {
        DriverCoef::Gas(c) => gas_filter(family, c, u, v),
        DriverCoef::Patton(c) => patton_filter(family, c, u, v),
    }
}

/// Exact log-likelihood of the filtered path.
pub fn pair_loglik(family: Family, coef: &DriverCoef, u: &[f64], v: &[f64]) -> Result<f64> {
    Ok(filter(family, coef, u, v)?.loglik)
}

/// One fitted pair-copula: family, driver coefficients and fit summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairDynamics {
    pub family: Family,
    pub coef: DriverCoef,
    pub loglik: f64,
    pub aic: f64,
    pub converged: bool,
}

/// Optimizer settings for pair and marginal fits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitCfg {
    pub restarts: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
    /// Patton forcing window.
    pub patton_q: usize,
}

impl Default for FitCfg {
    fn default() -> Self {
        FitCfg {
            restarts: 3,
            max_iterations: 1200,
            tolerance: 1e-7,
            seed: 1,
            patton_q: 10,
        }
    }
}

/// Static copula maximum likelihood, used for starting values and as a
/// baseline. Returns the parameter and the attained log-likelihood.
pub fn fit_static(
    family: Family,
    u: &[f64],
    v: &[f64],
    cfg: &FitCfg,
) -> Result<(CopulaParam, f64)> {
    check_columns(u, v)?;
    let tau = paircopula::kendall_tau(u, v).unwrap_or(0.0);
    let start_theta = feasible_tau_start(family, tau);
    let x0 = match family {
        Family::StudentT => vec![link_inverse(family, start_theta), (8.0f64 - 2.0).ln()],
        _ => vec![link_inverse(family, start_theta)],
    };
    let nm = NelderMead {
        max_iterations: cfg.max_iterations,
        tolerance: cfg.tolerance,
        ..NelderMead::default()
    };
    let (lo, hi) = saturation_bounds(family);
    let objective = |x: &[f64]| -> f64 {
        let theta = link_forward(family, x[0].clamp(lo, hi));
        let nu = if family == Family::StudentT {
            Some(2.0 + x[1].clamp(-30.0, 6.0).exp())
        } else {
            None
        };
        let prep = match paircopula::prepare_columns(family, nu, u, v) {
            Ok(p) => p,
            Err(_) => return f64::INFINITY,
        };
        let mut ll = 0.0;
        for t in 0..prep.len() {
            let l = prep.log_density_at(theta, t);
            if !l.is_finite() {
                return f64::INFINITY;
            }
            ll += l;
        }
        -ll
    };
    let res = nm.minimize(objective, &x0);
    if !res.fx.is_finite() {
        return Err(Error::NonConvergence(format!(
            "static {} fit produced no finite likelihood",
            family.name()
        )));
    }
    let theta = link_forward(family, res.x[0].clamp(lo, hi));
    let nu = if family == Family::StudentT {
        Some(2.0 + res.x[1].clamp(-30.0, 6.0).exp())
    } else {
        None
    };
    Ok((copula_param(family, theta, nu), -res.fx))
}

/// Maps a possibly family-infeasible tau to a usable starting parameter.
fn feasible_tau_start(family: Family, tau: f64) -> f64 {
    let tau = tau.clamp(-0.95, 0.95);
    match family {
        Family::Gaussian | Family::StudentT => (std::f64::consts::PI * tau / 2.0).sin(),
        Family::Gumbel => 1.0 / (1.0 - tau.max(0.0)).max(0.05) + 1e-4,
        Family::RotGumbel180 => 1.0 / (1.0 - tau.abs()).max(0.05) + 1e-4,
    }
}

struct ParamCoding {
    family: Family,
    driver: Driver,
    patton_q: usize,
    with_nu: bool,
}

impl ParamCoding {
    fn decode(&self, x: &[f64]) -> DriverCoef {
        let nu = self.with_nu.then(|| 2.0 + x[3].clamp(-30.0, 6.0).exp());
        match self.driver {
            Driver::Gas => DriverCoef::Gas(GasCoef {
                k: x[0],
                a: x[1],
                b: x[2].tanh(),
                nu_static: nu,
                gamma: 0.0,
            }),
            Driver::Patton => DriverCoef::Patton(PattonCoef {
                omega: x[0],
                alpha: x[1],
                beta: x[2].tanh(),
                q: self.patton_q,
                nu_static: nu,
            }),
        }
    }

    fn encode_start(&self, static_theta: f64, b0: f64, a0: f64, nu0: f64) -> Vec<f64> {
        // Boundary MLEs (theta at 1 or |rho| at 1) map to infinite link
        // values; keep the start finite.
        let link_target = link_inverse(self.family, static_theta).clamp(-8.0, 8.0);
        let mut x = vec![(1.0 - b0) * link_target, a0, atanh(b0)];
        if self.with_nu {
            x.push((nu0 - 2.0).ln());
        }
        x
    }
}

fn atanh(x: f64) -> f64 {
    0.5 * ((1.0 + x) / (1.0 - x)).ln()
}

/// Fits driver coefficients for one pair by maximum likelihood with
/// simplex restarts. Candidates whose filtered path saturates on more
/// than 10% of steps are rejected.
pub fn fit_pair(
    family: Family,
    driver: Driver,
    u: &[f64],
    v: &[f64],
    cfg: &FitCfg,
) -> Result<(PairDynamics, GasPath)> {
    check_columns(u, v)?;
    let n = u.len();
    let coding = ParamCoding {
        family,
        driver,
        patton_q: cfg.patton_q,
        with_nu: family == Family::StudentT,
    };
    let max_saturated = n / 10;

    let (static_param, _static_ll) = fit_static(family, u, v, cfg)?;
    let nu0 = static_param.nu.unwrap_or(8.0);

    let nm = NelderMead {
        max_iterations: cfg.max_iterations,
        tolerance: cfg.tolerance,
        ..NelderMead::default()
    };
    let objective = |x: &[f64]| -> f64 {
        let coef = coding.decode(x);
        match filter(family, &coef, u, v) {
            Ok(path) => {
                if path.saturated_steps > max_saturated || !path.loglik.is_finite() {
                    f64::INFINITY
                } else {
                    -path.loglik
                }
            }
            Err(_) => f64::INFINITY,
        }
    };

    let mut rng = stats::substream_rng(cfg.seed, 0xd1ce);
    let mut best: Option<(f64, Vec<f64>, bool)> = None;
    for restart in 0..cfg.restarts.max(1) {
        let b0 = match restart {
            0 => 0.95,
            1 => 0.80,
            _ => 0.99,
        };
        let mut x0 = coding.encode_start(static_param.theta, b0, 0.05, nu0);
        if restart > 0 {
            for xi in x0.iter_mut() {
                *xi += 0.05 * (rng.random::<f64>() - 0.5);
            }
        }
        let res = nm.minimize(objective, &x0);
        if res.fx.is_finite() {
            let better = match &best {
                Some((fx, _, _)) => res.fx < *fx,
                None => true,
            };
            if better {
                best = Some((res.fx, res.x, res.converged));
            }
        }
    }

    let (fx, x, converged) = best.ok_or_else(|| {
        Error::NonConvergence(format!(
            "all {} restarts failed for {}-{} pair fit",
            cfg.restarts,
            family.name(),
            driver.name()
        ))
    })?;
    let coef = coding.decode(&x);
    let path = filter(family, &coef, u, v)?;
    let loglik = -fx;
    let k = coef.n_params() as f64;
    let aic = 2.0 * k - 2.0 * loglik;
    Ok((
        PairDynamics {
            family,
            coef,
            loglik,
            aic,
            converged,
        },
        path,
    ))
}

/// Fits every candidate family and keeps the smallest AIC; ties break in
/// the order Gaussian < StudentT < Gumbel < RotGumbel180.
pub fn select_family(
    u: &[f64],
    v: &[f64],
    families: &[Family],
    driver: Driver,
    cfg: &FitCfg,
) -> Result<(PairDynamics, GasPath)> {
    if families.is_empty() {
        return Err(Error::Domain("empty family list".into()));
    }
    let mut best: Option<(PairDynamics, GasPath)> = None;
    let mut failures: Vec<String> = Vec::new();
    for &family in families {
        match fit_pair(family, driver, u, v, cfg) {
            Ok((dynamics, path)) => {
                let better = match &best {
                    Some((b, _)) => dynamics.aic < b.aic,
                    None => true,
                };
                if better {
                    best = Some((dynamics, path));
                }
            }
            Err(e) => failures.push(format!("{}: {e}", family.name())),
        }
    }
    best.ok_or_else(|| {
        Error::NonConvergence(format!(
            "all candidate families failed: [{}]",
            failures.join("; ")
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_pairs(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = stats::substream_rng(seed, 1);
        let u: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        (u, v)
    }

    #[test]
    fn gas_collapse_to_static_when_a_b_zero() {
        let (u, v) = uniform_pairs(200, 7);
        for family in Family::ALL {
            let k = match family {
                Family::Gaussian | Family::StudentT => 0.6,
                _ => -0.4,
            };
            let mut coef = GasCoef::new(k, 0.0, 0.0);
            if family == Family::StudentT {
                coef.nu_static = Some(6.0);
            }
            let path = gas_filter(family, &coef, &u, &v).unwrap();
            let theta = link_forward(family, k);
            let param = copula_param(family, theta, coef.nu_static);
            let static_ll: f64 = (0..u.len())
                .map(|t| paircopula::log_density(family, &param, u[t], v[t]).unwrap())
                .sum();
            assert!(
                (path.loglik - static_ll).abs() < 1e-10,
                "{family:?}: {} vs {static_ll}",
                path.loglik
            );
            assert!(path.theta.iter().all(|&t| (t - theta).abs() < 1e-14));
        }
    }

    #[test]
    fn gas_zero_link_gives_zero_rho() {
        let (u, v) = uniform_pairs(50, 8);
        let coef = GasCoef::new(0.0, 0.0, 0.9);
        let path = gas_filter(Family::Gaussian, &coef, &u, &v).unwrap();
        assert!(path.theta_tilde.iter().all(|&x| x == 0.0));
        assert!(path.theta.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn gas_no_score_is_geometric_ar1() {
        let (u, v) = uniform_pairs(120, 9);
        let coef = GasCoef::new(0.3, 0.0, 0.7);
        let path = gas_filter(Family::Gaussian, &coef, &u, &v).unwrap();
        let fixed = 0.3 / (1.0 - 0.7);
        let initial_gap = (path.theta_tilde[0] - fixed).abs();
        for (t, &tt) in path.theta_tilde.iter().enumerate() {
            let bound = 0.7f64.powi(t as i32) * initial_gap + 1e-12;
            assert!((tt - fixed).abs() <= bound, "t={t}");
        }
    }

    #[test]
    fn patton_constant_when_alpha_beta_zero() {
        let (u, v) = uniform_pairs(80, 10);
        let coef = PattonCoef::new(0.8, 0.0, 0.0, 10);
        let path = patton_filter(Family::Gaussian, &coef, &u, &v).unwrap();
        let expected = link_forward(Family::Gaussian, 0.8);
        assert!(path.theta.iter().all(|&t| (t - expected).abs() < 1e-14));
    }

    #[test]
    fn patton_window_of_one_uses_previous_quantile_product() {
        let (u, v) = uniform_pairs(40, 11);
        let coef = PattonCoef::new(0.1, 0.4, 0.2, 1);
        let path = patton_filter(Family::Gaussian, &coef, &u, &v).unwrap();
        let n = Normal::new(0.0, 1.0).unwrap();
        // Recompute t = 3 by hand.
        let t = 3;
        let forcing = n.inverse_cdf(u[t - 1]) * n.inverse_cdf(v[t - 1]);
        let expected = 0.1 + 0.2 * path.theta[t - 1] + 0.4 * forcing;
        assert!((path.theta_tilde[t] - expected).abs() < 1e-12);
    }

    #[test]
    fn patton_path_stays_in_range_on_random_coefficients() {
        let (u, v) = uniform_pairs(150, 12);
        let mut rng = stats::substream_rng(13, 0);
        for _ in 0..20 {
            let coef = PattonCoef::new(
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 1.8 - 0.9,
                10,
            );
            let path = patton_filter(Family::Gaussian, &coef, &u, &v).unwrap();
            assert!(path.theta.iter().all(|&r| r > -1.0 && r < 1.0));
        }
    }

    #[test]
    fn pair_loglik_matches_manual_recursion() {
        let (u, v) = uniform_pairs(10, 14);
        let coef = GasCoef::new(0.05, 0.1, 0.9);
        let ll = pair_loglik(Family::Gaussian, &DriverCoef::Gas(coef), &u, &v).unwrap();

        // Step-by-step reimplementation.
        let mut tt = 0.05 / (1.0 - 0.9);
        let mut manual = 0.0;
        for t in 0..u.len() {
            let rho = link_forward(Family::Gaussian, tt);
            let p = CopulaParam::new(rho);
            manual += paircopula::log_density(Family::Gaussian, &p, u[t], v[t]).unwrap();
            let score = paircopula::score(Family::Gaussian, &p, u[t], v[t]).unwrap()
                * link_derivative(Family::Gaussian, tt);
            tt = 0.05 + 0.1 * score + 0.9 * tt;
        }
        assert!((ll - manual).abs() < 1e-12);
    }

    #[test]
    fn independence_data_has_near_zero_loglik() {
        let (u, v) = uniform_pairs(400, 15);
        let coef = GasCoef::new(0.0, 0.0, 0.0);
        let ll = pair_loglik(Family::Gaussian, &DriverCoef::Gas(coef), &u, &v).unwrap();
        assert_eq!(ll, 0.0);
    }

    #[test]
    fn loglik_invariant_under_pair_swap() {
        let (u, v) = uniform_pairs(100, 16);
        let coef = DriverCoef::Gas(GasCoef::new(0.1, 0.05, 0.8));
        let a = pair_loglik(Family::Gumbel, &coef, &u, &v).unwrap();
        let b = pair_loglik(Family::Gumbel, &coef, &v, &u).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn degenerate_equal_columns_do_not_crash() {
        let (u, _) = uniform_pairs(120, 17);
        let result = fit_pair(Family::Gumbel, Driver::Gas, &u, &u, &FitCfg::default());
        // Either a convergence error or a saturating fit is acceptable.
        if let Ok((dynamics, path)) = result {
            assert!(dynamics.loglik.is_finite());
            let _ = path.saturation_warning();
        }
    }

    #[test]
    fn rejects_invalid_coefficients() {
        let (u, v) = uniform_pairs(30, 18);
        let coef = GasCoef::new(0.0, 0.0, 1.2);
        assert!(gas_filter(Family::Gaussian, &coef, &u, &v).is_err());
        let mut c2 = GasCoef::new(0.0, 0.0, 0.5);
        c2.gamma = 0.5;
        assert!(gas_filter(Family::Gumbel, &c2, &u, &v).is_err());
        c2.gamma = 0.25;
        assert!(gas_filter(Family::Gaussian, &c2, &u, &v).is_err());
    }

    #[test]
    fn select_family_single_candidate() {
        let (u, v) = uniform_pairs(150, 19);
        let cfg = FitCfg {
            restarts: 1,
            ..FitCfg::default()
        };
        let (dynamics, _) = select_family(&u, &v, &[Family::Gaussian], Driver::Gas, &cfg).unwrap();
        assert_eq!(dynamics.family, Family::Gaussian);
    }

    #[test]
    fn patton_driver_fits_dependent_data() {
        // Strongly associated pair: the Patton fit must beat independence.
        let mut rng = stats::substream_rng(21, 3);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let n = 400;
        let mut u = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            let z: f64 = normal.inverse_cdf(rng.random::<f64>().clamp(1e-9, 1.0 - 1e-9));
            let e: f64 = normal.inverse_cdf(rng.random::<f64>().clamp(1e-9, 1.0 - 1e-9));
            let x = z;
            let y = 0.7 * z + (1.0f64 - 0.49).sqrt() * e;
            u.push(normal.cdf(x).clamp(1e-9, 1.0 - 1e-9));
            v.push(normal.cdf(y).clamp(1e-9, 1.0 - 1e-9));
        }
        let cfg = FitCfg::default();
        let (fit, path) = fit_pair(Family::Gaussian, Driver::Patton, &u, &v, &cfg).unwrap();
        assert_eq!(fit.coef.driver(), Driver::Patton);
        assert!(fit.loglik > 50.0, "loglik {}", fit.loglik);
        assert!(path.theta.iter().all(|&r| r > -1.0 && r < 1.0));
        let mean_rho = crate::stats::mean(&path.theta);
        assert!((mean_rho - 0.7).abs() < 0.15, "mean rho {mean_rho}");
    }

    #[test]
    fn fisher_scaling_accepted_for_gaussian() {
        let (u, v) = uniform_pairs(150, 22);
        let mut coef = GasCoef::new(0.1, 0.05, 0.9);
        coef.gamma = 0.5;
        let path = gas_filter(Family::Gaussian, &coef, &u, &v).unwrap();
        assert!(path.loglik.is_finite());
        coef.gamma = 1.0;
        let path = gas_filter(Family::Gaussian, &coef, &u, &v).unwrap();
        assert!(path.loglik.is_finite());
    }

    #[test]
    fn fit_pair_aic_identity() {
        let (u, v) = uniform_pairs(200, 20);
        let cfg = FitCfg {
            restarts: 1,
            ..FitCfg::default()
        };
        let (fit, _) = fit_pair(Family::Gaussian, Driver::Gas, &u, &v, &cfg).unwrap();
        let k = fit.coef.n_params() as f64;
        assert_eq!(fit.aic, 2.0 * k - 2.0 * fit.loglik);
        let recomputed = pair_loglik(Family::Gaussian, &fit.coef, &u, &v).unwrap();
        assert_eq!(fit.loglik, recomputed);
    }
}
