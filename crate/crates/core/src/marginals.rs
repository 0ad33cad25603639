//! ARFIMA(p,d,q)-GARCH(a,b) marginal models with skewed Student-t
//! innovations.
//!
//! Each indicator series is filtered into standardized residuals, then
//! mapped to uniform pseudo-observations by a probability integral
//! transform (empirical ranks by default, the fitted parametric CDF on
//! request). The inverse pipeline turns simulated uniforms back into
//! indicator values through the inverse PIT, the GARCH volatility
//! recursion and the inverted mean equation.
//!
//! All coefficients are estimated jointly by maximum likelihood over an
//! unconstrained reparameterization: ω through a log transform, the
//! GARCH coefficients through a softmax-style map onto the stationarity
//! simplex, `d` through a scaled tanh onto (-0.5, 0.5), ν through
//! 2 + exp(·) and ξ through exp(·).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::NelderMead;
use crate::sstd::SkewT;
use crate::stats;

/// Default truncation window for the fractional-difference expansion;
/// coefficients beyond this point are below 1e-6 for |d| < 0.5.
pub const FRAC_DIFF_TRUNCATION: usize = 1000;

/// Model orders for one marginal series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarginalOrder {
    pub p: usize,
    pub q: usize,
    pub use_frac_d: bool,
    pub a: usize,
    pub b: usize,
}

impl MarginalOrder {
    pub fn new(p: usize, q: usize, a: usize, b: usize) -> Self {
        MarginalOrder {
            p,
            q,
            use_frac_d: false,
            a,
            b,
        }
    }

    pub fn with_frac_d(mut self) -> Self {
        self.use_frac_d = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.p > 5 || self.q > 5 {
            return Err(Error::Domain(format!(
                "arma orders p={}, q={} exceed the grid bound 5",
                self.p, self.q
            )));
        }
        if self.a > 2 || self.b > 2 {
            return Err(Error::Domain(format!(
                "garch orders a={}, b={} exceed the grid bound 2",
                self.a, self.b
            )));
        }
        if self.a + self.b == 0 {
            return Err(Error::Domain("garch requires a + b >= 1".into()));
        }
        Ok(())
    }

    /// Number of free parameters (including nu and xi).
    pub fn n_params(&self) -> usize {
        1 + self.p + self.q + usize::from(self.use_frac_d) + 1 + self.a + self.b + 2
    }

    pub fn label(&self) -> String {
        let d = if self.use_frac_d { "d" } else { "0" };
        format!(
            "ARFIMA({},{},{})-GARCH({},{})",
            self.p, d, self.q, self.a, self.b
        )
    }

    /// Default selection grid: p, q in {0,1,2} and (a,b) in
    /// {(0,1),(1,0),(1,1)}, with or without fractional differencing.
    pub fn default_grid(use_frac_d: bool) -> Vec<MarginalOrder> {
        let mut grid = Vec::new();
        for p in 0..=2 {
            for q in 0..=2 {
                for &(a, b) in &[(1usize, 0usize), (0, 1), (1, 1)] {
                    grid.push(MarginalOrder {
                        p,
                        q,
                        use_frac_d,
                        a,
                        b,
                    });
                }
            }
        }
        grid
    }
}

/// A fitted marginal model with its filtered paths.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarginalFit {
    pub order: MarginalOrder,
    pub mu: f64,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    /// Fractional-difference exponent; 0 when disabled.
    pub d: f64,
    pub omega: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub nu: f64,
    pub xi_skew: f64,
    pub loglik: f64,
    pub aic: f64,
    /// Fitted conditional volatility path.
    pub sigma: Vec<f64>,
    /// Standardized residuals.
    pub z: Vec<f64>,
    pub converged: bool,
    pub warnings: Vec<String>,
}

/// PIT direction selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PitMode {
    Empirical,
    Parametric,
}

impl PitMode {
    pub fn name(&self) -> &'static str {
        match self {
            PitMode::Empirical => "empirical",
            PitMode::Parametric => "parametric",
        }
    }

    pub fn parse(s: &str) -> Result<PitMode> {
        match s.to_ascii_lowercase().as_str() {
            "empirical" => Ok(PitMode::Empirical),
            "parametric" => Ok(PitMode::Parametric),
            other => Err(Error::Domain(format!("unknown pit mode `{other}`"))),
        }
    }
}

/// Uniform pseudo-observations, one column per series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UniformPanel {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub mode: PitMode,
}

impl UniformPanel {
    pub fn n_series(&self) -> usize {
        self.columns.len()
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, |c| c.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        for (i, col) in self.columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::Dimension(format!(
                    "uniform column {i} has length {} != {n}",
                    col.len()
                )));
            }
            if let Some(&bad) = col.iter().find(|&&u| !(u > 0.0 && u < 1.0)) {
                return Err(Error::Domain(format!(
                    "uniform column {i} contains out-of-range value {bad}"
                )));
            }
        }
        Ok(())
    }
}

/// Expansion coefficients of (1-L)^d: π_0 = 1,
/// π_k = π_{k-1} · (k - 1 - d) / k.
pub fn frac_diff_weights(d: f64, k_max: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(k_max + 1);
    w.push(1.0);
    for k in 1..=k_max {
        let prev = w[k - 1];
        w.push(prev * ((k as f64 - 1.0 - d) / k as f64));
    }
    w
}

/// Applies the truncated fractional difference
/// `y_t = Σ_{k=0}^{min(t, truncation)} π_k x_{t-k}`.
pub fn frac_diff(series: &[f64], d: f64, truncation: usize) -> Vec<f64> {
    if d == 0.0 {
        return series.to_vec();
    }
    let k_max = truncation.min(series.len().saturating_sub(1));
    let w = frac_diff_weights(d, k_max);
    (0..series.len())
        .map(|t| {
            let kmax = t.min(k_max);
            let mut acc = 0.0;
            for k in 0..=kmax {
                acc += w[k] * series[t - k];
            }
            acc
        })
        .collect()
}

/// Filter state shared between likelihood evaluation and forecasting.
struct FilterOutput {
    eps: Vec<f64>,
    sigma2: Vec<f64>,
    /// Fractionally differenced, demeaned series (mean-equation input).
    y: Vec<f64>,
}

struct Coefficients {
    mu: f64,
    phi: Vec<f64>,
    theta: Vec<f64>,
    d: f64,
    omega: f64,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    nu: f64,
    xi: f64,
}

/// ARMA residual and GARCH variance filter. Pre-sample values use zero
/// residuals and the sample variance of the residuals.
fn run_filter(series: &[f64], c: &Coefficients) -> FilterOutput {
    let n = series.len();
    let demeaned: Vec<f64> = series.iter().map(|x| x - c.mu).collect();
    let y = if c.d != 0.0 {
        frac_diff(&demeaned, c.d, FRAC_DIFF_TRUNCATION)
    } else {
        demeaned
    };

    let mut eps = vec![0.0; n];
    for t in 0..n {
        let mut pred = 0.0;
        for (i, &phi) in c.phi.iter().enumerate() {
            if t > i {
                pred += phi * y[t - i - 1];
            }
        }
        for (j, &theta) in c.theta.iter().enumerate() {
            if t > j {
                pred += theta * eps[t - j - 1];
            }
        }
        eps[t] = y[t] - pred;
    }

    let eps_var = {
        let m = stats::mean(&eps);
        let v = eps.iter().map(|e| (e - m) * (e - m)).sum::<f64>() / n as f64;
        v.max(1e-12)
    };
    let mut sigma2 = vec![0.0; n];
    for t in 0..n {
        let mut s2 = c.omega;
        for (i, &alpha) in c.alpha.iter().enumerate() {
            let e2 = if t > i {
                eps[t - i - 1] * eps[t - i - 1]
            } else {
                eps_var
            };
            s2 += alpha * e2;
        }
        for (j, &beta) in c.beta.iter().enumerate() {
            let s_prev = if t > j { sigma2[t - j - 1] } else { eps_var };
            s2 += beta * s_prev;
        }
        sigma2[t] = s2.max(1e-12);
    }
    FilterOutput { eps, sigma2, y }
}

fn log_likelihood(series: &[f64], c: &Coefficients) -> f64 {
    let skew_t = match SkewT::new(c.nu, c.xi) {
        Ok(s) => s,
        Err(_) => return f64::NEG_INFINITY,
    };
    let out = run_filter(series, c);
    let mut ll = 0.0;
    for t in 0..series.len() {
        let sigma = out.sigma2[t].sqrt();
        let z = out.eps[t] / sigma;
        let term = skew_t.ln_pdf(z) - sigma.ln();
        if !term.is_finite() {
            return f64::NEG_INFINITY;
        }
        ll += term;
    }
    ll
}

struct MarginalCoding {
    order: MarginalOrder,
}

impl MarginalCoding {
    fn dim(&self) -> usize {
        self.order.n_params()
    }

    fn decode(&self, x: &[f64]) -> Coefficients {
        let o = &self.order;
        let mut i = 0;
        let mu = x[i];
        i += 1;
        let phi = x[i..i + o.p].to_vec();
        i += o.p;
        let theta = x[i..i + o.q].to_vec();
        i += o.q;
        let d = if o.use_frac_d {
            let v = 0.5 * x[i].tanh();
            i += 1;
            v
        } else {
            0.0
        };
        let omega = x[i].clamp(-60.0, 60.0).exp();
        i += 1;
        // Softmax-style map onto {alpha, beta >= 0, sum < 1}.
        let raw: Vec<f64> = x[i..i + o.a + o.b]
            .iter()
            .map(|&r| r.clamp(-40.0, 40.0).exp())
            .collect();
        i += o.a + o.b;
        let total: f64 = raw.iter().sum();
        let persistence = total / (1.0 + total);
        let scaled: Vec<f64> = raw.iter().map(|&r| persistence * r / total).collect();
        let alpha = scaled[..o.a].to_vec();
        let beta = scaled[o.a..].to_vec();
        let nu = 2.0 + x[i].clamp(-30.0, 6.0).exp();
        i += 1;
        let xi = x[i].clamp(-3.0, 3.0).exp();
        Coefficients {
            mu,
            phi,
            theta,
            d,
            omega,
            alpha,
            beta,
            nu,
            xi,
        }
    }

    /// Method-of-moments starting point with variance targeting:
    /// ω₀ = var·(1 - α₀ - β₀) with α₀ = 0.05, β₀ = 0.90 (split across
    /// lags when the order exceeds one).
    fn encode_start(&self, series: &[f64]) -> Vec<f64> {
        let o = &self.order;
        let var = stats::variance(series).max(1e-12);
        let mut x = Vec::with_capacity(self.dim());
        x.push(stats::mean(series));
        x.extend(std::iter::repeat(0.0).take(o.p));
        x.extend(std::iter::repeat(0.0).take(o.q));
        if o.use_frac_d {
            x.push(0.0);
        }
        let alpha0 = if o.a > 0 { 0.05 } else { 0.0 };
        let beta0 = if o.b > 0 { 0.90 } else { 0.60 };
        let persistence: f64 = alpha0 + if o.b > 0 { beta0 } else { 0.0 };
        let persistence = persistence.clamp(0.05, 0.99);
        x.push((var * (1.0 - persistence)).max(1e-12).ln());
        // Invert the simplex map at the target coefficients.
        let s = persistence / (1.0 - persistence);
        for _ in 0..o.a {
            let target = alpha0.max(0.01) / o.a as f64;
            x.push((s * target / persistence).ln());
        }
        for _ in 0..o.b {
            let target = (if o.a > 0 { beta0 } else { 0.60 }).max(0.01) / o.b as f64;
            x.push((s * target / persistence).ln());
        }
        x.push((8.0f64 - 2.0).ln());
        x.push(0.0);
        x
    }
}

/// Optimizer settings for marginal fits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarginalFitCfg {
    pub restarts: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for MarginalFitCfg {
    fn default() -> Self {
        MarginalFitCfg {
            restarts: 3,
            max_iterations: 6000,
            tolerance: 1e-7,
            seed: 1,
        }
    }
}

/// Joint MLE of the full coefficient set for one series.
pub fn fit_marginal(
    series: &[f64],
    order: &MarginalOrder,
    cfg: &MarginalFitCfg,
) -> Result<MarginalFit> {
    order.validate()?;
    if series.len() < 2 + order.p.max(order.q).max(order.a).max(order.b) {
        return Err(Error::Degenerate(format!(
            "series of length {} too short for {}",
            series.len(),
            order.label()
        )));
    }
    let mut warnings = Vec::new();
    if series.len() < 200 {
        warnings.push(format!(
            "series length {} below the recommended minimum 200",
            series.len()
        ));
    }

    let coding = MarginalCoding { order: *order };
    let objective = |x: &[f64]| -> f64 {
        let c = coding.decode(x);
        let ll = log_likelihood(series, &c);
        if ll.is_finite() {
            -ll
        } else {
            f64::INFINITY
        }
    };

    let nm = NelderMead {
        max_iterations: cfg.max_iterations,
        tolerance: cfg.tolerance,
        initial_step: 0.2,
    };
    let x0 = coding.encode_start(series);
    let mut rng = stats::substream_rng(cfg.seed, 0x9a76);
    let mut best: Option<(f64, Vec<f64>, bool)> = None;
    for restart in 0..cfg.restarts.max(1) {
        let mut start = x0.clone();
        if restart > 0 {
            for s in start.iter_mut() {
                *s += 0.2 * (rng.random::<f64>() - 0.5);
            }
        }
        let res = nm.minimize(objective, &start);
        if res.fx.is_finite() {
            let better = best.as_ref().map_or(true, |(fx, _, _)| res.fx < *fx);
            if better {
                best = Some((res.fx, res.x, res.converged));
            }
        }
    }
    let (fx, x, converged) = best.ok_or_else(|| {
        Error::NonConvergence(format!(
            "all {} restarts failed for {}",
            cfg.restarts,
            order.label()
        ))
    })?;

    let c = coding.decode(&x);
    let out = run_filter(series, &c);
    let sigma: Vec<f64> = out.sigma2.iter().map(|s2| s2.sqrt()).collect();
    let z: Vec<f64> = out.eps.iter().zip(&sigma).map(|(e, s)| e / s).collect();
    let loglik = -fx;
    let k = order.n_params() as f64;
    let aic = 2.0 * k - 2.0 * loglik;

    let zm = stats::mean(&z);
    let zs = stats::std_dev(&z);
    if zm.abs() > 0.1 || (zs - 1.0).abs() > 0.1 {
        warnings.push(format!(
            "standardized residuals off target: mean {zm:.3}, sd {zs:.3}"
        ));
    }
    if !converged {
        warnings.push("optimizer reached the iteration limit".into());
    }

    Ok(MarginalFit {
        order: *order,
        mu: c.mu,
        phi: c.phi,
        theta: c.theta,
        d: c.d,
        omega: c.omega,
        alpha: c.alpha,
        beta: c.beta,
        nu: c.nu,
        xi_skew: c.xi,
        loglik,
        aic,
        sigma,
        z,
        converged,
        warnings,
    })
}

/// Fits every order in the grid and picks the minimum-AIC order among
/// those whose standardized residuals pass Ljung-Box and ARCH-LM at 5%;
/// falls back to the overall minimum AIC with a warning when none pass.
pub fn select_order(
    series: &[f64],
    grid: &[MarginalOrder],
    cfg: &MarginalFitCfg,
    diagnostic_lag: usize,
) -> Result<(MarginalOrder, MarginalFit)> {
    if grid.is_empty() {
        return Err(Error::Domain("empty order grid".into()));
    }
    use rayon::prelude::*;
    let fits: Vec<(MarginalOrder, Result<MarginalFit>)> = grid
        .par_iter()
        .map(|order| (*order, fit_marginal(series, order, cfg)))
        .collect();

    let mut passing: Option<(MarginalOrder, MarginalFit)> = None;
    let mut overall: Option<(MarginalOrder, MarginalFit)> = None;
    let mut failures = Vec::new();
    for (order, res) in fits {
        match res {
            Ok(fit) => {
                let lb_ok = crate::ingest::ljung_box(&fit.z, diagnostic_lag)
                    .map(|(_, p)| p > 0.05)
                    .unwrap_or(false);
                let arch_ok = crate::ingest::arch_lm_test(&fit.z, diagnostic_lag)
                    .map(|(_, p)| p > 0.05)
                    .unwrap_or(false);
                if overall.as_ref().map_or(true, |(_, b)| fit.aic < b.aic) {
                    overall = Some((order, fit.clone()));
                }
                if lb_ok && arch_ok && passing.as_ref().map_or(true, |(_, b)| fit.aic < b.aic) {
                    passing = Some((order, fit));
                }
            }
            Err(e) => failures.push(format!("{}: {e}", order.label())),
        }
    }
    if let Some(found) = passing {
        return Ok(found);
    }
    match overall {
        Some((order, mut fit)) => {
            fit.warnings
                .push("no grid order passed residual diagnostics at 5%; using minimum AIC".into());
            Ok((order, fit))
        }
        None => Err(Error::NonConvergence(format!(
            "every order in the grid failed: [{}]",
            failures.join("; ")
        ))),
    }
}

/// Probability integral transform of the fitted standardized residuals.
/// Outputs are clamped to [1e-10, 1 - 1e-10].
pub fn pit(fit: &MarginalFit, mode: PitMode) -> Vec<f64> {
    const LO: f64 = 1e-10;
    match mode {
        PitMode::Parametric => {
            let skew_t = SkewT::new(fit.nu, fit.xi_skew).expect("fitted parameters are valid");
            fit.z
                .iter()
                .map(|&z| skew_t.cdf(z).clamp(LO, 1.0 - LO))
                .collect()
        }
        PitMode::Empirical => {
            let n = fit.z.len();
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&i, &j| fit.z[i].partial_cmp(&fit.z[j]).unwrap());
            let mut u = vec![0.0; n];
            for (rank, &i) in idx.iter().enumerate() {
                u[i] = ((rank + 1) as f64 / (n + 1) as f64).clamp(LO, 1.0 - LO);
            }
            u
        }
    }
}

/// Inverse PIT output; `clamped` counts empirical-mode inputs outside
/// the interpolation hull that were pinned to the extreme residuals.
#[derive(Debug, Clone)]
pub struct InversePit {
    pub values: Vec<f64>,
    pub clamped: usize,
}

/// Maps uniforms back to standardized residuals: the parametric skew-t
/// quantile, or linear interpolation of the empirical quantile function
/// of the fitted residuals.
pub fn inverse_pit(u: &[f64], fit: &MarginalFit, mode: PitMode) -> Result<InversePit> {
    if let Some(&bad) = u.iter().find(|&&x| !(x > 0.0 && x < 1.0)) {
        return Err(Error::Domain(format!("uniform value {bad} outside (0,1)")));
    }
    match mode {
        PitMode::Parametric => {
            let skew_t = SkewT::new(fit.nu, fit.xi_skew)?;
            let values = u
                .iter()
                .map(|&p| skew_t.quantile(p))
                .collect::<Result<Vec<f64>>>()?;
            Ok(InversePit { values, clamped: 0 })
        }
        PitMode::Empirical => {
            let n = fit.z.len();
            if n == 0 {
                return Err(Error::Degenerate("empty residual path".into()));
            }
            let mut sorted = fit.z.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let np1 = (n + 1) as f64;
            let mut clamped = 0usize;
            let values = u
                .iter()
                .map(|&p| {
                    let pos = p * np1; // rank position in [0, n+1]
                    if pos <= 1.0 {
                        if pos < 1.0 {
                            clamped += 1;
                        }
                        sorted[0]
                    } else if pos >= n as f64 {
                        if pos > n as f64 {
                            clamped += 1;
                        }
                        sorted[n - 1]
                    } else {
                        let k = pos.floor() as usize; // 1-based lower knot
                        let frac = pos - k as f64;
                        sorted[k - 1] + frac * (sorted[k] - sorted[k - 1])
                    }
                })
                .collect();
            Ok(InversePit { values, clamped })
        }
    }
}

/// One-step-ahead conditional mean and volatility implied by the fitted
/// model and the observed history.
pub fn one_step_forecast(fit: &MarginalFit, history: &[f64]) -> Result<(f64, f64)> {
    let o = &fit.order;
    let need = o.p.max(o.q).max(o.a).max(o.b).max(1);
    if history.len() < need {
        return Err(Error::Degenerate(format!(
            "history of length {} shorter than the required window {need}",
            history.len()
        )));
    }
    let c = Coefficients {
        mu: fit.mu,
        phi: fit.phi.clone(),
        theta: fit.theta.clone(),
        d: fit.d,
        omega: fit.omega,
        alpha: fit.alpha.clone(),
        beta: fit.beta.clone(),
        nu: fit.nu,
        xi: fit.xi_skew,
    };
    let out = run_filter(history, &c);
    let t = history.len(); // forecast index

    // Mean-equation prediction in fractionally differenced space.
    let mut y_hat = 0.0;
    for (i, &phi) in c.phi.iter().enumerate() {
        y_hat += phi * out.y[t - i - 1];
    }
    for (j, &theta) in c.theta.iter().enumerate() {
        y_hat += theta * out.eps[t - j - 1];
    }
    // Invert the fractional difference: w_t = y_t - Σ_{k>=1} π_k w_{t-k}.
    let mut mean = fit.mu + y_hat;
    if c.d != 0.0 {
        let k_max = t.min(FRAC_DIFF_TRUNCATION);
        let w = frac_diff_weights(c.d, k_max);
        for k in 1..=k_max {
            mean -= w[k] * (history[t - k] - fit.mu);
        }
    }

    let mut s2 = c.omega;
    for (i, &alpha) in c.alpha.iter().enumerate() {
        s2 += alpha * out.eps[t - i - 1] * out.eps[t - i - 1];
    }
    for (j, &beta) in c.beta.iter().enumerate() {
        s2 += beta * out.sigma2[t - j - 1];
    }
    Ok((mean, s2.max(1e-12).sqrt()))
}

/// Turns simulated standardized residuals into indicator values:
/// `Lr_t = m_t + σ_t·z` with `(m_t, σ_t)` from [`one_step_forecast`].
pub fn reconstruct_returns(
    fit: &MarginalFit,
    simulated_z: &[f64],
    history: &[f64],
) -> Result<Vec<f64>> {
    let (mean, sigma) = one_step_forecast(fit, history)?;
    Ok(simulated_z.iter().map(|&z| mean + sigma * z).collect())
}

/// Serializable archive of fitted marginals plus the PIT mode used for
/// the copula stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarginalArtifact {
    pub format_version: u32,
    pub names: Vec<String>,
    pub fits: Vec<MarginalFit>,
    pub pit_mode: PitMode,
}

pub const MARGINAL_FORMAT_VERSION: u32 = 1;

impl MarginalArtifact {
    pub fn new(names: Vec<String>, fits: Vec<MarginalFit>, pit_mode: PitMode) -> Self {
        MarginalArtifact {
            format_version: MARGINAL_FORMAT_VERSION,
            names,
            fits,
            pit_mode,
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let artifact: MarginalArtifact = serde_json::from_str(&text)?;
        if artifact.format_version != MARGINAL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "marginal artifact version {} != supported {}",
                artifact.format_version, MARGINAL_FORMAT_VERSION
            )));
        }
        Ok(artifact)
    }

    /// Uniform pseudo-observation panel for the copula stage.
    pub fn uniform_panel(&self) -> UniformPanel {
        UniformPanel {
            names: self.names.clone(),
            columns: self
                .fits
                .iter()
                .map(|fit| pit(fit, self.pit_mode))
                .collect(),
            mode: self.pit_mode,
        }
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use crate::stats;
    use rand_distr::Distribution;

    /// GARCH(1,1) series with standardized symmetric t innovations.
    pub(crate) fn simulate_garch_t(
        n: usize,
        omega: f64,
        alpha: f64,
        beta: f64,
        nu: f64,
        seed: u64,
    ) -> Vec<f64> {
        let mut rng = stats::substream_rng(seed, 0xabc);
        let t_dist = rand_distr::StudentT::new(nu).unwrap();
        let scale = ((nu - 2.0) / nu).sqrt();
        let mut s2 = omega / (1.0 - alpha - beta);
        let mut eps_prev = 0.0;
        let mut out = Vec::with_capacity(n);
        for t in 0..n + 200 {
            if t > 0 {
                s2 = omega + alpha * eps_prev * eps_prev + beta * s2;
            }
            let z: f64 = t_dist.sample(&mut rng) * scale;
            let eps = s2.sqrt() * z;
            eps_prev = eps;
            if t >= 200 {
                out.push(eps);
            }
        }
        out
    }
}
