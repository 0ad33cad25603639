//! Static bivariate copula primitives.
//!
//! Four families are supported: Gaussian, Student-t, Gumbel and the
//! 180°-rotated (survival) Gumbel for lower-tail dependence. Each family
//! exposes the log-density, the conditional distribution (h-function)
//! `F(x|v) = ∂C(x,v)/∂v`, its inverse, and a finite-difference score in
//! the dependence parameter. Kendall's tau and its inverse moment maps
//! round out the surface needed for structure selection and starting
//! values.
//!
//! Arguments are clamped to `[EPS, 1-EPS]` at the module boundary so
//! that quantile transforms never see exact 0 or 1.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Interior clamp applied to copula arguments.
pub const EPS: f64 = 1e-10;

/// Copula family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Gaussian,
    StudentT,
    Gumbel,
    /// Survival Gumbel: density c(1-u, 1-v; θ) of the Gumbel family,
    /// capturing lower-tail dependence.
    RotGumbel180,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Gaussian,
        Family::StudentT,
        Family::Gumbel,
        Family::RotGumbel180,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::StudentT => "studentt",
            Family::Gumbel => "gumbel",
            Family::RotGumbel180 => "rotgumbel",
        }
    }

    pub fn parse(s: &str) -> Result<Family> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Family::Gaussian),
            "studentt" | "t" | "student" => Ok(Family::StudentT),
            "gumbel" => Ok(Family::Gumbel),
            "rotgumbel" | "rotgumbel180" | "survivalgumbel" => Ok(Family::RotGumbel180),
            other => Err(Error::Domain(format!("unknown copula family `{other}`"))),
        }
    }

    /// Lower bound of the dependence parameter's natural domain.
    pub fn theta_lower(&self) -> f64 {
        match self {
            Family::Gaussian | Family::StudentT => -1.0,
            Family::Gumbel | Family::RotGumbel180 => 1.0,
        }
    }
}

/// Dependence parameter in natural space. `nu` is present only for the
/// Student-t family (static tail parameter, > 2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaParam {
    pub theta: f64,
    pub nu: Option<f64>,
}

impl CopulaParam {
    pub fn new(theta: f64) -> Self {
        CopulaParam { theta, nu: None }
    }

    pub fn with_nu(theta: f64, nu: f64) -> Self {
        CopulaParam {
            theta,
            nu: Some(nu),
        }
    }

    fn validate(&self, family: Family) -> Result<()> {
        match family {
            Family::Gaussian => {
                if !(self.theta > -1.0 && self.theta < 1.0) {
                    return Err(Error::Domain(format!(
                        "gaussian rho {} outside (-1,1)",
                        self.theta
                    )));
                }
            }
            Family::StudentT => {
                if !(self.theta > -1.0 && self.theta < 1.0) {
                    return Err(Error::Domain(format!(
                        "student-t rho {} outside (-1,1)",
                        self.theta
                    )));
                }
                match self.nu {
                    Some(nu) if nu > 2.0 => {}
                    Some(nu) => {
                        return Err(Error::Domain(format!("student-t nu {nu} must exceed 2")))
                    }
                    None => return Err(Error::Domain("student-t requires a nu parameter".into())),
                }
            }
            Family::Gumbel | Family::RotGumbel180 => {
                if !(self.theta >= 1.0) {
                    return Err(Error::Domain(format!(
                        "gumbel theta {} below 1",
                        self.theta
                    )));
                }
            }
        }
        Ok(())
    }
}

fn clamp_unit(u: f64) -> f64 {
    u.clamp(EPS, 1.0 - EPS)
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).unwrap()
}

fn student_t(nu: f64) -> StudentsT {
    StudentsT::new(0.0, 1.0, nu).unwrap()
}

fn gaussian_kernel(rho: f64, x: f64, y: f64) -> f64 {
    let r2 = 1.0 - rho * rho;
    -0.5 * r2.ln() - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * r2)
}

fn student_ln_const(nu: f64) -> f64 {
    ln_gamma((nu + 2.0) / 2.0) + ln_gamma(nu / 2.0) - 2.0 * ln_gamma((nu + 1.0) / 2.0)
}

fn student_kernel(rho: f64, nu: f64, ln_const: f64, x: f64, y: f64) -> f64 {
    let r2 = 1.0 - rho * rho;
    let quad = (x * x - 2.0 * rho * x * y + y * y) / (nu * r2);
    ln_const - 0.5 * r2.ln() - (nu + 2.0) / 2.0 * (1.0 + quad).ln()
        + (nu + 1.0) / 2.0 * ((1.0 + x * x / nu).ln() + (1.0 + y * y / nu).ln())
}

/// ln c(u, v; θ) for the given family.
pub fn log_density(family: Family, param: &CopulaParam, u: f64, v: f64) -> Result<f64> {
    param.validate(family)?;
    let u = clamp_unit(u);
    let v = clamp_unit(v);
    Ok(match family {
        Family::Gaussian => {
            let n = std_normal();
            gaussian_kernel(param.theta, n.inverse_cdf(u), n.inverse_cdf(v))
        }
        Family::StudentT => {
            let nu = param.nu.unwrap();
            let t = student_t(nu);
            student_kernel(
                param.theta,
                nu,
                student_ln_const(nu),
                t.inverse_cdf(u),
                t.inverse_cdf(v),
            )
        }
        Family::Gumbel => gumbel_log_density(param.theta, u, v),
        Family::RotGumbel180 => gumbel_log_density(param.theta, 1.0 - u, 1.0 - v),
    })
}

/// Per-observation transforms reused across repeated density and score
/// evaluations at different dependence parameters: quantiles for the
/// elliptical families, positive logs for the Gumbel families.
pub(crate) struct PreparedColumns {
    family: Family,
    nu: Option<f64>,
    ln_const: f64,
    a: Vec<f64>,
    b: Vec<f64>,
}

pub(crate) fn prepare_columns(
    family: Family,
    nu: Option<f64>,
    u: &[f64],
    v: &[f64],
) -> Result<PreparedColumns> {
    let transform: Box<dyn Fn(f64) -> f64> = match family {
        Family::Gaussian => {
            let n = std_normal();
            Box::new(move |u: f64| n.inverse_cdf(clamp_unit(u)))
        }
        Family::StudentT => {
            let nu = nu.ok_or_else(|| Error::Domain("student-t requires a nu parameter".into()))?;
            if !(nu > 2.0) {
                return Err(Error::Domain(format!("student-t nu {nu} must exceed 2")));
            }
            let t = student_t(nu);
            Box::new(move |u: f64| t.inverse_cdf(clamp_unit(u)))
        }
        Family::Gumbel => Box::new(|u: f64| -clamp_unit(u).ln()),
        Family::RotGumbel180 => Box::new(|u: f64| -(1.0 - clamp_unit(u)).ln()),
    };
    let ln_const = match family {
        Family::StudentT => student_ln_const(nu.unwrap()),
        _ => 0.0,
    };
    Ok(PreparedColumns {
        family,
        nu,
        ln_const,
        a: u.iter().map(|&x| transform(x)).collect(),
        b: v.iter().map(|&x| transform(x)).collect(),
    })
}

impl PreparedColumns {
    pub(crate) fn len(&self) -> usize {
        self.a.len()
    }

    /// ln c at observation `t`; bit-identical to [`log_density`] on the
    /// original arguments.
    pub(crate) fn log_density_at(&self, theta: f64, t: usize) -> f64 {
        match self.family {
            Family::Gaussian => gaussian_kernel(theta, self.a[t], self.b[t]),
            Family::StudentT => {
                student_kernel(theta, self.nu.unwrap(), self.ln_const, self.a[t], self.b[t])
            }
            Family::Gumbel | Family::RotGumbel180 => gumbel_kernel(theta, self.a[t], self.b[t]),
        }
    }

    /// Natural-space finite-difference score at observation `t`, with
    /// the same step and boundary rules as [`score`].
    pub(crate) fn score_at(&self, theta: f64, t: usize) -> Result<f64> {
        let s = fd_derivative(self.family, theta, |th| self.log_density_at(th, t));
        if !s.is_finite() {
            return Err(Error::Domain(format!(
                "non-finite score at theta={theta}, t={t}"
            )));
        }
        Ok(s)
    }
}

/// Central finite difference with step h = max(1e-6, 1e-6·|θ|),
/// one-sided within 2h of the family's domain boundary.
fn fd_derivative(family: Family, theta: f64, eval: impl Fn(f64) -> f64) -> f64 {
    let h = (1e-6f64).max(1e-6 * theta.abs());
    let lower = family.theta_lower();
    let upper = match family {
        Family::Gaussian | Family::StudentT => 1.0,
        _ => f64::INFINITY,
    };
    if theta - lower < 2.0 * h {
        (eval(theta + h) - eval(theta)) / h
    } else if upper - theta < 2.0 * h {
        (eval(theta) - eval(theta - h)) / h
    } else {
        (eval(theta + h) - eval(theta - h)) / (2.0 * h)
    }
}

/// ln(a^θ + b^θ) computed in log space so large θ cannot overflow or
/// underflow the intermediate powers.
fn gumbel_ln_s(theta: f64, ln_lx: f64, ln_ly: f64) -> f64 {
    let (hi, lo) = if ln_lx >= ln_ly {
        (theta * ln_lx, theta * ln_ly)
    } else {
        (theta * ln_ly, theta * ln_lx)
    };
    hi + (lo - hi).exp().ln_1p()
}

/// Gumbel log-density from the positive logs lx = -ln u, ly = -ln v.
fn gumbel_kernel(theta: f64, lx: f64, ly: f64) -> f64 {
    let ln_s = gumbel_ln_s(theta, lx.ln(), ly.ln());
    let s_pow = (ln_s / theta).exp();
    -s_pow
        + (theta - 1.0) * (lx.ln() + ly.ln())
        + (1.0 / theta - 2.0) * ln_s
        + (s_pow + theta - 1.0).ln()
        + lx
        + ly
}

fn gumbel_log_density(theta: f64, u: f64, v: f64) -> f64 {
    gumbel_kernel(theta, -u.ln(), -v.ln())
}

/// Conditional distribution h(x | v) = ∂C(x, v)/∂v, strictly increasing
/// in `x` for fixed `v`.
pub fn h_function(family: Family, param: &CopulaParam, x: f64, v: f64) -> Result<f64> {
    param.validate(family)?;
    let x = clamp_unit(x);
    let v = clamp_unit(v);
    let h = match family {
        Family::Gaussian => {
            let rho = param.theta;
            let n = std_normal();
            let a = n.inverse_cdf(x);
            let b = n.inverse_cdf(v);
            n.cdf((a - rho * b) / (1.0 - rho * rho).sqrt())
        }
        Family::StudentT => {
            let rho = param.theta;
            let nu = param.nu.unwrap();
            let t = student_t(nu);
            let a = t.inverse_cdf(x);
            let b = t.inverse_cdf(v);
            let scale = ((nu + b * b) * (1.0 - rho * rho) / (nu + 1.0)).sqrt();
            student_t(nu + 1.0).cdf((a - rho * b) / scale)
        }
        Family::Gumbel => gumbel_h(param.theta, x, v),
        Family::RotGumbel180 => 1.0 - gumbel_h(param.theta, 1.0 - x, 1.0 - v),
    };
    Ok(h.clamp(EPS, 1.0 - EPS))
}

fn gumbel_h(theta: f64, x: f64, v: f64) -> f64 {
    // h(x|v) = C(x,v) * S^(1/θ-1) * (-ln v)^(θ-1) / v
    let lx = -x.ln();
    let lv = -v.ln();
    let ln_s = gumbel_ln_s(theta, lx.ln(), lv.ln());
    let s_pow = (ln_s / theta).exp();
    let ln_h = -s_pow + (1.0 / theta - 1.0) * ln_s + (theta - 1.0) * lv.ln() + lv;
    ln_h.exp()
}

/// Inverse of the h-function in its first argument: the x with
/// h(x | v) = w. Closed form for Gaussian and Student-t; bracketed
/// bisection with a Newton polish for the Gumbel families.
pub fn h_inverse(family: Family, param: &CopulaParam, w: f64, v: f64) -> Result<f64> {
    param.validate(family)?;
    let w = clamp_unit(w);
    let v = clamp_unit(v);
    let x = match family {
        Family::Gaussian => {
            let rho = param.theta;
            let n = std_normal();
            let a = n.inverse_cdf(w);
            let b = n.inverse_cdf(v);
            n.cdf(a * (1.0 - rho * rho).sqrt() + rho * b)
        }
        Family::StudentT => {
            let rho = param.theta;
            let nu = param.nu.unwrap();
            let t = student_t(nu);
            let b = t.inverse_cdf(v);
            let scale = ((nu + b * b) * (1.0 - rho * rho) / (nu + 1.0)).sqrt();
            let a = student_t(nu + 1.0).inverse_cdf(w);
            t.cdf(a * scale + rho * b)
        }
        Family::Gumbel => gumbel_h_inverse(param.theta, w, v)?,
        Family::RotGumbel180 => 1.0 - gumbel_h_inverse(param.theta, 1.0 - w, 1.0 - v)?,
    };
    Ok(x.clamp(EPS, 1.0 - EPS))
}

fn gumbel_h_inverse(theta: f64, w: f64, v: f64) -> Result<f64> {
    let mut lo = EPS;
    let mut hi = 1.0 - EPS;
    let f = |x: f64| gumbel_h(theta, x, v) - w;
    let flo = f(lo);
    let fhi = f(hi);
    if flo >= 0.0 {
        return Ok(lo);
    }
    if fhi <= 0.0 {
        return Ok(hi);
    }
    let mut x = 0.5 * (lo + hi);
    let mut iterations = 0usize;
    // Bisect to a narrow bracket, then polish with Newton using the
    // density as the derivative of h in x.
    while hi - lo > 1e-6 {
        iterations += 1;
        if iterations > 200 {
            return Err(Error::RootFinding(format!(
                "gumbel h-inverse bisection stalled at theta={theta}, w={w}, v={v}"
            )));
        }
        x = 0.5 * (lo + hi);
        if f(x) < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
    }
    for _ in 0..30 {
        let fx = f(x);
        if fx.abs() < 1e-13 {
            return Ok(x);
        }
        let deriv = gumbel_log_density(theta, x, v).exp();
        if !deriv.is_finite() || deriv <= 0.0 {
            break;
        }
        let step = fx / deriv;
        let candidate = x - step;
        if candidate <= lo || candidate >= hi {
            // Newton left the bracket; fall back to bisection.
            if fx < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            x = 0.5 * (lo + hi);
        } else {
            if fx < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            x = candidate;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(x)
}

/// Finite-difference score ∂ ln c(u,v;θ)/∂θ in natural parameter space.
/// Central differences with step h = max(1e-6, 1e-6·|θ|); one-sided when
/// θ sits within 2h of the domain boundary.
pub fn score(family: Family, param: &CopulaParam, u: f64, v: f64) -> Result<f64> {
    param.validate(family)?;
    let prep = prepare_columns(family, param.nu, &[u], &[v])?;
    prep.score_at(param.theta, 0).map_err(|_| {
        Error::Domain(format!(
            "non-finite score at theta={}, u={u}, v={v}",
            param.theta
        ))
    })
}

/// Kendall's tau-b with tie correction, computed in O(n log n) by
/// merge-sort inversion counting (Knight's algorithm).
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "kendall_tau length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::Degenerate(
            "kendall_tau needs at least 2 points".into(),
        ));
    }

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| {
        x[i].partial_cmp(&x[j])
            .unwrap()
            .then(y[i].partial_cmp(&y[j]).unwrap())
    });

    let n0 = n as i64 * (n as i64 - 1) / 2;

    // Pairs tied on x, and tied on both.
    let mut n1: i64 = 0;
    let mut n3: i64 = 0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && x[idx[j]] == x[idx[i]] {
            j += 1;
        }
        let t = (j - i) as i64;
        n1 += t * (t - 1) / 2;
        let mut k = i;
        while k < j {
            let mut m = k + 1;
            while m < j && y[idx[m]] == y[idx[k]] {
                m += 1;
            }
            let b = (m - k) as i64;
            n3 += b * (b - 1) / 2;
            k = m;
        }
        i = j;
    }

    // Pairs tied on y.
    let mut ys: Vec<f64> = y.to_vec();
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut n2: i64 = 0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && ys[j] == ys[i] {
            j += 1;
        }
        let t = (j - i) as i64;
        n2 += t * (t - 1) / 2;
        i = j;
    }

    let denom = ((n0 - n1) as f64) * ((n0 - n2) as f64);
    if denom <= 0.0 {
        return Err(Error::Degenerate("kendall_tau on fully tied input".into()));
    }

    // Count swaps needed to sort the y-sequence (discordance measure).
    let mut seq: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut seq, &mut buf, 0, n);

    let concordant_minus_discordant = n0 - n1 - n2 + n3 - 2 * swaps;
    Ok(concordant_minus_discordant as f64 / denom.sqrt())
}

/// Quadratic-time tau-b, kept as an independent oracle for tests.
pub fn kendall_tau_brute(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Dimension("kendall_tau_brute invalid input".into()));
    }
    let n = x.len();
    let n0 = n as i64 * (n as i64 - 1) / 2;
    let mut concordant: i64 = 0;
    let mut discordant: i64 = 0;
    let mut tied_x: i64 = 0;
    let mut tied_y: i64 = 0;
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 {
                tied_x += 1;
            }
            if dy == 0.0 {
                tied_y += 1;
            }
            if dx == 0.0 || dy == 0.0 {
                continue;
            }
            if (dx > 0.0) == (dy > 0.0) {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let denom = ((n0 - tied_x) as f64) * ((n0 - tied_y) as f64);
    if denom <= 0.0 {
        return Err(Error::Degenerate("kendall_tau on fully tied input".into()));
    }
    Ok((concordant - discordant) as f64 / denom.sqrt())
}

fn merge_count(seq: &mut [f64], buf: &mut [f64], lo: usize, hi: usize) -> i64 {
    if hi - lo < 2 {
        return 0;
    }
    let mid = (lo + hi) / 2;
    let mut swaps = merge_count(seq, buf, lo, mid) + merge_count(seq, buf, mid, hi);
    let (mut i, mut j, mut k) = (lo, mid, lo);
    while i < mid && j < hi {
        if seq[j] < seq[i] {
            buf[k] = seq[j];
            swaps += (mid - i) as i64;
            j += 1;
        } else {
            buf[k] = seq[i];
            i += 1;
        }
        k += 1;
    }
    while i < mid {
        buf[k] = seq[i];
        i += 1;
        k += 1;
    }
    while j < hi {
        buf[k] = seq[j];
        j += 1;
        k += 1;
    }
    seq[lo..hi].copy_from_slice(&buf[lo..hi]);
    swaps
}

/// Moment map from Kendall's tau to a starting parameter. Gaussian and
/// Student-t use ρ = sin(πτ/2); Gumbel uses θ = 1/(1-τ) and rejects
/// negative association (use the rotated family there); the rotated
/// Gumbel uses θ = 1/(1-|τ|). The Student-t tail parameter is seeded at
/// ν = 8.
pub fn tau_to_param(family: Family, tau: f64) -> Result<CopulaParam> {
    if !(tau.abs() < 1.0) {
        return Err(Error::Domain(format!("tau {tau} outside (-1,1)")));
    }
    match family {
        Family::Gaussian => Ok(CopulaParam::new((std::f64::consts::PI * tau / 2.0).sin())),
        Family::StudentT => Ok(CopulaParam::with_nu(
            (std::f64::consts::PI * tau / 2.0).sin(),
            8.0,
        )),
        Family::Gumbel => {
            if tau < 0.0 {
                return Err(Error::Domain(format!(
                    "gumbel cannot represent negative tau {tau}"
                )));
            }
            Ok(CopulaParam::new(1.0 / (1.0 - tau)))
        }
        Family::RotGumbel180 => Ok(CopulaParam::new(1.0 / (1.0 - tau.abs()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn grid9() -> Vec<f64> {
        (1..=9).map(|i| i as f64 / 10.0).collect()
    }

    fn test_params(family: Family) -> Vec<CopulaParam> {
        match family {
            Family::Gaussian => [-0.9, -0.5, 0.0, 0.5, 0.9]
                .iter()
                .map(|&r| CopulaParam::new(r))
                .collect(),
            Family::StudentT => [-0.9, -0.5, 0.0, 0.5, 0.9]
                .iter()
                .map(|&r| CopulaParam::with_nu(r, 5.0))
                .collect(),
            Family::Gumbel | Family::RotGumbel180 => [1.0, 1.33, 1.67, 2.0, 3.0]
                .iter()
                .map(|&t| CopulaParam::new(t))
                .collect(),
        }
    }

    #[test]
    fn gaussian_independence_density_is_one() {
        let p = CopulaParam::new(0.0);
        for &u in &grid9() {
            for &v in &grid9() {
                assert!(log_density(Family::Gaussian, &p, u, v).unwrap().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gumbel_theta_one_is_independence() {
        let p = CopulaParam::new(1.0);
        for &u in &grid9() {
            for &v in &grid9() {
                assert!(log_density(Family::Gumbel, &p, u, v).unwrap().abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gaussian_density_at_median() {
        // ln(1/sqrt(1-0.25)) at rho = 0.5 and u = v = 0.5.
        let p = CopulaParam::new(0.5);
        let ld = log_density(Family::Gaussian, &p, 0.5, 0.5).unwrap();
        assert!((ld - 0.5f64.mul_add(0.0, -0.5 * (0.75f64).ln())).abs() < 1e-6);
        assert!((ld - 0.143841).abs() < 1e-5);
    }

    #[test]
    fn h_function_independence_is_identity() {
        let p = CopulaParam::new(0.0);
        for &x in &grid9() {
            for &v in &grid9() {
                assert!((h_function(Family::Gaussian, &p, x, v).unwrap() - x).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn gaussian_h_at_median_is_half() {
        let p = CopulaParam::new(0.5);
        assert!((h_function(Family::Gaussian, &p, 0.5, 0.5).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gumbel_h_matches_central_difference_of_cdf() {
        // Numerical-derivative oracle on the Gumbel CDF at theta = 2.
        let theta = 2.0;
        let cdf = |u: f64, v: f64| {
            let s = (-u.ln()).powf(theta) + (-v.ln()).powf(theta);
            (-s.powf(1.0 / theta)).exp()
        };
        let (x, v) = (0.3, 0.7);
        let dv = 1e-6;
        let numeric = (cdf(x, v + dv) - cdf(x, v - dv)) / (2.0 * dv);
        let h = h_function(Family::Gumbel, &CopulaParam::new(theta), x, v).unwrap();
        assert!((h - numeric).abs() < 1e-5);
    }

    #[test]
    fn h_inverse_round_trip_all_families() {
        for family in Family::ALL {
            for p in test_params(family) {
                for &x in &grid9() {
                    for &v in &grid9() {
                        let w = h_function(family, &p, x, v).unwrap();
                        let back = h_inverse(family, &p, w, v).unwrap();
                        assert!(
                            (back - x).abs() < 1e-8,
                            "{family:?} theta={} x={x} v={v}: got {back}",
                            p.theta
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn gaussian_h_inverse_closed_form() {
        let rho: f64 = 0.5;
        let p = CopulaParam::new(rho);
        let n = Normal::new(0.0, 1.0).unwrap();
        for &w in &grid9() {
            for &v in &grid9() {
                let expected =
                    n.cdf(n.inverse_cdf(w) * (1.0 - rho * rho).sqrt() + rho * n.inverse_cdf(v));
                let got = h_inverse(Family::Gaussian, &p, w, v).unwrap();
                assert!((got - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn score_zero_at_gaussian_independence_median() {
        let p = CopulaParam::new(0.0);
        assert!(score(Family::Gaussian, &p, 0.5, 0.5).unwrap().abs() < 1e-6);
    }

    #[test]
    fn score_at_gumbel_boundary_is_finite() {
        let p = CopulaParam::new(1.0);
        let s = score(Family::Gumbel, &p, 0.3, 0.6).unwrap();
        assert!(s.is_finite());
    }

    #[test]
    fn rotated_gumbel_identity_exact() {
        let p = CopulaParam::new(2.5);
        for &u in &grid9() {
            for &v in &grid9() {
                let rot = log_density(Family::RotGumbel180, &p, u, v).unwrap();
                let gum = log_density(Family::Gumbel, &p, 1.0 - u, 1.0 - v).unwrap();
                assert_eq!(rot, gum);
            }
        }
    }

    #[test]
    fn density_exchangeable_in_arguments() {
        for family in Family::ALL {
            for p in test_params(family) {
                for &u in &[0.18, 0.52, 0.83] {
                    for &v in &[0.07, 0.44, 0.91] {
                        let a = log_density(family, &p, u, v).unwrap();
                        let b = log_density(family, &p, v, u).unwrap();
                        assert!((a - b).abs() < 1e-11, "{family:?} {u} {v}");
                    }
                }
            }
        }
    }

    #[test]
    fn kendall_tau_perfect_concordance_and_discordance() {
        let x = [1.0, 2.0, 3.0];
        assert!((kendall_tau(&x, &[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((kendall_tau(&x, &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn kendall_tau_rejects_fully_tied() {
        assert!(kendall_tau(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn kendall_tau_matches_brute_force_with_ties() {
        let mut rng = crate::stats::substream_rng(99, 0);
        for _ in 0..10 {
            let x: Vec<f64> = (0..200)
                .map(|_| (rng.random::<f64>() * 7.0).floor())
                .collect();
            let y: Vec<f64> = (0..200)
                .map(|_| (rng.random::<f64>() * 7.0).floor())
                .collect();
            let fast = kendall_tau(&x, &y).unwrap();
            let slow = kendall_tau_brute(&x, &y).unwrap();
            assert_eq!(fast, slow);
        }
    }

    #[test]
    fn tau_maps_match_known_relations() {
        let g = tau_to_param(Family::Gaussian, 0.5).unwrap();
        assert!((g.theta - (std::f64::consts::PI / 4.0).sin()).abs() < 1e-12);
        let gum = tau_to_param(Family::Gumbel, 0.5).unwrap();
        assert!((gum.theta - 2.0).abs() < 1e-12);
        let rot = tau_to_param(Family::RotGumbel180, -0.5).unwrap();
        assert!((rot.theta - 2.0).abs() < 1e-12);
        assert!(tau_to_param(Family::Gumbel, -0.2).is_err());
        assert!((tau_to_param(Family::Gaussian, 0.0).unwrap().theta).abs() < 1e-15);
    }

    #[test]
    fn h_function_strictly_increasing_in_x() {
        for family in Family::ALL {
            for p in test_params(family) {
                for &v in &[0.2, 0.5, 0.8] {
                    let mut prev = 0.0;
                    for i in 1..40 {
                        let x = i as f64 / 40.0;
                        let h = h_function(family, &p, x, v).unwrap();
                        assert!(h > prev, "{family:?} theta={} v={v} x={x}", p.theta);
                        prev = h;
                    }
                }
            }
        }
    }
}
