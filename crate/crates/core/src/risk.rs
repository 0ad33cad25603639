//! Portfolio aggregation, Monte Carlo Value-at-Risk, Kupiec
//! proportion-of-failures backtesting and report emission.
//!
//! The backtest walks the last `window` dates of the indicator panel.
//! At each date it draws joint uniforms from the fitted vine with the
//! parameters filtered on data through the previous date, maps the
//! uniforms to standardized residuals (inverse PIT), reconstructs
//! indicator values through the marginal model, aggregates them with the
//! portfolio weights and reads the VaR off the upper order statistic.
//! An exceedance is a date whose realized portfolio value is strictly
//! greater than the forecast VaR.

use chrono::NaiveDate;
use rayon::prelude::*;
use statrs::distribution::ContinuousCDF;

use crate::error::{Error, Result};
use crate::ingest::IndicatorPanel;
use crate::marginals::{self, MarginalFit};
use crate::stats;
use crate::vine::{self, FittedTVVine};

/// Non-negative portfolio weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Dimension("empty weight vector".into()));
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::Domain("weights must be non-negative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("weights sum to {sum}, not 1")));
        }
        Ok(WeightVector(weights))
    }

    pub fn equal(n: usize) -> Self {
        WeightVector(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// GDP-share weights: w_i = g_i / Σ g_j.
pub fn gdp_weights(gdp_totals: &[f64]) -> Result<WeightVector> {
    if gdp_totals.is_empty() {
        return Err(Error::Dimension("empty gdp vector".into()));
    }
    if let Some(&bad) = gdp_totals.iter().find(|&&g| !(g > 0.0)) {
        return Err(Error::Domain(format!("non-positive gdp entry {bad}")));
    }
    let total: f64 = gdp_totals.iter().sum();
    let mut weights: Vec<f64> = gdp_totals.iter().map(|g| g / total).collect();
    // Force the exact-sum invariant against rounding.
    let correction: f64 = 1.0 - weights.iter().sum::<f64>();
    if let Some(last) = weights.last_mut() {
        *last += correction;
    }
    WeightVector::new(weights)
}

/// Weighted sum across series, per draw.
pub fn portfolio_aggregate(
    draws_per_series: &[Vec<f64>],
    weights: &WeightVector,
) -> Result<Vec<f64>> {
    if draws_per_series.len() != weights.len() {
        return Err(Error::Dimension(format!(
            "{} series vs {} weights",
            draws_per_series.len(),
            weights.len()
        )));
    }
    let n_draws = draws_per_series
        .first()
        .map(|d| d.len())
        .ok_or_else(|| Error::Dimension("no series".into()))?;
    if draws_per_series.iter().any(|d| d.len() != n_draws) {
        return Err(Error::Dimension("unequal draw counts across series".into()));
    }
    let w = weights.as_slice();
    Ok((0..n_draws)
        .map(|k| {
            draws_per_series
                .iter()
                .zip(w)
                .map(|(d, wi)| wi * d[k])
                .sum()
        })
        .collect())
}

/// Upper-tail order statistic: sort ascending and return the element at
/// 1-based index ⌈alpha · M⌉.
pub fn var_quantile(draws: &[f64], alpha: f64) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::Degenerate("empty draw set".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha {alpha} outside (0,1)")));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = sorted.len();
    let rank = (alpha * m as f64).ceil() as usize;
    let rank = rank.clamp(1, m);
    Ok(sorted[rank - 1])
}

/// One VaR backtest track at a fixed confidence level.
#[derive(Debug, Clone, PartialEq)]
pub struct VaRSeries {
    pub alpha: f64,
    pub dates: Vec<NaiveDate>,
    pub var: Vec<f64>,
    pub realized: Vec<f64>,
    pub exceed: Vec<bool>,
}

impl VaRSeries {
    pub fn exceedances(&self) -> usize {
        self.exceed.iter().filter(|&&e| e).count()
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }
}

/// Kupiec proportion-of-failures test. The likelihood ratio compares the
/// nominal failure probability p = 1 - alpha with the observed rate N/T
/// and is chi-square with one degree of freedom under the null.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KupiecResult {
    pub n: usize,
    pub t: usize,
    pub alpha: f64,
    pub fail_rate: f64,
    pub lr: f64,
    pub p_value: f64,
}

pub fn kupiec(n: usize, t: usize, alpha: f64) -> Result<KupiecResult> {
    if t == 0 {
        return Err(Error::Domain("kupiec needs t >= 1".into()));
    }
    if n > t {
        return Err(Error::Domain(format!("n = {n} exceeds t = {t}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha {alpha} outside (0,1)")));
    }
    let p = 1.0 - alpha;
    let fail_rate = n as f64 / t as f64;
    let mut lr = 0.0;
    if n < t {
        lr += -2.0 * (t - n) as f64 * ((1.0 - p) / (1.0 - fail_rate)).ln();
    }
    if n > 0 {
        lr += -2.0 * n as f64 * (p / fail_rate).ln();
    }
    let lr = lr.max(0.0);
    let p_value = stats::chi_square_sf(lr, 1.0);
    Ok(KupiecResult {
        n,
        t,
        alpha,
        fail_rate,
        lr,
        p_value,
    })
}

/// Loss metric definitions. Defaults: `loss` is the mean shortfall
/// (realized - VaR) over exceedance dates; `mad` is the mean absolute
/// deviation |VaR - realized| over all dates divided by the mean
/// absolute realized value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossKind {
    #[default]
    MeanExcess,
    SumExcess,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MadKind {
    #[default]
    NormalizedMeanAbs,
    RawMeanAbs,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossMetricsCfg {
    pub loss: LossKind,
    pub mad: MadKind,
}

impl LossMetricsCfg {
    pub fn describe(&self) -> String {
        let loss = match self.loss {
            LossKind::MeanExcess => "loss = mean over exceedance dates of (realized - VaR)",
            LossKind::SumExcess => "loss = sum over exceedance dates of (realized - VaR)",
        };
        let mad = match self.mad {
            MadKind::NormalizedMeanAbs => {
                "mad = mean(|VaR - realized|) / mean(|realized|) over all dates"
            }
            MadKind::RawMeanAbs => "mad = mean(|VaR - realized|) over all dates",
        };
        format!("{loss}; {mad}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossMetrics {
    pub loss: f64,
    pub mad: f64,
    /// Set when no exceedances occurred (loss reported as 0).
    pub no_exceedances: bool,
}

pub fn loss_metrics(series: &VaRSeries) -> Result<LossMetrics> {
    loss_metrics_with(series, &LossMetricsCfg::default())
}

pub fn loss_metrics_with(series: &VaRSeries, cfg: &LossMetricsCfg) -> Result<LossMetrics> {
    if series.is_empty() {
        return Err(Error::Degenerate("empty VaR series".into()));
    }
    let excess: Vec<f64> = series
        .exceed
        .iter()
        .zip(series.realized.iter().zip(&series.var))
        .filter(|(e, _)| **e)
        .map(|(_, (r, v))| r - v)
        .collect();
    let no_exceedances = excess.is_empty();
    let loss = if no_exceedances {
        0.0
    } else {
        match cfg.loss {
            LossKind::MeanExcess => excess.iter().sum::<f64>() / excess.len() as f64,
            LossKind::SumExcess => excess.iter().sum(),
        }
    };
    let mean_abs_dev = series
        .var
        .iter()
        .zip(&series.realized)
        .map(|(v, r)| (v - r).abs())
        .sum::<f64>()
        / series.len() as f64;
    let mad = match cfg.mad {
        MadKind::NormalizedMeanAbs => {
            let mean_abs_real =
                series.realized.iter().map(|r| r.abs()).sum::<f64>() / series.len() as f64;
            if mean_abs_real > 0.0 {
                mean_abs_dev / mean_abs_real
            } else {
                f64::NAN
            }
        }
        MadKind::RawMeanAbs => mean_abs_dev,
    };
    Ok(LossMetrics {
        loss,
        mad,
        no_exceedances,
    })
}

/// Full backtest output.
#[derive(Debug, Clone)]
pub struct BacktestReport {
    pub series: Vec<VaRSeries>,
    pub kupiec: Vec<KupiecResult>,
    pub loss: Vec<LossMetrics>,
    pub metrics_cfg: LossMetricsCfg,
    pub window: usize,
    pub n_sims: usize,
    pub seed: u64,
}

/// Runs the Monte Carlo VaR backtest over the last `window` dates.
/// Dates run in parallel; date `t` uses the seed substream
/// `mix(seed, t)` and within a date draw `i` uses substream `i`, so
/// results are independent of scheduling.
#[allow(clippy::too_many_arguments)]
pub fn run_backtest(
    fitted: &FittedTVVine,
    marginal_fits: &[MarginalFit],
    data: &IndicatorPanel,
    window: usize,
    n_sims: usize,
    alphas: &[f64],
    weights: &WeightVector,
    seed: u64,
) -> Result<BacktestReport> {
    let n_series = data.n_series();
    let t_len = data.len();
    if fitted.n != n_series || marginal_fits.len() != n_series || weights.len() != n_series {
        return Err(Error::Dimension(format!(
            "series mismatch: vine {}, marginals {}, weights {}, data {}",
            fitted.n,
            marginal_fits.len(),
            weights.len(),
            n_series
        )));
    }
    if fitted.n_obs != t_len {
        return Err(Error::Dimension(format!(
            "vine fitted on {} observations, data has {t_len}",
            fitted.n_obs
        )));
    }
    if window == 0 || window > t_len {
        return Err(Error::Domain(format!(
            "window {window} outside 1..={t_len}"
        )));
    }
    if alphas.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
        return Err(Error::Domain("alphas must lie in (0,1)".into()));
    }
    let start = t_len - window;

    struct DateRow {
        date: NaiveDate,
        realized: f64,
        var_by_alpha: Vec<f64>,
    }

    let rows: Vec<DateRow> = (start..t_len)
        .into_par_iter()
        .map(|t| -> Result<DateRow> {
            let date = data.dates[t];
            let date_seed = stats::mix_seed(seed, t as u64);
            let uniforms =
                vine::simulate(fitted, t, n_sims, date_seed).map_err(|e| Error::EdgeFit {
                    edge: format!("backtest date {date}"),
                    message: e.to_string(),
                })?;
            let mut sim_values: Vec<Vec<f64>> = Vec::with_capacity(n_series);
            for i in 0..n_series {
                let inv = marginals::inverse_pit(
                    &uniforms.columns[i],
                    &marginal_fits[i],
                    fitted.pit_mode,
                )?;
                let history = &data.series[i][..t];
                let values =
                    marginals::reconstruct_returns(&marginal_fits[i], &inv.values, history)?;
                sim_values.push(values);
            }
            let portfolio = portfolio_aggregate(&sim_values, weights)?;
            let realized: f64 = data
                .series
                .iter()
                .zip(weights.as_slice())
                .map(|(s, w)| w * s[t])
                .sum();
            let var_by_alpha = alphas
                .iter()
                .map(|&alpha| var_quantile(&portfolio, alpha))
                .collect::<Result<Vec<f64>>>()?;
            Ok(DateRow {
                date,
                realized,
                var_by_alpha,
            })
        })
        .collect::<Result<Vec<DateRow>>>()?;

    let metrics_cfg = LossMetricsCfg::default();
    let mut series = Vec::with_capacity(alphas.len());
    let mut kupiec_results = Vec::with_capacity(alphas.len());
    let mut losses = Vec::with_capacity(alphas.len());
    for (ai, &alpha) in alphas.iter().enumerate() {
        let dates: Vec<NaiveDate> = rows.iter().map(|r| r.date).collect();
        let var: Vec<f64> = rows.iter().map(|r| r.var_by_alpha[ai]).collect();
        let realized: Vec<f64> = rows.iter().map(|r| r.realized).collect();
        let exceed: Vec<bool> = var.iter().zip(&realized).map(|(v, r)| r > v).collect();
        let track = VaRSeries {
            alpha,
            dates,
            var,
            realized,
            exceed,
        };
        kupiec_results.push(kupiec(track.exceedances(), track.len(), alpha)?);
        losses.push(loss_metrics_with(&track, &metrics_cfg)?);
        series.push(track);
    }
    Ok(BacktestReport {
        series,
        kupiec: kupiec_results,
        loss: losses,
        metrics_cfg,
        window,
        n_sims,
        seed,
    })
}

/// Writes per-alpha CSVs, the summary CSV and an SVG chart; returns the
/// paths written. CSV floats are full precision; the summary column
/// order is alpha, fail_times, fail_rate, p_value, LR, loss, mad.
pub fn emit_report(
    report: &BacktestReport,
    out_dir: &std::path::Path,
) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    for track in &report.series {
        let path = out_dir.join(format!("var_{:.3}.csv", track.alpha));
        let mut text = String::from("date,var,realized,exceed\n");
        for i in 0..track.len() {
            text.push_str(&format!(
                "{},{},{},{}\n",
                track.dates[i],
                track.var[i],
                track.realized[i],
                if track.exceed[i] { 1 } else { 0 }
            ));
        }
        std::fs::write(&path, text)?;
        written.push(path);
    }

    let summary = out_dir.join("summary.csv");
    let mut text = format!(
        "# window={} sims={} seed={}\n# {}\n",
        report.window,
        report.n_sims,
        report.seed,
        report.metrics_cfg.describe()
    );
    text.push_str("alpha,fail_times,fail_rate,p_value,lr,loss,mad\n");
    for ((track, k), l) in report.series.iter().zip(&report.kupiec).zip(&report.loss) {
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            track.alpha, k.n, k.fail_rate, k.p_value, k.lr, l.loss, l.mad
        ));
    }
    std::fs::write(&summary, text)?;
    written.push(summary);

    let svg = out_dir.join("backtest.svg");
    std::fs::write(&svg, render_svg(report))?;
    written.push(svg);
    Ok(written)
}

/// 1200x600 line chart: realized values in black plus one VaR band per
/// confidence level.
fn render_svg(report: &BacktestReport) -> String {
    const W: f64 = 1200.0;
    const H: f64 = 600.0;
    const MARGIN: f64 = 60.0;
    let palette = ["#2f9e44", "#e03131", "#1971c2", "#9c36b5", "#f08c00"];

    let mut min_v = f64::INFINITY;
    let mut max_v = f64::NEG_INFINITY;
    let mut len = 0;
    for track in &report.series {
        len = track.len();
        for &v in track.var.iter().chain(&track.realized) {
            min_v = min_v.min(v);
            max_v = max_v.max(v);
        }
    }
    if !min_v.is_finite() || !max_v.is_finite() || max_v <= min_v {
        min_v = -1.0;
        max_v = 1.0;
    }
    let pad = 0.05 * (max_v - min_v);
    let (lo, hi) = (min_v - pad, max_v + pad);
    let x_at = |i: usize| MARGIN + (W - 2.0 * MARGIN) * i as f64 / (len.max(2) - 1) as f64;
    let y_at = |v: f64| H - MARGIN - (H - 2.0 * MARGIN) * (v - lo) / (hi - lo);

    let polyline = |values: &[f64], color: &str, width: f64| -> String {
        let points: Vec<String> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| format!("{:.2},{:.2}", x_at(i), y_at(v)))
            .collect();
        format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\" points=\"{}\"/>\n",
            points.join(" ")
        )
    };

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <line x1=\"{m}\" y1=\"{ybot}\" x2=\"{xr}\" y2=\"{ybot}\" stroke=\"#555\"/>\n\
         <line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{ybot}\" stroke=\"#555\"/>\n",
        m = MARGIN,
        ybot = H - MARGIN,
        xr = W - MARGIN,
    );
    if let Some(track) = report.series.first() {
        svg.push_str(&polyline(&track.realized, "#111111", 1.2));
    }
    for (i, track) in report.series.iter().enumerate() {
        svg.push_str(&polyline(&track.var, palette[i % palette.len()], 1.2));
    }
    // Legend.
    let mut y = MARGIN + 6.0;
    svg.push_str(&format!(
        "<text x=\"{x}\" y=\"{y}\" font-size=\"13\" fill=\"#111111\">realized</text>\n",
        x = W - MARGIN - 150.0,
    ));
    for (i, track) in report.series.iter().enumerate() {
        y += 18.0;
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" font-size=\"13\" fill=\"{c}\">VaR {a:.1}%</text>\n",
            x = W - MARGIN - 150.0,
            c = palette[i % palette.len()],
            a = track.alpha * 100.0,
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{m}\" y=\"{y}\" font-size=\"12\" fill=\"#555\">min {lo:.4}  max {hi:.4}</text>\n",
        m = MARGIN,
        y = H - MARGIN / 3.0,
    ));
    svg.push_str("</svg>\n");
    svg
}

/// Parses a summary written by [`emit_report`] back into rows, used by
/// round-trip checks.
pub fn parse_var_csv(path: &std::path::Path) -> Result<VaRSeries> {
    let text = std::fs::read_to_string(path)?;
    let mut dates = Vec::new();
    let mut var = Vec::new();
    let mut realized = Vec::new();
    let mut exceed = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(Error::Csv(format!("bad row {i} in {}", path.display())));
        }
        dates.push(
            NaiveDate::parse_from_str(parts[0], "%Y-%m-%d")
                .map_err(|e| Error::Csv(e.to_string()))?,
        );
        var.push(
            parts[1]
                .parse::<f64>()
                .map_err(|e| Error::Csv(e.to_string()))?,
        );
        realized.push(
            parts[2]
                .parse::<f64>()
                .map_err(|e| Error::Csv(e.to_string()))?,
        );
        exceed.push(parts[3] == "1");
    }
    Ok(VaRSeries {
        alpha: 0.0,
        dates,
        var,
        realized,
        exceed,
    })
}

/// Normal-theory sanity bound used in tests: exceedance count of an
/// alpha-level VaR over t dates is Binomial(t, 1-alpha).
pub fn binomial_two_sided_bounds(t: usize, alpha: f64, coverage: f64) -> (usize, usize) {
    let p = 1.0 - alpha;
    let mean = t as f64 * p;
    let sd = (t as f64 * p * (1.0 - p)).sqrt();
    let z = statrs::distribution::Normal::new(0.0, 1.0)
        .unwrap()
        .inverse_cdf(0.5 + coverage / 2.0);
    let lo = (mean - z * sd).floor().max(0.0) as usize;
    let hi = (mean + z * sd).ceil() as usize;
    (lo, hi.min(t))
}
