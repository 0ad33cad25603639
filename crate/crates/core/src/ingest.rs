//! Panel ingestion, alignment, indicator construction and descriptive
//! diagnostics.
//!
//! Input CSVs carry a header row, an ISO-8601 date in the first column
//! and one numeric column per entity. Panels from different files are
//! aligned on the intersection of their date sets (no interpolation),
//! and the risk indicator is the log-difference `Lr_t = ln L_t − ln
//! L_{t−1}` of each level series.

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::stats;

/// Date-aligned multivariate level series.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPanel {
    pub dates: Vec<NaiveDate>,
    pub names: Vec<String>,
    /// One value sequence per name, all the same length as `dates`.
    pub series: Vec<Vec<f64>>,
}

impl RawPanel {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn n_series(&self) -> usize {
        self.series.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dates.len() < 2 {
            return Err(Error::Degenerate("panel needs at least 2 rows".into()));
        }
        for (name, s) in self.names.iter().zip(&self.series) {
            if s.len() != self.dates.len() {
                return Err(Error::Dimension(format!(
                    "series {name} has {} rows, dates have {}",
                    s.len(),
                    self.dates.len()
                )));
            }
        }
        for w in self.dates.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Degenerate(format!(
                    "dates not strictly ascending at {}",
                    w[1]
                )));
            }
        }
        Ok(())
    }
}

/// Log-difference indicator panel; one row shorter than its source.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorPanel {
    pub dates: Vec<NaiveDate>,
    pub names: Vec<String>,
    pub series: Vec<Vec<f64>>,
}

impl IndicatorPanel {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn n_series(&self) -> usize {
        self.series.len()
    }
}

/// Column selection for [`load_panel`]: by default the first column is
/// the date and every remaining column is a value series.
#[derive(Debug, Clone, Default)]
pub struct ColumnSchema {
    /// Restrict to these value columns (by header name) when set.
    pub value_columns: Option<Vec<String>>,
}

/// Reads a header-bearing CSV into a [`RawPanel`], sorting rows by date.
pub fn load_panel(path: &std::path::Path, schema: &ColumnSchema) -> Result<RawPanel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.to_string()).collect();
    if headers.len() < 2 {
        return Err(Error::Csv(format!(
            "{}: expected a date column plus at least one value column",
            path.display()
        )));
    }

    let selected: Vec<usize> = match &schema.value_columns {
        Some(wanted) => wanted
            .iter()
            .map(|name| {
                headers
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::Csv(format!("column `{name}` not found")))
            })
            .collect::<Result<Vec<usize>>>()?,
        None => (1..headers.len()).collect(),
    };
    if selected.iter().any(|&i| i == 0) {
        return Err(Error::Csv("column 0 is the date column".into()));
    }

    let mut rows: Vec<(NaiveDate, Vec<f64>)> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = row_idx + 1; // 1-based data row for messages
        let date_text = record.get(0).unwrap_or("");
        let date = NaiveDate::parse_from_str(date_text, "%Y-%m-%d").map_err(|e| Error::Parse {
            row,
            column: headers[0].clone(),
            message: format!("`{date_text}` is not an ISO-8601 date: {e}"),
        })?;
        let mut values = Vec::with_capacity(selected.len());
        for &col in &selected {
            let cell = record.get(col).unwrap_or("");
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: headers[col].clone(),
                message: format!("`{cell}` is not numeric"),
            })?;
            values.push(value);
        }
        rows.push((date, values));
    }
    if rows.len() < 2 {
        return Err(Error::Degenerate(format!(
            "{}: needs at least 2 data rows",
            path.display()
        )));
    }

    rows.sort_by_key(|(d, _)| *d);
    for w in rows.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::DuplicateDate(w[0].0));
        }
    }

    let dates: Vec<NaiveDate> = rows.iter().map(|(d, _)| *d).collect();
    let names: Vec<String> = selected.iter().map(|&i| headers[i].clone()).collect();
    let series: Vec<Vec<f64>> = (0..selected.len())
        .map(|j| rows.iter().map(|(_, v)| v[j]).collect())
        .collect();
    Ok(RawPanel {
        dates,
        names,
        series,
    })
}

/// Merges panels onto the intersection of their date sets.
pub fn align_common_dates(panels: &[RawPanel]) -> Result<RawPanel> {
    if panels.len() < 2 {
        return Err(Error::Dimension("alignment needs at least 2 panels".into()));
    }
    let mut common: Vec<NaiveDate> = panels[0].dates.clone();
    for panel in &panels[1..] {
        let set: std::collections::BTreeSet<NaiveDate> = panel.dates.iter().copied().collect();
        common.retain(|d| set.contains(d));
    }
    if common.len() < 2 {
        return Err(Error::EmptyIntersection);
    }

    let mut names = Vec::new();
    let mut series = Vec::new();
    for panel in panels {
        let index: std::collections::BTreeMap<NaiveDate, usize> = panel
            .dates
            .iter()
            .copied()
            .enumerate()
            .map(|(i, d)| (d, i))
            .collect();
        for (name, values) in panel.names.iter().zip(&panel.series) {
            if names.contains(name) {
                return Err(Error::Dimension(format!(
                    "duplicate series name `{name}` across panels"
                )));
            }
            names.push(name.clone());
            series.push(common.iter().map(|d| values[index[d]]).collect());
        }
    }
    Ok(RawPanel {
        dates: common,
        names,
        series,
    })
}

/// Log-difference indicator: `Lr_t = ln L_t − ln L_{t−1}` per series.
/// Requires strictly positive levels.
pub fn compute_indicator(panel: &RawPanel) -> Result<IndicatorPanel> {
    panel.validate()?;
    for (name, values) in panel.names.iter().zip(&panel.series) {
        for (t, &v) in values.iter().enumerate() {
            if !(v > 0.0) {
                return Err(Error::NonPositive {
                    series: name.clone(),
                    date: panel.dates[t],
                    value: v,
                });
            }
        }
    }
    let series: Vec<Vec<f64>> = panel
        .series
        .iter()
        .map(|values| values.windows(2).map(|w| w[1].ln() - w[0].ln()).collect())
        .collect();
    Ok(IndicatorPanel {
        dates: panel.dates[1..].to_vec(),
        names: panel.names.clone(),
        series,
    })
}

/// Per-series summary used in the stats report. Kurtosis is the raw
/// Pearson moment ratio m4/m2² (3 for a normal), not excess.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescriptiveStats {
    pub mean: f64,
    pub sd: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub ljung_box_p: f64,
    pub arch_lm_p: f64,
}

/// Sample moments plus Ljung-Box and ARCH-LM p-values at `lag`.
pub fn describe(series: &[f64], lag: usize) -> Result<DescriptiveStats> {
    if series.len() < 8 {
        return Err(Error::Degenerate(format!(
            "describe needs at least 8 observations, got {}",
            series.len()
        )));
    }
    let m2 = stats::central_moment(series, 2);
    if m2 <= 0.0 {
        return Err(Error::Degenerate(
            "constant series: skewness and kurtosis undefined".into(),
        ));
    }
    let m3 = stats::central_moment(series, 3);
    let m4 = stats::central_moment(series, 4);
    let (_, lb_p) = ljung_box(series, lag)?;
    let (_, arch_p) = arch_lm_test(series, lag)?;
    Ok(DescriptiveStats {
        mean: stats::mean(series),
        sd: stats::std_dev(series),
        skewness: m3 / m2.powf(1.5),
        kurtosis: m4 / (m2 * m2),
        ljung_box_p: lb_p,
        arch_lm_p: arch_p,
    })
}

/// Ljung-Box portmanteau statistic
/// `Q = n(n+2) Σ_{k=1..lags} ρ̂_k²/(n−k)` with a χ²(lags) p-value.
pub fn ljung_box(series: &[f64], lags: usize) -> Result<(f64, f64)> {
    let n = series.len();
    if lags == 0 || lags >= n / 2 {
        return Err(Error::Domain(format!(
            "lags {lags} must be in 1..{}",
            n / 2
        )));
    }
    if stats::central_moment(series, 2) <= 0.0 {
        return Err(Error::Degenerate("zero-variance series".into()));
    }
    let rho = stats::autocorrelations(series, lags);
    let nf = n as f64;
    let q = nf
        * (nf + 2.0)
        * rho
            .iter()
            .enumerate()
            .map(|(i, r)| r * r / (nf - (i + 1) as f64))
            .sum::<f64>();
    Ok((q, stats::chi_square_sf(q, lags as f64)))
}

/// Engle's ARCH-LM test: n·R² from the regression of the squared
/// demeaned series on its own lags, with a χ²(lags) p-value.
pub fn arch_lm_test(series: &[f64], lags: usize) -> Result<(f64, f64)> {
    let n = series.len();
    if lags == 0 || lags >= n / 2 {
        return Err(Error::Domain(format!(
            "lags {lags} must be in 1..{}",
            n / 2
        )));
    }
    let m = stats::mean(series);
    let sq: Vec<f64> = series.iter().map(|x| (x - m) * (x - m)).collect();
    if stats::central_moment(&sq, 2) <= 0.0 {
        return Err(Error::Degenerate(
            "constant squared series: singular regression".into(),
        ));
    }

    // OLS of sq[t] on [1, sq[t-1], ..., sq[t-lags]] via normal equations.
    let rows = n - lags;
    let dim = lags + 1;
    let mut xtx = vec![vec![0.0; dim]; dim];
    let mut xty = vec![0.0; dim];
    let mut y_sum = 0.0;
    let mut y_sq_sum = 0.0;
    for t in lags..n {
        let mut x_row = Vec::with_capacity(dim);
        x_row.push(1.0);
        for k in 1..=lags {
            x_row.push(sq[t - k]);
        }
        let y = sq[t];
        y_sum += y;
        y_sq_sum += y * y;
        for i in 0..dim {
            for j in 0..dim {
                xtx[i][j] += x_row[i] * x_row[j];
            }
            xty[i] += x_row[i] * y;
        }
    }
    let coef = stats::solve_linear(xtx.clone(), xty.clone())?;
    let explained: f64 = coef.iter().zip(&xty).map(|(c, b)| c * b).sum();
    let ssr = (y_sq_sum - explained).max(0.0);
    let sst = y_sq_sum - y_sum * y_sum / rows as f64;
    if sst <= 0.0 {
        return Err(Error::Degenerate(
            "constant squared series: singular regression".into(),
        ));
    }
    let r2 = (1.0 - ssr / sst).clamp(0.0, 1.0);
    let lm = rows as f64 * r2;
    Ok((lm, stats::chi_square_sf(lm, lags as f64)))
}
