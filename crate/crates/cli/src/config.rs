//! Flat key = value run configuration.
//!
//! Every field has a default; a config file may override any subset and
//! command-line flags override the file. The textual form round-trips
//! losslessly.

use anyhow::{bail, Context};
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: PathBuf,
    pub out: PathBuf,
    pub mode: String,
    pub driver: String,
    pub families: String,
    pub pit: String,
    pub weights: String,
    pub gdp_file: String,
    pub alphas: Vec<f64>,
    pub window: usize,
    pub sims: usize,
    pub draws: usize,
    pub lags: usize,
    pub rows: usize,
    pub series: usize,
    pub frac_d: bool,
    pub seed: u64,
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: PathBuf::from("data.csv"),
            out: PathBuf::from("out"),
            mode: "rvine".into(),
            driver: "gas".into(),
            families: "gaussian,studentt,gumbel,rotgumbel".into(),
            pit: "empirical".into(),
            weights: "equal".into(),
            gdp_file: String::new(),
            alphas: vec![0.90, 0.95, 0.99, 0.995],
            window: 400,
            sims: 1000,
            draws: 1000,
            lags: 10,
            rows: 1093,
            series: 6,
            frac_d: false,
            seed: 42,
            threads: 0,
        }
    }
}

impl RunConfig {
    pub fn to_kv(&self) -> String {
        let alphas: Vec<String> = self.alphas.iter().map(|a| a.to_string()).collect();
        format!(
            "input = {}\nout = {}\nmode = {}\ndriver = {}\nfamilies = {}\npit = {}\n\
             weights = {}\ngdp_file = {}\nalphas = {}\nwindow = {}\nsims = {}\ndraws = {}\n\
             lags = {}\nrows = {}\nseries = {}\nfrac_d = {}\nseed = {}\nthreads = {}\n",
            self.input.display(),
            self.out.display(),
            self.mode,
            self.driver,
            self.families,
            self.pit,
            self.weights,
            self.gdp_file,
            alphas.join(","),
            self.window,
            self.sims,
            self.draws,
            self.lags,
            self.rows,
            self.series,
            self.frac_d,
            self.seed,
            self.threads,
        )
    }

    pub fn from_kv(text: &str) -> anyhow::Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected key = value", lineno + 1))?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "input" => cfg.input = PathBuf::from(value),
                "out" => cfg.out = PathBuf::from(value),
                "mode" => cfg.mode = value.into(),
                "driver" => cfg.driver = value.into(),
                "families" => cfg.families = value.into(),
                "pit" => cfg.pit = value.into(),
                "weights" => cfg.weights = value.into(),
                "gdp_file" => cfg.gdp_file = value.into(),
                "alphas" => cfg.alphas = parse_alphas(value)?,
                "window" => cfg.window = value.parse().context("window")?,
                "sims" => cfg.sims = value.parse().context("sims")?,
                "draws" => cfg.draws = value.parse().context("draws")?,
                "lags" => cfg.lags = value.parse().context("lags")?,
                "rows" => cfg.rows = value.parse().context("rows")?,
                "series" => cfg.series = value.parse().context("series")?,
                "frac_d" => cfg.frac_d = value.parse().context("frac_d")?,
                "seed" => cfg.seed = value.parse().context("seed")?,
                "threads" => cfg.threads = value.parse().context("threads")?,
                other => bail!("unknown config key `{other}`"),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        RunConfig::from_kv(&text)
    }
}

pub fn parse_alphas(text: &str) -> anyhow::Result<Vec<f64>> {
    let alphas: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<f64>, _>>()
        .context("alphas must be comma-separated numbers")?;
    if alphas.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
        bail!("alphas must lie strictly in (0,1)");
    }
    Ok(alphas)
}
