//! Command-line pipeline: synth → stats → filter/fit → simulate/backtest.

mod config;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};

use config::RunConfig;
use tvvine::dynamics::{Driver, FitCfg};
use tvvine::ingest::{self, ColumnSchema, IndicatorPanel};
use tvvine::marginals::{self, MarginalArtifact, MarginalFitCfg, MarginalOrder, PitMode};
use tvvine::paircopula::Family;
use tvvine::risk::{self, WeightVector};
use tvvine::synth::{self, SynthConfig};
use tvvine::vine::{self, FitVineCfg, FittedTVVine, TreeCriterion, VineArtifact, VineMode};

#[derive(Parser)]
#[command(
    name = "tvvine",
    about = "Time-varying vine copula modeling, simulation and VaR backtesting",
    version
)]
struct Cli {
    /// Flat key = value config file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (0 = rayon default).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the bundled synthetic level-series dataset.
    Synth(SynthArgs),
    /// Descriptive statistics and diagnostics of the indicator panel.
    Stats(StatsArgs),
    /// Fit marginal models only and write the marginal artifact.
    Filter(FilterArgs),
    /// Fit marginals and the time-varying vine; write both artifacts.
    Fit(FitArgs),
    /// Draw joint simulations from fitted artifacts.
    Simulate(SimulateArgs),
    /// Monte Carlo VaR backtest with Kupiec tests and reports.
    Backtest(BacktestArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    series: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    lags: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    pit: Option<String>,
    /// Estimate the fractional-difference exponent in every grid entry.
    #[arg(long)]
    frac_d: bool,
    #[arg(long)]
    lags: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    driver: Option<String>,
    #[arg(long)]
    families: Option<String>,
    #[arg(long)]
    pit: Option<String>,
    #[arg(long)]
    frac_d: bool,
    /// Reuse an existing marginal artifact instead of refitting.
    #[arg(long)]
    marginals: Option<PathBuf>,
    /// Reproduce the literal minimum-spanning-tree reading.
    #[arg(long)]
    min_tau: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Directory holding marginals.json and vine.json.
    #[arg(long)]
    artifacts: Option<PathBuf>,
    #[arg(long)]
    draws: Option<usize>,
    /// Time index for the parameters, or `last` for one-step-ahead.
    #[arg(long, default_value = "last")]
    at: String,
    /// `uniform` or `indicator` output space.
    #[arg(long, default_value = "uniform")]
    space: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BacktestArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    artifacts: Option<PathBuf>,
    /// Fit inline instead of loading artifacts.
    #[arg(long)]
    fit: bool,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    sims: Option<usize>,
    #[arg(long)]
    alphas: Option<String>,
    /// `equal` or `gdp`.
    #[arg(long)]
    weights: Option<String>,
    #[arg(long)]
    gdp_file: Option<PathBuf>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    driver: Option<String>,
    #[arg(long)]
    families: Option<String>,
    #[arg(long)]
    pit: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let base = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let threads = cli.threads.unwrap_or(base.threads);
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .ok();
    }
    match cli.command {
        Command::Synth(args) => cmd_synth(&base, args),
        Command::Stats(args) => cmd_stats(&base, args),
        Command::Filter(args) => cmd_filter(&base, args),
        Command::Fit(args) => cmd_fit(&base, args),
        Command::Simulate(args) => cmd_simulate(&base, args),
        Command::Backtest(args) => cmd_backtest(&base, args),
    }
}

/// Formats with six significant digits for console tables.
fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.5e}")
    }
}

fn load_indicator(input: &Path, schema: &ColumnSchema) -> anyhow::Result<IndicatorPanel> {
    let raw = ingest::load_panel(input, schema)
        .with_context(|| format!("loading {}", input.display()))?;
    Ok(ingest::compute_indicator(&raw)?)
}

fn cmd_synth(base: &RunConfig, args: SynthArgs) -> anyhow::Result<()> {
    let out = args.out.unwrap_or_else(|| base.input.clone());
    let cfg = SynthConfig {
        n_series: args.series.unwrap_or(base.series),
        rows: args.rows.unwrap_or(base.rows),
        seed: args.seed.unwrap_or(base.seed),
        ..SynthConfig::default()
    };
    let panel = synth::generate(&cfg)?;
    let mut text = String::from("date");
    for name in &panel.names {
        text.push(',');
        text.push_str(name);
    }
    text.push('\n');
    for (i, date) in panel.dates.iter().enumerate() {
        text.push_str(&date.to_string());
        for s in &panel.series {
            text.push_str(&format!(",{}", s[i]));
        }
        text.push('\n');
    }
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(&out, text)?;
    println!(
        "wrote {} rows x {} series to {}",
        panel.len(),
        panel.n_series(),
        out.display()
    );
    Ok(())
}

fn cmd_stats(base: &RunConfig, args: StatsArgs) -> anyhow::Result<()> {
    let input = args.input.unwrap_or_else(|| base.input.clone());
    let lags = args.lags.unwrap_or(base.lags);
    let ind = load_indicator(&input, &ColumnSchema::default())?;
    let mut rows = Vec::new();
    println!(
        "{:<10} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "series", "mean", "sd", "skewness", "kurtosis", "ljung_box_p", "arch_lm_p"
    );
    for (name, series) in ind.names.iter().zip(&ind.series) {
        let d = ingest::describe(series, lags)?;
        println!(
            "{:<10} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12}",
            name,
            sig6(d.mean),
            sig6(d.sd),
            sig6(d.skewness),
            sig6(d.kurtosis),
            sig6(d.ljung_box_p),
            sig6(d.arch_lm_p)
        );
        rows.push((name.clone(), d));
    }
    if let Some(out) = args.out {
        let mut text = String::from("series,mean,sd,skewness,kurtosis,ljung_box_p,arch_lm_p\n");
        for (name, d) in &rows {
            text.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                name, d.mean, d.sd, d.skewness, d.kurtosis, d.ljung_box_p, d.arch_lm_p
            ));
        }
        if let Some(parent) = out.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        std::fs::write(&out, text)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn fit_marginals_stage(
    ind: &IndicatorPanel,
    pit_mode: PitMode,
    frac_d: bool,
    lags: usize,
    seed: u64,
) -> anyhow::Result<MarginalArtifact> {
    use rayon::prelude::*;
    let grid = MarginalOrder::default_grid(frac_d);
    let fits = ind
        .series
        .par_iter()
        .enumerate()
        .map(|(i, series)| {
            let cfg = MarginalFitCfg {
                seed: seed.wrapping_add(i as u64),
                ..MarginalFitCfg::default()
            };
            marginals::select_order(series, &grid, &cfg, lags).map(|(_, fit)| fit)
        })
        .collect::<tvvine::Result<Vec<_>>>()?;
    for (name, fit) in ind.names.iter().zip(&fits) {
        println!(
            "{:<10} {}  loglik {}  aic {}",
            name,
            fit.order.label(),
            sig6(fit.loglik),
            sig6(fit.aic)
        );
        for w in &fit.warnings {
            eprintln!("  warning ({name}): {w}");
        }
    }
    Ok(MarginalArtifact::new(ind.names.clone(), fits, pit_mode))
}

fn cmd_filter(base: &RunConfig, args: FilterArgs) -> anyhow::Result<()> {
    let input = args.input.unwrap_or_else(|| base.input.clone());
    let pit_mode = PitMode::parse(&args.pit.unwrap_or_else(|| base.pit.clone()))?;
    let lags = args.lags.unwrap_or(base.lags);
    let seed = args.seed.unwrap_or(base.seed);
    let out_dir = args.out.unwrap_or_else(|| base.out.clone());
    let frac_d = args.frac_d || base.frac_d;

    let ind = load_indicator(&input, &ColumnSchema::default())?;
    let artifact = fit_marginals_stage(&ind, pit_mode, frac_d, lags, seed)?;
    std::fs::create_dir_all(&out_dir)?;
    let path = out_dir.join("marginals.json");
    artifact.save(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn parse_families(text: &str) -> anyhow::Result<Vec<Family>> {
    text.split(',')
        .map(|s| Family::parse(s.trim()).map_err(Into::into))
        .collect()
}

fn print_tree_table(fitted: &FittedTVVine) {
    for (li, tree) in fitted.trees.iter().enumerate() {
        println!("Tree {}", li + 1);
        println!(
            "  {:<16} {:<10} {:<7} {:>10} {:>10} {:>10} {:>8} {:>10}",
            "edge", "family", "driver", "k/omega", "a/alpha", "b/beta", "nu", "AIC"
        );
        for fe in tree {
            let coef = fe.dynamics.coef.values();
            let nu = fe
                .dynamics
                .coef
                .nu_static()
                .map(|v| sig6(v))
                .unwrap_or_else(|| "-".into());
            println!(
                "  C{:<15} {:<10} {:<7} {:>10} {:>10} {:>10} {:>8} {:>10}",
                fe.edge.label(),
                fe.dynamics.family.name(),
                fe.dynamics.coef.driver().name(),
                sig6(coef[0]),
                sig6(coef[1]),
                sig6(coef[2]),
                nu,
                sig6(fe.dynamics.aic)
            );
        }
    }
    println!(
        "Sum(AIC) = {}   copula loglik = {}",
        sig6(fitted.total_aic),
        sig6(fitted.total_copula_loglik)
    );
}

fn cmd_fit(base: &RunConfig, args: FitArgs) -> anyhow::Result<()> {
    let input = args.input.unwrap_or_else(|| base.input.clone());
    let mode = VineMode::parse(&args.mode.unwrap_or_else(|| base.mode.clone()))?;
    let driver = Driver::parse(&args.driver.unwrap_or_else(|| base.driver.clone()))?;
    let families = parse_families(&args.families.unwrap_or_else(|| base.families.clone()))?;
    let pit_mode = PitMode::parse(&args.pit.unwrap_or_else(|| base.pit.clone()))?;
    let seed = args.seed.unwrap_or(base.seed);
    let out_dir = args.out.unwrap_or_else(|| base.out.clone());
    let frac_d = args.frac_d || base.frac_d;

    let ind = load_indicator(&input, &ColumnSchema::default())?;
    std::fs::create_dir_all(&out_dir)?;

    let marginal_artifact = match &args.marginals {
        Some(path) => MarginalArtifact::load(path)?,
        None => {
            let artifact = fit_marginals_stage(&ind, pit_mode, frac_d, base.lags, seed)?;
            artifact.save(&out_dir.join("marginals.json"))?;
            artifact
        }
    };

    let u = marginal_artifact.uniform_panel();
    let cfg = FitVineCfg {
        mode,
        families,
        driver,
        criterion: if args.min_tau {
            TreeCriterion::MinAbsTau
        } else {
            TreeCriterion::MaxAbsTau
        },
        fit: FitCfg {
            seed,
            ..FitCfg::default()
        },
    };
    let fitted = vine::fit_sequential(&u, &cfg)?;
    for w in &fitted.warnings {
        eprintln!("warning: {w}");
    }
    print_tree_table(&fitted);

    let artifact = VineArtifact::from_fitted(&fitted)?;
    let path = out_dir.join("vine.json");
    artifact.save(&path)?;
    println!("wrote {}", path.display());

    // Record the resolved configuration next to the artifacts.
    let effective = RunConfig {
        input,
        out: out_dir.clone(),
        mode: mode.name().into(),
        driver: driver.name().into(),
        families: cfg
            .families
            .iter()
            .map(|f| f.name())
            .collect::<Vec<_>>()
            .join(","),
        pit: pit_mode.name().into(),
        frac_d,
        seed,
        ..base.clone()
    };
    std::fs::write(out_dir.join("run_config.txt"), effective.to_kv())?;
    Ok(())
}

fn load_artifacts(
    dir: &Path,
    ind: &IndicatorPanel,
) -> anyhow::Result<(MarginalArtifact, FittedTVVine)> {
    let marginal_artifact = MarginalArtifact::load(&dir.join("marginals.json"))
        .with_context(|| format!("loading {}/marginals.json", dir.display()))?;
    let vine_artifact = VineArtifact::load(&dir.join("vine.json"))
        .with_context(|| format!("loading {}/vine.json", dir.display()))?;
    if marginal_artifact.names != ind.names {
        bail!(
            "artifact series {:?} do not match input {:?}",
            marginal_artifact.names,
            ind.names
        );
    }
    let u = marginal_artifact.uniform_panel();
    let fitted = vine_artifact.refilter(&u)?;
    Ok((marginal_artifact, fitted))
}

fn cmd_simulate(base: &RunConfig, args: SimulateArgs) -> anyhow::Result<()> {
    let input = args.input.unwrap_or_else(|| base.input.clone());
    let artifacts = args.artifacts.unwrap_or_else(|| base.out.clone());
    let draws = args.draws.unwrap_or(base.draws);
    let seed = args.seed.unwrap_or(base.seed);
    let out = args
        .out
        .unwrap_or_else(|| artifacts.join("simulations.csv"));

    let ind = load_indicator(&input, &ColumnSchema::default())?;
    let (marginal_artifact, fitted) = load_artifacts(&artifacts, &ind)?;

    let t_index = match args.at.as_str() {
        "last" => fitted.n_obs,
        text => text
            .parse::<usize>()
            .context("--at must be `last` or a time index")?,
    };
    let uniforms = vine::simulate(&fitted, t_index, draws, seed)?;

    let columns: Vec<Vec<f64>> = match args.space.as_str() {
        "uniform" => uniforms.columns.clone(),
        "indicator" => {
            let mut cols = Vec::with_capacity(fitted.n);
            for i in 0..fitted.n {
                let inv = marginals::inverse_pit(
                    &uniforms.columns[i],
                    &marginal_artifact.fits[i],
                    fitted.pit_mode,
                )?;
                let history = &ind.series[i][..t_index.min(ind.len())];
                cols.push(marginals::reconstruct_returns(
                    &marginal_artifact.fits[i],
                    &inv.values,
                    history,
                )?);
            }
            cols
        }
        other => bail!("unknown space `{other}`"),
    };

    let mut text = uniforms.names.join(",");
    text.push('\n');
    for k in 0..draws {
        let row: Vec<String> = columns.iter().map(|c| c[k].to_string()).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(&out, text)?;
    println!("wrote {draws} draws to {}", out.display());
    Ok(())
}

fn read_gdp_weights(path: &Path, names: &[String]) -> anyhow::Result<WeightVector> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading gdp file {}", path.display()))?;
    let mut by_name = std::collections::BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let (name, value) = line
            .split_once(',')
            .with_context(|| format!("gdp file line {}: expected name,value", i + 1))?;
        by_name.insert(
            name.trim().to_string(),
            value.trim().parse::<f64>().context("gdp value")?,
        );
    }
    let totals: Vec<f64> = names
        .iter()
        .map(|n| {
            by_name
                .get(n)
                .copied()
                .with_context(|| format!("gdp file lacks series `{n}`"))
        })
        .collect::<anyhow::Result<Vec<f64>>>()?;
    Ok(risk::gdp_weights(&totals)?)
}

fn cmd_backtest(base: &RunConfig, args: BacktestArgs) -> anyhow::Result<()> {
    let input = args.input.unwrap_or_else(|| base.input.clone());
    let artifacts = args.artifacts.unwrap_or_else(|| base.out.clone());
    let window = args.window.unwrap_or(base.window);
    let sims = args.sims.unwrap_or(base.sims);
    let alphas = match args.alphas {
        Some(text) => config::parse_alphas(&text)?,
        None => base.alphas.clone(),
    };
    let seed = args.seed.unwrap_or(base.seed);
    let out_dir = args.out.unwrap_or_else(|| artifacts.join("backtest"));

    let ind = load_indicator(&input, &ColumnSchema::default())?;
    if window < 250 {
        eprintln!("warning: backtest window {window} is below the recommended minimum 250");
    }

    let (marginal_artifact, fitted) = if args.fit {
        let pit_mode = PitMode::parse(&args.pit.clone().unwrap_or_else(|| base.pit.clone()))?;
        let mode = VineMode::parse(&args.mode.clone().unwrap_or_else(|| base.mode.clone()))?;
        let driver = Driver::parse(&args.driver.clone().unwrap_or_else(|| base.driver.clone()))?;
        let families = parse_families(
            &args
                .families
                .clone()
                .unwrap_or_else(|| base.families.clone()),
        )?;
        let artifact = fit_marginals_stage(&ind, pit_mode, base.frac_d, base.lags, seed)?;
        let u = artifact.uniform_panel();
        let cfg = FitVineCfg {
            mode,
            families,
            driver,
            criterion: TreeCriterion::MaxAbsTau,
            fit: FitCfg {
                seed,
                ..FitCfg::default()
            },
        };
        let fitted = vine::fit_sequential(&u, &cfg)?;
        std::fs::create_dir_all(&artifacts)?;
        artifact.save(&artifacts.join("marginals.json"))?;
        VineArtifact::from_fitted(&fitted)?.save(&artifacts.join("vine.json"))?;
        (artifact, fitted)
    } else {
        load_artifacts(&artifacts, &ind)?
    };

    let weights = match args
        .weights
        .unwrap_or_else(|| base.weights.clone())
        .as_str()
    {
        "equal" => WeightVector::equal(ind.n_series()),
        "gdp" => {
            let path = args
                .gdp_file
                .clone()
                .or_else(|| {
                    if base.gdp_file.is_empty() {
                        None
                    } else {
                        Some(PathBuf::from(&base.gdp_file))
                    }
                })
                .context("--weights gdp requires --gdp-file")?;
            read_gdp_weights(&path, &ind.names)?
        }
        other => bail!("unknown weights `{other}`"),
    };

    let report = risk::run_backtest(
        &fitted,
        &marginal_artifact.fits,
        &ind,
        window,
        sims,
        &alphas,
        &weights,
        seed,
    )?;

    println!(
        "{:<8} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "alpha", "fails", "fail_rate", "p_value", "LR", "loss", "mad"
    );
    for ((track, k), l) in report.series.iter().zip(&report.kupiec).zip(&report.loss) {
        println!(
            "{:<8} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
            track.alpha,
            k.n,
            sig6(k.fail_rate),
            sig6(k.p_value),
            sig6(k.lr),
            sig6(l.loss),
            sig6(l.mad)
        );
    }
    let written = risk::emit_report(&report, &out_dir)?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}
