//! Command-line driver: a configuration file plus flag overrides in,
//! hash-stamped CSV/JSON artifacts out. Exit codes: 0 success, 2 input
//! error, 3 missing artifact, 4 numerical failure.

use crate::config::{resolve_variable, ProxySection, RunConfig};
use crate::dic::{compute_dic, DicResult};
use crate::error::{Error, Result};
use crate::gibbs::run_chain;
use crate::identification::{default_mode, normalize_posterior, rotation_demo, NormalizationMode, RotationSource};
use crate::io::{load_posterior, save_posterior, write_json_report, write_labelled_csv};
use crate::model::{prepare, Dataset, PreparedData, ScaleInfo};
use crate::rng::RngStream;
use crate::simulation::{run_monte_carlo, FactorDistribution};
use crate::stats;
use crate::structural::{
    independence_stats, label_shocks, nongaussianity_posteriors, posterior_irfs,
};
use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(
    name = "ngsvar",
    version,
    about = "Bayesian structural VAR with a non-Gaussian factor structure"
)]
struct Cli {
    /// Configuration file; flags override its values.
    #[arg(long, value_name = "FILE", global = true)]
    config: Option<PathBuf>,
    /// Base seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 means one per core.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Directory receiving all artifacts.
    #[arg(long, value_name = "DIR", global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// CSV of observations, one named column per variable.
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    /// Column used as the external instrument, excluded from the VAR.
    #[arg(long, value_name = "NAME")]
    proxy_column: Option<String>,
}

#[derive(Args, Debug)]
struct ChainArgs {
    #[arg(long)]
    lags: Option<usize>,
    #[arg(long)]
    factors: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    retain: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    /// Standardize each variable before estimation (true/false).
    #[arg(long, value_name = "BOOL")]
    standardize: Option<bool>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the Gibbs sampler and persist the posterior draws.
    Estimate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        chain: ChainArgs,
    },
    /// Compare factor counts, or proxy restrictions, by integrated DIC.
    Dic {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        chain: ChainArgs,
        /// Factor counts to scan, e.g. --scan 1,2,3,4.
        #[arg(long, value_delimiter = ',', value_name = "R,...")]
        scan: Option<Vec<usize>>,
        /// Compare the proxy-restricted model against the unrestricted one
        /// at the configured factor count.
        #[arg(long)]
        proxy_comparison: bool,
        #[arg(long)]
        importance_draws: Option<usize>,
        /// Evaluate the deviance at every stride-th retained draw.
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Impulse responses from a persisted posterior.
    Irf {
        /// Directory written by estimate (holds posterior/ and context.json).
        #[arg(long, value_name = "DIR")]
        posterior: Option<PathBuf>,
        #[arg(long)]
        horizons: Option<usize>,
        /// Impact normalization, e.g. FEDFUNDS=0.25.
        #[arg(long, value_name = "VAR=VALUE")]
        normalize: Option<String>,
        /// Pointwise band mass in (0, 1).
        #[arg(long)]
        band: Option<f64>,
    },
    /// Correlate shocks with a proxy, report signs, moments, and
    /// independence diagnostics.
    Label {
        #[arg(long, value_name = "DIR")]
        posterior: Option<PathBuf>,
        #[command(flatten)]
        data: DataArgs,
        /// Equation whose loadings are reported.
        #[arg(long, value_name = "VAR")]
        target_equation: Option<String>,
    },
    /// Frequentist metrics of the estimator on simulated data.
    Montecarlo {
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long)]
        t: Option<usize>,
        /// gaussian, student-t, or pearson.
        #[arg(long, value_name = "FAMILY")]
        distribution: Option<String>,
        /// Tail parameter for student-t factors.
        #[arg(long)]
        dof: Option<f64>,
        #[arg(long)]
        skewness: Option<f64>,
        #[arg(long)]
        excess_kurtosis: Option<f64>,
        /// Report the truth as the estimate; harness self-test.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long)]
        retain: Option<usize>,
    },
    /// Correlation statistics of a rotated independent pair, Gaussian
    /// reference row included.
    RotationDemo {
        #[arg(long)]
        angle: Option<f64>,
        #[arg(long)]
        t: Option<usize>,
        #[arg(long)]
        dof: Option<f64>,
    },
}

/// Entry point of the binary; returns the process exit code.
pub fn run() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn apply_data_args(config: &mut RunConfig, args: &DataArgs) {
    if let Some(path) = &args.data {
        config.data.path = Some(path.clone());
    }
    if let Some(col) = &args.proxy_column {
        config.data.proxy_column = Some(col.clone());
    }
}

fn apply_chain_args(config: &mut RunConfig, args: &ChainArgs) {
    if let Some(v) = args.lags {
        config.model.lags = v;
    }
    if let Some(v) = args.factors {
        config.model.factors = v;
    }
    if let Some(v) = args.burn_in {
        config.sampler.burn_in = v;
    }
    if let Some(v) = args.retain {
        config.sampler.retain = v;
    }
    if let Some(v) = args.thin {
        config.sampler.thin = v;
    }
    if let Some(v) = args.standardize {
        config.model.standardize = v;
    }
}

/// Parse "VAR=VALUE" into the irf normalization fields.
fn parse_normalize(token: &str) -> Result<(String, f64)> {
    let (name, value) = token
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("expected VAR=VALUE, got {token:?}")))?;
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse {value:?} as a number")))?;
    if name.trim().is_empty() {
        return Err(Error::Config("empty variable name in normalization".into()));
    }
    Ok((name.trim().to_string(), value))
}

fn parse_distribution(
    family: &str,
    dof: Option<f64>,
    skewness: Option<f64>,
    excess_kurtosis: Option<f64>,
) -> Result<FactorDistribution> {
    match family {
        "gaussian" => Ok(FactorDistribution::Gaussian),
        "student-t" => Ok(FactorDistribution::StudentT { dof: dof.unwrap_or(4.0) }),
        "pearson" => Ok(FactorDistribution::Pearson {
            skewness: skewness.unwrap_or(0.68),
            excess_kurtosis: excess_kurtosis.unwrap_or(15.0),
        }),
        other => Err(Error::Config(format!(
            "distribution must be gaussian, student-t, or pearson, got {other:?}"
        ))),
    }
}

fn execute(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.sampler.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.data.output_dir = out.clone();
    }
    if let Some(jobs) = cli.jobs {
        config.sampler.jobs = jobs;
    }
    if config.sampler.jobs > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(config.sampler.jobs)
            .build_global();
    }
    match cli.command {
        Command::Estimate { data, chain } => {
            apply_data_args(&mut config, &data);
            apply_chain_args(&mut config, &chain);
            config.validate()?;
            cmd_estimate(&config)
        }
        Command::Dic { data, chain, scan, proxy_comparison, importance_draws, stride } => {
            apply_data_args(&mut config, &data);
            apply_chain_args(&mut config, &chain);
            if let Some(scan) = scan {
                config.dic.factors = scan;
            }
            if let Some(v) = importance_draws {
                config.dic.importance_draws = v;
            }
            if let Some(v) = stride {
                config.dic.stride = v;
            }
            config.dic.proxy_comparison |= proxy_comparison;
            config.validate()?;
            if config.dic.proxy_comparison {
                cmd_dic_proxy_comparison(&config)
            } else {
                cmd_dic_scan(&config)
            }
        }
        Command::Irf { posterior, horizons, normalize, band } => {
            if let Some(v) = horizons {
                config.irf.horizons = v;
            }
            if let Some(v) = band {
                config.irf.band = v;
            }
            if let Some(token) = &normalize {
                let (name, value) = parse_normalize(token)?;
                config.irf.normalize_variable = Some(name);
                config.irf.normalize_value = value;
            }
            config.validate()?;
            cmd_irf(&config, posterior.as_deref())
        }
        Command::Label { posterior, data, target_equation } => {
            apply_data_args(&mut config, &data);
            if let Some(name) = target_equation {
                config.label.target_equation = Some(name);
            }
            config.validate()?;
            cmd_label(&config, posterior.as_deref())
        }
        Command::Montecarlo {
            replications,
            t,
            distribution,
            dof,
            skewness,
            excess_kurtosis,
            oracle,
            burn_in,
            retain,
        } => {
            if let Some(v) = replications {
                config.montecarlo.replications = v;
            }
            if let Some(v) = t {
                config.montecarlo.t = v;
            }
            if let Some(family) = &distribution {
                config.montecarlo.distribution =
                    parse_distribution(family, dof, skewness, excess_kurtosis)?;
            } else if let Some(dof) = dof {
                config.montecarlo.distribution = FactorDistribution::StudentT { dof };
            }
            config.montecarlo.oracle |= oracle;
            if let Some(v) = burn_in {
                config.montecarlo.burn_in = v;
            }
            if let Some(v) = retain {
                config.montecarlo.retain = v;
            }
            config.validate()?;
            cmd_montecarlo(&config)
        }
        Command::RotationDemo { angle, t, dof } => {
            if let Some(v) = angle {
                config.rotation.angle = v;
            }
            if let Some(v) = t {
                config.rotation.t = v;
            }
            if let Some(v) = dof {
                config.rotation.dof = v;
            }
            config.validate()?;
            cmd_rotation_demo(&config)
        }
    }
}

/// Everything irf/label need to interpret a persisted posterior.
#[derive(Debug, Serialize, Deserialize)]
struct EstimationContext {
    names: Vec<String>,
    means: Vec<f64>,
    sds: Vec<f64>,
    lags: usize,
    factors: usize,
    standardized: bool,
}

fn read_context(dir: &Path) -> Result<EstimationContext> {
    #[derive(Deserialize)]
    struct Stamped {
        payload: EstimationContext,
    }
    let path = dir.join("context.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|_| Error::MissingArtifact(format!("estimation context {}", path.display())))?;
    let stamped: Stamped = serde_json::from_str(&text)?;
    Ok(stamped.payload)
}

struct LoadedData {
    prepared: PreparedData,
    /// Proxy series aligned with the rows of the trimmed response.
    proxy: Option<DVector<f64>>,
}

fn load_data(config: &RunConfig) -> Result<LoadedData> {
    let path = config.data.path.as_ref().ok_or_else(|| {
        Error::Config("no data file; set data.path in the config or pass --data".into())
    })?;
    let mut dataset = Dataset::from_csv(path)?;
    let proxy_raw = match &config.data.proxy_column {
        Some(col) => Some(dataset.take_column(col)?),
        None => None,
    };
    let prepared = prepare(&dataset, config.model.lags, config.model.standardize)?;
    let proxy = proxy_raw.map(|v| DVector::from_vec(v[config.model.lags..].to_vec()));
    Ok(LoadedData { prepared, proxy })
}

fn posterior_base<'a>(config: &'a RunConfig, flag: Option<&'a Path>) -> &'a Path {
    flag.unwrap_or(&config.data.output_dir)
}

#[derive(Serialize)]
struct EstimateSummary {
    n: usize,
    p: usize,
    r: usize,
    t: usize,
    draws: usize,
    mean_dof: Vec<f64>,
    mean_lambda: [f64; 2],
    mean_sigma2: Vec<f64>,
    mean_loadings: Vec<Vec<f64>>,
    min_loading_ess: f64,
}

fn cmd_estimate(config: &RunConfig) -> Result<()> {
    let hash = config.hash();
    let loaded = load_data(config)?;
    let spec = config.model_spec(&loaded.prepared.names, config.model.factors)?;
    let settings = config.sampler_settings(0);
    // The chain consumes the proxy series only when the model has a proxy
    // equation; otherwise the series is purely diagnostic.
    let chain_proxy = if spec.restrictions.proxy.is_some() { loaded.proxy.as_ref() } else { None };
    let mut posterior =
        run_chain(&spec, &loaded.prepared.y, &loaded.prepared.x, chain_proxy, &settings)?;
    // Proxy-correlation ordering when a proxy is available and nothing
    // else pins the labels; restrictions switch normalization off.
    let mode = match (&loaded.proxy, spec.restrictions.is_empty()) {
        (Some(m), true) => NormalizationMode::Proxy(m.clone()),
        _ => default_mode(&spec.restrictions),
    };
    let proxy_target = spec.restrictions.proxy.as_ref().map(|p| p.target);
    normalize_posterior(&mut posterior, &mode, proxy_target)?;

    let out = &config.data.output_dir;
    std::fs::create_dir_all(out)?;
    save_posterior(&out.join("posterior"), &posterior)?;
    let context = EstimationContext {
        names: loaded.prepared.names.clone(),
        means: loaded.prepared.scale.means.clone(),
        sds: loaded.prepared.scale.sds.clone(),
        lags: spec.p,
        factors: spec.r,
        standardized: config.model.standardize,
    };
    write_json_report(&out.join("context.json"), &hash, &context)?;

    let mean_l = posterior.mean_loadings();
    let mean_loadings: Vec<Vec<f64>> =
        (0..posterior.n).map(|i| (0..posterior.r).map(|a| mean_l[(i, a)]).collect()).collect();
    let mean_dof_v = posterior.mean_dof();
    let mean_sigma2_v = posterior.mean_sigma2();
    let draws = posterior.n_draws();
    let mean_lambda = posterior.lambda.iter().fold([0.0, 0.0], |acc, l| {
        [acc[0] + l[0] / draws as f64, acc[1] + l[1] / draws as f64]
    });
    let mut min_ess = f64::INFINITY;
    let mut diag_rows = Vec::new();
    for i in 0..posterior.n {
        for a in 0..posterior.r {
            let ess = posterior.loading_ess(i, a);
            min_ess = min_ess.min(ess);
            diag_rows.push((
                loaded.prepared.names[i].clone(),
                vec![
                    a as f64,
                    mean_l[(i, a)],
                    posterior.loading_quantile(i, a, 0.16),
                    posterior.loading_quantile(i, a, 0.84),
                    ess,
                ],
            ));
        }
    }
    if !min_ess.is_finite() {
        min_ess = draws as f64;
    }
    let summary = EstimateSummary {
        n: posterior.n,
        p: posterior.p,
        r: posterior.r,
        t: posterior.t,
        draws,
        mean_dof: mean_dof_v.iter().copied().collect(),
        mean_lambda,
        mean_sigma2: mean_sigma2_v.iter().copied().collect(),
        mean_loadings,
        min_loading_ess: min_ess,
    };
    write_json_report(&out.join("estimate_summary.json"), &hash, &summary)?;
    write_labelled_csv(
        &out.join("loading_diagnostics.csv"),
        &hash,
        "variable",
        &["factor", "mean", "q16", "q84", "ess"],
        &diag_rows,
    )?;
    println!(
        "estimate: retained {draws} draws for n={}, p={}, r={}, T={}; artifacts in {}",
        posterior.n,
        posterior.p,
        posterior.r,
        posterior.t,
        out.display()
    );
    Ok(())
}

fn dic_row(result: &DicResult) -> Vec<f64> {
    vec![result.d_bar, result.d_hat, result.p_d, result.dic, result.ess_quantiles[1]]
}

fn cmd_dic_scan(config: &RunConfig) -> Result<()> {
    let hash = config.hash();
    let loaded = load_data(config)?;
    // The scan compares plain factor models; restriction sets from the
    // config are tied to one factor count and do not transfer.
    let mut plain = config.clone();
    plain.restrictions = Default::default();
    let dic_settings = config.dic_settings()?;
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for &r in &config.dic.factors {
        let spec = plain.model_spec(&loaded.prepared.names, r)?;
        let settings = config.sampler_settings(1 + r as u64);
        let posterior =
            run_chain(&spec, &loaded.prepared.y, &loaded.prepared.x, None, &settings)?;
        let mut rng = RngStream::new(config.sampler.seed, 10_000 + r as u64);
        let result =
            compute_dic(&posterior, &loaded.prepared.y, &loaded.prepared.x, &dic_settings, &mut rng)?;
        println!(
            "dic: r={r} d_bar={:.3} p_d={:.3} dic={:.3} (median importance ESS {:.1})",
            result.d_bar, result.p_d, result.dic, result.ess_quantiles[1]
        );
        results.push((r, result));
    }
    let best = results
        .iter()
        .map(|(_, d)| d.dic)
        .fold(f64::INFINITY, f64::min);
    for (r, result) in &results {
        let mut row = vec![*r as f64];
        row.extend(dic_row(result));
        row.push(if result.dic == best { 1.0 } else { 0.0 });
        rows.push((format!("r={r}"), row));
    }
    let out = &config.data.output_dir;
    std::fs::create_dir_all(out)?;
    write_labelled_csv(
        &out.join("dic.csv"),
        &hash,
        "model",
        &["factors", "d_bar", "d_hat", "p_d", "dic", "ess_median", "selected"],
        &rows,
    )?;
    let selected = results
        .iter()
        .find(|(_, d)| d.dic == best)
        .map(|(r, _)| *r)
        .unwrap_or_default();
    println!("dic: selected r={selected}; table in {}", out.join("dic.csv").display());
    Ok(())
}

fn cmd_dic_proxy_comparison(config: &RunConfig) -> Result<()> {
    let hash = config.hash();
    let loaded = load_data(config)?;
    let proxy = loaded.proxy.as_ref().ok_or_else(|| {
        Error::Config("proxy comparison needs data.proxy_column or --proxy-column".into())
    })?;
    let r = config.model.factors;
    let dic_settings = config.dic_settings()?;

    let mut restricted_cfg = config.clone();
    if restricted_cfg.restrictions.proxy.is_none() {
        restricted_cfg.restrictions.proxy = Some(ProxySection { target: 0 });
    }
    let spec_restricted = restricted_cfg.model_spec(&loaded.prepared.names, r)?;
    let posterior_restricted = run_chain(
        &spec_restricted,
        &loaded.prepared.y,
        &loaded.prepared.x,
        Some(proxy),
        &config.sampler_settings(1),
    )?;
    let mut rng = RngStream::new(config.sampler.seed, 10_001);
    // Both models are scored on the VAR block alone, so the two deviances
    // refer to the same data; the proxy equation only shapes the posterior.
    let dic_restricted = compute_dic(
        &posterior_restricted,
        &loaded.prepared.y,
        &loaded.prepared.x,
        &dic_settings,
        &mut rng,
    )?;

    let mut plain_cfg = config.clone();
    plain_cfg.restrictions = Default::default();
    let spec_plain = plain_cfg.model_spec(&loaded.prepared.names, r)?;
    let posterior_plain = run_chain(
        &spec_plain,
        &loaded.prepared.y,
        &loaded.prepared.x,
        None,
        &config.sampler_settings(2),
    )?;
    let mut rng = RngStream::new(config.sampler.seed, 10_002);
    let dic_plain = compute_dic(
        &posterior_plain,
        &loaded.prepared.y,
        &loaded.prepared.x,
        &dic_settings,
        &mut rng,
    )?;

    let rows = vec![
        ("proxy-restrictions".to_string(), dic_row(&dic_restricted)),
        ("no-restrictions".to_string(), dic_row(&dic_plain)),
    ];
    let out = &config.data.output_dir;
    std::fs::create_dir_all(out)?;
    write_labelled_csv(
        &out.join("dic_proxy.csv"),
        &hash,
        "model",
        &["d_bar", "d_hat", "p_d", "dic", "ess_median"],
        &rows,
    )?;
    println!(
        "dic: proxy restrictions {:.3} vs no restrictions {:.3} (lower is better); table in {}",
        dic_restricted.dic,
        dic_plain.dic,
        out.join("dic_proxy.csv").display()
    );
    Ok(())
}

fn cmd_irf(config: &RunConfig, posterior_dir: Option<&Path>) -> Result<()> {
    let hash = config.hash();
    let base = posterior_base(config, posterior_dir);
    let posterior = load_posterior(&base.join("posterior"))?;
    let context = read_context(base)?;
    let scale = ScaleInfo { means: context.means.clone(), sds: context.sds.clone() };
    let normalization = config.irf_normalization(&context.names)?;
    let half = (1.0 - config.irf.band) / 2.0;
    let result =
        posterior_irfs(&posterior, &scale, config.irf.horizons, normalization, (half, 1.0 - half))?;
    let mut rows = Vec::new();
    for h in 0..=result.horizons {
        for i in 0..posterior.n {
            for a in 0..posterior.r {
                rows.push((
                    context.names[i].clone(),
                    vec![
                        a as f64,
                        h as f64,
                        result.lower[h][(i, a)],
                        result.median[h][(i, a)],
                        result.upper[h][(i, a)],
                    ],
                ));
            }
        }
    }
    let out = &config.data.output_dir;
    std::fs::create_dir_all(out)?;
    write_labelled_csv(
        &out.join("irf.csv"),
        &hash,
        "variable",
        &["factor", "horizon", "lower", "median", "upper"],
        &rows,
    )?;
    println!(
        "irf: {} horizons x {} variables x {} shocks; table in {}",
        result.horizons,
        posterior.n,
        posterior.r,
        out.join("irf.csv").display()
    );
    Ok(())
}

#[derive(Serialize)]
struct IndependenceSummary {
    s_median: f64,
    s_null_99: f64,
    u_median: f64,
    u_null_99: f64,
    /// Two-sample KS p-value of the observed statistic against its
    /// per-column permutation null.
    s_ks_p_value: f64,
    u_ks_p_value: f64,
}

#[derive(Serialize)]
struct LabelArtifact<'a> {
    label: &'a crate::structural::LabelReport,
    moments: Option<&'a crate::structural::MomentPosterior>,
    independence: Option<IndependenceSummary>,
}

fn cmd_label(config: &RunConfig, posterior_dir: Option<&Path>) -> Result<()> {
    let hash = config.hash();
    let base = posterior_base(config, posterior_dir);
    let posterior = load_posterior(&base.join("posterior"))?;
    let context = read_context(base)?;
    let path = config.data.path.as_ref().ok_or_else(|| {
        Error::Config("labelling needs the data file; set data.path or pass --data".into())
    })?;
    let column = config.data.proxy_column.as_ref().ok_or_else(|| {
        Error::Config("labelling needs a proxy; set data.proxy_column or pass --proxy-column".into())
    })?;
    let mut dataset = Dataset::from_csv(path)?;
    let series = dataset.take_column(column)?;
    if series.len() < context.lags + posterior.t {
        return Err(Error::Dimension(format!(
            "proxy column has {} rows, posterior expects {} after a {}-lag trim",
            series.len(),
            posterior.t,
            context.lags
        )));
    }
    let proxy = DVector::from_vec(series[context.lags..context.lags + posterior.t].to_vec());
    let target = match &config.label.target_equation {
        Some(name) => resolve_variable(name, &context.names)?,
        None => 0,
    };
    let report = label_shocks(&posterior, &proxy, target, &config.label.narrative)?;
    let moments = nongaussianity_posteriors(&posterior).ok();
    let independence = if posterior.r >= 2 {
        let mut rng = RngStream::new(config.sampler.seed, 20_000);
        let stats_raw = independence_stats(&posterior, 1, &mut rng)?;
        let s_ks = stats::ks_two_sample(&stats_raw.s, &stats_raw.s0)?;
        let u_ks = stats::ks_two_sample(&stats_raw.u, &stats_raw.u0)?;
        Some(IndependenceSummary {
            s_median: stats::quantile(&stats_raw.s, 0.5),
            s_null_99: stats::quantile(&stats_raw.s0, 0.99),
            u_median: stats::quantile(&stats_raw.u, 0.5),
            u_null_99: stats::quantile(&stats_raw.u0, 0.99),
            s_ks_p_value: s_ks.p_value,
            u_ks_p_value: u_ks.p_value,
        })
    } else {
        None
    };
    let out = &config.data.output_dir;
    std::fs::create_dir_all(out)?;
    write_json_report(
        &out.join("label.json"),
        &hash,
        &LabelArtifact { label: &report, moments: moments.as_ref(), independence },
    )?;
    println!(
        "label: factor {} has the highest |corr| with {:?} (median {:.3}{}); report in {}",
        report.selected,
        column,
        report.median_abs_correlation[report.selected],
        if report.weak { ", weak instrument" } else { "" },
        out.join("label.json").display()
    );
    Ok(())
}

fn cmd_montecarlo(config: &RunConfig) -> Result<()> {
    let hash = config.hash();
    let mc = config.monte_carlo();
    let report = run_monte_carlo(&mc)?;
    let mut rows = Vec::new();
    for m in &report.metrics {
        println!(
            "montecarlo: l[{},{}] truth {:+.1} bias {:+.5} mse {:.5} band {:.4} coverage {}",
            m.variable,
            m.factor,
            m.truth,
            m.bias,
            m.mse,
            m.mean_band_length,
            m.coverage.map_or("n/a".to_string(), |c| format!("{c:.3}")),
        );
        rows.push((
            format!("l[{},{}]", m.variable, m.factor),
            vec![m.truth, m.bias, m.mse, m.mean_band_length, m.coverage.unwrap_or(f64::NAN)],
        ));
    }
    let out = &config.data.output_dir;
    std::fs::create_dir_all(out)?;
    write_labelled_csv(
        &out.join("montecarlo.csv"),
        &hash,
        "parameter",
        &["truth", "bias", "mse", "mean_band_length", "coverage"],
        &rows,
    )?;
    write_json_report(&out.join("montecarlo.json"), &hash, &report)?;
    println!(
        "montecarlo: {} of {} replications used ({} failed); T={}; table in {}",
        report.replications_used,
        report.replications_requested,
        report.failures,
        report.t,
        out.join("montecarlo.csv").display()
    );
    Ok(())
}

fn cmd_rotation_demo(config: &RunConfig) -> Result<()> {
    let hash = config.hash();
    let source = config.rotation_source()?;
    let angle = config.rotation.angle;
    let t = config.rotation.t;
    let mut rng = RngStream::new(config.sampler.seed, 0);
    let gaussian = rotation_demo(RotationSource::Gaussian, angle, t, &mut rng)?;
    let mut rng = RngStream::new(config.sampler.seed, 1);
    let heavy = rotation_demo(source, angle, t, &mut rng)?;
    let label = match source {
        RotationSource::Gaussian => "gaussian-again".to_string(),
        RotationSource::StudentT(dof) => format!("student-t({dof})"),
    };
    let rows = vec![
        ("gaussian".to_string(), demo_row(&gaussian)),
        (label.clone(), demo_row(&heavy)),
    ];
    let out = &config.data.output_dir;
    std::fs::create_dir_all(out)?;
    write_labelled_csv(
        &out.join("rotation.csv"),
        &hash,
        "source",
        &["corr_before", "corr_sq_before", "corr_after", "corr_sq_after"],
        &rows,
    )?;
    println!(
        "rotation-demo: angle {angle:.4}, T={t}; squares pick up |corr| {:.4} -> {:.4} for {label}, \
         {:.4} -> {:.4} for gaussian; table in {}",
        heavy.corr_sq_before.abs(),
        heavy.corr_sq_after.abs(),
        gaussian.corr_sq_before.abs(),
        gaussian.corr_sq_after.abs(),
        out.join("rotation.csv").display()
    );
    Ok(())
}

fn demo_row(demo: &crate::identification::RotationDemo) -> Vec<f64> {
    vec![demo.corr_before, demo.corr_sq_before, demo.corr_after, demo.corr_sq_after]
}
