//! Monte Carlo harness: a fixed 14-variable, 3-factor data-generating
//! process with non-Gaussian factors, repeated estimation, and frequentist
//! metrics (bias, MSE, band length, coverage) for selected loadings.

use crate::error::{Error, Result};
use crate::gibbs::{run_chain, SamplerSettings};
use crate::identification::{normalize_posterior, NormalizationMode};
use crate::kernels::PearsonSampler;
use crate::model::ModelSpec;
use crate::priors::PriorHyperparams;
use crate::restrict::RestrictionSet;
use crate::rng::RngStream;
use crate::stats;
use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;

/// Law of the simulated factors; every variant is standardized to mean 0,
/// variance 1.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family")]
pub enum FactorDistribution {
    Gaussian,
    StudentT { dof: f64 },
    Pearson { skewness: f64, excess_kurtosis: f64 },
}

impl FactorDistribution {
    fn validate(&self) -> Result<()> {
        match *self {
            FactorDistribution::Gaussian => Ok(()),
            FactorDistribution::StudentT { dof } => {
                if dof > 2.0 && dof.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Domain(format!(
                        "unit-variance t factors need dof > 2, got {dof}"
                    )))
                }
            }
            FactorDistribution::Pearson { skewness, excess_kurtosis } => {
                PearsonSampler::new(skewness, excess_kurtosis).map(|_| ())
            }
        }
    }
}

enum FactorSampler {
    Gaussian,
    StudentT { dist: StudentT<f64>, scale: f64 },
    Pearson(PearsonSampler),
}

impl FactorSampler {
    fn build(distribution: FactorDistribution) -> Result<Self> {
        Ok(match distribution {
            FactorDistribution::Gaussian => FactorSampler::Gaussian,
            FactorDistribution::StudentT { dof } => {
                if !(dof > 2.0 && dof.is_finite()) {
                    return Err(Error::Domain(format!(
                        "unit-variance t factors need dof > 2, got {dof}"
                    )));
                }
                FactorSampler::StudentT {
                    dist: StudentT::new(dof).map_err(|e| Error::Domain(e.to_string()))?,
                    scale: ((dof - 2.0) / dof).sqrt(),
                }
            }
            FactorDistribution::Pearson { skewness, excess_kurtosis } => {
                FactorSampler::Pearson(PearsonSampler::new(skewness, excess_kurtosis)?)
            }
        })
    }

    fn sample(&self, rng: &mut RngStream) -> Result<f64> {
        Ok(match self {
            FactorSampler::Gaussian => StandardNormal.sample(rng),
            FactorSampler::StudentT { dist, scale } => scale * dist.sample(rng),
            FactorSampler::Pearson(p) => p.sample(rng)?,
        })
    }
}

/// The study's 14 x 3 loading matrix; the first variable does not load on
/// the first factor, which pins that loading's truth at zero.
pub fn dgp_loadings() -> DMatrix<f64> {
    #[rustfmt::skip]
    let rows_of_transpose: [[f64; 14]; 3] = [
        [0.0, 1.0, 1.0, 1.0, 1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
        [1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0, -1.0, 1.0, -1.0, 1.0, 1.0, 1.0],
        [-1.0, -1.0, -1.0, -1.0, -1.0, 1.0, -1.0, -1.0, -1.0, 1.0, -1.0, 1.0, -1.0, -1.0],
    ];
    DMatrix::from_fn(14, 3, |i, a| rows_of_transpose[a][i])
}

/// Everything the harness knows about a simulated data set.
#[derive(Debug, Clone)]
pub struct DgpTruth {
    pub loadings: DMatrix<f64>,
    pub factors: DMatrix<f64>,
}

/// Simulate y_t = L f_t + v_t with v_t standard normal and unit-variance
/// factors, row by row, so a longer sample extends a shorter one drawn
/// from the same stream.
pub fn generate_dgp(
    t: usize,
    distribution: FactorDistribution,
    rng: &mut RngStream,
) -> Result<(DMatrix<f64>, DgpTruth)> {
    if t == 0 {
        return Err(Error::SampleSize("simulation needs at least one observation".into()));
    }
    let loadings = dgp_loadings();
    let (n, r) = loadings.shape();
    let sampler = FactorSampler::build(distribution)?;
    let mut factors = DMatrix::zeros(t, r);
    let mut y = DMatrix::zeros(t, n);
    for ti in 0..t {
        for a in 0..r {
            factors[(ti, a)] = sampler.sample(rng)?;
        }
        for i in 0..n {
            let noise: f64 = StandardNormal.sample(rng);
            let mut v = noise;
            for a in 0..r {
                v += loadings[(i, a)] * factors[(ti, a)];
            }
            y[(ti, i)] = v;
        }
    }
    Ok((y, DgpTruth { loadings, factors }))
}

#[derive(Debug, Clone)]
pub struct MonteCarloConfig {
    pub replications: usize,
    pub t: usize,
    pub distribution: FactorDistribution,
    pub burn_in: usize,
    pub retain: usize,
    pub seed: u64,
    /// Report the truth itself as the point estimate: a harness self-test
    /// that must produce zero bias and MSE and undefined coverage.
    pub oracle: bool,
    /// Loadings (variable, factor) to report on; defaults to the first
    /// four variables of the first factor.
    pub track: Vec<(usize, usize)>,
}

impl MonteCarloConfig {
    pub fn new(replications: usize, t: usize, distribution: FactorDistribution, seed: u64) -> Self {
        MonteCarloConfig {
            replications,
            t,
            distribution,
            burn_in: 500,
            retain: 800,
            seed,
            oracle: false,
            track: vec![(0, 0), (1, 0), (2, 0), (3, 0)],
        }
    }

    fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Domain("need at least one replication".into()));
        }
        self.distribution.validate()?;
        if self.track.is_empty() {
            return Err(Error::Domain("no parameters selected for tracking".into()));
        }
        for &(i, a) in &self.track {
            if i >= 14 || a >= 3 {
                return Err(Error::Domain(format!(
                    "tracked loading ({i}, {a}) outside the 14 x 3 grid"
                )));
            }
        }
        Ok(())
    }
}

/// Frequentist metrics of one tracked loading across replications.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ParamMetrics {
    pub variable: usize,
    pub factor: usize,
    pub truth: f64,
    pub bias: f64,
    pub mse: f64,
    pub mean_band_length: f64,
    /// Fraction of replications whose 68% equal-tailed band contains the
    /// truth; None in oracle mode, where bands have zero width.
    pub coverage: Option<f64>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct MonteCarloReport {
    pub t: usize,
    pub replications_requested: usize,
    pub replications_used: usize,
    pub failures: usize,
    pub metrics: Vec<ParamMetrics>,
}

struct RepOutcome {
    mean: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

fn run_replication(config: &MonteCarloConfig, rep: usize) -> Result<RepOutcome> {
    // Stream 2j feeds the data, stream 2j+1 the chain, so replications are
    // independent and a longer-T study sees nested data per replication.
    let mut data_rng = RngStream::new(config.seed, 2 * rep as u64);
    let (y, truth) = generate_dgp(config.t, config.distribution, &mut data_rng)?;
    if config.oracle {
        let mean = config.track.iter().map(|&(i, a)| truth.loadings[(i, a)]).collect();
        return Ok(RepOutcome {
            mean,
            lower: config.track.iter().map(|&(i, a)| truth.loadings[(i, a)]).collect(),
            upper: config.track.iter().map(|&(i, a)| truth.loadings[(i, a)]).collect(),
        });
    }
    let spec = ModelSpec {
        n: 14,
        p: 0,
        r: 3,
        prior: PriorHyperparams::default(),
        restrictions: RestrictionSet::default(),
        standardize: false,
    };
    let x = DMatrix::from_element(config.t, 1, 1.0);
    let settings = SamplerSettings {
        burn_in: config.burn_in,
        retain: config.retain,
        thin: 1,
        griddy_grid: 200,
        seed: config.seed,
        stream: 2 * rep as u64 + 1,
    };
    let mut posterior = run_chain(&spec, &y, &x, None, &settings)?;
    normalize_posterior(
        &mut posterior,
        &NormalizationMode::Template(truth.loadings.clone()),
        None,
    )?;
    let mut mean = Vec::with_capacity(config.track.len());
    let mut lower = Vec::with_capacity(config.track.len());
    let mut upper = Vec::with_capacity(config.track.len());
    for &(i, a) in &config.track {
        let draws = posterior.loading_trace(i, a);
        mean.push(stats::mean(&draws));
        lower.push(stats::quantile(&draws, 0.16));
        upper.push(stats::quantile(&draws, 0.84));
    }
    Ok(RepOutcome { mean, lower, upper })
}

/// Run the full study: replications in parallel on independent streams,
/// failures counted and excluded, metrics aggregated per tracked loading.
pub fn run_monte_carlo(config: &MonteCarloConfig) -> Result<MonteCarloReport> {
    config.validate()?;
    let outcomes: Vec<Result<RepOutcome>> = (0..config.replications)
        .into_par_iter()
        .map(|rep| run_replication(config, rep))
        .collect();
    let mut used = Vec::new();
    let mut failures = 0usize;
    for o in outcomes {
        match o {
            Ok(out) => used.push(out),
            Err(e) => {
                failures += 1;
                log::warn!("replication failed and was excluded: {e}");
            }
        }
    }
    if used.is_empty() {
        return Err(Error::Estimator("every replication failed".into()));
    }
    let truth_l = dgp_loadings();
    let reps = used.len() as f64;
    let metrics = config
        .track
        .iter()
        .enumerate()
        .map(|(k, &(i, a))| {
            let truth = truth_l[(i, a)];
            let errs: Vec<f64> = used.iter().map(|o| o.mean[k] - truth).collect();
            let lengths: Vec<f64> = used.iter().map(|o| o.upper[k] - o.lower[k]).collect();
            let covered = used
                .iter()
                .filter(|o| o.lower[k] <= truth && truth <= o.upper[k])
                .count();
            ParamMetrics {
                variable: i,
                factor: a,
                truth,
                bias: stats::mean(&errs),
                mse: errs.iter().map(|e| e * e).sum::<f64>() / reps,
                mean_band_length: stats::mean(&lengths),
                coverage: if config.oracle { None } else { Some(covered as f64 / reps) },
            }
        })
        .collect();
    Ok(MonteCarloReport {
        t: config.t,
        replications_requested: config.replications,
        replications_used: used.len(),
        failures,
        metrics,
    })
}
