//! Run configuration: one TOML file with every default embedded, parsed
//! into typed sections, resolved against data column names, and reduced
//! to a canonical string whose hash stamps all output artifacts.

use crate::dic::{CenterStatistic, DicSettings};
use crate::error::{Error, Result};
use crate::gibbs::SamplerSettings;
use crate::identification::RotationSource;
use crate::io::config_hash;
use crate::model::ModelSpec;
use crate::priors::PriorHyperparams;
use crate::restrict::{ProxySpec, RestrictionSet, SignConstraint};
use crate::simulation::{FactorDistribution, MonteCarloConfig};
use crate::structural::{IrfNormalization, NarrativeDate};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// CSV with one named column per variable, observations in rows.
    pub path: Option<PathBuf>,
    /// Column treated as the external instrument; excluded from the VAR.
    pub proxy_column: Option<String>,
    pub output_dir: PathBuf,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection { path: None, proxy_column: None, output_dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub lags: usize,
    pub factors: usize,
    pub standardize: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { lags: 12, factors: 4, standardize: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub burn_in: usize,
    pub retain: usize,
    pub thin: usize,
    pub griddy_grid: usize,
    pub seed: u64,
    /// Worker threads; 0 means one per available core.
    pub jobs: usize,
}

impl Default for SamplerSection {
    fn default() -> Self {
        SamplerSection {
            burn_in: 5000,
            retain: 5000,
            thin: 1,
            griddy_grid: 200,
            seed: 12345,
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DicSection {
    pub importance_draws: usize,
    pub fit_draws: usize,
    /// Evaluate the deviance at every stride-th retained draw.
    pub stride: usize,
    /// "mean" or "median".
    pub center: String,
    /// Factor counts scanned by the model-selection table.
    pub factors: Vec<usize>,
    /// Also estimate the proxy-augmented model and report both rows.
    pub proxy_comparison: bool,
}

impl Default for DicSection {
    fn default() -> Self {
        DicSection {
            importance_draws: 500,
            fit_draws: 2000,
            stride: 1,
            center: "mean".into(),
            factors: vec![1, 2, 3, 4],
            proxy_comparison: false,
        }
    }
}

/// A loading entry named by data column (or decimal index) and factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZeroEntry {
    pub variable: String,
    pub factor: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignEntry {
    pub variable: String,
    pub factor: usize,
    /// "+" or "-".
    pub sign: String,
}

/// The proxy equation always loads on its target factor alone; the
/// exogeneity zeros on the other factors are structural, not optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProxySection {
    /// Factor the instrument is assumed to measure.
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RestrictionsSection {
    pub zeros: Vec<ZeroEntry>,
    pub signs: Vec<SignEntry>,
    pub proxy: Option<ProxySection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IrfSection {
    pub horizons: usize,
    /// Pointwise equal-tailed band mass.
    pub band: f64,
    /// Variable whose impact response is pinned; unset leaves responses
    /// in shock units.
    pub normalize_variable: Option<String>,
    pub normalize_value: f64,
}

impl Default for IrfSection {
    fn default() -> Self {
        IrfSection { horizons: 48, band: 0.68, normalize_variable: None, normalize_value: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelSection {
    /// Equation whose loading on each factor is reported; defaults to the
    /// first variable.
    pub target_equation: Option<String>,
    /// Observation indices with an expected shock sign.
    pub narrative: Vec<NarrativeDate>,
}

impl Default for LabelSection {
    fn default() -> Self {
        LabelSection { target_equation: None, narrative: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloSection {
    pub replications: usize,
    pub t: usize,
    pub distribution: FactorDistribution,
    pub burn_in: usize,
    pub retain: usize,
    /// Report the truth as the estimate; harness self-test.
    pub oracle: bool,
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        MonteCarloSection {
            replications: 200,
            t: 1000,
            distribution: FactorDistribution::StudentT { dof: 4.0 },
            burn_in: 500,
            retain: 800,
            oracle: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RotationSection {
    /// "gaussian" or "student-t".
    pub source: String,
    pub dof: f64,
    pub angle: f64,
    pub t: usize,
}

impl Default for RotationSection {
    fn default() -> Self {
        RotationSection {
            source: "student-t".into(),
            dof: 4.0,
            angle: std::f64::consts::PI / 5.0,
            t: 1_000_000,
        }
    }
}

/// The whole run configuration. Defaults alone are a valid simulation
/// setup; estimation additionally needs `data.path`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    pub model: ModelSection,
    pub prior: PriorHyperparams,
    pub sampler: SamplerSection,
    pub dic: DicSection,
    pub restrictions: RestrictionsSection,
    pub irf: IrfSection,
    pub label: LabelSection,
    pub montecarlo: MonteCarloSection,
    pub rotation: RotationSection,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        if self.sampler.retain == 0 {
            return Err(Error::Config("sampler.retain must be positive".into()));
        }
        if self.sampler.thin == 0 {
            return Err(Error::Config("sampler.thin must be positive".into()));
        }
        if self.sampler.griddy_grid < 2 {
            return Err(Error::Config("sampler.griddy_grid needs at least 2 points".into()));
        }
        if self.dic.stride == 0 {
            return Err(Error::Config("dic.stride must be positive".into()));
        }
        if self.dic.factors.is_empty() {
            return Err(Error::Config("dic.factors must name at least one model".into()));
        }
        self.center_statistic()?;
        if !(self.irf.band > 0.0 && self.irf.band < 1.0) {
            return Err(Error::Config("irf.band must lie strictly in (0, 1)".into()));
        }
        if self.irf.normalize_variable.is_some() && self.irf.normalize_value == 0.0 {
            return Err(Error::Config("irf.normalize_value must be nonzero".into()));
        }
        self.rotation_source()?;
        if let Some(proxy) = &self.restrictions.proxy {
            if proxy.target >= self.model.factors {
                return Err(Error::Config(format!(
                    "restrictions.proxy.target {} outside {} factors",
                    proxy.target, self.model.factors
                )));
            }
        }
        Ok(())
    }

    /// Canonical text for hashing: a fresh serialization, so two configs
    /// compare equal iff their hashes do, regardless of source formatting.
    /// The output directory is excluded; it determines where artifacts go,
    /// not what they contain.
    pub fn canonical_toml(&self) -> String {
        let mut canonical = self.clone();
        canonical.data.output_dir = DataSection::default().output_dir;
        toml::to_string(&canonical).expect("config serialization cannot fail")
    }

    pub fn hash(&self) -> String {
        config_hash(self.canonical_toml().as_bytes())
    }

    pub fn center_statistic(&self) -> Result<CenterStatistic> {
        match self.dic.center.as_str() {
            "mean" => Ok(CenterStatistic::Mean),
            "median" => Ok(CenterStatistic::Median),
            other => Err(Error::Config(format!(
                "dic.center must be \"mean\" or \"median\", got {other:?}"
            ))),
        }
    }

    pub fn rotation_source(&self) -> Result<RotationSource> {
        match self.rotation.source.as_str() {
            "gaussian" => Ok(RotationSource::Gaussian),
            "student-t" => Ok(RotationSource::StudentT(self.rotation.dof)),
            other => Err(Error::Config(format!(
                "rotation.source must be \"gaussian\" or \"student-t\", got {other:?}"
            ))),
        }
    }

    pub fn sampler_settings(&self, stream: u64) -> SamplerSettings {
        SamplerSettings {
            burn_in: self.sampler.burn_in,
            retain: self.sampler.retain,
            thin: self.sampler.thin,
            griddy_grid: self.sampler.griddy_grid,
            seed: self.sampler.seed,
            stream,
        }
    }

    pub fn dic_settings(&self) -> Result<DicSettings> {
        Ok(DicSettings {
            importance_draws: self.dic.importance_draws,
            fit_draws: self.dic.fit_draws,
            stride: self.dic.stride,
            center: self.center_statistic()?,
        })
    }

    /// Resolve restriction entries against the estimation columns and
    /// assemble the model specification for `n` variables.
    pub fn model_spec(&self, names: &[String], factors: usize) -> Result<ModelSpec> {
        let mut restrictions = RestrictionSet::default();
        for entry in &self.restrictions.zeros {
            let v = resolve_variable(&entry.variable, names)?;
            if entry.factor >= factors {
                return Err(Error::Config(format!(
                    "zero restriction on factor {} but the model has {factors}",
                    entry.factor
                )));
            }
            restrictions.add_zero(v, entry.factor);
        }
        for entry in &self.restrictions.signs {
            let v = resolve_variable(&entry.variable, names)?;
            if entry.factor >= factors {
                return Err(Error::Config(format!(
                    "sign restriction on factor {} but the model has {factors}",
                    entry.factor
                )));
            }
            let sign = match entry.sign.as_str() {
                "+" => SignConstraint::Positive,
                "-" => SignConstraint::Negative,
                other => {
                    return Err(Error::Config(format!(
                        "sign must be \"+\" or \"-\", got {other:?}"
                    )))
                }
            };
            restrictions.add_sign(v, entry.factor, sign);
        }
        if let Some(proxy) = &self.restrictions.proxy {
            let name = self.data.proxy_column.clone().ok_or_else(|| {
                Error::Config("restrictions.proxy set but data.proxy_column is not".into())
            })?;
            if proxy.target >= factors {
                return Err(Error::Config(format!(
                    "proxy target factor {} outside {factors} factors",
                    proxy.target
                )));
            }
            restrictions = restrictions.with_proxy(ProxySpec { target: proxy.target, name });
        }
        let spec = ModelSpec {
            n: names.len(),
            p: self.model.lags,
            r: factors,
            prior: self.prior.clone(),
            restrictions,
            standardize: self.model.standardize,
        };
        Ok(spec)
    }

    pub fn irf_normalization(&self, names: &[String]) -> Result<Option<IrfNormalization>> {
        match &self.irf.normalize_variable {
            None => Ok(None),
            Some(name) => Ok(Some(IrfNormalization {
                variable: resolve_variable(name, names)?,
                value: self.irf.normalize_value,
            })),
        }
    }

    pub fn monte_carlo(&self) -> MonteCarloConfig {
        let mut mc = MonteCarloConfig::new(
            self.montecarlo.replications,
            self.montecarlo.t,
            self.montecarlo.distribution,
            self.sampler.seed,
        );
        mc.burn_in = self.montecarlo.burn_in;
        mc.retain = self.montecarlo.retain;
        mc.oracle = self.montecarlo.oracle;
        mc
    }
}

/// Accept a data column name or a 0-based decimal index.
pub fn resolve_variable(token: &str, names: &[String]) -> Result<usize> {
    if let Some(idx) = names.iter().position(|n| n == token) {
        return Ok(idx);
    }
    if let Ok(idx) = token.parse::<usize>() {
        if idx < names.len() {
            return Ok(idx);
        }
        return Err(Error::Config(format!(
            "variable index {idx} outside the {} data columns",
            names.len()
        )));
    }
    Err(Error::Config(format!("unknown variable {token:?}")))
}
