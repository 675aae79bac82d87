//! JSON run configuration. Every section has defaults, so `{}` is a valid
//! configuration; unknown keys are rejected at every level.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stratseir::inference::ChainConfig;
use stratseir::scenarios::{
    BehaviouralRampSpec, MixingForm, MixingRampSpec, Preset, PRESET_LAG, PRESET_OMEGA,
};
use stratseir::{FixedConfig, ModelVariant, StrataLayout};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub layout: LayoutConfig,
    pub model: ModelConfig,
    pub priors: PriorConfig,
    pub chain: ChainSettings,
    pub data: DataConfig,
    /// Directory written by `fit`; read by forecast, rt, crps and scenario.
    pub posterior_dir: Option<PathBuf>,
    pub forecast: ForecastConfig,
    pub rt: RtConfig,
    pub scenario: Option<ScenarioConfig>,
    pub synthetic: SyntheticSpec,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            layout: LayoutConfig::default(),
            model: ModelConfig::default(),
            priors: PriorConfig::default(),
            chain: ChainSettings::default(),
            data: DataConfig::default(),
            posterior_dir: None,
            forecast: ForecastConfig::default(),
            rt: RtConfig::default(),
            scenario: None,
            synthetic: SyntheticSpec::default(),
            seed: 1,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::input(path, e.to_string()))?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Makes relative data and posterior paths relative to `dir`.
    pub fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = dir.join(&*path);
                }
            }
        };
        fix(&mut self.data.cases);
        fix(&mut self.data.population);
        fix(&mut self.data.contact);
        fix(&mut self.data.initial_state);
        fix(&mut self.posterior_dir);
    }

    pub fn validate(&self) -> CliResult<()> {
        self.strata_layout()?;
        self.age_labels()?;
        self.fixed_config().validate()?;
        self.variant()?;
        if let Some(d) = &self.model.deprivation_index {
            if d.len() != self.layout.num_deprivation {
                return Err(CliError::Config(format!(
                    "deprivation_index has {} entries, layout has {} deciles",
                    d.len(),
                    self.layout.num_deprivation
                )));
            }
        }
        if self.chain.chains == 0 {
            return Err(CliError::Config("chain.chains must be at least 1".into()));
        }
        self.chain_config(0).validate()?;
        let fc = &self.forecast;
        if fc.horizon == 0 || fc.draws == 0 {
            return Err(CliError::Config("forecast horizon and draws must be positive".into()));
        }
        if !(0.0..=1.0).contains(&fc.lower_quantile)
            || !(0.0..=1.0).contains(&fc.upper_quantile)
            || fc.lower_quantile > fc.upper_quantile
        {
            return Err(CliError::Config("forecast quantiles must satisfy 0 <= lower <= upper <= 1".into()));
        }
        if self.data.training_days == Some(0) {
            return Err(CliError::Config("data.training_days must be positive".into()));
        }
        if !(self.data.ascertainment >= 1.0) {
            return Err(CliError::Config("data.ascertainment must be at least 1".into()));
        }
        if let Some(sc) = &self.scenario {
            sc.validate()?;
        }
        Ok(())
    }

    pub fn strata_layout(&self) -> CliResult<StrataLayout> {
        Ok(StrataLayout::new(self.layout.num_deprivation, self.layout.num_age)?)
    }

    pub fn age_labels(&self) -> CliResult<Vec<String>> {
        let k = self.layout.num_age;
        let labels = match &self.layout.age_labels {
            Some(l) => l.clone(),
            None => default_age_labels(k),
        };
        if labels.len() != k {
            return Err(CliError::Config(format!("{} age labels for {k} age groups", labels.len())));
        }
        let mut sorted = labels.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != k {
            return Err(CliError::Config("age labels must be distinct".into()));
        }
        Ok(labels)
    }

    pub fn variant(&self) -> CliResult<ModelVariant> {
        Ok(self.model.variant.parse()?)
    }

    pub fn deprivation_index(&self) -> Vec<f64> {
        match &self.model.deprivation_index {
            Some(d) => d.clone(),
            None => (1..=self.layout.num_deprivation).map(|d| d as f64).collect(),
        }
    }

    pub fn fixed_config(&self) -> FixedConfig {
        let m = &self.model;
        FixedConfig {
            eta: m.eta,
            phi: m.phi,
            xi: m.xi,
            nu: m.nu,
            gamma0: m.gamma0,
            dt: m.dt,
            sigma_gamma1: self.priors.sigma_gamma1,
            sigma_alpha0: self.priors.sigma_alpha0,
            sigma_alpha: self.priors.sigma_alpha,
        }
    }

    pub fn chain_config(&self, chain: u64) -> ChainConfig {
        let c = &self.chain;
        ChainConfig {
            iterations: c.iterations,
            burn_in: c.burn_in,
            thin: c.thin,
            seed: self.seed,
            chain,
            latent_moves: c.latent_moves,
            max_shift: c.max_shift,
            logit_scale: c.logit_scale,
            gamma1_scale: c.gamma1_scale,
            alpha0_scale: c.alpha0_scale,
            adapt_every: c.adapt_every,
            use_likelihood: true,
            update_params: true,
            update_latents: true,
            store_latents: c.store_latents,
            initial_params: None,
            delays: None,
        }
    }
}

/// `"0-9"`, `"10-19"`, … with the last group open-ended (`"70+"` for eight
/// groups).
pub fn default_age_labels(k: usize) -> Vec<String> {
    (0..k)
        .map(|g| {
            if g + 1 == k {
                format!("{}+", 10 * g)
            } else {
                format!("{}-{}", 10 * g, 10 * g + 9)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutConfig {
    pub num_deprivation: usize,
    pub num_age: usize,
    pub age_labels: Option<Vec<String>>,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig {
            num_deprivation: 10,
            num_age: 8,
            age_labels: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: String,
    pub eta: f64,
    pub phi: f64,
    pub xi: f64,
    pub nu: f64,
    pub gamma0: f64,
    pub dt: f64,
    /// Deprivation index per decile; defaults to `1..=J`.
    pub deprivation_index: Option<Vec<f64>>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let f = FixedConfig::default();
        ModelConfig {
            variant: "D".into(),
            eta: f.eta,
            phi: f.phi,
            xi: f.xi,
            nu: f.nu,
            gamma0: f.gamma0,
            dt: f.dt,
            deprivation_index: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub sigma_gamma1: f64,
    pub sigma_alpha0: f64,
    pub sigma_alpha: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        let f = FixedConfig::default();
        PriorConfig {
            sigma_gamma1: f.sigma_gamma1,
            sigma_alpha0: f.sigma_alpha0,
            sigma_alpha: f.sigma_alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSettings {
    pub chains: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub latent_moves: usize,
    pub max_shift: usize,
    pub adapt_every: usize,
    pub logit_scale: f64,
    pub gamma1_scale: f64,
    pub alpha0_scale: f64,
    pub store_latents: bool,
}

impl Default for ChainSettings {
    fn default() -> Self {
        let c = ChainConfig::default();
        ChainSettings {
            chains: 2,
            iterations: c.iterations,
            burn_in: c.burn_in,
            thin: c.thin,
            latent_moves: c.latent_moves,
            max_shift: c.max_shift,
            adapt_every: c.adapt_every,
            logit_scale: c.logit_scale,
            gamma1_scale: c.gamma1_scale,
            alpha0_scale: c.alpha0_scale,
            store_latents: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub cases: Option<PathBuf>,
    pub population: Option<PathBuf>,
    /// Age contact matrix; homogeneous mixing when absent.
    pub contact: Option<PathBuf>,
    /// Initial compartments; derived from early cases when absent.
    pub initial_state: Option<PathBuf>,
    /// Multiplier applied to early case counts when deriving the initial
    /// exposed and infectious counts.
    pub ascertainment: f64,
    /// Fit only the first this many days; later days are held out for
    /// scoring.
    pub training_days: Option<usize>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            cases: None,
            population: None,
            contact: None,
            initial_state: None,
            ascertainment: 1.5,
            training_days: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastConfig {
    pub horizon: usize,
    /// Posterior draws used for forecast ensembles (evenly spaced).
    pub draws: usize,
    pub lower_quantile: f64,
    pub upper_quantile: f64,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
            horizon: 56,
            draws: 200,
            lower_quantile: 0.05,
            upper_quantile: 0.95,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DenominatorChoice {
    #[default]
    RemovalProbability,
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RtConfig {
    pub denominator: DenominatorChoice,
}

/// Exactly one of `preset`, `mixing`, `behavioural` or `depletion`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub mixing: Option<MixingConfig>,
    #[serde(default)]
    pub behavioural: Option<BehaviouralConfig>,
    #[serde(default)]
    pub depletion: Option<DepletionConfig>,
    #[serde(default = "default_switching_window")]
    pub switching_window: usize,
}

fn default_switching_window() -> usize {
    14
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingConfig {
    pub u_diag: Vec<f64>,
    pub form: String,
    #[serde(default = "preset_omega")]
    pub omega: f64,
    #[serde(default = "preset_lag")]
    pub lag: f64,
}

fn preset_omega() -> f64 {
    PRESET_OMEGA
}

fn preset_lag() -> f64 {
    PRESET_LAG
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviouralConfig {
    pub zeta: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepletionConfig {
    pub factor: f64,
}

/// A scenario before the cumulative case counts needed by depletion are
/// known.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioChoice {
    Preset(Preset),
    Mixing(MixingRampSpec),
    Behavioural(BehaviouralRampSpec),
    Depletion(f64),
}

impl ScenarioConfig {
    pub fn from_preset(name: &str) -> CliResult<Self> {
        let cfg = ScenarioConfig {
            preset: Some(name.to_string()),
            mixing: None,
            behavioural: None,
            depletion: None,
            switching_window: default_switching_window(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.choice().map(|_| ())
    }

    pub fn choice(&self) -> CliResult<ScenarioChoice> {
        let set = [
            self.preset.is_some(),
            self.mixing.is_some(),
            self.behavioural.is_some(),
            self.depletion.is_some(),
        ];
        if set.iter().filter(|s| **s).count() != 1 {
            return Err(CliError::Config(
                "scenario needs exactly one of preset, mixing, behavioural, depletion".into(),
            ));
        }
        if self.switching_window == 0 {
            return Err(CliError::Config("switching_window must be positive".into()));
        }
        if let Some(p) = &self.preset {
            return Ok(ScenarioChoice::Preset(p.parse()?));
        }
        if let Some(m) = &self.mixing {
            let form: MixingForm = m.form.parse()?;
            let spec = MixingRampSpec {
                u_diag: m.u_diag.clone(),
                form,
                omega: m.omega,
                lag: m.lag,
            };
            spec.validate()?;
            return Ok(ScenarioChoice::Mixing(spec));
        }
        if let Some(b) = &self.behavioural {
            let spec = BehaviouralRampSpec {
                zeta: b.zeta,
                epsilon: b.epsilon,
            };
            spec.validate()?;
            return Ok(ScenarioChoice::Behavioural(spec));
        }
        let factor = self.depletion.as_ref().map(|d| d.factor).unwrap_or_default();
        if !(factor >= 0.0 && factor.is_finite()) {
            return Err(stratseir::Error::InvalidSpec(format!("depletion factor must be non-negative, got {factor}")).into());
        }
        Ok(ScenarioChoice::Depletion(factor))
    }
}

/// A scalar applied to every stratum or one value per stratum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerStratum<T> {
    Uniform(T),
    Each(Vec<T>),
}

impl<T: Copy> PerStratum<T> {
    pub fn expand(&self, l: usize, what: &str) -> CliResult<Vec<T>> {
        match self {
            PerStratum::Uniform(v) => Ok(vec![*v; l]),
            PerStratum::Each(v) if v.len() == l => Ok(v.clone()),
            PerStratum::Each(v) => Err(CliError::Config(format!(
                "{what} has {} entries, expected {l}",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitParams {
    pub psi: Vec<f64>,
    pub rho: Vec<f64>,
    #[serde(default)]
    pub gamma1: f64,
    pub alpha0: f64,
    /// Daily drive increments; zero when absent.
    #[serde(default)]
    pub alpha_inc: Option<Vec<f64>>,
}

/// Generating parameters: explicit values or the string `"prior"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeneratingParams {
    Explicit(ExplicitParams),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub num_days: usize,
    pub start_date: chrono::NaiveDate,
    pub params: GeneratingParams,
    /// Population per stratum; `data.population` is used when absent.
    pub population: Option<PerStratum<u64>>,
    pub initial_exposed: PerStratum<u64>,
    pub initial_infectious: PerStratum<u64>,
    /// Age contact matrix rows; `data.contact` (or homogeneous) when absent.
    pub age_mixing: Option<Vec<Vec<f64>>>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            num_days: 28,
            start_date: chrono::NaiveDate::from_ymd_opt(2021, 8, 1).expect("valid date"),
            params: GeneratingParams::Named("prior".into()),
            population: None,
            initial_exposed: PerStratum::Uniform(10),
            initial_infectious: PerStratum::Uniform(10),
            age_mixing: None,
        }
    }
}
