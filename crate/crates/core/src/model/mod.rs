//! The deterministic kernel: strata indexing, fixed constants, parameters,
//! covariates, model variants and the hazard computation shared by the
//! simulator, the sampler and the metrics.

mod kernel;

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::matrix::Matrix;
use crate::simulator::StateMatrix;

pub use kernel::{
    behavioural_adaptation, build_variant, center, chi_from_parts, deprivation_slope_shape,
    hazards, infectious_pressure, kron_mixing, random_walk_drive, transition_prob,
    weekday_covariate, ChiForm, WEEKDAY_EFFECT, WEEKEND_EFFECT,
};

/// Maps (age group, deprivation decile) to a flat stratum index.
///
/// Strata are ordered age-major: `index(k, j) = k * J + j` (zero based), which
/// matches the factor order of `C_A ⊗ C_D` so that block `(k, k')` of the
/// Kronecker mixing matrix is the deprivation submatrix scaled by `C_A[k, k']`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StrataLayout {
    num_deprivation: usize,
    num_age: usize,
}

impl StrataLayout {
    pub fn new(num_deprivation: usize, num_age: usize) -> Result<Self> {
        if num_deprivation == 0 || num_age == 0 {
            bail!(
                InvalidArgument,
                "layout needs at least one deprivation group and one age group"
            );
        }
        Ok(StrataLayout {
            num_deprivation,
            num_age,
        })
    }

    #[inline]
    pub fn num_deprivation(&self) -> usize {
        self.num_deprivation
    }

    #[inline]
    pub fn num_age(&self) -> usize {
        self.num_age
    }

    #[inline]
    pub fn num_strata(&self) -> usize {
        self.num_deprivation * self.num_age
    }

    #[inline]
    pub fn index(&self, age: usize, deprivation: usize) -> usize {
        debug_assert!(age < self.num_age && deprivation < self.num_deprivation);
        age * self.num_deprivation + deprivation
    }

    /// Inverse of [`index`](Self::index): `(age, deprivation)`.
    #[inline]
    pub fn coords(&self, stratum: usize) -> (usize, usize) {
        (stratum / self.num_deprivation, stratum % self.num_deprivation)
    }
}

/// Constants that are not estimated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedConfig {
    pub eta: f64,
    pub phi: f64,
    /// Sharpness of the `tanh` deprivation slope.
    pub xi: f64,
    /// E -> I rate per day.
    pub nu: f64,
    /// Baseline log-rate of I -> R.
    pub gamma0: f64,
    /// Step length in days.
    pub dt: f64,
    pub sigma_gamma1: f64,
    pub sigma_alpha0: f64,
    /// Per-day standard deviation of the random-walk increments.
    pub sigma_alpha: f64,
}

impl Default for FixedConfig {
    fn default() -> Self {
        FixedConfig {
            eta: 2.0,
            phi: 2.0,
            xi: 0.3,
            nu: 0.28,
            gamma0: libm::log(0.25),
            dt: 1.0,
            sigma_gamma1: 100.0,
            sigma_alpha0: 10.0,
            sigma_alpha: 0.005,
        }
    }
}

impl FixedConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("eta", self.eta),
            ("phi", self.phi),
            ("xi", self.xi),
            ("nu", self.nu),
            ("dt", self.dt),
            ("sigma_gamma1", self.sigma_gamma1),
            ("sigma_alpha0", self.sigma_alpha0),
            ("sigma_alpha", self.sigma_alpha),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                bail!(InvalidConfiguration, "{name} must be positive and finite, got {v}");
            }
        }
        if !self.gamma0.is_finite() {
            bail!(InvalidConfiguration, "gamma0 must be finite");
        }
        Ok(())
    }

    /// Mean number of days spent exposed.
    pub fn mean_latent_days(&self) -> f64 {
        1.0 / self.nu
    }

    /// Mean number of days spent infectious at the baseline removal rate.
    pub fn mean_infectious_days(&self) -> f64 {
        libm::exp(-self.gamma0)
    }
}

/// Estimated parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Age intercepts, each in (0, 1).
    pub psi: Vec<f64>,
    /// Deprivation slopes per age group, each in (0, 1).
    pub rho: Vec<f64>,
    /// Day-of-week effect on removal.
    pub gamma1: f64,
    /// Initial level of the transmission drive.
    pub alpha0: f64,
    /// Daily random-walk increments.
    pub alpha_inc: Vec<f64>,
}

impl ModelParams {
    /// Neutral parameters: flat intercepts and slopes, no drift.
    pub fn neutral(num_age: usize, num_days: usize, alpha0: f64) -> Self {
        ModelParams {
            psi: vec![0.5; num_age],
            rho: vec![0.5; num_age],
            gamma1: 0.0,
            alpha0,
            alpha_inc: vec![0.0; num_days],
        }
    }

    pub fn validate(&self, num_age: usize) -> Result<()> {
        if self.psi.len() != num_age || self.rho.len() != num_age {
            bail!(
                InvalidArgument,
                "psi and rho need {num_age} entries, got {} and {}",
                self.psi.len(),
                self.rho.len()
            );
        }
        for (name, v) in self.psi.iter().map(|v| ("psi", v)).chain(self.rho.iter().map(|v| ("rho", v))) {
            if !(*v > 0.0 && *v < 1.0) {
                bail!(InvalidArgument, "{name} entries must lie in (0, 1), got {v}");
            }
        }
        if !self.gamma1.is_finite()
            || !self.alpha0.is_finite()
            || self.alpha_inc.iter().any(|v| !v.is_finite())
        {
            bail!(InvalidArgument, "gamma1, alpha0 and alpha increments must be finite");
        }
        Ok(())
    }

    /// Transmission drive `a(t)` for `t = 0..=alpha_inc.len()`.
    pub fn drive(&self) -> Vec<f64> {
        random_walk_drive(self.alpha0, &self.alpha_inc)
    }

    /// Drive at day `t`; held at its last value beyond the fitted window.
    pub fn drive_at(&self, t: usize) -> f64 {
        self.alpha0 + self.alpha_inc.iter().take(t).sum::<f64>()
    }

    /// Parameters for forward runs that start where the fitted window ends:
    /// the drive is frozen at `a(T)`.
    pub fn terminal(&self) -> ModelParams {
        ModelParams {
            psi: self.psi.clone(),
            rho: self.rho.clone(),
            gamma1: self.gamma1,
            alpha0: self.drive_at(self.alpha_inc.len()),
            alpha_inc: Vec::new(),
        }
    }
}

/// Observed inputs that enter the hazards.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariates {
    /// Deprivation index per group, 1 = most deprived.
    pub deprivation: Vec<f64>,
    /// Day-of-week effect per simulated day.
    pub weekday: Vec<f64>,
    /// Population per stratum.
    pub population: Vec<f64>,
    pub age_mixing: Matrix,
    pub deprivation_mixing: Matrix,
}

impl Covariates {
    /// Deciles `1..=J`, homogeneous mixing and the given populations.
    pub fn homogeneous(layout: &StrataLayout, population: Vec<f64>, weekday: Vec<f64>) -> Self {
        let j = layout.num_deprivation();
        let k = layout.num_age();
        Covariates {
            deprivation: (1..=j).map(|d| d as f64).collect(),
            weekday,
            population,
            age_mixing: Matrix::ones(k, k),
            deprivation_mixing: Matrix::ones(j, j),
        }
    }

    pub fn validate(&self, layout: &StrataLayout) -> Result<()> {
        let (j, k, l) = (layout.num_deprivation(), layout.num_age(), layout.num_strata());
        if self.deprivation.len() != j {
            bail!(InvalidArgument, "deprivation index has {} entries, expected {j}", self.deprivation.len());
        }
        if self.population.len() != l {
            bail!(InvalidArgument, "population has {} entries, expected {l}", self.population.len());
        }
        if let Some(n) = self.population.iter().find(|n| !(**n > 0.0 && n.is_finite())) {
            bail!(InvalidArgument, "populations must be positive, got {n}");
        }
        if self.age_mixing.shape() != (k, k) {
            bail!(InvalidArgument, "age mixing matrix must be {k}x{k}");
        }
        if self.deprivation_mixing.shape() != (j, j) {
            bail!(InvalidArgument, "deprivation mixing matrix must be {j}x{j}");
        }
        let nonneg = |m: &Matrix| m.as_slice().iter().all(|v| *v >= 0.0 && v.is_finite());
        if !nonneg(&self.age_mixing) || !nonneg(&self.deprivation_mixing) {
            bail!(InvalidArgument, "mixing matrices must be entrywise non-negative");
        }
        Ok(())
    }
}

/// The four nested model forms compared by CRPS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelVariant {
    /// Unit behavioural vector, homogeneous age mixing.
    A,
    /// Unit behavioural vector, empirical age mixing.
    B,
    /// Deprivation slopes only, empirical age mixing.
    C,
    /// Age intercepts and deprivation slopes, empirical age mixing.
    D,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 4] = [ModelVariant::A, ModelVariant::B, ModelVariant::C, ModelVariant::D];

    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::A => "A",
            ModelVariant::B => "B",
            ModelVariant::C => "C",
            ModelVariant::D => "D",
        }
    }
}

impl core::str::FromStr for ModelVariant {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(ModelVariant::A),
            "B" | "b" => Ok(ModelVariant::B),
            "C" | "c" => Ok(ModelVariant::C),
            "D" | "d" => Ok(ModelVariant::D),
            other => bail!(InvalidArgument, "unknown model variant {other:?}"),
        }
    }
}

/// Per-stratum hazard rates for one day.
#[derive(Debug, Clone, PartialEq)]
pub struct Hazards {
    pub se: Vec<f64>,
    pub ei: Vec<f64>,
    pub ir: Vec<f64>,
}

/// A validated model: layout, constants, covariates (with the variant's
/// effective age mixing) and the precomputed deprivation slope `f(d̃)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    layout: StrataLayout,
    config: FixedConfig,
    covariates: Covariates,
    variant: ModelVariant,
    chi_form: ChiForm,
    slope: Vec<f64>,
}

impl Model {
    pub fn new(
        layout: StrataLayout,
        config: FixedConfig,
        covariates: Covariates,
        variant: ModelVariant,
    ) -> Result<Self> {
        config.validate()?;
        covariates.validate(&layout)?;
        let (chi_form, age_mixing) = build_variant(variant, &covariates);
        let slope = deprivation_slope_shape(&center(&covariates.deprivation)?, config.xi);
        Ok(Model {
            layout,
            config,
            covariates: Covariates {
                age_mixing,
                ..covariates
            },
            variant,
            chi_form,
            slope,
        })
    }

    pub fn layout(&self) -> &StrataLayout {
        &self.layout
    }

    pub fn config(&self) -> &FixedConfig {
        &self.config
    }

    pub fn covariates(&self) -> &Covariates {
        &self.covariates
    }

    pub fn variant(&self) -> ModelVariant {
        self.variant
    }

    pub fn chi_form(&self) -> ChiForm {
        self.chi_form
    }

    /// `f(d̃)` evaluated per deprivation group.
    pub fn slope(&self) -> &[f64] {
        &self.slope
    }

    pub fn population(&self) -> &[f64] {
        &self.covariates.population
    }

    /// Same model with the day-of-week covariate replaced.
    pub fn with_weekdays(&self, weekday: Vec<f64>) -> Model {
        let mut m = self.clone();
        m.covariates.weekday = weekday;
        m
    }

    pub fn weekday(&self, t: usize) -> Result<f64> {
        match self.covariates.weekday.get(t) {
            Some(w) => Ok(*w),
            None => bail!(
                InvalidArgument,
                "no day-of-week covariate for day {t} (have {})",
                self.covariates.weekday.len()
            ),
        }
    }

    /// Behavioural adaptation vector for `params` under this variant.
    pub fn chi(&self, params: &ModelParams) -> Result<Vec<f64>> {
        params.validate(self.layout.num_age())?;
        let rho_tilde: Vec<f64> = params.rho.iter().map(|r| r - 0.5).collect();
        self.chi_with_slopes(&params.psi, &rho_tilde)
    }

    /// As [`chi`](Self::chi) but with the centred slopes `ρ̃` given directly.
    pub fn chi_with_slopes(&self, psi: &[f64], rho_tilde: &[f64]) -> Result<Vec<f64>> {
        let psi_tilde = center(psi)?;
        chi_from_parts(
            self.chi_form,
            &psi_tilde,
            rho_tilde,
            &self.slope,
            &self.config,
        )
    }

    /// Full `L x L` contact structure `C_A ⊗ C_D`.
    pub fn kron(&self) -> Matrix {
        kron_mixing(&self.covariates.age_mixing, &self.covariates.deprivation_mixing)
            .expect("validated covariates")
    }

    /// Hazards on one day, with an optional replacement deprivation mixing
    /// matrix (used by mixing scenarios).
    pub fn hazards(
        &self,
        state: &StateMatrix,
        chi: &[f64],
        drive: f64,
        gamma1: f64,
        weekday: f64,
        deprivation_mixing: Option<&Matrix>,
    ) -> Result<Hazards> {
        let cov = &self.covariates;
        let cd = deprivation_mixing.unwrap_or(&cov.deprivation_mixing);
        kernel::hazards_with(
            &self.layout,
            state,
            chi,
            &cov.population,
            &cov.age_mixing,
            cd,
            drive,
            gamma1,
            weekday,
            &self.config,
        )
    }
}

/// All-ones `n x 1` helper used by variants with no behavioural structure.
pub(crate) fn unit_vector(n: usize) -> Vec<f64> {
    vec![1.0; n]
}
