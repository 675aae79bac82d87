//! Synthetic case data generated by the forward simulator, for testing the
//! fitting pipeline where real line lists cannot be shared.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Open01};
use serde::Serialize;
use stratseir::simulator::simulate;
use stratseir::{FixedConfig, Matrix, Model, ModelParams, StateMatrix, StreamSeed};

use crate::config::{ExplicitParams, GeneratingParams, PerStratum, RunConfig};
use crate::error::{CliError, CliResult};
use crate::io::{self, CaseDataset};
use crate::pipeline::build_model;

/// Simulated cases together with everything needed to refit them.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub cases: CaseDataset,
    pub population: Vec<u64>,
    pub initial: StateMatrix,
    pub params: ModelParams,
    pub contact: Option<Matrix>,
}

/// Draws generating parameters from the priors: `ψ, ρ ~ U(0, 1)` and
/// zero-mean Gaussians for `γ1`, `α0` and the drive increments.
pub fn draw_from_prior(num_age: usize, num_days: usize, cfg: &FixedConfig, rng: &mut impl Rng) -> ModelParams {
    let psi = (0..num_age).map(|_| Open01.sample(rng)).collect();
    let rho = (0..num_age).map(|_| Open01.sample(rng)).collect();
    let gauss = |sd: f64| Normal::new(0.0, sd).expect("positive sd");
    ModelParams {
        psi,
        rho,
        gamma1: gauss(cfg.sigma_gamma1).sample(rng),
        alpha0: gauss(cfg.sigma_alpha0).sample(rng),
        alpha_inc: gauss(cfg.sigma_alpha).sample_iter(rng).take(num_days).collect(),
    }
}

fn explicit_params(p: &ExplicitParams, num_days: usize) -> CliResult<ModelParams> {
    let alpha_inc = match &p.alpha_inc {
        Some(a) if a.len() == num_days => a.clone(),
        Some(a) => {
            return Err(CliError::Config(format!(
                "synthetic alpha_inc has {} entries, expected {num_days}",
                a.len()
            )))
        }
        None => vec![0.0; num_days],
    };
    Ok(ModelParams {
        psi: p.psi.clone(),
        rho: p.rho.clone(),
        gamma1: p.gamma1,
        alpha0: p.alpha0,
        alpha_inc,
    })
}

/// Model, initial state and parameters described by `cfg.synthetic`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSetup {
    pub model: Model,
    pub initial: StateMatrix,
    pub params: ModelParams,
    pub population: Vec<u64>,
    pub contact: Option<Matrix>,
}

pub fn synthetic_setup(cfg: &RunConfig) -> CliResult<SyntheticSetup> {
    let spec = &cfg.synthetic;
    let layout = cfg.strata_layout()?;
    let labels = cfg.age_labels()?;
    let l = layout.num_strata();
    if spec.num_days == 0 {
        return Err(CliError::Config("synthetic.num_days must be positive".into()));
    }
    let population = match (&spec.population, &cfg.data.population) {
        (Some(p), _) => p.expand(l, "synthetic.population")?,
        (None, Some(path)) => io::load_population(path, &layout, &labels)?,
        (None, None) => return Err(CliError::Config("synthetic data needs a population".into())),
    };
    if population.contains(&0) {
        return Err(CliError::Config("synthetic population must be positive".into()));
    }
    let contact = match (&spec.age_mixing, &cfg.data.contact) {
        (Some(rows), _) => Some(Matrix::from_rows(rows)?),
        (None, Some(path)) => Some(io::load_contact_matrix(path, &labels)?),
        (None, None) => None,
    };
    let exposed = spec.initial_exposed.expand(l, "synthetic.initial_exposed")?;
    let infectious = spec.initial_infectious.expand(l, "synthetic.initial_infectious")?;
    let initial = StateMatrix::seeded(&population, &exposed, &infectious)?;
    if exposed.iter().chain(&infectious).all(|v| *v == 0) {
        log::warn!("no exposed or infectious seed: the synthetic cases are all zero");
    }
    let params = match &spec.params {
        GeneratingParams::Explicit(p) => explicit_params(p, spec.num_days)?,
        GeneratingParams::Named(name) if name == "prior" => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            draw_from_prior(layout.num_age(), spec.num_days, &cfg.fixed_config(), &mut rng)
        }
        GeneratingParams::Named(other) => {
            return Err(CliError::Config(format!(
                "synthetic.params must be \"prior\" or explicit values, got {other:?}"
            )))
        }
    };
    params.validate(layout.num_age())?;
    let dates = io::dates_from(spec.start_date, spec.num_days);
    let weekday = stratseir::model::weekday_covariate(&dates);
    let model = build_model(cfg, &population, contact.as_ref(), cfg.variant()?, weekday)?;
    Ok(SyntheticSetup {
        model,
        initial,
        params,
        population,
        contact,
    })
}

/// Runs the simulator under `cfg.synthetic` and returns the daily removals
/// as a case dataset.
pub fn generate_synthetic(cfg: &RunConfig) -> CliResult<Synthetic> {
    let setup = synthetic_setup(cfg)?;
    let days = cfg.synthetic.num_days;
    let traj = simulate(&setup.initial, &setup.params, &setup.model, days, None, &StreamSeed::new(cfg.seed, 0))?;
    Ok(Synthetic {
        cases: CaseDataset {
            start: cfg.synthetic.start_date,
            counts: traj.events.ir,
        },
        population: setup.population,
        initial: setup.initial,
        params: setup.params,
        contact: setup.contact,
    })
}

#[derive(Serialize)]
struct Provenance<'a> {
    seed: u64,
    variant: &'a str,
    start_date: String,
    num_days: usize,
    num_deprivation: usize,
    age_labels: &'a [String],
    psi: &'a [f64],
    rho: &'a [f64],
    gamma1: f64,
    alpha0: f64,
    alpha_inc: &'a [f64],
    initial_exposed: u64,
    initial_infectious: u64,
    total_cases: u64,
}

/// Writes `cases.csv`, `population.csv`, `initial_state.csv`, an optional
/// `contact.csv`, `provenance.json` with the generating values, and a
/// `config.json` that points at these files so the data can be refitted.
pub fn write_synthetic(out: &Path, cfg: &RunConfig, synth: &Synthetic) -> CliResult<()> {
    let layout = cfg.strata_layout()?;
    let labels = cfg.age_labels()?;
    io::write_cases(&out.join("cases.csv"), &synth.cases, &layout, &labels)?;
    io::write_population(&out.join("population.csv"), &synth.population, &layout, &labels)?;
    io::write_initial_state(&out.join("initial_state.csv"), &synth.initial, &layout, &labels)?;
    let mut refit = cfg.clone();
    refit.data.cases = Some(PathBuf::from("cases.csv"));
    refit.data.population = Some(PathBuf::from("population.csv"));
    refit.data.initial_state = Some(PathBuf::from("initial_state.csv"));
    refit.data.contact = None;
    refit.synthetic.population = Some(PerStratum::Each(synth.population.clone()));
    if let Some(c) = &synth.contact {
        io::write_contact_matrix(&out.join("contact.csv"), c, &labels)?;
        refit.data.contact = Some(PathBuf::from("contact.csv"));
    }
    refit.posterior_dir = None;
    let p = &synth.params;
    let provenance = Provenance {
        seed: cfg.seed,
        variant: &cfg.model.variant,
        start_date: synth.cases.start.to_string(),
        num_days: synth.cases.num_days(),
        num_deprivation: layout.num_deprivation(),
        age_labels: &labels,
        psi: &p.psi,
        rho: &p.rho,
        gamma1: p.gamma1,
        alpha0: p.alpha0,
        alpha_inc: &p.alpha_inc,
        initial_exposed: synth.initial.e.iter().sum(),
        initial_infectious: synth.initial.i.iter().sum(),
        total_cases: synth.cases.counts.as_slice().iter().sum(),
    };
    io::write_json(&out.join("provenance.json"), &provenance)?;
    io::write_json(&out.join("config.json"), &refit)
}
