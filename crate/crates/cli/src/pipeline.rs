//! Model assembly and the parallel parts of each command: chains run on
//! separate threads, ensemble members are simulated in parallel and
//! collected in member order so results do not depend on scheduling.

use rayon::prelude::*;
use stratseir::inference::{default_delays, run_chain, ChainDiagnostics, PosteriorSample};
use stratseir::metrics::{aggregate, summarise, EnsembleSummary, GroupBy};
use stratseir::simulator::{forecast_member, simulate, Ensemble, ForecastDraw};
use stratseir::{Covariates, Matrix, Model, ModelVariant, ScenarioSpec, StateMatrix, StrataLayout, StreamSeed};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::io::CaseDataset;

/// Builds the model for `variant` with the given day-of-week covariate.
/// Without a contact matrix, age mixing is homogeneous.
pub fn build_model(
    cfg: &RunConfig,
    population: &[u64],
    contact: Option<&Matrix>,
    variant: ModelVariant,
    weekday: Vec<f64>,
) -> CliResult<Model> {
    let layout = cfg.strata_layout()?;
    let mut cov = Covariates::homogeneous(&layout, population.iter().map(|n| *n as f64).collect(), weekday);
    cov.deprivation = cfg.deprivation_index();
    if let Some(c) = contact {
        cov.age_mixing = c.clone();
    }
    Ok(Model::new(layout, cfg.fixed_config(), cov, variant)?)
}

/// Initial compartments implied by early cases. People removed within the
/// first `infectious_delay` days were infectious at the start; those
/// removed in the following `latent_delay` days were exposed. Both counts
/// are scaled by `ascertainment` and rounded up.
pub fn derive_initial_state(
    cases: &CaseDataset,
    population: &[u64],
    delays: (usize, usize),
    ascertainment: f64,
) -> CliResult<StateMatrix> {
    let (latent_delay, infectious_delay) = delays;
    let l = population.len();
    let mut x = StateMatrix::zeros(l);
    let t = cases.num_days();
    for i in 0..l {
        let row = cases.counts.row(i);
        let sum = |from: usize, to: usize| row[from.min(t)..to.min(t)].iter().sum::<u64>() as f64;
        let inf = (ascertainment * sum(0, infectious_delay)).ceil() as u64;
        let exp = (ascertainment * sum(infectious_delay, infectious_delay + latent_delay)).ceil() as u64;
        let total: u64 = row.iter().sum();
        if inf + exp > population[i] || total > population[i] {
            return Err(CliError::Config(format!(
                "stratum {i}: population {} is too small for the observed cases",
                population[i]
            )));
        }
        x.e[i] = exp;
        x.i[i] = inf;
        x.s[i] = population[i] - inf - exp;
    }
    Ok(x)
}

/// The initial state from `data.initial_state`, or derived from the cases.
pub fn initial_state(
    cfg: &RunConfig,
    cases: &CaseDataset,
    population: &[u64],
    loaded: Option<StateMatrix>,
) -> CliResult<StateMatrix> {
    let x0 = match loaded {
        Some(x) => x,
        None => {
            let delays = default_delays(&cfg.fixed_config());
            let x = derive_initial_state(cases, population, delays, cfg.data.ascertainment)?;
            log::info!(
                "initial state derived from early cases: {} exposed, {} infectious",
                x.e.iter().sum::<u64>(),
                x.i.iter().sum::<u64>()
            );
            x
        }
    };
    if x0.totals() != population {
        return Err(CliError::Config("initial state totals differ from the population".into()));
    }
    Ok(x0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutput {
    /// Samples of all chains, chain by chain.
    pub samples: Vec<PosteriorSample>,
    pub diagnostics: Vec<ChainDiagnostics>,
}

/// Runs `cfg.chain.chains` chains in parallel.
pub fn fit(model: &Model, y_ir: &Matrix<u64>, x0: &StateMatrix, cfg: &RunConfig) -> CliResult<FitOutput> {
    let outputs = (0..cfg.chain.chains as u64)
        .into_par_iter()
        .map(|c| run_chain(y_ir, x0, model, &cfg.chain_config(c)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut samples = Vec::new();
    let mut diagnostics = Vec::new();
    for out in outputs {
        samples.extend(out.samples);
        diagnostics.push(out.diagnostics);
    }
    Ok(FitOutput { samples, diagnostics })
}

/// `members` draws spread evenly over the samples (cycling when there are
/// fewer samples than members).
pub fn select_draws(samples: &[PosteriorSample], members: usize) -> Vec<ForecastDraw> {
    let n = samples.len();
    (0..members)
        .map(|m| {
            let s = &samples[if members <= n { m * n / members } else { m % n }];
            ForecastDraw {
                params: s.params.clone(),
                state: s.terminal.clone(),
            }
        })
        .collect()
}

/// Forecast ensemble from the end of the fitted window; member `m` uses
/// draw `m` and random stream `(seed, m)`.
pub fn forecast(
    draws: &[ForecastDraw],
    horizon: usize,
    model: &Model,
    scenario: Option<&ScenarioSpec>,
    seed: u64,
) -> CliResult<Ensemble> {
    let members = draws
        .par_iter()
        .enumerate()
        .map(|(m, d)| forecast_member(d, m, horizon, model, scenario, seed))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Ensemble::from_members(members)?)
}

/// Posterior predictive removals over the fitted window, re-simulated from
/// the initial state with each draw's full drive.
pub fn posterior_predictive(
    samples: &[PosteriorSample],
    members: usize,
    x0: &StateMatrix,
    model: &Model,
    seed: u64,
) -> CliResult<Ensemble> {
    let n = samples.len();
    let horizon = model.covariates().weekday.len();
    let out = (0..members)
        .into_par_iter()
        .map(|m| {
            let s = &samples[if members <= n { m * n / members } else { m % n }];
            let stream = StreamSeed::new(seed, m as u64);
            simulate(x0, &s.params, model, horizon, None, &stream).map(|t| t.events.ir)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Ensemble::from_members(out)?)
}

/// Summary of an ensemble after grouping strata; with `population`, groups
/// are expressed per 100,000 people.
pub fn grouped_summary(
    ensemble: &Ensemble,
    layout: &StrataLayout,
    by: GroupBy,
    population: Option<&[f64]>,
    quantiles: (f64, f64),
) -> CliResult<EnsembleSummary> {
    let members = (0..ensemble.members())
        .map(|m| aggregate(&ensemble.member(m).map(|v| v as f64), layout, by, population))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(summarise(&members, quantiles.0, quantiles.1)?)
}

/// Ensemble-mean incidence per 100,000 by deprivation decile.
pub fn decile_incidence(ensemble: &Ensemble, layout: &StrataLayout, population: &[f64]) -> CliResult<Matrix> {
    Ok(aggregate(&ensemble.mean(), layout, GroupBy::Imd, Some(population))?)
}
