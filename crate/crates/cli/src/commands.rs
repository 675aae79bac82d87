//! One function per subcommand. Each reads its inputs, runs the pipeline and
//! writes every output file from the calling thread.

use std::path::Path;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};
use stratseir::inference::{ChainDiagnostics, PosteriorSample};
use stratseir::metrics::{crps_table, quantile_sorted, rt_estimate, GroupBy, RtDenominator};
use stratseir::scenarios::{detect_switching, format_order, mixing_at, DepletionSpec, SwitchingReport};
use stratseir::simulator::{self, Ensemble};
use stratseir::{Matrix, Model, ModelVariant, ScenarioSpec, StrataLayout, StreamSeed};

use crate::config::{DenominatorChoice, RunConfig, ScenarioChoice, ScenarioConfig};
use crate::error::{CliError, CliResult};
use crate::io::{self, CaseDataset};
use crate::pipeline::{self, build_model, decile_incidence, grouped_summary, select_draws};
use crate::synth;

/// Layout, labels, populations and contact matrix shared by all commands.
struct Inputs {
    layout: StrataLayout,
    labels: Vec<String>,
    population: Vec<u64>,
    contact: Option<Matrix>,
}

impl Inputs {
    fn load(cfg: &RunConfig) -> CliResult<Self> {
        let layout = cfg.strata_layout()?;
        let labels = cfg.age_labels()?;
        let population = match (&cfg.data.population, &cfg.synthetic.population) {
            (Some(path), _) => io::load_population(path, &layout, &labels)?,
            (None, Some(p)) => p.expand(layout.num_strata(), "synthetic.population")?,
            (None, None) => return Err(CliError::Config("data.population is required".into())),
        };
        let contact = match &cfg.data.contact {
            Some(path) => Some(io::load_contact_matrix(path, &labels)?),
            None => None,
        };
        Ok(Inputs {
            layout,
            labels,
            population,
            contact,
        })
    }

    fn population_f64(&self) -> Vec<f64> {
        self.population.iter().map(|n| *n as f64).collect()
    }

    fn model(&self, cfg: &RunConfig, variant: ModelVariant, dates: &[NaiveDate]) -> CliResult<Model> {
        let weekday = stratseir::model::weekday_covariate(dates);
        build_model(cfg, &self.population, self.contact.as_ref(), variant, weekday)
    }

    fn cases(&self, cfg: &RunConfig, path: Option<&Path>) -> CliResult<CaseDataset> {
        let path = path
            .or(cfg.data.cases.as_deref())
            .ok_or_else(|| CliError::Config("data.cases is required".into()))?;
        io::load_cases(path, &self.layout, &self.labels)
    }
}

/// Written by `fit` next to the posterior samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub variant: String,
    pub start_date: NaiveDate,
    pub num_days: usize,
    pub seed: u64,
    pub chains: usize,
    pub samples: usize,
}

impl FitRecord {
    pub fn end_date(&self) -> NaiveDate {
        self.start_date + Days::new(self.num_days as u64 - 1)
    }
}

#[derive(Serialize)]
struct BlockReport {
    name: String,
    proposed: u64,
    accepted: u64,
    acceptance_rate: f64,
    scale: f64,
}

#[derive(Serialize)]
struct ChainReport {
    chain: usize,
    samples: usize,
    final_log_posterior: Option<f64>,
    blocks: Vec<BlockReport>,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct ParameterReport {
    name: String,
    mean: f64,
    q05: f64,
    q95: f64,
    /// Potential scale reduction across chains; absent with one chain.
    rhat: Option<f64>,
}

#[derive(Serialize)]
struct FitDiagnostics {
    chains: Vec<ChainReport>,
    parameters: Vec<ParameterReport>,
}

/// Scalar summaries tracked in the diagnostics: `ψ_k`, `ρ_k`, `γ1`, `α0`
/// and the drive at the end of the window.
fn scalar_parameters(s: &PosteriorSample) -> Vec<(String, f64)> {
    let p = &s.params;
    let mut out = Vec::new();
    out.extend(p.psi.iter().enumerate().map(|(k, v)| (format!("psi_{}", k + 1), *v)));
    out.extend(p.rho.iter().enumerate().map(|(k, v)| (format!("rho_{}", k + 1), *v)));
    out.push(("gamma1".into(), p.gamma1));
    out.push(("alpha0".into(), p.alpha0));
    out.push(("drive_end".into(), p.drive_at(p.alpha_inc.len())));
    out
}

/// Gelman-Rubin statistic over equal-length chains.
pub fn potential_scale_reduction(chains: &[Vec<f64>]) -> Option<f64> {
    let m = chains.len();
    let n = chains.iter().map(Vec::len).min()?;
    if m < 2 || n < 2 {
        return None;
    }
    let means: Vec<f64> = chains.iter().map(|c| c[..n].iter().sum::<f64>() / n as f64).collect();
    let grand = means.iter().sum::<f64>() / m as f64;
    let b = n as f64 / (m - 1) as f64 * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c[..n].iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1) as f64)
        .sum::<f64>()
        / m as f64;
    if !(w > 0.0) {
        return None;
    }
    let var = (n - 1) as f64 / n as f64 * w + b / n as f64;
    Some((var / w).sqrt())
}

fn fit_diagnostics(samples: &[PosteriorSample], diagnostics: &[ChainDiagnostics]) -> FitDiagnostics {
    let chains = diagnostics
        .iter()
        .enumerate()
        .map(|(c, d)| ChainReport {
            chain: c,
            samples: samples.iter().filter(|s| s.chain == c as u64).count(),
            final_log_posterior: d.log_posterior_trace.last().copied(),
            blocks: d
                .blocks
                .iter()
                .map(|b| BlockReport {
                    name: b.name.clone(),
                    proposed: b.proposed,
                    accepted: b.accepted,
                    acceptance_rate: b.rate(),
                    scale: b.scale,
                })
                .collect(),
            warnings: d.warnings.clone(),
        })
        .collect();
    let names: Vec<String> = samples.first().map(scalar_parameters).unwrap_or_default().into_iter().map(|p| p.0).collect();
    let values: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| scalar_parameters(s).into_iter().map(|p| p.1).collect())
        .collect();
    let parameters = names
        .into_iter()
        .enumerate()
        .map(|(c, name)| {
            let mut all: Vec<f64> = values.iter().map(|v| v[c]).collect();
            let per_chain: Vec<Vec<f64>> = (0..diagnostics.len() as u64)
                .map(|ch| samples.iter().zip(&values).filter(|(s, _)| s.chain == ch).map(|(_, v)| v[c]).collect())
                .collect();
            all.sort_by(f64::total_cmp);
            ParameterReport {
                name,
                mean: all.iter().sum::<f64>() / all.len() as f64,
                q05: quantile_sorted(&all, 0.05),
                q95: quantile_sorted(&all, 0.95),
                rhat: potential_scale_reduction(&per_chain),
            }
        })
        .collect();
    FitDiagnostics { chains, parameters }
}

pub fn fit(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let inputs = Inputs::load(cfg)?;
    let cases = inputs.cases(cfg, None)?;
    let train = match cfg.data.training_days {
        Some(days) => cases.window(0, days)?,
        None => cases,
    };
    let variant = cfg.variant()?;
    let model = inputs.model(cfg, variant, &train.dates())?;
    let loaded = match &cfg.data.initial_state {
        Some(path) => Some(io::load_initial_state(path, &inputs.layout, &inputs.labels)?),
        None => None,
    };
    let x0 = pipeline::initial_state(cfg, &train, &inputs.population, loaded)?;
    log::info!(
        "fitting variant {} to {} strata over {} days ({} to {}), {} chains of {} iterations",
        variant.name(),
        inputs.layout.num_strata(),
        train.num_days(),
        train.start,
        train.end(),
        cfg.chain.chains,
        cfg.chain.iterations
    );
    let result = pipeline::fit(&model, &train.counts, &x0, cfg)?;
    let (layout, labels) = (&inputs.layout, &inputs.labels);
    io::write_posterior(&out.join("posterior.csv"), &result.samples)?;
    io::write_terminal_states(&out.join("terminal_states.csv"), &result.samples, layout, labels)?;
    io::write_initial_state(&out.join("initial_state.csv"), &x0, layout, labels)?;
    if cfg.chain.store_latents {
        io::write_latents(&out.join("latents.csv"), &result.samples, layout, labels)?;
    }
    let diagnostics = fit_diagnostics(&result.samples, &result.diagnostics);
    for d in &result.diagnostics {
        for w in &d.warnings {
            log::warn!("{w}");
        }
    }
    for p in &diagnostics.parameters {
        if p.rhat.is_some_and(|r| r > 1.1) {
            log::warn!("{} has potential scale reduction {:.3}", p.name, p.rhat.unwrap_or_default());
        }
    }
    io::write_json(&out.join("diagnostics.json"), &diagnostics)?;
    let record = FitRecord {
        variant: variant.name().into(),
        start_date: train.start,
        num_days: train.num_days(),
        seed: cfg.seed,
        chains: cfg.chain.chains,
        samples: result.samples.len(),
    };
    io::write_json(&out.join("fit.json"), &record)?;
    log::info!("wrote {} posterior samples to {}", result.samples.len(), out.display());
    Ok(())
}

struct Fitted {
    record: FitRecord,
    variant: ModelVariant,
    samples: Vec<PosteriorSample>,
}

fn load_fit(dir: &Path, inputs: &Inputs) -> CliResult<Fitted> {
    let record: FitRecord = io::read_json(&dir.join("fit.json"))?;
    let variant: ModelVariant = record.variant.parse()?;
    let samples = io::load_posterior(
        &dir.join("posterior.csv"),
        &dir.join("terminal_states.csv"),
        &inputs.layout,
        &inputs.labels,
    )?;
    if samples.iter().any(|s| s.params.alpha_inc.len() != record.num_days) {
        return Err(CliError::input(dir, "posterior drive length differs from the fitted window"));
    }
    if samples.iter().any(|s| s.terminal.totals() != inputs.population) {
        return Err(CliError::input(dir, "terminal states do not match the configured population"));
    }
    Ok(Fitted {
        record,
        variant,
        samples,
    })
}

/// Writes the per-stratum summary and its aggregations under `prefix`.
fn write_ensemble(
    out: &Path,
    prefix: &str,
    ensemble: &Ensemble,
    dates: &[NaiveDate],
    inputs: &Inputs,
    cfg: &RunConfig,
) -> CliResult<()> {
    let q = (cfg.forecast.lower_quantile, cfg.forecast.upper_quantile);
    let layout = &inputs.layout;
    let per_stratum = grouped_summary(ensemble, layout, GroupBy::Stratum, None, q)?;
    io::write_forecast(&out.join(format!("{prefix}.csv")), &per_stratum, dates, q, layout, &inputs.labels)?;
    let deciles: Vec<String> = (1..=layout.num_deprivation()).map(|d| d.to_string()).collect();
    let pop = inputs.population_f64();
    let groups: [(&str, GroupBy, Option<&[f64]>, &[String]); 4] = [
        ("by_age", GroupBy::Age, None, &inputs.labels),
        ("by_imd", GroupBy::Imd, None, &deciles),
        ("by_imd_per_100k", GroupBy::Imd, Some(&pop), &deciles),
        ("total", GroupBy::Total, None, &["total".to_string()]),
    ];
    for (suffix, by, per, names) in groups {
        let summary = grouped_summary(ensemble, layout, by, per, q)?;
        io::write_grouped(&out.join(format!("{prefix}_{suffix}.csv")), &summary, names, dates, q)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SwitchingSummary {
    window: usize,
    initial_order: String,
    final_order: String,
    reversal_day: Option<usize>,
    reversal_date: Option<NaiveDate>,
}

fn switching_summary(report: &SwitchingReport, start: NaiveDate, window: usize) -> SwitchingSummary {
    SwitchingSummary {
        window,
        initial_order: report.orders.first().map(|o| format_order(o)).unwrap_or_default(),
        final_order: report.orders.last().map(|o| format_order(o)).unwrap_or_default(),
        reversal_day: report.reversal_day,
        reversal_date: report.reversal_day.map(|d| start + Days::new(d as u64)),
    }
}

/// Traces the decile ordering of ensemble-mean incidence per 100,000.
fn trace_switching(
    ensemble: &Ensemble,
    inputs: &Inputs,
    window: usize,
) -> CliResult<SwitchingReport> {
    let incidence = decile_incidence(ensemble, &inputs.layout, &inputs.population_f64())?;
    Ok(detect_switching(&incidence, window)?)
}

#[derive(Serialize)]
struct ForecastSummary {
    variant: String,
    start_date: NaiveDate,
    horizon: usize,
    members: usize,
    switching: Option<SwitchingSummary>,
}

pub fn forecast(cfg: &RunConfig, out: &Path, posterior: &Path) -> CliResult<()> {
    let inputs = Inputs::load(cfg)?;
    let fitted = load_fit(posterior, &inputs)?;
    let start = fitted.record.end_date() + Days::new(1);
    let dates = io::dates_from(start, cfg.forecast.horizon);
    let model = inputs.model(cfg, fitted.variant, &dates)?;
    let draws = select_draws(&fitted.samples, cfg.forecast.draws);
    let ensemble = pipeline::forecast(&draws, cfg.forecast.horizon, &model, None, cfg.seed)?;
    write_ensemble(out, "forecast", &ensemble, &dates, &inputs, cfg)?;
    let window = cfg.scenario.as_ref().map_or(14, |s| s.switching_window);
    let switching = if window <= cfg.forecast.horizon {
        let report = trace_switching(&ensemble, &inputs, window)?;
        io::write_switching(&out.join("switching.csv"), &report, start)?;
        Some(switching_summary(&report, start, window))
    } else {
        log::info!("horizon shorter than the {window}-day switching window; no switching trace");
        None
    };
    io::write_json(
        &out.join("forecast_summary.json"),
        &ForecastSummary {
            variant: fitted.record.variant.clone(),
            start_date: start,
            horizon: cfg.forecast.horizon,
            members: ensemble.members(),
            switching,
        },
    )?;
    log::info!(
        "forecast {} days from {start} with {} members",
        cfg.forecast.horizon,
        ensemble.members()
    );
    Ok(())
}

pub fn rt(cfg: &RunConfig, out: &Path, posterior: &Path) -> CliResult<()> {
    let inputs = Inputs::load(cfg)?;
    let fitted = load_fit(posterior, &inputs)?;
    let dates = io::dates_from(fitted.record.start_date, fitted.record.num_days);
    let model = inputs.model(cfg, fitted.variant, &dates)?;
    let draws = select_draws(&fitted.samples, fitted.samples.len());
    let denominator = match cfg.rt.denominator {
        DenominatorChoice::RemovalProbability => RtDenominator::RemovalProbability,
        DenominatorChoice::Literal => RtDenominator::Literal,
    };
    let est = rt_estimate(&model, &draws, denominator)?;
    let q = (cfg.forecast.lower_quantile, cfg.forecast.upper_quantile);
    io::write_rt(&out.join("rt.csv"), &est, q, &inputs.layout, &inputs.labels)?;
    let above = est.mean.iter().filter(|r| **r > 1.0).count();
    log::info!(
        "reproduction numbers at {}: {above} of {} strata have posterior mean above one",
        fitted.record.end_date(),
        est.mean.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct CrpsSummary {
    variant: String,
    /// `forecast` for days after the fitted window, `in-sample` otherwise.
    mode: &'static str,
    start_date: NaiveDate,
    num_days: usize,
    members: usize,
    q1: f64,
    median: f64,
    q3: f64,
}

/// Columns `from..from + len` of every member.
fn slice_days(ensemble: &Ensemble, from: usize, len: usize) -> CliResult<Ensemble> {
    let members = (0..ensemble.members())
        .map(|m| {
            let full = ensemble.member(m);
            let mut part = Matrix::filled(full.rows(), len, 0u64);
            for i in 0..full.rows() {
                part.row_mut(i).copy_from_slice(&full.row(i)[from..from + len]);
            }
            part
        })
        .collect();
    Ok(Ensemble::from_members(members)?)
}

/// Scores observed days after the fitted window against the forecast, or
/// days inside it against the posterior predictive re-simulated from the
/// initial state.
pub fn crps(cfg: &RunConfig, out: &Path, posterior: &Path, observed: Option<&Path>) -> CliResult<()> {
    let inputs = Inputs::load(cfg)?;
    let fitted = load_fit(posterior, &inputs)?;
    let cases = inputs.cases(cfg, observed)?;
    let fit_start = fitted.record.start_date;
    let fit_end = fitted.record.end_date();
    let members = cfg.forecast.draws;
    let (mode, scored, ensemble) = if cases.end() > fit_end {
        let first = fit_end + Days::new(1);
        let skip = (first - cases.start).num_days().max(0) as usize;
        let scored = cases.window(skip, cases.num_days() - skip)?;
        let lead = (scored.start - first).num_days() as usize;
        let horizon = lead + scored.num_days();
        let dates = io::dates_from(first, horizon);
        let model = inputs.model(cfg, fitted.variant, &dates)?;
        let draws = select_draws(&fitted.samples, members);
        let full = pipeline::forecast(&draws, horizon, &model, None, cfg.seed)?;
        ("forecast", scored.clone(), slice_days(&full, lead, scored.num_days())?)
    } else if cases.start >= fit_start {
        let dates = io::dates_from(fit_start, fitted.record.num_days);
        let model = inputs.model(cfg, fitted.variant, &dates)?;
        let x0 = io::load_initial_state(&posterior.join("initial_state.csv"), &inputs.layout, &inputs.labels)?;
        let full = pipeline::posterior_predictive(&fitted.samples, members, &x0, &model, cfg.seed)?;
        let lead = (cases.start - fit_start).num_days() as usize;
        ("in-sample", cases.clone(), slice_days(&full, lead, cases.num_days())?)
    } else {
        return Err(CliError::Config(format!(
            "observed cases start {} before the fitted window {fit_start}",
            cases.start
        )));
    };
    let table = crps_table(&ensemble, &scored.counts)?;
    io::write_crps(&out.join("crps.csv"), &table.scores, &scored.dates(), &inputs.layout, &inputs.labels)?;
    let (q1, median, q3) = table.quartiles;
    io::write_json(
        &out.join("crps_summary.json"),
        &CrpsSummary {
            variant: fitted.record.variant.clone(),
            mode,
            start_date: scored.start,
            num_days: scored.num_days(),
            members: ensemble.members(),
            q1,
            median,
            q3,
        },
    )?;
    log::info!(
        "CRPS ({mode}, variant {}) quartiles {q1:.3} | {median:.3} | {q3:.3}",
        fitted.record.variant
    );
    Ok(())
}

#[derive(Serialize)]
struct ScenarioSummary {
    scenario: String,
    start_date: NaiveDate,
    horizon: usize,
    members: usize,
    /// `C_D[1,1]` and `C_D[J,J]` on day 45 for mixing scenarios.
    mixing_day45: Option<(f64, f64)>,
    switching: SwitchingSummary,
}

fn resolve_scenario(
    sc: &ScenarioConfig,
    cfg: &RunConfig,
    inputs: &Inputs,
    record: &FitRecord,
) -> CliResult<(String, ScenarioSpec)> {
    let cumulative = || -> CliResult<Vec<u64>> {
        let cases = inputs.cases(cfg, None)?;
        let offset = (record.start_date - cases.start).num_days();
        if offset < 0 {
            return Err(CliError::Config("cases start after the fitted window".into()));
        }
        Ok(cases.window(offset as usize, record.num_days)?.cumulative())
    };
    Ok(match sc.choice()? {
        ScenarioChoice::Preset(p) => {
            let cum = match p {
                stratseir::scenarios::Preset::Depletion5x => Some(cumulative()?),
                _ => None,
            };
            (p.name().to_string(), p.resolve(cum.as_deref())?)
        }
        ScenarioChoice::Mixing(m) => ("custom-mixing".into(), ScenarioSpec::MixingRamp(m)),
        ScenarioChoice::Behavioural(b) => ("custom-behavioural".into(), ScenarioSpec::Behavioural(b)),
        ScenarioChoice::Depletion(factor) => (
            "custom-depletion".into(),
            ScenarioSpec::Depletion(DepletionSpec {
                cumulative: cumulative()?,
                factor,
            }),
        ),
    })
}

pub fn scenario(cfg: &RunConfig, out: &Path, posterior: &Path, sc: &ScenarioConfig) -> CliResult<()> {
    let inputs = Inputs::load(cfg)?;
    let fitted = load_fit(posterior, &inputs)?;
    let (name, spec) = resolve_scenario(sc, cfg, &inputs, &fitted.record)?;
    let start = fitted.record.end_date() + Days::new(1);
    let horizon = cfg.forecast.horizon;
    let dates = io::dates_from(start, horizon);
    let model = inputs.model(cfg, fitted.variant, &dates)?;
    spec.validate(&model)?;
    let mixing_day45 = match &spec {
        ScenarioSpec::MixingRamp(m) => {
            let j = inputs.layout.num_deprivation();
            let cd = mixing_at(m, 45)?;
            log::info!("C_D[1,1](t=45) = {:.5}", cd[(0, 0)]);
            log::info!("C_D[{j},{j}](t=45) = {:.5}", cd[(j - 1, j - 1)]);
            Some((cd[(0, 0)], cd[(j - 1, j - 1)]))
        }
        _ => None,
    };
    let draws = select_draws(&fitted.samples, cfg.forecast.draws);
    let ensemble = pipeline::forecast(&draws, horizon, &model, Some(&spec), cfg.seed)?;
    write_ensemble(out, "scenario", &ensemble, &dates, &inputs, cfg)?;
    if sc.switching_window > horizon {
        return Err(CliError::Config(format!(
            "switching window {} exceeds the {horizon}-day horizon",
            sc.switching_window
        )));
    }
    let report = trace_switching(&ensemble, &inputs, sc.switching_window)?;
    io::write_switching(&out.join("switching.csv"), &report, start)?;
    let switching = switching_summary(&report, start, sc.switching_window);
    match &switching.reversal_date {
        Some(d) => log::info!(
            "{name}: deprivation order reversed by {d} ({} -> {})",
            switching.initial_order,
            switching.final_order
        ),
        None => log::info!(
            "{name}: no full reversal ({} -> {})",
            switching.initial_order,
            switching.final_order
        ),
    }
    io::write_json(
        &out.join("scenario_summary.json"),
        &ScenarioSummary {
            scenario: name,
            start_date: start,
            horizon,
            members: ensemble.members(),
            mixing_day45,
            switching,
        },
    )
}

/// One forward run from the synthetic parameters, optionally under the
/// configured scenario (depletion needs observed cases).
pub fn simulate(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let setup = synth::synthetic_setup(cfg)?;
    let layout = cfg.strata_layout()?;
    let labels = cfg.age_labels()?;
    let initial = match &cfg.data.initial_state {
        Some(path) => io::load_initial_state(path, &layout, &labels)?,
        None => setup.initial.clone(),
    };
    let scenario = match &cfg.scenario {
        Some(sc) => {
            let spec = match sc.choice()? {
                ScenarioChoice::Preset(p) => p.resolve(None)?,
                ScenarioChoice::Mixing(m) => ScenarioSpec::MixingRamp(m),
                ScenarioChoice::Behavioural(b) => ScenarioSpec::Behavioural(b),
                ScenarioChoice::Depletion(_) => {
                    return Err(CliError::Config("depletion scenarios need fitted data; use `scenario`".into()))
                }
            };
            Some(spec)
        }
        None => None,
    };
    let days = cfg.synthetic.num_days;
    let traj = simulator::simulate(
        &initial,
        &setup.params,
        &setup.model,
        days,
        scenario.as_ref(),
        &StreamSeed::new(cfg.seed, 0),
    )?;
    let start = cfg.synthetic.start_date;
    io::write_trajectory(&out.join("trajectory.csv"), &traj, start, &layout, &labels)?;
    let cases = CaseDataset {
        start,
        counts: traj.events.ir,
    };
    io::write_cases(&out.join("cases.csv"), &cases, &layout, &labels)?;
    log::info!(
        "simulated {days} days: {} cases",
        cases.counts.as_slice().iter().sum::<u64>()
    );
    Ok(())
}

pub fn synth(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let s = synth::generate_synthetic(cfg)?;
    synth::write_synthetic(out, cfg, &s)?;
    log::info!(
        "synthetic data: {} days, {} cases, written to {}",
        s.cases.num_days(),
        s.cases.counts.as_slice().iter().sum::<u64>(),
        out.display()
    );
    Ok(())
}
