//! Augmented-data Bayesian fitting.
//!
//! Observed removals `Y` and latent infection / onset events `Z` jointly
//! determine every compartment count through the state recursions; the
//! likelihood is a product of binomials over all strata, days and the three
//! transitions. The sampler alternates adaptive random-walk updates of the
//! parameters with integer moves on `Z`.

mod sampler;

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::matrix::Matrix;
use crate::model::{FixedConfig, Model, ModelParams};
use crate::simulator::StateMatrix;

pub use sampler::Sampler;

/// Observed cases, latent events and the fixed initial state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentedData {
    pub z_se: Matrix<u64>,
    pub z_ei: Matrix<u64>,
    pub y_ir: Matrix<u64>,
    pub x0: StateMatrix,
}

impl AugmentedData {
    pub fn num_days(&self) -> usize {
        self.y_ir.cols()
    }

    pub fn states(&self) -> Result<Vec<StateMatrix>> {
        reconstruct_states(&self.x0, &self.z_se, &self.z_ei, &self.y_ir)
    }
}

fn check_shapes(x0: &StateMatrix, z_se: &Matrix<u64>, z_ei: &Matrix<u64>, y_ir: &Matrix<u64>) -> Result<()> {
    let l = x0.num_strata();
    if !x0.is_consistent() {
        bail!(InvalidArgument, "initial state compartments differ in length");
    }
    if z_se.rows() != l || z_se.shape() != z_ei.shape() || z_se.shape() != y_ir.shape() {
        bail!(
            InvalidArgument,
            "event matrices must all be {l} x T (got {:?}, {:?}, {:?})",
            z_se.shape(),
            z_ei.shape(),
            y_ir.shape()
        );
    }
    Ok(())
}

/// Applies the four state recursions. Fails with [`Error::Infeasible`]
/// naming the first (stratum, day) at which a count would go negative.
///
/// [`Error::Infeasible`]: crate::Error::Infeasible
pub fn reconstruct_states(
    x0: &StateMatrix,
    z_se: &Matrix<u64>,
    z_ei: &Matrix<u64>,
    y_ir: &Matrix<u64>,
) -> Result<Vec<StateMatrix>> {
    check_shapes(x0, z_se, z_ei, y_ir)?;
    let (l, t_max) = z_se.shape();
    let mut out = Vec::with_capacity(t_max + 1);
    out.push(x0.clone());
    for t in 0..t_max {
        let prev = &out[t];
        let mut next = StateMatrix::zeros(l);
        for i in 0..l {
            let se = z_se[(i, t)];
            let ei = z_ei[(i, t)];
            let ir = y_ir[(i, t)];
            let s = prev.s[i].checked_sub(se);
            let e = (prev.e[i] + se).checked_sub(ei);
            let inf = (prev.i[i] + ei).checked_sub(ir);
            match (s, e, inf) {
                (Some(s), Some(e), Some(inf)) => {
                    next.s[i] = s;
                    next.e[i] = e;
                    next.i[i] = inf;
                    next.r[i] = prev.r[i] + ir;
                }
                _ => return Err(crate::Error::Infeasible { stratum: i, day: t + 1 }),
            }
        }
        out.push(next);
    }
    Ok(out)
}

/// `ln C(n, k) + k ln p + (n - k) ln(1 - p)` with `p = 1 - exp(-λ)`.
pub fn log_binomial_pmf(k: u64, n: u64, lambda: f64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if lambda <= 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let ln_choose = libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0);
    term(k, n, lambda) + ln_choose
}

#[inline]
fn term(k: u64, n: u64, lambda: f64) -> f64 {
    let success = if k == 0 {
        0.0
    } else {
        k as f64 * libm::log(-libm::expm1(-lambda))
    };
    success - (n - k) as f64 * lambda
}

/// Complete-data log-likelihood of `(Y, Z)` given `X0` and parameters,
/// including binomial coefficients. Infeasible event configurations give
/// `-∞`.
pub fn log_likelihood(data: &AugmentedData, params: &ModelParams, model: &Model) -> Result<f64> {
    let l = model.layout().num_strata();
    check_shapes(&data.x0, &data.z_se, &data.z_ei, &data.y_ir)?;
    if data.x0.num_strata() != l {
        bail!(InvalidArgument, "data has {} strata, model has {l}", data.x0.num_strata());
    }
    let states = match data.states() {
        Ok(s) => s,
        Err(crate::Error::Infeasible { .. }) => return Ok(f64::NEG_INFINITY),
        Err(e) => return Err(e),
    };
    let chi = model.chi(params)?;
    let dt = model.config().dt;
    let mut ll = 0.0;
    for (t, x) in states.iter().take(data.num_days()).enumerate() {
        let h = model.hazards(x, &chi, params.drive_at(t), params.gamma1, model.weekday(t)?, None)?;
        for i in 0..l {
            ll += log_binomial_pmf(data.z_se[(i, t)], x.s[i], h.se[i] * dt);
            ll += log_binomial_pmf(data.z_ei[(i, t)], x.e[i], h.ei[i] * dt);
            ll += log_binomial_pmf(data.y_ir[(i, t)], x.i[i], h.ir[i] * dt);
        }
    }
    Ok(ll)
}

pub(crate) fn log_normal_density(x: f64, sd: f64) -> f64 {
    const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
    -HALF_LN_2PI - libm::log(sd) - x * x / (2.0 * sd * sd)
}

/// Independent `Beta(1, 1)` on each `ψ_k`, `ρ_k`; zero-mean Gaussians on
/// `γ1`, `α0` and each drive increment.
pub fn log_prior(params: &ModelParams, cfg: &FixedConfig) -> f64 {
    let in_unit = |v: &f64| *v > 0.0 && *v < 1.0;
    if !params.psi.iter().all(in_unit) || !params.rho.iter().all(in_unit) {
        return f64::NEG_INFINITY;
    }
    log_normal_density(params.gamma1, cfg.sigma_gamma1)
        + log_normal_density(params.alpha0, cfg.sigma_alpha0)
        + params
            .alpha_inc
            .iter()
            .map(|a| log_normal_density(*a, cfg.sigma_alpha))
            .sum::<f64>()
}

/// Mean delays (in whole days) used to back-date observed removals.
pub fn default_delays(cfg: &FixedConfig) -> (usize, usize) {
    let round = |v: f64| libm::round(v).max(1.0) as usize;
    (round(cfg.mean_latent_days()), round(cfg.mean_infectious_days()))
}

/// A feasible starting configuration for the latent events.
///
/// Removals are matched first-in-first-out to the initially infectious, then
/// to onsets placed `infectious_delay` days earlier (never later than the day
/// before the removal, and not on day 0 unless the removal is on day 1);
/// onsets are matched the same way to the initially exposed and then to
/// infections `latent_delay` days earlier.
pub fn initialize_latents(
    y_ir: &Matrix<u64>,
    x0: &StateMatrix,
    latent_delay: usize,
    infectious_delay: usize,
) -> Result<(Matrix<u64>, Matrix<u64>)> {
    let (l, t_max) = y_ir.shape();
    if x0.num_strata() != l || !x0.is_consistent() {
        bail!(InvalidArgument, "initial state must have {l} strata");
    }
    let mut z_se = Matrix::filled(l, t_max, 0u64);
    let mut z_ei = Matrix::filled(l, t_max, 0u64);
    for i in 0..l {
        back_date(y_ir.row(i), x0.i[i], infectious_delay, 1, z_ei.row_mut(i))
            .map_err(|day| init_error(i, day, "removal", "infectious"))?;
        let onsets = z_ei.row(i).to_vec();
        back_date(&onsets, x0.e[i], latent_delay, 0, z_se.row_mut(i))
            .map_err(|day| init_error(i, day, "onset", "exposed"))?;
        let infected: u64 = z_se.row(i).iter().sum();
        if infected > x0.s[i] {
            bail!(
                Initialization,
                "stratum {i}: {infected} infections needed but only {} susceptibles",
                x0.s[i]
            );
        }
    }
    reconstruct_states(x0, &z_se, &z_ei, y_ir).map_err(|e| {
        crate::Error::Initialization(alloc::format!("constructed latents are infeasible: {e}"))
    })?;
    Ok((z_se, z_ei))
}

fn init_error(stratum: usize, day: usize, what: &str, pool: &str) -> crate::Error {
    crate::Error::Initialization(alloc::format!(
        "stratum {stratum}: {what} on day {day} has no {pool} individual to draw from"
    ))
}

/// Assigns a source event to every event in `sinks`, using `pool` initial
/// individuals first. Sources go `delay` days earlier but not before
/// `earliest` (so they can be back-dated in turn) and always before their
/// sink. Returns the offending day when a day-0 event has no source.
fn back_date(
    sinks: &[u64],
    mut pool: u64,
    delay: usize,
    earliest: usize,
    sources: &mut [u64],
) -> core::result::Result<(), usize> {
    for (t, &count) in sinks.iter().enumerate() {
        let from_pool = count.min(pool);
        pool -= from_pool;
        let rest = count - from_pool;
        if rest == 0 {
            continue;
        }
        if t == 0 {
            return Err(0);
        }
        let s = t.saturating_sub(delay).max(earliest).min(t - 1);
        sources[s] += rest;
    }
    Ok(())
}

/// Settings for one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Chain identifier; selects the random stream.
    pub chain: u64,
    /// Latent-event proposals per iteration; 0 picks `2 L T`.
    pub latent_moves: usize,
    /// Largest day offset for shift and paired moves.
    pub max_shift: usize,
    /// Initial random-walk standard deviations: logit ψ / ρ (per component),
    /// γ1 and α0. Adapted during burn-in.
    pub logit_scale: f64,
    pub gamma1_scale: f64,
    pub alpha0_scale: f64,
    /// Iterations between adaptation steps during burn-in.
    pub adapt_every: usize,
    pub use_likelihood: bool,
    pub update_params: bool,
    pub update_latents: bool,
    pub store_latents: bool,
    /// Starting parameters; `None` uses flat intercepts/slopes and a drive
    /// level matched to the initial latent infections.
    pub initial_params: Option<ModelParams>,
    /// `(latent, infectious)` back-dating delays for initialisation.
    pub delays: Option<(usize, usize)>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            iterations: 4000,
            burn_in: 2000,
            thin: 2,
            seed: 1,
            chain: 0,
            latent_moves: 0,
            max_shift: 3,
            logit_scale: 0.3,
            gamma1_scale: 0.1,
            alpha0_scale: 0.05,
            adapt_every: 50,
            use_likelihood: true,
            update_params: true,
            update_latents: true,
            store_latents: false,
            initial_params: None,
            delays: None,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            bail!(InvalidArgument, "burn-in ({}) must be below iterations ({})", self.burn_in, self.iterations);
        }
        if self.thin == 0 {
            bail!(InvalidArgument, "thinning must be at least 1");
        }
        if self.max_shift == 0 || self.adapt_every == 0 {
            bail!(InvalidArgument, "max_shift and adapt_every must be positive");
        }
        for (name, v) in [
            ("logit_scale", self.logit_scale),
            ("gamma1_scale", self.gamma1_scale),
            ("alpha0_scale", self.alpha0_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                bail!(InvalidArgument, "{name} must be positive, got {v}");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSample {
    pub params: ModelParams,
    pub log_likelihood: f64,
    pub log_posterior: f64,
    pub iteration: usize,
    pub chain: u64,
    /// State at the end of the fitted window.
    pub terminal: StateMatrix,
    /// `(Z_SE, Z_EI)` when the chain stores latents.
    pub latents: Option<(Matrix<u64>, Matrix<u64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockStats {
    pub name: String,
    pub proposed: u64,
    pub accepted: u64,
    /// Proposal scale (or block size for latent moves) at the end of burn-in.
    pub scale: f64,
}

impl BlockStats {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChainDiagnostics {
    /// Acceptance counted after burn-in.
    pub blocks: Vec<BlockStats>,
    /// Log posterior at every iteration.
    pub log_posterior_trace: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub samples: Vec<PosteriorSample>,
    pub diagnostics: ChainDiagnostics,
}

/// Runs one Metropolis-within-Gibbs chain on observed removals `y_ir`.
pub fn run_chain(
    y_ir: &Matrix<u64>,
    x0: &StateMatrix,
    model: &Model,
    config: &ChainConfig,
) -> Result<ChainOutput> {
    config.validate()?;
    let (z_se, z_ei) = match config.delays {
        Some((d_e, d_i)) => initialize_latents(y_ir, x0, d_e, d_i)?,
        None => {
            let (d_e, d_i) = default_delays(model.config());
            initialize_latents(y_ir, x0, d_e, d_i)?
        }
    };
    let data = AugmentedData {
        z_se,
        z_ei,
        y_ir: y_ir.clone(),
        x0: x0.clone(),
    };
    let mut sampler = Sampler::new(model, data, config)?;
    let mut samples = Vec::new();
    let mut trace = Vec::with_capacity(config.iterations);
    for it in 0..config.iterations {
        sampler.iterate();
        if it + 1 == config.burn_in {
            sampler.end_burn_in();
        }
        trace.push(sampler.log_posterior());
        if it >= config.burn_in && (it - config.burn_in) % config.thin == 0 {
            samples.push(sampler.sample(it));
        }
    }
    let blocks = sampler.block_stats();
    let mut warnings = Vec::new();
    for b in &blocks {
        if b.proposed > 0 && b.accepted == 0 {
            warnings.push(alloc::format!("block {} accepted no proposals after adaptation", b.name));
        }
    }
    Ok(ChainOutput {
        samples,
        diagnostics: ChainDiagnostics {
            blocks,
            log_posterior_trace: trace,
            warnings,
        },
    })
}

/// All-zero latent event matrices.
pub fn zero_latents(num_strata: usize, num_days: usize) -> (Matrix<u64>, Matrix<u64>) {
    (
        Matrix::filled(num_strata, num_days, 0),
        Matrix::filled(num_strata, num_days, 0),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::model::{Covariates, ModelVariant, StrataLayout};
    use approx::assert_abs_diff_eq;

    fn one(v: u64) -> Matrix<u64> {
        Matrix::from_vec(1, 1, vec![v]).unwrap()
    }

    #[test]
    fn reconstruct_examples() {
        let x0 = StateMatrix { s: vec![1], e: vec![0], i: vec![0], r: vec![0] };
        let (z_se, z_ei) = zero_latents(1, 3);
        let states = reconstruct_states(&x0, &z_se, &z_ei, &Matrix::filled(1, 3, 0)).unwrap();
        assert!(states.iter().all(|s| *s == x0));

        let z_se = Matrix::from_vec(1, 2, vec![1, 0]).unwrap();
        let z_ei = Matrix::from_vec(1, 2, vec![0, 1]).unwrap();
        let states = reconstruct_states(&x0, &z_se, &z_ei, &Matrix::filled(1, 2, 0)).unwrap();
        assert_eq!(states[1], StateMatrix { s: vec![0], e: vec![1], i: vec![0], r: vec![0] });
        assert_eq!(states[2], StateMatrix { s: vec![0], e: vec![0], i: vec![1], r: vec![0] });

        let bad = reconstruct_states(&x0, &one(0), &one(0), &one(1));
        assert_eq!(bad, Err(crate::Error::Infeasible { stratum: 0, day: 1 }));
        assert!(reconstruct_states(&x0, &one(0), &Matrix::filled(1, 2, 0), &one(0)).is_err());
    }

    #[test]
    fn binomial_pmf_edges() {
        assert_abs_diff_eq!(log_binomial_pmf(1, 1, core::f64::consts::LN_2), libm::log(0.5), epsilon = 1e-15);
        assert_eq!(log_binomial_pmf(1, 3, 0.0), f64::NEG_INFINITY);
        assert_eq!(log_binomial_pmf(0, 3, 0.0), 0.0);
        assert_eq!(log_binomial_pmf(4, 3, 1.0), f64::NEG_INFINITY);
        // p -> 1: all successes are (numerically) certain
        assert_abs_diff_eq!(log_binomial_pmf(5, 5, 800.0), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn tiny_likelihood_is_three_half_log() {
        let layout = StrataLayout::new(1, 1).unwrap();
        let cov = Covariates::homogeneous(&layout, vec![4.0], vec![0.0]);
        // gamma0 = ln(ln 2) gives removal prob 1/2; nu = ln 2 likewise.
        let cfg = FixedConfig {
            nu: core::f64::consts::LN_2,
            gamma0: libm::log(core::f64::consts::LN_2),
            ..FixedConfig::default()
        };
        let model = Model::new(layout, cfg, cov, ModelVariant::D).unwrap();
        // h_SE = exp(a) * chi / n * (x_I / n) = exp(a) * 3 / 16, set to ln 2.
        let alpha0 = libm::log(core::f64::consts::LN_2 * 16.0 / 3.0);
        let params = ModelParams::neutral(1, 1, alpha0);
        let data = AugmentedData {
            z_se: one(1),
            z_ei: one(0),
            y_ir: one(1),
            x0: StateMatrix { s: vec![1], e: vec![1], i: vec![1], r: vec![1] },
        };
        let ll = log_likelihood(&data, &params, &model).unwrap();
        assert_abs_diff_eq!(ll, -2.079441541679836, epsilon = 1e-12);
    }

    #[test]
    fn prior_values() {
        let cfg = FixedConfig::default();
        let mut p = ModelParams::neutral(2, 3, 0.0);
        let expect = log_normal_density(0.0, 100.0) + log_normal_density(0.0, 10.0) + 3.0 * log_normal_density(0.0, 0.005);
        assert_abs_diff_eq!(log_prior(&p, &cfg), expect, epsilon = 1e-12);
        p.alpha0 = 1.7;
        let base = log_prior(&p, &cfg);
        let wide = log_prior(&p, &FixedConfig { sigma_alpha0: 20.0, ..cfg });
        let s2 = 100.0;
        assert_abs_diff_eq!(wide - base, -core::f64::consts::LN_2 - 1.7 * 1.7 * (1.0 / (8.0 * s2) - 1.0 / (2.0 * s2)), epsilon = 1e-12);
        p.psi[0] = 1.2;
        assert_eq!(log_prior(&p, &cfg), f64::NEG_INFINITY);
    }

    #[test]
    fn initialisation_examples() {
        let x0 = StateMatrix { s: vec![10], e: vec![0], i: vec![0], r: vec![0] };
        let zeros = Matrix::filled(1, 12, 0u64);
        let (z_se, z_ei) = initialize_latents(&zeros, &x0, 4, 4).unwrap();
        assert!(z_se.as_slice().iter().chain(z_ei.as_slice()).all(|v| *v == 0));

        let mut y = zeros.clone();
        y[(0, 10)] = 1;
        let (z_se, z_ei) = initialize_latents(&y, &x0, 4, 4).unwrap();
        assert_eq!(z_ei[(0, 6)], 1);
        assert_eq!(z_se[(0, 2)], 1);
        assert!(reconstruct_states(&x0, &z_se, &z_ei, &y).is_ok());

        let mut too_many = zeros.clone();
        too_many[(0, 11)] = 11;
        assert!(matches!(initialize_latents(&too_many, &x0, 4, 4), Err(crate::Error::Initialization(_))));
        let mut day0 = zeros;
        day0[(0, 0)] = 1;
        assert!(initialize_latents(&day0, &x0, 4, 4).is_err());
    }

    #[test]
    fn early_burst_is_sourced_from_day_one_onsets() {
        let x0 = StateMatrix { s: vec![100], e: vec![2], i: vec![2], r: vec![0] };
        let y = Matrix::from_rows(&[vec![0, 2, 3, 3, 0, 0]]).unwrap();
        let (z_se, z_ei) = initialize_latents(&y, &x0, 4, 4).unwrap();
        assert_eq!(z_ei.row(0), &[0, 6, 0, 0, 0, 0]);
        assert_eq!(z_se.row(0), &[4, 0, 0, 0, 0, 0]);
        assert!(reconstruct_states(&x0, &z_se, &z_ei, &y).is_ok());
    }

    #[test]
    fn chain_config_validation() {
        let mut c = ChainConfig::default();
        assert!(c.validate().is_ok());
        c.burn_in = c.iterations;
        assert!(c.validate().is_err());
        c.burn_in = 0;
        c.thin = 0;
        assert!(c.validate().is_err());
    }
}
