//! Metropolis-within-Gibbs state and moves.
//!
//! Internally every per-day array is day-major (`t * L + i`). The sampler
//! caches the infectious pressure `Σ_j K_ij x_I[t, j] / n_j`, which does not
//! depend on the parameters, and the log-likelihood contribution of every
//! (day, stratum, transition) cell, so that a latent move only re-scores the
//! cells whose counts it touches. Everything is recomputed from scratch at
//! the start of each iteration to stop floating-point drift.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{log_normal_density, log_prior, AugmentedData, BlockStats, ChainConfig, PosteriorSample};
use crate::error::{bail, Result};
use crate::matrix::Matrix;
use crate::model::{FixedConfig, Model, ModelParams};
use crate::rng::StreamSeed;
use crate::simulator::StateMatrix;

const TARGET_BLOCK: f64 = 0.234;
const TARGET_SCALAR: f64 = 0.44;
const LATENT_LOW: f64 = 0.3;
const LATENT_HIGH: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default)]
struct Counter {
    proposed: u64,
    accepted: u64,
    window_proposed: u64,
    window_accepted: u64,
}

impl Counter {
    fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.window_proposed += 1;
        if accepted {
            self.accepted += 1;
            self.window_accepted += 1;
        }
    }

    fn take_window(&mut self) -> Option<f64> {
        let out = (self.window_proposed > 0).then(|| self.window_accepted as f64 / self.window_proposed as f64);
        self.window_proposed = 0;
        self.window_accepted = 0;
        out
    }

    fn reset(&mut self) {
        *self = Counter::default();
    }
}

fn robbins_monro_step(iteration: usize) -> f64 {
    libm::pow(iteration as f64 + 1.0, -0.6)
}

#[derive(Debug, Clone)]
struct ScalarProposal {
    log_sd: f64,
    counter: Counter,
}

impl ScalarProposal {
    fn new(sd: f64) -> Self {
        ScalarProposal { log_sd: libm::log(sd), counter: Counter::default() }
    }

    fn sd(&self) -> f64 {
        libm::exp(self.log_sd)
    }

    fn adapt(&mut self, accepted: bool, iteration: usize) {
        let a = if accepted { 1.0 } else { 0.0 };
        self.log_sd = (self.log_sd + (a - TARGET_SCALAR) * robbins_monro_step(iteration)).clamp(-25.0, 5.0);
    }
}

/// Adaptive Metropolis on a small block: the proposal covariance is the
/// running empirical covariance of the chain, with a global scale tuned by
/// Robbins-Monro towards the optimal block acceptance rate.
#[derive(Debug, Clone)]
struct AdaptiveBlock {
    dim: usize,
    log_scale: f64,
    chol: Vec<f64>,
    empirical: bool,
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
    counter: Counter,
}

impl AdaptiveBlock {
    fn new(dim: usize, initial_sd: f64) -> Self {
        let mut chol = vec![0.0; dim * dim];
        for d in 0..dim {
            chol[d * dim + d] = initial_sd;
        }
        AdaptiveBlock {
            dim,
            log_scale: 0.0,
            chol,
            empirical: false,
            n: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim * dim],
            counter: Counter::default(),
        }
    }

    fn propose(&self, x: &[f64], rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
        let z: Vec<f64> = (0..self.dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let s = libm::exp(self.log_scale);
        out.clear();
        for r in 0..self.dim {
            let step: f64 = (0..=r).map(|c| self.chol[r * self.dim + c] * z[c]).sum();
            out.push(x[r] + s * step);
        }
    }

    fn adapt(&mut self, x: &[f64], accepted: bool, iteration: usize) {
        let a = if accepted { 1.0 } else { 0.0 };
        self.log_scale = (self.log_scale + (a - TARGET_BLOCK) * robbins_monro_step(iteration)).clamp(-20.0, 5.0);
        self.n += 1.0;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d / self.n;
        }
        for r in 0..self.dim {
            for c in 0..self.dim {
                self.m2[r * self.dim + c] += delta[r] * (x[c] - self.mean[c]);
            }
        }
    }

    fn refresh_covariance(&mut self) {
        let d = self.dim;
        if self.n < (20 + 10 * d) as f64 {
            return;
        }
        let mut cov: Vec<f64> = self.m2.iter().map(|v| v / (self.n - 1.0)).collect();
        for k in 0..d {
            cov[k * d + k] += 1e-8;
        }
        if let Some(l) = cholesky(&cov, d) {
            self.chol = l;
            if !self.empirical {
                self.empirical = true;
                self.log_scale = libm::log(2.38 / libm::sqrt(d as f64));
            }
        }
    }
}

fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            if i == j {
                let d = a[i * n + i] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[i * n + i] = libm::sqrt(d);
            } else {
                l[i * n + j] = (a[i * n + j] - s) / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn logit(p: f64) -> f64 {
    libm::log(p / (1.0 - p))
}

fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-u))
}

fn log_jacobian(p: &[f64]) -> f64 {
    p.iter().map(|v| libm::log(v * (1.0 - v))).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Se,
    Ei,
}

#[derive(Debug, Clone, Copy)]
struct Change {
    kind: Kind,
    day: usize,
    delta: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LatentMove {
    Shift,
    Single,
    Pair,
}

const LATENT_MOVES: [LatentMove; 3] = [LatentMove::Shift, LatentMove::Single, LatentMove::Pair];

#[derive(Debug, Clone)]
struct LatentProposal {
    max_size: u64,
    counter: Counter,
}

/// Pending cell rewrites for a latent proposal.
#[derive(Debug, Default)]
struct Scratch {
    se: Vec<(usize, f64)>,
    ei: Vec<(usize, f64)>,
    ir: Vec<(usize, f64)>,
    pressure: Vec<(usize, f64)>,
    states: Vec<(usize, u64, u64, u64)>,
}

impl Scratch {
    fn clear(&mut self) {
        self.se.clear();
        self.ei.clear();
        self.ir.clear();
        self.pressure.clear();
        self.states.clear();
    }
}

/// One MCMC chain over parameters and latent events.
pub struct Sampler<'m> {
    model: &'m Model,
    cfg: FixedConfig,
    l: usize,
    days: usize,
    chain: u64,
    x0: StateMatrix,
    y: Vec<u64>,
    z_se: Vec<u64>,
    z_ei: Vec<u64>,
    xs: Vec<u64>,
    xe: Vec<u64>,
    xi: Vec<u64>,
    kron: Vec<f64>,
    inv_n: Vec<f64>,
    pressure_floor: f64,
    ln_fact: Vec<f64>,
    weekday: Vec<f64>,
    pressure: Vec<f64>,
    params: ModelParams,
    chi: Vec<f64>,
    chi_over_n: Vec<f64>,
    drive_rate: Vec<f64>,
    lam_ei: f64,
    lam_ir: Vec<f64>,
    cell_se: Vec<f64>,
    cell_ei: Vec<f64>,
    cell_ir: Vec<f64>,
    loglik: f64,
    use_likelihood: bool,
    update_params: bool,
    update_latents: bool,
    store_latents: bool,
    moves: usize,
    max_shift: usize,
    adapt_every: usize,
    adapting: bool,
    iteration: usize,
    rng: ChaCha8Rng,
    psi_block: AdaptiveBlock,
    rho_block: AdaptiveBlock,
    gamma1_prop: ScalarProposal,
    alpha0_prop: ScalarProposal,
    inc_props: Vec<ScalarProposal>,
    inc_counter: Counter,
    latent: [LatentProposal; 3],
    scratch: Scratch,
    buffer: Vec<f64>,
}

impl<'m> Sampler<'m> {
    pub fn new(model: &'m Model, data: AugmentedData, config: &ChainConfig) -> Result<Self> {
        config.validate()?;
        let layout = model.layout();
        let l = layout.num_strata();
        let k = layout.num_age();
        super::check_shapes(&data.x0, &data.z_se, &data.z_ei, &data.y_ir)?;
        if data.x0.num_strata() != l {
            bail!(InvalidArgument, "data has {} strata, model has {l}", data.x0.num_strata());
        }
        let days = data.num_days();
        if days == 0 {
            bail!(InvalidArgument, "need at least one observed day");
        }
        let weekday = (0..days).map(|t| model.weekday(t)).collect::<Result<Vec<f64>>>()?;
        let day_major = |m: &Matrix<u64>| {
            let mut out = vec![0u64; days * l];
            for i in 0..l {
                for t in 0..days {
                    out[t * l + i] = m[(i, t)];
                }
            }
            out
        };
        let max_n = data.x0.totals().into_iter().max().unwrap_or(0) as usize;
        let mut ln_fact = Vec::with_capacity(max_n + 1);
        ln_fact.push(0.0);
        for v in 1..=max_n {
            let prev: f64 = ln_fact[v - 1];
            ln_fact.push(prev + libm::log(v as f64));
        }
        let kron = model.kron().into_vec();
        let inv_n: Vec<f64> = model.population().iter().map(|n| 1.0 / n).collect();
        let min_k = kron.iter().copied().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
        let min_inv = inv_n.iter().copied().fold(f64::INFINITY, f64::min);
        let pressure_floor = 0.5 * min_k * min_inv;

        let params = match &config.initial_params {
            Some(p) => {
                p.validate(k)?;
                if p.alpha_inc.len() != days {
                    bail!(InvalidArgument, "initial parameters need {days} drive increments");
                }
                p.clone()
            }
            None => ModelParams::neutral(k, days, 0.0),
        };
        let moves = if config.latent_moves == 0 { 2 * l * days } else { config.latent_moves };
        let cfg = *model.config();
        let mut sampler = Sampler {
            model,
            cfg,
            l,
            days,
            chain: config.chain,
            x0: data.x0.clone(),
            y: day_major(&data.y_ir),
            z_se: day_major(&data.z_se),
            z_ei: day_major(&data.z_ei),
            xs: vec![0; (days + 1) * l],
            xe: vec![0; (days + 1) * l],
            xi: vec![0; (days + 1) * l],
            kron,
            inv_n,
            pressure_floor,
            ln_fact,
            weekday,
            pressure: vec![0.0; days * l],
            chi: Vec::new(),
            chi_over_n: vec![0.0; l],
            drive_rate: vec![0.0; days],
            lam_ei: cfg.nu * cfg.dt,
            lam_ir: vec![0.0; days],
            cell_se: vec![0.0; days * l],
            cell_ei: vec![0.0; days * l],
            cell_ir: vec![0.0; days * l],
            loglik: 0.0,
            params,
            use_likelihood: config.use_likelihood,
            update_params: config.update_params,
            update_latents: config.update_latents,
            store_latents: config.store_latents,
            moves,
            max_shift: config.max_shift,
            adapt_every: config.adapt_every,
            adapting: config.burn_in > 0,
            iteration: 0,
            rng: StreamSeed::new(config.seed, config.chain).sequential(),
            psi_block: AdaptiveBlock::new(k, config.logit_scale),
            rho_block: AdaptiveBlock::new(k, config.logit_scale),
            gamma1_prop: ScalarProposal::new(config.gamma1_scale),
            alpha0_prop: ScalarProposal::new(config.alpha0_scale),
            inc_props: (0..days).map(|_| ScalarProposal::new(cfg.sigma_alpha)).collect(),
            inc_counter: Counter::default(),
            latent: [
                LatentProposal { max_size: 1, counter: Counter::default() },
                LatentProposal { max_size: 1, counter: Counter::default() },
                LatentProposal { max_size: 1, counter: Counter::default() },
            ],
            scratch: Scratch::default(),
            buffer: Vec::new(),
        };
        if !sampler.reconstruct() {
            bail!(Initialization, "initial latent events are infeasible");
        }
        if config.initial_params.is_none() {
            sampler.params.alpha0 = sampler.moment_alpha0()?;
        }
        sampler.chi = model.chi(&sampler.params)?;
        sampler.refresh();
        if sampler.use_likelihood && !sampler.loglik.is_finite() {
            bail!(
                Initialization,
                "initial log-likelihood is not finite; the starting latents or parameters are impossible"
            );
        }
        Ok(sampler)
    }

    /// Drive level that matches the expected to the observed number of
    /// latent infections under flat behaviour.
    fn moment_alpha0(&mut self) -> Result<f64> {
        self.chi = self.model.chi(&self.params)?;
        self.params.alpha0 = 0.0;
        self.params.alpha_inc.iter_mut().for_each(|v| *v = 0.0);
        self.refresh();
        let l = self.l;
        let mut expected = 0.0;
        for t in 0..self.days {
            for i in 0..l {
                expected += self.xs[t * l + i] as f64 * self.chi_over_n[i] * self.pressure[t * l + i] * self.cfg.dt;
            }
        }
        let observed: u64 = self.z_se.iter().sum();
        Ok(if observed > 0 && expected > 0.0 {
            libm::log(observed as f64 / expected)
        } else {
            0.0
        })
    }

    /// Rebuilds the compartment counts; false if any goes negative.
    fn reconstruct(&mut self) -> bool {
        let l = self.l;
        for i in 0..l {
            self.xs[i] = self.x0.s[i];
            self.xe[i] = self.x0.e[i];
            self.xi[i] = self.x0.i[i];
        }
        for t in 0..self.days {
            for i in 0..l {
                let c = t * l + i;
                let n = c + l;
                let (se, ei, ir) = (self.z_se[c], self.z_ei[c], self.y[c]);
                match (
                    self.xs[c].checked_sub(se),
                    (self.xe[c] + se).checked_sub(ei),
                    (self.xi[c] + ei).checked_sub(ir),
                ) {
                    (Some(s), Some(e), Some(inf)) => {
                        self.xs[n] = s;
                        self.xe[n] = e;
                        self.xi[n] = inf;
                    }
                    _ => return false,
                }
            }
        }
        true
    }

    fn snap(&self, p: f64) -> f64 {
        if p < self.pressure_floor {
            0.0
        } else {
            p
        }
    }

    #[inline]
    fn lbinom(&self, k: u64, n: u64, lambda: f64) -> f64 {
        if k > n {
            return f64::NEG_INFINITY;
        }
        if !(lambda > 0.0) {
            return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
        }
        let coef = self.ln_fact[n as usize] - self.ln_fact[k as usize] - self.ln_fact[(n - k) as usize];
        let success = if k == 0 { 0.0 } else { k as f64 * libm::log(-libm::expm1(-lambda)) };
        coef + success - (n - k) as f64 * lambda
    }

    #[inline]
    fn se_cell(&self, t: usize, i: usize, z: u64, s: u64, pressure: f64) -> f64 {
        self.lbinom(z, s, self.drive_rate[t] * self.chi_over_n[i] * pressure)
    }

    /// Exact recomputation of every cache from the current state.
    fn refresh(&mut self) {
        let l = self.l;
        let reconstructed = self.reconstruct();
        debug_assert!(reconstructed);
        for t in 0..self.days {
            for i in 0..l {
                let row = &self.kron[i * l..(i + 1) * l];
                let mut p = 0.0;
                for j in 0..l {
                    p += row[j] * self.xi[t * l + j] as f64 * self.inv_n[j];
                }
                self.pressure[t * l + i] = self.snap(p);
            }
        }
        for i in 0..l {
            self.chi_over_n[i] = self.chi[i] * self.inv_n[i];
        }
        self.set_drive_rates(0);
        self.set_removal_rates();
        let mut total = 0.0;
        for t in 0..self.days {
            for i in 0..l {
                let c = t * l + i;
                self.cell_se[c] = self.se_cell(t, i, self.z_se[c], self.xs[c], self.pressure[c]);
                self.cell_ei[c] = self.lbinom(self.z_ei[c], self.xe[c], self.lam_ei);
                self.cell_ir[c] = self.lbinom(self.y[c], self.xi[c], self.lam_ir[t]);
                total += self.cell_se[c] + self.cell_ei[c] + self.cell_ir[c];
            }
        }
        self.loglik = total;
    }

    fn set_drive_rates(&mut self, from: usize) {
        let mut a = self.params.drive_at(from);
        for t in from..self.days {
            if t > from {
                a += self.params.alpha_inc[t - 1];
            }
            self.drive_rate[t] = libm::exp(a) * self.cfg.dt;
        }
    }

    fn set_removal_rates(&mut self) {
        for t in 0..self.days {
            self.lam_ir[t] = libm::exp(self.cfg.gamma0 + self.params.gamma1 * self.weekday[t]) * self.cfg.dt;
        }
    }

    fn accept(&mut self, log_ratio: f64) -> bool {
        if log_ratio.is_nan() {
            return false;
        }
        if log_ratio >= 0.0 {
            return true;
        }
        let u: f64 = self.rng.random();
        libm::log(u) < log_ratio
    }

    /// Re-scores all SE cells into `buffer`; returns the change in log-likelihood.
    fn rescore_se(&mut self, from_day: usize) -> f64 {
        let l = self.l;
        let mut buffer = core::mem::take(&mut self.buffer);
        buffer.clear();
        let mut delta = 0.0;
        for t in from_day..self.days {
            for i in 0..l {
                let c = t * l + i;
                let v = self.se_cell(t, i, self.z_se[c], self.xs[c], self.pressure[c]);
                delta += v - self.cell_se[c];
                buffer.push(v);
            }
        }
        self.buffer = buffer;
        delta
    }

    fn commit_se(&mut self, from_day: usize) {
        let start = from_day * self.l;
        self.cell_se[start..].copy_from_slice(&self.buffer);
    }

    fn likelihood_term(&self, delta: f64) -> f64 {
        if self.use_likelihood {
            delta
        } else {
            0.0
        }
    }

    pub fn iterate(&mut self) {
        self.refresh();
        if self.update_params {
            self.update_psi();
            self.update_rho();
            self.update_gamma1();
            self.update_alpha0();
            self.update_increments();
        }
        if self.update_latents {
            for _ in 0..self.moves {
                self.latent_move();
            }
        }
        self.iteration += 1;
        if self.adapting && self.iteration % self.adapt_every == 0 {
            self.psi_block.refresh_covariance();
            self.rho_block.refresh_covariance();
            for lp in self.latent.iter_mut() {
                if let Some(rate) = lp.counter.take_window() {
                    if rate > LATENT_HIGH {
                        lp.max_size += (lp.max_size / 4).max(1);
                    } else if rate < LATENT_LOW && lp.max_size > 1 {
                        lp.max_size = (lp.max_size * 3 / 4).max(1);
                    }
                }
            }
        }
    }

    /// Freezes every adaptive proposal and restarts acceptance counting.
    pub fn end_burn_in(&mut self) {
        self.adapting = false;
        self.psi_block.counter.reset();
        self.rho_block.counter.reset();
        self.gamma1_prop.counter.reset();
        self.alpha0_prop.counter.reset();
        self.inc_counter.reset();
        for lp in self.latent.iter_mut() {
            lp.counter.reset();
        }
    }

    fn update_slopes(&mut self, intercepts: bool) {
        let current = if intercepts { self.params.psi.clone() } else { self.params.rho.clone() };
        let u: Vec<f64> = current.iter().map(|p| logit(*p)).collect();
        let mut proposal = Vec::new();
        {
            let block = if intercepts { &self.psi_block } else { &self.rho_block };
            block.propose(&u, &mut self.rng, &mut proposal);
        }
        let candidate: Vec<f64> = proposal.iter().map(|v| sigmoid(*v)).collect();
        let mut accepted = false;
        if candidate.iter().all(|p| *p > 0.0 && *p < 1.0) {
            let (psi, rho) = if intercepts {
                (candidate.clone(), self.params.rho.clone())
            } else {
                (self.params.psi.clone(), candidate.clone())
            };
            let rho_tilde: Vec<f64> = rho.iter().map(|r| r - 0.5).collect();
            if let Ok(chi) = self.model.chi_with_slopes(&psi, &rho_tilde) {
                let jac = log_jacobian(&candidate) - log_jacobian(&current);
                let old_chi = core::mem::replace(&mut self.chi, chi);
                let changed = old_chi != self.chi;
                if changed {
                    for i in 0..self.l {
                        self.chi_over_n[i] = self.chi[i] * self.inv_n[i];
                    }
                }
                let dll = if changed { self.rescore_se(0) } else { 0.0 };
                let ratio = self.likelihood_term(dll) + jac;
                if self.accept(ratio) {
                    accepted = true;
                    if changed {
                        self.commit_se(0);
                        self.loglik += dll;
                    }
                    if intercepts {
                        self.params.psi = candidate;
                    } else {
                        self.params.rho = candidate;
                    }
                } else {
                    self.chi = old_chi;
                    if changed {
                        for i in 0..self.l {
                            self.chi_over_n[i] = self.chi[i] * self.inv_n[i];
                        }
                    }
                }
            }
        }
        let state: Vec<f64> = if intercepts { &self.params.psi } else { &self.params.rho }
            .iter()
            .map(|p| logit(*p))
            .collect();
        let (adapting, iteration) = (self.adapting, self.iteration);
        let block = if intercepts { &mut self.psi_block } else { &mut self.rho_block };
        block.counter.record(accepted);
        if adapting {
            block.adapt(&state, accepted, iteration);
        }
    }

    fn update_psi(&mut self) {
        self.update_slopes(true);
    }

    fn update_rho(&mut self) {
        self.update_slopes(false);
    }

    fn update_gamma1(&mut self) {
        let step: f64 = self.rng.sample(StandardNormal);
        let old = self.params.gamma1;
        let new = old + self.gamma1_prop.sd() * step;
        let l = self.l;
        let mut dll = 0.0;
        let mut buffer = core::mem::take(&mut self.buffer);
        buffer.clear();
        for t in 0..self.days {
            let lam = libm::exp(self.cfg.gamma0 + new * self.weekday[t]) * self.cfg.dt;
            for i in 0..l {
                let c = t * l + i;
                let v = self.lbinom(self.y[c], self.xi[c], lam);
                dll += v - self.cell_ir[c];
                buffer.push(v);
            }
        }
        let prior = log_normal_density(new, self.cfg.sigma_gamma1) - log_normal_density(old, self.cfg.sigma_gamma1);
        let accepted = self.accept(self.likelihood_term(dll) + prior);
        if accepted {
            self.params.gamma1 = new;
            self.cell_ir.copy_from_slice(&buffer);
            self.loglik += dll;
            self.set_removal_rates();
        }
        self.buffer = buffer;
        self.gamma1_prop.counter.record(accepted);
        if self.adapting {
            self.gamma1_prop.adapt(accepted, self.iteration);
        }
    }

    fn update_alpha0(&mut self) {
        let step: f64 = self.rng.sample(StandardNormal);
        let old = self.params.alpha0;
        let new = old + self.alpha0_prop.sd() * step;
        self.params.alpha0 = new;
        self.set_drive_rates(0);
        let dll = self.rescore_se(0);
        let prior = log_normal_density(new, self.cfg.sigma_alpha0) - log_normal_density(old, self.cfg.sigma_alpha0);
        let accepted = self.accept(self.likelihood_term(dll) + prior);
        if accepted {
            self.commit_se(0);
            self.loglik += dll;
        } else {
            self.params.alpha0 = old;
            self.set_drive_rates(0);
        }
        self.alpha0_prop.counter.record(accepted);
        if self.adapting {
            self.alpha0_prop.adapt(accepted, self.iteration);
        }
    }

    fn update_increments(&mut self) {
        for q in 0..self.days {
            let step: f64 = self.rng.sample(StandardNormal);
            let old = self.params.alpha_inc[q];
            let new = old + self.inc_props[q].sd() * step;
            // Increment q first enters the drive on day q + 1.
            let first = q + 1;
            self.params.alpha_inc[q] = new;
            let dll = if first < self.days {
                self.set_drive_rates(first);
                self.rescore_se(first)
            } else {
                0.0
            };
            let prior = log_normal_density(new, self.cfg.sigma_alpha) - log_normal_density(old, self.cfg.sigma_alpha);
            let accepted = self.accept(self.likelihood_term(dll) + prior);
            if accepted {
                if first < self.days {
                    self.commit_se(first);
                }
                self.loglik += dll;
            } else {
                self.params.alpha_inc[q] = old;
                if first < self.days {
                    self.set_drive_rates(first);
                }
            }
            self.inc_counter.record(accepted);
            if self.adapting {
                let it = self.iteration;
                self.inc_props[q].adapt(accepted, it);
            }
        }
    }

    fn latent_move(&mut self) {
        let u: f64 = self.rng.random();
        let which = if u < 0.5 {
            0
        } else if u < 0.75 {
            1
        } else {
            2
        };
        let kind = LATENT_MOVES[which];
        let m = self.rng.random_range(1..=self.latent[which].max_size) as i64;
        let i = self.rng.random_range(0..self.l);
        let t = self.rng.random_range(0..self.days);
        let transition = if self.rng.random::<bool>() { Kind::Se } else { Kind::Ei };
        let sign = if self.rng.random::<bool>() { 1 } else { -1 };
        let s = self.max_shift as i64;
        let mut changes = [Change { kind: transition, day: t, delta: 0 }; 2];
        let count = match kind {
            LatentMove::Shift => {
                let offset = self.rng.random_range(1..=s) * sign;
                let target = t as i64 + offset;
                if target < 0 || target >= self.days as i64 {
                    self.latent[which].counter.record(false);
                    return;
                }
                changes[0].delta = -m;
                changes[1] = Change { kind: transition, day: target as usize, delta: m };
                2
            }
            LatentMove::Single => {
                changes[0].delta = sign * m;
                1
            }
            LatentMove::Pair => {
                let gap = self.rng.random_range(0..=self.max_shift);
                if t + gap >= self.days {
                    self.latent[which].counter.record(false);
                    return;
                }
                changes[0] = Change { kind: Kind::Se, day: t, delta: sign * m };
                changes[1] = Change { kind: Kind::Ei, day: t + gap, delta: sign * m };
                2
            }
        };
        let accepted = self.propose_latent(i, &changes[..count]);
        self.latent[which].counter.record(accepted);
    }

    /// Scores and, if accepted, applies event changes in stratum `i`.
    fn propose_latent(&mut self, i: usize, changes: &[Change]) -> bool {
        let l = self.l;
        let days = self.days;
        for c in changes {
            let z = match c.kind {
                Kind::Se => self.z_se[c.day * l + i],
                Kind::Ei => self.z_ei[c.day * l + i],
            } as i64;
            if z + c.delta < 0 {
                return false;
            }
        }
        let lo = changes.iter().map(|c| c.day).min().unwrap_or(0);
        let hi = changes.iter().map(|c| c.day).max().unwrap_or(0);
        let (mut net_se, mut net_ei) = (0i64, 0i64);
        for c in changes {
            match c.kind {
                Kind::Se => net_se += c.delta,
                Kind::Ei => net_ei += c.delta,
            }
        }
        let persistent = net_se != 0 || net_ei != 0;
        let last_state = if persistent { days } else { hi };

        self.scratch.clear();
        let (mut ds, mut de, mut di) = (0i64, 0i64, 0i64);
        let mut dll = 0.0;
        for d in lo..=last_state {
            let c = d * l + i;
            let s = self.xs[c] as i64 + ds;
            let e = self.xe[c] as i64 + de;
            let inf = self.xi[c] as i64 + di;
            if s < 0 || e < 0 || inf < 0 {
                return false;
            }
            let (s, e, inf) = (s as u64, e as u64, inf as u64);
            if d > lo {
                self.scratch.states.push((c, s, e, inf));
            }
            if d == days {
                break;
            }
            let (mut dz_se, mut dz_ei) = (0i64, 0i64);
            for ch in changes.iter().filter(|ch| ch.day == d) {
                match ch.kind {
                    Kind::Se => dz_se += ch.delta,
                    Kind::Ei => dz_ei += ch.delta,
                }
            }
            let z_se = (self.z_se[c] as i64 + dz_se) as u64;
            let z_ei = (self.z_ei[c] as i64 + dz_ei) as u64;
            if di != 0 {
                let shift = di as f64 * self.inv_n[i];
                for j in 0..l {
                    let cj = d * l + j;
                    let p = self.snap(self.pressure[cj] + self.kron[j * l + i] * shift);
                    let v = if j == i {
                        self.se_cell(d, j, z_se, s, p)
                    } else {
                        self.se_cell(d, j, self.z_se[cj], self.xs[cj], p)
                    };
                    dll += v - self.cell_se[cj];
                    self.scratch.pressure.push((cj, p));
                    self.scratch.se.push((cj, v));
                }
                let v = self.lbinom(self.y[c], inf, self.lam_ir[d]);
                dll += v - self.cell_ir[c];
                self.scratch.ir.push((c, v));
            } else if ds != 0 || dz_se != 0 {
                let v = self.se_cell(d, i, z_se, s, self.pressure[c]);
                dll += v - self.cell_se[c];
                self.scratch.se.push((c, v));
            }
            if de != 0 || dz_ei != 0 {
                let v = self.lbinom(z_ei, e, self.lam_ei);
                dll += v - self.cell_ei[c];
                self.scratch.ei.push((c, v));
            }
            if dll == f64::NEG_INFINITY && self.use_likelihood {
                return false;
            }
            ds -= dz_se;
            de += dz_se - dz_ei;
            di += dz_ei;
        }
        if self.use_likelihood && !self.accept(dll) {
            return false;
        }
        for ch in changes {
            let c = ch.day * l + i;
            let z = match ch.kind {
                Kind::Se => &mut self.z_se[c],
                Kind::Ei => &mut self.z_ei[c],
            };
            *z = (*z as i64 + ch.delta) as u64;
        }
        for &(c, s, e, inf) in &self.scratch.states {
            self.xs[c] = s;
            self.xe[c] = e;
            self.xi[c] = inf;
        }
        for &(c, p) in &self.scratch.pressure {
            self.pressure[c] = p;
        }
        for &(c, v) in &self.scratch.se {
            self.cell_se[c] = v;
        }
        for &(c, v) in &self.scratch.ei {
            self.cell_ei[c] = v;
        }
        for &(c, v) in &self.scratch.ir {
            self.cell_ir[c] = v;
        }
        self.loglik += dll;
        true
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn log_likelihood(&self) -> f64 {
        self.loglik
    }

    /// Log-likelihood plus log-prior on the natural parameter scale.
    pub fn log_posterior(&self) -> f64 {
        self.loglik + log_prior(&self.params, &self.cfg)
    }

    /// Current latent events as `(Z_SE, Z_EI)`, each `L x T`.
    pub fn latents(&self) -> (Matrix<u64>, Matrix<u64>) {
        let to_matrix = |v: &[u64]| {
            let mut m = Matrix::filled(self.l, self.days, 0u64);
            for t in 0..self.days {
                for i in 0..self.l {
                    m[(i, t)] = v[t * self.l + i];
                }
            }
            m
        };
        (to_matrix(&self.z_se), to_matrix(&self.z_ei))
    }

    pub fn terminal_state(&self) -> StateMatrix {
        let l = self.l;
        let base = self.days * l;
        let mut r = self.x0.r.clone();
        for t in 0..self.days {
            for i in 0..l {
                r[i] += self.y[t * l + i];
            }
        }
        StateMatrix {
            s: self.xs[base..base + l].to_vec(),
            e: self.xe[base..base + l].to_vec(),
            i: self.xi[base..base + l].to_vec(),
            r,
        }
    }

    pub fn sample(&self, iteration: usize) -> PosteriorSample {
        PosteriorSample {
            params: self.params.clone(),
            log_likelihood: self.loglik,
            log_posterior: self.log_posterior(),
            iteration,
            chain: self.chain,
            terminal: self.terminal_state(),
            latents: self.store_latents.then(|| self.latents()),
        }
    }

    pub fn block_stats(&self) -> Vec<BlockStats> {
        let stat = |name: &str, c: &Counter, scale: f64| BlockStats {
            name: String::from(name),
            proposed: c.proposed,
            accepted: c.accepted,
            scale,
        };
        let mean_inc_sd = self.inc_props.iter().map(|p| p.sd()).sum::<f64>() / self.inc_props.len().max(1) as f64;
        vec![
            stat("psi", &self.psi_block.counter, libm::exp(self.psi_block.log_scale)),
            stat("rho", &self.rho_block.counter, libm::exp(self.rho_block.log_scale)),
            stat("gamma1", &self.gamma1_prop.counter, self.gamma1_prop.sd()),
            stat("alpha0", &self.alpha0_prop.counter, self.alpha0_prop.sd()),
            stat("alpha-increments", &self.inc_counter, mean_inc_sd),
            stat("latent-shift", &self.latent[0].counter, self.latent[0].max_size as f64),
            stat("latent-single", &self.latent[1].counter, self.latent[1].max_size as f64),
            stat("latent-pair", &self.latent[2].counter, self.latent[2].max_size as f64),
        ]
    }
}
