use alloc::vec;
use alloc::vec::Vec;

use chrono::{Datelike, NaiveDate, Weekday};

use super::{unit_vector, Covariates, FixedConfig, Hazards, ModelVariant, StrataLayout};
use crate::error::{bail, Result};
use crate::matrix::Matrix;
use crate::simulator::StateMatrix;

pub const WEEKDAY_EFFECT: f64 = 2.0 / 7.0;
pub const WEEKEND_EFFECT: f64 = -5.0 / 7.0;

/// `v` minus its arithmetic mean.
pub fn center(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        bail!(InvalidArgument, "cannot centre an empty vector");
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    Ok(v.iter().map(|x| x - mean).collect())
}

/// `tanh(-ξ d̃)` per element.
pub fn deprivation_slope_shape(d_tilde: &[f64], xi: f64) -> Vec<f64> {
    d_tilde.iter().map(|d| libm::tanh(-xi * d)).collect()
}

/// Which form of the per-age block `κ_k` a variant uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChiForm {
    /// `κ_k = 1`.
    Unit,
    /// `κ_k = η (½ + ρ̃_k f(d̃))`.
    SlopeOnly,
    /// `κ_k = φ (1 + ψ̃_k) + η (½ + ρ̃_k f(d̃))`.
    Full,
}

/// Stacks the blocks `κ_1, …, κ_K` (age-major) from centred intercepts,
/// centred slopes and the evaluated deprivation shape.
pub fn chi_from_parts(
    form: ChiForm,
    psi_tilde: &[f64],
    rho_tilde: &[f64],
    slope: &[f64],
    cfg: &FixedConfig,
) -> Result<Vec<f64>> {
    let k = rho_tilde.len();
    let j = slope.len();
    if form == ChiForm::Unit {
        return Ok(unit_vector(k * j));
    }
    if psi_tilde.len() != k {
        bail!(InvalidArgument, "psi and rho lengths differ");
    }
    let mut chi = Vec::with_capacity(k * j);
    for (pt, rt) in psi_tilde.iter().zip(rho_tilde) {
        let intercept = match form {
            ChiForm::Full => cfg.phi * (1.0 + pt),
            _ => 0.0,
        };
        for f in slope {
            chi.push(intercept + cfg.eta * (0.5 + rt * f));
        }
    }
    if let Some(bad) = chi.iter().find(|c| !(**c > 0.0)) {
        bail!(
            InvalidConfiguration,
            "behavioural adaptation element {bad} is not positive; check eta, phi and xi"
        );
    }
    Ok(chi)
}

/// Full behavioural adaptation vector `χ` from raw `ψ`, `ρ` and deprivation
/// indices, with the `tanh` slope. Boundary values 0 and 1 are accepted
/// here; estimated parameters are kept strictly inside.
pub fn behavioural_adaptation(
    psi: &[f64],
    rho: &[f64],
    deprivation: &[f64],
    cfg: &FixedConfig,
) -> Result<Vec<f64>> {
    if psi.len() != rho.len() {
        bail!(InvalidArgument, "psi and rho lengths differ");
    }
    if psi.iter().chain(rho).any(|v| !(0.0..=1.0).contains(v)) {
        bail!(InvalidArgument, "psi and rho entries must lie in [0, 1]");
    }
    let psi_tilde = center(psi)?;
    let rho_tilde: Vec<f64> = rho.iter().map(|r| r - 0.5).collect();
    let slope = deprivation_slope_shape(&center(deprivation)?, cfg.xi);
    chi_from_parts(ChiForm::Full, &psi_tilde, &rho_tilde, &slope, cfg)
}

/// `C_A ⊗ C_D` as an explicit `L x L` matrix.
pub fn kron_mixing(age: &Matrix, deprivation: &Matrix) -> Result<Matrix> {
    if !age.is_square() || !deprivation.is_square() {
        bail!(InvalidArgument, "mixing matrices must be square");
    }
    Ok(age.kron(deprivation))
}

/// `(C_A ⊗ C_D) · v` computed as `C_A · V · C_Dᵀ` with `V` the `K x J`
/// reshape of `v`.
pub fn infectious_pressure(age: &Matrix, deprivation: &Matrix, v: &[f64]) -> Vec<f64> {
    let k = age.rows();
    let j = deprivation.rows();
    debug_assert_eq!(v.len(), k * j);
    // W = V · C_Dᵀ
    let mut w = vec![0.0; k * j];
    for kk in 0..k {
        let vrow = &v[kk * j..(kk + 1) * j];
        for jj in 0..j {
            let cd = deprivation.row(jj);
            w[kk * j + jj] = vrow.iter().zip(cd).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; k * j];
    for kk in 0..k {
        let ca = age.row(kk);
        let orow = &mut out[kk * j..(kk + 1) * j];
        for (k2, c) in ca.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            for (o, x) in orow.iter_mut().zip(&w[k2 * j..(k2 + 1) * j]) {
                *o += c * x;
            }
        }
    }
    out
}

/// `a(t) = α0 + Σ_{q ≤ t} α_q` with one increment per day; `a[0] = α0`
/// and the result has one more entry than `increments`.
pub fn random_walk_drive(alpha0: f64, increments: &[f64]) -> Vec<f64> {
    let mut a = Vec::with_capacity(increments.len() + 1);
    let mut acc = alpha0;
    a.push(acc);
    for inc in increments {
        acc += inc;
        a.push(acc);
    }
    a
}

/// Probability of at least one event in `dt` at constant rate `h`.
pub fn transition_prob(h: f64, dt: f64) -> Result<f64> {
    if !(h >= 0.0) {
        bail!(InvalidArgument, "hazard must be non-negative, got {h}");
    }
    if !(dt > 0.0) {
        bail!(InvalidArgument, "time step must be positive, got {dt}");
    }
    Ok(-libm::expm1(-h * dt))
}

/// `2/7` on Monday to Friday, `-5/7` at weekends.
pub fn weekday_covariate(dates: &[NaiveDate]) -> Vec<f64> {
    dates
        .iter()
        .map(|d| match d.weekday() {
            Weekday::Sat | Weekday::Sun => WEEKEND_EFFECT,
            _ => WEEKDAY_EFFECT,
        })
        .collect()
}

/// Behavioural form and effective age mixing for a variant.
pub fn build_variant(variant: ModelVariant, base: &Covariates) -> (ChiForm, Matrix) {
    let k = base.age_mixing.rows();
    match variant {
        ModelVariant::A => (ChiForm::Unit, Matrix::ones(k, k)),
        ModelVariant::B => (ChiForm::Unit, base.age_mixing.clone()),
        ModelVariant::C => (ChiForm::SlopeOnly, base.age_mixing.clone()),
        ModelVariant::D => (ChiForm::Full, base.age_mixing.clone()),
    }
}

/// Hazards for one day from raw covariates.
///
/// Counts are unsigned so a negative state cannot be represented; the
/// remaining failure mode is a shape mismatch.
pub fn hazards(
    state: &StateMatrix,
    chi: &[f64],
    cov: &Covariates,
    drive: f64,
    gamma1: f64,
    weekday: f64,
    cfg: &FixedConfig,
) -> Result<Hazards> {
    let layout = StrataLayout::new(cov.deprivation.len(), cov.age_mixing.rows())?;
    cov.validate(&layout)?;
    hazards_with(
        &layout,
        state,
        chi,
        &cov.population,
        &cov.age_mixing,
        &cov.deprivation_mixing,
        drive,
        gamma1,
        weekday,
        cfg,
    )
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn hazards_with(
    layout: &StrataLayout,
    state: &StateMatrix,
    chi: &[f64],
    population: &[f64],
    age: &Matrix,
    deprivation: &Matrix,
    drive: f64,
    gamma1: f64,
    weekday: f64,
    cfg: &FixedConfig,
) -> Result<Hazards> {
    let l = layout.num_strata();
    if state.num_strata() != l || chi.len() != l || population.len() != l {
        bail!(
            InvalidArgument,
            "state, chi and population must all have {l} strata"
        );
    }
    if deprivation.shape() != (layout.num_deprivation(), layout.num_deprivation()) {
        bail!(InvalidArgument, "deprivation mixing has the wrong shape");
    }
    if deprivation.as_slice().iter().any(|v| !(*v >= 0.0)) {
        bail!(InvalidScenario, "deprivation mixing has negative entries");
    }
    let prevalence: Vec<f64> = state
        .i
        .iter()
        .zip(population)
        .map(|(x, n)| *x as f64 / n)
        .collect();
    let pressure = infectious_pressure(age, deprivation, &prevalence);
    let scale = libm::exp(drive);
    let se = chi
        .iter()
        .zip(population)
        .zip(&pressure)
        .map(|((c, n), p)| if *p == 0.0 { 0.0 } else { scale * c / n * p })
        .collect();
    let ir_rate = libm::exp(cfg.gamma0 + gamma1 * weekday);
    Ok(Hazards {
        se,
        ei: vec![cfg.nu; l],
        ir: vec![ir_rate; l],
    })
}
