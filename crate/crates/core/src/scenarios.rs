//! What-if perturbations for forward runs: susceptible depletion, a ramped
//! deprivation mixing matrix, and drifting behavioural slopes with a global
//! multiplier. Scenario day 0 is the first day after the fitted window.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::matrix::Matrix;
use crate::model::{Model, ModelParams};
use crate::simulator::StateMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixingForm {
    /// `M = U + Uᵀ - diag(U)`, i.e. `M[i, j] = u[min(i, j)]`.
    Full,
    /// `M = diag(U)`.
    Assortative,
    /// `M = U + Uᵀ - 2 diag(U)`: off-diagonal only.
    Disassortative,
}

impl core::str::FromStr for MixingForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(MixingForm::Full),
            "assortative" => Ok(MixingForm::Assortative),
            "disassortative" => Ok(MixingForm::Disassortative),
            other => bail!(InvalidSpec, "unknown mixing form {other:?}"),
        }
    }
}

/// `C_D(t) = 1 + M ϖ(t)` with `ϖ(t) = ω (t - t′)` once `t > t′`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingRampSpec {
    /// Diagonal of the upper-triangular `U`, most deprived first.
    pub u_diag: Vec<f64>,
    pub form: MixingForm,
    /// Per-day slope of the ramp.
    pub omega: f64,
    /// Days before the ramp starts.
    pub lag: f64,
}

impl MixingRampSpec {
    pub fn validate(&self) -> Result<()> {
        if self.u_diag.is_empty() {
            bail!(InvalidSpec, "U needs at least one diagonal entry");
        }
        if self.u_diag.iter().any(|u| !(*u >= 0.0 && u.is_finite())) {
            bail!(InvalidSpec, "diagonal of U must be non-negative");
        }
        // The last diagonal entry never reaches M in the disassortative form.
        let checked = match self.form {
            MixingForm::Disassortative => &self.u_diag[..self.u_diag.len() - 1],
            _ => &self.u_diag[..],
        };
        if checked.windows(2).any(|w| !(w[1] > w[0])) {
            bail!(InvalidSpec, "diagonal of U must be strictly increasing");
        }
        if !(self.omega >= 0.0 && self.omega.is_finite()) || !(self.lag >= 0.0 && self.lag.is_finite()) {
            bail!(InvalidSpec, "omega and lag must be non-negative");
        }
        Ok(())
    }

    /// Ramp factor `ϖ(t)`.
    pub fn ramp(&self, t: usize) -> f64 {
        let dt = t as f64 - self.lag;
        if dt > 0.0 {
            self.omega * dt
        } else {
            0.0
        }
    }
}

/// The symmetric mixing increment `M` for a ramp specification.
pub fn build_mixing_increment(spec: &MixingRampSpec) -> Result<Matrix> {
    spec.validate()?;
    let u = &spec.u_diag;
    let j = u.len();
    let mut m = Matrix::zeros(j, j);
    for r in 0..j {
        for c in 0..j {
            m[(r, c)] = match spec.form {
                MixingForm::Full => u[r.min(c)],
                MixingForm::Assortative if r == c => u[r],
                MixingForm::Assortative => 0.0,
                MixingForm::Disassortative if r == c => 0.0,
                MixingForm::Disassortative => u[r.min(c)],
            };
        }
    }
    Ok(m)
}

/// Deprivation mixing matrix on scenario day `t`.
pub fn mixing_at(spec: &MixingRampSpec, t: usize) -> Result<Matrix> {
    let m = build_mixing_increment(spec)?;
    let w = spec.ramp(t);
    Ok(m.map(|v| 1.0 + v * w))
}

/// Linear drift of the centred deprivation slopes plus a global multiplier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BehaviouralRampSpec {
    /// Global multiplier `ζ` on every element of `χ`.
    pub zeta: f64,
    /// Per-day drift `ε` subtracted from each `ρ̃_k`.
    pub epsilon: f64,
}

impl BehaviouralRampSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.zeta > 0.0 && self.zeta.is_finite()) {
            bail!(InvalidSpec, "zeta must be positive");
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            bail!(InvalidSpec, "epsilon must be non-negative");
        }
        Ok(())
    }
}

/// `ρ̃_k - ε t` clamped to `[-1/2, 1/2]`.
pub fn drifted_slope(rho_tilde: f64, epsilon: f64, t: usize) -> f64 {
    (rho_tilde - epsilon * t as f64).clamp(-0.5, 0.5)
}

/// Behavioural adaptation vector on scenario day `t`.
pub fn behavioural_at(
    model: &Model,
    params: &ModelParams,
    spec: &BehaviouralRampSpec,
    t: usize,
) -> Result<Vec<f64>> {
    spec.validate()?;
    params.validate(model.layout().num_age())?;
    let drifted: Vec<f64> = params
        .rho
        .iter()
        .map(|r| drifted_slope(r - 0.5, spec.epsilon, t))
        .collect();
    let chi = model
        .chi_with_slopes(&params.psi, &drifted)
        .map_err(|e| Error::InvalidScenario(alloc::format!("{e}")))?;
    Ok(chi.into_iter().map(|c| c * spec.zeta).collect())
}

/// Moves a multiple of the cumulative case count from S to R before the run.
#[derive(Debug, Clone, PartialEq)]
pub struct DepletionSpec {
    /// Cumulative observed cases per stratum.
    pub cumulative: Vec<u64>,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Depleted {
    pub state: StateMatrix,
    /// Some stratum had fewer susceptibles than the requested move.
    pub clipped: bool,
}

pub fn apply_depletion(x0: &StateMatrix, spec: &DepletionSpec) -> Result<Depleted> {
    if !(spec.factor >= 0.0 && spec.factor.is_finite()) {
        bail!(InvalidSpec, "depletion factor must be non-negative, got {}", spec.factor);
    }
    if spec.cumulative.len() != x0.num_strata() {
        bail!(
            InvalidSpec,
            "cumulative cases have {} strata, state has {}",
            spec.cumulative.len(),
            x0.num_strata()
        );
    }
    let mut state = x0.clone();
    let mut clipped = false;
    for (k, c) in spec.cumulative.iter().enumerate() {
        // round half up
        let want = libm::floor(spec.factor * *c as f64 + 0.5) as u64;
        let moved = if want > state.s[k] {
            clipped = true;
            state.s[k]
        } else {
            want
        };
        state.s[k] -= moved;
        state.r[k] += moved;
    }
    Ok(Depleted { state, clipped })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSpec {
    Depletion(DepletionSpec),
    MixingRamp(MixingRampSpec),
    Behavioural(BehaviouralRampSpec),
}

impl ScenarioSpec {
    pub fn validate(&self, model: &Model) -> Result<()> {
        let layout = model.layout();
        match self {
            ScenarioSpec::Depletion(d) => {
                if !(d.factor >= 0.0) {
                    bail!(InvalidSpec, "depletion factor must be non-negative");
                }
                if d.cumulative.len() != layout.num_strata() {
                    bail!(InvalidSpec, "depletion needs {} strata", layout.num_strata());
                }
            }
            ScenarioSpec::MixingRamp(m) => {
                m.validate()?;
                if m.u_diag.len() != layout.num_deprivation() {
                    bail!(
                        InvalidSpec,
                        "mixing ramp has {} deprivation groups, model has {}",
                        m.u_diag.len(),
                        layout.num_deprivation()
                    );
                }
            }
            ScenarioSpec::Behavioural(b) => b.validate()?,
        }
        Ok(())
    }

    /// Initial state after any adjustment the scenario makes.
    pub fn initial_state(&self, x0: &StateMatrix) -> Result<StateMatrix> {
        match self {
            ScenarioSpec::Depletion(d) => Ok(apply_depletion(x0, d)?.state),
            _ => Ok(x0.clone()),
        }
    }

    pub fn deprivation_mixing_at(&self, t: usize) -> Option<Matrix> {
        match self {
            ScenarioSpec::MixingRamp(m) => mixing_at(m, t).ok(),
            _ => None,
        }
    }

    pub fn chi_at(&self, model: &Model, params: &ModelParams, t: usize) -> Option<Result<Vec<f64>>> {
        match self {
            ScenarioSpec::Behavioural(b) => Some(behavioural_at(model, params, b, t)),
            _ => None,
        }
    }
}

/// Named scenario configurations from the deprivation-switching experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    MixingFull,
    MixingAssortative,
    MixingDisassortative,
    Behavioural,
    Depletion5x,
}

pub const PRESET_OMEGA: f64 = 0.00085;
pub const PRESET_LAG: f64 = 10.0;

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::MixingFull,
        Preset::MixingAssortative,
        Preset::MixingDisassortative,
        Preset::Behavioural,
        Preset::Depletion5x,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::MixingFull => "paper-mixing-full",
            Preset::MixingAssortative => "paper-mixing-assortative",
            Preset::MixingDisassortative => "paper-mixing-disassortative",
            Preset::Behavioural => "paper-behavioural",
            Preset::Depletion5x => "paper-depletion-5x",
        }
    }

    /// The concrete scenario. Depletion needs the cumulative cases per
    /// stratum; the mixing presets are defined for ten deciles.
    pub fn resolve(self, cumulative: Option<&[u64]>) -> Result<ScenarioSpec> {
        let ramp = |u: [f64; 10], form| {
            ScenarioSpec::MixingRamp(MixingRampSpec {
                u_diag: u.to_vec(),
                form,
                omega: PRESET_OMEGA,
                lag: PRESET_LAG,
            })
        };
        Ok(match self {
            Preset::MixingFull => ramp(
                [6.0, 8.0, 11.0, 16.0, 23.0, 35.0, 41.0, 55.0, 75.0, 141.0],
                MixingForm::Full,
            ),
            Preset::MixingAssortative => ramp(
                [65.0, 85.0, 115.0, 150.0, 190.0, 250.0, 270.0, 300.0, 330.0, 370.0],
                MixingForm::Assortative,
            ),
            Preset::MixingDisassortative => ramp(
                [6.0, 8.0, 11.0, 17.0, 26.0, 40.0, 53.0, 73.0, 169.0, 0.0],
                MixingForm::Disassortative,
            ),
            Preset::Behavioural => ScenarioSpec::Behavioural(BehaviouralRampSpec {
                zeta: 1.265,
                epsilon: 0.017,
            }),
            Preset::Depletion5x => match cumulative {
                Some(c) => ScenarioSpec::Depletion(DepletionSpec {
                    cumulative: c.to_vec(),
                    factor: 5.0,
                }),
                None => bail!(InvalidSpec, "depletion preset needs cumulative case counts"),
            },
        })
    }
}

impl core::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidSpec(alloc::format!("unknown scenario preset {s:?}")))
    }
}

/// Trailing moving average along the day axis; column `c` of the result
/// averages input days `c ..= c + window - 1`.
pub fn moving_average(series: &Matrix, window: usize) -> Result<Matrix> {
    let (rows, days) = series.shape();
    if window == 0 || window > days {
        bail!(InvalidArgument, "window {window} does not fit a series of {days} days");
    }
    let out_days = days - window + 1;
    let mut out = Matrix::zeros(rows, out_days);
    for r in 0..rows {
        let row = series.row(r);
        for c in 0..out_days {
            out[(r, c)] = row[c..c + window].iter().sum::<f64>() / window as f64;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingReport {
    pub smoothed: Matrix,
    /// Input day index of each smoothed column (the last day of its window).
    pub days: Vec<usize>,
    /// Groups sorted by smoothed incidence, highest first, per traced day.
    pub orders: Vec<Vec<usize>>,
    /// First input day at which the order is the strict reverse of the
    /// first traced order.
    pub reversal_day: Option<usize>,
}

fn descending_order(col: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..col.len()).collect();
    idx.sort_by(|&a, &b| col[b].partial_cmp(&col[a]).unwrap_or(core::cmp::Ordering::Equal));
    idx
}

fn strictly_descending(col: &[f64], order: &[usize]) -> bool {
    order.windows(2).all(|w| col[w[0]] > col[w[1]])
}

/// Tracks the rank order of groups (rows of `series`, one per deprivation
/// decile) through time and reports the first complete reversal.
pub fn detect_switching(series: &Matrix, window: usize) -> Result<SwitchingReport> {
    let smoothed = moving_average(series, window)?;
    let cols = smoothed.cols();
    let mut days = Vec::with_capacity(cols);
    let mut orders = Vec::with_capacity(cols);
    let mut reversal_day = None;
    let column = |c: usize| smoothed.column(c);
    let first = column(0);
    let base = descending_order(&first);
    let base_strict = series.rows() > 1 && strictly_descending(&first, &base);
    let reversed: Vec<usize> = base.iter().rev().copied().collect();
    for c in 0..cols {
        let col = column(c);
        let day = c + window - 1;
        if reversal_day.is_none() && base_strict && strictly_descending(&col, &reversed) {
            reversal_day = Some(day);
        }
        days.push(day);
        orders.push(descending_order(&col));
    }
    Ok(SwitchingReport {
        smoothed,
        days,
        orders,
        reversal_day,
    })
}

/// Renders an order as `"3>1>2"` with one-based group labels.
pub fn format_order(order: &[usize]) -> String {
    let mut s = String::new();
    for (n, g) in order.iter().enumerate() {
        if n > 0 {
            s.push('>');
        }
        s.push_str(&alloc::format!("{}", g + 1));
    }
    s
}
