//! Chain-binomial forward simulation.
//!
//! Each day, every transition count is a binomial draw on the source
//! compartment with probability `1 - exp(-h δt)`, after which the four state
//! recursions are applied. Per-stratum totals are conserved exactly.

use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Binomial, Distribution};

use crate::error::{bail, Result};
use crate::matrix::Matrix;
use crate::model::{transition_prob, Hazards, Model, ModelParams};
use crate::rng::{StreamSeed, Transition};
use crate::scenarios::ScenarioSpec;

/// Compartment counts per stratum at one time point.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateMatrix {
    pub s: Vec<u64>,
    pub e: Vec<u64>,
    pub i: Vec<u64>,
    pub r: Vec<u64>,
}

impl StateMatrix {
    pub fn zeros(num_strata: usize) -> Self {
        StateMatrix {
            s: vec![0; num_strata],
            e: vec![0; num_strata],
            i: vec![0; num_strata],
            r: vec![0; num_strata],
        }
    }

    /// Everyone susceptible except the given exposed and infectious seeds.
    pub fn seeded(population: &[u64], exposed: &[u64], infectious: &[u64]) -> Result<Self> {
        let l = population.len();
        if exposed.len() != l || infectious.len() != l {
            bail!(InvalidArgument, "seed vectors must have {l} strata");
        }
        let mut s = Vec::with_capacity(l);
        for ((n, e), i) in population.iter().zip(exposed).zip(infectious) {
            match n.checked_sub(e + i) {
                Some(v) => s.push(v),
                None => bail!(InvalidState, "seeds exceed the stratum population {n}"),
            }
        }
        Ok(StateMatrix {
            s,
            e: exposed.to_vec(),
            i: infectious.to_vec(),
            r: vec![0; l],
        })
    }

    pub fn num_strata(&self) -> usize {
        self.s.len()
    }

    pub fn is_consistent(&self) -> bool {
        let l = self.s.len();
        self.e.len() == l && self.i.len() == l && self.r.len() == l
    }

    /// `S + E + I + R` per stratum.
    pub fn totals(&self) -> Vec<u64> {
        (0..self.num_strata())
            .map(|k| self.s[k] + self.e[k] + self.i[k] + self.r[k])
            .collect()
    }
}

/// Transition counts for one day.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepEvents {
    pub se: Vec<u64>,
    pub ei: Vec<u64>,
    pub ir: Vec<u64>,
}

/// Per-stratum, per-day transition counts (`L x T`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventSeries {
    pub se: Matrix<u64>,
    pub ei: Matrix<u64>,
    /// Removals: the observed case channel.
    pub ir: Matrix<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    /// `T + 1` snapshots, the first being the (possibly adjusted) initial state.
    pub states: Vec<StateMatrix>,
    pub events: EventSeries,
}

impl Trajectory {
    pub fn terminal(&self) -> &StateMatrix {
        self.states.last().expect("trajectory has at least one state")
    }
}

fn draw(n: u64, p: f64, rng: &mut impl rand::Rng) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("p in (0, 1)").sample(rng)
}

/// Advances one day. Draws for `(day, stratum, transition)` come from the
/// stream of that address.
pub fn step(
    state: &StateMatrix,
    hazards: &Hazards,
    dt: f64,
    seed: &StreamSeed,
    day: usize,
) -> Result<(StateMatrix, StepEvents)> {
    let l = state.num_strata();
    if !state.is_consistent() || hazards.se.len() != l || hazards.ei.len() != l || hazards.ir.len() != l {
        bail!(InvalidArgument, "state and hazards must share {l} strata");
    }
    let mut next = state.clone();
    let mut events = StepEvents {
        se: vec![0; l],
        ei: vec![0; l],
        ir: vec![0; l],
    };
    for k in 0..l {
        let p_se = transition_prob(hazards.se[k], dt)?;
        let p_ei = transition_prob(hazards.ei[k], dt)?;
        let p_ir = transition_prob(hazards.ir[k], dt)?;
        let y_se = draw(state.s[k], p_se, &mut seed.stream(day, k, Transition::SusceptibleExposed));
        let y_ei = draw(state.e[k], p_ei, &mut seed.stream(day, k, Transition::ExposedInfectious));
        let y_ir = draw(state.i[k], p_ir, &mut seed.stream(day, k, Transition::InfectiousRemoved));
        next.s[k] -= y_se;
        next.e[k] = next.e[k] + y_se - y_ei;
        next.i[k] = next.i[k] + y_ei - y_ir;
        next.r[k] += y_ir;
        events.se[k] = y_se;
        events.ei[k] = y_ei;
        events.ir[k] = y_ir;
    }
    Ok((next, events))
}

/// Runs `horizon` days from `initial`. Day `t` uses the drive `a(t)` of
/// `params` (held at its last value past the fitted increments) and the
/// day-of-week covariate `model.covariates().weekday[t]`.
pub fn simulate(
    initial: &StateMatrix,
    params: &ModelParams,
    model: &Model,
    horizon: usize,
    scenario: Option<&ScenarioSpec>,
    seed: &StreamSeed,
) -> Result<Trajectory> {
    let l = model.layout().num_strata();
    if horizon == 0 {
        bail!(InvalidArgument, "simulation horizon must be at least one day");
    }
    if initial.num_strata() != l || !initial.is_consistent() {
        bail!(InvalidArgument, "initial state must have {l} strata");
    }
    params.validate(model.layout().num_age())?;
    if let Some(sc) = scenario {
        sc.validate(model)?;
    }
    let x0 = match scenario {
        Some(sc) => sc.initial_state(initial)?,
        None => initial.clone(),
    };
    let base_chi = model.chi(params)?;
    let mut states = Vec::with_capacity(horizon + 1);
    let mut se = Matrix::filled(l, horizon, 0u64);
    let mut ei = Matrix::filled(l, horizon, 0u64);
    let mut ir = Matrix::filled(l, horizon, 0u64);
    let mut x = x0;
    for t in 0..horizon {
        let chi_t = match scenario.and_then(|sc| sc.chi_at(model, params, t)) {
            Some(chi) => chi?,
            None => base_chi.clone(),
        };
        let mixing = scenario.and_then(|sc| sc.deprivation_mixing_at(t));
        let h = model.hazards(
            &x,
            &chi_t,
            params.drive_at(t),
            params.gamma1,
            model.weekday(t)?,
            mixing.as_ref(),
        )?;
        let (next, ev) = step(&x, &h, model.config().dt, seed, t)?;
        for k in 0..l {
            se[(k, t)] = ev.se[k];
            ei[(k, t)] = ev.ei[k];
            ir[(k, t)] = ev.ir[k];
        }
        states.push(core::mem::replace(&mut x, next));
    }
    states.push(x);
    Ok(Trajectory {
        states,
        events: EventSeries { se, ei, ir },
    })
}

/// One posterior draw to project forward: parameters plus the state at the
/// end of the fitted window.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastDraw {
    pub params: ModelParams,
    pub state: StateMatrix,
}

/// Removal counts (cases) per member, stratum and forecast day.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: usize,
    strata: usize,
    horizon: usize,
    data: Vec<u64>,
}

impl Ensemble {
    pub fn from_members(members: Vec<Matrix<u64>>) -> Result<Self> {
        let Some(first) = members.first() else {
            bail!(InvalidArgument, "ensemble needs at least one member");
        };
        let (strata, horizon) = first.shape();
        if members.iter().any(|m| m.shape() != (strata, horizon)) {
            bail!(InvalidArgument, "ensemble members differ in shape");
        }
        let n = members.len();
        let data = members.into_iter().flat_map(Matrix::into_vec).collect();
        Ok(Ensemble {
            members: n,
            strata,
            horizon,
            data,
        })
    }

    pub fn members(&self) -> usize {
        self.members
    }

    pub fn strata(&self) -> usize {
        self.strata
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    #[inline]
    pub fn get(&self, member: usize, stratum: usize, day: usize) -> u64 {
        self.data[(member * self.strata + stratum) * self.horizon + day]
    }

    pub fn member(&self, member: usize) -> Matrix<u64> {
        let len = self.strata * self.horizon;
        Matrix::from_vec(
            self.strata,
            self.horizon,
            self.data[member * len..(member + 1) * len].to_vec(),
        )
        .expect("consistent shape")
    }

    /// All members' values for one cell.
    pub fn cell(&self, stratum: usize, day: usize) -> Vec<f64> {
        (0..self.members)
            .map(|m| self.get(m, stratum, day) as f64)
            .collect()
    }

    pub fn mean(&self) -> Matrix {
        let mut out = Matrix::zeros(self.strata, self.horizon);
        for m in 0..self.members {
            for i in 0..self.strata {
                for t in 0..self.horizon {
                    out[(i, t)] += self.get(m, i, t) as f64;
                }
            }
        }
        out.map(|v| v / self.members as f64)
    }
}

/// Removal counts for one ensemble member. The member index selects the
/// random stream, so members can be evaluated in any order.
pub fn forecast_member(
    draw: &ForecastDraw,
    member: usize,
    horizon: usize,
    model: &Model,
    scenario: Option<&ScenarioSpec>,
    seed: u64,
) -> Result<Matrix<u64>> {
    let stream = StreamSeed::new(seed, member as u64);
    let traj = simulate(&draw.state, &draw.params.terminal(), model, horizon, scenario, &stream)?;
    Ok(traj.events.ir)
}

/// One trajectory per draw, in draw order. `model` must carry day-of-week
/// covariates for the forecast days.
pub fn forecast_ensemble(
    draws: &[ForecastDraw],
    horizon: usize,
    model: &Model,
    scenario: Option<&ScenarioSpec>,
    seed: u64,
) -> Result<Ensemble> {
    if draws.is_empty() {
        bail!(InvalidArgument, "forecast needs at least one posterior draw");
    }
    let members = draws
        .iter()
        .enumerate()
        .map(|(m, d)| forecast_member(d, m, horizon, model, scenario, seed))
        .collect::<Result<Vec<_>>>()?;
    Ensemble::from_members(members)
}
