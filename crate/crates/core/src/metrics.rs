//! Reproduction numbers, CRPS scoring and aggregation.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::matrix::Matrix;
use crate::model::{FixedConfig, Model, StrataLayout};
use crate::simulator::{Ensemble, ForecastDraw};

/// Denominator of the reproduction number approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RtDenominator {
    /// Daily removal probability `1 - exp(-exp(γ0) δt)`.
    #[default]
    RemovalProbability,
    /// `1 - exp(-γ0 δt)` taken literally; negative whenever `γ0 < 0`.
    Literal,
}

/// Expected number of further infections caused by one infectious
/// individual in each stratum, given the susceptible counts.
pub fn reproduction_number(
    susceptible: &[u64],
    drive: f64,
    chi: &[f64],
    kron: &Matrix,
    population: &[f64],
    cfg: &FixedConfig,
    denominator: RtDenominator,
) -> Result<Vec<f64>> {
    let l = susceptible.len();
    if chi.len() != l || population.len() != l || kron.shape() != (l, l) {
        bail!(InvalidArgument, "reproduction number inputs must share {l} strata");
    }
    if population.iter().any(|n| !(*n > 0.0)) {
        bail!(InvalidArgument, "stratum population must be positive");
    }
    let denom = match denominator {
        RtDenominator::RemovalProbability => -libm::expm1(-libm::exp(cfg.gamma0) * cfg.dt),
        RtDenominator::Literal => -libm::expm1(-cfg.gamma0 * cfg.dt),
    };
    let scale = libm::exp(drive) * cfg.dt;
    // weight_i = x_S,i χ_i / n_i
    let weight: Vec<f64> = (0..l)
        .map(|i| susceptible[i] as f64 * chi[i] / population[i])
        .collect();
    Ok((0..l)
        .map(|j| {
            let s: f64 = (0..l).map(|i| weight[i] * kron[(i, j)]).sum::<f64>() / population[j];
            -libm::expm1(-scale * s) / denom
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RtEstimate {
    /// One row per posterior draw, one column per stratum.
    pub values: Matrix,
    pub mean: Vec<f64>,
    /// Fraction of draws with `r > 1`.
    pub exceedance: Vec<f64>,
}

/// Reproduction numbers at the end of the fitted window for each draw.
pub fn rt_estimate(model: &Model, draws: &[ForecastDraw], denominator: RtDenominator) -> Result<RtEstimate> {
    if draws.is_empty() {
        bail!(InvalidArgument, "need at least one posterior draw");
    }
    let l = model.layout().num_strata();
    let kron = model.kron();
    let mut values = Matrix::zeros(draws.len(), l);
    for (d, draw) in draws.iter().enumerate() {
        let chi = model.chi(&draw.params)?;
        let drive = draw.params.drive_at(draw.params.alpha_inc.len());
        let r = reproduction_number(
            &draw.state.s,
            drive,
            &chi,
            &kron,
            model.population(),
            model.config(),
            denominator,
        )?;
        values.row_mut(d).copy_from_slice(&r);
    }
    let n = draws.len() as f64;
    let mean = (0..l).map(|j| values.column(j).iter().sum::<f64>() / n).collect();
    let exceedance = (0..l)
        .map(|j| values.column(j).iter().filter(|r| **r > 1.0).count() as f64 / n)
        .collect();
    Ok(RtEstimate {
        values,
        mean,
        exceedance,
    })
}

/// Empirical CRPS in energy form: `E|X - y| - ½ E|X - X′|` over all ordered
/// pairs of samples.
pub fn crps_empirical(samples: &[f64], observation: f64) -> Result<f64> {
    if samples.is_empty() {
        bail!(InvalidArgument, "CRPS needs at least one sample");
    }
    let m = samples.len() as f64;
    let abs_err = samples.iter().map(|x| (x - observation).abs()).sum::<f64>() / m;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    // Σ_{i,j} |x_i - x_j| = 2 Σ_k (2k - m - 1) x_(k), k one-based.
    let pair_sum: f64 = sorted
        .iter()
        .enumerate()
        .map(|(k, x)| (2.0 * (k as f64 + 1.0) - m - 1.0) * x)
        .sum::<f64>()
        * 2.0;
    let spread = pair_sum / (m * m);
    Ok((abs_err - 0.5 * spread).max(0.0))
}

/// Linear-interpolation quantile of sorted data (`q` in `[0, 1]`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = libm::ceil(pos) as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        bail!(InvalidArgument, "quantile of an empty set");
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&v, q))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrpsTable {
    /// Score per stratum (rows) and day (columns).
    pub scores: Matrix,
    /// `(Q1, Q2, Q3)` over all cells.
    pub quartiles: (f64, f64, f64),
}

pub fn crps_table(ensemble: &Ensemble, observed: &Matrix<u64>) -> Result<CrpsTable> {
    if observed.shape() != (ensemble.strata(), ensemble.horizon()) {
        bail!(
            InvalidArgument,
            "observations are {:?} but the ensemble is {}x{}",
            observed.shape(),
            ensemble.strata(),
            ensemble.horizon()
        );
    }
    let (l, t) = observed.shape();
    let mut scores = Matrix::zeros(l, t);
    for i in 0..l {
        for d in 0..t {
            scores[(i, d)] = crps_empirical(&ensemble.cell(i, d), observed[(i, d)] as f64)?;
        }
    }
    let mut all = scores.as_slice().to_vec();
    all.sort_by(f64::total_cmp);
    let quartiles = (
        quantile_sorted(&all, 0.25),
        quantile_sorted(&all, 0.5),
        quantile_sorted(&all, 0.75),
    );
    Ok(CrpsTable { scores, quartiles })
}

/// Which axis survives an aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupBy {
    /// One row per age group (deprivation summed out).
    Age,
    /// One row per deprivation decile (age summed out).
    Imd,
    /// No reduction: one row per stratum.
    Stratum,
    /// A single grand-total row.
    Total,
}

impl core::str::FromStr for GroupBy {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "age" => Ok(GroupBy::Age),
            "imd" => Ok(GroupBy::Imd),
            "none" | "stratum" => Ok(GroupBy::Stratum),
            "total" => Ok(GroupBy::Total),
            other => bail!(InvalidArgument, "unknown aggregation axis {other:?}"),
        }
    }
}

impl GroupBy {
    pub fn num_groups(self, layout: &StrataLayout) -> usize {
        match self {
            GroupBy::Age => layout.num_age(),
            GroupBy::Imd => layout.num_deprivation(),
            GroupBy::Stratum => layout.num_strata(),
            GroupBy::Total => 1,
        }
    }

    pub fn group_of(self, layout: &StrataLayout, stratum: usize) -> usize {
        let (k, j) = layout.coords(stratum);
        match self {
            GroupBy::Age => k,
            GroupBy::Imd => j,
            GroupBy::Stratum => stratum,
            GroupBy::Total => 0,
        }
    }
}

/// Sums strata rows into groups. With `per_100k`, each group is divided by
/// its population and multiplied by 10⁵.
pub fn aggregate(
    data: &Matrix,
    layout: &StrataLayout,
    by: GroupBy,
    per_100k: Option<&[f64]>,
) -> Result<Matrix> {
    let l = layout.num_strata();
    if data.rows() != l {
        bail!(InvalidArgument, "data has {} rows, layout has {l} strata", data.rows());
    }
    let groups = by.num_groups(layout);
    let mut out = Matrix::zeros(groups, data.cols());
    let mut group_pop = vec![0.0; groups];
    for i in 0..l {
        let g = by.group_of(layout, i);
        for (o, v) in out.row_mut(g).iter_mut().zip(data.row(i)) {
            *o += v;
        }
        if let Some(n) = per_100k {
            group_pop[g] += n[i];
        }
    }
    if let Some(n) = per_100k {
        if n.len() != l {
            bail!(InvalidArgument, "population has {} strata, expected {l}", n.len());
        }
        for (g, pop) in group_pop.iter().enumerate() {
            if !(*pop > 0.0) {
                bail!(InvalidArgument, "group {g} has no population");
            }
            for v in out.row_mut(g) {
                *v *= 1e5 / pop;
            }
        }
    }
    Ok(out)
}

/// Per-cell mean and central interval of an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub mean: Matrix,
    pub lower: Matrix,
    pub upper: Matrix,
}

/// Summary of arbitrary per-member matrices (e.g. aggregated ensembles).
pub fn summarise(members: &[Matrix], lower_q: f64, upper_q: f64) -> Result<EnsembleSummary> {
    let Some(first) = members.first() else {
        bail!(InvalidArgument, "nothing to summarise");
    };
    let (r, c) = first.shape();
    if members.iter().any(|m| m.shape() != (r, c)) {
        bail!(InvalidArgument, "members differ in shape");
    }
    let mut mean = Matrix::zeros(r, c);
    let mut lower = Matrix::zeros(r, c);
    let mut upper = Matrix::zeros(r, c);
    let mut buf = Vec::with_capacity(members.len());
    for i in 0..r {
        for t in 0..c {
            buf.clear();
            buf.extend(members.iter().map(|m| m[(i, t)]));
            buf.sort_by(f64::total_cmp);
            mean[(i, t)] = buf.iter().sum::<f64>() / buf.len() as f64;
            lower[(i, t)] = quantile_sorted(&buf, lower_q);
            upper[(i, t)] = quantile_sorted(&buf, upper_q);
        }
    }
    Ok(EnsembleSummary { mean, lower, upper })
}
