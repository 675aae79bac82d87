//! CSV and JSON readers and writers for every input and output table.
//!
//! Strata follow the library layout: stratum `k * J + j` is age group `k`
//! (labelled by the configured age bands) and deprivation decile `j + 1`.
//! Floating-point values are written in shortest round-trip form, so
//! reading a written file gives back the same numbers.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use chrono::{Days, NaiveDate};
use serde::Serialize;
use stratseir::inference::PosteriorSample;
use stratseir::metrics::{EnsembleSummary, RtEstimate};
use stratseir::model::weekday_covariate;
use stratseir::scenarios::{format_order, SwitchingReport};
use stratseir::{Matrix, ModelParams, StateMatrix, StrataLayout, Trajectory};

use crate::error::{CliError, CliResult};

/// Observed daily cases per stratum over a contiguous date range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseDataset {
    pub start: NaiveDate,
    /// Strata (rows) by days (columns).
    pub counts: Matrix<u64>,
}

impl CaseDataset {
    pub fn num_days(&self) -> usize {
        self.counts.cols()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        dates_from(self.start, self.num_days())
    }

    /// Last observed day.
    pub fn end(&self) -> NaiveDate {
        self.start + Days::new(self.num_days() as u64 - 1)
    }

    pub fn weekday(&self) -> Vec<f64> {
        weekday_covariate(&self.dates())
    }

    /// Total cases per stratum.
    pub fn cumulative(&self) -> Vec<u64> {
        (0..self.counts.rows())
            .map(|i| self.counts.row(i).iter().sum())
            .collect()
    }

    /// The `len` days starting at day `from`.
    pub fn window(&self, from: usize, len: usize) -> CliResult<CaseDataset> {
        if len == 0 || from + len > self.num_days() {
            return Err(CliError::Config(format!(
                "window of {len} days from day {from} does not fit {} observed days",
                self.num_days()
            )));
        }
        let l = self.counts.rows();
        let mut counts = Matrix::filled(l, len, 0u64);
        for i in 0..l {
            counts.row_mut(i).copy_from_slice(&self.counts.row(i)[from..from + len]);
        }
        Ok(CaseDataset {
            start: self.start + Days::new(from as u64),
            counts,
        })
    }
}

pub fn dates_from(start: NaiveDate, len: usize) -> Vec<NaiveDate> {
    (0..len as u64).map(|d| start + Days::new(d)).collect()
}

/// Maps CSV labels to stratum indices.
struct StrataLabels<'a> {
    layout: &'a StrataLayout,
    ages: &'a [String],
}

impl StrataLabels<'_> {
    fn age(&self, label: &str) -> Result<usize, String> {
        self.ages
            .iter()
            .position(|a| a == label)
            .ok_or_else(|| format!("unknown age group {label:?}"))
    }

    fn decile(&self, text: &str) -> Result<usize, String> {
        let j = self.layout.num_deprivation();
        match text.parse::<i64>() {
            Ok(d) if d >= 1 && d <= j as i64 => Ok(d as usize - 1),
            Ok(d) => Err(format!("imd decile {d} outside 1..={j}")),
            Err(_) => Err(format!("imd decile {text:?} is not an integer")),
        }
    }

    fn stratum(&self, age: &str, decile: &str) -> Result<usize, String> {
        Ok(self.layout.index(self.age(age)?, self.decile(decile)?))
    }

    fn label(&self, stratum: usize) -> (&str, usize) {
        let (k, j) = self.layout.coords(stratum);
        (&self.ages[k], j + 1)
    }
}

fn reader(path: &Path) -> CliResult<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn writer(path: &Path) -> CliResult<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::input(path, e.to_string()))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::input(path, format!("{other:?}")),
    }
}

fn check_header(path: &Path, rdr: &mut csv::Reader<File>, expected: &[&str]) -> CliResult<()> {
    let header = rdr.headers().map_err(|e| csv_err(path, e))?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(CliError::input(
            path,
            format!("header must be {}, got {}", expected.join(","), header.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    Ok(())
}

/// Records paired with their one-based line numbers.
fn records(path: &Path, rdr: &mut csv::Reader<File>) -> CliResult<Vec<(u64, csv::StringRecord)>> {
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        out.push((line, rec));
    }
    Ok(out)
}

fn row_err(path: &Path, line: u64, msg: impl std::fmt::Display) -> CliError {
    CliError::input(path, format!("row {line}: {msg}"))
}

fn parse_count(path: &Path, line: u64, name: &str, text: &str) -> CliResult<u64> {
    match text.parse::<i64>() {
        Ok(v) if v >= 0 => Ok(v as u64),
        Ok(v) => Err(row_err(path, line, format!("{name} {v} is negative"))),
        Err(_) => Err(row_err(path, line, format!("{name} {text:?} is not an integer"))),
    }
}

fn parse_f64(path: &Path, line: u64, name: &str, text: &str) -> CliResult<f64> {
    text.parse::<f64>()
        .map_err(|_| row_err(path, line, format!("{name} {text:?} is not a number")))
}

fn parse_date(path: &Path, line: u64, text: &str) -> CliResult<NaiveDate> {
    NaiveDate::parse_from_str(text, "%Y-%m-%d")
        .map_err(|_| row_err(path, line, format!("date {text:?} is not YYYY-MM-DD")))
}

const CASES_HEADER: [&str; 4] = ["date", "age_group", "imd_decile", "count"];

/// Reads `date,age_group,imd_decile,count`. Strata with no row on some day
/// get a zero count; a day with no rows at all is a gap and is rejected.
pub fn load_cases(path: &Path, layout: &StrataLayout, age_labels: &[String]) -> CliResult<CaseDataset> {
    let labels = StrataLabels { layout, ages: age_labels };
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &CASES_HEADER)?;
    let rows = records(path, &mut rdr)?;
    if rows.is_empty() {
        return Err(CliError::input(path, "no case rows after the header"));
    }
    let mut parsed = Vec::with_capacity(rows.len());
    for (line, rec) in &rows {
        let date = parse_date(path, *line, &rec[0])?;
        let stratum = labels.stratum(&rec[1], &rec[2]).map_err(|m| row_err(path, *line, m))?;
        let count = parse_count(path, *line, "count", &rec[3])?;
        parsed.push((*line, date, stratum, count));
    }
    let start = parsed.iter().map(|r| r.1).min().expect("non-empty");
    let end = parsed.iter().map(|r| r.1).max().expect("non-empty");
    let days = (end - start).num_days() as usize + 1;
    let seen: BTreeSet<NaiveDate> = parsed.iter().map(|r| r.1).collect();
    if seen.len() != days {
        let gap = dates_from(start, days)
            .into_iter()
            .find(|d| !seen.contains(d))
            .expect("a missing date");
        let after = parsed
            .iter()
            .filter(|r| r.1 > gap)
            .map(|r| r.0)
            .min()
            .unwrap_or(0);
        return Err(row_err(path, after, format!("dates are not contiguous: no rows for {gap}")));
    }
    let l = layout.num_strata();
    let mut counts = Matrix::filled(l, days, 0u64);
    let mut filled = Matrix::filled(l, days, 0u64);
    for (line, date, stratum, count) in parsed {
        let t = (date - start).num_days() as usize;
        if filled[(stratum, t)] != 0 {
            let (age, decile) = labels.label(stratum);
            return Err(row_err(
                path,
                line,
                format!("duplicate row for {date}, age {age}, decile {decile}"),
            ));
        }
        filled[(stratum, t)] = line;
        counts[(stratum, t)] = count;
    }
    let missing = filled.as_slice().iter().filter(|v| **v == 0).count();
    if missing > 0 {
        log::info!("{}: {missing} missing (stratum, day) cells set to zero", path.display());
    }
    Ok(CaseDataset { start, counts })
}

/// Writes every cell, ordered by date, age group and decile.
pub fn write_cases(path: &Path, data: &CaseDataset, layout: &StrataLayout, age_labels: &[String]) -> CliResult<()> {
    let labels = StrataLabels { layout, ages: age_labels };
    let mut w = writer(path)?;
    let io = |e| csv_err(path, e);
    w.write_record(CASES_HEADER).map_err(io)?;
    for (t, date) in data.dates().into_iter().enumerate() {
        for i in 0..layout.num_strata() {
            let (age, decile) = labels.label(i);
            w.write_record([
                date.to_string(),
                age.to_string(),
                decile.to_string(),
                data.counts[(i, t)].to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads rows keyed by `age_group,imd_decile` into stratum order; every
/// stratum must appear exactly once.
fn load_by_stratum<T>(
    path: &Path,
    layout: &StrataLayout,
    age_labels: &[String],
    header: &[&str],
    mut parse: impl FnMut(u64, &csv::StringRecord) -> CliResult<T>,
) -> CliResult<Vec<T>> {
    let labels = StrataLabels { layout, ages: age_labels };
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, header)?;
    let rows = records(path, &mut rdr)?;
    if rows.is_empty() {
        return Err(CliError::input(path, "no rows after the header"));
    }
    let mut out: Vec<Option<T>> = (0..layout.num_strata()).map(|_| None).collect();
    for (line, rec) in &rows {
        let i = labels.stratum(&rec[0], &rec[1]).map_err(|m| row_err(path, *line, m))?;
        if out[i].is_some() {
            return Err(row_err(path, *line, "duplicate stratum"));
        }
        out[i] = Some(parse(*line, rec)?);
    }
    out.into_iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or_else(|| {
                let (age, decile) = labels.label(i);
                CliError::input(path, format!("no row for age {age}, decile {decile}"))
            })
        })
        .collect()
}

const POPULATION_HEADER: [&str; 3] = ["age_group", "imd_decile", "population"];

/// Reads `age_group,imd_decile,population`; every population must be positive.
pub fn load_population(path: &Path, layout: &StrataLayout, age_labels: &[String]) -> CliResult<Vec<u64>> {
    load_by_stratum(path, layout, age_labels, &POPULATION_HEADER, |line, rec| {
        let n = parse_count(path, line, "population", &rec[2])?;
        if n == 0 {
            return Err(row_err(path, line, "population must be positive"));
        }
        Ok(n)
    })
}

pub fn write_population(path: &Path, population: &[u64], layout: &StrataLayout, age_labels: &[String]) -> CliResult<()> {
    let labels = StrataLabels { layout, ages: age_labels };
    let mut w = writer(path)?;
    let io = |e| csv_err(path, e);
    w.write_record(POPULATION_HEADER).map_err(io)?;
    for (i, n) in population.iter().enumerate() {
        let (age, decile) = labels.label(i);
        w.write_record([age.to_string(), decile.to_string(), n.to_string()])
            .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads a `K x K` age contact matrix with a header row of age labels and
/// the row label in the first column. Rows and columns may appear in any
/// order; the result follows the configured label order.
pub fn load_contact_matrix(path: &Path, age_labels: &[String]) -> CliResult<Matrix> {
    let k = age_labels.len();
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.len() != k + 1 {
        return Err(CliError::input(
            path,
            format!("contact matrix has {} columns, expected {k} age groups", header.len().saturating_sub(1)),
        ));
    }
    let position = |label: &str| {
        age_labels
            .iter()
            .position(|a| a == label)
            .ok_or_else(|| CliError::input(path, format!("unknown age group {label:?}")))
    };
    let cols = header.iter().skip(1).map(position).collect::<CliResult<Vec<_>>>()?;
    if cols.iter().collect::<BTreeSet<_>>().len() != k {
        return Err(CliError::input(path, "repeated age group in the header"));
    }
    let rows = records(path, &mut rdr)?;
    if rows.len() != k {
        return Err(CliError::input(path, format!("contact matrix has {} rows, expected {k}", rows.len())));
    }
    let mut m = Matrix::zeros(k, k);
    let mut seen = vec![false; k];
    for (line, rec) in &rows {
        let r = position(&rec[0]).map_err(|_| row_err(path, *line, format!("unknown age group {:?}", &rec[0])))?;
        if std::mem::replace(&mut seen[r], true) {
            return Err(row_err(path, *line, "repeated age group"));
        }
        for (c, text) in cols.iter().zip(rec.iter().skip(1)) {
            let v = parse_f64(path, *line, "contact rate", text)?;
            if !(v >= 0.0 && v.is_finite()) {
                return Err(row_err(path, *line, format!("contact rate {v} must be finite and non-negative")));
            }
            m[(r, *c)] = v;
        }
    }
    Ok(m)
}

pub fn write_contact_matrix(path: &Path, m: &Matrix, age_labels: &[String]) -> CliResult<()> {
    let mut w = writer(path)?;
    let io = |e| csv_err(path, e);
    let mut header = vec!["age_group".to_string()];
    header.extend(age_labels.iter().cloned());
    w.write_record(&header).map_err(io)?;
    for (r, label) in age_labels.iter().enumerate() {
        let mut row = vec![label.clone()];
        row.extend(m.row(r).iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

const STATE_HEADER: [&str; 6] = ["age_group", "imd_decile", "s", "e", "i", "r"];

/// Reads `age_group,imd_decile,s,e,i,r`.
pub fn load_initial_state(path: &Path, layout: &StrataLayout, age_labels: &[String]) -> CliResult<StateMatrix> {
    let rows = load_by_stratum(path, layout, age_labels, &STATE_HEADER, |line, rec| {
        let mut v = [0u64; 4];
        for (c, name) in ["s", "e", "i", "r"].into_iter().enumerate() {
            v[c] = parse_count(path, line, name, &rec[c + 2])?;
        }
        Ok(v)
    })?;
    let mut x = StateMatrix::zeros(layout.num_strata());
    for (i, [s, e, inf, r]) in rows.into_iter().enumerate() {
        x.s[i] = s;
        x.e[i] = e;
        x.i[i] = inf;
        x.r[i] = r;
    }
    Ok(x)
}

pub fn write_initial_state(path: &Path, x: &StateMatrix, layout: &StrataLayout, age_labels: &[String]) -> CliResult<()> {
    let labels = StrataLabels { layout, ages: age_labels };
    let mut w = writer(path)?;
    let io = |e| csv_err(path, e);
    w.write_record(STATE_HEADER).map_err(io)?;
    for i in 0..x.num_strata() {
        let (age, decile) = labels.label(i);
        w.write_record([
            age.to_string(),
            decile.to_string(),
            x.s[i].to_string(),
            x.e[i].to_string(),
            x.i[i].to_string(),
            x.r[i].to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// One row per stored sample: chain, iteration, log likelihood and
/// posterior, then `psi_1..K`, `rho_1..K`, `gamma1`, `alpha0` and the drive
/// increments `alpha_inc_0..T-1`.
pub fn write_posterior(path: &Path, samples: &[PosteriorSample]) -> CliResult<()> {
    let Some(first) = samples.first() else {
        return Err(CliError::Config("no posterior samples to write".into()));
    };
    let k = first.params.psi.len();
    let t = first.params.alpha_inc.len();
    let mut header: Vec<String> = ["chain", "iteration", "log_likelihood", "log_posterior"]
        .map(String::from)
        .to_vec();
    header.extend((1..=k).map(|a| format!("psi_{a}")));
    header.extend((1..=k).map(|a| format!("rho_{a}")));
    header.push("gamma1".into());
    header.push("alpha0".into());
    header.extend((0..t).map(|d| format!("alpha_inc_{d}")));
    let mut w = writer(path)?;
    let io = |e| csv_err(path, e);
    w.write_record(&header).map_err(io)?;
    for s in samples {
        let p = &s.params;
        let mut row = vec![
            s.chain.to_string(),
            s.iteration.to_string(),
            s.log_likelihood.to_string(),
            s.log_posterior.to_string(),
        ];
        row.extend(p.psi.iter().chain(&p.rho).map(f64::to_string));
        row.push(p.gamma1.to_string());
        row.push(p.alpha0.to_string());
        row.extend(p.alpha_inc.iter().map(f64::to_string));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

const TERMINAL_HEADER: [&str; 8] = ["chain", "iteration", "age_group", "imd_decile", "s", "e", "i", "r"];

/// State at the end of the fitted window for each sample.
pub fn write_terminal_states(
    path: &Path,
    samples: &[PosteriorSample],
    layout: &StrataLayout,
    age_labels: &[String],
) -> CliResult<()> {
    let labels = StrataLabels { layout, ages: age_labels };
    let mut w = writer(path)?;
    let io = |e| csv_err(path, e);
    w.write_record(TERMINAL_HEADER).map_err(io)?;
    for s in samples {
        let x = &s.terminal;
        for i in 0..x.num_strata() {
            let (age, decile) = labels.label(i);
            w.write_record([
                s.chain.to_string(),
                s.iteration.to_string(),
                age.to_string(),
                decile.to_string(),
                x.s[i].to_string(),
                x.e[i].to_string(),
                x.i[i].to_string(),
                x.r[i].to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Latent infection and onset counts of samples that stored them.
pub fn write_latents(path: &Path, samples: &[PosteriorSample], layout: &StrataLayout, age_labels: &[String]) -> CliResult<()> {
    let labels = StrataLabels { layout, ages: age_labels };
    let mut w = writer(path)?;
    let io = |e| csv_err(path, e);
    w.write_record(["chain", "iteration", "age_group", "imd_decile", "day", "z_se", "z_ei"])
        .map_err(io)?;
    for s in samples {
        let Some((z_se, z_ei)) = &s.latents else { continue };
        for i in 0..z_se.rows() {
            let (age, decile) = labels.label(i);
            for t in 0..z_se.cols() {
                w.write_record([
                    s.chain.to_string(),
                    s.iteration.to_string(),
                    age.to_string(),
                    decile.to_string(),
                    t.to_string(),
                    z_se[(i, t)].to_string(),
                    z_ei[(i, t)].to_string(),
                ])
                .map_err(io)?;
            }
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads the posterior table and its terminal states back into samples.
pub fn load_posterior(
    posterior: &Path,
    terminal: &Path,
    layout: &StrataLayout,
    age_labels: &[String],
) -> CliResult<Vec<PosteriorSample>> {
    let k = layout.num_age();
    let mut rdr = reader(posterior)?;
    let header = rdr.headers().map_err(|e| csv_err(posterior, e))?.clone();
    let fixed = 4 + 2 * k + 2;
    let t = header.len().checked_sub(fixed).ok_or_else(|| {
        CliError::input(posterior, format!("posterior table needs at least {fixed} columns"))
    })?;
    let mut expected: Vec<String> = ["chain", "iteration", "log_likelihood", "log_posterior"]
        .map(String::from)
        .to_vec();
    expected.extend((1..=k).map(|a| format!("psi_{a}")));
    expected.extend((1..=k).map(|a| format!("rho_{a}")));
    expected.push("gamma1".into());
    expected.push("alpha0".into());
    expected.extend((0..t).map(|d| format!("alpha_inc_{d}")));
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(CliError::input(posterior, format!("header does not match a {k}-age-group posterior")));
    }
    let mut samples = Vec::new();
    for (line, rec) in records(posterior, &mut rdr)? {
        let num = |c: usize| parse_f64(posterior, line, &expected[c], &rec[c]);
        let values = (4..rec.len()).map(num).collect::<CliResult<Vec<_>>>()?;
        let params = ModelParams {
            psi: values[..k].to_vec(),
            rho: values[k..2 * k].to_vec(),
            gamma1: values[2 * k],
            alpha0: values[2 * k + 1],
            alpha_inc: values[2 * k + 2..].to_vec(),
        };
        params.validate(k).map_err(|e| row_err(posterior, line, e))?;
        samples.push(PosteriorSample {
            params,
            log_likelihood: num(2)?,
            log_posterior: num(3)?,
            iteration: parse_count(posterior, line, "iteration", &rec[1])? as usize,
            chain: parse_count(posterior, line, "chain", &rec[0])?,
            terminal: StateMatrix::zeros(layout.num_strata()),
            latents: None,
        });
    }
    if samples.is_empty() {
        return Err(CliError::input(posterior, "no posterior samples"));
    }
    let labels = StrataLabels { layout, ages: age_labels };
    let mut states: BTreeMap<(u64, usize), StateMatrix> = BTreeMap::new();
    let mut rdr = reader(terminal)?;
    check_header(terminal, &mut rdr, &TERMINAL_HEADER)?;
    for (line, rec) in records(terminal, &mut rdr)? {
        let chain = parse_count(terminal, line, "chain", &rec[0])?;
        let iteration = parse_count(terminal, line, "iteration", &rec[1])? as usize;
        let i = labels.stratum(&rec[2], &rec[3]).map_err(|m| row_err(terminal, line, m))?;
        let x = states
            .entry((chain, iteration))
            .or_insert_with(|| StateMatrix::zeros(layout.num_strata()));
        x.s[i] = parse_count(terminal, line, "s", &rec[4])?;
        x.e[i] = parse_count(terminal, line, "e", &rec[5])?;
        x.i[i] = parse_count(terminal, line, "i", &rec[6])?;
        x.r[i] = parse_count(terminal, line, "r", &rec[7])?;
    }
    for s in &mut samples {
        s.terminal = states.remove(&(s.chain, s.iteration)).ok_or_else(|| {
            CliError::input(
                terminal,
                format!("no terminal state for chain {} iteration {}", s.chain, s.iteration),
            )
        })?;
    }
    Ok(samples)
}

/// Column name for a quantile level: `0.05 -> "q05"`, `0.975 -> "q97.5"`.
pub fn quantile_label(q: f64) -> String {
    let pct = q * 100.0;
    if (pct - pct.round()).abs() < 1e-9 {
        format!("q{:02}", pct.round() as u64)
    } else {
        format!("q{pct}")
    }
}

/// Per-stratum ensemble summary: `stratum,age_group,imd_decile,date,mean,q..,q..`.
pub fn write_forecast(
    path: &Path,
    summary: &EnsembleSummary,
    dates: &[NaiveDate],
    quantiles: (f64, f64),
    layout: &StrataLayout,
    age_labels: &[String],
) -> CliResult<()> {
    let labels = StrataLabels { layout, ages: age_labels };
    let mut w = writer(path)?;
    let io = |e| csv_err(path, e);
    w.write_record([
        "stratum".to_string(),
        "age_group".into(),
        "imd_decile".into(),
        "date".into(),
        "mean".into(),
        quantile_label(quantiles.0),
        quantile_label(quantiles.1),
    ])
    .map_err(io)?;
    for i in 0..summary.mean.rows() {
        let (age, decile) = labels.label(i);
        for (t, date) in dates.iter().enumerate() {
            w.write_record([
                i.to_string(),
                age.to_string(),
                decile.to_string(),
                date.to_string(),
                summary.mean[(i, t)].to_string(),
                summary.lower[(i, t)].to_string(),
                summary.upper[(i, t)].to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Aggregated ensemble summary: `group,date,mean,q..,q..`.
pub fn write_grouped(
    path: &Path,
    summary: &EnsembleSummary,
    groups: &[String],
    dates: &[NaiveDate],
    quantiles: (f64, f64),
) -> CliResult<()> {
    let mut w = writer(path)?;
    let io = |e| csv_err(path, e);
    w.write_record([
        "group".to_string(),
        "date".into(),
        "mean".into(),
        quantile_label(quantiles.0),
        quantile_label(quantiles.1),
    ])
    .map_err(io)?;
    for (g, name) in groups.iter().enumerate() {
        for (t, date) in dates.iter().enumerate() {
            w.write_record([
                name.clone(),
                date.to_string(),
                summary.mean[(g, t)].to_string(),
                summary.lower[(g, t)].to_string(),
                summary.upper[(g, t)].to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// `stratum,age_group,imd_decile,mean,q..,q..,exceedance` where exceedance
/// is the posterior probability that the reproduction number exceeds one.
pub fn write_rt(
    path: &Path,
    rt: &RtEstimate,
    quantiles: (f64, f64),
    layout: &StrataLayout,
    age_labels: &[String],
) -> CliResult<()> {
    let labels = StrataLabels { layout, ages: age_labels };
    let mut w = writer(path)?;
    let io = |e| csv_err(path, e);
    w.write_record([
        "stratum".to_string(),
        "age_group".into(),
        "imd_decile".into(),
        "mean".into(),
        quantile_label(quantiles.0),
        quantile_label(quantiles.1),
        "exceedance".into(),
    ])
    .map_err(io)?;
    for i in 0..rt.mean.len() {
        let (age, decile) = labels.label(i);
        let mut col = rt.values.column(i);
        col.sort_by(f64::total_cmp);
        w.write_record([
            i.to_string(),
            age.to_string(),
            decile.to_string(),
            rt.mean[i].to_string(),
            stratseir::metrics::quantile_sorted(&col, quantiles.0).to_string(),
            stratseir::metrics::quantile_sorted(&col, quantiles.1).to_string(),
            rt.exceedance[i].to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// `stratum,age_group,imd_decile,date,crps`.
pub fn write_crps(
    path: &Path,
    scores: &Matrix,
    dates: &[NaiveDate],
    layout: &StrataLayout,
    age_labels: &[String],
) -> CliResult<()> {
    let labels = StrataLabels { layout, ages: age_labels };
    let mut w = writer(path)?;
    let io = |e| csv_err(path, e);
    w.write_record(["stratum", "age_group", "imd_decile", "date", "crps"])
        .map_err(io)?;
    for i in 0..scores.rows() {
        let (age, decile) = labels.label(i);
        for (t, date) in dates.iter().enumerate() {
            w.write_record([
                i.to_string(),
                age.to_string(),
                decile.to_string(),
                date.to_string(),
                scores[(i, t)].to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Smoothed incidence per decile and the decile order on each traced day:
/// `day,date,imd_1..imd_J,order` (order lists deciles highest first).
pub fn write_switching(path: &Path, report: &SwitchingReport, start: NaiveDate) -> CliResult<()> {
    let mut w = writer(path)?;
    let io = |e| csv_err(path, e);
    let groups = report.smoothed.rows();
    let mut header = vec!["day".to_string(), "date".into()];
    header.extend((1..=groups).map(|g| format!("imd_{g}")));
    header.push("order".into());
    w.write_record(&header).map_err(io)?;
    for (c, day) in report.days.iter().enumerate() {
        let mut row = vec![day.to_string(), (start + Days::new(*day as u64)).to_string()];
        row.extend(report.smoothed.column(c).iter().map(f64::to_string));
        row.push(format_order(&report.orders[c]));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Daily compartments and transition counts of one forward run:
/// `day,date,age_group,imd_decile,s,e,i,r,new_exposed,new_infectious,new_removed`.
/// Row `day` holds the state at the start of that day and the events
/// during it; the final row holds the end state with no events.
pub fn write_trajectory(
    path: &Path,
    traj: &Trajectory,
    start: NaiveDate,
    layout: &StrataLayout,
    age_labels: &[String],
) -> CliResult<()> {
    let labels = StrataLabels { layout, ages: age_labels };
    let mut w = writer(path)?;
    let io = |e| csv_err(path, e);
    w.write_record([
        "day",
        "date",
        "age_group",
        "imd_decile",
        "s",
        "e",
        "i",
        "r",
        "new_exposed",
        "new_infectious",
        "new_removed",
    ])
    .map_err(io)?;
    let horizon = traj.events.ir.cols();
    for (t, x) in traj.states.iter().enumerate() {
        for i in 0..x.num_strata() {
            let (age, decile) = labels.label(i);
            let ev = |m: &Matrix<u64>| if t < horizon { m[(i, t)].to_string() } else { String::new() };
            w.write_record([
                t.to_string(),
                (start + Days::new(t as u64)).to_string(),
                age.to_string(),
                decile.to_string(),
                x.s[i].to_string(),
                x.e[i].to_string(),
                x.i[i].to_string(),
                x.r[i].to_string(),
                ev(&traj.events.se),
                ev(&traj.events.ei),
                ev(&traj.events.ir),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::input(path, e.to_string()))?;
    text.push('\n');
    let mut f = File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(path, e.to_string()))
}
