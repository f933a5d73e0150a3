//! Batch harness for the ensemble experiments: β sweeps of the quantum
//! search, scaling and enhancement runs, random 3-SAT sweeps and the
//! backtracking baseline.
//!
//! Every instance draws from its own ChaCha8 stream. The 32-byte stream seed
//! is the concatenation, each as little-endian `u64`, of the master seed, a
//! family tag, a point key and the instance index:
//!
//! | family            | tag | point key                    |
//! |-------------------|-----|------------------------------|
//! | quantum CSP       | 1   | `N << 48 \| L << 40 \| m`     |
//! | backtrack, forced | 2   | `N << 48 \| L << 40 \| m`     |
//! | backtrack, random | 3   | `N << 48 \| L << 40 \| m`     |
//! | 3-SAT             | 4   | `n << 48 \| c`                |
//!
//! The same instance therefore appears in every experiment that visits the
//! same point, whatever order the points or instances are run in. A stream
//! first generates the problem and then supplies the random phases.

mod config;
mod records;
pub mod stats;
pub mod svg;
pub mod table;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::backtrack::backtrack_cost;
use crate::coefficients::CoefficientCache;
use crate::error::{Error, Result};
use crate::lattice::{choose, ItemSet, MAX_ITEMS};
use crate::problems::{
    generate_random_3sat, generate_random_csp, generate_unforced_csp, is_soluble, sat_clause_pool_size,
};
use crate::sim::Simulator;

pub use config::{parse_list, ExperimentConfig, ExperimentKind, LevelRule};
pub use records::{aggregate, parse_records, records_to_text, Family, InstanceRecord};
pub use stats::Summary;
pub use svg::Chart;
pub use table::{fmt_g, Cell, Table};

/// Consecutive insoluble 3-SAT draws tolerated before a sweep aborts.
pub const REJECTION_GUARD: usize = 10_000;

pub fn instance_seed(master: u64, family: Family, key: u64, index: u64) -> [u8; 32] {
    let mut seed = [0u8; 32];
    for (chunk, word) in seed.chunks_exact_mut(8).zip([master, family.tag(), key, index]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    seed
}

pub fn instance_rng(master: u64, family: Family, key: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(instance_seed(master, family, key, index))
}

/// Nogood count for density β: `round(βN)`.
pub fn nogood_count(beta: f64, n: usize) -> usize {
    (beta * n as f64).round() as usize
}

/// Success probability relative to picking a level-`l` set uniformly at random.
pub fn enhancement_ratio(p_soln: f64, n_soln: u64, n: usize, l: usize) -> f64 {
    p_soln * choose(n as i64, l as i64) as f64 / n_soln as f64
}

/// One parameter point of a CSP experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CspPoint {
    pub n: usize,
    pub l: usize,
    pub beta: f64,
    pub m: usize,
}

impl CspPoint {
    fn key(&self) -> u64 {
        (self.n as u64) << 48 | (self.l as u64) << 40 | self.m as u64
    }
}

/// One parameter point of a 3-SAT experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SatPoint {
    pub variables: usize,
    pub ratio: f64,
    pub clauses: usize,
}

impl SatPoint {
    fn key(&self) -> u64 {
        (self.variables as u64) << 48 | self.clauses as u64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Plan {
    Csp(Vec<CspPoint>),
    Sat(Vec<SatPoint>),
}

/// Aggregate over the instances of one parameter point.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub family: Family,
    pub n: usize,
    pub l: usize,
    /// β for CSP points, c/n for 3-SAT points.
    pub param: f64,
    /// Nogood count, or clause count for 3-SAT.
    pub m: usize,
    pub instances: usize,
    /// Per-instance mean of `1/p_soln` over tries, over instances with some `p > 0`.
    pub inv_p: Summary,
    /// Instances where every try gave `p_soln = 0`.
    pub zero_p: usize,
    pub p: Summary,
    /// Per-instance `1 / mean p_soln`.
    pub inv_mean_p: Summary,
    pub n_soln: Summary,
    /// `N_soln / C(N, L)` per instance.
    pub p_rand_sets: Summary,
    pub ratio_sets: Summary,
    /// Against random complete assignments, `N_soln / 2^L`.
    pub ratio_assign: Summary,
    pub cost: Summary,
    pub cost_unforced: Summary,
    pub soluble_fraction: f64,
    pub rejections: u64,
    pub max_norm_deviation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub kind: ExperimentKind,
    pub rows: Vec<SweepRow>,
    pub records: Vec<InstanceRecord>,
    /// Points dropped because their nogood or clause count was infeasible.
    pub skipped: Vec<String>,
}

fn csp_level(rule: LevelRule, n: usize) -> Result<usize> {
    match rule {
        LevelRule::Half if n.is_multiple_of(2) => Ok(n / 2),
        LevelRule::Half => Err(Error::Config(format!("L = N/2 needs an even N, got {n}"))),
        LevelRule::Fixed(l) => Ok(l),
    }
}

fn default_start(kind: ExperimentKind) -> usize {
    match kind {
        ExperimentKind::SatSweep => 3,
        _ => 2,
    }
}

/// Validates `cfg` and lists its parameter points. Nothing is simulated.
pub fn plan(cfg: &ExperimentConfig) -> Result<(Plan, Vec<String>)> {
    let bad = |msg: String| Err(Error::Config(msg));
    if cfg.instances() == 0 {
        return bad("instances must be at least 1".into());
    }
    if cfg.tries == 0 {
        return bad("tries must be at least 1".into());
    }
    if cfg.b != 2.0 {
        return bad(format!("generators support b = 2 only, got {}", cfg.b));
    }
    if cfg.sizes.is_empty() {
        return bad("no problem sizes given".into());
    }
    let start = cfg.start_level.unwrap_or(default_start(cfg.kind));
    let mut skipped = Vec::new();
    if cfg.kind == ExperimentKind::SatSweep {
        if cfg.ratios.is_empty() {
            return bad("no clause ratios given".into());
        }
        let mut points = Vec::new();
        for &v in &cfg.sizes {
            if v < 4 || 2 * v > MAX_ITEMS {
                return bad(format!("3-SAT needs 4 <= n <= {}, got {v}", MAX_ITEMS / 2));
            }
            if start >= v {
                return bad(format!("start level {start} must be below n = {v}"));
            }
            for &ratio in &cfg.ratios {
                if !(ratio >= 0.0 && ratio.is_finite()) {
                    return bad(format!("clause ratio must be finite and non-negative, got {ratio}"));
                }
                let clauses = (ratio * v as f64).round() as usize;
                let pool = sat_clause_pool_size(v);
                if clauses > pool {
                    let msg = format!("n={v} c/n={ratio}: {clauses} clauses exceed the {pool} available");
                    if cfg.skip_infeasible {
                        skipped.push(msg);
                        continue;
                    }
                    return bad(msg);
                }
                points.push(SatPoint {
                    variables: v,
                    ratio,
                    clauses,
                });
            }
        }
        return Ok((Plan::Sat(points), skipped));
    }
    if cfg.betas.is_empty() {
        return bad("no β values given".into());
    }
    let mut points = Vec::new();
    for &n in &cfg.sizes {
        if n > MAX_ITEMS {
            return Err(Error::TooManyItems(n));
        }
        let l = csp_level(cfg.level, n)?;
        if l > n.div_ceil(2) {
            return bad(format!("L = {l} exceeds ceil(N/2) for N = {n}"));
        }
        let quantum = cfg.kind != ExperimentKind::BacktrackSweep;
        if quantum && start >= l {
            return bad(format!("start level {start} must be below L = {l}"));
        }
        if l == 0 {
            return bad("L must be at least 1".into());
        }
        for &beta in &cfg.betas {
            if !(beta >= 0.0 && beta.is_finite()) {
                return bad(format!("β must be finite and non-negative, got {beta}"));
            }
            let m = nogood_count(beta, n);
            let available = (choose(n as i64, 2) - choose(l as i64, 2)) as usize;
            if m > available {
                let msg = format!("N={n} L={l} β={beta}: m = {m} exceeds the {available} pairs outside a solution");
                if cfg.skip_infeasible {
                    skipped.push(msg);
                    continue;
                }
                return bad(msg);
            }
            points.push(CspPoint { n, l, beta, m });
        }
    }
    Ok((Plan::Csp(points), skipped))
}

fn quantum_csp(
    cfg: &ExperimentConfig,
    pt: &CspPoint,
    index: u64,
    cache: &CoefficientCache<f64>,
) -> Result<InstanceRecord> {
    let mut rng = instance_rng(cfg.seed, Family::Csp, pt.key(), index);
    let problem = generate_random_csp(pt.n, pt.m, ItemSet::first_items(pt.l), &mut rng)?;
    let start = cfg.start_level.unwrap_or(2);
    let sim = Simulator::new(&problem, start, cache)?;
    let avg = sim.run_averaged(cfg.policy, cfg.tries, &mut rng)?;
    Ok(InstanceRecord {
        family: Family::Csp,
        n: pt.n,
        l: pt.l,
        param: pt.beta,
        m: pt.m,
        index,
        n_soln: sim.solution_count() as u64,
        found: true,
        cost: None,
        rejections: 0,
        norm_deviation: avg.max_norm_deviation,
        p: avg.p_values,
    })
}

fn backtrack_instance(cfg: &ExperimentConfig, pt: &CspPoint, family: Family, index: u64) -> Result<InstanceRecord> {
    let mut rng = instance_rng(cfg.seed, family, pt.key(), index);
    let problem = match family {
        Family::BacktrackForced => {
            let picked = rand::seq::index::sample(&mut rng, pt.n, pt.l);
            let solution = ItemSet::from_items(picked.into_iter().map(|i| i + 1))?;
            generate_random_csp(pt.n, pt.m, solution, &mut rng)?
        }
        _ => generate_unforced_csp(pt.n, pt.l, pt.m, &mut rng)?,
    };
    let report = backtrack_cost(&problem);
    Ok(InstanceRecord {
        family,
        n: pt.n,
        l: pt.l,
        param: pt.beta,
        m: pt.m,
        index,
        n_soln: u64::from(report.found),
        found: report.found,
        cost: Some(report.cost),
        rejections: 0,
        norm_deviation: 0.0,
        p: Vec::new(),
    })
}

fn sat_instance(
    cfg: &ExperimentConfig,
    pt: &SatPoint,
    index: u64,
    cache: &CoefficientCache<f64>,
) -> Result<InstanceRecord> {
    let mut rng = instance_rng(cfg.seed, Family::Sat, pt.key(), index);
    let mut rejections = 0usize;
    let (problem, soluble) = loop {
        let candidate = generate_random_3sat(pt.variables, pt.clauses, &mut rng)?;
        let soluble = is_soluble(&candidate);
        if soluble || !cfg.solubility_filter {
            break (candidate, soluble);
        }
        rejections += 1;
        if rejections > REJECTION_GUARD {
            return Err(Error::RejectionGuard(rejections));
        }
    };
    let start = cfg.start_level.unwrap_or(3);
    let (p, n_soln, norm_deviation) = match Simulator::new(&problem, start, cache) {
        Ok(sim) => {
            let avg = sim.run_averaged(cfg.policy, cfg.tries, &mut rng)?;
            (avg.p_values, sim.solution_count() as u64, avg.max_norm_deviation)
        }
        Err(Error::NoGoodsAtStart(_)) if !soluble => (vec![0.0], 0, 0.0),
        Err(e) => return Err(e),
    };
    Ok(InstanceRecord {
        family: Family::Sat,
        n: 2 * pt.variables,
        l: pt.variables,
        param: pt.ratio,
        m: pt.clauses,
        index,
        n_soln,
        found: soluble,
        cost: None,
        rejections: rejections as u64,
        norm_deviation,
        p,
    })
}

fn instances_of<F>(count: usize, f: F) -> Result<Vec<InstanceRecord>>
where
    F: Fn(u64) -> Result<InstanceRecord> + Sync + Send,
{
    (0..count as u64).into_par_iter().map(f).collect()
}

/// Runs every instance of `cfg` and aggregates per point.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    let (plan, skipped) = plan(cfg)?;
    let count = cfg.instances();
    let cache = CoefficientCache::<f64>::new();
    let start = cfg.start_level.unwrap_or(default_start(cfg.kind));
    let mut records = Vec::new();
    match plan {
        Plan::Csp(points) => {
            for pt in &points {
                if cfg.kind == ExperimentKind::BacktrackSweep {
                    for family in [Family::BacktrackForced, Family::BacktrackUnforced] {
                        records.extend(instances_of(count, |i| backtrack_instance(cfg, pt, family, i))?);
                    }
                } else {
                    cache.populate(pt.n, start, pt.l)?;
                    records.extend(instances_of(count, |i| quantum_csp(cfg, pt, i, &cache))?);
                }
            }
        }
        Plan::Sat(points) => {
            for pt in &points {
                cache.populate(2 * pt.variables, start, pt.variables)?;
                records.extend(instances_of(count, |i| sat_instance(cfg, pt, i, &cache))?);
            }
        }
    }
    Ok(Report {
        kind: cfg.kind,
        rows: aggregate(&records),
        records,
        skipped,
    })
}

fn with_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> ExperimentConfig {
    ExperimentConfig { kind, ..cfg.clone() }
}

/// Expected trials `1/p_soln` against β, problems with solution `{1..L}`.
pub fn sweep_beta(cfg: &ExperimentConfig) -> Result<Report> {
    run_experiment(&with_kind(cfg, ExperimentKind::SweepBeta))
}

/// Mean `p_soln` against N at fixed β.
pub fn scaling_run(cfg: &ExperimentConfig) -> Result<Report> {
    run_experiment(&with_kind(cfg, ExperimentKind::Scaling))
}

/// `p_soln` relative to random selection at the solution level.
pub fn enhancement_run(cfg: &ExperimentConfig) -> Result<Report> {
    run_experiment(&with_kind(cfg, ExperimentKind::Enhancement))
}

/// Random 3-SAT keyed by `(n, c/n)`, insoluble draws rejected.
pub fn sat_sweep(cfg: &ExperimentConfig) -> Result<Report> {
    run_experiment(&with_kind(cfg, ExperimentKind::SatSweep))
}

/// Chronological backtracking cost and soluble fraction against β.
pub fn backtrack_sweep(cfg: &ExperimentConfig) -> Result<Report> {
    run_experiment(&with_kind(cfg, ExperimentKind::BacktrackSweep))
}

fn ln(x: f64) -> f64 {
    x.ln()
}

impl Report {
    pub fn table(&self) -> Table {
        table_for(self.kind, &self.rows)
    }

    pub fn to_csv(&self) -> String {
        self.table().to_csv()
    }

    pub fn chart(&self) -> Chart {
        chart_for(self.kind, &self.rows)
    }
}

/// CSV layout of each experiment kind.
pub fn table_for(kind: ExperimentKind, rows: &[SweepRow]) -> Table {
    use ExperimentKind::*;
    let header: &[&str] = match kind {
        SweepBeta => &[
            "N",
            "L",
            "beta",
            "m",
            "instances",
            "mean_inv_p",
            "stderr_inv_p",
            "sd_inv_p",
            "mean_p",
            "stderr_p",
            "mean_inv_mean_p",
            "mean_n_soln",
            "zero_p",
            "max_norm_dev",
        ],
        Scaling => &[
            "N",
            "L",
            "beta",
            "m",
            "instances",
            "mean_p",
            "stderr_p",
            "ln_mean_p",
            "ln_N",
            "mean_inv_p",
            "stderr_inv_p",
            "sd_inv_p",
            "mean_n_soln",
            "mean_ratio",
            "stderr_ratio",
            "zero_p",
        ],
        Enhancement => &[
            "N",
            "L",
            "beta",
            "m",
            "instances",
            "mean_p",
            "mean_p_rand",
            "mean_ratio",
            "stderr_ratio",
            "sd_ratio",
            "ln_mean_ratio",
            "ln_N",
        ],
        SatSweep => &[
            "n",
            "N",
            "ratio",
            "clauses",
            "instances",
            "rejections",
            "mean_p",
            "stderr_p",
            "mean_inv_p",
            "stderr_inv_p",
            "mean_n_soln",
            "mean_ratio_sets",
            "stderr_ratio_sets",
            "mean_ratio_assign",
            "stderr_ratio_assign",
            "zero_p",
        ],
        BacktrackSweep => &[
            "N",
            "L",
            "beta",
            "m",
            "instances",
            "mean_cost",
            "sd_cost",
            "stderr_cost",
            "soluble_fraction",
            "mean_cost_unforced",
        ],
    };
    let mut t = Table::new(header);
    for r in rows {
        let head: Vec<Cell> = vec![r.n.into(), r.l.into(), r.param.into(), r.m.into(), r.instances.into()];
        let row: Vec<Cell> = match kind {
            SweepBeta => head
                .into_iter()
                .chain([
                    r.inv_p.mean.into(),
                    r.inv_p.stderr.into(),
                    r.inv_p.sd.into(),
                    r.p.mean.into(),
                    r.p.stderr.into(),
                    r.inv_mean_p.mean.into(),
                    r.n_soln.mean.into(),
                    r.zero_p.into(),
                    r.max_norm_deviation.into(),
                ])
                .collect(),
            Scaling => head
                .into_iter()
                .chain([
                    r.p.mean.into(),
                    r.p.stderr.into(),
                    ln(r.p.mean).into(),
                    ln(r.n as f64).into(),
                    r.inv_p.mean.into(),
                    r.inv_p.stderr.into(),
                    r.inv_p.sd.into(),
                    r.n_soln.mean.into(),
                    r.ratio_sets.mean.into(),
                    r.ratio_sets.stderr.into(),
                    r.zero_p.into(),
                ])
                .collect(),
            Enhancement => head
                .into_iter()
                .chain([
                    r.p.mean.into(),
                    r.p_rand_sets.mean.into(),
                    r.ratio_sets.mean.into(),
                    r.ratio_sets.stderr.into(),
                    r.ratio_sets.sd.into(),
                    ln(r.ratio_sets.mean).into(),
                    ln(r.n as f64).into(),
                ])
                .collect(),
            SatSweep => vec![
                r.l.into(),
                r.n.into(),
                r.param.into(),
                r.m.into(),
                r.instances.into(),
                r.rejections.into(),
                r.p.mean.into(),
                r.p.stderr.into(),
                r.inv_p.mean.into(),
                r.inv_p.stderr.into(),
                r.n_soln.mean.into(),
                r.ratio_sets.mean.into(),
                r.ratio_sets.stderr.into(),
                r.ratio_assign.mean.into(),
                r.ratio_assign.stderr.into(),
                r.zero_p.into(),
            ],
            BacktrackSweep => head
                .into_iter()
                .chain([
                    r.cost.mean.into(),
                    r.cost.sd.into(),
                    r.cost.stderr.into(),
                    r.soluble_fraction.into(),
                    r.cost_unforced.mean.into(),
                ])
                .collect(),
        };
        t.push(row);
    }
    t
}

fn series_by<K: PartialEq + Copy>(rows: &[SweepRow], key: impl Fn(&SweepRow) -> K) -> Vec<(K, Vec<&SweepRow>)> {
    let mut groups: Vec<(K, Vec<&SweepRow>)> = Vec::new();
    for r in rows {
        let k = key(r);
        match groups.iter_mut().find(|(g, _)| *g == k) {
            Some((_, members)) => members.push(r),
            None => groups.push((k, vec![r])),
        }
    }
    groups
}

pub fn chart_for(kind: ExperimentKind, rows: &[SweepRow]) -> Chart {
    use ExperimentKind::*;
    match kind {
        SweepBeta | BacktrackSweep => {
            let (title, y) = if kind == SweepBeta {
                ("Expected trials to find a solution", "mean 1/p_soln")
            } else {
                ("Chronological backtracking cost", "mean cost")
            };
            let mut c = Chart::new(title, "beta", y);
            for (n, members) in series_by(rows, |r| r.n) {
                let pts = members
                    .iter()
                    .map(|r| (r.param, if kind == SweepBeta { r.inv_p.mean } else { r.cost.mean }))
                    .collect();
                c.add(&format!("N={n}"), pts);
            }
            c
        }
        Scaling | Enhancement => {
            let (title, y) = if kind == Scaling {
                ("Probability of a solution", "mean p_soln")
            } else {
                ("Enhancement over random selection", "mean ratio")
            };
            let mut c = Chart::new(title, "N", y).log_y(true);
            for (beta, members) in series_by(rows, |r| r.param.to_bits()) {
                let pts = members
                    .iter()
                    .map(|r| (r.n as f64, if kind == Scaling { r.p.mean } else { r.ratio_sets.mean }))
                    .collect();
                c.add(&format!("beta={}", f64::from_bits(beta)), pts);
            }
            c
        }
        SatSweep => {
            let mut c = Chart::new("Random 3-SAT enhancement", "n", "mean ratio").log_y(true);
            for (ratio, members) in series_by(rows, |r| r.param.to_bits()) {
                let ratio = f64::from_bits(ratio);
                c.add(
                    &format!("sets c/n={ratio}"),
                    members.iter().map(|r| (r.l as f64, r.ratio_sets.mean)).collect(),
                );
                c.add(
                    &format!("assign c/n={ratio}"),
                    members.iter().map(|r| (r.l as f64, r.ratio_assign.mean)).collect(),
                );
            }
            c
        }
    }
}
