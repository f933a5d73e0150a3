use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qlattice::coefficients::{residuals, scaled_b, solve_coefficients};
use qlattice::experiments::{
    self, aggregate, parse_records, records_to_text, table_for, Cell, ExperimentConfig, ExperimentKind, Table,
};
use qlattice::theory::{beta_crit, beta_poly, entropy_h, expected_solutions, rho_l};
use qlattice::{CoefficientCache, Error, Policy, Problem, Result, Simulator};

#[derive(Parser)]
#[command(
    name = "qlattice",
    version,
    about = "Structured quantum search on the subset lattice, simulated classically"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Map coefficients a_k and scaled b_k with their residuals
    Coeffs(CoeffsArgs),
    /// Run the search on one problem file
    Simulate(SimulateArgs),
    /// Expected trials against nogood density β
    SweepBeta(SweepArgs),
    /// Probability of a solution and enhancement against N
    Scaling(ScalingArgs),
    /// Random 3-SAT enhancement against n and c/n
    SatSweep(SweepArgs),
    /// Chronological backtracking cost and soluble fraction against β
    Backtrack(SweepArgs),
    /// Critical densities and solution survival probabilities
    Theory(TheoryArgs),
    /// Rebuild a results table from raw per-instance records
    Aggregate(AggregateArgs),
}

#[derive(Args, Clone, Default)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    tries: Option<usize>,
    /// inversion | random | none | fixed:<theta>
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-instance records
    #[arg(long)]
    raw: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// key=value settings; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Item counts N (variables n for sat-sweep), list or from:to:step
    #[arg(long, short = 'n')]
    n: Option<String>,
    /// β values, list or from:to:step
    #[arg(long)]
    beta: Option<String>,
    /// Clause ratios c/n for sat-sweep
    #[arg(long)]
    ratio: Option<String>,
    /// Solution level: `half` or an integer
    #[arg(long)]
    level: Option<String>,
    /// Level the search starts from
    #[arg(long)]
    start: Option<usize>,
    /// Drop points whose nogood count cannot be drawn
    #[arg(long)]
    skip_infeasible: bool,
    /// Keep insoluble 3-SAT draws
    #[arg(long)]
    no_filter: bool,
}

#[derive(Args)]
struct ScalingArgs {
    #[command(flatten)]
    sweep: SweepArgs,
    /// Emit the enhancement-ratio table
    #[arg(long)]
    enhancement: bool,
}

#[derive(Args)]
struct CoeffsArgs {
    #[command(flatten)]
    common: Common,
    /// Item counts, list or from:to:step
    #[arg(long, short = 'n', default_value = "3:12:1")]
    n: String,
    /// Only this source level
    #[arg(long, short = 'i')]
    level: Option<usize>,
    /// Report on stderr whether a_k alternate in sign and b_k keep one sign
    #[arg(long)]
    signs: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Problem file
    problem: PathBuf,
    #[arg(long, default_value_t = 0)]
    start: usize,
}

#[derive(Args)]
struct TheoryArgs {
    #[command(flatten)]
    common: Common,
    /// Values per variable
    #[arg(long, short = 'b', default_value = "2,3,4,5,6")]
    b: String,
    /// Print ρ_L for this N instead of the density table
    #[arg(long)]
    rho_n: Option<usize>,
    #[arg(long)]
    rho_l: Option<usize>,
    /// Nogood counts for the ρ_L table
    #[arg(long, default_value = "0:40:5")]
    m: String,
}

#[derive(Args)]
struct AggregateArgs {
    #[command(flatten)]
    common: Common,
    /// Raw records written with --raw
    records: PathBuf,
    /// sweep-beta | scaling | enhancement | sat-sweep | backtrack-sweep
    #[arg(long)]
    kind: ExperimentKind,
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn list(s: &str) -> Result<Vec<f64>> {
    experiments::parse_list(s)
}

fn sizes(s: &str) -> Result<Vec<usize>> {
    list(s)?
        .into_iter()
        .map(|v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::Config(format!("sizes must be non-negative integers, got {v}")))
            }
        })
        .collect()
}

fn policy(common: &Common) -> Result<Policy> {
    common.policy.as_deref().unwrap_or("inversion").parse()
}

fn build_config(kind: ExperimentKind, args: &SweepArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::for_kind(kind);
    let c = &args.common;
    if let Some(path) = &c.config {
        cfg.apply_text(&fs::read_to_string(path)?)?;
    }
    let flags: [(&str, Option<String>); 10] = [
        ("seed", c.seed.map(|v| v.to_string())),
        ("instances", c.instances.map(|v| v.to_string())),
        ("tries", c.tries.map(|v| v.to_string())),
        ("policy", c.policy.clone()),
        ("n", args.n.clone()),
        ("beta", args.beta.clone()),
        ("ratio", args.ratio.clone()),
        ("level", args.level.clone()),
        ("start", args.start.map(|v| v.to_string())),
        ("out", c.out.as_ref().map(|p| p.display().to_string())),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    if let Some(p) = &c.raw {
        cfg.raw = Some(p.clone());
    }
    if let Some(p) = &c.svg {
        cfg.svg = Some(p.clone());
    }
    if args.skip_infeasible {
        cfg.skip_infeasible = true;
    }
    if args.no_filter {
        cfg.solubility_filter = false;
    }
    Ok(cfg)
}

fn run_sweep(kind: ExperimentKind, args: &SweepArgs) -> Result<()> {
    let cfg = build_config(kind, args)?;
    let report = experiments::run_experiment(&cfg)?;
    for note in &report.skipped {
        eprintln!("skipped: {note}");
    }
    emit(cfg.out.as_deref(), &report.to_csv())?;
    if let Some(p) = &cfg.raw {
        fs::write(p, records_to_text(&report.records))?;
    }
    if let Some(p) = &cfg.svg {
        fs::write(p, report.chart().render())?;
    }
    Ok(())
}

fn alternates(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] * w[1] < 0.0)
}

fn coeffs(args: &CoeffsArgs) -> Result<()> {
    let mut t = Table::new(&["N", "i", "k", "a_k", "b_k", "res_norm", "res_orth_max"]);
    for n in sizes(&args.n)? {
        let top = n.div_ceil(2);
        let levels: Vec<usize> = match args.level {
            Some(i) => vec![i],
            None => (0..top).collect(),
        };
        for i in levels {
            let c = solve_coefficients::<f64>(n, i)?;
            let r = residuals(&c);
            let b = scaled_b(&c);
            if args.signs {
                eprintln!(
                    "N={n} i={i} a_alternates={} b_same_sign={}",
                    alternates(c.a()),
                    b.b.iter().all(|&x| x > 0.0) || b.b.iter().all(|&x| x < 0.0)
                );
            }
            for (k, (&a_k, &b_k)) in c.a().iter().zip(&b.b).enumerate() {
                t.push(vec![
                    n.into(),
                    i.into(),
                    k.into(),
                    a_k.into(),
                    b_k.into(),
                    r.normalization.abs().into(),
                    r.orthogonality_max().into(),
                ]);
            }
        }
    }
    emit(args.common.out.as_deref(), &t.to_csv())
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let text = fs::read_to_string(&args.problem)?;
    let problem: Problem = text.parse()?;
    let policy = policy(&args.common)?;
    let tries = args.common.tries.unwrap_or(10);
    let mut rng = ChaCha8Rng::seed_from_u64(args.common.seed.unwrap_or(1));
    let cache = CoefficientCache::new();
    let sim = Simulator::new(&problem, args.start, &cache)?;
    let avg = sim.run_averaged(policy, tries, &mut rng)?;
    let mut t = Table::new(&["N", "L", "start", "policy", "try", "p_soln", "trials", "n_soln"]);
    for (k, &p) in avg.p_values.iter().enumerate() {
        t.push(vec![
            problem.items().into(),
            problem.solution_level().into(),
            args.start.into(),
            Cell::Text(policy.to_string()),
            (k + 1).into(),
            p.into(),
            p.recip().into(),
            sim.solution_count().into(),
        ]);
    }
    eprintln!(
        "mean p_soln {} mean 1/p {} max |norm-1| {:e}",
        experiments::fmt_g(avg.mean_p),
        experiments::fmt_g(avg.mean_inverse_p),
        avg.max_norm_deviation
    );
    emit(args.common.out.as_deref(), &t.to_csv())
}

fn theory(args: &TheoryArgs) -> Result<()> {
    let t = match args.rho_n {
        Some(n) => {
            let l = args.rho_l.unwrap_or(n / 2);
            let mut t = Table::new(&["N", "L", "m", "rho_L", "expected_solutions"]);
            for m in sizes(&args.m)? {
                t.push(vec![
                    n.into(),
                    l.into(),
                    m.into(),
                    rho_l::<f64>(n, l, m)?.into(),
                    expected_solutions::<f64>(n, l, m)?.into(),
                ]);
            }
            t
        }
        None => {
            let mut t = Table::new(&["b", "h_inv_b", "beta_crit", "beta_poly"]);
            for b in list(&args.b)? {
                t.push(vec![
                    b.into(),
                    entropy_h(1.0 / b)?.into(),
                    beta_crit(b)?.into(),
                    beta_poly(b)?.into(),
                ]);
            }
            t
        }
    };
    emit(args.common.out.as_deref(), &t.to_csv())
}

fn reaggregate(args: &AggregateArgs) -> Result<()> {
    let records = parse_records(&fs::read_to_string(&args.records)?)?;
    let rows = aggregate(&records);
    emit(args.common.out.as_deref(), &table_for(args.kind, &rows).to_csv())?;
    if let Some(p) = &args.common.svg {
        fs::write(p, experiments::chart_for(args.kind, &rows).render())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Coeffs(a) => coeffs(a),
        Command::Simulate(a) => simulate(a),
        Command::SweepBeta(a) => run_sweep(ExperimentKind::SweepBeta, a),
        Command::Scaling(a) => run_sweep(
            if a.enhancement {
                ExperimentKind::Enhancement
            } else {
                ExperimentKind::Scaling
            },
            &a.sweep,
        ),
        Command::SatSweep(a) => run_sweep(ExperimentKind::SatSweep, a),
        Command::Backtrack(a) => run_sweep(ExperimentKind::BacktrackSweep, a),
        Command::Theory(a) => theory(a),
        Command::Aggregate(a) => reaggregate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
