//! `gridlq` benchmark command line.

mod record;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gridlq::diagnostics::{condition_numbers, splitting_radii};
use gridlq::grid_problem::io::{load_problem, save_problem, to_json};
use gridlq::kkt_assembly::{build_splitting, SchurOperator, DEFAULT_DENSE_GUARD};
use gridlq::nbjm::{NbjmConfig, NbjmMode, NbjmPreconditioner};
use gridlq::pcgm::SolveReport;
use gridlq::{
    generate_case1_msd, generate_case2_irrigation, solve_problem_with, Error, Exec, GridLQProblem, SolveOutput,
    SolverChoice,
};
use record::{write_csv, Comparison, DetailedRecord, Record};

const CI_SWEEP: [usize; 6] = [2, 3, 4, 5, 8, 10];
const LARGE_SWEEP: [usize; 10] = [10, 20, 30, 40, 50, 60, 70, 80, 90, 100];

#[derive(Parser, Debug)]
#[command(name = "gridlq", version, about = "Structured LQ solvers for grids of coupled subsystems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one problem or a size sweep and write one record per size.
    Run(RunArgs),
    /// Solve the same problems with two solvers and compare them.
    Compare(CompareArgs),
    /// Write a generated problem as JSON.
    Generate(GenerateArgs),
}

#[derive(Args, Debug, Clone)]
struct ProblemArgs {
    /// `case1`, `case2`, or the path of a problem JSON file.
    #[arg(long, default_value = "case1")]
    case: String,
    /// Sets K = N = T.
    #[arg(long, conflicts_with = "sweep")]
    size: Option<usize>,
    /// Comma-separated sizes, or `ci` / `large` for the preset sweeps.
    #[arg(long)]
    sweep: Option<String>,
    /// Overrides K for every size.
    #[arg(long = "k")]
    k: Option<usize>,
    /// Overrides N for every size.
    #[arg(long = "n")]
    n: Option<usize>,
    /// Overrides T for every size.
    #[arg(long = "t")]
    t: Option<usize>,
    /// Seed of the case1 parameter draws.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    #[arg(long = "L", default_value_t = 2)]
    inner_l: usize,
    #[arg(long = "S", default_value_t = 2)]
    outer_s: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_steps: usize,
    /// Dimension limit of the dense solver.
    #[arg(long, default_value_t = DEFAULT_DENSE_GUARD)]
    guard: usize,
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    /// Output file; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads; more than one switches to the parallel block maps.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Write zero in every wall-clock field.
    #[arg(long)]
    omit_timings: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, value_enum, default_value_t = SolverKind::Pcgm)]
    solver: SolverKind,
    #[command(flatten)]
    solver_args: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Largest multiplier count for which κ and ρ are computed.
    #[arg(long, default_value_t = DEFAULT_DENSE_GUARD)]
    diagnostics_guard: usize,
    /// Skip the dense κ and ρ diagnostics.
    #[arg(long)]
    no_diagnostics: bool,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, value_enum, default_value_t = SolverKind::Pcgm)]
    solver: SolverKind,
    #[arg(long, value_enum, default_value_t = SolverKind::Dense)]
    against: SolverKind,
    #[command(flatten)]
    solver_args: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SolverKind {
    Pcgm,
    Nbjm,
    Dense,
    Cg,
}

impl SolverKind {
    fn name(self) -> &'static str {
        match self {
            SolverKind::Pcgm => "pcgm",
            SolverKind::Nbjm => "nbjm",
            SolverKind::Dense => "dense",
            SolverKind::Cg => "cg",
        }
    }

    fn choice(self, a: &SolverArgs) -> SolverChoice {
        match self {
            SolverKind::Pcgm => {
                SolverChoice::Pcgm { inner_l: a.inner_l, outer_s: a.outer_s, tol: a.tol, max_steps: a.max_steps }
            }
            SolverKind::Nbjm => SolverChoice::Nbjm { inner_l: a.inner_l, tol: a.tol, max_outer: a.max_steps },
            SolverKind::Dense => SolverChoice::Dense { guard: a.guard },
            SolverKind::Cg => SolverChoice::Cg { tol: a.tol, max_steps: a.max_steps },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Solver(#[from] Error),
    #[error("{0} solve(s) did not converge")]
    NotConverged(usize),
    #[error("objectives differ: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Solver(Error::Validation(_) | Error::Config(_)) => 2,
            Failure::Solver(Error::MaxIterationsExceeded(_)) | Failure::NotConverged(_) => 3,
            Failure::Solver(Error::DimensionGuard { .. }) => 4,
            Failure::Mismatch(_) => 5,
            _ => 1,
        }
    }
}

/// A problem to solve: its label and data.
struct Instance {
    case: String,
    problem: GridLQProblem,
}

impl ProblemArgs {
    fn sizes(&self) -> Result<Vec<usize>, Failure> {
        let sizes = match (&self.size, self.sweep.as_deref()) {
            (Some(s), _) => vec![*s],
            (None, None) => vec![3],
            (None, Some("ci")) => CI_SWEEP.to_vec(),
            (None, Some("large")) => LARGE_SWEEP.to_vec(),
            (None, Some(list)) => list
                .split(',')
                .map(|s| s.trim().parse::<usize>().map_err(|e| Failure::Usage(format!("bad sweep entry {s:?}: {e}"))))
                .collect::<Result<_, _>>()?,
        };
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Failure::Usage("sizes must be positive and the sweep non-empty".into()));
        }
        Ok(sizes)
    }

    fn instances(&self) -> Result<Vec<Instance>, Failure> {
        let generate = |k, n, t| match self.case.as_str() {
            "case1" => Some(generate_case1_msd(k, n, t, self.seed)),
            "case2" => Some(generate_case2_irrigation(k, n, t)),
            _ => None,
        };
        if !matches!(self.case.as_str(), "case1" | "case2") {
            if self.size.is_some() || self.sweep.is_some() {
                return Err(Failure::Usage("sizes cannot be combined with a problem file".into()));
            }
            let problem = load_problem(&self.case)?;
            return Ok(vec![Instance { case: "file".into(), problem }]);
        }
        self.sizes()?
            .into_iter()
            .map(|m| {
                let (k, n, t) = (self.k.unwrap_or(m), self.n.unwrap_or(m), self.t.unwrap_or(m));
                if k == 0 || n == 0 || t == 0 {
                    return Err(Failure::Usage("K, N and T must be positive".into()));
                }
                Ok(Instance { case: self.case.clone(), problem: generate(k, n, t).unwrap() })
            })
            .collect()
    }
}

impl OutputArgs {
    fn writer(&self) -> Result<Box<dyn Write>, Failure> {
        Ok(match &self.output {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    fn exec(&self) -> Exec {
        if self.threads > 1 {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }

    fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
        if self.threads <= 1 {
            return Ok(f());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| Failure::Usage(format!("cannot start {} threads: {e}", self.threads)))?;
        Ok(pool.install(f))
    }
}

fn base_record(inst: &Instance, solver: SolverKind) -> Record {
    let p = &inst.problem;
    let primal: usize = p.subsystems.iter().flatten().map(|s| s.n * (p.t + 1) + s.m * p.t).sum();
    Record {
        case: inst.case.clone(),
        solver: solver.name().into(),
        k: p.k,
        n: p.n,
        t: p.t,
        unknowns: primal,
        multipliers: p.num_multipliers(),
        steps: 0,
        converged: false,
        final_residual: 0.0,
        objective: 0.0,
        assembly_s: 0.0,
        factorization_s: 0.0,
        solve_s: 0.0,
        factor_flops: 0,
        solve_flops: 0,
        kkt_stationarity_x: 0.0,
        kkt_stationarity_u: 0.0,
        kkt_primal: 0.0,
        kappa_delta: None,
        kappa_preconditioned: None,
        rho_inner: None,
        rho_outer: None,
    }
}

fn filled_record(inst: &Instance, solver: SolverKind, out: &SolveOutput) -> Record {
    let mut r = base_record(inst, solver);
    r.steps = out.report.steps;
    r.converged = out.report.converged;
    r.final_residual = out.final_residual;
    r.objective = out.solution.objective_value;
    r.assembly_s = out.timings.assembly_s;
    r.factorization_s = out.timings.factorization_s;
    r.solve_s = out.timings.solve_s;
    r.factor_flops = out.factor_flops;
    r.solve_flops = out.report.total_flops();
    r.set_kkt(&out.kkt);
    r
}

/// κ and ρ from the dense oracles; the `(L, S)` preconditioner is rebuilt
/// when the solver did not use one.
fn add_diagnostics(r: &mut Record, sop: &Arc<SchurOperator>, out: &SolveOutput, a: &SolverArgs, guard: usize) {
    if sop.dim() > guard {
        return;
    }
    let owned;
    let pre = match &out.preconditioner {
        Some(p) if p.config().mode == NbjmMode::Preconditioner => Some(p),
        _ => {
            owned = NbjmPreconditioner::new(sop.clone(), NbjmConfig::preconditioner(a.inner_l, a.outer_s)).ok();
            owned.as_ref()
        }
    };
    if let Ok(c) = condition_numbers(sop, pre, guard) {
        r.kappa_delta = Some(c.kappa_delta);
        r.kappa_preconditioned = pre.map(|_| c.kappa_preconditioned);
    }
    if let Ok(s) = splitting_radii(sop, &build_splitting(sop), guard) {
        r.rho_inner = Some(s.inner);
        r.rho_outer = Some(s.outer);
    }
}

fn run(args: &RunArgs) -> Result<(), Failure> {
    let instances = args.problem.instances()?;
    let o = &args.output;
    let choice = args.solver.choice(&args.solver_args);
    let mut rows = Vec::new();
    let mut failures = 0;
    for inst in &instances {
        let result = o.install(|| solve_problem_with(&inst.problem, &choice, o.exec()))?;
        let (mut rec, mut report) = match result {
            Ok(out) => {
                let mut rec = filled_record(inst, args.solver, &out);
                if !args.no_diagnostics {
                    add_diagnostics(&mut rec, &out.schur, &out, &args.solver_args, args.diagnostics_guard);
                }
                (rec, out.report)
            }
            Err(Error::MaxIterationsExceeded(partial)) => {
                let mut rec = base_record(inst, args.solver);
                rec.steps = partial.report.steps;
                rec.final_residual = partial.report.final_residual();
                rec.solve_flops = partial.report.total_flops();
                (rec, partial.report)
            }
            Err(e) => return Err(e.into()),
        };
        if !rec.converged {
            failures += 1;
        }
        if o.omit_timings {
            rec.clear_timings();
            report.wall_time_s = 0.0;
        }
        rows.push(DetailedRecord { record: rec, report });
    }
    let mut w = o.writer()?;
    match o.format {
        Format::Csv => write_csv(&mut w, &rows.iter().map(|r| &r.record).collect::<Vec<_>>())?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, &rows)?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    if failures > 0 {
        return Err(Failure::NotConverged(failures));
    }
    Ok(())
}

fn solve_one(
    inst: &Instance,
    kind: SolverKind,
    a: &SolverArgs,
    o: &OutputArgs,
) -> Result<(SolveReport, f64, f64, f64), Failure> {
    let out = o.install(|| solve_problem_with(&inst.problem, &kind.choice(a), o.exec()))??;
    let solve_s = if o.omit_timings { 0.0 } else { out.timings.solve_s };
    Ok((out.report, solve_s, out.final_residual, out.solution.objective_value))
}

fn compare(args: &CompareArgs) -> Result<(), Failure> {
    let instances = args.problem.instances()?;
    let mut rows = Vec::new();
    for inst in &instances {
        let (ra, ta, fa, oa) = solve_one(inst, args.solver, &args.solver_args, &args.output)?;
        let (rb, tb, fb, ob) = solve_one(inst, args.against, &args.solver_args, &args.output)?;
        let rel = (oa - ob).abs() / oa.abs().max(ob.abs()).max(f64::MIN_POSITIVE);
        let p = &inst.problem;
        rows.push(Comparison {
            case: inst.case.clone(),
            k: p.k,
            n: p.n,
            t: p.t,
            solver_a: args.solver.name().into(),
            solver_b: args.against.name().into(),
            steps_a: ra.steps,
            steps_b: rb.steps,
            steps_diff: ra.steps as i64 - rb.steps as i64,
            solve_s_a: ta,
            solve_s_b: tb,
            final_residual_a: fa,
            final_residual_b: fb,
            objective_a: oa,
            objective_b: ob,
            objective_rel_diff: if oa == ob { 0.0 } else { rel },
        });
    }
    let mut w = args.output.writer()?;
    match args.output.format {
        Format::Csv => write_csv(&mut w, &rows)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, &rows)?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    if let Some(bad) = rows.iter().find(|r| r.objective_rel_diff > 1e-6) {
        return Err(Failure::Mismatch(format!(
            "{} vs {} on {}x{}x{}: relative gap {:e}",
            bad.solver_a, bad.solver_b, bad.k, bad.n, bad.t, bad.objective_rel_diff
        )));
    }
    Ok(())
}

fn generate(args: &GenerateArgs) -> Result<(), Failure> {
    let mut instances = args.problem.instances()?;
    if instances.len() != 1 {
        return Err(Failure::Usage("generate takes a single size".into()));
    }
    let p = instances.remove(0).problem;
    match &args.output {
        Some(path) => save_problem(&p, path)?,
        None => println!("{}", to_json(&p)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Compare(a) => compare(a),
        Command::Generate(a) => generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gridlq: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
