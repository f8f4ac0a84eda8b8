//! `examtt`: solve, batch-run, validate, generate and inspect Toronto-format
//! exam timetabling instances.
//!
//! Exit codes: 0 success, 1 infeasible solution, 2 usage error or missing
//! file, 3 parse error or empty manifest, 4 construction ran out of slots.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use deluge_core::acceptance::{
    AcceptanceParams, Variant, DEFAULT_BETA, DEFAULT_B_MAX, DEFAULT_B_MIN, DEFAULT_DELTA, DEFAULT_FLEX_COEFFICIENT,
    DEFAULT_REHEAT_LIFT, DEFAULT_WAIT_FRACTION,
};
use deluge_core::batch::{
    load_toronto, run_batch, BatchConfig, BatchFailure, LoadError, Manifest, ManifestError, TableMetric,
};
use deluge_core::driver::{run_hh, write_run_log, RunConfig, RunError, DEFAULT_MAX_ITERATIONS};
use deluge_core::instance::{generate_instance, instance_stats, GeneratorParams, ProblemInstance};
use deluge_core::solution::{check_assignment, evaluate_cost, parse_solution, write_solution, BalanceCap};
use deluge_core::suite::write_generated_suite;

const EXIT_INFEASIBLE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_PARSE: u8 = 3;
const EXIT_SLOTS_EXHAUSTED: u8 = 4;

#[derive(Parser)]
#[command(
    name = "examtt",
    version,
    about = "Exam timetabling with a reinforcement-learning hyper-heuristic and great deluge acceptance"
)]
struct Cli {
    /// Suppress parse warnings and progress output.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and write the solution and run log.
    Solve(SolveArgs),
    /// Run every variant over a manifest of instances with replicated seeds.
    Batch(BatchArgs),
    /// Check a solution file against an instance.
    Validate(ValidateArgs),
    /// Write a random instance (or the generated benchmark suite).
    Generate(GenerateArgs),
    /// Print instance statistics.
    Stats(InstanceArgs),
}

#[derive(Args)]
struct InstanceArgs {
    /// Course file: one `id enrollment` line per exam.
    #[arg(long)]
    crs: PathBuf,
    /// Student file: one line of exam ids per student.
    #[arg(long)]
    stu: PathBuf,
    /// Number of timeslots.
    #[arg(short = 'k', long = "timeslots", value_parser = clap::value_parser!(u64).range(1..))]
    timeslots: u64,
    /// Seats available per timeslot; unlimited when omitted.
    #[arg(long)]
    slot_capacity: Option<u64>,
    /// Instance name; defaults to the course file stem.
    #[arg(long)]
    name: Option<String>,
}

impl InstanceArgs {
    fn name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.crs
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "instance".into())
        })
    }
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Iteration budget per run [reference setting: 1000].
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    iterations: usize,
    /// Seed of the run (base seed for batches).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Flex deluge coefficient k_f in [0, 1] [reference setting: 0.5].
    #[arg(long, default_value_t = DEFAULT_FLEX_COEFFICIENT)]
    kf: f64,
    /// Extended deluge reheat wait, percent of the iteration budget [reference setting: 25].
    #[arg(long, default_value_t = DEFAULT_WAIT_FRACTION * 100.0)]
    wait_pct: f64,
    /// Extended deluge reheat lift above the incumbent [default 0.1].
    #[arg(long, default_value_t = DEFAULT_REHEAT_LIFT)]
    reheat_lift: f64,
    /// Non-linear deluge additive term beta [reference setting: 0].
    #[arg(long, default_value_t = DEFAULT_BETA)]
    beta: f64,
    /// Non-linear deluge lower draw bound B_min [reference setting: 100000].
    #[arg(long, default_value_t = DEFAULT_B_MIN)]
    bmin: f64,
    /// Non-linear deluge upper draw bound B_max [reference setting: 300000].
    #[arg(long, default_value_t = DEFAULT_B_MAX)]
    bmax: f64,
    /// Non-linear deluge decay rate delta [reference setting: 5e-10].
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    /// Exams per slot during construction: `auto` (ceil(n/k)+1), `none`, or a number.
    #[arg(long, default_value = "auto", value_parser = parse_balance_cap)]
    balance_cap: BalanceCap,
    /// Non-linear deluge compares against the previous candidate even after a rejection.
    #[arg(long)]
    nlgd_literal_reference: bool,
}

impl RunArgs {
    fn config(&self, variant: Variant) -> RunConfig {
        RunConfig {
            variant,
            max_iterations: self.iterations,
            seed: self.seed,
            acceptance: AcceptanceParams {
                kf: self.kf,
                wait_fraction: self.wait_pct / 100.0,
                reheat_lift: self.reheat_lift,
                beta: self.beta,
                b_min: self.bmin,
                b_max: self.bmax,
                delta: self.delta,
            },
            balance_cap: self.balance_cap,
            literal_nlgd_reference: self.nlgd_literal_reference,
            ..RunConfig::default()
        }
    }
}

fn parse_balance_cap(s: &str) -> Result<BalanceCap, String> {
    match s {
        "auto" => Ok(BalanceCap::Auto),
        "none" | "off" => Ok(BalanceCap::Disabled),
        n => match n.parse::<usize>() {
            Ok(0) | Err(_) => Err(format!("expected `auto`, `none` or a positive integer, got {n:?}")),
            Ok(cap) => Ok(BalanceCap::Fixed(cap)),
        },
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Acceptance criterion.
    #[arg(long, default_value = "egd")]
    variant: Variant,
    #[command(flatten)]
    run: RunArgs,
    /// Directory for the solution file and run log.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct BatchArgs {
    /// Manifest with one `name crs stu k [slot_capacity]` line per instance.
    #[arg(long)]
    manifest: PathBuf,
    /// Comma-separated acceptance criteria.
    #[arg(long, value_delimiter = ',', default_value = "egd,fd,nlgd")]
    variants: Vec<Variant>,
    /// Replicates per instance and variant [reference setting: 10].
    #[arg(long, default_value_t = 10)]
    replicates: usize,
    #[command(flatten)]
    run: RunArgs,
    /// Concurrent runs.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: u64,
    /// Directory for the raw CSV, summary JSON and comparison tables.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Solution file of `exam slot` lines.
    #[arg(long)]
    solution: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    /// Write the 18-instance generated suite and its manifest instead.
    #[arg(long)]
    suite: bool,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    exams: u64,
    #[arg(long, default_value_t = 400, value_parser = clap::value_parser!(u64).range(1..))]
    students: u64,
    /// Fewest exams taken by a student.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    min_per_student: u64,
    /// Most exams taken by a student.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    max_per_student: u64,
    /// Timeslots recorded in the suite manifest.
    #[arg(short = 'k', long = "timeslots", default_value_t = 30, value_parser = clap::value_parser!(u64).range(1..))]
    timeslots: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "generated")]
    name: String,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

/// A failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        let code = if matches!(e, LoadError::Io { .. }) {
            EXIT_USAGE
        } else {
            EXIT_PARSE
        };
        Failure::new(code, e.to_string())
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        let code = match e {
            RunError::Construction(_) => EXIT_SLOTS_EXHAUSTED,
            _ => EXIT_USAGE,
        };
        Failure::new(code, e.to_string())
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::new(EXIT_USAGE, format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| io_failure(path, e))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))
}

fn load_instance(args: &InstanceArgs, quiet: bool) -> Result<ProblemInstance, Failure> {
    let (inst, warnings) = load_toronto(
        &args.name(),
        &args.crs,
        &args.stu,
        args.timeslots as usize,
        args.slot_capacity,
    )?;
    if !quiet {
        for w in &warnings {
            eprintln!("warning: {}: {w}", inst.name());
        }
    }
    Ok(inst)
}

fn solve(args: &SolveArgs, quiet: bool) -> Result<u8, Failure> {
    let inst = load_instance(&args.instance, quiet)?;
    let cfg = args.run.config(args.variant);
    let run = run_hh(&inst, &cfg)?;
    create_dir(&args.out_dir)?;
    let stem = format!("{}.{}", inst.name(), args.variant.as_str());
    let sol_path = args.out_dir.join(format!("{stem}.sol"));
    write_file(&sol_path, write_solution(&run.best))?;
    let log_path = args.out_dir.join(format!("{stem}.log.csv"));
    let file = fs::File::create(&log_path).map_err(|e| io_failure(&log_path, e))?;
    write_run_log(&run.trace, std::io::BufWriter::new(file)).map_err(|e| io_failure(&log_path, e))?;

    let report = run.best.check_feasibility(&inst);
    println!(
        "{} {} best_cost={:.6} initial_cost={:.6} iterations_to_best={} time_ms={:.1}",
        inst.name(),
        args.variant.method_name(),
        run.best_cost.value(),
        run.initial_cost.value(),
        run.iteration_of_best,
        run.wall_time.as_secs_f64() * 1000.0
    );
    if report.feasible {
        Ok(0)
    } else {
        eprintln!("{report}");
        Ok(EXIT_INFEASIBLE)
    }
}

fn batch(args: &BatchArgs, quiet: bool) -> Result<u8, Failure> {
    let manifest = Manifest::load(&args.manifest).map_err(|e| match e {
        ManifestError::Io { .. } => Failure::new(EXIT_USAGE, e.to_string()),
        _ => Failure::new(EXIT_PARSE, e.to_string()),
    })?;
    if args.variants.is_empty() {
        return Err(Failure::new(EXIT_USAGE, "no variants given"));
    }
    let mut instances = Vec::new();
    let mut load_failures = Vec::new();
    for entry in &manifest.entries {
        match entry.load() {
            Ok((inst, warnings)) => {
                if !quiet {
                    for w in &warnings {
                        eprintln!("warning: {}: {w}", entry.name);
                    }
                }
                instances.push(inst);
            }
            Err(e) => {
                eprintln!("skipping {}: {e}", entry.name);
                load_failures.push(BatchFailure {
                    instance: entry.name.clone(),
                    variant: None,
                    replicate: None,
                    error: e.to_string(),
                });
            }
        }
    }

    let cfg = BatchConfig {
        variants: args.variants.clone(),
        replicates: args.replicates,
        run: args.run.config(args.variants[0]),
        jobs: args.jobs as usize,
    };
    cfg.run
        .validate()
        .map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    let mut report = run_batch(&instances, &cfg);
    for f in &report.failures {
        eprintln!(
            "run failed: {} {} replicate {}: {}",
            f.instance,
            f.variant.map(|v| v.method_name()).unwrap_or_default(),
            f.replicate.map(|r| r.to_string()).unwrap_or_default(),
            f.error
        );
    }
    load_failures.append(&mut report.failures);
    report.failures = load_failures;

    create_dir(&args.out_dir)?;
    let raw = args.out_dir.join("raw.csv");
    let mut buf = Vec::new();
    report.write_raw_csv(&mut buf).map_err(|e| io_failure(&raw, e))?;
    write_file(&raw, buf)?;
    let json = report
        .summary_json()
        .map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    write_file(&args.out_dir.join("summary.json"), json)?;
    for (metric, file) in [
        (TableMetric::LowestBest, "lowest_best_cost.csv"),
        (TableMetric::AverageBest, "average_best_cost.csv"),
    ] {
        let path = args.out_dir.join(file);
        let mut buf = Vec::new();
        report
            .write_table_csv(metric, &mut buf)
            .map_err(|e| io_failure(&path, e))?;
        write_file(&path, buf)?;
    }

    println!("lowest best cost ({} runs per cell)", args.replicates);
    print!("{}", report.render_table(TableMetric::LowestBest));
    println!("average best cost");
    print!("{}", report.render_table(TableMetric::AverageBest));
    Ok(0)
}

fn validate(args: &ValidateArgs, quiet: bool) -> Result<u8, Failure> {
    let inst = load_instance(&args.instance, quiet)?;
    let text = fs::read_to_string(&args.solution).map_err(|e| io_failure(&args.solution, e))?;
    let slots = parse_solution(&inst, &text)
        .map_err(|e| Failure::new(EXIT_PARSE, format!("{}: {e}", args.solution.display())))?;
    let report = check_assignment(&inst, &slots);
    println!("{report}");
    if report.hc3_ok && report.hc4_unassigned == 0 {
        let assignment: Vec<Option<usize>> = slots.iter().map(|s| s.first().copied()).collect();
        if let Ok(cost) = evaluate_cost(&inst, &assignment) {
            println!(
                "cost={} penalty={} students={}",
                cost.value(),
                cost.penalty,
                cost.students
            );
        }
    }
    Ok(if report.feasible { 0 } else { EXIT_INFEASIBLE })
}

fn generate(args: &GenerateArgs) -> Result<u8, Failure> {
    if args.suite {
        let manifest = write_generated_suite(&args.out_dir).map_err(|e| io_failure(&args.out_dir, e))?;
        println!("{}", manifest.display());
        return Ok(0);
    }
    let params = GeneratorParams {
        num_exams: args.exams as usize,
        num_students: args.students as usize,
        exams_per_student: args.min_per_student as usize..=args.max_per_student as usize,
        num_timeslots: args.timeslots as usize,
        seed: args.seed,
    };
    let inst = generate_instance(args.name.clone(), &params).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    create_dir(&args.out_dir)?;
    let (crs, stu) = inst.to_toronto();
    let crs_path = args.out_dir.join(format!("{}.crs", args.name));
    let stu_path = args.out_dir.join(format!("{}.stu", args.name));
    write_file(&crs_path, crs)?;
    write_file(&stu_path, stu)?;
    println!("{} {}", crs_path.display(), stu_path.display());
    Ok(0)
}

fn stats(args: &InstanceArgs, quiet: bool) -> Result<u8, Failure> {
    let inst = load_instance(args, quiet)?;
    let s = instance_stats(&inst);
    println!(
        "{} exams={} students={} timeslots={} registrations={} conflict_density={:.4}",
        s.name, s.num_exams, s.num_students, s.num_timeslots, s.registrations, s.conflict_density
    );
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => solve(a, cli.quiet),
        Command::Batch(a) => batch(a, cli.quiet),
        Command::Validate(a) => validate(a, cli.quiet),
        Command::Generate(a) => generate(a),
        Command::Stats(a) => stats(a, cli.quiet),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
