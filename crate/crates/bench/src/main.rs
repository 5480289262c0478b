use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use saddle_bench::generate::{
    gen_affine_constrained, gen_bilinear, gen_consensus, gen_linear_bilinear, gen_quadratic_spp, AffineParams,
    BilinearParams, ConsensusParams, LinearBilinearParams, SppParams,
};
use saddle_bench::runner::{read_csv, render_report, DEFAULT_MAX_OUTER};
use saddle_bench::{
    reference_solution, run_experiment, run_single, BenchError, ExperimentConfig, Instance, SolverKind, Topology,
};

#[derive(Parser)]
#[command(
    name = "saddle-bench",
    version,
    about = "Benchmarks for accelerated sliding on saddle point problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance (manifest.json plus binary data) into --out
    Gen(GenArgs),
    /// Solve one instance and print its run report as JSON
    Solve(SolveArgs),
    /// Run an (instance x solver x eps) grid and write JSON + CSV results
    Bench(BenchArgs),
    /// Summarize an aggregate results.csv
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Sliding,
    Eg,
    AgdJoint,
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Sliding => SolverKind::Sliding,
            SolverArg::Eg => SolverKind::Eg,
            SolverArg::AgdJoint => SolverKind::AgdJoint,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TopologyArg {
    Path,
    Ring,
    Star,
}

#[derive(Args)]
struct GenArgs {
    #[command(subcommand)]
    kind: GenKind,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value = "instance")]
    out: PathBuf,
    /// Instance id (defaults to `<kind>-<seed>`)
    #[arg(long, global = true)]
    id: Option<String>,
    /// Also write every matrix as CSV
    #[arg(long, global = true)]
    csv: bool,
}

#[derive(Subcommand)]
enum GenKind {
    /// Quadratic SCSC problem with a general coupling term
    QuadraticSpp {
        #[arg(long, default_value_t = 10)]
        dx: usize,
        #[arg(long, default_value_t = 10)]
        dy: usize,
        #[arg(long, default_value_t = 4.0)]
        lp: f64,
        #[arg(long, default_value_t = 4.0)]
        lq: f64,
        #[arg(long, default_value_t = 10.0)]
        lr: f64,
        #[arg(long, default_value_t = 1.0)]
        mu_x: f64,
        #[arg(long, default_value_t = 1.0)]
        mu_y: f64,
    },
    /// Strongly convex composites with a bilinear coupling
    Bilinear {
        #[arg(long, default_value_t = 10)]
        dx: usize,
        #[arg(long, default_value_t = 10)]
        dy: usize,
        #[arg(long, default_value_t = 4.0)]
        lp: f64,
        #[arg(long, default_value_t = 1.0)]
        mu_p: f64,
        #[arg(long, default_value_t = 4.0)]
        lq: f64,
        #[arg(long, default_value_t = 1.0)]
        mu_q: f64,
        #[arg(long, default_value_t = 0.5)]
        sigma_min: f64,
        #[arg(long, default_value_t = 2.0)]
        sigma_max: f64,
    },
    /// Strongly convex objective under linear equality constraints
    AffineConstrained {
        #[arg(long, default_value_t = 10)]
        dx: usize,
        /// Number of constraints
        #[arg(long, default_value_t = 4)]
        m: usize,
        #[arg(long, default_value_t = 4.0)]
        lp: f64,
        #[arg(long, default_value_t = 1.0)]
        mu_p: f64,
        #[arg(long, default_value_t = 0.5)]
        sigma_min: f64,
        #[arg(long, default_value_t = 2.0)]
        sigma_max: f64,
    },
    /// Linear composites with a ridge-covariance coupling (ERM style)
    LinearBilinear {
        #[arg(long, default_value_t = 10)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        ridge: f64,
    },
    /// Decentralized quadratic problem on a graph
    Consensus {
        #[arg(long, default_value_t = 5)]
        nodes: usize,
        #[arg(long, value_enum, default_value_t = TopologyArg::Path)]
        topology: TopologyArg,
        #[arg(long, default_value_t = 1.0)]
        local_mu: f64,
        #[arg(long, default_value_t = 10.0)]
        local_l: f64,
        #[arg(long, default_value_t = 2)]
        local_dim: usize,
    },
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = SolverArg::Sliding)]
    solver: SolverArg,
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_OUTER)]
    max_outer: usize,
    /// Also write the report to DIR/report.json
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment config (JSON); otherwise the grid comes from the flags
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Vec<PathBuf>,
    #[arg(long, value_enum)]
    solver: Vec<SolverArg>,
    #[arg(long)]
    eps: Vec<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    parallel: usize,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding results.csv (or the CSV itself)
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

fn gen(args: GenArgs) -> Result<(), BenchError> {
    let seed = args.seed;
    let mut inst = match args.kind {
        GenKind::QuadraticSpp {
            dx,
            dy,
            lp,
            lq,
            lr,
            mu_x,
            mu_y,
        } => gen_quadratic_spp(
            &SppParams {
                d_x: dx,
                d_y: dy,
                l_p: lp,
                mu_x,
                l_q: lq,
                mu_y,
                l_r: lr,
            },
            seed,
        )?,
        GenKind::Bilinear {
            dx,
            dy,
            lp,
            mu_p,
            lq,
            mu_q,
            sigma_min,
            sigma_max,
        } => gen_bilinear(
            &BilinearParams {
                d_x: dx,
                d_y: dy,
                l_p: lp,
                mu_p,
                l_q: lq,
                mu_q,
                sigma_min,
                sigma_max,
            },
            seed,
        )?,
        GenKind::AffineConstrained {
            dx,
            m,
            lp,
            mu_p,
            sigma_min,
            sigma_max,
        } => gen_affine_constrained(
            &AffineParams {
                d_x: dx,
                m,
                l_p: lp,
                mu_p,
                sigma_min,
                sigma_max,
            },
            seed,
        )?,
        GenKind::LinearBilinear { dim, ridge } => gen_linear_bilinear(&LinearBilinearParams { dim, ridge }, seed)?,
        GenKind::Consensus {
            nodes,
            topology,
            local_mu,
            local_l,
            local_dim,
        } => gen_consensus(
            &ConsensusParams {
                nodes,
                topology: match topology {
                    TopologyArg::Path => Topology::Path,
                    TopologyArg::Ring => Topology::Ring,
                    TopologyArg::Star => Topology::Star,
                },
                local_mu,
                local_l,
                local_dim,
            },
            seed,
        )?,
    };
    if let Some(id) = args.id {
        inst.manifest.id = id;
    }
    let path = inst.write(&args.out, args.csv)?;
    println!("{}", path.display());
    Ok(())
}

fn solve(args: SolveArgs) -> Result<ExitCode, BenchError> {
    let inst = Instance::load(&args.manifest)?;
    let reference = reference_solution(&inst.data)?;
    let report = run_single(&inst, &reference, args.solver.into(), args.eps, args.max_outer)?;
    let text = serde_json::to_string_pretty(&report)?;
    if let Some(dir) = args.out {
        std::fs::create_dir_all(&dir).map_err(BenchError::io(&dir))?;
        let path = dir.join("report.json");
        std::fs::write(&path, &text).map_err(BenchError::io(&path))?;
    }
    println!("{text}");
    Ok(if report.budget_exhausted() {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn bench(args: BenchArgs) -> Result<ExitCode, BenchError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig {
            instances: Vec::new(),
            solvers: Vec::new(),
            eps: Vec::new(),
            max_outer: DEFAULT_MAX_OUTER,
        },
    };
    cfg.instances.extend(args.manifest);
    cfg.solvers.extend(args.solver.into_iter().map(SolverKind::from));
    cfg.eps.extend(args.eps);
    if let Some(k) = args.max_outer {
        cfg.max_outer = k;
    }
    let outcome = run_experiment(&cfg, &args.out, args.parallel.max(1))?;
    eprintln!("{} runs written to {}", outcome.reports.len(), args.out.display());
    if let Some(e) = outcome.failure {
        return Err(e);
    }
    Ok(if outcome.reports.iter().any(|r| r.budget_exhausted()) {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn report(args: ReportArgs) -> Result<(), BenchError> {
    let path = if args.out.is_dir() {
        args.out.join("results.csv")
    } else {
        args.out
    };
    let rows = read_csv(&path)?;
    print!("{}", render_report(&rows));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen(a).map(|_| ExitCode::SUCCESS),
        Command::Solve(a) => solve(a),
        Command::Bench(a) => bench(a),
        Command::Report(a) => report(a).map(|_| ExitCode::SUCCESS),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_budget() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
