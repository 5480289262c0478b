//! Single runs, experiment grids and their JSON / CSV output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use saddle_core::bilinear::{
    solve_affine_constrained, solve_bilinear, solve_bilinear_linear_composites, split_bilinear, BilinearConstants,
    BilinearInstance, GramSpectrum,
};
use saddle_core::problem::{BilinearCoupling, CompositeProblem, IsotropicQuadratic, Quadratic};
use saddle_core::regularization::{plan_cc, RegularizationPlan};
use saddle_core::{
    solve_sliding, tune_parameters, weighted_distance_sq, wrap_counting, CompositeSaddle, Config, CountedOracles,
    Matrix, OracleCounters, Point, QuadraticSaddle, Report, Spec,
};
use serde::{Deserialize, Serialize};

use crate::baselines::{baseline_agd_joint, baseline_extragradient, BaselineRun};
use crate::error::{BenchError, Result};
use crate::instance::{Instance, InstanceData};
use crate::manifest::InstanceKind;
use crate::reference::reference_solution;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Sliding,
    #[serde(alias = "extragradient-baseline")]
    Eg,
    #[serde(alias = "agd-joint-baseline")]
    AgdJoint,
}

impl SolverKind {
    /// Identifier used in reports.
    pub fn id(self) -> &'static str {
        match self {
            SolverKind::Sliding => "sliding",
            SolverKind::Eg => "extragradient-baseline",
            SolverKind::AgdJoint => "agd-joint-baseline",
        }
    }
}

pub const DEFAULT_MAX_OUTER: usize = 100_000;

/// Termination labels beyond the solver's own.
pub const BUDGET_EXHAUSTED: &str = "budget-exhausted";
pub const BUDGET_UNCERTIFIED: &str = "budget-uncertified";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub instance: String,
    pub kind: InstanceKind,
    pub solver: String,
    pub eps: f64,
    /// Calls made by the iteration. In bilinear modes `grad_r` counts
    /// applications of `B` or `B^T`.
    pub counters: OracleCounters,
    /// Calls spent before the iteration (initial bounds).
    pub setup_counters: OracleCounters,
    /// Squared distance to the reference saddle, weighted by the sliding
    /// solver's step sizes `(1/eta_x, 1/eta_y)` for this instance.
    pub dist_weighted: f64,
    pub dist_unweighted: f64,
    /// `||B^T x - c||` for constrained instances.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint_residual: Option<f64>,
    pub wall_ms: f64,
    pub termination: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer_budget: Option<usize>,
    /// Outer steps whose auxiliary solve stopped at the rounding floor
    /// instead of meeting the acceptance test.
    #[serde(default)]
    pub stalled_inner_steps: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl RunReport {
    /// The run stopped on an iteration cap without certifying its target.
    pub fn budget_exhausted(&self) -> bool {
        self.termination == BUDGET_EXHAUSTED || self.termination == BUDGET_UNCERTIFIED
    }
}

pub const CSV_HEADER: &str = "instance,solver,eps,calls_grad_p,calls_grad_q,calls_grad_R,outer_iters,inner_iters,dist_weighted,dist_unweighted,wall_ms,termination";

pub fn csv_row(r: &RunReport) -> String {
    let c = &r.counters;
    format!(
        "{},{},{:e},{},{},{},{},{},{:e},{:e},{:.3},{}",
        r.instance,
        r.solver,
        r.eps,
        c.grad_p,
        c.grad_q,
        c.grad_r,
        c.outer_iterations,
        c.inner_iterations,
        r.dist_weighted,
        r.dist_unweighted,
        r.wall_ms,
        r.termination
    )
}

pub fn to_csv(reports: &[RunReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        let _ = writeln!(out, "{}", csv_row(r));
    }
    out
}

fn dense(m: &nalgebra::DMatrix<f64>) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn vec_of(v: &DVector<f64>) -> Vec<f64> {
    v.as_slice().to_vec()
}

fn quadratic(h: &nalgebra::DMatrix<f64>, g: &DVector<f64>) -> Result<Quadratic<f64>> {
    Ok(Quadratic::new(dense(h), vec_of(g))?)
}

/// `p(x) + R(x, y) - q(y)` of a quadratic instance, with the moduli in `R`.
pub fn spp_problem(d: &InstanceData) -> Result<QuadraticSaddle> {
    Ok(CompositeProblem::new(
        quadratic(&d.p, &d.a)?,
        quadratic(&d.q, &d.c)?,
        BilinearCoupling::new(dense(&d.b), d.mu_x, d.mu_y),
    )?)
}

/// Outcome of one solver call before distances are attached.
struct Raw {
    point: Point,
    counters: OracleCounters,
    setup: OracleCounters,
    termination: String,
    outer_budget: Option<usize>,
    stalled: usize,
    spec: Spec,
}

fn from_report(report: Report, spec: Spec) -> Raw {
    Raw {
        termination: report.termination.label().to_string(),
        outer_budget: Some(report.outer_budget),
        stalled: report.records.iter().filter(|r| r.inner_stalled).count(),
        counters: report.counters,
        setup: report.setup_counters,
        point: report.final_pair,
        spec,
    }
}

fn from_baseline(run: BaselineRun, spec: Spec) -> Raw {
    Raw {
        termination: if run.exhausted {
            BUDGET_EXHAUSTED
        } else {
            "residual-met"
        }
        .to_string(),
        outer_budget: None,
        stalled: 0,
        counters: run.counters,
        setup: OracleCounters::default(),
        point: run.final_pair,
        spec,
    }
}

fn baseline<P>(problem: &P, spec: Spec, solver: SolverKind, eps: f64, max_iter: usize) -> Result<Raw>
where
    P: CompositeSaddle<f64> + CountedOracles,
{
    let start = Point::zeros(problem.dim_x(), problem.dim_y());
    let run = match solver {
        SolverKind::Eg => baseline_extragradient(problem, &spec, &start, eps, max_iter)?,
        SolverKind::AgdJoint => baseline_agd_joint(problem, &spec, &start, eps, max_iter)?,
        SolverKind::Sliding => unreachable!("sliding handled by the caller"),
    };
    Ok(from_baseline(run, spec))
}

fn need(inst: &Instance, name: &str, v: Option<f64>) -> Result<f64> {
    v.ok_or_else(|| BenchError::Unsupported(format!("instance {} lacks {name}", inst.manifest.id)))
}

fn spectrum(inst: &Instance) -> Result<GramSpectrum<f64>> {
    let k = &inst.manifest.constants;
    Ok(GramSpectrum {
        lambda_max: need(inst, "lambda_max", k.lambda_max)?,
        lambda_min: need(inst, "lambda_min", k.lambda_min)?,
        matvecs: 0,
    })
}

fn execute(inst: &Instance, reference: &Point, solver: SolverKind, eps: f64, max_outer: usize) -> Result<Raw> {
    let d = &inst.data;
    let k = &inst.manifest.constants;
    let (dx, dy) = d.dims();
    let mut cfg = Config::new(eps);
    cfg.max_outer = max_outer;
    match inst.manifest.kind {
        InstanceKind::QuadraticSpp => {
            let spec = Spec::new(
                need(inst, "l_p", k.l_p)?,
                need(inst, "l_q", k.l_q)?,
                need(inst, "l_r", k.l_r)?,
                d.mu_x,
                d.mu_y,
            );
            let problem = spp_problem(d)?;
            let counted = wrap_counting(&problem);
            if solver == SolverKind::Sliding {
                cfg.known_solution = Some(reference.clone());
                let report = solve_sliding(&counted, &spec, &Point::zeros(dx, dy), &cfg)?;
                return Ok(from_report(report, spec));
            }
            baseline(&counted, spec, solver, eps, max_outer)
        }
        InstanceKind::Bilinear => {
            let constants = BilinearConstants {
                l_p: need(inst, "l_p", k.l_p)?,
                mu_p: need(inst, "mu_p", k.mu_p)?,
                l_q: need(inst, "l_q", k.l_q)?,
                mu_q: need(inst, "mu_q", k.mu_q)?,
                lambda_max: need(inst, "lambda_max", k.lambda_max)?,
                lambda_min: need(inst, "lambda_min", k.lambda_min)?,
            };
            let bp = BilinearInstance::new(quadratic(&d.p, &d.a)?, quadratic(&d.q, &d.c)?, dense(&d.b), constants)?;
            let (split, spec) = split_bilinear(&bp)?;
            if solver == SolverKind::Sliding {
                cfg.known_solution = Some(reference.clone());
                let report = solve_bilinear(&bp, &Point::zeros(dx, dy), &cfg)?;
                return Ok(from_report(report, spec));
            }
            baseline(&split, spec, solver, eps, max_outer)
        }
        InstanceKind::AffineConstrained | InstanceKind::Consensus => {
            let l_p = need(inst, "l_p", k.l_p)?;
            let mu_p = need(inst, "mu_p", k.mu_p)?;
            let d_y = need(inst, "d_y_bound", k.d_y_bound)?;
            let gram = spectrum(inst)?;
            let plan = RegularizationPlan::affine_constrained(eps, d_y)?;
            let mu_q = 2.0 * plan.coeff_y;
            let constants = BilinearConstants {
                l_p,
                mu_p,
                l_q: mu_q,
                mu_q,
                lambda_max: gram.lambda_max,
                lambda_min: gram.lambda_min,
            };
            let bp = BilinearInstance::new(
                quadratic(&d.p, &d.a)?,
                IsotropicQuadratic::new(vec_of(&d.c), plan.coeff_y),
                dense(&d.b),
                constants,
            )?;
            let (split, spec) = split_bilinear(&bp)?;
            if solver == SolverKind::Sliding {
                let out = solve_affine_constrained(
                    quadratic(&d.p, &d.a)?,
                    l_p,
                    mu_p,
                    dense(&d.b),
                    vec_of(&d.c),
                    d_y,
                    eps,
                    Some(gram),
                    &cfg,
                )?;
                return Ok(from_report(out.report, spec));
            }
            baseline(&split, spec, solver, plan.inner_target, max_outer)
        }
        InstanceKind::LinearBilinear => {
            let d_xb = need(inst, "d_x_bound", k.d_x_bound)?;
            let d_yb = need(inst, "d_y_bound", k.d_y_bound)?;
            let gram = spectrum(inst)?;
            let plan = plan_cc(eps, d_xb, d_yb)?;
            let (mu_p, mu_q) = (2.0 * plan.coeff_x, 2.0 * plan.coeff_y);
            let constants = BilinearConstants {
                l_p: mu_p,
                mu_p,
                l_q: mu_q,
                mu_q,
                lambda_max: gram.lambda_max,
                lambda_min: gram.lambda_min,
            };
            let bp = BilinearInstance::new(
                IsotropicQuadratic::new(vec_of(&d.a), plan.coeff_x),
                IsotropicQuadratic::new(vec_of(&d.c), plan.coeff_y),
                dense(&d.b),
                constants,
            )?;
            let (split, spec) = split_bilinear(&bp)?;
            if solver == SolverKind::Sliding {
                let out = solve_bilinear_linear_composites(
                    vec_of(&d.a),
                    vec_of(&d.c),
                    dense(&d.b),
                    d_xb,
                    d_yb,
                    eps,
                    Some(gram),
                    &cfg,
                )?;
                return Ok(from_report(out.report, spec));
            }
            baseline(&split, spec, solver, plan.inner_target, max_outer)
        }
    }
}

/// Runs one solver on one instance. Distances are measured against
/// `reference` (the KKT solution of the instance).
pub fn run_single(
    inst: &Instance,
    reference: &Point,
    solver: SolverKind,
    eps: f64,
    max_outer: usize,
) -> Result<RunReport> {
    let t0 = Instant::now();
    let raw = execute(inst, reference, solver, eps, max_outer)?;
    let wall_ms = t0.elapsed().as_secs_f64() * 1e3;
    let tuning = tune_parameters(&raw.spec)?;
    let dist_weighted = weighted_distance_sq(&raw.point, reference, tuning.eta_x, tuning.eta_y)?;
    let dist_unweighted = saddle_core::problem::dist_sq_pair(&raw.point, reference)?;
    let constraint_residual = matches!(
        inst.manifest.kind,
        InstanceKind::AffineConstrained | InstanceKind::Consensus
    )
    .then(|| {
        let x = DVector::from_column_slice(&raw.point.x);
        (inst.data.b.transpose() * x - &inst.data.c).norm()
    });
    Ok(RunReport {
        instance: inst.manifest.id.clone(),
        kind: inst.manifest.kind,
        solver: solver.id().to_string(),
        eps,
        counters: raw.counters,
        setup_counters: raw.setup,
        dist_weighted,
        dist_unweighted,
        constraint_residual,
        wall_ms,
        termination: raw.termination,
        outer_budget: raw.outer_budget,
        stalled_inner_steps: raw.stalled,
        x: raw.point.x,
        y: raw.point.y,
    })
}

/// Grid of runs: every instance against every solver and tolerance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Manifest paths, relative to the config file.
    pub instances: Vec<PathBuf>,
    pub solvers: Vec<SolverKind>,
    pub eps: Vec<f64>,
    #[serde(default = "default_max_outer")]
    pub max_outer: usize,
}

fn default_max_outer() -> usize {
    DEFAULT_MAX_OUTER
}

impl ExperimentConfig {
    /// Reads a config and resolves its manifest paths against its directory.
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = fs::read_to_string(path).map_err(BenchError::io(path))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| BenchError::Manifest {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for p in &mut cfg.instances {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Outcome of [`run_experiment`]: reports in grid order and the first error
/// (if any run failed outright).
pub struct ExperimentOutcome {
    pub reports: Vec<RunReport>,
    pub failure: Option<BenchError>,
}

/// Loads all instances, runs the grid (on up to `parallel` threads), then
/// writes `runs/NNNN-<instance>-<solver>-<eps>.json` and `results.csv` into
/// `out` from a single thread, in grid order.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, parallel: usize) -> Result<ExperimentOutcome> {
    let mut loaded = Vec::with_capacity(cfg.instances.len());
    for path in &cfg.instances {
        let inst = Instance::load(path)?;
        let reference = reference_solution(&inst.data)?;
        loaded.push((inst, reference));
    }
    let mut grid = Vec::new();
    for (i, _) in loaded.iter().enumerate() {
        for &solver in &cfg.solvers {
            for &eps in &cfg.eps {
                grid.push((i, solver, eps));
            }
        }
    }
    let job = |&(i, solver, eps): &(usize, SolverKind, f64)| {
        let (inst, reference) = &loaded[i];
        run_single(inst, reference, solver, eps, cfg.max_outer)
    };
    let results: Vec<Result<RunReport>> = if parallel > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallel)
            .build()
            .map_err(|e| BenchError::Unsupported(format!("thread pool: {e}")))?;
        pool.install(|| grid.par_iter().map(job).collect())
    } else {
        grid.iter().map(job).collect()
    };

    let runs = out.join("runs");
    fs::create_dir_all(&runs).map_err(BenchError::io(&runs))?;
    let mut reports = Vec::new();
    let mut failure = None;
    for (idx, r) in results.into_iter().enumerate() {
        match r {
            Ok(rep) => {
                let name = format!("{idx:04}-{}-{}-{:e}.json", rep.instance, rep.solver, rep.eps);
                let path = runs.join(name);
                let text = serde_json::to_string_pretty(&rep)?;
                fs::write(&path, text).map_err(BenchError::io(&path))?;
                reports.push(rep);
            }
            Err(e) => {
                failure.get_or_insert(e);
            }
        }
    }
    let csv = out.join("results.csv");
    fs::write(&csv, to_csv(&reports)).map_err(BenchError::io(&csv))?;
    Ok(ExperimentOutcome { reports, failure })
}

/// Parses an aggregate CSV back into rows of named fields.
pub fn read_csv(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).map_err(BenchError::io(path))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(BenchError::Manifest {
                path: path.to_path_buf(),
                reason: format!("unexpected CSV header {other:?}"),
            })
        }
    }
    Ok(lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect())
}

/// Human-readable table of an aggregate CSV.
pub fn render_report(rows: &[Vec<String>]) -> String {
    let header: Vec<String> = CSV_HEADER.split(',').map(str::to_string).collect();
    let shown = [0usize, 1, 2, 3, 4, 5, 8, 9, 11];
    let mut width = vec![0usize; header.len()];
    for r in std::iter::once(&header).chain(rows) {
        for &j in &shown {
            width[j] = width[j].max(r.get(j).map_or(0, |s| s.len()));
        }
    }
    let mut out = String::new();
    for r in std::iter::once(&header).chain(rows) {
        let cells: Vec<String> = shown
            .iter()
            .map(|&j| format!("{:<w$}", r.get(j).map_or("", |s| s.as_str()), w = width[j]))
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}
