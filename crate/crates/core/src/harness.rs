//! Convergence studies over (Δt, ε) grids: integration of every cell, error
//! norms against exact or self-convergence references, observed orders,
//! uniform-order fits and CSV/JSON reports.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::assemble;
use crate::indc::IndcScheme;
use crate::problems::{
    burgers, linear_relaxation, nonlinear_relaxation, van_der_pol, Benchmark, Grid1D, ProblemError,
};
use crate::stepper::{step_count, StepState, Stepper, Work};
use crate::tableau::{lookup, ImexTableau};

/// Errors at or below this are treated as exact and give no order.
pub const ORDER_NOISE: f64 = 1e-15;
/// Errors below this are left out of slope fits.
pub const FIT_FLOOR: f64 = 1e-13;
/// Environment variable holding the worker count for studies.
pub const WORKERS_ENV: &str = "INDC_IMEX_WORKERS";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid study: {0}")]
    InvalidSpec(String),
    #[error("unknown base scheme {0:?}")]
    UnknownBase(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Benchmark problem and its discretization parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    /// Van der Pol oscillator; the study ε is the stiffness parameter.
    Vdp,
    /// Viscous Burgers on the periodic interval [0, 2]; ε is ignored.
    Burgers { cells: usize, reynolds: f64 },
    /// Linear relaxation on the periodic interval [0, 2].
    LinearRelaxation { cells: usize, b: f64 },
    /// Nonlinear relaxation on the periodic interval [0, 1].
    NonlinearRelaxation { cells: usize },
}

impl ProblemSpec {
    pub fn key(&self) -> &'static str {
        match self {
            ProblemSpec::Vdp => "vdp",
            ProblemSpec::Burgers { .. } => "burgers",
            ProblemSpec::LinearRelaxation { .. } => "linear_relaxation",
            ProblemSpec::NonlinearRelaxation { .. } => "nonlinear_relaxation",
        }
    }

    /// Default parameters for a problem key.
    pub fn from_key(key: &str) -> Option<Self> {
        Some(match key {
            "vdp" | "van_der_pol" => ProblemSpec::Vdp,
            "burgers" => ProblemSpec::Burgers { cells: 192, reynolds: 0.1 },
            "linear_relaxation" | "linear" => ProblemSpec::LinearRelaxation { cells: 100, b: 0.5 },
            "nonlinear_relaxation" | "nonlinear" => ProblemSpec::NonlinearRelaxation { cells: 100 },
            _ => return None,
        })
    }

    pub fn build(&self, eps: f64) -> Result<Box<dyn Benchmark>, ProblemError> {
        Ok(match *self {
            ProblemSpec::Vdp => Box::new(van_der_pol(eps)?),
            ProblemSpec::Burgers { cells, reynolds } => Box::new(burgers(Grid1D::new(cells, 0.0, 2.0)?, reynolds)?),
            ProblemSpec::LinearRelaxation { cells, b } => {
                Box::new(linear_relaxation(Grid1D::new(cells, 0.0, 2.0)?, b, eps)?)
            }
            ProblemSpec::NonlinearRelaxation { cells } => {
                Box::new(nonlinear_relaxation(Grid1D::new(cells, 0.0, 1.0)?, eps)?)
            }
        })
    }

    fn is_ode(&self) -> bool {
        matches!(self, ProblemSpec::Vdp)
    }
}

/// Base tableau, node count and correction count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub base: String,
    pub nodes: usize,
    pub corrections: usize,
    /// Integrate with the assembled tableau instead of the sweep loop.
    #[serde(default)]
    pub assembled: bool,
}

impl SchemeSpec {
    pub fn new(base: &str, nodes: usize, corrections: usize) -> Self {
        SchemeSpec {
            base: base.into(),
            nodes,
            corrections,
            assembled: false,
        }
    }

    pub fn label(&self) -> String {
        format!("InDC-{}-{}-{}", self.base, self.nodes, self.corrections)
    }

    fn resolve(&self) -> Result<Integrator, HarnessError> {
        let base = lookup(&self.base).ok_or_else(|| HarnessError::UnknownBase(self.base.clone()))?;
        if self.assembled {
            let a = assemble(&base, self.nodes, self.corrections)
                .map_err(|e| HarnessError::InvalidSpec(e.to_string()))?;
            Ok(Integrator::Assembled(a.tableau))
        } else {
            let s = IndcScheme::new(base, self.nodes, self.corrections)
                .map_err(|e| HarnessError::InvalidSpec(e.to_string()))?;
            Ok(Integrator::Loop(s))
        }
    }
}

#[allow(clippy::large_enum_variant)]
enum Integrator {
    Loop(IndcScheme),
    Assembled(ImexTableau),
}

impl Integrator {
    /// Integrates to `t_final`, stopping at the first inadmissible state.
    fn run(&self, p: &dyn Benchmark, t_final: f64, dt: f64) -> Result<(Vec<f64>, Work), String> {
        let steps = step_count(0.0, t_final, dt).map_err(|e| e.to_string())?;
        let mut stepper = Stepper::default();
        let mut state = StepState::new(0.0, p.initial_state());
        for i in 0..steps {
            state = match self {
                Integrator::Loop(s) => s.step(&mut stepper, p, &state, dt).map_err(|e| e.to_string()),
                Integrator::Assembled(t) => stepper.step(t, p, &state, dt).map_err(|e| e.to_string()),
            }
            .map_err(|e| format!("step {i}: {e}"))?;
            state.t = (i + 1) as f64 * dt;
            p.admissible(&state.u).map_err(|e| format!("step {i}: {e}"))?;
        }
        Ok((state.u, state.work))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    Max,
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// Exact solution when the problem has one, else self-convergence.
    #[default]
    Auto,
    Exact,
    /// Error at Δt is the difference between the solutions at Δt and Δt/2.
    SelfConvergence,
}

/// One convergence study: a problem, a scheme, a Δt ladder and an ε list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySpec {
    pub name: String,
    pub problem: ProblemSpec,
    pub scheme: SchemeSpec,
    pub dts: Vec<f64>,
    pub eps: Vec<f64>,
    pub t_final: f64,
    /// Defaults to max norm for ODEs and grid L¹ for PDEs.
    #[serde(default)]
    pub norm: Option<Norm>,
    #[serde(default)]
    pub reference: Reference,
    /// Component reported as `error`; `"max"` takes the largest. Defaults to
    /// `"max"` for ODEs and the first component for PDEs.
    #[serde(default)]
    pub component: Option<String>,
}

impl StudySpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidSpec(m));
        if self.dts.is_empty() {
            return bad("empty Δt ladder".into());
        }
        if self.eps.is_empty() {
            return bad("empty ε list".into());
        }
        if !(self.t_final >= 0.0) {
            return bad(format!("final time {}", self.t_final));
        }
        for w in self.dts.windows(2) {
            if ((w[0] / w[1]) - 2.0).abs() > 1e-9 {
                return bad(format!("Δt ladder is not dyadic at {} → {}", w[0], w[1]));
            }
        }
        for &dt in &self.dts {
            step_count(0.0, self.t_final, dt).map_err(|e| HarnessError::InvalidSpec(e.to_string()))?;
        }
        if self.eps.iter().any(|e| !(*e >= 0.0)) {
            return bad("ε must be non-negative".into());
        }
        lookup(&self.scheme.base).ok_or_else(|| HarnessError::UnknownBase(self.scheme.base.clone()))?;
        Ok(())
    }

    pub fn norm(&self) -> Norm {
        self.norm.unwrap_or(if self.problem.is_ode() { Norm::Max } else { Norm::L1 })
    }

    fn selected_component(&self, names: &[String]) -> String {
        match &self.component {
            Some(c) => c.clone(),
            None if self.problem.is_ode() => "max".into(),
            None => names[0].clone(),
        }
    }

    fn problem_label(&self) -> String {
        match &self.component {
            Some(c) => format!("{}:{}", self.problem.key(), c),
            None => self.problem.key().into(),
        }
    }
}

/// Result of one (ε, Δt) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub eps: f64,
    pub dt: f64,
    pub error: Option<f64>,
    /// Error of every component in the study norm.
    pub components: Vec<(String, f64)>,
    /// Order against the next coarser Δt at the same ε.
    pub order: Option<f64>,
    pub work: Work,
    pub failure: Option<String>,
}

/// Least-squares slope of log error against log Δt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub slope: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub eps: f64,
    pub fit: Option<Fit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildInfo {
    pub package: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub spec: StudySpec,
    pub build: BuildInfo,
}

/// Cells ordered by ε then Δt, both descending, plus per-ε slope fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub metadata: Metadata,
    pub problem: String,
    pub scheme: String,
    pub base: String,
    pub m: usize,
    pub k: usize,
    pub cells: Vec<Cell>,
    pub slopes: Vec<SlopeFit>,
}

impl ConvergenceReport {
    pub fn failed(&self) -> bool {
        self.cells.iter().any(|c| c.failure.is_some())
    }

    /// Cells of one ε, Δt descending.
    pub fn row(&self, eps: f64) -> Vec<&Cell> {
        self.cells.iter().filter(|c| c.eps == eps).collect()
    }

    /// Distinct ε values, descending.
    pub fn eps_values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = Vec::new();
        for c in &self.cells {
            if !v.contains(&c.eps) {
                v.push(c.eps);
            }
        }
        v
    }

    /// Distinct Δt values, descending.
    pub fn dt_values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = Vec::new();
        for c in &self.cells {
            if !v.contains(&c.dt) {
                v.push(c.dt);
            }
        }
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }
}

/// log₂(E_h / E_{h/2}); `None` when either error is at the noise floor.
pub fn observed_order(e_h: f64, e_half: f64) -> Option<f64> {
    if e_h <= ORDER_NOISE || e_half <= ORDER_NOISE {
        return None;
    }
    Some((e_h / e_half).log2())
}

/// Least-squares slope of log y against log x.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<Fit> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(Fit {
        slope: sxy / sxx,
        points: points.len(),
    })
}

/// Slope over the leading rungs before the error floor: points (Δt, error)
/// with Δt descending are taken until the first local order below 2, and
/// errors under [`FIT_FLOOR`] end the run.
pub fn prefloor_fit(points: &[(f64, f64)]) -> Option<Fit> {
    let mut run: Vec<(f64, f64)> = Vec::new();
    for &(dt, e) in points {
        if e < FIT_FLOOR {
            break;
        }
        if let Some(&(_, last)) = run.last() {
            if observed_order(last, e).is_none_or(|o| o < 2.0) {
                break;
            }
        }
        run.push((dt, e));
    }
    fit_slope(&run)
}

fn norm_of(norm: Norm, diff: impl Iterator<Item = f64>, width: Option<f64>) -> f64 {
    let w = width.unwrap_or(1.0);
    match norm {
        Norm::Max => diff.fold(0.0, |m, d| m.max(d.abs())),
        Norm::L1 => w * diff.map(f64::abs).sum::<f64>(),
        Norm::L2 => (w * diff.map(|d| d * d).sum::<f64>()).sqrt(),
    }
}

fn component_errors(p: &dyn Benchmark, norm: Norm, u: &[f64], reference: &[f64]) -> Vec<(String, f64)> {
    p.components()
        .into_iter()
        .map(|(name, r)| {
            let e = norm_of(norm, r.clone().map(|i| u[i] - reference[i]), p.cell_width());
            (name, e)
        })
        .collect()
}

fn pick(errors: &[(String, f64)], which: &str) -> Option<f64> {
    if which == "max" {
        return errors.iter().map(|e| e.1).reduce(f64::max);
    }
    errors.iter().find(|e| e.0 == which).map(|e| e.1)
}

type Solve = Result<(Vec<f64>, Work), String>;

fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|n: &usize| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every cell of a study. Cell failures are recorded, not returned.
pub fn run_study(spec: &StudySpec) -> Result<ConvergenceReport, HarnessError> {
    spec.validate()?;
    let integrator = spec.scheme.resolve()?;
    let mut eps = spec.eps.clone();
    eps.sort_by(|a, b| b.total_cmp(a));
    eps.dedup();
    let problems = eps
        .iter()
        .map(|&e| spec.problem.build(e))
        .collect::<Result<Vec<_>, _>>()?;
    let names: Vec<String> = problems[0].components().into_iter().map(|c| c.0).collect();
    let which = spec.selected_component(&names);
    if which != "max" && !names.contains(&which) {
        return Err(HarnessError::InvalidSpec(format!("no component {which:?}; have {names:?}")));
    }
    let exact = match spec.reference {
        Reference::SelfConvergence => false,
        Reference::Exact | Reference::Auto => {
            let available = problems.iter().all(|p| p.reference_solution(0.0).is_some());
            if !available && spec.reference == Reference::Exact {
                return Err(HarnessError::InvalidSpec(format!(
                    "{} has no exact reference",
                    spec.problem.key()
                )));
            }
            available
        }
    };
    let mut dts = spec.dts.clone();
    if !exact {
        dts.push(dts[dts.len() - 1] / 2.0);
    }
    let jobs: Vec<(usize, usize)> = (0..eps.len()).flat_map(|i| (0..dts.len()).map(move |j| (i, j))).collect();
    let run = || -> Vec<Solve> {
        jobs.par_iter()
            .map(|&(i, j)| integrator.run(problems[i].as_ref(), spec.t_final, dts[j]))
            .collect()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| HarnessError::InvalidSpec(e.to_string()))?;
    let solves = pool.install(run);
    let references: Vec<Option<Vec<f64>>> = if exact {
        pool.install(|| problems.par_iter().map(|p| p.reference_solution(spec.t_final)).collect())
    } else {
        vec![None; eps.len()]
    };

    let norm = spec.norm();
    let mut cells = Vec::new();
    let mut slopes = Vec::new();
    for (i, &e) in eps.iter().enumerate() {
        let p = problems[i].as_ref();
        let row = &solves[i * dts.len()..(i + 1) * dts.len()];
        let mut prev: Option<f64> = None;
        let mut fit_points = Vec::new();
        for (j, &dt) in spec.dts.iter().enumerate() {
            let mut cell = Cell {
                eps: e,
                dt,
                error: None,
                components: Vec::new(),
                order: None,
                work: Work::default(),
                failure: None,
            };
            let reference: Result<&[f64], String> = match (&references[i], &row.get(j + 1)) {
                (Some(r), _) => Ok(r),
                (None, Some(Ok((u, _)))) => Ok(u),
                (None, Some(Err(m))) => Err(format!("reference at Δt/2 failed: {m}")),
                (None, None) => unreachable!("self-convergence ladder is extended"),
            };
            match (&row[j], reference) {
                (Ok((u, work)), Ok(r)) => {
                    cell.work = *work;
                    cell.components = component_errors(p, norm, u, r);
                    cell.error = pick(&cell.components, &which);
                }
                (Ok((_, work)), Err(m)) => {
                    cell.work = *work;
                    cell.failure = Some(m);
                }
                (Err(m), _) => cell.failure = Some(m.clone()),
            }
            if let (Some(a), Some(b)) = (prev, cell.error) {
                cell.order = observed_order(a, b);
            }
            prev = cell.error;
            if let Some(err) = cell.error.filter(|e| *e >= FIT_FLOOR) {
                fit_points.push((dt, err));
            }
            cells.push(cell);
        }
        slopes.push(SlopeFit {
            eps: e,
            fit: fit_slope(&fit_points),
        });
    }
    Ok(ConvergenceReport {
        metadata: Metadata {
            spec: spec.clone(),
            build: BuildInfo {
                package: env!("CARGO_PKG_NAME").into(),
                version: env!("CARGO_PKG_VERSION").into(),
            },
        },
        problem: spec.problem_label(),
        scheme: spec.scheme.label(),
        base: spec.scheme.base.clone(),
        m: spec.scheme.nodes,
        k: spec.scheme.corrections,
        cells,
        slopes,
    })
}

/// Worst case over ε at one Δt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    pub dt: f64,
    pub eps_star: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformOrder {
    pub worst: Vec<WorstCase>,
    pub slope_max_err: Fit,
    pub slope_eps_star: Fit,
    /// 2r/(r+1) and (r−1)/(r+1).
    pub theory: (f64, f64),
}

/// Uniform-order fit from a Δt × ε error table; `errors[i][j]` belongs to
/// `dts[i]` and `eps[j]`.
pub fn uniform_order_from_table(
    dts: &[f64],
    eps: &[f64],
    errors: &[Vec<Option<f64>>],
    r: u32,
) -> Result<UniformOrder, HarnessError> {
    if eps.len() < 2 {
        return Err(HarnessError::InsufficientData(format!("{} ε values", eps.len())));
    }
    let mut worst = Vec::new();
    for (i, &dt) in dts.iter().enumerate() {
        let best = errors[i]
            .iter()
            .enumerate()
            .filter_map(|(j, e)| e.map(|e| (j, e)))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((j, e)) = best.filter(|b| b.1 >= FIT_FLOOR) {
            worst.push(WorstCase {
                dt,
                eps_star: eps[j],
                error: e,
            });
        }
    }
    if worst.len() < 4 {
        return Err(HarnessError::InsufficientData(format!(
            "{} Δt values with data; need 4",
            worst.len()
        )));
    }
    let e: Vec<(f64, f64)> = worst.iter().map(|w| (w.dt, w.error)).collect();
    let s: Vec<(f64, f64)> = worst.iter().filter(|w| w.eps_star > 0.0).map(|w| (w.dt, w.eps_star)).collect();
    let none = || HarnessError::InsufficientData("degenerate fit".into());
    let r = r as f64;
    Ok(UniformOrder {
        slope_max_err: fit_slope(&e).ok_or_else(none)?,
        slope_eps_star: fit_slope(&s).ok_or_else(none)?,
        worst,
        theory: (2.0 * r / (r + 1.0), (r - 1.0) / (r + 1.0)),
    })
}

/// Uniform-order fit of a study for a scheme of classical order `r`.
pub fn uniform_order_analysis(report: &ConvergenceReport, r: u32) -> Result<UniformOrder, HarnessError> {
    let dts = report.dt_values();
    let eps = report.eps_values();
    let errors: Vec<Vec<Option<f64>>> = dts
        .iter()
        .map(|&dt| {
            eps.iter()
                .map(|&e| report.cells.iter().find(|c| c.dt == dt && c.eps == e).and_then(|c| c.error))
                .collect()
        })
        .collect();
    uniform_order_from_table(&dts, &eps, &errors, r)
}

pub const CSV_COLUMNS: [&str; 11] = [
    "problem",
    "scheme",
    "base",
    "M",
    "K",
    "eps",
    "dt",
    "error",
    "order",
    "newton_iters",
    "rhs_evals",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV rows of several reports under one header.
pub fn reports_to_csv(reports: &[ConvergenceReport]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS)?;
    for r in reports {
        for c in &r.cells {
            w.write_record([
                r.problem.clone(),
                r.scheme.clone(),
                r.base.clone(),
                r.m.to_string(),
                r.k.to_string(),
                c.eps.to_string(),
                c.dt.to_string(),
                opt(c.error),
                opt(c.order),
                c.work.newton_iters.to_string(),
                c.work.rhs_evals.to_string(),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

impl ConvergenceReport {
    pub fn to_csv(&self) -> Result<String, HarnessError> {
        reports_to_csv(std::slice::from_ref(self))
    }

    pub fn to_json(&self) -> Result<String, HarnessError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// ε values log-spaced in [10⁻⁸, 1].
pub fn eps_sweep(points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![1.0];
    }
    (0..points)
        .map(|i| 10f64.powf(-8.0 * i as f64 / (points - 1) as f64))
        .collect()
}

/// `t_final / 2^j` for j in `from..=to`.
pub fn ladder(t_final: f64, from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|j| t_final / 2f64.powi(j)).collect()
}

pub const PRESETS: [&str; 6] = ["fig1", "fig2", "fig5", "fig6", "table2", "table3"];

/// Bundled studies. Desk scale by default; `full` uses the original ladders
/// and ε sweeps.
pub fn preset(name: &str, full: bool) -> Result<Vec<StudySpec>, HarnessError> {
    let study = |problem: ProblemSpec, scheme: SchemeSpec, dts: Vec<f64>, eps: Vec<f64>, t: f64| StudySpec {
        name: name.into(),
        problem,
        scheme,
        dts,
        eps,
        t_final: t,
        norm: None,
        reference: Reference::Auto,
        component: None,
    };
    let vdp = |schemes: &[(&str, usize, usize)]| -> Vec<StudySpec> {
        let deepest = if full { 10 } else { 7 };
        schemes
            .iter()
            .flat_map(|&(b, m, k)| {
                ["y", "z"].map(|c| StudySpec {
                    component: Some(c.into()),
                    ..study(ProblemSpec::Vdp, SchemeSpec::new(b, m, k), ladder(0.5, 1, deepest), vec![1e-6], 0.5)
                })
            })
            .collect()
    };
    let sweep = eps_sweep(if full { 25 } else { 9 });
    let relaxation_schemes = [
        ("IMEX1-GSA-ARS", 2, 1),
        ("IMEX1-GSA-ARS", 3, 2),
        ("IMEX1-GSA-ARS", 4, 3),
        ("IMEX2-ARS", 4, 0),
        ("IMEX2-ARS", 4, 1),
    ];
    Ok(match name {
        "fig1" => vdp(&[("IMEX1-NGSA-A", 5, 3), ("IMEX1-GSA-ARS", 7, 3), ("IMEX1-GSA-A", 7, 3)]),
        "fig2" => vdp(&[("IMEX2-ARS", 5, 1), ("IMEX2-ARS", 7, 2), ("IMEX2-CK", 5, 1), ("IMEX3-ARS", 7, 1)]),
        "fig5" => relaxation_schemes
            .iter()
            .map(|&(b, m, k)| {
                study(
                    ProblemSpec::LinearRelaxation { cells: 100, b: 0.5 },
                    SchemeSpec::new(b, m, k),
                    ladder(0.2, 4, if full { 7 } else { 5 }),
                    sweep.clone(),
                    0.2,
                )
            })
            .collect(),
        "fig6" => relaxation_schemes
            .iter()
            .map(|&(b, m, k)| {
                study(
                    ProblemSpec::NonlinearRelaxation { cells: 100 },
                    SchemeSpec::new(b, m, k),
                    ladder(0.1, 3, if full { 7 } else { 6 }),
                    eps_sweep(25),
                    0.1,
                )
            })
            .collect(),
        "table2" => [("IMEX1-GSA-ARS", 2, 1), ("IMEX1-GSA-ARS", 3, 2)]
            .iter()
            .map(|&(b, m, k)| {
                study(
                    ProblemSpec::Burgers { cells: 192, reynolds: 0.1 },
                    SchemeSpec::new(b, m, k),
                    ladder(1.0 / 48.0, 1, if full { 6 } else { 4 }),
                    vec![0.0],
                    1.0 / 48.0,
                )
            })
            .collect(),
        "table3" => vec![study(
            ProblemSpec::Burgers { cells: 192, reynolds: 0.1 },
            SchemeSpec::new("IMEX2-ARS", 4, 1),
            ladder(1.0 / 48.0, 0, if full { 5 } else { 3 }),
            vec![0.0],
            1.0 / 48.0,
        )],
        other => return Err(HarnessError::UnknownPreset(other.into())),
    })
}

/// Synthetic error model min((h/ε)^r, εh + h^r) with an interior worst case
/// at ε* = h^((r−1)/(r+1)).
pub fn synthetic_error(h: f64, eps: f64, r: u32) -> f64 {
    let r = r as i32;
    ((h / eps).powi(r)).min(eps * h + h.powi(r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vdp_spec(dts: Vec<f64>, eps: Vec<f64>, t: f64) -> StudySpec {
        StudySpec {
            name: "t".into(),
            problem: ProblemSpec::Vdp,
            scheme: SchemeSpec::new("IMEX1-GSA-ARS", 2, 1),
            dts,
            eps,
            t_final: t,
            norm: None,
            reference: Reference::Auto,
            component: None,
        }
    }

    #[test]
    fn observed_order_examples() {
        assert!((observed_order(4e-4, 1e-4).unwrap() - 2.0).abs() < 1e-12);
        assert!((observed_order(7.6079e-4, 2.7095e-5).unwrap() - 4.811).abs() < 5e-4);
        assert_eq!(observed_order(3e-6, 3e-6), Some(0.0));
        assert_eq!(observed_order(1e-16, 1e-4), None);
        assert_eq!(observed_order(1e-4, 0.0), None);
    }

    #[test]
    fn fit_slope_recovers_power_law() {
        let pts: Vec<(f64, f64)> = (0..5).map(|j| (0.5f64.powi(j), 3.0 * 0.5f64.powi(3 * j))).collect();
        let f = fit_slope(&pts).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-12);
        assert_eq!(f.points, 5);
        assert!(fit_slope(&pts[..1]).is_none());
    }

    #[test]
    fn prefloor_fit_stops_at_floor() {
        let pts = [(0.1, 1e-4), (0.05, 6.25e-6), (0.025, 3.9e-7), (0.0125, 3e-7), (0.00625, 1e-7)];
        let f = prefloor_fit(&pts).unwrap();
        assert_eq!(f.points, 3);
        assert!((f.slope - 4.0).abs() < 0.01);
        assert!(prefloor_fit(&[(0.1, 1e-14), (0.05, 1e-15)]).is_none());
    }

    #[test]
    fn ladder_and_sweep() {
        assert_eq!(ladder(0.5, 1, 3), vec![0.25, 0.125, 0.0625]);
        let s = eps_sweep(25);
        assert_eq!(s.len(), 25);
        assert_eq!(s[0], 1.0);
        assert!((s[24] - 1e-8).abs() < 1e-20);
        assert!(s.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn validation_rejects_bad_ladders() {
        assert!(vdp_spec(vec![0.1, 0.07], vec![1.0], 0.7).validate().is_err());
        assert!(vdp_spec(vec![0.3], vec![1.0], 0.5).validate().is_err());
        assert!(vdp_spec(vec![], vec![1.0], 0.5).validate().is_err());
        assert!(vdp_spec(vec![0.1, 0.05], vec![1.0], 0.5).validate().is_ok());
    }

    #[test]
    fn zero_time_study_has_zero_errors() {
        let r = run_study(&vdp_spec(vec![0.1, 0.05], vec![1.0, 1e-3], 0.0)).unwrap();
        assert_eq!(r.cells.len(), 4);
        assert!(r.cells.iter().all(|c| c.error == Some(0.0) && c.order.is_none()));
    }

    #[test]
    fn study_grid_shape_and_ordering() {
        let r = run_study(&vdp_spec(vec![0.1, 0.05, 0.025], vec![1e-3, 1.0, 1e-1], 0.2)).unwrap();
        assert!(!r.failed());
        assert_eq!(r.eps_values(), vec![1.0, 1e-1, 1e-3]);
        assert_eq!(r.dt_values(), vec![0.1, 0.05, 0.025]);
        let csv = r.to_csv().unwrap();
        assert_eq!(csv.lines().count(), 10);
        assert_eq!(csv.lines().next().unwrap(), CSV_COLUMNS.join(","));
        assert!(r.cells.iter().all(|c| c.error.unwrap() > 0.0));
        assert_eq!(r.slopes.len(), 3);
    }

    #[test]
    fn empty_report_is_header_only() {
        assert_eq!(reports_to_csv(&[]).unwrap(), format!("{}\n", CSV_COLUMNS.join(",")));
    }

    #[test]
    fn json_round_trip_is_identical() {
        let r = run_study(&vdp_spec(vec![0.1, 0.05], vec![1e-2], 0.2)).unwrap();
        let text = r.to_json().unwrap();
        let back = ConvergenceReport::from_json(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn identical_specs_give_identical_csv() {
        let spec = vdp_spec(vec![0.1, 0.05], vec![1.0, 1e-4], 0.2);
        assert_eq!(run_study(&spec).unwrap().to_csv().unwrap(), run_study(&spec).unwrap().to_csv().unwrap());
    }

    #[test]
    fn unknown_base_and_component_are_errors() {
        let mut spec = vdp_spec(vec![0.1], vec![1.0], 0.2);
        spec.component = Some("q".into());
        assert!(matches!(run_study(&spec), Err(HarnessError::InvalidSpec(_))));
        spec.component = None;
        spec.scheme.base = "nope".into();
        assert!(run_study(&spec).is_err());
        assert!(matches!(preset("fig9", false), Err(HarnessError::UnknownPreset(_))));
    }

    #[test]
    fn presets_are_valid() {
        for name in PRESETS {
            for full in [false, true] {
                let specs = preset(name, full).unwrap();
                assert!(!specs.is_empty());
                for s in specs {
                    s.validate().unwrap();
                    s.scheme.resolve().unwrap();
                }
            }
        }
    }

    fn synthetic_table(r: u32, dts: &[f64], eps: &[f64]) -> Vec<Vec<Option<f64>>> {
        dts.iter().map(|&h| eps.iter().map(|&e| Some(synthetic_error(h, e, r))).collect()).collect()
    }

    #[test]
    fn synthetic_model_hits_theory() {
        let dts = ladder(0.1, 3, 8);
        let eps: Vec<f64> = (0..=1600).map(|i| 10f64.powf(-8.0 * i as f64 / 1600.0)).collect();
        for r in 2..=4 {
            let u = uniform_order_from_table(&dts, &eps, &synthetic_table(r, &dts, &eps), r).unwrap();
            assert!((u.slope_max_err.slope - u.theory.0).abs() < 0.05, "r={r} {:?}", u.slope_max_err);
            assert!((u.slope_eps_star.slope - u.theory.1).abs() < 0.05, "r={r} {:?}", u.slope_eps_star);
        }
    }

    #[test]
    fn additive_model_has_boundary_worst_case() {
        let dts = ladder(0.1, 3, 8);
        let eps = eps_sweep(25);
        let table: Vec<Vec<Option<f64>>> = dts
            .iter()
            .map(|&h| eps.iter().map(|&e| Some((h / e).powi(4) + e * h)).collect())
            .collect();
        let u = uniform_order_from_table(&dts, &eps, &table, 4).unwrap();
        assert!(u.worst.iter().all(|w| w.eps_star == 1e-8 || (w.eps_star - 1e-8).abs() < 1e-20));
        assert!((u.slope_max_err.slope - 4.0).abs() < 1e-6);
    }

    #[test]
    fn uniform_order_needs_enough_data() {
        let dts = ladder(0.1, 3, 5);
        let eps = eps_sweep(5);
        let t = synthetic_table(2, &dts, &eps);
        assert!(matches!(uniform_order_from_table(&dts, &eps, &t, 2), Err(HarnessError::InsufficientData(_))));
        let one = vec![1.0];
        let t1: Vec<Vec<Option<f64>>> = (0..3).map(|_| vec![Some(1e-3)]).collect();
        assert!(matches!(uniform_order_from_table(&dts, &one, &t1, 2), Err(HarnessError::InsufficientData(_))));
    }
}
