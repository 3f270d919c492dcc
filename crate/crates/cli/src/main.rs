use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use indc_imex::assembly::{analyze, assemble, emit};
use indc_imex::exact;
use indc_imex::harness::{
    preset, reports_to_csv, run_study, ConvergenceReport, HarnessError, ProblemSpec, Reference, SchemeSpec,
    StudySpec, PRESETS,
};
use indc_imex::quadrature::QuadratureSet;
use indc_imex::tableau::{builtin_catalog, format_tableau, lookup, TextFormat};
use thiserror::Error;

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("writing {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("config {path}: {source}")]
    Config { path: PathBuf, source: serde_json::Error },
    #[error("unknown problem {0:?}; expected vdp, burgers, linear_relaxation or nonlinear_relaxation")]
    UnknownProblem(String),
    #[error("unknown base scheme {0:?}")]
    UnknownBase(String),
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Parser)]
#[command(name = "indc-imex", version, about = "IMEX Runge-Kutta and InDC convergence studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TableauFormat {
    Rational,
    Decimal,
}

impl From<TableauFormat> for TextFormat {
    fn from(f: TableauFormat) -> Self {
        match f {
            TableauFormat::Rational => TextFormat::Rational,
            TableauFormat::Decimal => TextFormat::Decimal,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a convergence study from a preset or a JSON config.
    Study {
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        preset: Option<String>,
        /// JSON file holding one study spec or an array of them.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Use the original ladders and ε sweeps of the presets.
        #[arg(long)]
        full: bool,
        /// Override the ε list of every study (comma separated).
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
        format: ReportFormat,
    },
    /// Integrate one problem at one step size and report the error.
    Run {
        #[arg(long)]
        problem: String,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        scheme: String,
        #[arg(long, default_value_t = 1)]
        nodes: usize,
        #[arg(long, default_value_t = 0)]
        corrections: usize,
        #[arg(long)]
        dt: f64,
        #[arg(long)]
        tfinal: f64,
        /// Grid cells for PDE problems.
        #[arg(long)]
        cells: Option<usize>,
        /// Step with the assembled tableau instead of the correction loop.
        #[arg(long)]
        assembled: bool,
    },
    /// Inspect catalog and assembled tableaus.
    Tableau {
        #[command(subcommand)]
        command: TableauCommand,
    },
    /// Print the integration matrices for M uniform nodes as exact rationals.
    Quadrature {
        #[arg(long)]
        nodes: usize,
    },
}

#[derive(Debug, Subcommand)]
enum TableauCommand {
    /// List the catalog.
    List,
    /// Print one catalog tableau.
    Show {
        name: String,
        #[arg(long, value_enum, default_value_t = TableauFormat::Rational)]
        format: TableauFormat,
    },
    /// Assemble InDC(base, M, K) into one double tableau.
    Assemble {
        #[arg(long)]
        base: String,
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        corrections: usize,
        #[arg(long, value_enum, default_value_t = TableauFormat::Rational)]
        format: TableauFormat,
    },
}

fn canonical_base(name: &str) -> Result<String, CliError> {
    lookup(name).map(|t| t.name).ok_or_else(|| CliError::UnknownBase(name.into()))
}

fn load_config(path: &PathBuf) -> Result<Vec<StudySpec>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.clone(),
        source,
    })?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|source| CliError::Config {
        path: path.clone(),
        source,
    })?;
    let parsed = if value.is_array() {
        serde_json::from_value(value)
    } else {
        serde_json::from_value(value).map(|s| vec![s])
    };
    parsed.map_err(|source| CliError::Config {
        path: path.clone(),
        source,
    })
}

fn emit_reports(reports: &[ConvergenceReport], format: ReportFormat) -> Result<String, CliError> {
    Ok(match format {
        ReportFormat::Csv => reports_to_csv(reports)?,
        ReportFormat::Json => serde_json::to_string_pretty(reports).map_err(HarnessError::from)? + "\n",
    })
}

fn write_output(out: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Write {
            path: path.clone(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn summarize(r: &ConvergenceReport) {
    let failed = r.cells.iter().filter(|c| c.failure.is_some()).count();
    eprintln!("{} {}: {} cells, {failed} failed", r.problem, r.scheme, r.cells.len());
    for s in &r.slopes {
        if let Some(f) = s.fit {
            eprintln!("  eps {:.3e}: slope {:.2} over {} points", s.eps, f.slope, f.points);
        }
    }
}

/// Returns whether every cell succeeded.
fn study(
    preset_name: Option<String>,
    config: Option<PathBuf>,
    full: bool,
    eps: Option<Vec<f64>>,
    out: Option<PathBuf>,
    format: ReportFormat,
) -> Result<bool, CliError> {
    let mut specs = match (preset_name, config) {
        (Some(name), _) => preset(&name, full).map_err(|e| match e {
            HarnessError::UnknownPreset(p) => CliError::Other(format!("unknown preset {p:?}; available: {}", PRESETS.join(", "))),
            e => e.into(),
        })?,
        (None, Some(path)) => load_config(&path)?,
        (None, None) => return Err(CliError::Other("--preset or --config is required".into())),
    };
    if let Some(eps) = eps {
        for s in &mut specs {
            s.eps = eps.clone();
        }
    }
    let mut reports = Vec::with_capacity(specs.len());
    for spec in &specs {
        let r = run_study(spec)?;
        summarize(&r);
        reports.push(r);
    }
    write_output(out.as_ref(), &emit_reports(&reports, format)?)?;
    Ok(reports.iter().all(|r| !r.failed()))
}

#[allow(clippy::too_many_arguments)]
fn run(
    problem: &str,
    eps: f64,
    scheme: &str,
    nodes: usize,
    corrections: usize,
    dt: f64,
    tfinal: f64,
    cells: Option<usize>,
    assembled: bool,
) -> Result<bool, CliError> {
    let mut problem = ProblemSpec::from_key(problem).ok_or_else(|| CliError::UnknownProblem(problem.into()))?;
    if let Some(n) = cells {
        match &mut problem {
            ProblemSpec::Vdp => return Err(CliError::Other("--cells applies to PDE problems only".into())),
            ProblemSpec::Burgers { cells, .. }
            | ProblemSpec::LinearRelaxation { cells, .. }
            | ProblemSpec::NonlinearRelaxation { cells } => *cells = n,
        }
    }
    let mut scheme = SchemeSpec::new(&canonical_base(scheme)?, nodes, corrections);
    scheme.assembled = assembled;
    let spec = StudySpec {
        name: "run".into(),
        problem,
        scheme,
        dts: vec![dt],
        eps: vec![eps],
        t_final: tfinal,
        norm: None,
        reference: Reference::Auto,
        component: None,
    };
    let r = run_study(&spec)?;
    let c = &r.cells[0];
    println!("problem {}", r.problem);
    println!("scheme {}", r.scheme);
    println!("eps {}", c.eps);
    println!("dt {}", c.dt);
    match (&c.failure, c.error) {
        (Some(m), _) => println!("failure {m}"),
        (None, Some(e)) => {
            println!("error {e:e}");
            for (name, v) in &c.components {
                println!("error_{name} {v:e}");
            }
        }
        (None, None) => {}
    }
    println!("newton_iters {}", c.work.newton_iters);
    println!("rhs_evals {}", c.work.rhs_evals);
    Ok(c.failure.is_none())
}

fn tableau(cmd: TableauCommand) -> Result<(), CliError> {
    match cmd {
        TableauCommand::List => {
            for t in builtin_catalog() {
                println!("{} order {} stages {}", t.name, t.order, t.stages());
            }
        }
        TableauCommand::Show { name, format } => {
            let t = lookup(&name).ok_or_else(|| CliError::UnknownBase(name.clone()))?;
            print!("{}", format_tableau(&t, format.into()));
        }
        TableauCommand::Assemble {
            base,
            nodes,
            corrections,
            format,
        } => {
            let t = lookup(&base).ok_or_else(|| CliError::UnknownBase(base.clone()))?;
            let a = assemble(&t, nodes, corrections).map_err(|e| CliError::Other(e.to_string()))?;
            print!("{}", emit(&a, format.into()));
            let r = analyze(&a);
            println!("# type {:?}", r.kind);
            println!("# gsa {}", r.gsa);
            println!("# implicit_invertible {}", r.implicit_invertible);
            println!("# det_identity {}", r.det_identity_holds);
        }
    }
    Ok(())
}

fn quadrature(m: usize) -> Result<(), CliError> {
    let qs = QuadratureSet::build(m).map_err(|e| CliError::Other(e.to_string()))?;
    let rows = |name: &str, mat: &[Vec<exact::Rational>]| {
        println!("{name}");
        for r in mat {
            println!("{}", r.iter().map(exact::format).collect::<Vec<_>>().join(" "));
        }
    };
    rows("S_sub", qs.s_sub_exact());
    rows("S_cum", qs.s_cum_exact());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Study {
            preset,
            config,
            full,
            eps,
            out,
            format,
        } => study(preset, config, full, eps, out, format),
        Command::Run {
            problem,
            eps,
            scheme,
            nodes,
            corrections,
            dt,
            tfinal,
            cells,
            assembled,
        } => run(&problem, eps, &scheme, nodes, corrections, dt, tfinal, cells, assembled),
        Command::Tableau { command } => tableau(command).map(|_| true),
        Command::Quadrature { nodes } => quadrature(nodes).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more cells failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn base_names_are_canonicalized() {
        assert_eq!(canonical_base("imex1-ars").unwrap(), "IMEX1-GSA-ARS");
        assert!(matches!(canonical_base("rk4"), Err(CliError::UnknownBase(_))));
    }

    #[test]
    fn run_arguments_parse() {
        let cli = Cli::try_parse_from([
            "indc-imex", "run", "--problem", "vdp", "--eps", "1e-6", "--scheme", "imex1-ars", "--nodes", "7",
            "--corrections", "3", "--dt", "1e-3", "--tfinal", "0.5",
        ])
        .unwrap();
        assert!(matches!(cli.command, Command::Run { nodes: 7, corrections: 3, .. }));
    }

    #[test]
    fn study_needs_a_source() {
        assert!(Cli::try_parse_from(["indc-imex", "study"]).is_err());
        assert!(Cli::try_parse_from(["indc-imex", "study", "--preset", "fig5", "--config", "x.json"]).is_err());
    }
}
