use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ietidp::assembly::{BoundaryKind, Formulation};
use ietidp::harness::{emit_report, run_case_full, scaling_study, CaseConfig, ProblemKind, ReportFormat, SolveReport, StudyKind};
use ietidp::Result;

#[derive(Parser)]
#[command(name = "ietidp", version, about = "cG/dG IETI-DP solves and scaling studies on a simulated distributed runtime")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one case and report iterations, condition estimate, errors and timings.
    Solve {
        #[command(flatten)]
        case: CaseArgs,
        /// Write the message log as JSON lines to this file.
        #[arg(long)]
        message_log: Option<PathBuf>,
    },
    /// Weak scaling: patches grow with the worker count.
    ScaleWeak(StudyArgs),
    /// Strong scaling: fixed problem, growing worker count.
    ScaleStrong(StudyArgs),
    /// Holder study: fixed problem and workers, growing number of coarse holders.
    ScaleHolders(StudyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Form {
    Cg,
    Dg,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Problem {
    Wave,
    Homogeneous,
    Linear,
}

#[derive(Clone, Copy, ValueEnum)]
enum Boundary {
    Dirichlet,
    Neumann,
}

/// Case options; each flag overrides the value from `--config`.
#[derive(Args, Clone)]
struct CaseArgs {
    /// TOML file with case fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    /// Patches per direction, e.g. 4x4 or 2,2,2.
    #[arg(long)]
    patches: Option<String>,
    #[arg(long)]
    degree: Option<usize>,
    /// Elements per patch and direction are 2^refine.
    #[arg(long)]
    refine: Option<u32>,
    #[arg(long, value_enum)]
    form: Option<Form>,
    #[arg(long)]
    delta: Option<f64>,
    /// `default` or e.g. `vertices+edges`.
    #[arg(long)]
    primal: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    holders: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, value_enum)]
    problem: Option<Problem>,
    #[arg(long, value_enum)]
    boundary: Option<Boundary>,
    #[arg(long, value_enum)]
    deterministic: Option<OnOff>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args, Clone)]
struct StudyArgs {
    #[command(flatten)]
    case: CaseArgs,
    /// Worker counts (weak, strong) or holder counts (holders), comma separated.
    #[arg(long, value_delimiter = ',')]
    schedule: Option<Vec<usize>>,
}

fn parse_grid(s: &str) -> Result<Vec<usize>> {
    s.split(['x', ',']).map(|t| t.trim().parse::<usize>().map_err(|_| ietidp::Error::Config(format!("bad patch grid '{s}'")))).collect()
}

impl CaseArgs {
    fn config(&self) -> Result<CaseConfig> {
        let mut c = match &self.config {
            Some(p) => CaseConfig::from_toml(&std::fs::read_to_string(p)?)?,
            None => CaseConfig::default(),
        };
        if let Some(d) = self.dim {
            if d != c.dim && self.patches.is_none() {
                c.patches.clear();
            }
            c.dim = d;
        }
        if let Some(p) = &self.patches {
            c.patches = parse_grid(p)?;
        }
        if let Some(v) = self.degree {
            c.degree = v;
        }
        if let Some(v) = self.refine {
            c.refine = v;
        }
        if let Some(f) = self.form {
            c.formulation = match f {
                Form::Cg => Formulation::Cg,
                Form::Dg => Formulation::Dg,
            };
        }
        if self.delta.is_some() {
            c.delta = self.delta;
        }
        if let Some(p) = &self.primal {
            c.primal = p.clone();
        }
        if let Some(v) = self.workers {
            c.workers = v;
        }
        if let Some(v) = self.holders {
            c.holders = v;
        }
        if let Some(v) = self.tol {
            c.tol = v;
        }
        if let Some(v) = self.max_iter {
            c.max_iter = v;
        }
        if let Some(p) = self.problem {
            c.problem = match p {
                Problem::Wave => ProblemKind::Wave,
                Problem::Homogeneous => ProblemKind::Homogeneous,
                Problem::Linear => ProblemKind::Linear,
            };
        }
        if let Some(b) = self.boundary {
            c.boundary = match b {
                Boundary::Dirichlet => BoundaryKind::Dirichlet,
                Boundary::Neumann => BoundaryKind::Neumann,
            };
        }
        if let Some(d) = self.deterministic {
            c.deterministic = matches!(d, OnOff::On);
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        c.validate()?;
        Ok(c)
    }

    fn emit(&self, reports: &[SolveReport]) -> Result<()> {
        let format = match self.format {
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
        };
        match &self.out {
            Some(p) => ietidp::harness::write_report(reports, format, p),
            None => emit_report(reports, format, std::io::stdout().lock()),
        }
    }
}

fn study(kind: StudyKind, args: &StudyArgs) -> Result<()> {
    let cfg = args.case.config()?;
    let schedule = match (&args.schedule, kind) {
        (Some(s), _) => s.clone(),
        (None, StudyKind::Holders) => {
            let mut s: Vec<usize> = std::iter::successors(Some(1usize), |h| Some(h * 2)).take_while(|&h| h < cfg.workers).collect();
            s.push(cfg.workers);
            s
        }
        (None, _) => vec![1, 2, 4],
    };
    let rep = scaling_study(kind, &cfg, &schedule)?;
    for w in &rep.warnings {
        eprintln!("warning: {w}");
    }
    args.case.emit(&rep.rows)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve { case, message_log } => {
            let cfg = case.config()?;
            let run = run_case_full(&cfg)?;
            if let Some(p) = message_log {
                let mut f = std::io::BufWriter::new(std::fs::File::create(p)?);
                for m in &run.solution.messages {
                    serde_json::to_writer(&mut f, m)?;
                    writeln!(f)?;
                }
                f.flush()?;
            }
            case.emit(&[run.report])
        }
        Command::ScaleWeak(a) => study(StudyKind::Weak, &a),
        Command::ScaleStrong(a) => study(StudyKind::Strong, &a),
        Command::ScaleHolders(a) => study(StudyKind::Holders, &a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
