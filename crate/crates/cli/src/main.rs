use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use opspace_cli::{
    render_text, run_check, run_recover, CheckKind, CheckOptions, CliError, CliResult, Loaded, RecoverKind,
    RecoverOptions, ReportFile, SpaceFile, EXIT_INPUT,
};
use opspace_core::funcspace::{CATALOG_NAMES, DEFAULT_SAMPLES};

#[derive(Parser)]
#[command(name = "opspace", version, about = "Certify unitaries, operator systems and C*-algebra structure of operator spaces")]
struct Cli {
    /// Root seed for every random stream.
    #[arg(long, env = "OPSPACE_SEED", global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Source {
    /// Space file (JSON).
    #[arg(long, conflicts_with = "catalog", required_unless_present = "catalog")]
    space: Option<String>,
    /// Built-in example instead of a file.
    #[arg(long)]
    catalog: Option<String>,
    /// Sample points for catalog function spaces.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a certificate check.
    Check {
        kind: CheckKind,
        #[command(flatten)]
        src: Source,
        /// Coefficients of the element, JSON or comma-separated.
        #[arg(long)]
        element: Option<String>,
        #[arg(long)]
        level: Option<usize>,
        /// Comma-separated t values for the operator-system test.
        #[arg(long, value_delimiter = ',')]
        t_grid: Option<Vec<f64>>,
        #[arg(long)]
        tol: Option<f64>,
        /// Write the structured report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recover the involution or the ternary product.
    Recover {
        kind: RecoverKind,
        #[command(flatten)]
        src: Source,
        #[arg(long)]
        x: Option<String>,
        #[arg(long)]
        v: Option<String>,
        #[arg(long)]
        y: Option<String>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Built-in examples.
    Catalog {
        #[command(subcommand)]
        action: CatalogCmd,
    },
}

#[derive(Subcommand)]
enum CatalogCmd {
    List,
    /// Print a catalog example as a space file.
    Emit {
        name: String,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(src: &Source, seed: Option<u64>) -> CliResult<Loaded> {
    let file = match (&src.space, &src.catalog) {
        (Some(path), _) => SpaceFile::read(path)?,
        (None, Some(name)) => SpaceFile::from_catalog(name, src.samples)?,
        (None, None) => return Err(CliError::Input("one of --space or --catalog is required".into())),
    };
    let mut loaded = file.load()?;
    if let Some(s) = seed {
        loaded.config.seed = s;
    }
    Ok(loaded)
}

fn finish(report: ReportFile, out: Option<PathBuf>) -> CliResult<i32> {
    print!("{}", render_text(&report));
    if let Some(path) = out {
        std::fs::write(&path, report.to_json())
            .map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    }
    Ok(report.exit_code())
}

fn run(cli: Cli) -> CliResult<i32> {
    let command: Vec<String> = std::env::args().skip(1).collect();
    match cli.cmd {
        Cmd::Check { kind, src, element, level, t_grid, tol, out } => {
            let mut loaded = load(&src, cli.seed)?;
            if let Some(g) = t_grid {
                loaded.config.t_grid = g;
                loaded.config.validate()?;
            }
            let checks = run_check(kind, &loaded, &CheckOptions { element, level, tol })?;
            finish(ReportFile::new(command, loaded.config.seed).with_checks(checks), out)
        }
        Cmd::Recover { kind, src, x, v, y, t, out } => {
            let loaded = load(&src, cli.seed)?;
            let rec = run_recover(kind, &loaded, &RecoverOptions { x, v, y, t })?;
            finish(ReportFile::new(command, loaded.config.seed).with_recovery(rec), out)
        }
        Cmd::Catalog { action: CatalogCmd::List } => {
            for name in CATALOG_NAMES {
                println!("{name}");
            }
            Ok(0)
        }
        Cmd::Catalog { action: CatalogCmd::Emit { name, samples, out } } => {
            let json = SpaceFile::from_catalog(&name, samples)?.to_json();
            match out {
                Some(path) => std::fs::write(&path, json)
                    .map_err(|source| CliError::Io { path: path.display().to_string(), source })?,
                None => print!("{json}"),
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT as u8)
        }
    }
}
