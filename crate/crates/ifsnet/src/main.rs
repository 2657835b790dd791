use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ifsnet::config::{load_config, Backend, RunConfig};
use ifsnet::run::{render, resolve};

#[derive(Parser)]
#[command(name = "ifsnet", version, about = "Draw attractors of (fuzzy) IFS and GIFS on finite nets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration and write a PGM image.
    Render {
        config: PathBuf,
        /// Image path; defaults to the config's [output] path, then `<config>.pgm`.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Fuzzy operator backend: ram, file or direct.
        #[arg(long)]
        backend: Option<String>,
        /// Swap the foreground and background colours.
        #[arg(long)]
        invert: bool,
        /// Write the run report here as well as to stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Parse a configuration and check admissibility.
    Validate { config: PathBuf },
    /// Print the resolution plan without drawing.
    Plan { config: PathBuf },
    /// Print the contraction constant of the system.
    Lipschitz { config: PathBuf },
}

fn load(path: &Path) -> Result<RunConfig, ExitCode> {
    load_config(path).map_err(|e| {
        eprintln!("{}: {e}", path.display());
        ExitCode::from(1)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}

fn execute(command: Command) -> Result<(), ExitCode> {
    match command {
        Command::Render {
            config,
            output,
            backend,
            invert,
            report,
        } => {
            let mut cfg = load(&config)?;
            if let Some(b) = backend {
                cfg.backend = Backend::parse(&b).ok_or_else(|| {
                    eprintln!("unknown backend {b:?}; expected ram, file or direct");
                    ExitCode::from(1)
                })?;
            }
            cfg.invert ^= invert;
            let image = output
                .or_else(|| cfg.output.clone())
                .unwrap_or_else(|| config.with_extension("pgm"));
            let out = render(&cfg, &image, report.as_deref()).map_err(|e| {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            })?;
            print!("{}", out.report);
            println!("image: {}", image.display());
        }
        Command::Validate { config } => {
            let cfg = load(&config)?;
            match cfg.validation.alpha {
                Some(a) => println!("alpha: {a:.10}"),
                None => println!("alpha: unknown"),
            }
            for w in cfg.validation.warnings() {
                println!("warning: {w}");
            }
            let fatal: Vec<_> = cfg.validation.errors().collect();
            for e in &fatal {
                println!("error: {e}");
            }
            if !fatal.is_empty() {
                return Err(ExitCode::from(2));
            }
            println!("ok");
        }
        Command::Plan { config } => {
            let cfg = load(&config)?;
            let r = resolve(&cfg).map_err(|e| {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            })?;
            println!("alpha: {:.10}", r.alpha);
            if let Some(p) = &r.plan {
                println!("delta: {}", p.delta);
                println!("theta: {}", p.theta);
                println!("planned_epsilon: {:.6e}", p.epsilon);
            }
            println!("diameter: {:.10}", r.diameter);
            println!("iterations: {}", r.iterations);
            println!("n: {}", r.n);
            println!("epsilon_eff: {:.6e}", r.epsilon_eff);
            println!("predicted_delta: {:.10}", r.predicted_delta);
            for w in &r.warnings {
                println!("warning: {w}");
            }
        }
        Command::Lipschitz { config } => {
            let cfg = load(&config)?;
            let a = cfg.system.lipschitz().map_err(|e| {
                eprintln!("error: {e}");
                ExitCode::from(1)
            })?;
            println!("{a:.10}");
            if a >= 1.0 {
                return Err(ExitCode::from(2));
            }
        }
    }
    Ok(())
}
