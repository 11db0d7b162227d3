use anyhow::Result;
use clap::{Parser, Subcommand};
use gammakit_cli::{list_experiments, run, ExperimentConfig, OutputFormat, Overrides};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "gammakit", version, about = "Wiener-space comparison experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the available experiments.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Run the experiment described by a configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configuration seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "GAMMAKIT_WORKERS")]
        workers: Option<usize>,
        /// Output directory; the JSON report goes to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Both)]
        format: OutputFormat,
    },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        // a closed pipe on stdout (e.g. `| head`) is not a failure
        Err(e) if e.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<bool> {
    let mut stdout = std::io::stdout().lock();
    match Cli::parse().command {
        Command::List { json } => {
            if json {
                writeln!(stdout, "{}", serde_json::to_string_pretty(list_experiments())?)?;
            } else {
                for e in list_experiments() {
                    writeln!(stdout, "{:<18} {}  [{}]", e.name, e.description, e.anchors.join("; "))?;
                }
            }
            Ok(true)
        }
        Command::Run {
            config,
            seed,
            workers,
            out,
            format,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let start = Instant::now();
            let report = run(&cfg, Overrides { seed, workers })?;
            match out.or_else(|| cfg.output.clone()) {
                Some(dir) => report.write(&dir, format)?,
                None if format.json() => write!(stdout, "{}", report.to_json()?)?,
                None => write!(stdout, "{}", report.rows_csv()?)?,
            }
            let failed = report.rows.iter().filter(|r| r.verdict != gammakit_cli::Verdict::Pass).count();
            eprintln!(
                "{}: {} rows, {} failed, {:.2}s",
                report.command,
                report.rows.len(),
                failed,
                start.elapsed().as_secs_f64()
            );
            Ok(report.all_pass)
        }
    }
}
