use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use toeplitz_lab::error::{LabError, Result};
use toeplitz_lab::harness::{
    emit_report, fmt_float, run_det_series, run_factor, run_hankel_sv, run_scenario, run_trace_series, to_json,
    with_workers, Format, ScenarioConfig,
};

#[derive(Parser)]
#[command(name = "toeplitz-lab", version, about = "Asymptotics of block Toeplitz determinants and traces")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[arg(long, global = true, value_enum)]
    format: Option<OutFormat>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Factor pair, winding and invertibility probe.
    Factor { config: PathBuf },
    /// `log det T_n(a)` and the first-order remainder over the schedule.
    DetSeries { config: PathBuf },
    /// `tr f(T_n(a))` with its constants and remainder.
    TraceSeries { config: PathBuf },
    /// Singular values of the truncated Hankel operator and their decay rate.
    HankelSv { config: PathBuf },
    /// Every stage; writes the configured outputs and prints the report.
    Report { config: PathBuf },
}

fn opt(z: Option<f64>) -> String {
    z.map(fmt_float).unwrap_or_default()
}

fn run(cli: &Cli) -> Result<String> {
    let fmt = cli.format.map(|f| match f {
        OutFormat::Csv => Format::Csv,
        OutFormat::Json => Format::Json,
    });
    let load = |p: &Path| ScenarioConfig::load(p);
    match &cli.command {
        Command::Factor { config } => to_json(&run_factor(&load(config)?)?),
        Command::DetSeries { config } => {
            let rows = run_det_series(&load(config)?)?;
            if fmt == Some(Format::Json) {
                return to_json(&rows);
            }
            let mut out = String::from("n,log_det_re,log_det_im,widom_rem\n");
            for r in rows {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    r.n,
                    opt(r.log_det.map(|z| z.re)),
                    opt(r.log_det.map(|z| z.im)),
                    opt(r.widom_rem.map(|z| z.re))
                ));
            }
            Ok(out)
        }
        Command::TraceSeries { config } => {
            let ts = run_trace_series(&load(config)?)?;
            if fmt == Some(Format::Json) {
                return to_json(&ts);
            }
            let mut out = String::from("n,trace_re,trace_im,trace_rem\n");
            for (t, rem) in ts.values.iter().zip(&ts.remainders) {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    t.n,
                    fmt_float(t.value.re),
                    fmt_float(t.value.im),
                    opt(rem.map(|z| z.re))
                ));
            }
            for e in &ts.errors {
                eprintln!("warning: {e}");
            }
            Ok(out)
        }
        Command::HankelSv { config } => {
            let sv = run_hankel_sv(&load(config)?)?;
            if fmt == Some(Format::Json) {
                return to_json(&sv);
            }
            let mut out = String::from("index,sigma\n");
            for (i, s) in sv.values.iter().enumerate() {
                out.push_str(&format!("{i},{}\n", fmt_float(*s)));
            }
            Ok(out)
        }
        Command::Report { config } => {
            let cfg = load(config)?;
            let report = run_scenario(&cfg)?;
            if let Some(p) = &cfg.outputs.csv {
                emit_report(&report, Format::Csv, Some(p))?;
            }
            if let Some(p) = &cfg.outputs.json {
                emit_report(&report, Format::Json, Some(p))?;
            }
            for e in &report.errors {
                eprintln!("warning: {e}");
            }
            emit_report(&report, fmt.unwrap_or(Format::Json), None)
        }
    }
}

fn exit_code(e: &LabError) -> u8 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = with_workers(cli.workers, || run(&cli)).and_then(|r| r);
    match outcome {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
