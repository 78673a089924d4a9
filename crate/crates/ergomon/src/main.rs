use std::io::{BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ergomon::calibrate::{calibrate, CalibrationConfig};
use ergomon::config::{StatsConfig, TaskMode};
use ergomon::profile::save_profile;
use ergomon::report::{
    cross_subject_stats, index_vector_header, index_vector_row, load_report, render_stats_text,
    render_text, to_json, write_session, SessionReport,
};
use ergomon::run::{parse_thresholds, Overrides, Session};
use ergomon::{Error, Result};

#[derive(Parser)]
#[command(
    name = "ergomon",
    version,
    about = "Sagittal ergonomic risk monitoring"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a subject profile from calibration trials.
    Calibrate {
        /// Calibration config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Where to write the profile JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Process the trials of a session config from files.
    Analyze(SessionArgs),
    /// Process one trial from stdin or a TCP connection.
    Stream {
        #[command(flatten)]
        session: SessionArgs,
        /// Trial label from the config; the first trial by default.
        #[arg(long)]
        trial: Option<String>,
        /// Accept one TCP connection on this address instead of reading stdin.
        #[arg(long)]
        listen: Option<String>,
        /// Write every index vector to this CSV file as it is computed.
        #[arg(long)]
        live: Option<PathBuf>,
    },
    /// Compare conditions across subjects from session reports.
    Stats {
        /// Statistics options (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for stats.json and stats.txt.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
    /// Re-render a stored session report.
    Report {
        /// Output directory for report.txt and polar.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        report: PathBuf,
    },
}

#[derive(Args)]
struct SessionArgs {
    /// Session config (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<TaskMode>,
    /// Pipeline rate [Hz].
    #[arg(long)]
    rate: Option<f64>,
    /// Risk thresholds as `yellow,red`.
    #[arg(long)]
    thresholds: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SessionArgs {
    fn open(&self) -> Result<Session> {
        let overrides = Overrides {
            profile: self.profile.clone(),
            mode: self.mode,
            rate: self.rate,
            thresholds: self
                .thresholds
                .as_deref()
                .map(parse_thresholds)
                .transpose()?,
            out: self.out.clone(),
        };
        Session::open(&self.config, &overrides)
    }
}

fn emit(
    session_out: Option<&Path>,
    report: &SessionReport,
    json: bool,
    text: bool,
    polar: bool,
) -> Result<()> {
    match session_out {
        Some(dir) => write_session(dir, report, json, text, polar),
        None => {
            print!("{}", render_text(report));
            Ok(())
        }
    }
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn stream(
    session: Session,
    trial: Option<&str>,
    listen: Option<&str>,
    live: Option<&Path>,
) -> Result<SessionReport> {
    let mut sink = match live {
        Some(p) => {
            let f = std::fs::File::create(p).map_err(|e| Error::io(p, e))?;
            let mut w = std::io::BufWriter::new(f);
            writeln!(w, "{}", index_vector_header()).map_err(|e| Error::io(p, e))?;
            Some((p.to_path_buf(), w))
        }
        None => None,
    };
    let mut live_error = None;
    let mut on_vector = |v: &ergomon_core::indexes::IndexVector| {
        if let Some((p, w)) = &mut sink {
            if live_error.is_none() {
                if let Err(e) = writeln!(w, "{}", index_vector_row(v)) {
                    live_error = Some(Error::io(p, e));
                }
            }
        }
    };
    let report = match listen {
        Some(addr) => {
            let listener = TcpListener::bind(addr).map_err(|e| Error::io(Path::new(addr), e))?;
            eprintln!(
                "listening on {}",
                listener
                    .local_addr()
                    .map_err(|e| Error::io(Path::new(addr), e))?
            );
            let (conn, peer) = listener
                .accept()
                .map_err(|e| Error::io(Path::new(addr), e))?;
            eprintln!("connection from {peer}");
            session.stream(trial, BufReader::new(conn), &mut on_vector)?
        }
        None => session.stream(trial, std::io::stdin().lock(), &mut on_vector)?,
    };
    if let Some(e) = live_error {
        return Err(e);
    }
    if let Some((p, mut w)) = sink {
        w.flush().map_err(|e| Error::io(&p, e))?;
    }
    Ok(report)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Calibrate { config, out } => {
            let c = CalibrationConfig::load(&config)?;
            let (profile, summary) = calibrate(&c)?;
            save_profile(&out, &profile)?;
            eprintln!(
                "{}: {} static holds, SESC residual {:.4} m, condition {:.1}",
                profile.id, summary.static_holds, summary.sesc_residual_rms, summary.sesc_condition
            );
            for j in &summary.unexcited {
                eprintln!("  {j}: not excited by the motion trial, literature speed limit used");
            }
        }
        Command::Analyze(args) => {
            let session = args.open()?;
            let out = session.output_dir().map(Path::to_path_buf);
            let o = session.config.output.clone();
            let report = session.analyze()?;
            emit(out.as_deref(), &report, o.json, o.text, o.polar_csv)?;
        }
        Command::Stream {
            session,
            trial,
            listen,
            live,
        } => {
            let session = session.open()?;
            let out = session.output_dir().map(Path::to_path_buf);
            let o = session.config.output.clone();
            let report = stream(
                session,
                trial.as_deref(),
                listen.as_deref(),
                live.as_deref(),
            )?;
            for t in &report.trials {
                if let Some(reason) = &t.aborted {
                    eprintln!("{}: {reason}", t.label);
                }
                if t.skipped > 0 {
                    eprintln!("{}: {} malformed records skipped", t.label, t.skipped);
                }
            }
            emit(out.as_deref(), &report, o.json, o.text, o.polar_csv)?;
        }
        Command::Stats {
            config,
            out,
            reports,
        } => {
            let cfg = match &config {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                    let c: StatsConfig = toml::from_str(&text)
                        .map_err(|e| Error::format(p, Error::Config(e.to_string())))?;
                    if !(c.alpha > 0.0 && c.alpha < 1.0) {
                        return Err(Error::format(p, "alpha must lie in (0, 1)"));
                    }
                    c
                }
                None => StatsConfig::default(),
            };
            let loaded = reports
                .iter()
                .map(|p| load_report(p))
                .collect::<Result<Vec<_>>>()?;
            let stats = cross_subject_stats(&loaded, &cfg)?;
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                    write_file(&dir.join("stats.json"), &to_json(&stats))?;
                    write_file(&dir.join("stats.txt"), &render_stats_text(&stats))?;
                }
                None => print!("{}", render_stats_text(&stats)),
            }
        }
        Command::Report { out, report } => {
            let r = load_report(&report)?;
            emit(out.as_deref(), &r, false, true, true)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
