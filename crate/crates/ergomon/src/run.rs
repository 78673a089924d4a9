//! Session entry points shared by the command line and tests.

use std::io::BufRead;
use std::path::{Path, PathBuf};

use ergomon_core::indexes::{IndexVector, Thresholds};

use crate::config::{SessionConfig, TaskMode};
use crate::frame::Group;
use crate::ingest::load_frames;
use crate::profile::profile_from_json;
use crate::report::{session_report, InputDigest, Provenance, SessionReport};
use crate::session::{file_name, load_emg, run_frames, run_stream, SessionContext, TrialResult};
use crate::{Error, Result};

/// Command-line values that replace config entries.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub profile: Option<PathBuf>,
    pub mode: Option<TaskMode>,
    pub rate: Option<f64>,
    pub thresholds: Option<Thresholds>,
    pub out: Option<PathBuf>,
}

/// A configured session ready to process trials.
pub struct Session {
    pub config: SessionConfig,
    pub context: SessionContext,
    pub provenance: Provenance,
}

impl Session {
    /// Loads the config and profile, applies overrides and checks the
    /// profile before any frame is read.
    pub fn open(config_path: &Path, overrides: &Overrides) -> Result<Self> {
        let bytes = std::fs::read(config_path).map_err(|e| Error::io(config_path, e))?;
        let text = String::from_utf8(bytes.clone()).map_err(|e| Error::format(config_path, e))?;
        let mut config: SessionConfig = toml::from_str(&text)
            .map_err(|e| Error::format(config_path, Error::Config(e.to_string())))?;
        config.resolve_paths(config_path.parent().unwrap_or(Path::new("")));
        if let Some(p) = &overrides.profile {
            config.profile = p.clone();
        }
        if let Some(m) = overrides.mode {
            config.mode = m;
        }
        if let Some(r) = overrides.rate {
            config.rate = r;
        }
        if let Some(t) = overrides.thresholds {
            config.thresholds = Some(t);
        }
        if let Some(o) = &overrides.out {
            config.output.dir = Some(o.clone());
        }
        config
            .validate()
            .map_err(|e| Error::format(config_path, e))?;
        config.check_files()?;
        let profile_bytes =
            std::fs::read(&config.profile).map_err(|e| Error::io(&config.profile, e))?;
        let profile_text = String::from_utf8(profile_bytes.clone())
            .map_err(|e| Error::format(&config.profile, e))?;
        let profile =
            profile_from_json(&profile_text).map_err(|e| Error::format(&config.profile, e))?;
        let mut provenance = Provenance::new(&bytes, &profile.id, &profile_bytes);
        // overrides change the result, so they are part of the config digest
        if overrides.profile.is_some()
            || overrides.mode.is_some()
            || overrides.rate.is_some()
            || overrides.thresholds.is_some()
        {
            let effective = toml::to_string(&config).expect("config serializes");
            provenance.config_sha256 = crate::report::sha256_hex(effective.as_bytes());
        }
        let context = SessionContext::new(&config, profile)?;
        Ok(Self {
            config,
            context,
            provenance,
        })
    }

    /// Processes every configured trial from its file.
    pub fn analyze(mut self) -> Result<SessionReport> {
        let mut results = Vec::new();
        for trial in &self.config.trials {
            let bytes = std::fs::read(&trial.input).map_err(|e| Error::io(&trial.input, e))?;
            self.provenance.inputs.push(InputDigest {
                trial: trial.label.clone(),
                file: file_name(&trial.input),
                sha256: crate::report::sha256_hex(&bytes),
            });
            let rec = load_frames(&trial.input, self.config.rate)?;
            if self.config.mode.needs_wrench() && !rec.schema.has(Group::Wrench) {
                return Err(Error::format(
                    &trial.input,
                    format!("{} mode needs the hand wrench channels", self.config.mode),
                ));
            }
            let emg = load_emg(trial.emg.as_ref(), &self.context.profile)?;
            let mut r = run_frames(&self.context, &trial.label, &trial.windows, rec.frames, emg)
                .map_err(|e| Error::format(&trial.input, e))?;
            r.resampled = rec.resampled;
            r.gaps = rec.gaps;
            results.push(r);
        }
        Ok(self.report(&results))
    }

    /// Processes one trial from a line stream, reporting each index vector
    /// as soon as it is ready.
    pub fn stream<R: BufRead>(
        mut self,
        trial: Option<&str>,
        reader: R,
        on_vector: impl FnMut(&IndexVector),
    ) -> Result<SessionReport> {
        let t = match trial {
            Some(label) => self
                .config
                .trials
                .iter()
                .find(|t| t.label == label)
                .ok_or_else(|| Error::Config(format!("no trial labelled '{label}'")))?,
            None => &self.config.trials[0],
        }
        .clone();
        let emg = load_emg(t.emg.as_ref(), &self.context.profile)?;
        let r = run_stream(&self.context, &t.label, &t.windows, reader, emg, on_vector)?;
        self.provenance.inputs.push(InputDigest {
            trial: t.label.clone(),
            file: "-".into(),
            sha256: String::new(),
        });
        Ok(self.report(&[r]))
    }

    pub fn report(&self, results: &[TrialResult]) -> SessionReport {
        session_report(
            &self.context,
            self.provenance.clone(),
            results,
            &self.config.stats,
        )
    }

    pub fn output_dir(&self) -> Option<&Path> {
        self.config.output.dir.as_deref()
    }
}

/// Parses `yellow,red`.
pub fn parse_thresholds(s: &str) -> Result<Thresholds> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [y, r] = parts.as_slice() else {
        return Err(Error::Config(format!(
            "thresholds must be 'yellow,red', got '{s}'"
        )));
    };
    let num = |v: &str| {
        v.parse::<f64>()
            .map_err(|_| Error::Config(format!("bad threshold '{v}'")))
    };
    Ok(Thresholds::new(num(y)?, num(r)?)?)
}
