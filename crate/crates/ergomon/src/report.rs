//! Session reports: JSON, plain text and polar-plot CSV.

use std::fmt::Write as _;
use std::path::Path;

use ergomon_core::indexes::{IndexKind, IndexVector, RiskLevel, Thresholds};
use ergomon_core::signal::EMG_CHANNELS;
use ergomon_core::stats::{posthoc_matrix, rm_anova, RepeatedMeasuresTable, TestResult};
use ergomon_core::Joint;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{StatsConfig, TaskMode};
use crate::ingest::GapReport;
use crate::session::{SessionContext, TrialResult};
use crate::{Error, Result};

pub const REPORT_FORMAT: &str = "ergomon-report/1";
pub const STATS_FORMAT: &str = "ergomon-stats/1";

/// Label used for the joint-independent CoM index.
pub const BODY: &str = "body";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Serializes non-finite numbers as the strings `"inf"`, `"-inf"`, `"nan"`.
mod lenient {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub trial: String,
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub software: String,
    pub version: String,
    pub config_sha256: String,
    pub profile_id: String,
    pub profile_sha256: String,
    pub inputs: Vec<InputDigest>,
}

impl Provenance {
    pub fn new(config: &[u8], profile_id: &str, profile: &[u8]) -> Self {
        Self {
            software: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: sha256_hex(config),
            profile_id: profile_id.into(),
            profile_sha256: sha256_hex(profile),
            inputs: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointStat {
    pub joint: String,
    pub max: f64,
    pub rms: f64,
    pub argmax_time: f64,
    pub level: RiskLevel,
    /// Normalized activation per muscle at `argmax_time`, in channel order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emg: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexStats {
    pub index: String,
    pub joints: Vec<JointStat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub label: String,
    pub condition: String,
    pub start: f64,
    pub end: f64,
    pub samples: usize,
    pub worst: Option<RiskLevel>,
    pub indexes: Vec<IndexStats>,
}

impl WindowReport {
    pub fn stat(&self, kind: IndexKind, joint: &str) -> Option<&JointStat> {
        self.indexes
            .iter()
            .find(|i| i.index == kind.label())?
            .joints
            .iter()
            .find(|j| j.joint == joint)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub label: String,
    pub frames: usize,
    pub skipped: usize,
    pub resampled: bool,
    pub aborted: Option<String>,
    pub gaps: Vec<GapReport>,
    pub windows: Vec<WindowReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    #[serde(with = "lenient")]
    pub statistic: f64,
    pub df1: f64,
    pub df2: Option<f64>,
    pub p_value: f64,
    pub p_exact: bool,
    pub significant: bool,
}

impl From<TestResult> for TestReport {
    fn from(r: TestResult) -> Self {
        Self {
            statistic: r.statistic,
            df1: r.df1,
            df2: r.df2,
            p_value: r.p_value,
            p_exact: r.p_exact,
            significant: r.significant,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub first: String,
    pub second: String,
    #[serde(with = "lenient")]
    pub statistic: f64,
    pub p_value: f64,
    pub adjusted_p: f64,
    pub significant: bool,
}

/// Repeated-measures comparison of one index at one joint across conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatEntry {
    pub index: String,
    pub joint: String,
    pub subjects: Vec<String>,
    pub conditions: Vec<String>,
    /// Mean of the available cell values per condition.
    pub means: Vec<Option<f64>>,
    pub anova: Option<TestReport>,
    pub posthoc: Vec<PairReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub format: String,
    pub provenance: Provenance,
    pub subject: String,
    pub mode: TaskMode,
    pub rate: f64,
    pub thresholds: Thresholds,
    pub unavailable: Vec<String>,
    pub trials: Vec<TrialReport>,
    pub stats: Vec<StatEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub format: String,
    pub sources: Vec<String>,
    pub stats: Vec<StatEntry>,
}

fn joint_names(kind: IndexKind) -> Vec<(Joint, String)> {
    if kind.is_per_joint() {
        Joint::ALL
            .iter()
            .map(|j| (*j, j.name().to_string()))
            .collect()
    } else {
        vec![(Joint::Ankle, BODY.to_string())]
    }
}

pub fn trial_report(trial: &TrialResult, thresholds: &Thresholds) -> TrialReport {
    let windows = trial
        .windows
        .iter()
        .map(|w| {
            let mut indexes = Vec::new();
            let mut worst: Option<RiskLevel> = None;
            let mut samples = 0;
            for kind in IndexKind::ALL {
                let mut joints = Vec::new();
                for (joint, name) in joint_names(kind) {
                    let Some(s) = w.aggregate.stat(kind, joint) else {
                        continue;
                    };
                    samples = samples.max(s.samples);
                    let level = thresholds.level(s.max);
                    worst = worst.max(Some(level));
                    let emg = w
                        .emg_at_max
                        .iter()
                        .find(|e| {
                            e.index == kind && e.joint == kind.is_per_joint().then_some(joint)
                        })
                        .map(|e| e.activation.to_vec());
                    joints.push(JointStat {
                        joint: name,
                        max: s.max,
                        rms: s.rms,
                        argmax_time: s.argmax_time,
                        level,
                        emg,
                    });
                }
                if !joints.is_empty() {
                    indexes.push(IndexStats {
                        index: kind.label().into(),
                        joints,
                    });
                }
            }
            WindowReport {
                label: w.config.label.clone(),
                condition: w.config.condition().to_string(),
                start: w.config.start,
                end: w.config.end,
                samples,
                worst,
                indexes,
            }
        })
        .collect();
    TrialReport {
        label: trial.label.clone(),
        frames: trial.frames,
        skipped: trial.skipped,
        resampled: trial.resampled,
        aborted: trial.aborted.clone(),
        gaps: trial.gaps.clone(),
        windows,
    }
}

pub fn session_report(
    ctx: &SessionContext,
    provenance: Provenance,
    trials: &[TrialResult],
    stats: &StatsConfig,
) -> SessionReport {
    let trials: Vec<TrialReport> = trials
        .iter()
        .map(|t| trial_report(t, &ctx.thresholds))
        .collect();
    let rows: Vec<(String, &[WindowReport])> = trials
        .iter()
        .map(|t| (t.label.clone(), t.windows.as_slice()))
        .collect();
    let stats = if rows.len() >= 2 {
        compare_conditions(&rows, stats)
    } else {
        Vec::new()
    };
    SessionReport {
        format: REPORT_FORMAT.into(),
        subject: ctx.profile.id.clone(),
        provenance,
        mode: ctx.mode,
        rate: ctx.rate,
        thresholds: ctx.thresholds,
        unavailable: ctx
            .unavailable()
            .iter()
            .map(|k| k.label().to_string())
            .collect(),
        trials,
        stats,
    }
}

/// One repeated-measures analysis per index and joint. Rows are subjects
/// (or trials), columns the conditions in order of first appearance, and a
/// cell is the mean of the window maxima of that row and condition.
pub fn compare_conditions(rows: &[(String, &[WindowReport])], cfg: &StatsConfig) -> Vec<StatEntry> {
    let mut conditions: Vec<String> = Vec::new();
    for w in rows.iter().flat_map(|(_, w)| w.iter()) {
        if !conditions.contains(&w.condition) {
            conditions.push(w.condition.clone());
        }
    }
    if conditions.len() < 2 {
        return Vec::new();
    }
    // nothing to compare when no row saw every condition
    let complete = |w: &[WindowReport]| {
        conditions
            .iter()
            .all(|c| w.iter().any(|x| &x.condition == c))
    };
    if !rows.iter().any(|(_, w)| complete(w)) {
        return Vec::new();
    }
    let subjects: Vec<String> = rows.iter().map(|(s, _)| s.clone()).collect();
    let mut out = Vec::new();
    for kind in IndexKind::ALL {
        for (_, joint) in joint_names(kind) {
            let mut values = Vec::with_capacity(rows.len() * conditions.len());
            let mut missing = None;
            for (subject, windows) in rows {
                for c in &conditions {
                    let maxima: Vec<f64> = windows
                        .iter()
                        .filter(|w| &w.condition == c)
                        .filter_map(|w| w.stat(kind, &joint).map(|s| s.max))
                        .collect();
                    if maxima.is_empty() {
                        missing.get_or_insert_with(|| format!("no value for {subject} / {c}"));
                        values.push(f64::NAN);
                    } else {
                        values.push(maxima.iter().sum::<f64>() / maxima.len() as f64);
                    }
                }
            }
            if values.iter().all(|v| v.is_nan()) {
                continue;
            }
            let k = conditions.len();
            let means: Vec<Option<f64>> = (0..k)
                .map(|c| {
                    let cells: Vec<f64> = values
                        .iter()
                        .skip(c)
                        .step_by(k)
                        .copied()
                        .filter(|v| !v.is_nan())
                        .collect();
                    (!cells.is_empty()).then(|| cells.iter().sum::<f64>() / cells.len() as f64)
                })
                .collect();
            let mut entry = StatEntry {
                index: kind.label().into(),
                joint: joint.clone(),
                subjects: subjects.clone(),
                conditions: conditions.clone(),
                means,
                anova: None,
                posthoc: Vec::new(),
                note: missing.clone(),
            };
            if missing.is_none() {
                match RepeatedMeasuresTable::new(subjects.clone(), conditions.clone(), values) {
                    Err(e) => entry.note = Some(e.to_string()),
                    Ok(table) => {
                        match rm_anova(&table, &cfg.anova()) {
                            Ok(r) => entry.anova = Some(r.into()),
                            Err(e) => entry.note = Some(e.to_string()),
                        }
                        match posthoc_matrix(&table, cfg.correction.into(), cfg.alpha) {
                            Ok(pairs) => {
                                entry.posthoc = pairs
                                    .iter()
                                    .map(|p| PairReport {
                                        first: conditions[p.first].clone(),
                                        second: conditions[p.second].clone(),
                                        statistic: p.result.statistic,
                                        p_value: p.result.p_value,
                                        adjusted_p: p.adjusted_p,
                                        significant: p.adjusted_p < cfg.alpha,
                                    })
                                    .collect()
                            }
                            Err(e) => {
                                entry.note.get_or_insert_with(|| format!("post-hoc: {e}"));
                            }
                        }
                    }
                }
            }
            out.push(entry);
        }
    }
    out
}

/// Cross-subject comparison from stored session reports; each report is
/// one subject.
pub fn cross_subject_stats(reports: &[SessionReport], cfg: &StatsConfig) -> Result<StatsReport> {
    let mut names: Vec<String> = Vec::new();
    let mut windows: Vec<Vec<WindowReport>> = Vec::new();
    for r in reports {
        if names.contains(&r.subject) {
            return Err(Error::Input(format!(
                "subject '{}' appears in more than one report",
                r.subject
            )));
        }
        names.push(r.subject.clone());
        windows.push(
            r.trials
                .iter()
                .flat_map(|t| t.windows.iter().cloned())
                .collect(),
        );
    }
    if names.len() < 2 {
        return Err(Error::Input(
            "cross-subject statistics need at least two reports".into(),
        ));
    }
    let rows: Vec<(String, &[WindowReport])> = names
        .iter()
        .cloned()
        .zip(windows.iter().map(Vec::as_slice))
        .collect();
    Ok(StatsReport {
        format: STATS_FORMAT.into(),
        sources: reports
            .iter()
            .map(|r| format!("{} {}", r.subject, r.provenance.config_sha256))
            .collect(),
        stats: compare_conditions(&rows, cfg),
    })
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

pub fn session_from_json(text: &str) -> Result<SessionReport> {
    let r: SessionReport =
        serde_json::from_str(text).map_err(|e| Error::Input(format!("report: {e}")))?;
    if r.format != REPORT_FORMAT {
        return Err(Error::Input(format!(
            "unsupported report format '{}'",
            r.format
        )));
    }
    Ok(r)
}

pub fn load_report(path: &Path) -> Result<SessionReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    session_from_json(&text).map_err(|e| Error::format(path, e))
}

fn level_tag(l: RiskLevel) -> char {
    match l {
        RiskLevel::Green => 'G',
        RiskLevel::Yellow => 'Y',
        RiskLevel::Red => 'R',
    }
}

fn render_stats(out: &mut String, stats: &[StatEntry]) {
    if stats.is_empty() {
        return;
    }
    let _ = writeln!(out, "\nrepeated-measures ANOVA across conditions");
    for s in stats {
        let head = format!("  {:<3} {:<9}", s.index, s.joint);
        match (&s.anova, &s.note) {
            (Some(a), _) => {
                let _ = writeln!(
                    out,
                    "{head} F({}, {}) = {:.4}  p = {:.4e}{}",
                    a.df1,
                    a.df2.map_or("-".into(), |d| format!("{d}")),
                    a.statistic,
                    a.p_value,
                    if a.significant { "  *" } else { "" }
                );
            }
            (None, note) => {
                let _ = writeln!(
                    out,
                    "{head} not tested: {}",
                    note.as_deref().unwrap_or("unavailable")
                );
            }
        }
        for p in &s.posthoc {
            let _ = writeln!(
                out,
                "      {} vs {}: t = {:.4}  p = {:.4e}{}",
                p.first,
                p.second,
                p.statistic,
                p.adjusted_p,
                if p.significant { "  *" } else { "" }
            );
        }
    }
}

/// Human-readable summary: per window, the maximum of every index at every
/// joint with its risk level (G, Y, R).
pub fn render_text(r: &SessionReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "subject   {}", r.subject);
    let _ = writeln!(out, "mode      {}", r.mode);
    let _ = writeln!(out, "rate      {} Hz", r.rate);
    let _ = writeln!(
        out,
        "risk      yellow >= {}, red >= {}",
        r.thresholds.yellow, r.thresholds.red
    );
    if !r.unavailable.is_empty() {
        let _ = writeln!(out, "not available: {}", r.unavailable.join(", "));
    }
    let _ = writeln!(out, "config    sha256 {}", r.provenance.config_sha256);
    let _ = writeln!(out, "profile   sha256 {}", r.provenance.profile_sha256);
    let _ = writeln!(
        out,
        "software  {} {}",
        r.provenance.software, r.provenance.version
    );
    for t in &r.trials {
        let _ = writeln!(
            out,
            "\ntrial {}: {} frames, {} skipped{}",
            t.label,
            t.frames,
            t.skipped,
            if t.resampled { ", resampled" } else { "" }
        );
        if let Some(a) = &t.aborted {
            let _ = writeln!(out, "  ABORTED: {a}");
        }
        for g in &t.gaps {
            let _ = writeln!(
                out,
                "  gap in {} from {} to {} s ({:.1} periods)",
                g.channel, g.start, g.end, g.periods
            );
        }
        for w in &t.windows {
            let _ = writeln!(
                out,
                "\n  window {} [{}] {} to {} s, {} samples, worst {}",
                w.label,
                w.condition,
                w.start,
                w.end,
                w.samples,
                w.worst.map_or("-", |l| l.name())
            );
            let mut header = String::from("        ");
            for j in Joint::ALL {
                let _ = write!(header, "{:>11}", j.name());
            }
            let _ = writeln!(out, "{header}");
            for i in &w.indexes {
                let mut line = format!("    {:<4}", i.index);
                if i.joints.len() == 1 && i.joints[0].joint == BODY {
                    let s = &i.joints[0];
                    let _ = write!(line, "{:>9.4} {} (whole body)", s.max, level_tag(s.level));
                } else {
                    for s in &i.joints {
                        let _ = write!(line, "{:>9.4} {}", s.max, level_tag(s.level));
                    }
                }
                let _ = writeln!(out, "{line}");
            }
            let emg: Vec<&JointStat> = w
                .indexes
                .iter()
                .flat_map(|i| &i.joints)
                .filter(|s| s.emg.is_some())
                .collect();
            if !emg.is_empty() {
                let _ = writeln!(out, "    EMG at the w4 maxima ({})", EMG_CHANNELS.join(" "));
                if let Some(i) = w
                    .indexes
                    .iter()
                    .find(|i| i.index == IndexKind::OverloadingTorque.label())
                {
                    for s in &i.joints {
                        if let Some(e) = &s.emg {
                            let vals: Vec<String> = e.iter().map(|v| format!("{v:.3}")).collect();
                            let _ = writeln!(out, "      {:<9} {}", s.joint, vals.join(" "));
                        }
                    }
                }
            }
        }
    }
    render_stats(&mut out, &r.stats);
    out
}

pub fn render_stats_text(r: &StatsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "subjects: {}", r.sources.len());
    for s in &r.sources {
        let _ = writeln!(out, "  {s}");
    }
    render_stats(&mut out, &r.stats);
    out
}

/// One record per trial, window, index and joint.
pub fn render_polar_csv(r: &SessionReport) -> String {
    let mut out = String::from("trial,window,condition,index,joint,max,rms\n");
    for t in &r.trials {
        for w in &t.windows {
            for i in &w.indexes {
                for s in &i.joints {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{:?},{:?}",
                        t.label, w.label, w.condition, i.index, s.joint, s.max, s.rms
                    );
                }
            }
        }
    }
    out
}

/// Header of the live index-vector CSV written while streaming.
pub fn index_vector_header() -> String {
    let mut cols = vec!["t".to_string()];
    for k in IndexKind::ALL {
        if k.is_per_joint() {
            cols.extend(
                Joint::ALL
                    .iter()
                    .map(|j| format!("{}_{}", k.label(), j.name())),
            );
        } else {
            cols.push(format!("{}_{BODY}", k.label()));
        }
    }
    cols.join(",")
}

/// One live CSV row. Unavailable indexes leave empty cells.
pub fn index_vector_row(v: &IndexVector) -> String {
    let mut out = format!("{:?}", v.timestamp);
    for k in IndexKind::ALL {
        if k.is_per_joint() {
            for j in Joint::ALL {
                out.push(',');
                if let Some(x) = v.value(k, j) {
                    let _ = write!(out, "{x:?}");
                }
            }
        } else {
            out.push(',');
            if let Some(x) = v.com_energy() {
                let _ = write!(out, "{x:?}");
            }
        }
    }
    out
}

/// Writes `report.json`, `report.txt` and `polar.csv` into `dir`.
pub fn write_session(
    dir: &Path,
    r: &SessionReport,
    json: bool,
    text: bool,
    polar: bool,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<(&str, String)> = Vec::new();
    if json {
        files.push(("report.json", to_json(r)));
    }
    if text {
        files.push(("report.txt", render_text(r)));
    }
    if polar {
        files.push(("polar.csv", render_polar_csv(r)));
    }
    for (name, body) in files {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}
