//! Ordered per-frame index computation for one trial.

use std::collections::VecDeque;
use std::io::BufRead;
use std::path::Path;

use ergomon_core::calibration::SubjectProfile;
use ergomon_core::dynamics::{
    compressive_forces, estimate_external_vertical_force, overloading_torque, ExternalWrench,
};
use ergomon_core::indexes::*;
use ergomon_core::model::{sesc_com, BaseState, HumanModel, JointConfiguration, Sesc};
use ergomon_core::signal::{
    process_emg, DerivativeSample, Differentiator, DifferentiatorSpec, EmgConfig, EMG_CHANNELS,
    N_EMG,
};
use ergomon_core::{Joint, GRAVITY, N_JOINTS};

use crate::config::{EmgInput, Projection, SessionConfig, TaskMode, WindowConfig};
use crate::frame::{is_blank_or_comment, KinodynamicFrame};
use crate::ingest::{GapReport, LineDecoder};
use crate::profile::{body_model, hand_com};
use crate::{Error, Result};

/// Differentiated channels: the joint angles followed by the base pose.
const WIDTH: usize = N_JOINTS + 3;

/// Everything fixed for the duration of a session.
#[derive(Debug, Clone)]
pub struct SessionContext {
    pub profile: SubjectProfile,
    pub model: HumanModel,
    pub sesc: Sesc,
    pub mode: TaskMode,
    pub rate: f64,
    pub spec: DifferentiatorSpec,
    pub projection: Projection,
    pub load_point: [f64; 2],
    pub tool_mass: Option<f64>,
    pub thresholds: Thresholds,
}

impl SessionContext {
    /// Checks that the profile carries every field the session needs and
    /// enumerates all missing ones at once.
    pub fn new(config: &SessionConfig, profile: SubjectProfile) -> Result<Self> {
        config.validate()?;
        profile.validate()?;
        let needs_mvc = config.trials.iter().any(|t| t.emg.is_some());
        let missing = profile.missing_fields(config.mode.needs_wrench(), needs_mvc);
        if !missing.is_empty() {
            return Err(Error::MissingProfileFields(
                missing.iter().map(|s| s.to_string()).collect(),
            ));
        }
        let model = body_model(&profile)?;
        let load_point = config.load_point.unwrap_or_else(|| hand_com(&model));
        let sesc = Sesc {
            params: profile.sesc.clone(),
            mass: profile.mass,
        };
        Ok(Self {
            model,
            sesc,
            mode: config.mode,
            rate: config.rate,
            spec: config.spec(),
            projection: config.projection,
            load_point,
            tool_mass: config.tool_mass,
            thresholds: config.thresholds(),
            profile,
        })
    }

    /// Indexes this session cannot report.
    pub fn unavailable(&self) -> Vec<IndexKind> {
        let mut out = Vec::new();
        if self.profile.neutral.is_none() {
            out.push(IndexKind::ComPotentialEnergy);
        }
        if self.mode != TaskMode::MeasuredWrench {
            out.push(IndexKind::CompressiveForce);
        }
        out
    }
}

/// Normalized sEMG activation sampled at the native rate.
#[derive(Debug, Clone, PartialEq)]
pub struct EmgTrack {
    start: f64,
    rate: f64,
    values: Vec<[f64; N_EMG]>,
}

impl EmgTrack {
    pub fn from_raw(
        raw: &[[f64; N_EMG]],
        rate: f64,
        start: f64,
        mvc: &[f64; N_EMG],
    ) -> Result<Self> {
        Ok(Self {
            start,
            rate,
            values: process_emg(raw, rate, mvc, &EmgConfig::default())?,
        })
    }

    /// Reads a raw sEMG file: a header naming the ten `emg_*` columns (an
    /// optional `t` column is ignored) and one sample per line.
    pub fn load(input: &EmgInput, mvc: &[f64; N_EMG]) -> Result<Self> {
        let path = input.path.as_path();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let raw =
            read_raw_emg(std::io::BufReader::new(file)).map_err(|e| Error::format(path, e))?;
        Self::from_raw(&raw, input.rate, input.start, mvc)
    }

    /// Linear interpolation at session time `t`; `None` outside the recording.
    pub fn at(&self, t: f64) -> Option<[f64; N_EMG]> {
        let x = (t - self.start) * self.rate;
        if !(x >= 0.0) || x > (self.values.len() - 1) as f64 {
            return None;
        }
        let i = (x.floor() as usize).min(self.values.len() - 1);
        let j = (i + 1).min(self.values.len() - 1);
        let a = x - i as f64;
        Some(std::array::from_fn(|c| {
            self.values[i][c] * (1.0 - a) + self.values[j][c] * a
        }))
    }
}

fn read_raw_emg<R: BufRead>(reader: R) -> Result<Vec<[f64; N_EMG]>> {
    let mut slots: Option<Vec<Option<usize>>> = None;
    let mut out = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line.map_err(|e| Error::parse(line_no, e.to_string()))?;
        if is_blank_or_comment(&line) {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let Some(map) = &slots else {
            let mut map = Vec::new();
            let mut seen = [false; N_EMG];
            for c in &cells {
                if *c == "t" {
                    map.push(None);
                    continue;
                }
                let ch = c
                    .strip_prefix("emg_")
                    .and_then(|m| EMG_CHANNELS.iter().position(|x| *x == m))
                    .ok_or_else(|| Error::parse(line_no, format!("unknown channel '{c}'")))?;
                if seen[ch] {
                    return Err(Error::parse(line_no, format!("duplicate channel '{c}'")));
                }
                seen[ch] = true;
                map.push(Some(ch));
            }
            if seen.iter().any(|s| !s) {
                return Err(Error::parse(line_no, "all ten EMG channels are required"));
            }
            slots = Some(map);
            continue;
        };
        if cells.len() != map.len() {
            return Err(Error::parse(
                line_no,
                format!("expected {} cells, found {}", map.len(), cells.len()),
            ));
        }
        let mut s = [0.0; N_EMG];
        for (c, slot) in cells.iter().zip(map) {
            let v: f64 = c
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::parse(line_no, format!("bad value '{c}'")))?;
            if let Some(ch) = slot {
                s[*ch] = v;
            }
        }
        out.push(s);
    }
    if out.is_empty() {
        return Err(Error::Input("EMG file holds no samples".into()));
    }
    Ok(out)
}

/// EMG activation at the instant an index peaked inside a window.
#[derive(Debug, Clone, PartialEq)]
pub struct EmgAtMax {
    pub index: IndexKind,
    /// `None` for the joint-independent CoM index.
    pub joint: Option<Joint>,
    pub time: f64,
    pub activation: [f64; N_EMG],
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowResult {
    pub config: WindowConfig,
    pub aggregate: ActionAggregate,
    pub emg_at_max: Vec<EmgAtMax>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub label: String,
    pub frames: usize,
    pub skipped: usize,
    pub resampled: bool,
    pub gaps: Vec<GapReport>,
    /// Why processing stopped early, for partial results.
    pub aborted: Option<String>,
    pub windows: Vec<WindowResult>,
}

/// Single ordered lane for one trial: differentiation, load handling,
/// fatigue integration and window aggregation.
pub struct TrialProcessor<'a> {
    ctx: &'a SessionContext,
    windows: Vec<WindowConfig>,
    diff: Differentiator,
    pending: VecDeque<KinodynamicFrame>,
    fatigue: FatigueState,
    last_input: Option<f64>,
    last_processed: Option<f64>,
    aggregator: WindowAggregator,
    emg: Option<EmgTrack>,
    emg_trace: Vec<(f64, [f64; N_EMG])>,
    frames: usize,
}

impl<'a> TrialProcessor<'a> {
    pub fn new(
        ctx: &'a SessionContext,
        windows: &[WindowConfig],
        emg: Option<EmgTrack>,
    ) -> Result<Self> {
        let action: Vec<ActionWindow> = windows.iter().map(WindowConfig::action_window).collect();
        Ok(Self {
            ctx,
            windows: windows.to_vec(),
            diff: Differentiator::new(ctx.spec, ctx.rate, WIDTH)?,
            pending: VecDeque::new(),
            fatigue: FatigueState::rested(),
            last_input: None,
            last_processed: None,
            aggregator: WindowAggregator::new(&action)?,
            emg,
            emg_trace: Vec::new(),
            frames: 0,
        })
    }

    /// Frames accepted so far.
    pub fn frames(&self) -> usize {
        self.frames
    }

    /// Feeds one frame; returns the index vectors that became ready, which
    /// trail the input by the differentiator lag.
    pub fn push(&mut self, frame: KinodynamicFrame) -> Result<Vec<IndexVector>> {
        if let Some(t) = self.last_input {
            if !(frame.timestamp > t) {
                return Err(Error::Input(format!(
                    "frame at t = {} s does not follow t = {t} s",
                    frame.timestamp
                )));
            }
        }
        if self.ctx.mode.needs_wrench() && frame.wrench.is_none() {
            return Err(Error::Input(format!(
                "frame at t = {} s lacks the hand wrench needed in {} mode",
                frame.timestamp, self.ctx.mode
            )));
        }
        if let Some(e) = frame.emg {
            if self.emg.is_none() {
                self.emg_trace.push((frame.timestamp, e));
            }
        }
        self.last_input = Some(frame.timestamp);
        self.frames += 1;
        let base = frame.base.unwrap_or([
            self.ctx.projection.base[0],
            self.ctx.projection.base[1],
            0.0,
        ]);
        let mut sample = [0.0; WIDTH];
        sample[..N_JOINTS].copy_from_slice(&frame.q);
        sample[N_JOINTS..].copy_from_slice(&base);
        self.pending.push_back(frame);
        let ready = self.diff.push(&sample)?;
        self.drain(ready)
    }

    fn drain(&mut self, ready: Vec<DerivativeSample>) -> Result<Vec<IndexVector>> {
        let mut out = Vec::with_capacity(ready.len());
        for s in ready {
            let frame = self
                .pending
                .pop_front()
                .expect("one pending frame per derivative sample");
            let v = self.compute(&frame, &s)?;
            self.aggregator.push(&v)?;
            if let Some(track) = &self.emg {
                if let Some(a) = track.at(frame.timestamp) {
                    self.emg_trace.push((frame.timestamp, a));
                }
            }
            out.push(v);
        }
        Ok(out)
    }

    fn compute(&mut self, f: &KinodynamicFrame, s: &DerivativeSample) -> Result<IndexVector> {
        let ctx = self.ctx;
        let p = &ctx.profile;
        let qd: JointVector = std::array::from_fn(|j| s.first[j]);
        let qdd: JointVector = std::array::from_fn(|j| s.second[j]);
        let base = match f.base {
            Some(b) => BaseState {
                position: [b[0], b[1]],
                pitch: b[2],
                velocity: [s.first[N_JOINTS], s.first[N_JOINTS + 1]],
                pitch_rate: s.first[N_JOINTS + 2],
                acceleration: [s.second[N_JOINTS], s.second[N_JOINTS + 1]],
                pitch_acceleration: s.second[N_JOINTS + 2],
            },
            None => BaseState::at(ctx.projection.base[0], ctx.projection.base[1]),
        };
        let cfg = JointConfiguration::new(f.q, qd, qdd).with_base(base);

        let mut v = IndexVector::new(f.timestamp);
        v.set(
            IndexKind::JointDisplacement,
            joint_displacement(&f.q, &p.q_max, &p.q_min)?,
        );
        let w2 = joint_velocity_index(&qd, &p.qd_max)?;
        v.set(IndexKind::JointVelocity, w2);
        v.set(
            IndexKind::JointAcceleration,
            joint_acceleration_index(&qdd, &p.qdd_max)?,
        );

        let estimated = || -> Result<ExternalWrench> {
            let cop_x = ctx.projection.cop(f.cop);
            let grf = ctx.projection.force(f.grf);
            let est = estimate_external_vertical_force(&ctx.sesc, &cfg, cop_x, grf)?;
            Ok(ExternalWrench::vertical_load(
                ctx.load_point,
                est.vertical_force,
            ))
        };
        let (load, full) = match ctx.mode {
            TaskMode::LoadEstimation => (estimated()?, None),
            TaskMode::LightTool => match ctx.tool_mass {
                Some(m) => (
                    ExternalWrench::vertical_load(ctx.load_point, m * GRAVITY),
                    None,
                ),
                None => (estimated()?, None),
            },
            TaskMode::MeasuredWrench => {
                let w = f.wrench.expect("checked on push");
                let full = ExternalWrench::new(
                    ctx.load_point,
                    ctx.projection.force([w[0], w[1], w[2]]),
                    ctx.projection.moment([w[3], w[4], w[5]]),
                );
                (full.vertical_only(), Some(full))
            }
        };
        let dtau = overloading_torque(&ctx.model, &cfg, &load)?.0;
        let w4 = overloading_torque_index(&dtau, &p.dtau_max)?;
        v.set(IndexKind::OverloadingTorque, w4);

        let dt = self.last_processed.map_or(0.0, |t| f.timestamp - t);
        self.last_processed = Some(f.timestamp);
        self.fatigue = update_fatigue(&self.fatigue, &p.fatigue, &dtau, dt)?;
        v.set(
            IndexKind::OverloadingFatigue,
            fatigue_index(&self.fatigue, &p.fatigue.max)?,
        );
        v.set(
            IndexKind::OverloadingPower,
            overloading_power_index(&w2, &w4),
        );

        if let Some(n) = &p.neutral {
            let z = sesc_com(&p.sesc, &cfg)?.y;
            v.set_com_energy(com_energy_index(z, Some(n.com_z), p.dcom_max)?);
        }
        if let (Some(w), Some(fc_max)) = (full, &p.fc_max) {
            let fc = compressive_forces(&ctx.model, &cfg, &w, None)?.0;
            v.set(
                IndexKind::CompressiveForce,
                compressive_force_index(&fc, fc_max)?,
            );
        }
        Ok(v)
    }

    /// Releases the samples still held by the differentiator.
    pub fn flush(&mut self) -> Result<Vec<IndexVector>> {
        let tail = self.diff.finish()?;
        self.drain(tail)
    }

    /// Aggregates of every window; fails if one is incomplete or empty.
    pub fn complete(&self) -> Result<Vec<WindowResult>> {
        Ok(self.results(self.aggregator.finish()?))
    }

    /// Aggregates of the windows that saw at least one sample.
    pub fn partial(&self) -> Vec<WindowResult> {
        self.results(self.aggregator.partial())
    }

    pub fn finish(mut self) -> Result<(Vec<IndexVector>, Vec<WindowResult>)> {
        let out = self.flush()?;
        Ok((out, self.complete()?))
    }

    fn results(&self, aggregates: Vec<ActionAggregate>) -> Vec<WindowResult> {
        aggregates
            .into_iter()
            .map(|a| {
                let config = self
                    .windows
                    .iter()
                    .find(|w| w.label == a.window.label)
                    .cloned()
                    .expect("aggregate belongs to a configured window");
                let emg_at_max = self.emg_at_max(&a);
                WindowResult {
                    config,
                    aggregate: a,
                    emg_at_max,
                }
            })
            .collect()
    }

    fn emg_at_max(&self, a: &ActionAggregate) -> Vec<EmgAtMax> {
        if self.emg_trace.is_empty() {
            return Vec::new();
        }
        let lookup = |t: f64| {
            self.emg_trace
                .binary_search_by(|(x, _)| x.total_cmp(&t))
                .ok()
                .map(|i| self.emg_trace[i].1)
        };
        let mut out = Vec::new();
        for kind in IndexKind::ALL {
            let joints: Vec<Option<Joint>> = if kind.is_per_joint() {
                Joint::ALL.iter().copied().map(Some).collect()
            } else {
                vec![None]
            };
            for joint in joints {
                let Some(stat) = a.stat(kind, joint.unwrap_or(Joint::Ankle)) else {
                    continue;
                };
                if let Some(activation) = lookup(stat.argmax_time) {
                    out.push(EmgAtMax {
                        index: kind,
                        joint,
                        time: stat.argmax_time,
                        activation,
                    });
                }
            }
        }
        out
    }
}

/// Runs a trial from an in-memory frame sequence.
pub fn run_frames(
    ctx: &SessionContext,
    label: &str,
    windows: &[WindowConfig],
    frames: impl IntoIterator<Item = KinodynamicFrame>,
    emg: Option<EmgTrack>,
) -> Result<TrialResult> {
    let mut p = TrialProcessor::new(ctx, windows, emg)?;
    for f in frames {
        p.push(f)?;
    }
    let n = p.frames();
    let (_, windows) = p.finish()?;
    Ok(TrialResult {
        label: label.to_string(),
        frames: n,
        skipped: 0,
        resampled: false,
        gaps: Vec::new(),
        aborted: None,
        windows,
    })
}

/// Runs a trial from a line stream. Bad records are skipped and counted; a
/// read error or a stream that ends before its windows are complete yields
/// a partial result with the reason recorded.
pub fn run_stream<R: BufRead>(
    ctx: &SessionContext,
    label: &str,
    windows: &[WindowConfig],
    mut reader: R,
    emg: Option<EmgTrack>,
    mut on_vector: impl FnMut(&IndexVector),
) -> Result<TrialResult> {
    let mut p = TrialProcessor::new(ctx, windows, emg)?;
    let mut decoder = LineDecoder::new();
    let mut line = String::new();
    let mut aborted = None;
    loop {
        line.clear();
        match reader.read_line(&mut line) {
            Ok(0) => break,
            Ok(_) => {}
            Err(e) => {
                aborted = Some(format!("stream reset: {e}"));
                break;
            }
        }
        let text = line.trim_end_matches(['\n', '\r']);
        if let Some(frame) = decoder.decode(text)? {
            for v in p.push(frame)? {
                on_vector(&v);
            }
        }
    }
    if decoder.schema().is_none() {
        return Err(Error::Input("stream ended before a header line".into()));
    }
    let frames = p.frames();
    let flushed = p.flush().map(|tail| tail.iter().for_each(&mut on_vector));
    let windows = match (&aborted, flushed) {
        (Some(_), _) => p.partial(),
        (None, Err(e)) => {
            aborted = Some(format!("incomplete session: {e}"));
            p.partial()
        }
        (None, Ok(())) => match p.complete() {
            Ok(w) => w,
            Err(e) => {
                aborted = Some(format!("incomplete session: {e}"));
                p.partial()
            }
        },
    };
    Ok(TrialResult {
        label: label.to_string(),
        frames,
        skipped: decoder.skipped(),
        resampled: false,
        gaps: Vec::new(),
        aborted,
        windows,
    })
}

/// Loads a trial's EMG file when one is configured.
pub fn load_emg(input: Option<&EmgInput>, profile: &SubjectProfile) -> Result<Option<EmgTrack>> {
    match (input, &profile.mvc) {
        (Some(i), Some(mvc)) => Ok(Some(EmgTrack::load(i, mvc)?)),
        (Some(_), None) => Err(Error::MissingProfileFields(vec!["mvc".into()])),
        _ => Ok(None),
    }
}

/// File name without directories, for reports that must not depend on
/// where the inputs live.
pub fn file_name(path: &Path) -> String {
    path.file_name().map_or_else(
        || path.display().to_string(),
        |n| n.to_string_lossy().into_owned(),
    )
}
