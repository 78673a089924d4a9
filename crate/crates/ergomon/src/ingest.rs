//! Frame ingestion from files and line streams.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ergomon_core::signal::resample_linear;
use serde::{Deserialize, Serialize};

use crate::frame::{is_blank_or_comment, KinodynamicFrame, Schema};
use crate::{Error, Result};

/// Largest deviation of a sample interval from the nominal period, as a
/// fraction of the period, for a file to count as uniformly sampled.
pub const TIMING_TOLERANCE: f64 = 0.01;

/// Interpolated stretch that exceeded the gap limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub channel: String,
    pub start: f64,
    pub end: f64,
    pub periods: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub schema: Schema,
    pub frames: Vec<KinodynamicFrame>,
    pub gaps: Vec<GapReport>,
    /// True when the input was interpolated onto the nominal grid.
    pub resampled: bool,
}

/// Reads a whole recording. Malformed rows and non-increasing timestamps
/// are errors naming the line. Missing cells or irregular timing trigger
/// linear resampling onto a grid at `rate`; otherwise frames pass through
/// unchanged.
pub fn read_frames<R: BufRead>(reader: R, rate: f64) -> Result<Recording> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::Config(format!(
            "frame rate must be positive, got {rate}"
        )));
    }
    let mut schema: Option<Schema> = None;
    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    let mut lines: Vec<usize> = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line.map_err(|e| Error::parse(line_no, e.to_string()))?;
        if is_blank_or_comment(&line) {
            continue;
        }
        let Some(s) = &schema else {
            schema = Some(Schema::parse_header(&line, line_no)?);
            continue;
        };
        let row = s.parse_row(&line, line_no)?;
        let Some(t) = row[time_column(s)] else {
            return Err(Error::parse(line_no, "missing timestamp"));
        };
        if let Some(prev) = rows.last().and_then(|r| r[time_column(s)]) {
            if !(t > prev) {
                return Err(Error::parse(
                    line_no,
                    format!("timestamp {t} does not increase (previous {prev})"),
                ));
            }
        }
        rows.push(row);
        lines.push(line_no);
    }
    let Some(schema) = schema else {
        return Err(Error::Input("empty input: no header line".into()));
    };
    if rows.is_empty() {
        return Err(Error::Input("input holds a header but no samples".into()));
    }
    let tc = time_column(&schema);
    let times: Vec<f64> = rows.iter().map(|r| r[tc].unwrap()).collect();
    let complete = rows.iter().all(|r| r.iter().all(Option::is_some));
    let period = 1.0 / rate;
    let uniform = times
        .windows(2)
        .all(|w| ((w[1] - w[0]) - period).abs() <= TIMING_TOLERANCE * period);
    if complete && uniform {
        let frames = rows
            .iter()
            .zip(&lines)
            .map(|(r, &l)| schema.frame(r, l))
            .collect::<Result<Vec<_>>>()?;
        return Ok(Recording {
            schema,
            frames,
            gaps: Vec::new(),
            resampled: false,
        });
    }
    if rows.len() < 2 {
        return Err(Error::Input(
            "a single incomplete sample cannot be resampled".into(),
        ));
    }
    let data_columns: Vec<usize> = (0..schema.len()).filter(|&c| c != tc).collect();
    let channels: Vec<Vec<Option<f64>>> = data_columns
        .iter()
        .map(|&c| rows.iter().map(|r| r[c]).collect())
        .collect();
    let res = resample_linear(&times, &channels, rate)?;
    for (ci, ch) in res.channels.iter().enumerate() {
        if ch.iter().any(|v| v.is_nan()) {
            return Err(Error::Input(format!(
                "channel '{}' holds no values",
                schema.names()[data_columns[ci]]
            )));
        }
    }
    let gaps = res
        .gaps
        .iter()
        .map(|g| GapReport {
            channel: schema.names()[data_columns[g.channel]].clone(),
            start: g.start,
            end: g.end,
            periods: g.periods,
        })
        .collect();
    let mut frames = Vec::with_capacity(res.times.len());
    for (i, t) in res.times.iter().enumerate() {
        let mut row = vec![None; schema.len()];
        row[tc] = Some(*t);
        for (ci, &c) in data_columns.iter().enumerate() {
            row[c] = Some(res.channels[ci][i]);
        }
        frames.push(schema.frame(&row, 0)?);
    }
    Ok(Recording {
        schema,
        frames,
        gaps,
        resampled: true,
    })
}

/// Opens and reads a recording; errors carry the file name.
pub fn load_frames(path: &Path, rate: f64) -> Result<Recording> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_frames(BufReader::new(file), rate).map_err(|e| match e {
        Error::Parse { .. } | Error::Input(_) => Error::format(path, e),
        other => other,
    })
}

fn time_column(schema: &Schema) -> usize {
    schema
        .names()
        .iter()
        .position(|n| n == crate::frame::TIME_COLUMN)
        .unwrap()
}

/// Line-at-a-time decoder for live streams. The header is mandatory and
/// fatal when invalid; afterwards malformed, incomplete or out-of-order
/// records are skipped and counted.
#[derive(Debug, Clone, Default)]
pub struct LineDecoder {
    schema: Option<Schema>,
    line: usize,
    last_t: Option<f64>,
    skipped: usize,
    last_problem: Option<String>,
}

impl LineDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn schema(&self) -> Option<&Schema> {
        self.schema.as_ref()
    }

    /// Records dropped so far.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    /// Description of the most recent dropped record.
    pub fn last_problem(&self) -> Option<&str> {
        self.last_problem.as_deref()
    }

    pub fn decode(&mut self, line: &str) -> Result<Option<KinodynamicFrame>> {
        self.line += 1;
        if is_blank_or_comment(line) {
            return Ok(None);
        }
        let Some(schema) = &self.schema else {
            self.schema = Some(Schema::parse_header(
                line.trim_end_matches('\r'),
                self.line,
            )?);
            return Ok(None);
        };
        let frame = schema
            .parse_row(line.trim_end_matches('\r'), self.line)
            .and_then(|row| schema.frame(&row, self.line));
        match frame {
            Ok(f) if self.last_t.is_some_and(|t| !(f.timestamp > t)) => {
                self.skip(format!(
                    "line {}: timestamp {} does not increase",
                    self.line, f.timestamp
                ));
                Ok(None)
            }
            Ok(f) => {
                self.last_t = Some(f.timestamp);
                Ok(Some(f))
            }
            Err(e) => {
                self.skip(e.to_string());
                Ok(None)
            }
        }
    }

    fn skip(&mut self, why: String) {
        self.skipped += 1;
        self.last_problem = Some(why);
    }
}
