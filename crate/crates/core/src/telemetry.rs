//! Per-step scheduler telemetry and its CSV form.
//!
//! Column order is fixed: `step, heap_size, solved, unsolved, unseen,
//! success_std, n_prioritized, n_exploration, n_retest_solved,
//! n_retest_unsolved`. Floats are written in shortest round-trip form, so a
//! written file reads back to identical samples.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySample {
    pub step: u64,
    /// Problems in the active structure.
    pub heap_size: usize,
    pub solved: usize,
    pub unsolved: usize,
    /// Problems never evaluated.
    pub unseen: usize,
    /// Population standard deviation of the smoothed success rate over
    /// evaluated problems; 0 when none have been evaluated.
    pub success_std: f64,
    pub n_prioritized: usize,
    pub n_exploration: usize,
    pub n_retest_solved: usize,
    pub n_retest_unsolved: usize,
}

/// Append-only collector owned by a run loop.
#[derive(Clone, Debug, Default)]
pub struct TelemetryLog {
    samples: Vec<TelemetrySample>,
}

impl TelemetryLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, sample: TelemetrySample) {
        self.samples.push(sample);
    }

    pub fn samples(&self) -> &[TelemetrySample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<TelemetrySample> {
        self.samples
    }

    pub fn series<F: Fn(&TelemetrySample) -> f64>(&self, f: F) -> Vec<f64> {
        self.samples.iter().map(f).collect()
    }
}

impl From<Vec<TelemetrySample>> for TelemetryLog {
    fn from(samples: Vec<TelemetrySample>) -> Self {
        TelemetryLog { samples }
    }
}

/// Trailing moving average: element `i` is the mean of the last `window`
/// values up to and including `i` (fewer at the start).
pub fn smooth(series: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    (0..series.len())
        .map(|i| {
            let slice = &series[(i + 1).saturating_sub(window)..=i];
            // mean of deviations from the current value keeps constant
            // stretches exact
            let anchor = series[i];
            let dev: f64 = slice.iter().map(|x| x - anchor).sum();
            anchor + dev / slice.len() as f64
        })
        .collect()
}

pub fn write_csv<W: Write>(
    samples: &[TelemetrySample],
    writer: W,
) -> std::result::Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(HEADER)?;
    for s in samples {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(reader: R) -> std::result::Result<Vec<TelemetrySample>, csv::Error> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize().collect()
}

pub const HEADER: [&str; 10] = [
    "step",
    "heap_size",
    "solved",
    "unsolved",
    "unseen",
    "success_std",
    "n_prioritized",
    "n_exploration",
    "n_retest_solved",
    "n_retest_unsolved",
];

/// Write `samples` to `path` with a header row.
pub fn emit_csv(samples: &[TelemetrySample], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    write_csv(samples, std::io::BufWriter::new(file)).map_err(|source| Error::Csv {
        path: path.to_owned(),
        source,
    })
}

pub fn load_csv(path: &Path) -> Result<Vec<TelemetrySample>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    read_csv(file).map_err(|source| Error::Csv {
        path: path.to_owned(),
        source,
    })
}
