//! Sliding-window segmentation and ECDF features.
//!
//! A window's feature vector holds, per channel, the inverse empirical CDF
//! sampled at `n_components` evenly spaced probabilities (endpoints
//! included) followed by the channel mean. Channels appear in stream layout
//! order, i.e. sensor locations in placement order.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::calibration::empirical_quantile;
use crate::error::{Error, Result};
use crate::sensorsim::{ImuStream, SensorChannels, Source};

pub const DEFAULT_WINDOW_SECONDS: f64 = 2.0;
pub const DEFAULT_OVERLAP: f64 = 0.5;
pub const DEFAULT_COMPONENTS: usize = 15;

#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    /// `samples[n][c]`
    pub samples: Vec<Vec<f64>>,
    pub channels: Vec<String>,
    pub label: String,
    pub subject: String,
    pub source: Source,
}

impl Window {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    /// Applies `f(channel_name, value)` to every sample.
    pub fn map_values(&self, mut f: impl FnMut(&str, f64) -> Result<f64>) -> Result<Window> {
        let mut out = self.clone();
        for row in &mut out.samples {
            for (name, v) in self.channels.iter().zip(row.iter_mut()) {
                *v = f(name, *v)?;
            }
        }
        Ok(out)
    }
}

/// Window length in samples; must be a whole number.
pub fn window_len(window_seconds: f64, sample_rate: f64) -> Result<usize> {
    let n = window_seconds * sample_rate;
    let rounded = n.round();
    if !(rounded >= 1.0) || (n - rounded).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::Parameter(format!(
            "window of {window_seconds} s at {sample_rate} Hz is not a whole number of samples"
        )));
    }
    Ok(rounded as usize)
}

/// Hop between window starts: `round(len * (1 - overlap))`, at least 1.
pub fn window_step(len: usize, overlap: f64) -> usize {
    ((len as f64 * (1.0 - overlap)).round() as usize).max(1)
}

/// Start indices of the full windows that fit in `total` samples.
pub fn window_starts(total: usize, len: usize, step: usize) -> Vec<usize> {
    if total < len {
        return Vec::new();
    }
    (0..=total - len).step_by(step).collect()
}

/// Cuts a stream into full windows; a trailing partial window is dropped.
pub fn segment_windows(stream: &ImuStream, window_seconds: f64, overlap: f64) -> Result<Vec<Window>> {
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::Parameter(format!("overlap must be in [0, 1), got {overlap}")));
    }
    let len = window_len(window_seconds, stream.sample_rate())?;
    let step = window_step(len, overlap);
    if stream.len() < len {
        log::warn!(
            "stream ({:?}, {:?}) has {} samples, shorter than one {len}-sample window",
            stream.meta.subject,
            stream.meta.activity,
            stream.len()
        );
        return Ok(Vec::new());
    }
    let rows = stream.to_rows();
    let channels = stream.channel_names();
    let label = stream.meta.activity.clone().unwrap_or_default();
    let subject = stream.meta.subject.clone().unwrap_or_default();
    Ok(window_starts(rows.len(), len, step)
        .into_iter()
        .map(|s| Window {
            samples: rows[s..s + len].to_vec(),
            channels: channels.clone(),
            label: label.clone(),
            subject: subject.clone(),
            source: stream.meta.source,
        })
        .collect())
}

/// ECDF feature vector of length `channels * (n_components + 1)`.
pub fn ecdf_features(window: &Window, n_components: usize) -> Result<Vec<f64>> {
    if n_components < 2 {
        return Err(Error::Parameter(format!(
            "n_components must be >= 2, got {n_components}"
        )));
    }
    if window.is_empty() || window.n_channels() == 0 {
        return Err(Error::Shape("empty window".into()));
    }
    let n = window.len();
    let mut out = Vec::with_capacity(window.n_channels() * (n_components + 1));
    let mut column = Vec::with_capacity(n);
    for c in 0..window.n_channels() {
        column.clear();
        column.extend(window.samples.iter().map(|row| row[c]));
        if column.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("window channel `{}`", window.channels[c])));
        }
        // summed after sorting so equal multisets give bitwise-equal means
        column.sort_by(f64::total_cmp);
        let mean = column.iter().sum::<f64>() / n as f64;
        out.extend((0..n_components).map(|i| empirical_quantile(&column, i as f64 / (n_components - 1) as f64)));
        out.push(mean);
    }
    Ok(out)
}

/// Drops gyroscope channels.
pub fn select_accel_channels(stream: &ImuStream) -> ImuStream {
    if stream.sensors().is_empty() {
        log::warn!("select_accel_channels: stream has no sensor locations");
    }
    let sensors = stream
        .sensors()
        .iter()
        .map(|s| SensorChannels {
            location: s.location.clone(),
            accel: s.accel.clone(),
            gyro: None,
        })
        .collect();
    ImuStream::new(stream.sample_rate(), sensors, stream.meta.clone()).expect("subset of a valid stream")
}

/// Labeled feature vectors, one row per window.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureMatrix {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<String>,
    pub subjects: Vec<String>,
    pub sources: Vec<Source>,
    feature_dim: usize,
}

impl FeatureMatrix {
    pub fn new(feature_dim: usize) -> Self {
        FeatureMatrix {
            feature_dim,
            ..Default::default()
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: Vec<f64>, label: String, subject: String, source: Source) -> Result<()> {
        if row.len() != self.feature_dim {
            return Err(Error::Shape(format!(
                "feature row has {} values, matrix has dimension {}",
                row.len(),
                self.feature_dim
            )));
        }
        self.rows.push(row);
        self.labels.push(label);
        self.subjects.push(subject);
        self.sources.push(source);
        Ok(())
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
            subjects: indices.iter().map(|&i| self.subjects[i].clone()).collect(),
            sources: indices.iter().map(|&i| self.sources[i]).collect(),
            feature_dim: self.feature_dim,
        }
    }

    pub fn append(&mut self, other: &FeatureMatrix) -> Result<()> {
        if !other.is_empty() && other.feature_dim != self.feature_dim {
            return Err(Error::Shape(format!(
                "cannot append dimension {} to dimension {}",
                other.feature_dim, self.feature_dim
            )));
        }
        self.rows.extend(other.rows.iter().cloned());
        self.labels.extend(other.labels.iter().cloned());
        self.subjects.extend(other.subjects.iter().cloned());
        self.sources.extend(other.sources.iter().copied());
        Ok(())
    }

    /// Distinct subject ids in sorted order.
    pub fn subject_ids(&self) -> Vec<String> {
        let mut s = self.subjects.clone();
        s.sort();
        s.dedup();
        s
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        write!(w, "label,subject,source")?;
        for i in 0..self.feature_dim {
            write!(w, ",f{i}")?;
        }
        writeln!(w)?;
        for (i, row) in self.rows.iter().enumerate() {
            write!(w, "{},{},{}", self.labels[i], self.subjects[i], self.sources[i])?;
            for v in row {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::format(path, "empty file"))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 3 || cols[..3] != ["label", "subject", "source"] {
            return Err(Error::record(path, 1, "header must start with label,subject,source"));
        }
        for (i, c) in cols[3..].iter().enumerate() {
            if *c != format!("f{i}") {
                return Err(Error::record(path, 1, format!("expected column f{i}, found `{c}`")));
            }
        }
        let mut m = FeatureMatrix::new(cols.len() - 3);
        for (n, line) in lines.enumerate() {
            let line_no = n + 2;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols.len() {
                return Err(Error::record(
                    path,
                    line_no,
                    format!("expected {} fields, found {}", cols.len(), fields.len()),
                ));
            }
            let source: Source = fields[2]
                .parse()
                .map_err(|e: Error| Error::record(path, line_no, e.to_string()))?;
            let row = fields[3..]
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::record(path, line_no, format!("bad feature value `{f}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            m.push(row, fields[0].to_string(), fields[1].to_string(), source)?;
        }
        Ok(m)
    }
}

/// ECDF features of every window. All windows must share one channel layout.
pub fn featurize(windows: &[Window], n_components: usize) -> Result<FeatureMatrix> {
    let Some(first) = windows.first() else {
        return Ok(FeatureMatrix::new(0));
    };
    if let Some(w) = windows.iter().find(|w| w.channels != first.channels) {
        return Err(Error::Shape(format!(
            "window channel layout {:?} differs from {:?}",
            w.channels, first.channels
        )));
    }
    let rows = windows
        .par_iter()
        .map(|w| ecdf_features(w, n_components))
        .collect::<Result<Vec<_>>>()?;
    let mut m = FeatureMatrix::new(first.n_channels() * (n_components + 1));
    for (w, row) in windows.iter().zip(rows) {
        m.push(row, w.label.clone(), w.subject.clone(), w.source)?;
    }
    Ok(m)
}
