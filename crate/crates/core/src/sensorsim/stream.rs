use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Real,
    Virtual,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Real => "real",
            Source::Virtual => "virtual",
        })
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(Source::Real),
            "virtual" => Ok(Source::Virtual),
            other => Err(Error::Parameter(format!("unknown source `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamMeta {
    pub activity: Option<String>,
    pub subject: Option<String>,
    pub source: Source,
}

impl Default for StreamMeta {
    fn default() -> Self {
        StreamMeta {
            activity: None,
            subject: None,
            source: Source::Virtual,
        }
    }
}

/// Samples of one sensor location. Accelerometer in m/s^2, gyroscope in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorChannels {
    pub location: String,
    pub accel: Vec<[f64; 3]>,
    pub gyro: Option<Vec<[f64; 3]>>,
}

pub const ACCEL_AXES: [&str; 3] = ["ax", "ay", "az"];
pub const GYRO_AXES: [&str; 3] = ["gx", "gy", "gz"];

/// Multi-location 6-axis time series with activity/subject/source metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ImuStream {
    sample_rate: f64,
    sensors: Vec<SensorChannels>,
    pub meta: StreamMeta,
}

impl ImuStream {
    pub fn new(sample_rate: f64, sensors: Vec<SensorChannels>, meta: StreamMeta) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::Parameter(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if let Some(first) = sensors.first() {
            let n = first.accel.len();
            for s in &sensors {
                if s.accel.len() != n {
                    return Err(Error::Shape(format!(
                        "location `{}` has {} samples, `{}` has {n}",
                        s.location,
                        s.accel.len(),
                        first.location
                    )));
                }
                if let Some(g) = &s.gyro {
                    if g.len() != n {
                        return Err(Error::Shape(format!(
                            "location `{}`: {} gyro vs {n} accel samples",
                            s.location,
                            g.len()
                        )));
                    }
                }
                let finite = s.accel.iter().flatten().all(|v| v.is_finite())
                    && s.gyro.iter().flatten().flatten().all(|v| v.is_finite());
                if !finite {
                    return Err(Error::NonFinite(format!("location `{}`", s.location)));
                }
            }
            for (i, s) in sensors.iter().enumerate() {
                if sensors[..i].iter().any(|o| o.location == s.location) {
                    return Err(Error::Shape(format!("duplicate location `{}`", s.location)));
                }
            }
        }
        Ok(ImuStream {
            sample_rate,
            sensors,
            meta,
        })
    }

    pub fn with_meta(mut self, meta: StreamMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn sensors(&self) -> &[SensorChannels] {
        &self.sensors
    }

    pub fn into_sensors(self) -> Vec<SensorChannels> {
        self.sensors
    }

    pub fn len(&self) -> usize {
        self.sensors.first().map_or(0, |s| s.accel.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn locations(&self) -> Vec<&str> {
        self.sensors.iter().map(|s| s.location.as_str()).collect()
    }

    /// Channel names in layout order: per location, `loc/ax..az` then
    /// `loc/gx..gz` when gyro is present.
    pub fn channel_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for s in &self.sensors {
            for a in ACCEL_AXES {
                names.push(channel_name(&s.location, a));
            }
            if s.gyro.is_some() {
                for a in GYRO_AXES {
                    names.push(channel_name(&s.location, a));
                }
            }
        }
        names
    }

    pub fn n_channels(&self) -> usize {
        self.sensors.iter().map(|s| if s.gyro.is_some() { 6 } else { 3 }).sum()
    }

    /// Sample-major matrix `[t][channel]` in [`ImuStream::channel_names`] order.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|t| {
                let mut row = Vec::with_capacity(self.n_channels());
                for s in &self.sensors {
                    row.extend_from_slice(&s.accel[t]);
                    if let Some(g) = &s.gyro {
                        row.extend_from_slice(&g[t]);
                    }
                }
                row
            })
            .collect()
    }

    /// Applies `f(channel_name, value)` to every value.
    pub fn map_values(&self, mut f: impl FnMut(&str, f64) -> Result<f64>) -> Result<ImuStream> {
        let mut out = self.clone();
        for s in &mut out.sensors {
            let accel_names = ACCEL_AXES.map(|a| channel_name(&s.location, a));
            for v in &mut s.accel {
                for k in 0..3 {
                    v[k] = f(&accel_names[k], v[k])?;
                }
            }
            if let Some(g) = &mut s.gyro {
                let gyro_names = GYRO_AXES.map(|a| channel_name(&s.location, a));
                for v in g.iter_mut() {
                    for k in 0..3 {
                        v[k] = f(&gyro_names[k], v[k])?;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Copy with only the named locations, in the given order.
    pub fn select_locations(&self, locations: &[&str]) -> Result<ImuStream> {
        let sensors = locations
            .iter()
            .map(|loc| {
                self.sensors
                    .iter()
                    .find(|s| s.location == *loc)
                    .cloned()
                    .ok_or_else(|| Error::UnknownChannel(loc.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        ImuStream::new(self.sample_rate, sensors, self.meta.clone())
    }

    /// Copy keeping samples `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> ImuStream {
        let sensors = self
            .sensors
            .iter()
            .map(|s| SensorChannels {
                location: s.location.clone(),
                accel: s.accel[range.clone()].to_vec(),
                gyro: s.gyro.as_ref().map(|g| g[range.clone()].to_vec()),
            })
            .collect();
        ImuStream {
            sample_rate: self.sample_rate,
            sensors,
            meta: self.meta.clone(),
        }
    }
}

pub fn channel_name(location: &str, axis: &str) -> String {
    format!("{location}/{axis}")
}
