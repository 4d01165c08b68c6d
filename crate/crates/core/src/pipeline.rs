//! Stream-to-report orchestration: resample, keep the configured locations
//! and channels, window, then run the subject-wise evaluation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    segment_windows, select_accel_channels, Window, DEFAULT_COMPONENTS, DEFAULT_OVERLAP, DEFAULT_WINDOW_SECONDS,
};
use crate::learn::{loso_experiment_windows, CalibrationOptions, ExperimentConfig, ExperimentReport, Scenario};
use crate::sensorsim::{downsample, ImuStream, Source};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Common rate every stream is decimated to, Hz.
    pub sample_rate: f64,
    /// Sensor locations, in feature order. Empty means the first stream's.
    pub locations: Vec<String>,
    pub accel_only: bool,
    pub window_seconds: f64,
    pub overlap: f64,
    pub n_components: usize,
    /// Rank calibration of virtual data; `None` disables it.
    pub calibration: Option<CalibrationOptions>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            sample_rate: 20.0,
            locations: Vec::new(),
            accel_only: true,
            window_seconds: DEFAULT_WINDOW_SECONDS,
            overlap: DEFAULT_OVERLAP,
            n_components: DEFAULT_COMPONENTS,
            calibration: Some(CalibrationOptions::default()),
        }
    }
}

impl PipelineConfig {
    /// The configured locations, or those of the first stream.
    pub fn locations_for<'a>(&'a self, streams: &'a [ImuStream]) -> Vec<&'a str> {
        if self.locations.is_empty() {
            streams.first().map(|s| s.locations()).unwrap_or_default()
        } else {
            self.locations.iter().map(String::as_str).collect()
        }
    }
}

/// Decimates one stream to the common rate and keeps the configured
/// locations and channels. Real streams need a subject; unlabelled virtual
/// streams get the subject `virtual`.
pub fn prepare_stream(stream: &ImuStream, locations: &[&str], cfg: &PipelineConfig) -> Result<ImuStream> {
    let describe = || format!("stream ({:?}, {:?})", stream.meta.subject, stream.meta.activity);
    if stream.meta.activity.is_none() {
        return Err(Error::Parameter(format!("{} has no activity label", describe())));
    }
    let mut s = stream.clone();
    if s.meta.subject.is_none() {
        if s.meta.source == Source::Real {
            return Err(Error::Parameter(format!("{} is real but has no subject", describe())));
        }
        s.meta.subject = Some("virtual".into());
    }
    if s.sample_rate() < cfg.sample_rate {
        return Err(Error::Parameter(format!(
            "{} is sampled at {} Hz, below the common rate {} Hz",
            describe(),
            s.sample_rate(),
            cfg.sample_rate
        )));
    }
    let mut s = downsample(&s, cfg.sample_rate)?.select_locations(locations)?;
    if cfg.accel_only {
        s = select_accel_channels(&s);
    }
    Ok(s)
}

/// Windows of every stream, in stream order.
pub fn prepare_windows(streams: &[ImuStream], locations: &[&str], cfg: &PipelineConfig) -> Result<Vec<Window>> {
    let per_stream = streams
        .par_iter()
        .map(|stream| {
            segment_windows(
                &prepare_stream(stream, locations, cfg)?,
                cfg.window_seconds,
                cfg.overlap,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_stream.into_iter().flatten().collect())
}

/// Real and virtual windows sharing one channel layout.
pub struct PreparedData {
    pub real: Vec<Window>,
    pub virtual_windows: Vec<Window>,
    pub locations: Vec<String>,
}

pub fn prepare_data(real: &[ImuStream], virtual_streams: &[ImuStream], cfg: &PipelineConfig) -> Result<PreparedData> {
    let locations = cfg.locations_for(real);
    if locations.is_empty() {
        return Err(Error::Parameter("no sensor locations to use".into()));
    }
    Ok(PreparedData {
        real: prepare_windows(real, &locations, cfg)?,
        virtual_windows: prepare_windows(virtual_streams, &locations, cfg)?,
        locations: locations.into_iter().map(str::to_string).collect(),
    })
}

/// One report per (scenario, fraction), scenarios outermost.
pub fn run_sweep(
    data: &PreparedData,
    scenarios: &[Scenario],
    fractions: &[f64],
    base: &ExperimentConfig,
    cfg: &PipelineConfig,
) -> Result<Vec<ExperimentReport>> {
    let mut reports = Vec::with_capacity(scenarios.len() * fractions.len());
    for &scenario in scenarios {
        for &real_fraction in fractions {
            let exp = ExperimentConfig {
                scenario,
                real_fraction,
                ..base.clone()
            };
            log::info!("experiment: scenario {scenario}, real fraction {real_fraction}");
            reports.push(loso_experiment_windows(
                &data.real,
                &data.virtual_windows,
                cfg.n_components,
                cfg.calibration.as_ref(),
                &exp,
            )?);
        }
    }
    Ok(reports)
}

/// Gnuplot-ready table: one row per fraction, mean and run std per scenario.
pub fn curve_table(reports: &[ExperimentReport]) -> String {
    let mut scenarios: Vec<Scenario> = reports.iter().map(|r| r.scenario).collect();
    scenarios.dedup();
    let mut fractions: Vec<f64> = reports.iter().map(|r| r.real_fraction).collect();
    fractions.sort_by(f64::total_cmp);
    fractions.dedup();
    let mut out = String::from("# real_fraction");
    for s in &scenarios {
        out.push_str(&format!(" {s}_mean {s}_std"));
    }
    out.push('\n');
    for f in fractions {
        out.push_str(&f.to_string());
        for s in &scenarios {
            match reports.iter().find(|r| r.scenario == *s && r.real_fraction == f) {
                Some(r) => out.push_str(&format!(" {} {}", r.mean_f1, r.run_std_f1)),
                None => out.push_str(" NaN NaN"),
            }
        }
        out.push('\n');
    }
    out
}
