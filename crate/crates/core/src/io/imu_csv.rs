//! IMU samples as CSV: `t_s,subject,activity,location,ax,ay,az[,gx,gy,gz]`.
//!
//! One file may hold many streams. Rows are grouped into contiguous runs of
//! equal (subject, activity); inside a run, each location forms one sensor
//! of the stream, in order of first appearance.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sensorsim::{ImuStream, SensorChannels, Source, StreamMeta};

const BASE_COLUMNS: [&str; 7] = ["t_s", "subject", "activity", "location", "ax", "ay", "az"];
const GYRO_COLUMNS: [&str; 3] = ["gx", "gy", "gz"];

/// Largest deviation of a sampling interval from the median interval, seconds.
pub const TIME_JITTER_TOLERANCE: f64 = 1e-6;

struct LocationRun {
    location: String,
    times: Vec<f64>,
    lines: Vec<usize>,
    accel: Vec<[f64; 3]>,
    gyro: Vec<[f64; 3]>,
}

struct Segment {
    subject: String,
    activity: String,
    locations: Vec<LocationRun>,
}

pub fn read_imu_csv(path: impl AsRef<Path>, source: Source) -> Result<Vec<ImuStream>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_imu_csv(file, path, source)
}

/// Parses CSV text from `reader`; `path` is only used in diagnostics.
pub fn parse_imu_csv(reader: impl Read, path: &Path, source: Source) -> Result<Vec<ImuStream>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::format(path, e.to_string()))?.clone();
    let names: Vec<&str> = header.iter().collect();
    let has_gyro = match names.len() {
        7 => false,
        10 => true,
        _ => {
            return Err(Error::record(
                path,
                1,
                format!("expected 7 or 10 columns, header has {}", names.len()),
            ))
        }
    };
    let expected: Vec<&str> = BASE_COLUMNS
        .iter()
        .chain(if has_gyro { &GYRO_COLUMNS[..] } else { &[] })
        .copied()
        .collect();
    if names != expected {
        return Err(Error::record(
            path,
            1,
            format!("header {names:?} does not match {expected:?}"),
        ));
    }

    let mut segments: Vec<Segment> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::record(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let number = |k: usize| -> Result<f64> {
            let f = &record[k];
            f.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::record(path, line, format!("bad {} value `{f}`", expected[k])))
        };
        let t = number(0)?;
        let accel = [number(4)?, number(5)?, number(6)?];
        let gyro = if has_gyro {
            [number(7)?, number(8)?, number(9)?]
        } else {
            [0.0; 3]
        };
        let (subject, activity, location) = (&record[1], &record[2], &record[3]);
        if location.is_empty() {
            return Err(Error::record(path, line, "empty location"));
        }

        let continues = segments
            .last()
            .is_some_and(|s| s.subject == subject && s.activity == activity);
        if !continues {
            segments.push(Segment {
                subject: subject.to_string(),
                activity: activity.to_string(),
                locations: Vec::new(),
            });
        }
        let seg = segments.last_mut().expect("just ensured");
        let run = match seg.locations.iter().position(|l| l.location == location) {
            Some(i) => &mut seg.locations[i],
            None => {
                seg.locations.push(LocationRun {
                    location: location.to_string(),
                    times: Vec::new(),
                    lines: Vec::new(),
                    accel: Vec::new(),
                    gyro: Vec::new(),
                });
                seg.locations.last_mut().expect("just pushed")
            }
        };
        if let Some(&prev) = run.times.last() {
            if t <= prev {
                return Err(Error::record(
                    path,
                    line,
                    format!("non-monotone time: t_s {t} follows {prev} for location `{location}`"),
                ));
            }
        }
        run.times.push(t);
        run.lines.push(line);
        run.accel.push(accel);
        run.gyro.push(gyro);
    }

    segments
        .into_iter()
        .map(|seg| finish_segment(seg, has_gyro, source, path))
        .collect()
}

fn finish_segment(seg: Segment, has_gyro: bool, source: Source, path: &Path) -> Result<ImuStream> {
    let mut rate: Option<f64> = None;
    let mut sensors = Vec::with_capacity(seg.locations.len());
    for run in seg.locations {
        let group = format!(
            "subject `{}`, activity `{}`, location `{}`",
            seg.subject, seg.activity, run.location
        );
        if run.times.len() < 2 {
            return Err(Error::record(
                path,
                run.lines[0],
                format!("{group}: need at least 2 samples to infer the sample rate"),
            ));
        }
        let dts: Vec<f64> = run.times.windows(2).map(|w| w[1] - w[0]).collect();
        let mut sorted = dts.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        if let Some(k) = dts.iter().position(|dt| (dt - median).abs() > TIME_JITTER_TOLERANCE) {
            return Err(Error::record(
                path,
                run.lines[k + 1],
                format!("{group}: mixed rates, interval {} s against median {median} s", dts[k]),
            ));
        }
        let mut r = 1.0 / median;
        if (r - r.round()).abs() < 1e-6 * r {
            r = r.round();
        }
        match rate {
            None => rate = Some(r),
            Some(r0) if (r - r0).abs() > 1e-9 * r0 => {
                return Err(Error::record(
                    path,
                    run.lines[0],
                    format!("{group}: mixed rates, {r} Hz against {r0} Hz for earlier locations"),
                ))
            }
            Some(_) => {}
        }
        sensors.push(SensorChannels {
            location: run.location,
            accel: run.accel,
            gyro: has_gyro.then_some(run.gyro),
        });
    }
    let nonempty = |s: String| (!s.is_empty()).then_some(s);
    let meta = StreamMeta {
        activity: nonempty(seg.activity),
        subject: nonempty(seg.subject),
        source,
    };
    ImuStream::new(rate.expect("segments are never empty"), sensors, meta)
        .map_err(|e| Error::format(path, e.to_string()))
}

/// Writes streams with timestamps `k / sample_rate`. Values use the shortest
/// decimal form that parses back to the same `f64`.
pub fn write_imu_csv_to(streams: &[ImuStream], writer: impl Write) -> Result<()> {
    let all_gyro = streams.iter().flat_map(|s| s.sensors()).all(|s| s.gyro.is_some());
    let any_gyro = streams.iter().flat_map(|s| s.sensors()).any(|s| s.gyro.is_some());
    if any_gyro && !all_gyro {
        return Err(Error::ChannelMismatch(
            "some sensors have gyroscope data and some do not".into(),
        ));
    }
    for pair in streams.windows(2) {
        if pair[0].meta.subject == pair[1].meta.subject && pair[0].meta.activity == pair[1].meta.activity {
            return Err(Error::Parameter(format!(
                "consecutive streams share subject {:?} and activity {:?} and would merge when read back",
                pair[0].meta.subject, pair[0].meta.activity
            )));
        }
    }
    let csv_err = |e: csv::Error| Error::Parameter(format!("csv output: {e}"));
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = BASE_COLUMNS.to_vec();
    if all_gyro && any_gyro {
        header.extend_from_slice(&GYRO_COLUMNS);
    }
    w.write_record(&header).map_err(csv_err)?;
    let mut fields: Vec<String> = Vec::with_capacity(header.len());
    for stream in streams {
        let subject = stream.meta.subject.as_deref().unwrap_or("");
        let activity = stream.meta.activity.as_deref().unwrap_or("");
        for k in 0..stream.len() {
            let t = k as f64 / stream.sample_rate();
            for s in stream.sensors() {
                fields.clear();
                fields.push(t.to_string());
                fields.push(subject.to_string());
                fields.push(activity.to_string());
                fields.push(s.location.clone());
                fields.extend(s.accel[k].iter().map(f64::to_string));
                if let Some(g) = &s.gyro {
                    fields.extend(g[k].iter().map(f64::to_string));
                }
                w.write_record(&fields).map_err(csv_err)?;
            }
        }
    }
    w.flush().map_err(|e| Error::Parameter(format!("csv output: {e}")))?;
    Ok(())
}

pub fn write_imu_csv(streams: &[ImuStream], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_imu_csv_to(streams, &mut buf)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}
