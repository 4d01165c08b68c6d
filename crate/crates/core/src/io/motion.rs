use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MotionSequence, Skeleton, Vec3};

pub const MOTION_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct MotionFile {
    format_version: u32,
    frame_rate_hz: f64,
    joint_names: Vec<String>,
    frames: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    activity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    subject: Option<String>,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: Option<u32>,
}

/// Parses a motion JSON document; `path` is only used in diagnostics.
pub fn parse_motion(text: &str, skeleton: &Skeleton, path: &Path) -> Result<MotionSequence> {
    let bad = |reason: String| Error::format(path, reason);
    let probe: VersionProbe = serde_json::from_str(text).map_err(|e| bad(format!("not a motion file: {e}")))?;
    match probe.format_version {
        Some(MOTION_FORMAT_VERSION) => {}
        Some(v) => {
            return Err(bad(format!(
                "unsupported format_version {v} (expected {MOTION_FORMAT_VERSION})"
            )))
        }
        None => return Err(bad("missing format_version".into())),
    }
    let file: MotionFile = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;

    if file.joint_names.len() != skeleton.len() {
        return Err(bad(format!(
            "joint count mismatch: file lists {} joints, skeleton has {}",
            file.joint_names.len(),
            skeleton.len()
        )));
    }
    for (i, (got, want)) in file.joint_names.iter().zip(skeleton.names()).enumerate() {
        if got != want {
            return Err(bad(format!(
                "joint name mismatch at index {i}: `{got}`, expected `{want}`"
            )));
        }
    }
    let mut frames = Vec::with_capacity(file.frames.len());
    for (t, f) in file.frames.iter().enumerate() {
        if f.len() != skeleton.len() {
            return Err(bad(format!(
                "ragged frames: frame {t} has {} joints, expected {}",
                f.len(),
                skeleton.len()
            )));
        }
        let mut frame = Vec::with_capacity(f.len());
        for (j, p) in f.iter().enumerate() {
            if p.len() != 3 {
                return Err(bad(format!(
                    "ragged frames: frame {t} joint {j} has {} coordinates",
                    p.len()
                )));
            }
            frame.push(Vec3::new(p[0], p[1], p[2]));
        }
        frames.push(frame);
    }
    let mut motion = MotionSequence::new(file.frame_rate_hz, frames).map_err(|e| bad(e.to_string()))?;
    motion.label = file.activity;
    motion.prompt = file.prompt;
    motion.subject = file.subject;
    Ok(motion)
}

pub fn read_motion_file(path: impl AsRef<Path>, skeleton: &Skeleton) -> Result<MotionSequence> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_motion(&text, skeleton, path)
}

pub fn motion_to_json(motion: &MotionSequence, skeleton: &Skeleton) -> Result<String> {
    motion.check_skeleton(skeleton)?;
    let file = MotionFile {
        format_version: MOTION_FORMAT_VERSION,
        frame_rate_hz: motion.frame_rate(),
        joint_names: skeleton.names().map(str::to_string).collect(),
        frames: motion
            .frames()
            .iter()
            .map(|f| f.iter().map(|p| vec![p.x, p.y, p.z]).collect())
            .collect(),
        activity: motion.label.clone(),
        prompt: motion.prompt.clone(),
        subject: motion.subject.clone(),
    };
    Ok(serde_json::to_string(&file)?)
}

pub fn write_motion_file(path: impl AsRef<Path>, motion: &MotionSequence, skeleton: &Skeleton) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, motion_to_json(motion, skeleton)?).map_err(|e| Error::io(path, e))
}
