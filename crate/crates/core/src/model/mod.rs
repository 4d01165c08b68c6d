//! Skeleton, motion and pose types shared across the pipeline.

mod quat;
mod skeleton;

pub use quat::{make_sign_continuous, Quat, Vec3};
pub use skeleton::{JointDef, Skeleton};

use crate::error::{Error, Result};

/// Global 3D joint positions sampled at a fixed frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    frame_rate: f64,
    /// `frames[t][j]`, meters.
    frames: Vec<Vec<Vec3>>,
    pub label: Option<String>,
    pub subject: Option<String>,
    pub prompt: Option<String>,
}

impl MotionSequence {
    pub fn new(frame_rate: f64, frames: Vec<Vec<Vec3>>) -> Result<Self> {
        if !(frame_rate > 0.0 && frame_rate.is_finite()) {
            return Err(Error::Parameter(format!(
                "frame rate must be positive, got {frame_rate}"
            )));
        }
        if frames.len() < 2 {
            return Err(Error::Shape(format!(
                "motion needs at least 2 frames, got {}",
                frames.len()
            )));
        }
        let joints = frames[0].len();
        if joints == 0 {
            return Err(Error::Shape("motion frames have no joints".into()));
        }
        for (t, f) in frames.iter().enumerate() {
            if f.len() != joints {
                return Err(Error::Shape(format!(
                    "frame {t} has {} joints, frame 0 has {joints}",
                    f.len()
                )));
            }
            if !f.iter().all(|p| p.iter().all(|v| v.is_finite())) {
                return Err(Error::NonFinite(format!("frame {t} has a non-finite coordinate")));
            }
        }
        Ok(MotionSequence {
            frame_rate,
            frames,
            label: None,
            subject: None,
            prompt: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn with_subject(mut self, subject: impl Into<String>) -> Self {
        self.subject = Some(subject.into());
        self
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn frames(&self) -> &[Vec<Vec3>] {
        &self.frames
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn n_joints(&self) -> usize {
        self.frames[0].len()
    }

    pub fn duration(&self) -> f64 {
        (self.frames.len() - 1) as f64 / self.frame_rate
    }

    pub fn check_skeleton(&self, skeleton: &Skeleton) -> Result<()> {
        if self.n_joints() != skeleton.len() {
            return Err(Error::Shape(format!(
                "motion has {} joints, skeleton has {}",
                self.n_joints(),
                skeleton.len()
            )));
        }
        Ok(())
    }

    /// Copy with every position shifted by `offset`.
    pub fn translated(&self, offset: Vec3) -> Self {
        let mut out = self.clone();
        for f in &mut out.frames {
            for p in f.iter_mut() {
                *p += offset;
            }
        }
        out
    }

    /// Copy with every position rotated about the world origin.
    pub fn rotated(&self, q: Quat) -> Self {
        let mut out = self.clone();
        for f in &mut out.frames {
            for p in f.iter_mut() {
                *p = q.rotate(*p);
            }
        }
        out
    }
}

/// Root translation plus per-joint local rotations over time.
///
/// `local_rotations[t][j]` rotates joint `j`'s frame relative to its parent's
/// frame; for the root it is relative to the world.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseTrajectory {
    frame_rate: f64,
    root_translation: Vec<Vec3>,
    local_rotations: Vec<Vec<Quat>>,
}

impl PoseTrajectory {
    /// Validates shapes and unit norms, then enforces temporal sign continuity.
    pub fn new(frame_rate: f64, root_translation: Vec<Vec3>, mut local_rotations: Vec<Vec<Quat>>) -> Result<Self> {
        if !(frame_rate > 0.0 && frame_rate.is_finite()) {
            return Err(Error::Parameter(format!(
                "frame rate must be positive, got {frame_rate}"
            )));
        }
        if root_translation.len() != local_rotations.len() {
            return Err(Error::Shape(format!(
                "{} root translations but {} rotation frames",
                root_translation.len(),
                local_rotations.len()
            )));
        }
        if root_translation.is_empty() {
            return Err(Error::Shape("empty pose trajectory".into()));
        }
        let joints = local_rotations[0].len();
        for (t, (r, rots)) in root_translation.iter().zip(&local_rotations).enumerate() {
            if rots.len() != joints {
                return Err(Error::Shape(format!(
                    "frame {t} has {} rotations, expected {joints}",
                    rots.len()
                )));
            }
            if !r.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("root translation at frame {t}")));
            }
            for (j, q) in rots.iter().enumerate() {
                if !q.is_finite() {
                    return Err(Error::NonFinite(format!("rotation of joint {j} at frame {t}")));
                }
                if (q.norm() - 1.0).abs() > 1e-6 {
                    return Err(Error::Parameter(format!(
                        "rotation of joint {j} at frame {t} is not unit (norm {})",
                        q.norm()
                    )));
                }
            }
        }
        for rots in local_rotations.iter_mut() {
            for q in rots.iter_mut() {
                *q = q.normalized();
            }
        }
        for j in 0..joints {
            for t in 1..local_rotations.len() {
                if local_rotations[t][j].dot(&local_rotations[t - 1][j]) < 0.0 {
                    local_rotations[t][j] = -local_rotations[t][j];
                }
            }
        }
        Ok(PoseTrajectory {
            frame_rate,
            root_translation,
            local_rotations,
        })
    }

    /// All-identity pose with the root at the origin.
    pub fn rest(skeleton: &Skeleton, frame_rate: f64, n_frames: usize) -> Result<Self> {
        Self::new(
            frame_rate,
            vec![Vec3::zeros(); n_frames],
            vec![vec![Quat::IDENTITY; skeleton.len()]; n_frames],
        )
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn n_frames(&self) -> usize {
        self.root_translation.len()
    }

    pub fn n_joints(&self) -> usize {
        self.local_rotations[0].len()
    }

    pub fn duration(&self) -> f64 {
        (self.n_frames() - 1) as f64 / self.frame_rate
    }

    pub fn root_translation(&self) -> &[Vec3] {
        &self.root_translation
    }

    pub fn local_rotations(&self) -> &[Vec<Quat>] {
        &self.local_rotations
    }

    pub fn check_skeleton(&self, skeleton: &Skeleton) -> Result<()> {
        if self.n_joints() != skeleton.len() {
            return Err(Error::Shape(format!(
                "pose has {} joints, skeleton has {}",
                self.n_joints(),
                skeleton.len()
            )));
        }
        Ok(())
    }

    /// Copy with a constant offset added to the root translation.
    pub fn translated(&self, offset: Vec3) -> Self {
        let mut out = self.clone();
        for r in &mut out.root_translation {
            *r += offset;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn motion_rejects_short_ragged_and_nan() {
        let f = vec![Vec3::zeros(); 3];
        assert!(MotionSequence::new(20.0, vec![f.clone()]).is_err());
        assert!(MotionSequence::new(20.0, vec![f.clone(), vec![Vec3::zeros(); 2]]).is_err());
        let mut bad = f.clone();
        bad[1].y = f64::NAN;
        assert!(MotionSequence::new(20.0, vec![f.clone(), bad]).is_err());
        assert!(MotionSequence::new(0.0, vec![f.clone(), f.clone()]).is_err());
        assert!(MotionSequence::new(20.0, vec![f.clone(), f]).is_ok());
    }

    #[test]
    fn pose_enforces_sign_continuity() {
        let q = Quat::from_axis_angle(Vec3::x(), 0.2);
        let pose = PoseTrajectory::new(10.0, vec![Vec3::zeros(); 3], vec![vec![q], vec![-q], vec![q]]).unwrap();
        let rots = pose.local_rotations();
        assert!(rots.windows(2).all(|w| w[0][0].dot(&w[1][0]) >= 0.0));
    }

    #[test]
    fn pose_rejects_non_unit() {
        let q = Quat::from_wxyz(2.0, 0.0, 0.0, 0.0);
        assert!(PoseTrajectory::new(10.0, vec![Vec3::zeros(); 2], vec![vec![q]; 2]).is_err());
    }
}
