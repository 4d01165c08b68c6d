//! Parametric motion clips for six everyday activities on the 22-joint
//! skeleton. Each clip is a [`PoseTrajectory`] built from periodic joint
//! angle patterns and then passed through forward kinematics, so bone
//! lengths are exact.
//!
//! `style_seed` draws, per clip:
//! - tempo multiplier in [0.88, 1.12]
//! - amplitude multiplier in [0.85, 1.15]
//! - arm-swing multiplier in [0.75, 1.25]
//! - phase in [0, 2π) and heading in [-π, π)
//! - trunk lean offset in [-0.06, 0.06] rad
//! - three slow amplitude modulations (0.05 to 0.3 Hz, depth 3 to 10 %)

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{forward_kinematics, global_pose};
use crate::model::{MotionSequence, PoseTrajectory, Quat, Skeleton, Vec3};
use crate::sensorsim::mix_seed;

pub const SYNTH_FRAME_RATE: f64 = 20.0;

// Joint indices of the 22-joint layout.
const PELVIS: usize = 0;
const L_HIP: usize = 1;
const R_HIP: usize = 2;
const SPINE1: usize = 3;
const L_KNEE: usize = 4;
const R_KNEE: usize = 5;
const SPINE2: usize = 6;
const L_ANKLE: usize = 7;
const R_ANKLE: usize = 8;
const SPINE3: usize = 9;
const NECK: usize = 12;
const L_SHOULDER: usize = 16;
const R_SHOULDER: usize = 17;
const L_ELBOW: usize = 18;
const R_ELBOW: usize = 19;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activity {
    Walking,
    Running,
    Jumping,
    Sitting,
    Standing,
    Lying,
}

impl Activity {
    pub const ALL: [Activity; 6] = [
        Activity::Walking,
        Activity::Running,
        Activity::Jumping,
        Activity::Sitting,
        Activity::Standing,
        Activity::Lying,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Activity::Walking => "walking",
            Activity::Running => "running",
            Activity::Jumping => "jumping",
            Activity::Sitting => "sitting",
            Activity::Standing => "standing",
            Activity::Lying => "lying",
        }
    }
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Activity::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown activity `{s}`")))
    }
}

struct Style {
    tempo: f64,
    amp: f64,
    arm: f64,
    phase: f64,
    heading: f64,
    lean: f64,
    mods: [(f64, f64); 3],
    mod_depth: f64,
    rng: ChaCha8Rng,
}

impl Style {
    fn sample(activity: Activity, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, activity as u64 + 1));
        Style {
            tempo: rng.random_range(0.88..1.12),
            amp: rng.random_range(0.85..1.15),
            arm: rng.random_range(0.75..1.25),
            phase: rng.random_range(0.0..TAU),
            heading: rng.random_range(-PI..PI),
            lean: rng.random_range(-0.06..0.06),
            mods: std::array::from_fn(|_| (rng.random_range(0.05..0.3), rng.random_range(0.0..TAU))),
            mod_depth: rng.random_range(0.03..0.1),
            rng,
        }
    }

    /// Slowly varying gain around 1.
    fn wobble(&self, t: f64) -> f64 {
        let s: f64 = self.mods.iter().map(|(f, p)| (TAU * f * t + p).sin()).sum();
        1.0 + self.mod_depth * s / 3.0
    }

    /// A random low-frequency sinusoid `t -> a sin(2π f t + φ)`.
    fn drift(&mut self, amplitude: f64, fmin: f64, fmax: f64) -> impl Fn(f64) -> f64 {
        let a = amplitude * self.rng.random_range(0.5..1.0);
        let f = self.rng.random_range(fmin..fmax);
        let p = self.rng.random_range(0.0..TAU);
        move |t| a * (TAU * f * t + p).sin()
    }
}

fn rx(a: f64) -> Quat {
    Quat::from_axis_angle(Vec3::x(), a)
}

fn ry(a: f64) -> Quat {
    Quat::from_axis_angle(Vec3::y(), a)
}

fn rz(a: f64) -> Quat {
    Quat::from_axis_angle(Vec3::z(), a)
}

/// Height that puts the lowest joint of `rots` (root at the origin) on the floor.
fn floor_height(skeleton: &Skeleton, root_rot: Quat, rots: &[Quat]) -> f64 {
    let mut frame = rots.to_vec();
    frame[PELVIS] = root_rot;
    let pose = PoseTrajectory::new(1.0, vec![Vec3::zeros()], vec![frame]).expect("unit rotations");
    let g = global_pose(skeleton, &pose).expect("matching skeleton");
    -g.positions[0].iter().map(|p| p.y).fold(f64::INFINITY, f64::min)
}

/// Joint-angle pose for the given activity, duration and style.
///
/// Angles follow these sign conventions on the Y-up, +Z-forward skeleton:
/// a rotation about X by a negative angle swings a hanging limb forward,
/// a positive angle at the knee bends the shank backward.
pub fn synthetic_pose(
    skeleton: &Skeleton,
    activity: Activity,
    duration_s: f64,
    style_seed: u64,
) -> Result<PoseTrajectory> {
    if !(1.0..=60.0).contains(&duration_s) {
        return Err(Error::Parameter(format!(
            "duration must be in [1, 60] s, got {duration_s}"
        )));
    }
    if skeleton.len() != 22 {
        return Err(Error::Skeleton(format!(
            "synthetic motion needs the 22-joint layout, got {} joints",
            skeleton.len()
        )));
    }
    let n = (duration_s * SYNTH_FRAME_RATE).round() as usize;
    let mut st = Style::sample(activity, style_seed);
    let identity = vec![Quat::IDENTITY; 22];
    let heading = ry(st.heading);
    let forward = heading.rotate(Vec3::z());
    let times: Vec<f64> = (0..n).map(|i| i as f64 / SYNTH_FRAME_RATE).collect();
    let mut roots = Vec::with_capacity(n);
    let mut frames = Vec::with_capacity(n);

    match activity {
        Activity::Walking | Activity::Running => {
            let running = activity == Activity::Running;
            let (f, hip, knee, knee0, shoulder, elbow0, lean, bob, stride) = if running {
                (1.45, 0.7, 1.3, 0.35, 0.6, 1.4, 0.2, 0.05, 1.9)
            } else {
                (0.95, 0.42, 0.65, 0.08, 0.32, 0.3, 0.04, 0.022, 0.72)
            };
            let f = f * st.tempo;
            let leg = -skeleton
                .rest_positions()
                .iter()
                .map(|p| p.y)
                .fold(f64::INFINITY, f64::min);
            let speed = stride * leg * f * st.amp.sqrt();
            let base = floor_height(skeleton, Quat::IDENTITY, &identity) - if running { 0.04 } else { 0.01 };
            let twist = st.drift(0.05, 0.1, 0.4);
            for &t in &times {
                let w = st.wobble(t);
                let s = TAU * f * t + st.phase;
                let a = st.amp * w;
                let mut r = identity.clone();
                r[L_HIP] = rx(-hip * a * s.sin());
                r[R_HIP] = rx(hip * a * s.sin());
                let bend = |x: f64| knee0 + knee * a * (0.5 + 0.5 * x.sin()).powi(2);
                r[L_KNEE] = rx(bend(s + 0.5));
                r[R_KNEE] = rx(bend(s + PI + 0.5));
                r[L_ANKLE] = rx(0.2 * a * s.cos());
                r[R_ANKLE] = rx(-0.2 * a * s.cos());
                r[SPINE1] = rx(lean + st.lean) * ry(0.08 * a * s.sin() + twist(t));
                r[SPINE3] = ry(-0.05 * a * s.sin());
                r[L_SHOULDER] = rx(shoulder * st.arm * a * s.sin());
                r[R_SHOULDER] = rx(-shoulder * st.arm * a * s.sin());
                r[L_ELBOW] = rx(-elbow0 - 0.25 * st.arm * (0.5 + 0.5 * s.sin()));
                r[R_ELBOW] = rx(-elbow0 - 0.25 * st.arm * (0.5 - 0.5 * s.sin()));
                r[PELVIS] = heading * rz(0.04 * a * s.sin());
                let sway = heading.rotate(Vec3::x()) * (0.02 * a * s.sin());
                roots.push(forward * (speed * t) + sway + Vec3::new(0.0, base + bob * a * (2.0 * s).cos(), 0.0));
                frames.push(r);
            }
        }
        Activity::Jumping => {
            let period = 0.95 / st.tempo;
            let ground = 0.5;
            let flight = (1.0 - ground) * period * st.amp.sqrt();
            let cycle = ground * period + flight;
            let v0 = 9.81 * flight / 2.0;
            let crouch = 0.12 * st.amp;
            let base = floor_height(skeleton, Quat::IDENTITY, &identity) - 0.01;
            let offset = st.phase / TAU * cycle;
            for &t in &times {
                let tc = (t + offset) % cycle;
                let mut r = identity.clone();
                let (lift, dip) = if tc < ground * period {
                    let u = tc / (ground * period);
                    (0.0, (PI * u).sin().powi(2))
                } else {
                    let tf = tc - ground * period;
                    (v0 * tf - 0.5 * 9.81 * tf * tf, 0.0)
                };
                let k = 1.2 * st.amp * dip;
                r[L_HIP] = rx(-0.6 * k);
                r[R_HIP] = rx(-0.6 * k);
                r[L_KNEE] = rx(k);
                r[R_KNEE] = rx(k);
                r[L_ANKLE] = rx(-0.4 * k);
                r[R_ANKLE] = rx(-0.4 * k);
                r[SPINE1] = rx(0.3 * k + st.lean);
                let arms = -0.3 - st.arm * (1.1 * (lift / (v0 * v0 / 19.62)).clamp(0.0, 1.0) - 0.5 * dip);
                r[L_SHOULDER] = rx(arms);
                r[R_SHOULDER] = rx(arms);
                r[L_ELBOW] = rx(-0.3);
                r[R_ELBOW] = rx(-0.3);
                r[PELVIS] = heading;
                roots.push(Vec3::new(0.0, base + lift - crouch * dip, 0.0));
                frames.push(r);
            }
        }
        Activity::Sitting => {
            let hip = -FRAC_PI_2 * st.rng.random_range(0.9..1.0);
            let knee = FRAC_PI_2 * st.rng.random_range(0.9..1.1);
            let lean = st.rng.random_range(-0.15..0.1) + st.lean;
            let mut seated = identity.clone();
            seated[L_HIP] = rx(hip);
            seated[R_HIP] = rx(hip);
            seated[L_KNEE] = rx(knee);
            seated[R_KNEE] = rx(knee);
            let base = floor_height(skeleton, Quat::IDENTITY, &seated);
            let trunk = st.drift(0.06, 0.05, 0.3);
            let larm = st.drift(0.15 * st.arm, 0.1, 0.6);
            let rarm = st.drift(0.15 * st.arm, 0.1, 0.6);
            let lfore = st.drift(0.25 * st.arm, 0.2, 0.9);
            let rfore = st.drift(0.25 * st.arm, 0.2, 0.9);
            let leg = st.drift(0.08, 0.05, 0.4);
            let head = st.drift(0.2, 0.05, 0.3);
            for &t in &times {
                let w = st.wobble(t);
                let mut r = seated.clone();
                r[L_KNEE] = rx(knee + leg(t) * w);
                r[R_KNEE] = rx(knee - leg(t) * w);
                r[SPINE1] = rx(lean + trunk(t) * w);
                r[NECK] = ry(head(t));
                r[L_SHOULDER] = rx(-0.45 + larm(t) * w);
                r[R_SHOULDER] = rx(-0.45 + rarm(t) * w);
                r[L_ELBOW] = rx(-0.9 + lfore(t) * w);
                r[R_ELBOW] = rx(-0.9 + rfore(t) * w);
                r[PELVIS] = heading;
                roots.push(Vec3::new(0.0, base, 0.0));
                frames.push(r);
            }
        }
        Activity::Standing => {
            let base = floor_height(skeleton, Quat::IDENTITY, &identity);
            let sway_x = st.drift(0.012, 0.1, 0.5);
            let sway_z = st.drift(0.012, 0.1, 0.5);
            let shift = st.drift(0.04, 0.05, 0.25);
            let larm = st.drift(0.12 * st.arm, 0.1, 0.6);
            let rarm = st.drift(0.12 * st.arm, 0.1, 0.6);
            let lfore = st.drift(0.3 * st.arm, 0.2, 0.9);
            let rfore = st.drift(0.3 * st.arm, 0.2, 0.9);
            let head = st.drift(0.3, 0.05, 0.3);
            for &t in &times {
                let w = st.wobble(t);
                let mut r = identity.clone();
                r[PELVIS] = heading * rz(shift(t));
                r[L_HIP] = rz(-shift(t));
                r[R_HIP] = rz(-shift(t));
                r[SPINE2] = rx(st.lean);
                r[NECK] = ry(head(t));
                r[L_SHOULDER] = rx(larm(t) * w);
                r[R_SHOULDER] = rx(rarm(t) * w);
                r[L_ELBOW] = rx(-0.2 + lfore(t).min(0.0) * w);
                r[R_ELBOW] = rx(-0.2 + rfore(t).min(0.0) * w);
                roots.push(heading.rotate(Vec3::new(sway_x(t), base, sway_z(t))));
                frames.push(r);
            }
        }
        Activity::Lying => {
            let roll = st.rng.random_range(-0.5..0.5);
            let body = heading * rx(-FRAC_PI_2) * ry(roll);
            let base = floor_height(skeleton, body, &identity);
            let jitter = st.drift(0.004, 0.1, 0.5);
            let larm = st.drift(0.1 * st.arm, 0.05, 0.3);
            let rarm = st.drift(0.1 * st.arm, 0.05, 0.3);
            let legs = st.drift(0.06, 0.05, 0.3);
            let head = st.drift(0.15, 0.05, 0.2);
            let breath = st.drift(0.02, 0.2, 0.35);
            for &t in &times {
                let mut r = identity.clone();
                r[PELVIS] = body * rx(breath(t));
                r[L_SHOULDER] = rz(0.1 + larm(t));
                r[R_SHOULDER] = rz(-0.1 - rarm(t));
                r[L_HIP] = rx(-legs(t));
                r[R_HIP] = rx(legs(t));
                r[NECK] = ry(head(t));
                roots.push(Vec3::new(0.0, base + jitter(t), 0.0));
                frames.push(r);
            }
        }
    }
    PoseTrajectory::new(SYNTH_FRAME_RATE, roots, frames)
}

/// Synthetic clip on the default skeleton, labelled with the activity.
pub fn generate_synthetic_motion(activity: Activity, duration_s: f64, style_seed: u64) -> Result<MotionSequence> {
    let skeleton = Skeleton::default_22();
    let pose = synthetic_pose(&skeleton, activity, duration_s, style_seed)?;
    Ok(forward_kinematics(&skeleton, &pose)?.with_label(activity.name()))
}
