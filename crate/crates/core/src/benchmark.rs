//! Synthetic activity-recognition benchmark.
//!
//! "Real" subjects are simulated directly from their joint-angle poses on
//! individually scaled skeletons, with randomly rotated sensors and one
//! noise profile. "Virtual" clips go the long way round: joint positions on
//! the default skeleton, inverse kinematics, then simulation with strongly
//! rotated sensor mounts of their own and a second noise profile.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{generate_synthetic_motion, synthetic_pose, Activity};
use crate::kinematics::inverse_kinematics;
use crate::model::{Quat, Skeleton, Vec3};
use crate::sensorsim::{
    mix_seed, simulate_imu, ImuStream, NoiseParams, SensorPlacement, SimulationConfig, Source, StreamMeta,
};

const REAL_STREAM: u64 = 0x7ea1;
const VIRTUAL_STREAM: u64 = 0x5171;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub n_subjects: usize,
    /// Length of each real recording (one per subject and activity), s.
    pub real_seconds: f64,
    pub virtual_clips_per_activity: usize,
    pub clip_seconds: (f64, f64),
    pub internal_rate: f64,
    pub out_rate: f64,
    pub real_noise: NoiseParams,
    pub virtual_noise: NoiseParams,
    /// Largest random sensor mount rotation, degrees.
    pub real_mount_jitter_deg: f64,
    pub virtual_mount_jitter_deg: f64,
    /// Range of per-subject skeleton scale factors.
    pub subject_scale: (f64, f64),
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            n_subjects: 8,
            real_seconds: 60.0,
            virtual_clips_per_activity: 50,
            clip_seconds: (5.0, 10.0),
            internal_rate: 100.0,
            out_rate: 20.0,
            real_noise: NoiseParams {
                accel_white_sigma: 0.08,
                gyro_white_sigma: 0.02,
                accel_bias_sigma: 0.15,
                gyro_bias_sigma: 0.02,
                seed: 0,
            },
            virtual_noise: NoiseParams {
                accel_white_sigma: 0.03,
                gyro_white_sigma: 0.005,
                accel_bias_sigma: 0.05,
                gyro_bias_sigma: 0.01,
                seed: 0,
            },
            real_mount_jitter_deg: 90.0,
            virtual_mount_jitter_deg: 90.0,
            subject_scale: (0.9, 1.1),
            seed: 0,
        }
    }
}

/// Forearm, chest and thigh sensors (right elbow, upper spine, right hip
/// joints of the 22-joint layout).
pub fn benchmark_placements() -> Vec<SensorPlacement> {
    vec![
        SensorPlacement::new(19, "forearm"),
        SensorPlacement::new(9, "chest"),
        SensorPlacement::new(2, "thigh"),
    ]
}

pub fn subject_id(i: usize) -> String {
    format!("subject{:02}", i + 1)
}

fn random_mount(rng: &mut impl Rng, max_deg: f64) -> Quat {
    let axis = Vec3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    if axis.norm() < 1e-6 || max_deg <= 0.0 {
        return Quat::IDENTITY;
    }
    Quat::from_axis_angle(axis.normalize(), rng.random_range(0.0..=max_deg).to_radians())
}

fn check(cfg: &BenchmarkConfig) -> Result<()> {
    let (lo, hi) = cfg.clip_seconds;
    if !(1.0 <= lo && lo <= hi && hi <= 60.0) || !(1.0..=60.0).contains(&cfg.real_seconds) {
        return Err(Error::Parameter(
            "clip and recording lengths must lie in [1, 60] s".into(),
        ));
    }
    let (slo, shi) = cfg.subject_scale;
    if !(slo > 0.0 && slo <= shi) {
        return Err(Error::Parameter(format!(
            "bad subject scale range {:?}",
            cfg.subject_scale
        )));
    }
    Ok(())
}

/// One stream per (subject, activity), subjects outermost.
pub fn real_streams(cfg: &BenchmarkConfig) -> Result<Vec<ImuStream>> {
    check(cfg)?;
    let base = Skeleton::default_22();
    let jobs: Vec<(usize, Activity)> = (0..cfg.n_subjects)
        .flat_map(|s| Activity::ALL.into_iter().map(move |a| (s, a)))
        .collect();
    jobs.par_iter()
        .map(|&(s, activity)| {
            let subject_seed = mix_seed(mix_seed(cfg.seed, REAL_STREAM), s as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(subject_seed);
            let scale = rng.random_range(cfg.subject_scale.0..=cfg.subject_scale.1);
            // Sensors sit the same way on a subject for every activity.
            let placements: Vec<SensorPlacement> = benchmark_placements()
                .into_iter()
                .map(|p| {
                    let mount = random_mount(&mut rng, cfg.real_mount_jitter_deg);
                    p.with_mount(mount)
                })
                .collect();
            let skeleton = base.scaled(scale)?;
            let pose = synthetic_pose(&skeleton, activity, cfg.real_seconds, subject_seed)?;
            let sim = SimulationConfig {
                internal_rate: cfg.internal_rate,
                out_rate: cfg.out_rate,
                noise: cfg.real_noise.with_seed(mix_seed(subject_seed, activity as u64)),
            };
            let meta = StreamMeta {
                activity: Some(activity.name().into()),
                subject: Some(subject_id(s)),
                source: Source::Real,
            };
            Ok(simulate_imu(&skeleton, &pose, &placements, &sim)?.with_meta(meta))
        })
        .collect()
}

/// `virtual_clips_per_activity` clips per activity, activities outermost.
pub fn virtual_streams(cfg: &BenchmarkConfig) -> Result<Vec<ImuStream>> {
    check(cfg)?;
    let skeleton = Skeleton::default_22();
    let jobs: Vec<(Activity, usize)> = Activity::ALL
        .into_iter()
        .flat_map(|a| (0..cfg.virtual_clips_per_activity).map(move |k| (a, k)))
        .collect();
    jobs.par_iter()
        .map(|&(activity, k)| {
            let clip_seed = mix_seed(mix_seed(cfg.seed, VIRTUAL_STREAM), (activity as u64) << 32 | k as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(clip_seed);
            let (lo, hi) = cfg.clip_seconds;
            let seconds = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            let motion = generate_synthetic_motion(activity, seconds, clip_seed)?;
            let pose = inverse_kinematics(&skeleton, &motion)?;
            let placements: Vec<SensorPlacement> = benchmark_placements()
                .into_iter()
                .map(|p| {
                    let mount = random_mount(&mut rng, cfg.virtual_mount_jitter_deg);
                    p.with_mount(mount)
                })
                .collect();
            let sim = SimulationConfig {
                internal_rate: cfg.internal_rate,
                out_rate: cfg.out_rate,
                noise: cfg.virtual_noise.with_seed(clip_seed),
            };
            let meta = StreamMeta {
                activity: Some(activity.name().into()),
                subject: Some(format!("virtual-{activity}-{k:03}")),
                source: Source::Virtual,
            };
            Ok(simulate_imu(&skeleton, &pose, &placements, &sim)?.with_meta(meta))
        })
        .collect()
}
