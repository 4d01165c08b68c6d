//! Virtual accelerometer and gyroscope streams from a pose trajectory.
//!
//! Joint positions are upsampled with cubic splines and orientations with
//! slerp to an internal rate, differentiated there, expressed in the sensor
//! frame, decimated by interval means, and finally corrupted with a per-clip
//! constant bias plus white Gaussian noise.

mod resample;
mod stream;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use resample::{decimated_len, interval_mean, UniformSpline};
pub use stream::{channel_name, ImuStream, SensorChannels, Source, StreamMeta, ACCEL_AXES, GYRO_AXES};

use crate::error::{Error, Result};
use crate::kinematics::global_pose;
use crate::model::{make_sign_continuous, PoseTrajectory, Quat, Skeleton, Vec3};

/// Standard gravity, m/s^2.
pub const GRAVITY: f64 = 9.80665;

/// Gravity vector in the Y-up world frame.
pub fn gravity_world() -> Vec3 {
    Vec3::new(0.0, -GRAVITY, 0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorPlacement {
    pub joint_index: usize,
    pub location: String,
    /// Sensor frame relative to the joint frame.
    pub mount_rotation: Quat,
}

impl SensorPlacement {
    pub fn new(joint_index: usize, location: impl Into<String>) -> Self {
        SensorPlacement {
            joint_index,
            location: location.into(),
            mount_rotation: Quat::IDENTITY,
        }
    }

    pub fn with_mount(mut self, mount_rotation: Quat) -> Self {
        self.mount_rotation = mount_rotation;
        self
    }
}

/// White noise plus per-clip constant bias, both Gaussian per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub accel_white_sigma: f64,
    pub gyro_white_sigma: f64,
    pub accel_bias_sigma: f64,
    pub gyro_bias_sigma: f64,
    pub seed: u64,
}

impl NoiseParams {
    pub fn none() -> Self {
        NoiseParams {
            accel_white_sigma: 0.0,
            gyro_white_sigma: 0.0,
            accel_bias_sigma: 0.0,
            gyro_bias_sigma: 0.0,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        let sigmas = [
            self.accel_white_sigma,
            self.gyro_white_sigma,
            self.accel_bias_sigma,
            self.gyro_bias_sigma,
        ];
        if sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::Parameter(format!(
                "noise sigmas must be finite and >= 0: {sigmas:?}"
            )));
        }
        Ok(())
    }
}

impl Default for NoiseParams {
    /// Placeholder consumer-grade values; not calibrated to any device.
    fn default() -> Self {
        NoiseParams {
            accel_white_sigma: 0.02,
            gyro_white_sigma: 0.005,
            accel_bias_sigma: 0.05,
            gyro_bias_sigma: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub internal_rate: f64,
    pub out_rate: f64,
    pub noise: NoiseParams,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            internal_rate: 100.0,
            out_rate: 20.0,
            noise: NoiseParams::default(),
        }
    }
}

/// SplitMix64 finalizer, used to derive independent sub-seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed
        ^ salt
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Simulates one sensor per placement. The returned stream is tagged
/// [`Source::Virtual`] with no activity or subject; set `meta` as needed.
pub fn simulate_imu(
    skeleton: &Skeleton,
    pose: &PoseTrajectory,
    placements: &[SensorPlacement],
    config: &SimulationConfig,
) -> Result<ImuStream> {
    let clean = simulate_noiseless(skeleton, pose, placements, config)?;
    add_noise(clean, &config.noise)
}

/// The full simulation without bias or white noise.
pub fn simulate_noiseless(
    skeleton: &Skeleton,
    pose: &PoseTrajectory,
    placements: &[SensorPlacement],
    config: &SimulationConfig,
) -> Result<ImuStream> {
    let SimulationConfig {
        internal_rate,
        out_rate,
        ..
    } = *config;
    if !(out_rate > 0.0 && internal_rate > 0.0) {
        return Err(Error::Parameter("rates must be positive".into()));
    }
    if out_rate > internal_rate {
        return Err(Error::Parameter(format!(
            "output rate {out_rate} Hz exceeds internal rate {internal_rate} Hz"
        )));
    }
    config.noise.validate()?;
    pose.check_skeleton(skeleton)?;
    for p in placements {
        if p.joint_index >= skeleton.len() {
            return Err(Error::Parameter(format!(
                "placement `{}` references joint {} but skeleton has {}",
                p.location,
                p.joint_index,
                skeleton.len()
            )));
        }
    }

    let n_internal = (pose.duration() * internal_rate + 1e-9).floor() as usize + 1;
    let n_out = decimated_len(n_internal, internal_rate, out_rate);
    if n_internal < 4 || n_out < 2 {
        return Err(Error::Shape(format!(
            "pose of {:.3} s is too short: {n_internal} internal and {n_out} output samples",
            pose.duration()
        )));
    }

    let global = global_pose(skeleton, pose)?;
    let frame_rate = pose.frame_rate();
    let h = 1.0 / internal_rate;
    let times: Vec<f64> = (0..n_internal).map(|k| k as f64 * h).collect();

    let sensors = placements
        .par_iter()
        .map(|placement| {
            let j = placement.joint_index;

            let positions: Vec<Vec3> = {
                let axis = |k: usize| {
                    let vals: Vec<f64> = global.positions.iter().map(|f| f[j][k]).collect();
                    let spline = UniformSpline::new(&vals, frame_rate);
                    times.iter().map(|&t| spline.eval(t)).collect::<Vec<_>>()
                };
                let (x, y, z) = (axis(0), axis(1), axis(2));
                (0..n_internal).map(|k| Vec3::new(x[k], y[k], z[k])).collect()
            };

            let mut joint_ori: Vec<Quat> = global.orientations.iter().map(|f| f[j]).collect();
            make_sign_continuous(&mut joint_ori);
            let mut sensor_ori: Vec<Quat> = times
                .iter()
                .map(|&t| {
                    let u = (t * frame_rate).clamp(0.0, (joint_ori.len() - 1) as f64);
                    let i = (u.floor() as usize).min(joint_ori.len() - 2);
                    joint_ori[i].slerp(&joint_ori[i + 1], u - i as f64) * placement.mount_rotation
                })
                .collect();
            make_sign_continuous(&mut sensor_ori);

            let accel_world = second_derivative(&positions, h);
            let g = gravity_world();
            let accel: Vec<[f64; 3]> = accel_world
                .iter()
                .zip(&sensor_ori)
                .map(|(a, q)| q.inverse().rotate(a - g).into())
                .collect();

            let qdot = quat_derivative(&sensor_ori, h);
            let gyro: Vec<[f64; 3]> = sensor_ori
                .iter()
                .zip(&qdot)
                .map(|(q, dq)| (2.0 * q.inverse().mul_raw(dq).vector()).into())
                .collect();

            SensorChannels {
                location: placement.location.clone(),
                accel: interval_mean(&accel, internal_rate, out_rate),
                gyro: Some(interval_mean(&gyro, internal_rate, out_rate)),
            }
        })
        .collect();

    ImuStream::new(out_rate, sensors, StreamMeta::default())
}

/// Adds bias and white noise. Each sensor draws from its own generator seeded
/// with `mix_seed(noise.seed, sensor_index)`.
pub fn add_noise(stream: ImuStream, noise: &NoiseParams) -> Result<ImuStream> {
    noise.validate()?;
    let rate = stream.sample_rate();
    let meta = stream.meta.clone();
    let sensors = stream
        .into_sensors()
        .into_par_iter()
        .enumerate()
        .map(|(idx, mut s)| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(noise.seed, idx as u64));
            let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
            let accel_bias: [f64; 3] = std::array::from_fn(|_| noise.accel_bias_sigma * normal());
            let gyro_bias: [f64; 3] = std::array::from_fn(|_| noise.gyro_bias_sigma * normal());
            for t in 0..s.accel.len() {
                for k in 0..3 {
                    s.accel[t][k] += accel_bias[k] + noise.accel_white_sigma * normal();
                }
                for k in 0..3 {
                    let w = noise.gyro_white_sigma * normal();
                    if let Some(g) = &mut s.gyro {
                        g[t][k] += gyro_bias[k] + w;
                    }
                }
            }
            s
        })
        .collect();
    ImuStream::new(rate, sensors, meta)
}

/// Second derivative by central differences; second-order one-sided
/// differences at the two ends. Needs at least four samples.
fn second_derivative(p: &[Vec3], h: f64) -> Vec<Vec3> {
    let n = p.len();
    let h2 = h * h;
    (0..n)
        .map(|k| {
            if k == 0 {
                (2.0 * p[0] - 5.0 * p[1] + 4.0 * p[2] - p[3]) / h2
            } else if k == n - 1 {
                (2.0 * p[n - 1] - 5.0 * p[n - 2] + 4.0 * p[n - 3] - p[n - 4]) / h2
            } else {
                (p[k + 1] - 2.0 * p[k] + p[k - 1]) / h2
            }
        })
        .collect()
}

/// Componentwise first derivative of a sign-continuous quaternion sequence.
fn quat_derivative(q: &[Quat], h: f64) -> Vec<Quat> {
    let n = q.len();
    let lin = |a: f64, qa: &Quat, b: f64, qb: &Quat, c: f64, qc: &Quat| {
        let v = |f: fn(&Quat) -> f64| (a * f(qa) + b * f(qb) + c * f(qc)) / (2.0 * h);
        Quat::from_wxyz(v(|q| q.w), v(|q| q.x), v(|q| q.y), v(|q| q.z))
    };
    (0..n)
        .map(|k| {
            if k == 0 {
                lin(-3.0, &q[0], 4.0, &q[1], -1.0, &q[2])
            } else if k == n - 1 {
                lin(3.0, &q[n - 1], -4.0, &q[n - 2], 1.0, &q[n - 3])
            } else {
                lin(1.0, &q[k + 1], -1.0, &q[k - 1], 0.0, &q[k])
            }
        })
        .collect()
}

/// Interval-mean decimation of every channel to `target_rate`.
pub fn downsample(stream: &ImuStream, target_rate: f64) -> Result<ImuStream> {
    let src = stream.sample_rate();
    if !(target_rate > 0.0) || target_rate > src {
        return Err(Error::Parameter(format!(
            "target rate {target_rate} Hz must be in (0, {src}] Hz"
        )));
    }
    if target_rate == src {
        return Ok(stream.clone());
    }
    let sensors = stream
        .sensors()
        .iter()
        .map(|s| SensorChannels {
            location: s.location.clone(),
            accel: interval_mean(&s.accel, src, target_rate),
            gyro: s.gyro.as_ref().map(|g| interval_mean(g, src, target_rate)),
        })
        .collect();
    ImuStream::new(target_rate, sensors, stream.meta.clone())
}
