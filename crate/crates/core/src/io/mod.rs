//! File formats: motion JSON, IMU CSV, and the synthetic motion generator
//! that stands in for a text-to-motion model.

mod imu_csv;
mod motion;
mod synth;

pub use imu_csv::{parse_imu_csv, read_imu_csv, write_imu_csv, write_imu_csv_to, TIME_JITTER_TOLERANCE};
pub use motion::{motion_to_json, parse_motion, read_motion_file, write_motion_file, MOTION_FORMAT_VERSION};
pub use synth::{generate_synthetic_motion, synthetic_pose, Activity, SYNTH_FRAME_RATE};
