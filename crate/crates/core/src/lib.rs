//! Virtual IMU synthesis from 3D skeleton motion and its evaluation for
//! human activity recognition.
//!
//! Pipeline: joint positions ([`model::MotionSequence`]) are turned into
//! joint rotations by [`kinematics::inverse_kinematics`], simulated as
//! on-body accelerometer/gyroscope streams by [`sensorsim::simulate_imu`],
//! aligned to real sensor distributions by [`calibration`], windowed and
//! summarized by [`features`], and evaluated with a random forest under
//! leave-one-subject-out cross-validation in [`learn`].

pub mod benchmark;
pub mod calibration;
pub mod error;
pub mod features;
pub mod io;
pub mod kinematics;
pub mod learn;
pub mod model;
pub mod pipeline;
pub mod sensorsim;

pub use error::{Error, Result};
