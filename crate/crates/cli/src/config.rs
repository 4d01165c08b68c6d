//! Declarative run configuration, read from a TOML file. Every key is
//! optional; missing keys take the defaults below. Relative paths resolve
//! against the working directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use virtimu_core::io::Activity;
use virtimu_core::learn::{CalibrationOptions, ForestParams, Scenario};
use virtimu_core::model::{Quat, Skeleton, Vec3};
use virtimu_core::pipeline::PipelineConfig;
use virtimu_core::sensorsim::{NoiseParams, SensorPlacement, SimulationConfig};

use crate::CliError;

pub const DEFAULT_FRACTIONS: [f64; 6] = [0.02, 0.05, 0.10, 0.25, 0.50, 1.00];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    /// Skeleton definition file; the built-in 22-joint skeleton if absent.
    pub skeleton: Option<PathBuf>,
    pub placements: Vec<PlacementConfig>,
    pub simulation: SimulationSection,
    pub noise: NoiseSection,
    pub synth: SynthSection,
    pub gen_imu: GenImuSection,
    pub calibration: CalibrationSection,
    pub features: FeaturesSection,
    pub forest: ForestParams,
    pub experiment: ExperimentSection,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            skeleton: None,
            placements: vec![
                PlacementConfig::new("right_elbow", "forearm"),
                PlacementConfig::new("spine3", "chest"),
                PlacementConfig::new("right_hip", "thigh"),
            ],
            simulation: SimulationSection::default(),
            noise: NoiseSection::default(),
            synth: SynthSection::default(),
            gen_imu: GenImuSection::default(),
            calibration: CalibrationSection::default(),
            features: FeaturesSection::default(),
            forest: ForestParams::default(),
            experiment: ExperimentSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementConfig {
    pub joint: String,
    pub location: String,
    /// Sensor mount as a rotation vector in degrees relative to the joint frame.
    #[serde(default)]
    pub mount_deg: [f64; 3],
}

impl PlacementConfig {
    fn new(joint: &str, location: &str) -> Self {
        PlacementConfig {
            joint: joint.into(),
            location: location.into(),
            mount_deg: [0.0; 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub internal_rate: f64,
    pub out_rate: f64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        let d = SimulationConfig::default();
        SimulationSection {
            internal_rate: d.internal_rate,
            out_rate: d.out_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub accel_white_sigma: f64,
    pub gyro_white_sigma: f64,
    pub accel_bias_sigma: f64,
    pub gyro_bias_sigma: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        let d = NoiseParams::default();
        NoiseSection {
            accel_white_sigma: d.accel_white_sigma,
            gyro_white_sigma: d.gyro_white_sigma,
            accel_bias_sigma: d.accel_bias_sigma,
            gyro_bias_sigma: d.gyro_bias_sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub activities: Vec<Activity>,
    pub clips_per_activity: usize,
    /// Clip durations are drawn uniformly from this range, seconds.
    pub duration_s: [f64; 2],
    pub output_dir: PathBuf,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            activities: Activity::ALL.to_vec(),
            clips_per_activity: 50,
            duration_s: [5.0, 10.0],
            output_dir: "motions".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenImuSection {
    /// Motion files: paths, globs or directories.
    pub inputs: Vec<String>,
    pub output_dir: PathBuf,
}

impl Default for GenImuSection {
    fn default() -> Self {
        GenImuSection {
            inputs: vec!["motions".into()],
            output_dir: "virtual".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSection {
    pub enabled: bool,
    pub n_knots: usize,
    pub per_class: bool,
    /// Output of the `calibrate` command.
    pub output: PathBuf,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        let d = CalibrationOptions::default();
        CalibrationSection {
            enabled: true,
            n_knots: d.n_knots,
            per_class: d.per_class,
            output: "calibration.json".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesSection {
    pub sample_rate: f64,
    /// Locations in feature order; empty means those of the first real stream.
    pub locations: Vec<String>,
    pub accel_only: bool,
    pub window_seconds: f64,
    pub overlap: f64,
    pub n_components: usize,
    /// Output of the `featurize` command.
    pub output: PathBuf,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        let d = PipelineConfig::default();
        FeaturesSection {
            sample_rate: d.sample_rate,
            locations: Vec::new(),
            accel_only: d.accel_only,
            window_seconds: d.window_seconds,
            overlap: d.overlap,
            n_components: d.n_components,
            output: "features.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    /// Real IMU CSV files: paths, globs or directories.
    pub real: Vec<String>,
    /// Virtual IMU CSV files; required by the virtual and mixed scenarios.
    #[serde(rename = "virtual")]
    pub virtual_inputs: Vec<String>,
    pub output_dir: PathBuf,
    pub scenarios: Vec<Scenario>,
    pub fractions: Vec<f64>,
    pub n_runs: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            real: vec!["real".into()],
            virtual_inputs: vec!["virtual".into()],
            output_dir: "report".into(),
            scenarios: vec![Scenario::Real, Scenario::Virtual, Scenario::Mixed],
            fractions: DEFAULT_FRACTIONS.to_vec(),
            n_runs: 3,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn skeleton(&self) -> Result<Skeleton, CliError> {
        match &self.skeleton {
            Some(p) => Skeleton::from_file(p).map_err(|e| CliError::Config(e.to_string())),
            None => Ok(Skeleton::default_22()),
        }
    }

    pub fn placements(&self, skeleton: &Skeleton) -> Result<Vec<SensorPlacement>, CliError> {
        self.placements
            .iter()
            .map(|p| {
                let joint = skeleton.index_of(&p.joint).ok_or_else(|| {
                    CliError::Config(format!("placement `{}`: unknown joint `{}`", p.location, p.joint))
                })?;
                let rv = Vec3::from(p.mount_deg.map(f64::to_radians));
                Ok(SensorPlacement::new(joint, p.location.clone()).with_mount(Quat::from_rotation_vector(rv)))
            })
            .collect()
    }

    pub fn simulation(&self) -> SimulationConfig {
        SimulationConfig {
            internal_rate: self.simulation.internal_rate,
            out_rate: self.simulation.out_rate,
            noise: NoiseParams {
                accel_white_sigma: self.noise.accel_white_sigma,
                gyro_white_sigma: self.noise.gyro_white_sigma,
                accel_bias_sigma: self.noise.accel_bias_sigma,
                gyro_bias_sigma: self.noise.gyro_bias_sigma,
                seed: self.seed,
            },
        }
    }

    pub fn calibration_options(&self) -> Option<CalibrationOptions> {
        self.calibration.enabled.then_some(CalibrationOptions {
            n_knots: self.calibration.n_knots,
            per_class: self.calibration.per_class,
        })
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            sample_rate: self.features.sample_rate,
            locations: self.features.locations.clone(),
            accel_only: self.features.accel_only,
            window_seconds: self.features.window_seconds,
            overlap: self.features.overlap,
            n_components: self.features.n_components,
            calibration: self.calibration_options(),
        }
    }

    /// Checks that do not need any input files.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        let [lo, hi] = self.synth.duration_s;
        if !(1.0 <= lo && lo <= hi && hi <= 60.0) {
            return bad(format!(
                "synth.duration_s must satisfy 1 <= min <= max <= 60, got [{lo}, {hi}]"
            ));
        }
        if self.experiment.fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return bad(format!(
                "experiment.fractions must lie in (0, 1]: {:?}",
                self.experiment.fractions
            ));
        }
        if self.experiment.n_runs == 0 {
            return bad("experiment.n_runs must be >= 1".into());
        }
        if self.experiment.scenarios.is_empty() || self.experiment.fractions.is_empty() {
            return bad("experiment needs at least one scenario and one fraction".into());
        }
        if !(0.0..1.0).contains(&self.features.overlap) {
            return bad(format!(
                "features.overlap must be in [0, 1), got {}",
                self.features.overlap
            ));
        }
        if self.features.n_components < 2 {
            return bad("features.n_components must be >= 2".into());
        }
        if self.calibration.n_knots < 2 {
            return bad("calibration.n_knots must be >= 2".into());
        }
        if self.simulation.out_rate > self.simulation.internal_rate || self.simulation.out_rate <= 0.0 {
            return bad("simulation.out_rate must be in (0, internal_rate]".into());
        }
        if self.placements.is_empty() {
            return bad("at least one placement is required".into());
        }
        Ok(())
    }
}
