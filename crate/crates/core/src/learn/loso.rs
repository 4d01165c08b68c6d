//! Leave-one-subject-out evaluation with real, virtual or mixed training
//! sets and a configurable fraction of the real training data.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forest::{train_forest_indexed, ForestParams};
use super::metrics::per_class_f1;
use crate::calibration::{Calibration, ChannelSamples, DEFAULT_KNOTS};
use crate::error::{Error, Result};
use crate::features::{featurize, FeatureMatrix, Window};
use crate::sensorsim::mix_seed;

const SUBSAMPLE_STREAM: u64 = 0x5ab5;
const FOREST_STREAM: u64 = 0xf0e5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    #[default]
    Real,
    Virtual,
    Mixed,
}

impl Scenario {
    pub fn uses_real(self) -> bool {
        matches!(self, Scenario::Real | Scenario::Mixed)
    }

    pub fn uses_virtual(self) -> bool {
        matches!(self, Scenario::Virtual | Scenario::Mixed)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Real => "real",
            Scenario::Virtual => "virtual",
            Scenario::Mixed => "mixed",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(Scenario::Real),
            "virtual" => Ok(Scenario::Virtual),
            "mixed" => Ok(Scenario::Mixed),
            other => Err(Error::Parameter(format!(
                "unknown scenario `{other}` (expected real, virtual or mixed)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Share of each (subject, class) group of real training windows kept.
    pub real_fraction: f64,
    pub n_runs: usize,
    pub forest: ForestParams,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: Scenario::Real,
            real_fraction: 1.0,
            n_runs: 3,
            forest: ForestParams::default(),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.real_fraction > 0.0 && self.real_fraction <= 1.0) {
            return Err(Error::Parameter(format!(
                "real_fraction must be in (0, 1], got {}",
                self.real_fraction
            )));
        }
        if self.n_runs == 0 {
            return Err(Error::Parameter("n_runs must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationOptions {
    pub n_knots: usize,
    pub per_class: bool,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            n_knots: DEFAULT_KNOTS,
            per_class: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub fold: usize,
    pub held_out: String,
    pub run: usize,
    pub macro_f1: f64,
    pub per_class_f1: Vec<Option<f64>>,
    pub n_train_real: usize,
    pub n_train_virtual: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub scenario: Scenario,
    pub real_fraction: f64,
    pub n_runs: usize,
    pub seed: u64,
    pub classes: Vec<String>,
    /// Ordered by fold, then run.
    pub results: Vec<RunResult>,
    /// Mean and sample standard deviation over all fold/run results.
    pub mean_f1: f64,
    pub std_f1: f64,
    /// Mean over folds for each run, and their sample standard deviation.
    pub run_mean_f1: Vec<f64>,
    pub run_std_f1: f64,
    /// Mean per-class F1 over the results where the class was scored.
    pub per_class_f1: Vec<Option<f64>>,
    pub flags: Vec<String>,
}

impl ExperimentReport {
    /// `scenario,fold,run,macro_f1` with the held-out subject as the fold.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "scenario,fold,run,macro_f1")?;
        for r in &self.results {
            writeln!(w, "{},{},{},{}", self.scenario, r.held_out, r.run, r.macro_f1)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Per-class F1 of `self` minus `baseline`, keyed by class name.
    pub fn per_class_delta(&self, baseline: &ExperimentReport) -> BTreeMap<String, Option<f64>> {
        self.classes
            .iter()
            .zip(&self.per_class_f1)
            .map(|(class, mine)| {
                let theirs = baseline
                    .classes
                    .iter()
                    .position(|c| c == class)
                    .and_then(|i| baseline.per_class_f1[i]);
                (class.clone(), mine.zip(theirs).map(|(a, b)| a - b))
            })
            .collect()
    }
}

/// Keeps `round(fraction * m)` of the `m` candidates in every
/// (subject, class) group, drawn without replacement. Returns sorted indices.
pub fn stratified_subsample(features: &FeatureMatrix, candidates: &[usize], fraction: f64, seed: u64) -> Vec<usize> {
    let mut groups: BTreeMap<(&str, &str), Vec<usize>> = BTreeMap::new();
    for &i in candidates {
        groups
            .entry((features.subjects[i].as_str(), features.labels[i].as_str()))
            .or_default()
            .push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = Vec::new();
    for members in groups.values() {
        let m = members.len();
        let k = ((fraction * m as f64).round() as usize).min(m);
        if k == m {
            keep.extend_from_slice(members);
        } else {
            keep.extend(rand::seq::index::sample(&mut rng, m, k).into_iter().map(|j| members[j]));
        }
    }
    keep.sort_unstable();
    keep
}

struct FoldJob<'a> {
    fold: usize,
    held_out: &'a str,
    run: usize,
}

/// LOSO evaluation on precomputed feature matrices. `virtual_features` is
/// required for the virtual and mixed scenarios.
pub fn loso_experiment(
    real: &FeatureMatrix,
    virtual_features: Option<&FeatureMatrix>,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport> {
    let virt = checked_virtual(
        real,
        virtual_features.map(|v| (v.labels.as_slice(), v.subjects.as_slice())),
        cfg,
    )?;
    let classes = class_list(real, virt.map(|(l, _)| l));
    run_folds(real, classes, cfg, |_, _| Ok(virtual_features.cloned()))
}

/// LOSO evaluation starting from windows. When `calibration` is set, a
/// distribution map is fitted in every fold and run on the real training
/// windows that survive subsampling, then applied to the virtual windows
/// before feature extraction.
pub fn loso_experiment_windows(
    real_windows: &[Window],
    virtual_windows: &[Window],
    n_components: usize,
    calibration: Option<&CalibrationOptions>,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport> {
    let real = featurize(real_windows, n_components)?;
    let virtual_meta: Option<(Vec<String>, Vec<String>)> = (!virtual_windows.is_empty()).then(|| {
        (
            virtual_windows.iter().map(|w| w.label.clone()).collect(),
            virtual_windows.iter().map(|w| w.subject.clone()).collect(),
        )
    });
    if let (Some(r), Some(v)) = (real_windows.first(), virtual_windows.first()) {
        if r.channels != v.channels {
            return Err(Error::ChannelMismatch(format!(
                "real windows have channels {:?}, virtual windows {:?}",
                r.channels, v.channels
            )));
        }
    }
    let virt = checked_virtual(
        &real,
        virtual_meta.as_ref().map(|(l, s)| (l.as_slice(), s.as_slice())),
        cfg,
    )?;
    let classes = class_list(&real, virt.map(|(l, _)| l));

    if !cfg.scenario.uses_virtual() || virtual_windows.is_empty() {
        return run_folds(&real, classes, cfg, |_, _| Ok(None));
    }
    let Some(opts) = calibration else {
        let fixed = featurize(virtual_windows, n_components)?;
        return run_folds(&real, classes, cfg, |_, _| Ok(Some(fixed.clone())));
    };

    let mut virtual_by_class: BTreeMap<String, ChannelSamples> = BTreeMap::new();
    for w in virtual_windows {
        virtual_by_class
            .entry(w.label.clone())
            .or_default()
            .extend_rows(&w.channels, &w.samples);
    }
    run_folds(&real, classes, cfg, |job, pool| {
        let mut real_by_class: BTreeMap<String, ChannelSamples> = BTreeMap::new();
        for &i in pool {
            let w = &real_windows[i];
            if w.subject == job.held_out {
                return Err(Error::Parameter(format!(
                    "held-out subject `{}` leaked into calibration data",
                    job.held_out
                )));
            }
            real_by_class
                .entry(w.label.clone())
                .or_default()
                .extend_rows(&w.channels, &w.samples);
        }
        let cal = Calibration::fit(&virtual_by_class, &real_by_class, opts.n_knots, opts.per_class)?;
        let mapped = virtual_windows
            .iter()
            .map(|w| {
                let map = cal.map_for(Some(&w.label));
                w.map_values(|ch, v| map.apply_value(ch, v))
            })
            .collect::<Result<Vec<_>>>()?;
        featurize(&mapped, n_components).map(Some)
    })
}

fn checked_virtual<'a>(
    real: &FeatureMatrix,
    virt: Option<(&'a [String], &'a [String])>,
    cfg: &ExperimentConfig,
) -> Result<Option<(&'a [String], &'a [String])>> {
    cfg.validate()?;
    if real.is_empty() {
        return Err(Error::Parameter("no real windows to evaluate on".into()));
    }
    if real.subject_ids().len() < 2 {
        return Err(Error::Parameter(
            "leave-one-subject-out needs at least two real subjects".into(),
        ));
    }
    let virt = virt.filter(|(labels, _)| !labels.is_empty());
    if cfg.scenario.uses_virtual() && virt.is_none() {
        return Err(Error::Parameter(format!(
            "scenario `{}` needs virtual training data",
            cfg.scenario
        )));
    }
    if let Some((_, subjects)) = virt {
        let real_subjects = real.subject_ids();
        if let Some(s) = subjects.iter().find(|s| real_subjects.contains(s)) {
            return Err(Error::Parameter(format!(
                "virtual data carries real subject id `{s}`, which would leak across folds"
            )));
        }
    }
    Ok(virt)
}

fn class_list(real: &FeatureMatrix, virtual_labels: Option<&[String]>) -> Vec<String> {
    let mut classes: Vec<String> = real.labels.clone();
    if let Some(v) = virtual_labels {
        classes.extend_from_slice(v);
    }
    classes.sort();
    classes.dedup();
    classes
}

fn run_folds<F>(
    real: &FeatureMatrix,
    classes: Vec<String>,
    cfg: &ExperimentConfig,
    virtual_for: F,
) -> Result<ExperimentReport>
where
    F: Fn(&FoldJob, &[usize]) -> Result<Option<FeatureMatrix>> + Sync,
{
    let subjects = real.subject_ids();
    let class_index = |label: &str| {
        classes
            .binary_search_by(|c| c.as_str().cmp(label))
            .expect("class list covers labels")
    };
    let real_labels: Vec<usize> = real.labels.iter().map(|l| class_index(l)).collect();

    let mut flags = Vec::new();
    for s in &subjects {
        let mut present: Vec<&str> = (0..real.len())
            .filter(|&i| &real.subjects[i] == s)
            .map(|i| real.labels[i].as_str())
            .collect();
        present.sort_unstable();
        present.dedup();
        if present.len() == 1 {
            flags.push(format!("subject `{s}` has a single class `{}`", present[0]));
        }
    }

    let jobs: Vec<FoldJob> = subjects
        .iter()
        .enumerate()
        .flat_map(|(fold, s)| (0..cfg.n_runs).map(move |run| FoldJob { fold, held_out: s, run }))
        .collect();

    let outcomes = jobs
        .par_iter()
        .map(|job| -> Result<(RunResult, Vec<String>)> {
            let mut notes = Vec::new();
            let test: Vec<usize> = (0..real.len()).filter(|&i| real.subjects[i] == job.held_out).collect();
            let train_candidates: Vec<usize> = (0..real.len()).filter(|&i| real.subjects[i] != job.held_out).collect();
            let sub_seed = mix_seed(
                mix_seed(mix_seed(cfg.seed, SUBSAMPLE_STREAM), job.fold as u64),
                job.run as u64,
            );
            let pool = stratified_subsample(real, &train_candidates, cfg.real_fraction, sub_seed);
            if pool.iter().any(|&i| real.subjects[i] == job.held_out) {
                return Err(Error::Parameter(format!(
                    "held-out subject `{}` leaked into the training pool",
                    job.held_out
                )));
            }

            let mut rows: Vec<Vec<f64>> = Vec::new();
            let mut labels: Vec<usize> = Vec::new();
            let mut n_train_real = 0;
            if cfg.scenario.uses_real() {
                for &i in &pool {
                    rows.push(real.rows[i].clone());
                    labels.push(real_labels[i]);
                }
                n_train_real = pool.len();
                let mut seen = vec![false; classes.len()];
                labels.iter().for_each(|&l| seen[l] = true);
                for (c, name) in classes.iter().enumerate() {
                    let in_candidates = train_candidates.iter().any(|&i| real_labels[i] == c);
                    if in_candidates && !seen[c] {
                        notes.push(format!(
                            "class `{name}` lost all real training windows (fold `{}`, run {})",
                            job.held_out, job.run
                        ));
                    }
                }
            }
            let mut n_train_virtual = 0;
            if let Some(v) = virtual_for(job, &pool)?.filter(|_| cfg.scenario.uses_virtual()) {
                if v.feature_dim() != real.feature_dim() {
                    return Err(Error::Shape(format!(
                        "virtual features have dimension {}, real {}",
                        v.feature_dim(),
                        real.feature_dim()
                    )));
                }
                if v.subjects.iter().any(|s| s == job.held_out) {
                    return Err(Error::Parameter(format!(
                        "held-out subject `{}` leaked into virtual training data",
                        job.held_out
                    )));
                }
                n_train_virtual = v.len();
                rows.extend(v.rows);
                labels.extend(v.labels.iter().map(|l| class_index(l)));
            }

            let test_rows: Vec<Vec<f64>> = test.iter().map(|&i| real.rows[i].clone()).collect();
            let actual: Vec<usize> = test.iter().map(|&i| real_labels[i]).collect();
            let mut present: Vec<usize> = labels.clone();
            present.sort_unstable();
            present.dedup();
            let predicted = match present.len() {
                0 => {
                    return Err(Error::Parameter(format!(
                        "no training windows for fold `{}` run {}",
                        job.held_out, job.run
                    )))
                }
                1 => {
                    notes.push(format!(
                        "fold `{}` run {} trained on a single class; predicting it everywhere",
                        job.held_out, job.run
                    ));
                    vec![present[0]; actual.len()]
                }
                _ => {
                    let forest_seed = mix_seed(
                        mix_seed(mix_seed(cfg.seed, FOREST_STREAM), job.fold as u64),
                        job.run as u64,
                    );
                    let model = train_forest_indexed(&rows, &labels, classes.len(), &cfg.forest, forest_seed)?;
                    model.predict(&test_rows)?
                }
            };
            let per_class = per_class_f1(&predicted, &actual, classes.len())?;
            let scored: Vec<f64> = per_class.iter().flatten().copied().collect();
            Ok((
                RunResult {
                    fold: job.fold,
                    held_out: job.held_out.to_string(),
                    run: job.run,
                    macro_f1: scored.iter().sum::<f64>() / scored.len() as f64,
                    per_class_f1: per_class,
                    n_train_real,
                    n_train_virtual,
                    n_test: test.len(),
                },
                notes,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut results = Vec::with_capacity(outcomes.len());
    for (r, notes) in outcomes {
        for n in &notes {
            log::warn!("{n}");
        }
        flags.extend(notes);
        results.push(r);
    }

    let all: Vec<f64> = results.iter().map(|r| r.macro_f1).collect();
    let run_mean_f1: Vec<f64> = (0..cfg.n_runs)
        .map(|run| {
            mean(
                &results
                    .iter()
                    .filter(|r| r.run == run)
                    .map(|r| r.macro_f1)
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    let per_class_f1 = (0..classes.len())
        .map(|c| {
            let v: Vec<f64> = results.iter().filter_map(|r| r.per_class_f1[c]).collect();
            (!v.is_empty()).then(|| mean(&v))
        })
        .collect();
    Ok(ExperimentReport {
        scenario: cfg.scenario,
        real_fraction: cfg.real_fraction,
        n_runs: cfg.n_runs,
        seed: cfg.seed,
        classes,
        mean_f1: mean(&all),
        std_f1: sample_std(&all),
        run_std_f1: sample_std(&run_mean_f1),
        run_mean_f1,
        per_class_f1,
        results,
        flags,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensorsim::Source;

    /// Two well separated classes for each of `subjects` subjects.
    fn dataset(subjects: usize, per_class: usize, source: Source, prefix: &str) -> FeatureMatrix {
        let mut m = FeatureMatrix::new(3);
        for s in 0..subjects {
            for i in 0..per_class {
                let j = ((s * 31 + i * 7) % 11) as f64 * 0.05;
                m.push(vec![j, 1.0 + j, 0.3], "sit".into(), format!("{prefix}{s}"), source)
                    .unwrap();
                m.push(
                    vec![3.0 + j, -1.0 - j, 0.3],
                    "walk".into(),
                    format!("{prefix}{s}"),
                    source,
                )
                .unwrap();
            }
        }
        m
    }

    fn small_forest() -> ForestParams {
        ForestParams {
            n_trees: 10,
            ..Default::default()
        }
    }

    #[test]
    fn real_scenario_on_separable_data() {
        let real = dataset(4, 10, Source::Real, "s");
        let cfg = ExperimentConfig {
            forest: small_forest(),
            n_runs: 2,
            ..Default::default()
        };
        let rep = loso_experiment(&real, None, &cfg).unwrap();
        assert_eq!(rep.results.len(), 8);
        assert_eq!(rep.mean_f1, 1.0);
        assert_eq!(rep.classes, vec!["sit", "walk"]);
        let folds: Vec<(usize, usize)> = rep.results.iter().map(|r| (r.fold, r.run)).collect();
        assert_eq!(
            folds,
            vec![(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1), (3, 0), (3, 1)]
        );
        assert!(rep
            .results
            .iter()
            .all(|r| r.n_train_real == 60 && r.n_train_virtual == 0 && r.n_test == 20));
    }

    #[test]
    fn two_identical_subjects() {
        let mut real = dataset(1, 6, Source::Real, "a");
        let mut twin = real.clone();
        twin.subjects.iter_mut().for_each(|s| *s = "b".into());
        real.append(&twin).unwrap();
        let cfg = ExperimentConfig {
            forest: small_forest(),
            n_runs: 1,
            ..Default::default()
        };
        let rep = loso_experiment(&real, None, &cfg).unwrap();
        assert_eq!(rep.results.len(), 2);
        assert!(rep.results.iter().all(|r| r.macro_f1 == 1.0));
    }

    #[test]
    fn matched_virtual_data_performs_like_real() {
        // Overlapping classes so neither scenario is trivially perfect.
        let noisy = |subjects: usize, prefix: &str, source: Source, salt: u64| {
            use rand::Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(salt);
            let mut m = FeatureMatrix::new(2);
            for s in 0..subjects {
                for _ in 0..30 {
                    for (label, center) in [("sit", 0.0), ("walk", 1.0)] {
                        let row = vec![center + rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                        m.push(row, label.into(), format!("{prefix}{s}"), source).unwrap();
                    }
                }
            }
            m
        };
        let real = noisy(4, "s", Source::Real, 1);
        let virt = noisy(3, "v", Source::Virtual, 2);
        let base = ExperimentConfig {
            forest: ForestParams {
                n_trees: 30,
                ..Default::default()
            },
            ..Default::default()
        };
        let r = loso_experiment(&real, None, &base).unwrap();
        let v = loso_experiment(
            &real,
            Some(&virt),
            &ExperimentConfig {
                scenario: Scenario::Virtual,
                ..base
            },
        )
        .unwrap();
        let spread = r.std_f1.max(v.std_f1);
        assert!(
            (r.mean_f1 - v.mean_f1).abs() <= spread,
            "{} vs {} (std {spread})",
            r.mean_f1,
            v.mean_f1
        );
    }

    #[test]
    fn scenarios_count_training_rows() {
        let real = dataset(3, 10, Source::Real, "s");
        let virt = dataset(1, 25, Source::Virtual, "v");
        let base = ExperimentConfig {
            forest: small_forest(),
            n_runs: 1,
            ..Default::default()
        };
        let v = loso_experiment(
            &real,
            Some(&virt),
            &ExperimentConfig {
                scenario: Scenario::Virtual,
                ..base.clone()
            },
        )
        .unwrap();
        assert!(v.results.iter().all(|r| r.n_train_real == 0 && r.n_train_virtual == 50));
        let m = loso_experiment(
            &real,
            Some(&virt),
            &ExperimentConfig {
                scenario: Scenario::Mixed,
                real_fraction: 0.5,
                ..base
            },
        )
        .unwrap();
        assert!(m
            .results
            .iter()
            .all(|r| r.n_train_real == 20 && r.n_train_virtual == 50));
    }

    #[test]
    fn deterministic_for_a_seed() {
        let real = dataset(3, 12, Source::Real, "s");
        let cfg = ExperimentConfig {
            forest: small_forest(),
            real_fraction: 0.4,
            seed: 7,
            ..Default::default()
        };
        let a = loso_experiment(&real, None, &cfg).unwrap();
        let b = loso_experiment(&real, None, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn subsample_is_stratified_and_monotone() {
        let real = dataset(3, 10, Source::Real, "s");
        let all: Vec<usize> = (0..real.len()).collect();
        let mut last = 0;
        for f in [0.05, 0.1, 0.25, 0.5, 1.0] {
            let keep = stratified_subsample(&real, &all, f, 1);
            assert!(keep.windows(2).all(|w| w[0] < w[1]));
            let per_group = (f * 10.0_f64).round() as usize;
            assert_eq!(keep.len(), per_group * 6);
            assert!(keep.len() >= last);
            last = keep.len();
        }
    }

    #[test]
    fn rejects_bad_setups() {
        let real = dataset(3, 4, Source::Real, "s");
        let virt_leaky = dataset(1, 4, Source::Virtual, "s");
        let cfg = ExperimentConfig {
            scenario: Scenario::Mixed,
            ..Default::default()
        };
        assert!(loso_experiment(&real, None, &cfg).is_err());
        assert!(loso_experiment(&real, Some(&virt_leaky), &cfg).is_err());
        let bad = ExperimentConfig {
            real_fraction: 0.0,
            ..Default::default()
        };
        assert!(loso_experiment(&real, None, &bad).is_err());
        let one = dataset(1, 4, Source::Real, "s");
        assert!(loso_experiment(&one, None, &ExperimentConfig::default()).is_err());
    }

    #[test]
    fn flags_single_class_subject() {
        let mut real = dataset(3, 5, Source::Real, "s");
        real.push(vec![0.0, 1.0, 0.3], "sit".into(), "lonely".into(), Source::Real)
            .unwrap();
        let cfg = ExperimentConfig {
            forest: small_forest(),
            n_runs: 1,
            ..Default::default()
        };
        let rep = loso_experiment(&real, None, &cfg).unwrap();
        assert!(rep.flags.iter().any(|f| f.contains("lonely")));
    }

    #[test]
    fn csv_and_delta() {
        let real = dataset(2, 5, Source::Real, "s");
        let cfg = ExperimentConfig {
            forest: small_forest(),
            n_runs: 1,
            ..Default::default()
        };
        let rep = loso_experiment(&real, None, &cfg).unwrap();
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("scenario,fold,run,macro_f1"));
        assert_eq!(text.lines().nth(1), Some("real,s0,0,1"));
        let delta = rep.per_class_delta(&rep);
        assert_eq!(delta["sit"], Some(0.0));
    }

    #[test]
    fn calibrated_windows_pipeline() {
        let win = |label: &str, subject: &str, source: Source, offset: f64| Window {
            samples: (0..8).map(|i| vec![offset + i as f64 * 0.1]).collect(),
            channels: vec!["hip/ax".into()],
            label: label.into(),
            subject: subject.into(),
            source,
        };
        let mut real = Vec::new();
        for s in ["a", "b", "c"] {
            for _ in 0..4 {
                real.push(win("sit", s, Source::Real, 0.0));
                real.push(win("walk", s, Source::Real, 5.0));
            }
        }
        // Virtual data shifted by +100: useless without calibration.
        let virt: Vec<Window> = (0..6)
            .flat_map(|_| {
                [
                    win("sit", "v", Source::Virtual, 100.0),
                    win("walk", "v", Source::Virtual, 105.0),
                ]
            })
            .collect();
        let cfg = ExperimentConfig {
            scenario: Scenario::Virtual,
            forest: small_forest(),
            n_runs: 1,
            ..Default::default()
        };
        let opts = CalibrationOptions {
            n_knots: 50,
            per_class: false,
        };
        let calibrated = loso_experiment_windows(&real, &virt, 4, Some(&opts), &cfg).unwrap();
        assert_eq!(calibrated.mean_f1, 1.0);
        let raw = loso_experiment_windows(&real, &virt, 4, None, &cfg).unwrap();
        assert!(raw.mean_f1 < 1.0);
    }
}
