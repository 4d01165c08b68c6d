//! Rank-transformation calibration of virtual sensor channels.
//!
//! Each channel gets a monotone piecewise-linear map whose knots pair equal
//! empirical quantiles of the virtual (source) and real (target) samples.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensorsim::ImuStream;

pub const MAP_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_KNOTS: usize = 1000;

/// Raw values per channel name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChannelSamples(pub BTreeMap<String, Vec<f64>>);

impl ChannelSamples {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, channel: &str, value: f64) {
        self.0.entry(channel.to_string()).or_default().push(value);
    }

    /// Appends rows whose columns follow `names`.
    pub fn extend_rows<'a>(&mut self, names: &[String], rows: impl IntoIterator<Item = &'a Vec<f64>>) {
        for row in rows {
            for (name, v) in names.iter().zip(row) {
                self.push(name, *v);
            }
        }
    }

    pub fn extend_stream(&mut self, stream: &ImuStream) {
        self.extend_rows(&stream.channel_names(), &stream.to_rows());
    }

    pub fn channels(&self) -> impl Iterator<Item = &String> {
        self.0.keys()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMap {
    pub knots_source: Vec<f64>,
    pub knots_target: Vec<f64>,
}

impl ChannelMap {
    pub fn new(knots_source: Vec<f64>, knots_target: Vec<f64>) -> Result<Self> {
        if knots_source.len() != knots_target.len() || knots_source.len() < 2 {
            return Err(Error::Parameter(format!(
                "knot lists must have equal length >= 2, got {} and {}",
                knots_source.len(),
                knots_target.len()
            )));
        }
        for knots in [&knots_source, &knots_target] {
            if knots.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("calibration knot".into()));
            }
            if knots.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::Parameter("knots must be non-decreasing".into()));
            }
        }
        Ok(ChannelMap {
            knots_source,
            knots_target,
        })
    }

    /// Maps one value. Outside the source range the result is clamped to the
    /// first/last target knot. A value equal to a run of tied source knots
    /// maps to the mean of their targets (mid-rank).
    pub fn apply(&self, v: f64) -> f64 {
        let s = &self.knots_source;
        let t = &self.knots_target;
        let k = s.len();
        if v.is_nan() {
            return v;
        }
        if v < s[0] {
            return t[0];
        }
        if v > s[k - 1] {
            return t[k - 1];
        }
        let lo = s.partition_point(|x| *x < v);
        let hi = s.partition_point(|x| *x <= v);
        if lo < hi {
            if hi - lo == 1 {
                return t[lo];
            }
            return t[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
        }
        // s[lo - 1] < v < s[lo]
        let (s0, s1, t0, t1) = (s[lo - 1], s[lo], t[lo - 1], t[lo]);
        t0 + (v - s0) / (s1 - s0) * (t1 - t0)
    }
}

/// Per-channel rank maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionMap {
    pub format_version: u32,
    pub channels: BTreeMap<String, ChannelMap>,
}

impl DistributionMap {
    pub fn channel(&self, name: &str) -> Result<&ChannelMap> {
        self.channels
            .get(name)
            .ok_or_else(|| Error::UnknownChannel(name.to_string()))
    }

    pub fn apply_value(&self, channel: &str, v: f64) -> Result<f64> {
        Ok(self.channel(channel)?.apply(v))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let map: DistributionMap = serde_json::from_str(text)?;
        if map.format_version != MAP_FORMAT_VERSION {
            return Err(Error::Parameter(format!(
                "unsupported distribution map version {}",
                map.format_version
            )));
        }
        for (name, ch) in &map.channels {
            ChannelMap::new(ch.knots_source.clone(), ch.knots_target.clone())
                .map_err(|e| Error::Parameter(format!("channel `{name}`: {e}")))?;
        }
        Ok(map)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Empirical quantile of sorted data by linear interpolation between order
/// statistics at position `p * (n - 1)`.
pub fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = p.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    let frac = h - lo as f64;
    if frac == 0.0 {
        return sorted[lo];
    }
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

fn sorted_finite(channel: &str, values: &[f64], side: &str) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::Parameter(format!(
            "channel `{channel}` has {} {side} samples, need at least 2",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{side} samples of channel `{channel}`")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Fits one map per channel with knots at quantile levels `k / (n_knots - 1)`.
pub fn fit_rank_map(
    virtual_samples: &ChannelSamples,
    real_samples: &ChannelSamples,
    n_knots: usize,
) -> Result<DistributionMap> {
    if n_knots < 2 {
        return Err(Error::Parameter(format!("n_knots must be >= 2, got {n_knots}")));
    }
    let vkeys: Vec<&String> = virtual_samples.channels().collect();
    let rkeys: Vec<&String> = real_samples.channels().collect();
    if vkeys != rkeys {
        return Err(Error::ChannelMismatch(format!("virtual {vkeys:?} vs real {rkeys:?}")));
    }
    if vkeys.is_empty() {
        return Err(Error::Parameter("no channels to calibrate".into()));
    }
    let levels: Vec<f64> = (0..n_knots).map(|k| k as f64 / (n_knots - 1) as f64).collect();
    let channels = vkeys
        .par_iter()
        .map(|name| {
            let src = sorted_finite(name, &virtual_samples.0[*name], "virtual")?;
            let dst = sorted_finite(name, &real_samples.0[*name], "real")?;
            let map = ChannelMap {
                knots_source: levels.iter().map(|&p| empirical_quantile(&src, p)).collect(),
                knots_target: levels.iter().map(|&p| empirical_quantile(&dst, p)).collect(),
            };
            Ok(((*name).clone(), map))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(DistributionMap {
        format_version: MAP_FORMAT_VERSION,
        channels,
    })
}

/// Replaces every stream value by its mapped value.
pub fn apply_rank_map(map: &DistributionMap, stream: &ImuStream) -> Result<ImuStream> {
    stream.map_values(|ch, v| map.apply_value(ch, v))
}

/// Activity-specific maps with a global fallback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub global: DistributionMap,
    pub per_class: BTreeMap<String, DistributionMap>,
}

impl Calibration {
    /// Fits the global map on all samples and, when `per_class` is set, one
    /// map for every class present on both sides with at least two samples
    /// per channel.
    pub fn fit(
        virtual_by_class: &BTreeMap<String, ChannelSamples>,
        real_by_class: &BTreeMap<String, ChannelSamples>,
        n_knots: usize,
        per_class: bool,
    ) -> Result<Self> {
        let pool = |by_class: &BTreeMap<String, ChannelSamples>| {
            let mut all = ChannelSamples::new();
            for samples in by_class.values() {
                for (ch, vals) in &samples.0 {
                    all.0.entry(ch.clone()).or_default().extend_from_slice(vals);
                }
            }
            all
        };
        let global = fit_rank_map(&pool(virtual_by_class), &pool(real_by_class), n_knots)?;
        let mut maps = BTreeMap::new();
        if per_class {
            for (class, vs) in virtual_by_class {
                let Some(rs) = real_by_class.get(class) else {
                    log::warn!("calibration: no real samples for class `{class}`, using global map");
                    continue;
                };
                let enough = |s: &ChannelSamples| s.0.values().all(|v| v.len() >= 2);
                if !enough(vs) || !enough(rs) {
                    log::warn!("calibration: too few samples for class `{class}`, using global map");
                    continue;
                }
                maps.insert(class.clone(), fit_rank_map(vs, rs, n_knots)?);
            }
        }
        Ok(Calibration {
            global,
            per_class: maps,
        })
    }

    pub fn map_for(&self, class: Option<&str>) -> &DistributionMap {
        class.and_then(|c| self.per_class.get(c)).unwrap_or(&self.global)
    }

    pub fn apply(&self, stream: &ImuStream) -> Result<ImuStream> {
        apply_rank_map(self.map_for(stream.meta.activity.as_deref()), stream)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and checks every contained map like [`DistributionMap::from_json`].
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Calibration = serde_json::from_str(text)?;
        let check = |m: &DistributionMap| DistributionMap::from_json(&serde_json::to_string(m)?);
        check(&raw.global)?;
        for m in raw.per_class.values() {
            check(m)?;
        }
        Ok(raw)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::sensorsim::{SensorChannels, StreamMeta};

    fn one(name: &str, vals: Vec<f64>) -> ChannelSamples {
        let mut s = ChannelSamples::new();
        s.0.insert(name.into(), vals);
        s
    }

    #[test]
    fn quantile_interpolates_order_statistics() {
        let v = [1.0, 2.0, 4.0, 8.0];
        assert_eq!(empirical_quantile(&v, 0.0), 1.0);
        assert_eq!(empirical_quantile(&v, 1.0), 8.0);
        assert!((empirical_quantile(&v, 0.5) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn identical_samples_give_identity_knots() {
        let x: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let m = fit_rank_map(&one("c", x.clone()), &one("c", x.clone()), 50).unwrap();
        let ch = m.channel("c").unwrap();
        assert_eq!(ch.knots_source, ch.knots_target);
        for v in &x {
            assert!((ch.apply(*v) - v).abs() < 1e-9);
        }
    }

    #[test]
    fn shifted_samples_give_constant_offset() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..500).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| v + 3.0).collect();
        let m = fit_rank_map(&one("c", x.clone()), &one("c", y), 100).unwrap();
        let ch = m.channel("c").unwrap();
        for (s, t) in ch.knots_source.iter().zip(&ch.knots_target) {
            assert!((t - s - 3.0).abs() < 1e-12);
        }
        for v in &x {
            assert!((ch.apply(*v) - v - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_range_values_clamp() {
        let ch = ChannelMap::new(vec![0.0, 1.0, 2.0], vec![10.0, 20.0, 40.0]).unwrap();
        assert_eq!(ch.apply(-5.0), 10.0);
        assert_eq!(ch.apply(7.0), 40.0);
        assert_eq!(ch.apply(1.5), 30.0);
    }

    #[test]
    fn tied_knots_map_to_mid_rank() {
        let ch = ChannelMap::new(vec![0.0, 1.0, 1.0, 1.0, 2.0], vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(ch.apply(1.0), 2.0);
        assert!(ch.apply(0.999) <= ch.apply(1.0));
        assert!(ch.apply(1.001) >= ch.apply(1.0));
    }

    #[test]
    fn fit_errors() {
        assert!(fit_rank_map(&one("a", vec![1.0, 2.0]), &one("b", vec![1.0, 2.0]), 10).is_err());
        assert!(fit_rank_map(&one("a", vec![1.0]), &one("a", vec![1.0, 2.0]), 10).is_err());
        assert!(fit_rank_map(&one("a", vec![1.0, 2.0]), &one("a", vec![1.0, 2.0]), 1).is_err());
        assert!(fit_rank_map(&one("a", vec![1.0, f64::NAN]), &one("a", vec![1.0, 2.0]), 5).is_err());
    }

    #[test]
    fn apply_to_stream_and_unknown_channel() {
        let sensors = vec![SensorChannels {
            location: "w".into(),
            accel: vec![[0.5, 0.5, 0.5]; 4],
            gyro: None,
        }];
        let stream = ImuStream::new(20.0, sensors, StreamMeta::default()).unwrap();
        let id = ChannelMap::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let shift = ChannelMap::new(vec![0.0, 1.0], vec![3.0, 4.0]).unwrap();
        let mut channels = BTreeMap::new();
        channels.insert("w/ax".to_string(), id.clone());
        channels.insert("w/ay".to_string(), id);
        channels.insert("w/az".to_string(), shift);
        let map = DistributionMap {
            format_version: MAP_FORMAT_VERSION,
            channels,
        };
        let out = apply_rank_map(&map, &stream).unwrap();
        assert!(out.sensors()[0].accel.iter().all(|v| *v == [0.5, 0.5, 3.5]));

        let mut partial = map.clone();
        partial.channels.remove("w/ay");
        assert!(matches!(
            apply_rank_map(&partial, &stream),
            Err(Error::UnknownChannel(_))
        ));
    }

    #[test]
    fn json_round_trip() {
        let m = fit_rank_map(&one("c", vec![0.1, 0.7, 0.3]), &one("c", vec![1.0, 2.0, 5.0]), 7).unwrap();
        assert_eq!(DistributionMap::from_json(&m.to_json().unwrap()).unwrap(), m);
        let bad = m
            .to_json()
            .unwrap()
            .replace("\"format_version\": 1", "\"format_version\": 9");
        assert!(DistributionMap::from_json(&bad).is_err());
    }

    #[test]
    fn per_class_falls_back_to_global() {
        let mut v = BTreeMap::new();
        v.insert("walk".to_string(), one("c", vec![0.0, 1.0, 2.0]));
        v.insert("sit".to_string(), one("c", vec![5.0, 6.0, 7.0]));
        let mut r = BTreeMap::new();
        r.insert("walk".to_string(), one("c", vec![10.0, 11.0, 12.0]));
        let cal = Calibration::fit(&v, &r, 3, true).unwrap();
        assert!(cal.per_class.contains_key("walk"));
        assert!(!cal.per_class.contains_key("sit"));
        assert_eq!(cal.map_for(Some("sit")), &cal.global);
        assert_eq!(cal.map_for(Some("walk")).channel("c").unwrap().apply(1.0), 11.0);
    }

    #[test]
    fn calibration_json_round_trip() {
        let mut v = BTreeMap::new();
        v.insert("walk".to_string(), one("c", vec![0.0, 1.0, 2.0]));
        let mut r = BTreeMap::new();
        r.insert("walk".to_string(), one("c", vec![10.0, 11.0, 12.0]));
        let cal = Calibration::fit(&v, &r, 3, true).unwrap();
        assert_eq!(Calibration::from_json(&cal.to_json().unwrap()).unwrap(), cal);
        let broken = cal.to_json().unwrap().replacen("10.0", "99.0", 1);
        assert!(Calibration::from_json(&broken).is_err());
    }

    proptest! {
        #[test]
        fn apply_is_monotone(
            src in proptest::collection::vec(-10.0..10.0f64, 2..60),
            dst in proptest::collection::vec(-10.0..10.0f64, 2..60),
            a in -12.0..12.0f64,
            b in -12.0..12.0f64,
        ) {
            let m = fit_rank_map(&one("c", src), &one("c", dst), 17).unwrap();
            let ch = m.channel("c").unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(ch.apply(lo) <= ch.apply(hi));
        }

        #[test]
        fn self_map_preserves_rank_order(x in proptest::collection::vec(-5.0..5.0f64, 2..80)) {
            let m = fit_rank_map(&one("c", x.clone()), &one("c", x.clone()), 25).unwrap();
            let ch = m.channel("c").unwrap();
            for (a, b) in x.iter().zip(x.iter().skip(1)) {
                if a < b { prop_assert!(ch.apply(*a) <= ch.apply(*b)); }
            }
            for k in &ch.knots_source {
                prop_assert!((ch.apply(*k) - k).abs() < 1e-9);
            }
        }

        #[test]
        fn mapped_quantiles_reproduce_target_knots(
            src in proptest::collection::vec(-5.0..5.0f64, 20..200),
            dst in proptest::collection::vec(-50.0..50.0f64, 20..200),
        ) {
            let n_knots = 11;
            let m = fit_rank_map(&one("c", src.clone()), &one("c", dst), n_knots).unwrap();
            let ch = m.channel("c").unwrap();
            let mut mapped: Vec<f64> = src.iter().map(|v| ch.apply(*v)).collect();
            mapped.sort_by(f64::total_cmp);
            let gap = ch.knots_target.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
            for (k, target) in ch.knots_target.iter().enumerate() {
                let q = empirical_quantile(&mapped, k as f64 / (n_knots - 1) as f64);
                prop_assert!((q - target).abs() <= gap + 1e-9, "k={k} q={q} target={target} gap={gap}");
            }
        }
    }
}
