//! Online per-feature anomaly scoring.
//!
//! Each aggregated observation is viewed as four features: the three
//! processing times `d1, d2, d3` and the settled volume `v`. A detector
//! consumes observations one at a time and emits a score in `[0, 1]` per
//! present feature plus a binary label obtained by strict threshold
//! comparison (`y = 1` iff `a > theta`). The contract is algorithm-agnostic:
//! anything implementing [`AnomalyDetector`] can sit behind the pipeline.
//!
//! The bundled [`ReferenceDetector`] keeps a rolling median/MAD baseline
//! per feature and scores one-sided robust deviations, blending the
//! current bin's deviation with the mean over the trailing multi-bucket
//! window before squashing to `[0, 1)` with `s = 1 - exp(-d / lambda)`.
//! `lambda` is fixed so a sustained three-sigma deviation lands at 0.5;
//! six sigma reaches the 0.75 critical band.
//!
//! Score JSONL, one line per bin:
//!
//! ```text
//! {"tau_ms": 3000, "a": {"d1": 0.0, "d2": 0.91, "d3": 0.01, "v": 0.33},
//!  "y": {"d1": 0, "d2": 1, "d3": 0, "v": 1}}
//! ```

use crate::aggregator::AggregatedObservation;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Squash scale: `1 - exp(-3 / LAMBDA) = 0.5`, so three robust deviations
/// map to a score of one half.
pub const LAMBDA: f64 = 4.328085122666891; // 3 / ln 2

/// Scale factor turning a median absolute deviation into a consistent
/// estimate of the standard deviation for normal data.
const MAD_CONSISTENCY: f64 = 1.4826;

/// Baseline entries required before deviations are tracked internally.
const MIN_BASELINE: usize = 30;

/// Feature index into score/label arrays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feature {
    D1,
    D2,
    D3,
    V,
}

impl Feature {
    pub const ALL: [Feature; 4] = [Feature::D1, Feature::D2, Feature::D3, Feature::V];

    pub fn index(self) -> usize {
        match self {
            Feature::D1 => 0,
            Feature::D2 => 1,
            Feature::D3 => 2,
            Feature::V => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::D1 => "d1",
            Feature::D2 => "d2",
            Feature::D3 => "d3",
            Feature::V => "v",
        }
    }
}

/// Which direction of deviation is anomalous for a feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviationSide {
    /// Values above the baseline are anomalous (processing times).
    High,
    /// Values below the baseline are anomalous (volume).
    Low,
}

/// One observation viewed as four scalar features; processing times may be
/// absent for empty bins.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub tau_ms: i64,
    /// Indexed by [`Feature::index`]; `values[3]` (volume) is always present.
    pub values: [Option<f64>; 4],
}

impl From<&AggregatedObservation> for FeatureVector {
    fn from(obs: &AggregatedObservation) -> Self {
        Self {
            tau_ms: obs.tau_ms,
            values: [obs.d1, obs.d2, obs.d3, Some(obs.v as f64)],
        }
    }
}

/// Per-feature anomaly scores in `[0, 1]`; absent when the feature was
/// absent in the observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub d1: Option<f64>,
    pub d2: Option<f64>,
    pub d3: Option<f64>,
    pub v: f64,
}

impl ScoreVector {
    pub fn zero() -> Self {
        Self {
            d1: Some(0.0),
            d2: Some(0.0),
            d3: Some(0.0),
            v: 0.0,
        }
    }

    pub fn get(&self, feature: Feature) -> Option<f64> {
        match feature {
            Feature::D1 => self.d1,
            Feature::D2 => self.d2,
            Feature::D3 => self.d3,
            Feature::V => Some(self.v),
        }
    }

    fn set(&mut self, feature: Feature, score: Option<f64>) {
        match feature {
            Feature::D1 => self.d1 = score,
            Feature::D2 => self.d2 = score,
            Feature::D3 => self.d3 = score,
            Feature::V => self.v = score.unwrap_or(0.0),
        }
    }
}

/// Binary labels per feature; absent features carry label 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LabelVector {
    pub d1: bool,
    pub d2: bool,
    pub d3: bool,
    pub v: bool,
}

impl LabelVector {
    pub fn get(&self, feature: Feature) -> bool {
        match feature {
            Feature::D1 => self.d1,
            Feature::D2 => self.d2,
            Feature::D3 => self.d3,
            Feature::V => self.v,
        }
    }

    fn set(&mut self, feature: Feature, label: bool) {
        match feature {
            Feature::D1 => self.d1 = label,
            Feature::D2 => self.d2 = label,
            Feature::D3 => self.d3 = label,
            Feature::V => self.v = label,
        }
    }

    pub fn any(&self) -> bool {
        self.d1 || self.d2 || self.d3 || self.v
    }

    /// Features currently labeled anomalous.
    pub fn active(&self) -> Vec<Feature> {
        Feature::ALL
            .into_iter()
            .filter(|f| self.get(*f))
            .collect()
    }
}

// Labels cross the wire as 0/1 integers.
impl Serialize for LabelVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire {
            d1: u8,
            d2: u8,
            d3: u8,
            v: u8,
        }
        Wire {
            d1: self.d1 as u8,
            d2: self.d2 as u8,
            d3: self.d3 as u8,
            v: self.v as u8,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LabelVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            d1: u8,
            d2: u8,
            d3: u8,
            v: u8,
        }
        let w = Wire::deserialize(d)?;
        Ok(LabelVector {
            d1: w.d1 != 0,
            d2: w.d2 != 0,
            d3: w.d3 != 0,
            v: w.v != 0,
        })
    }
}

/// Per-feature threshold set; strict comparison per the binarization law.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub v: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            d1: 0.4,
            d2: 0.4,
            d3: 0.4,
            v: 0.25,
        }
    }
}

impl Thresholds {
    pub fn get(&self, feature: Feature) -> f64 {
        match feature {
            Feature::D1 => self.d1,
            Feature::D2 => self.d2,
            Feature::D3 => self.d3,
            Feature::V => self.v,
        }
    }
}

/// Relative noise floors on the robust scale, as a fraction of the baseline
/// median. Deviations are measured against at least `floor * |median|`, so
/// fluctuations below the floor never alarm regardless of how tight the
/// baseline dispersion is. With the default volume floor of 0.125 the
/// C2-C4 severity bands correspond to sustained volume drops of roughly
/// 16%, 37.5% and 75%.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseFloors {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub v: f64,
}

impl Default for NoiseFloors {
    fn default() -> Self {
        Self {
            d1: 0.05,
            d2: 0.05,
            d3: 0.05,
            v: 0.125,
        }
    }
}

impl NoiseFloors {
    pub fn get(&self, feature: Feature) -> f64 {
        match feature {
            Feature::D1 => self.d1,
            Feature::D2 => self.d2,
            Feature::D3 => self.d3,
            Feature::V => self.v,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub theta: Thresholds,
    /// Bins consumed before scoring starts; all-zero scores meanwhile.
    pub warmup_bins: usize,
    /// Trailing accepted bins backing the median/MAD baseline.
    pub baseline_window: usize,
    /// Trailing intervals blended into the trend term.
    pub multi_bucket_window: usize,
    /// Anomalous side per feature: high for processing times, low for volume.
    pub directions: [DeviationSide; 4],
    /// End-to-end per-bin processing budget; must stay below the sampling
    /// rate for the pipeline to qualify as real-time.
    pub latency_budget_ms: i64,
    pub noise_floors: NoiseFloors,
    /// Absolute floor on the robust scale, covering all-zero baselines.
    pub min_scale_abs: f64,
    /// Processing-time features are scored only when the bin volume is at
    /// least this fraction of the baseline volume: a handful of payments
    /// cannot estimate a phase median, and scoring such bins turns volume
    /// collapses into phantom processing-time alarms.
    pub min_delta_volume_frac: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            theta: Thresholds::default(),
            warmup_bins: 120,
            baseline_window: 300,
            multi_bucket_window: 11,
            directions: [
                DeviationSide::High,
                DeviationSide::High,
                DeviationSide::High,
                DeviationSide::Low,
            ],
            latency_budget_ms: 900,
            noise_floors: NoiseFloors::default(),
            min_scale_abs: 1.0,
            min_delta_volume_frac: 0.10,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), String> {
        for f in Feature::ALL {
            let t = self.theta.get(f);
            if !(0.0..1.0).contains(&t) || t <= 0.0 {
                return Err(format!("theta[{}] must lie in (0, 1), got {t}", f.name()));
            }
        }
        if self.multi_bucket_window == 0 {
            return Err("multi_bucket_window must be >= 1".into());
        }
        if self.baseline_window == 0 {
            return Err("baseline_window must be >= 1".into());
        }
        if self.min_scale_abs <= 0.0 {
            return Err("min_scale_abs must be > 0".into());
        }
        Ok(())
    }
}

/// Derives the binary label vector from a score vector by strict
/// per-feature threshold comparison: `y = 1` iff `a > theta`. Equality at
/// the threshold stays 0; absent features stay 0.
pub fn binarize(scores: &ScoreVector, theta: &Thresholds) -> LabelVector {
    let mut y = LabelVector::default();
    for f in Feature::ALL {
        if let Some(a) = scores.get(f) {
            y.set(f, a > theta.get(f));
        }
    }
    y
}

/// Scored observation: one score vector plus its binarization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub tau_ms: i64,
    pub a: ScoreVector,
    pub y: LabelVector,
}

/// Anything that can score observations online, one per bin.
///
/// Implementations are stateful and sequential: exactly one score vector
/// per observation after warmup, all-zero scores during warmup.
pub trait AnomalyDetector {
    fn observe(&mut self, x: &FeatureVector) -> (ScoreVector, LabelVector);
}

/// Rolling one-feature baseline over the trailing accepted values.
#[derive(Debug, Clone)]
struct RollingBaseline {
    values: VecDeque<f64>,
    cap: usize,
}

impl RollingBaseline {
    fn new(cap: usize) -> Self {
        Self {
            values: VecDeque::with_capacity(cap),
            cap,
        }
    }

    fn push(&mut self, value: f64) {
        if self.values.len() == self.cap {
            self.values.pop_front();
        }
        self.values.push_back(value);
    }

    fn len(&self) -> usize {
        self.values.len()
    }

    /// (median, MAD) of the trailing window.
    fn stats(&self) -> Option<(f64, f64)> {
        if self.values.is_empty() {
            return None;
        }
        let mut sorted: Vec<f64> = self.values.iter().copied().collect();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let median = mid(&sorted);
        let mut dev: Vec<f64> = sorted.iter().map(|v| (v - median).abs()).collect();
        dev.sort_by(|a, b| a.total_cmp(b));
        Some((median, mid(&dev)))
    }
}

fn mid(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Reference detector: rolling median/MAD baseline, one-sided robust
/// deviations, multi-bucket trend blending, exponential squashing.
///
/// Observations carrying any anomalous label are excluded from baseline
/// updates so sustained incidents cannot contaminate the notion of normal;
/// the trend buffer deliberately keeps them, since a deviation that
/// persists across buckets is the signal being amplified.
#[derive(Debug, Clone)]
pub struct ReferenceDetector {
    cfg: DetectorConfig,
    baselines: [RollingBaselineSlot; 4],
    seen: usize,
}

#[derive(Debug, Clone)]
struct RollingBaselineSlot {
    baseline: RollingBaseline,
    /// Most recent one-sided deviations, newest last, capacity
    /// `multi_bucket_window`.
    trend: VecDeque<f64>,
}

impl ReferenceDetector {
    pub fn new(cfg: DetectorConfig) -> Self {
        let make = || RollingBaselineSlot {
            baseline: RollingBaseline::new(cfg.baseline_window),
            trend: VecDeque::with_capacity(cfg.multi_bucket_window),
        };
        Self {
            baselines: [make(), make(), make(), make()],
            cfg,
            seen: 0,
        }
    }

    /// Builds a detector with a preloaded, already-warm baseline per
    /// feature. Scoring starts immediately; the trend buffers are empty.
    pub fn with_baseline(cfg: DetectorConfig, baseline: [&[f64]; 4]) -> Self {
        let mut det = Self::new(cfg);
        for (slot, values) in det.baselines.iter_mut().zip(baseline) {
            for &v in values {
                slot.baseline.push(v);
            }
        }
        det.seen = det.cfg.warmup_bins;
        det
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    /// One-sided robust deviation of `value` against the feature's current
    /// baseline: positive deviations only for High features, negative only
    /// for Low, opposite side clamped to zero.
    fn deviation(&self, feature: Feature, value: f64) -> Option<f64> {
        let slot = &self.baselines[feature.index()];
        let (median, mad) = slot.baseline.stats()?;
        let scale = (mad * MAD_CONSISTENCY)
            .max(self.cfg.noise_floors.get(feature) * median.abs())
            .max(self.cfg.min_scale_abs);
        let raw = match self.cfg.directions[feature.index()] {
            DeviationSide::High => value - median,
            DeviationSide::Low => median - value,
        };
        Some((raw / scale).max(0.0))
    }

    fn squash(deviation: f64) -> f64 {
        1.0 - (-deviation / LAMBDA).exp()
    }
}

impl AnomalyDetector for ReferenceDetector {
    fn observe(&mut self, x: &FeatureVector) -> (ScoreVector, LabelVector) {
        self.seen += 1;
        let warming = self.seen <= self.cfg.warmup_bins;

        // Volume gate for processing-time features: during a collapse the
        // few surviving payments make bin medians statistically worthless.
        let volume_gate = {
            let v_slot = &self.baselines[Feature::V.index()].baseline;
            let volume = x.values[Feature::V.index()].unwrap_or(0.0);
            v_slot.len() >= MIN_BASELINE
                && v_slot
                    .stats()
                    .map(|(median, _)| volume < self.cfg.min_delta_volume_frac * median)
                    .unwrap_or(false)
        };

        let mut scores = ScoreVector::zero();
        for f in Feature::ALL {
            let i = f.index();
            let Some(value) = x.values[i] else {
                scores.set(f, None);
                continue;
            };
            if volume_gate && f != Feature::V {
                scores.set(f, None);
                continue;
            }
            // Track deviations once the baseline is minimally populated so
            // the trend buffer is already stationary when warmup ends.
            let deviation = if self.baselines[i].baseline.len() >= MIN_BASELINE {
                self.deviation(f, value)
            } else {
                None
            };
            let score = match deviation {
                Some(d) if !warming => {
                    let slot = &mut self.baselines[i];
                    let trend = if slot.trend.is_empty() {
                        0.0
                    } else {
                        slot.trend.iter().sum::<f64>() / slot.trend.len() as f64
                    };
                    push_capped(&mut slot.trend, d, self.cfg.multi_bucket_window);
                    Self::squash(0.5 * d + 0.5 * trend)
                }
                Some(d) => {
                    push_capped(
                        &mut self.baselines[i].trend,
                        d,
                        self.cfg.multi_bucket_window,
                    );
                    0.0
                }
                None => 0.0,
            };
            scores.set(f, Some(score));
        }

        let labels = if warming {
            LabelVector::default()
        } else {
            binarize(&scores, &self.cfg.theta)
        };

        // Self-exclusion: anomalous observations never feed the baseline.
        if !labels.any() {
            for f in Feature::ALL {
                if let Some(value) = x.values[f.index()] {
                    self.baselines[f.index()].baseline.push(value);
                }
            }
        }

        (scores, labels)
    }
}

fn push_capped(buf: &mut VecDeque<f64>, value: f64, cap: usize) {
    if buf.len() == cap {
        buf.pop_front();
    }
    buf.push_back(value);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(values: [Option<f64>; 4]) -> FeatureVector {
        FeatureVector { tau_ms: 0, values }
    }

    #[test]
    fn warmup_emits_all_zero_scores_and_labels() {
        let mut det = ReferenceDetector::new(DetectorConfig::default());
        let (a, y) = det.observe(&fv([Some(40.0), Some(600.0), Some(50.0), Some(100.0)]));
        assert_eq!(a, ScoreVector::zero());
        assert!(!y.any());
    }

    #[test]
    fn binarization_is_strict() {
        let theta = Thresholds::default();
        let mut a = ScoreVector::zero();
        a.v = 0.25; // exactly at threshold: label stays 0
        assert!(!binarize(&a, &theta).v);
        a.v = 0.25000001;
        assert!(binarize(&a, &theta).v);
        a.d2 = Some(0.95);
        assert!(binarize(&a, &theta).d2);
        a.d2 = Some(0.4);
        assert!(!binarize(&a, &theta).d2);
        a.d2 = None;
        assert!(!binarize(&a, &theta).d2);
    }

    #[test]
    fn value_at_baseline_median_scores_zero() {
        // 101 samples cycling 90..=110 put the median exactly at 100.
        let baseline: Vec<f64> = (0..101).map(|i| 90.0 + (i % 21) as f64).collect();
        let mut det = ReferenceDetector::with_baseline(
            DetectorConfig::default(),
            [&baseline, &baseline, &baseline, &baseline],
        );
        let (a, _) = det.observe(&fv([Some(100.0), Some(100.0), Some(100.0), Some(100.0)]));
        assert_eq!(a.d1, Some(0.0));
        assert_eq!(a.v, 0.0);
    }

    #[test]
    fn volume_collapse_scores_above_threshold() {
        // Baseline volume hovers around 100; observing 21 is a 79-count
        // drop against a robust scale of max(1.4826 * MAD, 0.125 * 100).
        // With this baseline the median is 100 and MAD = 1, so the floor
        // 12.5 wins:
        //   z = 79 / 12.5 = 6.32
        //   first-bin blend = 0.5 * z = 3.16
        //   score = 1 - exp(-3.16 / LAMBDA)
        let baseline: Vec<f64> = (0..120).map(|i| 98.0 + (i % 5) as f64).collect();
        let mut det = ReferenceDetector::with_baseline(
            DetectorConfig::default(),
            [&baseline, &baseline, &baseline, &baseline],
        );
        let (a, y) = det.observe(&fv([Some(100.0), Some(100.0), Some(100.0), Some(21.0)]));
        let expected = 1.0 - (-(0.5 * (79.0 / 12.5)) / LAMBDA).exp();
        assert!((a.v - expected).abs() < 1e-12, "v score {} vs {}", a.v, expected);
        assert!(a.v > 0.4);
        assert!(y.v);
    }

    #[test]
    fn deviations_are_one_sided() {
        let baseline: Vec<f64> = (0..100).map(|i| 95.0 + (i % 11) as f64).collect();
        let mut det = ReferenceDetector::with_baseline(
            DetectorConfig::default(),
            [&baseline, &baseline, &baseline, &baseline],
        );
        // d2 above baseline scores > 0; v above baseline scores 0.
        let (a, _) = det.observe(&fv([Some(100.0), Some(500.0), Some(100.0), Some(500.0)]));
        assert!(a.d2.unwrap() > 0.0);
        assert_eq!(a.v, 0.0);

        // Fresh detector: below-median processing time scores 0.
        let mut det = ReferenceDetector::with_baseline(
            DetectorConfig::default(),
            [&baseline, &baseline, &baseline, &baseline],
        );
        let (a, _) = det.observe(&fv([Some(1.0), Some(1.0), Some(1.0), Some(100.0)]));
        assert_eq!(a.d1, Some(0.0));
        assert_eq!(a.d2, Some(0.0));
    }

    #[test]
    fn absent_features_yield_absent_scores_and_zero_labels() {
        let baseline: Vec<f64> = (0..100).map(|i| 95.0 + (i % 11) as f64).collect();
        let mut det = ReferenceDetector::with_baseline(
            DetectorConfig::default(),
            [&baseline, &baseline, &baseline, &baseline],
        );
        let (a, y) = det.observe(&fv([None, None, None, Some(0.0)]));
        assert_eq!(a.d1, None);
        assert_eq!(a.d2, None);
        assert!(!y.d1 && !y.d2 && !y.d3);
        // v = 0 is scored normally; a full collapse is 8 robust deviations
        // here, landing above 0.5 on the very first bin.
        assert!(a.v > 0.5, "zero volume must score high, got {}", a.v);
        assert!(y.v);
    }

    #[test]
    fn anomalous_bins_do_not_contaminate_the_baseline() {
        let baseline: Vec<f64> = (0..100).map(|i| 95.0 + (i % 11) as f64).collect();
        let mut det = ReferenceDetector::with_baseline(
            DetectorConfig::default(),
            [&baseline, &baseline, &baseline, &baseline],
        );
        let before = det.baselines[Feature::V.index()].baseline.len();
        det.observe(&fv([Some(100.0), Some(100.0), Some(100.0), Some(0.0)]));
        let after = det.baselines[Feature::V.index()].baseline.len();
        assert_eq!(before, after);

        // The trend term keeps the label alive for a few bins after the
        // collapse; once it decays, normal bins feed the baseline again.
        let normal = fv([Some(100.0), Some(100.0), Some(100.0), Some(100.0)]);
        let mut grew = false;
        for _ in 0..12 {
            det.observe(&normal);
            if det.baselines[Feature::V.index()].baseline.len() > after {
                grew = true;
                break;
            }
        }
        assert!(grew, "baseline updates must resume after the trend decays");
    }

    #[test]
    fn sustained_deviation_outscores_its_first_bin() {
        let baseline: Vec<f64> = (0..100).map(|i| 95.0 + (i % 11) as f64).collect();
        let mut det = ReferenceDetector::with_baseline(
            DetectorConfig::default(),
            [&baseline, &baseline, &baseline, &baseline],
        );
        let x = fv([Some(100.0), Some(100.0), Some(100.0), Some(40.0)]);
        let (first, _) = det.observe(&x);
        let mut last = first;
        for _ in 0..15 {
            (last, _) = det.observe(&x);
        }
        assert!(last.v > first.v);
    }

    #[test]
    fn score_record_wire_format_round_trips() {
        let line = r#"{"tau_ms":3000,"a":{"d1":0.0,"d2":0.91,"d3":null,"v":0.33},"y":{"d1":0,"d2":1,"d3":0,"v":1}}"#;
        let rec: ScoreRecord = serde_json::from_str(line).unwrap();
        assert!(rec.y.d2 && !rec.y.d1);
        assert_eq!(serde_json::to_string(&rec).unwrap(), line);
    }
}
