//! Resampling of the irregular settled-payment stream into a regular
//! multivariate series.
//!
//! Payments are assigned to half-open bins `[alpha + (k-1)*eta, alpha + k*eta)`
//! by settlement timestamp. Each emitted observation carries the bin's
//! representative timestamp `tau = alpha + (k-1)*eta`, the component-wise
//! mean or median of the processing times of the payments inside it, and
//! the settled volume `v`. Empty bins are emitted too (`v = 0`, absent
//! processing times): a volume collapse is exactly the signal the detector
//! must see.
//!
//! Observation JSONL, the detector's input format:
//!
//! ```text
//! {"tau_ms": 3000, "d1": 40.0, "d2": 612.5, "d3": 50.0, "v": 97}
//! ```

use crate::correlator::SettledPayment;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Aggregation function applied per bin and per component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggFn {
    Mean,
    /// Default: robust to a single slow transaction dominating a bin at
    /// desk-scale volumes. Even counts average the two middle values.
    Median,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AggregationConfig {
    /// Sampling rate: bin width in milliseconds.
    pub eta_ms: i64,
    /// Start timestamp; must not exceed the first settlement.
    pub alpha_ms: i64,
    /// End of the observation horizon for batch runs; absent in streaming
    /// mode. When set, the series is exactly `ceil((omega - alpha) / eta)`
    /// bins: trailing empty bins are padded up to it and nothing beyond it
    /// is emitted, so a truncated trace cannot masquerade as a volume
    /// collapse in its final bins.
    pub omega_ms: Option<i64>,
    pub agg_fn: AggFn,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        Self {
            eta_ms: 1_000,
            alpha_ms: 0,
            omega_ms: None,
            agg_fn: AggFn::Median,
        }
    }
}

impl AggregationConfig {
    pub fn validate(&self) -> Result<(), AggError> {
        if self.eta_ms <= 0 {
            return Err(AggError::InvalidConfig("eta_ms must be > 0"));
        }
        if let Some(omega) = self.omega_ms {
            if omega < self.alpha_ms {
                return Err(AggError::InvalidConfig("omega_ms must be >= alpha_ms"));
            }
        }
        Ok(())
    }

    /// End of bin `k`'s half-open interval.
    fn bin_end(&self, k: u64) -> i64 {
        self.alpha_ms + (k as i64) * self.eta_ms
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AggError {
    #[error("invalid aggregation config: {0}")]
    InvalidConfig(&'static str),
    #[error("settled_ms {settled_ms} precedes alpha {alpha_ms}")]
    OutOfRange { settled_ms: i64, alpha_ms: i64 },
    #[error("bin_count requires omega; unsupported in streaming mode")]
    StreamingBinCount,
}

/// One bin of the resampled series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedObservation {
    pub tau_ms: i64,
    pub d1: Option<f64>,
    pub d2: Option<f64>,
    pub d3: Option<f64>,
    /// Number of payments settled inside the bin.
    pub v: u64,
}

impl AggregatedObservation {
    fn empty(tau_ms: i64) -> Self {
        Self {
            tau_ms,
            d1: None,
            d2: None,
            d3: None,
            v: 0,
        }
    }

    /// The aggregated processing-time triple; present iff `v > 0`.
    pub fn p_tilde(&self) -> Option<[f64; 3]> {
        match (self.d1, self.d2, self.d3) {
            (Some(a), Some(b), Some(c)) => Some([a, b, c]),
            _ => None,
        }
    }
}

/// 1-based index of the bin containing `settled_ms`.
pub fn bin_index(settled_ms: i64, cfg: &AggregationConfig) -> Result<u64, AggError> {
    if settled_ms < cfg.alpha_ms {
        return Err(AggError::OutOfRange {
            settled_ms,
            alpha_ms: cfg.alpha_ms,
        });
    }
    Ok(((settled_ms - cfg.alpha_ms) / cfg.eta_ms) as u64 + 1)
}

/// Number of bins covering `[alpha, omega)`; requires omega.
pub fn bin_count(cfg: &AggregationConfig) -> Result<u64, AggError> {
    let omega = cfg.omega_ms.ok_or(AggError::StreamingBinCount)?;
    let span = omega - cfg.alpha_ms;
    Ok(((span + cfg.eta_ms - 1) / cfg.eta_ms) as u64)
}

/// Aggregates the payments of one bin into an observation at `tau_ms`.
pub fn aggregate(deltas: &[[i64; 3]], agg_fn: AggFn, tau_ms: i64) -> AggregatedObservation {
    if deltas.is_empty() {
        return AggregatedObservation::empty(tau_ms);
    }
    let mut p = [0.0f64; 3];
    for (i, component) in p.iter_mut().enumerate() {
        let mut values: Vec<i64> = deltas.iter().map(|d| d[i]).collect();
        *component = match agg_fn {
            AggFn::Mean => values.iter().map(|&x| x as f64).sum::<f64>() / values.len() as f64,
            AggFn::Median => {
                values.sort_unstable();
                let n = values.len();
                if n % 2 == 1 {
                    values[n / 2] as f64
                } else {
                    (values[n / 2 - 1] as f64 + values[n / 2] as f64) / 2.0
                }
            }
        };
    }
    AggregatedObservation {
        tau_ms,
        d1: Some(p[0]),
        d2: Some(p[1]),
        d3: Some(p[2]),
        v: deltas.len() as u64,
    }
}

/// Streaming binner: accepts payments in non-decreasing settlement order
/// and emits closed bins exactly once, in index order, gap-filling empty
/// bins in between.
#[derive(Debug)]
pub struct Aggregator {
    cfg: AggregationConfig,
    /// Buffered deltas per bin index, only for bins not yet emitted.
    open: BTreeMap<u64, Vec<[i64; 3]>>,
    next_to_emit: u64,
    accepted: u64,
}

impl Aggregator {
    pub fn new(cfg: AggregationConfig) -> Result<Self, AggError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            open: BTreeMap::new(),
            next_to_emit: 1,
            accepted: 0,
        })
    }

    pub fn config(&self) -> &AggregationConfig {
        &self.cfg
    }

    /// Total payments accepted so far; the sum of emitted `v` equals this
    /// once every bin is closed.
    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    /// Buffers one payment. Payments for already-emitted bins are rejected;
    /// the pipeline's watermark (correlator clock minus eviction timeout)
    /// guarantees this cannot happen for well-formed streams.
    pub fn push(&mut self, payment: &SettledPayment) -> Result<(), AggError> {
        let k = bin_index(payment.settled_ms, &self.cfg)?;
        if k < self.next_to_emit {
            return Err(AggError::OutOfRange {
                settled_ms: payment.settled_ms,
                alpha_ms: self.cfg.bin_end(self.next_to_emit - 1),
            });
        }
        self.open.entry(k).or_default().push(payment.deltas());
        self.accepted += 1;
        Ok(())
    }

    /// Emits, in index order, every bin whose interval end is at or before
    /// `now_ms`, including empty bins. Calling twice with the same clock
    /// emits nothing the second time. Bins past a configured omega are
    /// never emitted.
    pub fn close_up_to(&mut self, now_ms: i64) -> Vec<AggregatedObservation> {
        let mut out = Vec::new();
        while self.cfg.bin_end(self.next_to_emit) <= now_ms && self.within_horizon() {
            out.push(self.emit_next());
        }
        out
    }

    /// Flushes the remaining series: gap-filling up to the last non-empty
    /// bin in streaming mode, or exactly up to `ceil((omega - alpha)/eta)`
    /// bins when omega is configured.
    pub fn finish(&mut self) -> Vec<AggregatedObservation> {
        let last = match bin_count(&self.cfg) {
            Ok(m) => m,
            Err(_) => self.open.keys().next_back().copied().unwrap_or(0),
        };
        let mut out = Vec::new();
        while self.next_to_emit <= last {
            out.push(self.emit_next());
        }
        out
    }

    fn within_horizon(&self) -> bool {
        match bin_count(&self.cfg) {
            Ok(m) => self.next_to_emit <= m,
            Err(_) => true,
        }
    }

    fn emit_next(&mut self) -> AggregatedObservation {
        let k = self.next_to_emit;
        self.next_to_emit += 1;
        let tau = self.cfg.alpha_ms + (k as i64 - 1) * self.cfg.eta_ms;
        match self.open.remove(&k) {
            Some(deltas) => aggregate(&deltas, self.cfg.agg_fn, tau),
            None => AggregatedObservation::empty(tau),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(eta: i64, alpha: i64, omega: Option<i64>) -> AggregationConfig {
        AggregationConfig {
            eta_ms: eta,
            alpha_ms: alpha,
            omega_ms: omega,
            agg_fn: AggFn::Median,
        }
    }

    fn payment(tx: &str, settled: i64, d: [i64; 3]) -> SettledPayment {
        SettledPayment {
            tx_id: tx.into(),
            settled_ms: settled,
            d1_ms: d[0],
            d2_ms: d[1],
            d3_ms: d[2],
        }
    }

    #[test]
    fn bin_index_edges() {
        let c = cfg(1000, 0, None);
        assert_eq!(bin_index(0, &c).unwrap(), 1); // left edge inclusive
        assert_eq!(bin_index(999, &c).unwrap(), 1); // right edge exclusive
        assert_eq!(bin_index(1000, &c).unwrap(), 2);
    }

    #[test]
    fn bin_index_with_offset_alpha() {
        // Bins: [500,750) -> 1, [750,1000) -> 2, [1000,1250) -> 3.
        let c = cfg(250, 500, None);
        assert_eq!(bin_index(1240, &c).unwrap(), 3);
        assert!(matches!(
            bin_index(499, &c),
            Err(AggError::OutOfRange { .. })
        ));
    }

    #[test]
    fn bin_count_is_the_ceiling() {
        assert_eq!(bin_count(&cfg(3000, 0, Some(10_000))).unwrap(), 4);
        assert_eq!(bin_count(&cfg(3000, 0, Some(9_000))).unwrap(), 3);
        assert_eq!(bin_count(&cfg(1000, 0, Some(1))).unwrap(), 1);
        assert!(matches!(
            bin_count(&cfg(1000, 0, None)),
            Err(AggError::StreamingBinCount)
        ));
    }

    #[test]
    fn mean_and_median_of_two_payments_coincide() {
        let deltas = [[10, 100, 10], [20, 300, 30]];
        for agg in [AggFn::Mean, AggFn::Median] {
            let obs = aggregate(&deltas, agg, 0);
            assert_eq!(obs.p_tilde(), Some([15.0, 200.0, 20.0]));
            assert_eq!(obs.v, 2);
        }
    }

    #[test]
    fn empty_bin_has_no_p_tilde() {
        let obs = aggregate(&[], AggFn::Median, 5_000);
        assert_eq!(obs.v, 0);
        assert_eq!(obs.p_tilde(), None);
        assert_eq!(obs.tau_ms, 5_000);
    }

    #[test]
    fn median_of_odd_and_even_counts() {
        let obs = aggregate(&[[1, 0, 0], [5, 0, 0], [100, 0, 0]], AggFn::Median, 0);
        assert_eq!(obs.d1, Some(5.0));
        let obs = aggregate(&[[1, 0, 0], [2, 0, 0], [3, 0, 0], [10, 0, 0]], AggFn::Median, 0);
        assert_eq!(obs.d1, Some(2.5));
    }

    #[test]
    fn close_gap_fills_empty_bins_exactly_once() {
        let mut agg = Aggregator::new(cfg(1000, 0, None)).unwrap();
        agg.push(&payment("A", 100, [1, 2, 3])).unwrap();
        agg.push(&payment("B", 200, [3, 2, 1])).unwrap();

        let bins = agg.close_up_to(3000);
        assert_eq!(bins.len(), 3);
        assert_eq!(
            bins.iter().map(|b| b.v).collect::<Vec<_>>(),
            vec![2, 0, 0]
        );
        assert_eq!(
            bins.iter().map(|b| b.tau_ms).collect::<Vec<_>>(),
            vec![0, 1000, 2000]
        );

        // Same clock again: nothing new.
        assert!(agg.close_up_to(3000).is_empty());
    }

    #[test]
    fn bin_not_closed_before_its_interval_ends() {
        let mut agg = Aggregator::new(cfg(1000, 0, None)).unwrap();
        agg.push(&payment("A", 100, [1, 2, 3])).unwrap();
        assert!(agg.close_up_to(999).is_empty());
        assert_eq!(agg.close_up_to(1000).len(), 1);
    }

    #[test]
    fn finish_pads_to_omega() {
        let mut agg = Aggregator::new(cfg(1000, 0, Some(5_000))).unwrap();
        agg.push(&payment("A", 1500, [1, 2, 3])).unwrap();
        let bins = agg.finish();
        assert_eq!(bins.len(), 5);
        assert_eq!(bins[1].v, 1);
        assert!(bins[4].p_tilde().is_none());
    }

    #[test]
    fn observation_wire_format_round_trips() {
        let line = r#"{"tau_ms":3000,"d1":40.0,"d2":612.5,"d3":50.0,"v":97}"#;
        let obs: AggregatedObservation = serde_json::from_str(line).unwrap();
        assert_eq!(serde_json::to_string(&obs).unwrap(), line);
        let empty = r#"{"tau_ms":4000,"d1":null,"d2":null,"d3":null,"v":0}"#;
        let obs: AggregatedObservation = serde_json::from_str(empty).unwrap();
        assert_eq!(serde_json::to_string(&obs).unwrap(), empty);
    }
}
