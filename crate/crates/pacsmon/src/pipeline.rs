//! Composition of correlator, aggregator, detector and explainer into one
//! streaming pass.
//!
//! [`StreamPipeline`] is the incremental core: push validated trace events
//! in, drain settled payments, closed bins, scores and verdicts out. Bin
//! closure is driven by a watermark trailing the correlator clock by the
//! eviction timeout, which guarantees no settled payment can ever arrive
//! for an already-closed bin.
//!
//! On top of it sit batch drivers for in-memory runs and JSONL files, plus
//! the four stage functions (`correlate_stage`, `aggregate_stage`,
//! `detect_stage`, `explain_stage`) that run the same logic file-to-file.
//! Running the stages separately over intermediate files yields output
//! byte-identical to the fused pipeline.
//!
//! Every run produces a [`RunSummary`]: counts, notice tallies, a verdict
//! histogram, per-feature score maxima per injection window when ground
//! truth is supplied, and the maximum observed per-bin processing time
//! against the real-time budget.

use crate::aggregator::{AggregatedObservation, AggregationConfig, Aggregator};
use crate::correlator::{Correlator, CorrelatorConfig, Notice, NoticeKind, SettledPayment};
use crate::detector::{
    AnomalyDetector, DetectorConfig, Feature, FeatureVector, LabelVector, ReferenceDetector,
    ScoreRecord, ScoreVector,
};
use crate::explainer::{explain, InconsistentScore, Localization, Severity, Verdict};
use crate::model::{validate_event, EventViolation, TraceEvent};
use crate::simulator::GroundTruth;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::time::Instant;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid pipeline config: {0}")]
    Config(String),
    #[error(transparent)]
    Event(#[from] EventViolation),
    #[error(transparent)]
    Agg(#[from] crate::aggregator::AggError),
    #[error(transparent)]
    Inconsistent(#[from] InconsistentScore),
    #[error("line {line}: {source}")]
    Parse {
        line: u64,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which record streams a run materializes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct EmitFlags {
    pub payments: bool,
    pub observations: bool,
    pub scores: bool,
    pub verdicts: bool,
}

impl Default for EmitFlags {
    fn default() -> Self {
        Self {
            payments: false,
            observations: false,
            scores: true,
            verdicts: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub correlator: CorrelatorConfig,
    pub aggregation: AggregationConfig,
    pub detector: DetectorConfig,
    pub emit: EmitFlags,
    /// When set (the default), the bin grid is anchored at the first valid
    /// event's timestamp instead of `aggregation.alpha_ms`. Keeps
    /// epoch-scale timestamps from generating billions of leading empty
    /// bins. Scenario replays pin alpha explicitly instead.
    pub anchor_alpha_to_first_event: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            correlator: CorrelatorConfig::default(),
            aggregation: AggregationConfig::default(),
            detector: DetectorConfig::default(),
            emit: EmitFlags::default(),
            anchor_alpha_to_first_event: true,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.aggregation.validate()?;
        self.detector.validate().map_err(PipelineError::Config)?;
        if self.detector.latency_budget_ms >= self.aggregation.eta_ms {
            return Err(PipelineError::Config(format!(
                "latency_budget_ms {} must stay below eta_ms {}",
                self.detector.latency_budget_ms, self.aggregation.eta_ms
            )));
        }
        if self.correlator.eviction_timeout_ms <= 0 || self.correlator.max_pending == 0 {
            return Err(PipelineError::Config(
                "correlator needs eviction_timeout_ms > 0 and max_pending > 0".into(),
            ));
        }
        Ok(())
    }
}

/// One closed bin with everything derived from it.
#[derive(Debug, Clone)]
pub struct BinOutput {
    pub observation: AggregatedObservation,
    pub scores: ScoreRecord,
    pub verdict: Option<Verdict>,
}

/// Records drained from the pipeline after one or more pushes.
#[derive(Debug, Default)]
pub struct StepOutputs {
    pub payments: Vec<SettledPayment>,
    pub notices: Vec<Notice>,
    pub bins: Vec<BinOutput>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MaxScores {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub v: f64,
}

impl MaxScores {
    pub fn update(&mut self, scores: &ScoreVector) {
        if let Some(s) = scores.d1 {
            self.d1 = self.d1.max(s);
        }
        if let Some(s) = scores.d2 {
            self.d2 = self.d2.max(s);
        }
        if let Some(s) = scores.d3 {
            self.d3 = self.d3.max(s);
        }
        self.v = self.v.max(scores.v);
    }

    pub fn get(&self, feature: Feature) -> f64 {
        match feature {
            Feature::D1 => self.d1,
            Feature::D2 => self.d2,
            Feature::D3 => self.d3,
            Feature::V => self.v,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoticeCounts {
    pub duplicate_leg: u64,
    pub negative_interval: u64,
    pub evicted: u64,
    pub capacity_evicted: u64,
}

impl NoticeCounts {
    fn add(&mut self, kind: NoticeKind) {
        match kind {
            NoticeKind::DuplicateLeg => self.duplicate_leg += 1,
            NoticeKind::NegativeInterval => self.negative_interval += 1,
            NoticeKind::Evicted => self.evicted += 1,
            NoticeKind::CapacityEvicted => self.capacity_evicted += 1,
        }
    }
}

/// Per-injection-window digest: the scenario-level view of what the
/// detector and explainer said while the disturbance was active. A bin
/// belongs to a window when its whole interval lies inside it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowReport {
    pub label: String,
    pub start_ms: i64,
    pub end_ms: i64,
    pub targets: Vec<Feature>,
    pub bins: u64,
    pub max_scores: MaxScores,
    /// Features labeled anomalous in at least one in-window bin.
    pub labeled_features: Vec<Feature>,
    pub peak_severity: Severity,
    /// Most frequent localization over anomalous in-window bins.
    pub modal_localization: Option<Localization>,
    pub business_impact: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct VerdictStats {
    pub total: u64,
    pub by_severity: BTreeMap<String, u64>,
    pub by_localization: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct RunSummary {
    pub events: u64,
    pub invalid_events: u64,
    pub settled: u64,
    pub notices: NoticeCounts,
    pub bins: u64,
    pub anomalous_bins: u64,
    pub verdicts: VerdictStats,
    pub max_scores: MaxScores,
    pub windows: Vec<WindowReport>,
    pub resolved_alpha_ms: i64,
    /// Maximum observed correlate+aggregate+detect+explain cost per bin.
    pub max_bin_processing_us: u64,
    pub latency_budget_ms: i64,
}

#[derive(Debug, Default)]
struct WindowTally {
    bins: u64,
    max_scores: MaxScores,
    labeled: [bool; 4],
    peak_severity: Severity,
    impact: bool,
    localization_counts: BTreeMap<&'static str, u64>,
}

/// Incremental pipeline: correlate, aggregate, detect, explain.
pub struct StreamPipeline {
    cfg: PipelineConfig,
    correlator: Correlator,
    aggregator: Option<Aggregator>,
    detector: Box<dyn AnomalyDetector + Send>,
    outputs: StepOutputs,
    summary: RunSummary,
    ground_truth: Option<GroundTruth>,
    window_tallies: Vec<WindowTally>,
    pending_ns: u128,
    finished: bool,
}

impl std::fmt::Debug for StreamPipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StreamPipeline")
            .field("events", &self.summary.events)
            .field("bins", &self.summary.bins)
            .finish()
    }
}

impl StreamPipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self, PipelineError> {
        let detector = Box::new(ReferenceDetector::new(cfg.detector.clone()));
        Self::with_detector(cfg, detector)
    }

    /// Runs the same pipeline behind a different scoring algorithm.
    pub fn with_detector(
        cfg: PipelineConfig,
        detector: Box<dyn AnomalyDetector + Send>,
    ) -> Result<Self, PipelineError> {
        cfg.validate()?;
        let aggregator = if cfg.anchor_alpha_to_first_event {
            None
        } else {
            Some(Aggregator::new(cfg.aggregation.clone())?)
        };
        let summary = RunSummary {
            resolved_alpha_ms: cfg.aggregation.alpha_ms,
            latency_budget_ms: cfg.detector.latency_budget_ms,
            ..RunSummary::default()
        };
        Ok(Self {
            correlator: Correlator::new(cfg.correlator.clone()),
            aggregator,
            detector,
            outputs: StepOutputs::default(),
            summary,
            ground_truth: None,
            window_tallies: Vec::new(),
            pending_ns: 0,
            cfg,
            finished: false,
        })
    }

    /// Attaches injection ground truth so the summary carries per-window
    /// reports (the scenario score table).
    pub fn set_ground_truth(&mut self, gt: GroundTruth) {
        self.window_tallies = gt.windows.iter().map(|_| WindowTally::default()).collect();
        self.ground_truth = Some(gt);
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    /// Feeds one event through validation, correlation, aggregation,
    /// detection and explanation. Invalid events are counted and reported
    /// as errors but leave the pipeline ready for the next event.
    pub fn push_event(&mut self, event: &TraceEvent) -> Result<(), PipelineError> {
        debug_assert!(!self.finished, "push after finish");
        let started = Instant::now();
        self.summary.events += 1;
        if let Err(violation) = validate_event(event) {
            self.summary.invalid_events += 1;
            return Err(violation.into());
        }
        if self.aggregator.is_none() {
            let mut agg_cfg = self.cfg.aggregation.clone();
            agg_cfg.alpha_ms = event.ts_ms;
            self.summary.resolved_alpha_ms = agg_cfg.alpha_ms;
            self.aggregator = Some(Aggregator::new(agg_cfg)?);
        }

        let (payment, notices) = self.correlator.ingest(event);
        for n in &notices {
            self.summary.notices.add(n.kind);
        }
        self.outputs.notices.extend(notices);

        if let Some(payment) = payment {
            self.summary.settled += 1;
            self.aggregator
                .as_mut()
                .expect("aggregator initialized above")
                .push(&payment)?;
            self.outputs.payments.push(payment);
        }

        for n in self.correlator.advance_clock(event.ts_ms) {
            self.summary.notices.add(n.kind);
            self.outputs.notices.push(n);
        }

        let watermark = self
            .correlator
            .clock_ms()
            .saturating_sub(self.cfg.correlator.eviction_timeout_ms);
        let closed = self
            .aggregator
            .as_mut()
            .expect("aggregator initialized above")
            .close_up_to(watermark);
        self.pending_ns += started.elapsed().as_nanos();
        self.process_bins(closed)?;
        Ok(())
    }

    /// Evicts every pending transaction and flushes all remaining bins.
    pub fn finish(&mut self) -> Result<(), PipelineError> {
        if self.finished {
            return Ok(());
        }
        self.finished = true;
        let started = Instant::now();
        for n in self.correlator.drain() {
            self.summary.notices.add(n.kind);
            self.outputs.notices.push(n);
        }
        let closed = match self.aggregator.as_mut() {
            Some(agg) => agg.finish(),
            None => Vec::new(),
        };
        self.pending_ns += started.elapsed().as_nanos();
        self.process_bins(closed)?;
        if let Some(gt) = self.ground_truth.take() {
            self.summary.windows = gt
                .windows
                .iter()
                .zip(self.window_tallies.drain(..))
                .map(|(w, tally)| WindowReport {
                    label: w.label.clone(),
                    start_ms: w.start_ms,
                    end_ms: w.end_ms,
                    targets: w.targets.clone(),
                    bins: tally.bins,
                    max_scores: tally.max_scores,
                    labeled_features: Feature::ALL
                        .into_iter()
                        .filter(|f| tally.labeled[f.index()])
                        .collect(),
                    peak_severity: tally.peak_severity,
                    modal_localization: modal(&tally.localization_counts),
                    business_impact: tally.impact,
                })
                .collect();
        }
        Ok(())
    }

    /// Takes everything emitted since the last drain.
    pub fn drain(&mut self) -> StepOutputs {
        std::mem::take(&mut self.outputs)
    }

    pub fn summary(&self) -> &RunSummary {
        &self.summary
    }

    pub fn into_summary(self) -> RunSummary {
        self.summary
    }

    fn process_bins(&mut self, bins: Vec<AggregatedObservation>) -> Result<(), PipelineError> {
        if bins.is_empty() {
            return Ok(());
        }
        let shared_ns = self.pending_ns / bins.len() as u128;
        self.pending_ns = 0;
        for observation in bins {
            let started = Instant::now();
            let fv = FeatureVector::from(&observation);
            let (scores, labels) = self.detector.observe(&fv);
            let verdict = if labels.any() {
                Some(explain(&scores, &labels, observation.tau_ms)?)
            } else {
                None
            };
            let bin_ns = shared_ns + started.elapsed().as_nanos();
            let bin_us = (bin_ns / 1_000) as u64;
            self.summary.max_bin_processing_us = self.summary.max_bin_processing_us.max(bin_us);

            self.account(&observation, &scores, &labels, verdict.as_ref());
            self.outputs.bins.push(BinOutput {
                scores: ScoreRecord {
                    tau_ms: observation.tau_ms,
                    a: scores,
                    y: labels,
                },
                verdict,
                observation,
            });
        }
        Ok(())
    }

    fn account(
        &mut self,
        observation: &AggregatedObservation,
        scores: &ScoreVector,
        labels: &LabelVector,
        verdict: Option<&Verdict>,
    ) {
        self.summary.bins += 1;
        self.summary.max_scores.update(scores);
        if labels.any() {
            self.summary.anomalous_bins += 1;
        }
        if let Some(v) = verdict {
            self.summary.verdicts.total += 1;
            *self
                .summary
                .verdicts
                .by_severity
                .entry(severity_name(v.severity).to_string())
                .or_default() += 1;
            if let Some(loc) = v.localization {
                *self
                    .summary
                    .verdicts
                    .by_localization
                    .entry(localization_name(loc).to_string())
                    .or_default() += 1;
            }
        }

        let eta = self.cfg.aggregation.eta_ms;
        if let Some(gt) = &self.ground_truth {
            for (w, tally) in gt.windows.iter().zip(self.window_tallies.iter_mut()) {
                let tau = observation.tau_ms;
                if tau < w.start_ms || tau + eta > w.end_ms {
                    continue;
                }
                tally.bins += 1;
                tally.max_scores.update(scores);
                for f in Feature::ALL {
                    if labels.get(f) {
                        tally.labeled[f.index()] = true;
                    }
                }
                if let Some(v) = verdict {
                    tally.peak_severity = tally.peak_severity.max(v.severity);
                    tally.impact |= v.business_impact;
                    if let Some(loc) = v.localization {
                        *tally
                            .localization_counts
                            .entry(localization_name(loc))
                            .or_default() += 1;
                    }
                }
            }
        }
    }
}

fn modal(counts: &BTreeMap<&'static str, u64>) -> Option<Localization> {
    counts
        .iter()
        .max_by_key(|(name, count)| (*count, std::cmp::Reverse(*name)))
        .map(|(name, _)| match *name {
            "internal" => Localization::Internal,
            "external" => Localization::External,
            "mixed" => Localization::Mixed,
            _ => Localization::Indeterminate,
        })
}

fn severity_name(s: Severity) -> &'static str {
    match s {
        Severity::None => "none",
        Severity::PerformanceDegradation => "performance_degradation",
        Severity::Minor => "minor",
        Severity::Major => "major",
        Severity::Critical => "critical",
    }
}

fn localization_name(l: Localization) -> &'static str {
    match l {
        Localization::Internal => "internal",
        Localization::External => "external",
        Localization::Mixed => "mixed",
        Localization::Indeterminate => "indeterminate",
    }
}

/// Full in-memory run result.
#[derive(Debug, Default)]
pub struct RunResult {
    pub payments: Vec<SettledPayment>,
    pub observations: Vec<AggregatedObservation>,
    pub scores: Vec<ScoreRecord>,
    pub verdicts: Vec<Verdict>,
    pub summary: RunSummary,
}

/// Runs a whole event slice through the pipeline in memory, honoring the
/// emit flags for which record streams are retained.
pub fn run_events(
    events: &[TraceEvent],
    cfg: PipelineConfig,
    ground_truth: Option<&GroundTruth>,
) -> Result<RunResult, PipelineError> {
    let emit = cfg.emit;
    let mut pipeline = StreamPipeline::new(cfg)?;
    if let Some(gt) = ground_truth {
        pipeline.set_ground_truth(gt.clone());
    }
    let mut result = RunResult::default();
    let absorb = |outputs: StepOutputs, result: &mut RunResult| {
        if emit.payments {
            result.payments.extend(outputs.payments);
        }
        for bin in outputs.bins {
            if emit.observations {
                result.observations.push(bin.observation);
            }
            if emit.scores {
                result.scores.push(bin.scores);
            }
            if emit.verdicts {
                result.verdicts.extend(bin.verdict);
            }
        }
    };
    for event in events {
        match pipeline.push_event(event) {
            Ok(()) | Err(PipelineError::Event(_)) => {}
            Err(other) => return Err(other),
        }
        absorb(pipeline.drain(), &mut result);
    }
    pipeline.finish()?;
    absorb(pipeline.drain(), &mut result);
    result.summary = pipeline.into_summary();
    Ok(result)
}

/// Sinks for the streaming file driver; any subset may be attached.
#[derive(Default)]
pub struct RunSinks<'a> {
    pub payments: Option<&'a mut dyn Write>,
    pub observations: Option<&'a mut dyn Write>,
    pub scores: Option<&'a mut dyn Write>,
    pub verdicts: Option<&'a mut dyn Write>,
}

fn write_line<T: Serialize>(sink: &mut Option<&mut dyn Write>, record: &T) -> Result<(), PipelineError> {
    if let Some(w) = sink.as_deref_mut() {
        serde_json::to_writer(&mut *w, record).map_err(std::io::Error::other)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Streams a JSONL trace through the pipeline, writing the selected record
/// streams line by line. Malformed JSON is fatal with its line number;
/// events failing validation are counted and skipped.
pub fn run_trace_reader<R: BufRead>(
    reader: R,
    cfg: PipelineConfig,
    ground_truth: Option<&GroundTruth>,
    sinks: &mut RunSinks<'_>,
) -> Result<RunSummary, PipelineError> {
    let mut pipeline = StreamPipeline::new(cfg)?;
    if let Some(gt) = ground_truth {
        pipeline.set_ground_truth(gt.clone());
    }
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: TraceEvent =
            serde_json::from_str(&line).map_err(|source| PipelineError::Parse {
                line: i as u64 + 1,
                source,
            })?;
        match pipeline.push_event(&event) {
            Ok(()) | Err(PipelineError::Event(_)) => {}
            Err(other) => return Err(other),
        }
        flush_outputs(&mut pipeline, sinks)?;
    }
    pipeline.finish()?;
    flush_outputs(&mut pipeline, sinks)?;
    Ok(pipeline.into_summary())
}

fn flush_outputs(
    pipeline: &mut StreamPipeline,
    sinks: &mut RunSinks<'_>,
) -> Result<(), PipelineError> {
    let outputs = pipeline.drain();
    for p in &outputs.payments {
        write_line(&mut sinks.payments, p)?;
    }
    for bin in &outputs.bins {
        write_line(&mut sinks.observations, &bin.observation)?;
        write_line(&mut sinks.scores, &bin.scores)?;
        if let Some(v) = &bin.verdict {
            write_line(&mut sinks.verdicts, v)?;
        }
    }
    Ok(())
}

fn parse_line<T: serde::de::DeserializeOwned>(
    line: &str,
    line_no: u64,
) -> Result<T, PipelineError> {
    serde_json::from_str(line).map_err(|source| PipelineError::Parse {
        line: line_no,
        source,
    })
}

/// Stage 1 file-to-file: trace events in, settled payments out.
pub fn correlate_stage<R: BufRead, W: Write>(
    reader: R,
    mut out: W,
    cfg: &CorrelatorConfig,
) -> Result<(), PipelineError> {
    let mut correlator = Correlator::new(cfg.clone());
    let mut line_no = 0u64;
    for line in reader.lines() {
        line_no += 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: TraceEvent = parse_line(&line, line_no)?;
        if validate_event(&event).is_err() {
            continue;
        }
        let (payment, _) = correlator.ingest(&event);
        correlator.advance_clock(event.ts_ms);
        if let Some(p) = payment {
            serde_json::to_writer(&mut out, &p).map_err(std::io::Error::other)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Stage 2 file-to-file: settled payments in, aggregated observations out.
/// Payments must arrive in non-decreasing settlement order, which is what
/// stage 1 produces for a timestamp-ordered trace.
pub fn aggregate_stage<R: BufRead, W: Write>(
    reader: R,
    mut out: W,
    cfg: &AggregationConfig,
) -> Result<(), PipelineError> {
    let mut aggregator = Aggregator::new(cfg.clone())?;
    let mut line_no = 0u64;
    for line in reader.lines() {
        line_no += 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let payment: SettledPayment = parse_line(&line, line_no)?;
        // Bins strictly before the payment's own bin can never fill again.
        for obs in aggregator.close_up_to(payment.settled_ms) {
            serde_json::to_writer(&mut out, &obs).map_err(std::io::Error::other)?;
            out.write_all(b"\n")?;
        }
        aggregator.push(&payment)?;
    }
    for obs in aggregator.finish() {
        serde_json::to_writer(&mut out, &obs).map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Stage 3 file-to-file: observations in, score records out.
pub fn detect_stage<R: BufRead, W: Write>(
    reader: R,
    mut out: W,
    cfg: &DetectorConfig,
) -> Result<(), PipelineError> {
    let mut detector = ReferenceDetector::new(cfg.clone());
    let mut line_no = 0u64;
    for line in reader.lines() {
        line_no += 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let obs: AggregatedObservation = parse_line(&line, line_no)?;
        let (a, y) = detector.observe(&FeatureVector::from(&obs));
        let record = ScoreRecord {
            tau_ms: obs.tau_ms,
            a,
            y,
        };
        serde_json::to_writer(&mut out, &record).map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Stage 4 file-to-file: score records in, verdicts for anomalous bins out.
pub fn explain_stage<R: BufRead, W: Write>(reader: R, mut out: W) -> Result<(), PipelineError> {
    let mut line_no = 0u64;
    for line in reader.lines() {
        line_no += 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ScoreRecord = parse_line(&line, line_no)?;
        if !record.y.any() {
            continue;
        }
        let verdict = explain(&record.a, &record.y, record.tau_ms)?;
        serde_json::to_writer(&mut out, &verdict).map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Counterparty, Direction, MessageKind};

    fn quiet_config() -> PipelineConfig {
        PipelineConfig {
            anchor_alpha_to_first_event: false,
            emit: EmitFlags {
                payments: true,
                observations: true,
                scores: true,
                verdicts: true,
            },
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn empty_input_yields_an_empty_summary() {
        let result = run_events(&[], quiet_config(), None).unwrap();
        assert_eq!(result.summary.bins, 0);
        assert_eq!(result.summary.verdicts.total, 0);
        assert_eq!(result.summary.events, 0);
        assert!(result.scores.is_empty());
    }

    #[test]
    fn invalid_events_are_counted_and_skipped() {
        let events = vec![TraceEvent::new(
            "A",
            MessageKind::Pacs002,
            Direction::InboundToCsm,
            100,
            Counterparty::Originator,
        )];
        let result = run_events(&events, quiet_config(), None).unwrap();
        assert_eq!(result.summary.events, 1);
        assert_eq!(result.summary.invalid_events, 1);
        assert_eq!(result.summary.settled, 0);
    }

    #[test]
    fn one_transaction_flows_through_to_a_bin() {
        let legs = [
            (MessageKind::Pacs008, Direction::InboundToCsm, Counterparty::Originator, 0i64),
            (MessageKind::Pacs008, Direction::OutboundFromCsm, Counterparty::Beneficiary, 40),
            (MessageKind::Pacs002, Direction::InboundToCsm, Counterparty::Beneficiary, 600),
            (MessageKind::Pacs002, Direction::OutboundFromCsm, Counterparty::Both, 650),
        ];
        let events: Vec<TraceEvent> = legs
            .iter()
            .map(|&(k, d, c, t)| TraceEvent::new("A", k, d, t, c))
            .collect();
        let result = run_events(&events, quiet_config(), None).unwrap();
        assert_eq!(result.summary.settled, 1);
        assert_eq!(result.payments.len(), 1);
        assert_eq!(result.summary.bins, 1);
        assert_eq!(result.observations[0].v, 1);
        assert_eq!(result.observations[0].p_tilde(), Some([40.0, 560.0, 50.0]));
        // A single warmup bin scores zero and produces no verdict.
        assert_eq!(result.scores[0].a.v, 0.0);
        assert!(result.verdicts.is_empty());
    }

    #[test]
    fn latency_budget_must_stay_below_eta() {
        let mut cfg = quiet_config();
        cfg.detector.latency_budget_ms = 1_000;
        assert!(matches!(
            StreamPipeline::new(cfg),
            Err(PipelineError::Config(_))
        ));
    }
}
