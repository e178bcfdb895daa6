//! Desk-scale monitoring toolkit for instant-payment clearing systems.
//!
//! A Clearing and Settlement Mechanism (CSM) sits between originator and
//! beneficiary banks and sees every pacs.008/pacs.002 exchange of a credit
//! transfer. This crate turns that message stream into a compact operational
//! state signal and interprets deviations from it:
//!
//! 1. [`correlator`] reconstructs transactions from raw trace events and
//!    emits per-payment processing times (d1, d2, d3) for the conditional,
//!    external-reply and settlement phases.
//! 2. [`aggregator`] resamples the irregular payment stream into a regular
//!    multivariate series of per-bin processing times plus settled volume.
//! 3. [`detector`] scores each bin per feature in `[0, 1]` against a rolling
//!    robust baseline and binarizes the scores with per-feature thresholds.
//! 4. [`explainer`] maps score/label patterns to a failure localization
//!    (internal vs. external to the CSM), an incident severity and a
//!    business-impact flag.
//! 5. [`simulator`] generates realistic traffic with controlled fault
//!    injection so the whole chain can be validated end to end.
//!
//! [`pipeline`] wires the stages together over JSONL record streams; the
//! `pacsmon` binary exposes simulate/detect/replay/report commands on top.

pub mod aggregator;
pub mod correlator;
pub mod detector;
pub mod explainer;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod simulator;

pub use aggregator::{AggFn, AggregatedObservation, Aggregator, AggregationConfig};
pub use correlator::{Correlator, CorrelatorConfig, Notice, NoticeKind, SettledPayment};
pub use detector::{
    binarize, AnomalyDetector, DetectorConfig, Feature, FeatureVector, LabelVector,
    ReferenceDetector, ScoreRecord, ScoreVector, Thresholds,
};
pub use explainer::{classify, explain, localize, Localization, Rule, Severity, Verdict};
pub use model::{
    validate_event, Counterparty, Direction, MessageKind, TraceEvent, TransactionOutcome,
};
pub use pipeline::{
    run_events, run_trace_reader, PipelineConfig, RunResult, RunSinks, RunSummary, StreamPipeline,
};
pub use simulator::{
    builtin_scenario, builtin_scenarios, builtin_scenarios_seeded, generate, GeneratedTrace,
    GroundTruth, InjectionWindow, ScenarioSpec, TrafficProfile,
};
