//! Rule-based interpretation of score/label patterns.
//!
//! The processing-time features map directly onto system components: d1 and
//! d3 are phases executed inside the CSM, d2 is the round trip to the
//! beneficiary side. That mapping carries the localization ruleset:
//!
//! * **L1** — d1 or d3 anomalous while d2 is quiet: internal components are
//!   slow while external communication is unaffected; internal origin.
//! * **L2** — d2 anomalous alone (d1 and d3 quiet): the CSM processes
//!   normally but external entities respond late; external origin.
//!
//! Patterns the rules do not cover map to `Mixed` (d2 together with
//! d1/d3) or `Indeterminate` (volume-only) instead of forcing a binary
//! answer.
//!
//! The classification ruleset grades incident severity:
//!
//! * **C1** — processing-time anomalies without a volume drop: performance
//!   degradation; scores at or above 0.75 carry a payment-timeout risk.
//! * **C2/C3/C4** — volume-drop anomalies graded by the volume score:
//!   `[0.25, 0.5)` minor, `[0.5, 0.75)` major, `>= 0.75` critical.
//!
//! Verdict JSONL (emitted only for bins with at least one anomalous label):
//!
//! ```text
//! {"tau_ms": 3000, "localization": "external", "severity": "minor",
//!  "impact": true, "timeout_risk": true, "rules": ["L2", "C2"],
//!  "a": {"d1": 0.0, "d2": 0.91, "d3": 0.0, "v": 0.33}}
//! ```

use crate::detector::{Feature, LabelVector, ScoreVector};
use serde::{Deserialize, Serialize};

/// Severity band edges used by rules C1-C4. These are rule constants, not
/// detector thresholds.
pub const BAND_MINOR: f64 = 0.25;
pub const BAND_MAJOR: f64 = 0.5;
pub const BAND_CRITICAL: f64 = 0.75;

/// Where the failure behind an anomaly most likely originates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Localization {
    /// Inside the CSM infrastructure (misconfiguration, hardware, core
    /// component degradation).
    Internal,
    /// Outside the CSM: participants or network connectivity.
    External,
    /// Internal and external signals at once; not covered by L1/L2.
    Mixed,
    /// Volume-only anomaly; the rules cannot attribute an origin.
    Indeterminate,
}

/// Incident severity, ordered from benign to catastrophic.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    #[default]
    None,
    PerformanceDegradation,
    Minor,
    Major,
    Critical,
}

impl Severity {
    /// Whether transactions are failing to settle, as opposed to slowing
    /// down within scheme limits.
    pub fn business_impact(self) -> bool {
        matches!(self, Severity::Minor | Severity::Major | Severity::Critical)
    }
}

/// Identifier of a fired explainer rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rule {
    L1,
    L2,
    C1,
    C2,
    C3,
    C4,
}

/// Explainer output for one bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub tau_ms: i64,
    /// Absent when no label fired (severity `None`).
    pub localization: Option<Localization>,
    pub severity: Severity,
    #[serde(rename = "impact")]
    pub business_impact: bool,
    pub timeout_risk: bool,
    #[serde(rename = "rules")]
    pub triggering_rules: Vec<Rule>,
    #[serde(rename = "a")]
    pub scores: ScoreVector,
}

/// A volume label that contradicts its own score band; only possible when
/// thresholds are misconfigured below the C2 band floor.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("inconsistent input: volume labeled anomalous with score {score} below the {BAND_MINOR} band floor")]
pub struct InconsistentScore {
    pub score: f64,
}

/// Applies ruleset L to a label vector. `None` when no label is set.
pub fn localize(y: &LabelVector) -> Option<Localization> {
    if !y.any() {
        return None;
    }
    let delta_internal = y.d1 || y.d3;
    Some(match (delta_internal, y.d2) {
        (true, false) => Localization::Internal,
        (false, true) => Localization::External,
        (true, true) => Localization::Mixed,
        (false, false) => Localization::Indeterminate,
    })
}

/// Applies ruleset C to a scored bin, grading severity and flagging
/// payment-timeout risk (any labeled processing time at or above the
/// critical band).
pub fn classify(a: &ScoreVector, y: &LabelVector) -> Result<(Severity, bool), InconsistentScore> {
    let timeout_risk = [Feature::D1, Feature::D2, Feature::D3].into_iter().any(|f| {
        y.get(f) && a.get(f).map(|s| s >= BAND_CRITICAL).unwrap_or(false)
    });
    let any_delta = y.d1 || y.d2 || y.d3;

    let severity = if y.v {
        if a.v < BAND_MINOR {
            return Err(InconsistentScore { score: a.v });
        } else if a.v < BAND_MAJOR {
            Severity::Minor
        } else if a.v < BAND_CRITICAL {
            Severity::Major
        } else {
            Severity::Critical
        }
    } else if any_delta {
        Severity::PerformanceDegradation
    } else if y.any() {
        // Volume label handled above; nothing else can be set.
        unreachable!("label vector with no recognized feature")
    } else {
        Severity::None
    };
    Ok((severity, timeout_risk))
}

/// Composes localization and classification into a full verdict for one bin.
pub fn explain(a: &ScoreVector, y: &LabelVector, tau_ms: i64) -> Result<Verdict, InconsistentScore> {
    let localization = localize(y);
    let (severity, timeout_risk) = classify(a, y)?;

    let mut rules = Vec::new();
    match localization {
        Some(Localization::Internal) => rules.push(Rule::L1),
        Some(Localization::External) => rules.push(Rule::L2),
        _ => {}
    }
    match severity {
        Severity::PerformanceDegradation => rules.push(Rule::C1),
        Severity::Minor => rules.push(Rule::C2),
        Severity::Major => rules.push(Rule::C3),
        Severity::Critical => rules.push(Rule::C4),
        Severity::None => {}
    }

    Ok(Verdict {
        tau_ms,
        localization,
        severity,
        business_impact: severity.business_impact(),
        timeout_risk,
        triggering_rules: rules,
        scores: *a,
    })
}
