//! Message-level and transaction-level domain vocabulary.
//!
//! The wire format for trace events is one JSON object per line:
//!
//! ```text
//! {"tx_id": "T1", "kind": "pacs008", "dir": "in", "ts_ms": 1000, "cp": "orig"}
//! ```
//!
//! This is the ingestion and replay contract for the whole toolkit.

use serde::{Deserialize, Serialize};
use std::fmt;

/// ISO 20022 message type observed at the CSM boundary.
///
/// pacs.008 carries the credit-transfer instruction (a request), pacs.002
/// the status response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    #[serde(rename = "pacs008")]
    Pacs008,
    #[serde(rename = "pacs002")]
    Pacs002,
}

/// Message direction from the CSM's perspective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "in")]
    InboundToCsm,
    #[serde(rename = "out")]
    OutboundFromCsm,
}

/// Which side of the transfer the message is exchanged with.
///
/// `Both` marks the paired settlement confirmations sent to originator and
/// beneficiary, modeled as a single event because they bound the same
/// processing phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Counterparty {
    #[serde(rename = "orig")]
    Originator,
    #[serde(rename = "benef")]
    Beneficiary,
    #[serde(rename = "both")]
    Both,
}

/// One timestamped message observation at the CSM boundary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub tx_id: String,
    pub kind: MessageKind,
    #[serde(rename = "dir")]
    pub direction: Direction,
    pub ts_ms: i64,
    #[serde(rename = "cp")]
    pub counterparty: Counterparty,
}

/// Role a trace event plays in the core settlement flow.
///
/// Only the first four roles carry processing-time information; the
/// rejection relay back to the originator is legal but excluded from
/// features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LegRole {
    /// pacs.008 received from the originator bank.
    In008,
    /// pacs.008 forwarded to the beneficiary bank.
    Out008,
    /// pacs.002 received from the beneficiary bank.
    In002,
    /// Final pacs.002 confirmations sent to both parties (settlement).
    Out002Settlement,
    /// pacs.002 relayed to the originator on rejection; no feature boundary.
    Out002Relay,
}

impl TraceEvent {
    pub fn new(
        tx_id: impl Into<String>,
        kind: MessageKind,
        direction: Direction,
        ts_ms: i64,
        counterparty: Counterparty,
    ) -> Self {
        Self {
            tx_id: tx_id.into(),
            kind,
            direction,
            ts_ms,
            counterparty,
        }
    }

    /// Classifies the (kind, direction, counterparty) signature, or `None`
    /// if the combination never occurs in the core flow.
    pub fn leg_role(&self) -> Option<LegRole> {
        use Counterparty::*;
        use Direction::*;
        use MessageKind::*;
        match (self.kind, self.direction, self.counterparty) {
            (Pacs008, InboundToCsm, Originator) => Some(LegRole::In008),
            (Pacs008, OutboundFromCsm, Beneficiary) => Some(LegRole::Out008),
            (Pacs002, InboundToCsm, Beneficiary) => Some(LegRole::In002),
            (Pacs002, OutboundFromCsm, Both) => Some(LegRole::Out002Settlement),
            (Pacs002, OutboundFromCsm, Originator) => Some(LegRole::Out002Relay),
            _ => None,
        }
    }
}

/// Violation found by [`validate_event`], naming the offending field.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct EventViolation {
    pub field: &'static str,
    pub detail: String,
}

impl fmt::Display for EventViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid {}: {}", self.field, self.detail)
    }
}

/// Checks a trace event against the leg-signature and timestamp rules.
///
/// Never panics; callers are expected to count violations and keep the
/// stream moving.
pub fn validate_event(event: &TraceEvent) -> Result<(), EventViolation> {
    if event.ts_ms < 0 {
        return Err(EventViolation {
            field: "timestamp",
            detail: format!("ts_ms must be >= 0, got {}", event.ts_ms),
        });
    }
    if event.leg_role().is_none() {
        return Err(EventViolation {
            field: "leg signature",
            detail: format!(
                "({:?}, {:?}, {:?}) is not a legal leg",
                event.kind, event.direction, event.counterparty
            ),
        });
    }
    Ok(())
}

/// Final state of a transaction. Only `Settled` yields processing-time
/// features; the other outcomes contribute to volume only by their absence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransactionOutcome {
    Settled,
    Expired,
    Rejected,
    Failed,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(kind: MessageKind, dir: Direction, cp: Counterparty, ts: i64) -> TraceEvent {
        TraceEvent::new("A", kind, dir, ts, cp)
    }

    #[test]
    fn legal_inbound_pacs008_is_ok() {
        let e = ev(
            MessageKind::Pacs008,
            Direction::InboundToCsm,
            Counterparty::Originator,
            100,
        );
        assert!(validate_event(&e).is_ok());
    }

    #[test]
    fn negative_timestamp_is_rejected() {
        let e = ev(
            MessageKind::Pacs008,
            Direction::InboundToCsm,
            Counterparty::Originator,
            -1,
        );
        let err = validate_event(&e).unwrap_err();
        assert_eq!(err.field, "timestamp");
    }

    #[test]
    fn originator_never_sends_pacs002_inbound() {
        let e = ev(
            MessageKind::Pacs002,
            Direction::InboundToCsm,
            Counterparty::Originator,
            100,
        );
        let err = validate_event(&e).unwrap_err();
        assert_eq!(err.field, "leg signature");
    }

    #[test]
    fn signature_validation_accepts_exactly_the_legal_set() {
        use Counterparty::*;
        use Direction::*;
        use MessageKind::*;
        let legal = [
            (Pacs008, InboundToCsm, Originator),
            (Pacs008, OutboundFromCsm, Beneficiary),
            (Pacs002, InboundToCsm, Beneficiary),
            (Pacs002, OutboundFromCsm, Both),
            (Pacs002, OutboundFromCsm, Originator),
        ];
        let mut accepted = 0;
        for kind in [Pacs008, Pacs002] {
            for dir in [InboundToCsm, OutboundFromCsm] {
                for cp in [Originator, Beneficiary, Both] {
                    let e = ev(kind, dir, cp, 0);
                    let ok = validate_event(&e).is_ok();
                    assert_eq!(ok, legal.contains(&(kind, dir, cp)), "{kind:?} {dir:?} {cp:?}");
                    if ok {
                        accepted += 1;
                    }
                }
            }
        }
        assert_eq!(accepted, legal.len());
    }

    #[test]
    fn trace_event_wire_format_round_trips() {
        let line = r#"{"tx_id":"T1","kind":"pacs008","dir":"in","ts_ms":1000,"cp":"orig"}"#;
        let e: TraceEvent = serde_json::from_str(line).unwrap();
        assert_eq!(e.kind, MessageKind::Pacs008);
        assert_eq!(e.direction, Direction::InboundToCsm);
        assert_eq!(e.counterparty, Counterparty::Originator);
        assert_eq!(serde_json::to_string(&e).unwrap(), line);
    }
}
