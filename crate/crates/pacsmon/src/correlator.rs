//! Streaming transaction reconstruction.
//!
//! The correlator consumes validated [`TraceEvent`]s in arrival order,
//! keeps one pending entry per transaction and emits a [`SettledPayment`]
//! the moment all four core legs are known, whatever order they arrived in:
//!
//! ```text
//! d1 = out008 - in008      (conditional phase inside the CSM)
//! d2 = in002  - out008     (time outside the CSM awaiting the reply)
//! d3 = out002 - in002      (settlement phase inside the CSM)
//! ```
//!
//! `d1 + d2 + d3` is a lower bound on the total processing time of the
//! transaction. Incomplete transactions are evicted once they exceed the
//! configured timeout and never produce features; they matter only as
//! missing volume downstream.
//!
//! Settled payments are emitted as JSONL:
//!
//! ```text
//! {"tx_id": "T1", "settled_ms": 650, "d1_ms": 40, "d2_ms": 560, "d3_ms": 50}
//! ```

use crate::model::{LegRole, TraceEvent};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};

/// One settled instant payment with its three processing-time features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettledPayment {
    pub tx_id: String,
    /// Timestamp of the final outbound pacs.002, i.e. the latest leg.
    pub settled_ms: i64,
    pub d1_ms: i64,
    pub d2_ms: i64,
    pub d3_ms: i64,
}

impl SettledPayment {
    pub fn deltas(&self) -> [i64; 3] {
        [self.d1_ms, self.d2_ms, self.d3_ms]
    }
}

/// Correlator tuning knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrelatorConfig {
    /// Pending transactions older than this are evicted as non-settled.
    /// The scheme bounds end-to-end execution at 10 s, so the default of
    /// 25 s comfortably exceeds any legitimately settling transaction.
    pub eviction_timeout_ms: i64,
    /// Hard bound on simultaneously pending transactions; the oldest entry
    /// is evicted first when the bound is hit.
    pub max_pending: usize,
}

impl Default for CorrelatorConfig {
    fn default() -> Self {
        Self {
            eviction_timeout_ms: 25_000,
            max_pending: 100_000,
        }
    }
}

/// Why the correlator dropped or flagged something.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoticeKind {
    /// A leg slot was already filled for this transaction; the first-seen
    /// timestamp is kept so replays stay deterministic.
    DuplicateLeg,
    /// Completed legs implied a negative interval; the transaction is
    /// counted as malformed, not settled.
    NegativeInterval,
    /// Pending entry exceeded the eviction timeout.
    Evicted,
    /// Pending entry pushed out by the memory bound.
    CapacityEvicted,
}

/// Stream notice attached to a transaction id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Notice {
    pub kind: NoticeKind,
    pub tx_id: String,
}

impl Notice {
    fn new(kind: NoticeKind, tx_id: &str) -> Self {
        Self {
            kind,
            tx_id: tx_id.to_string(),
        }
    }
}

/// Per-transaction leg timestamps awaiting completion.
#[derive(Debug, Clone, Default)]
pub struct PendingTransaction {
    pub t_in008: Option<i64>,
    pub t_out008: Option<i64>,
    pub t_in002: Option<i64>,
    pub t_out002: Option<i64>,
    /// Timestamp of the first leg that arrived for this transaction.
    pub first_seen: i64,
    seq: u64,
}

impl PendingTransaction {
    fn slot(&mut self, role: LegRole) -> &mut Option<i64> {
        match role {
            LegRole::In008 => &mut self.t_in008,
            LegRole::Out008 => &mut self.t_out008,
            LegRole::In002 => &mut self.t_in002,
            LegRole::Out002Settlement => &mut self.t_out002,
            LegRole::Out002Relay => unreachable!("relay legs never reach a slot"),
        }
    }

    fn complete(&self) -> bool {
        self.t_in008.is_some()
            && self.t_out008.is_some()
            && self.t_in002.is_some()
            && self.t_out002.is_some()
    }
}

/// Single-writer streaming correlator.
///
/// One logical ingestion sequence per instance; independent instances may
/// run over partitioned tx_id spaces and have their outputs merged, because
/// transactions do not interact.
#[derive(Debug)]
pub struct Correlator {
    cfg: CorrelatorConfig,
    pending: HashMap<String, PendingTransaction>,
    /// (first_seen, seq) -> tx_id, ordered for oldest-first eviction.
    age_index: BTreeSet<(i64, u64)>,
    age_keys: HashMap<u64, String>,
    next_seq: u64,
    clock_ms: i64,
}

impl Correlator {
    pub fn new(cfg: CorrelatorConfig) -> Self {
        Self {
            cfg,
            pending: HashMap::new(),
            age_index: BTreeSet::new(),
            age_keys: HashMap::new(),
            next_seq: 0,
            clock_ms: 0,
        }
    }

    /// Highest event timestamp seen so far.
    pub fn clock_ms(&self) -> i64 {
        self.clock_ms
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn config(&self) -> &CorrelatorConfig {
        &self.cfg
    }

    /// Feeds one event. Emits a settled payment when the event completes
    /// its transaction, plus any notices raised along the way.
    ///
    /// The event is expected to have passed `validate_event`; relay legs
    /// (rejection pacs.002 to the originator) are legal but carry no
    /// feature boundary and are skipped.
    pub fn ingest(&mut self, event: &TraceEvent) -> (Option<SettledPayment>, Vec<Notice>) {
        self.clock_ms = self.clock_ms.max(event.ts_ms);
        let role = match event.leg_role() {
            Some(LegRole::Out002Relay) | None => return (None, Vec::new()),
            Some(role) => role,
        };

        let mut notices = Vec::new();
        if !self.pending.contains_key(&event.tx_id) {
            if self.pending.len() >= self.cfg.max_pending {
                if let Some(tx) = self.evict_oldest() {
                    notices.push(Notice::new(NoticeKind::CapacityEvicted, &tx));
                }
            }
            let seq = self.next_seq;
            self.next_seq += 1;
            self.pending.insert(
                event.tx_id.clone(),
                PendingTransaction {
                    first_seen: event.ts_ms,
                    seq,
                    ..PendingTransaction::default()
                },
            );
            self.age_index.insert((event.ts_ms, seq));
            self.age_keys.insert(seq, event.tx_id.clone());
        }

        let entry = self.pending.get_mut(&event.tx_id).expect("just inserted");
        let slot = entry.slot(role);
        if slot.is_some() {
            notices.push(Notice::new(NoticeKind::DuplicateLeg, &event.tx_id));
            return (None, notices);
        }
        *slot = Some(event.ts_ms);

        if !entry.complete() {
            return (None, notices);
        }

        let (in008, out008, in002, out002) = (
            entry.t_in008.unwrap(),
            entry.t_out008.unwrap(),
            entry.t_in002.unwrap(),
            entry.t_out002.unwrap(),
        );
        self.remove(&event.tx_id);

        let d1 = out008 - in008;
        let d2 = in002 - out008;
        let d3 = out002 - in002;
        if d1 < 0 || d2 < 0 || d3 < 0 {
            notices.push(Notice::new(NoticeKind::NegativeInterval, &event.tx_id));
            return (None, notices);
        }
        let payment = SettledPayment {
            tx_id: event.tx_id.clone(),
            settled_ms: in008.max(out008).max(in002).max(out002),
            d1_ms: d1,
            d2_ms: d2,
            d3_ms: d3,
        };
        (Some(payment), notices)
    }

    /// Advances the stream clock and evicts every pending transaction with
    /// `first_seen + eviction_timeout <= now`.
    pub fn advance_clock(&mut self, now_ms: i64) -> Vec<Notice> {
        self.clock_ms = self.clock_ms.max(now_ms);
        let mut notices = Vec::new();
        while let Some(&(first_seen, seq)) = self.age_index.iter().next() {
            if first_seen.saturating_add(self.cfg.eviction_timeout_ms) > self.clock_ms {
                break;
            }
            let tx_id = self.age_keys[&seq].clone();
            self.remove(&tx_id);
            notices.push(Notice::new(NoticeKind::Evicted, &tx_id));
        }
        notices
    }

    /// Evicts everything still pending, e.g. at end of stream.
    pub fn drain(&mut self) -> Vec<Notice> {
        let mut notices = Vec::new();
        while let Some(&(_, seq)) = self.age_index.iter().next() {
            let tx_id = self.age_keys[&seq].clone();
            self.remove(&tx_id);
            notices.push(Notice::new(NoticeKind::Evicted, &tx_id));
        }
        notices
    }

    fn evict_oldest(&mut self) -> Option<String> {
        let &(_, seq) = self.age_index.iter().next()?;
        let tx_id = self.age_keys[&seq].clone();
        self.remove(&tx_id);
        Some(tx_id)
    }

    fn remove(&mut self, tx_id: &str) {
        if let Some(entry) = self.pending.remove(tx_id) {
            self.age_index.remove(&(entry.first_seen, entry.seq));
            self.age_keys.remove(&entry.seq);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Counterparty, Direction, MessageKind};

    fn leg(tx: &str, role: LegRole, ts: i64) -> TraceEvent {
        let (kind, dir, cp) = match role {
            LegRole::In008 => (
                MessageKind::Pacs008,
                Direction::InboundToCsm,
                Counterparty::Originator,
            ),
            LegRole::Out008 => (
                MessageKind::Pacs008,
                Direction::OutboundFromCsm,
                Counterparty::Beneficiary,
            ),
            LegRole::In002 => (
                MessageKind::Pacs002,
                Direction::InboundToCsm,
                Counterparty::Beneficiary,
            ),
            LegRole::Out002Settlement => (
                MessageKind::Pacs002,
                Direction::OutboundFromCsm,
                Counterparty::Both,
            ),
            LegRole::Out002Relay => (
                MessageKind::Pacs002,
                Direction::OutboundFromCsm,
                Counterparty::Originator,
            ),
        };
        TraceEvent::new(tx, kind, dir, ts, cp)
    }

    fn four_legs(tx: &str, t: [i64; 4]) -> [TraceEvent; 4] {
        [
            leg(tx, LegRole::In008, t[0]),
            leg(tx, LegRole::Out008, t[1]),
            leg(tx, LegRole::In002, t[2]),
            leg(tx, LegRole::Out002Settlement, t[3]),
        ]
    }

    #[test]
    fn completion_emits_deltas_by_subtraction() {
        let mut c = Correlator::new(CorrelatorConfig::default());
        let legs = four_legs("A", [0, 40, 600, 650]);
        let mut emitted = None;
        for e in &legs {
            let (p, notices) = c.ingest(e);
            assert!(notices.is_empty());
            if p.is_some() {
                emitted = p;
            }
        }
        let p = emitted.expect("fourth leg completes");
        assert_eq!((p.d1_ms, p.d2_ms, p.d3_ms, p.settled_ms), (40, 560, 50, 650));
        assert_eq!(c.pending_len(), 0);
    }

    #[test]
    fn reverse_arrival_order_emits_the_same_payment() {
        let mut forward = Correlator::new(CorrelatorConfig::default());
        let mut reverse = Correlator::new(CorrelatorConfig::default());
        let legs = four_legs("A", [0, 40, 600, 650]);

        let mut a = None;
        for e in &legs {
            if let (Some(p), _) = forward.ingest(e) {
                a = Some(p);
            }
        }
        let mut b = None;
        for e in legs.iter().rev() {
            if let (Some(p), _) = reverse.ingest(e) {
                b = Some(p);
            }
        }
        assert_eq!(a.unwrap(), b.unwrap());
    }

    #[test]
    fn incomplete_transaction_is_evicted_not_settled() {
        let mut c = Correlator::new(CorrelatorConfig::default());
        for e in &four_legs("A", [0, 40, 600, 650])[..3] {
            let (p, _) = c.ingest(e);
            assert!(p.is_none());
        }
        let notices = c.advance_clock(30_000);
        assert_eq!(notices.len(), 1);
        assert_eq!(notices[0].kind, NoticeKind::Evicted);
        assert_eq!(notices[0].tx_id, "A");
        assert_eq!(c.pending_len(), 0);
    }

    #[test]
    fn eviction_respects_the_timeout_boundary() {
        let cfg = CorrelatorConfig {
            eviction_timeout_ms: 25_000,
            ..CorrelatorConfig::default()
        };

        // first_seen = 0, now = 30_000: evicted (0 + 25_000 <= 30_000).
        let mut c = Correlator::new(cfg.clone());
        c.ingest(&leg("A", LegRole::In008, 0));
        assert_eq!(c.advance_clock(30_000).len(), 1);

        // first_seen = 10_000, now = 30_000: kept (35_000 > 30_000).
        let mut c = Correlator::new(cfg.clone());
        c.ingest(&leg("B", LegRole::In008, 10_000));
        assert_eq!(c.advance_clock(30_000).len(), 0);
        assert_eq!(c.pending_len(), 1);

        // Empty state: nothing to evict.
        let mut c = Correlator::new(cfg);
        assert!(c.advance_clock(1_000_000).is_empty());
    }

    #[test]
    fn duplicate_leg_keeps_first_seen_timestamp() {
        let mut c = Correlator::new(CorrelatorConfig::default());
        c.ingest(&leg("A", LegRole::In008, 0));
        let (p, notices) = c.ingest(&leg("A", LegRole::In008, 5));
        assert!(p.is_none());
        assert_eq!(notices[0].kind, NoticeKind::DuplicateLeg);

        for e in &four_legs("A", [999, 40, 600, 650])[1..] {
            if let (Some(p), _) = c.ingest(e) {
                // d1 must be measured from the first-seen in008 at t=0.
                assert_eq!(p.d1_ms, 40);
                return;
            }
        }
        panic!("transaction never completed");
    }

    #[test]
    fn negative_interval_discards_the_transaction() {
        let mut c = Correlator::new(CorrelatorConfig::default());
        // out008 before in008.
        let legs = four_legs("A", [100, 40, 600, 650]);
        let mut notices_seen = Vec::new();
        for e in &legs {
            let (p, notices) = c.ingest(e);
            assert!(p.is_none());
            notices_seen.extend(notices);
        }
        assert_eq!(notices_seen.len(), 1);
        assert_eq!(notices_seen[0].kind, NoticeKind::NegativeInterval);
        assert_eq!(c.pending_len(), 0);
    }

    #[test]
    fn capacity_bound_evicts_oldest_first() {
        let cfg = CorrelatorConfig {
            max_pending: 2,
            ..CorrelatorConfig::default()
        };
        let mut c = Correlator::new(cfg);
        c.ingest(&leg("A", LegRole::In008, 0));
        c.ingest(&leg("B", LegRole::In008, 1));
        let (_, notices) = c.ingest(&leg("C", LegRole::In008, 2));
        assert_eq!(notices.len(), 1);
        assert_eq!(notices[0].kind, NoticeKind::CapacityEvicted);
        assert_eq!(notices[0].tx_id, "A");
        assert_eq!(c.pending_len(), 2);
    }

    #[test]
    fn relay_legs_are_skipped() {
        let mut c = Correlator::new(CorrelatorConfig::default());
        let (p, notices) = c.ingest(&leg("A", LegRole::Out002Relay, 10));
        assert!(p.is_none());
        assert!(notices.is_empty());
        assert_eq!(c.pending_len(), 0);
    }

    #[test]
    fn payment_wire_format_round_trips() {
        let line = r#"{"tx_id":"T1","settled_ms":650,"d1_ms":40,"d2_ms":560,"d3_ms":50}"#;
        let p: SettledPayment = serde_json::from_str(line).unwrap();
        assert_eq!(serde_json::to_string(&p).unwrap(), line);
    }
}
