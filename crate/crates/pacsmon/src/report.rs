//! Rendering of verdict streams as operator-facing tables.
//!
//! Contiguous bins sharing the same localization and severity are grouped
//! into episodes; each row carries the per-feature score maxima over the
//! episode, mirroring the verdict-matrix column layout. Available as
//! pretty-printed text, CSV and JSON.

use crate::detector::Feature;
use crate::explainer::{Localization, Severity, Verdict};
use crate::pipeline::MaxScores;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// A contiguous run of bins with one (localization, severity) reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub from_ms: i64,
    pub to_ms: i64,
    pub bins: u64,
    pub localization: Option<Localization>,
    pub severity: Severity,
    pub business_impact: bool,
    pub timeout_risk: bool,
    pub max_scores: MaxScores,
}

/// Groups verdicts (ordered by bin timestamp) into episodes. `eta_ms` is
/// the bin width; a gap larger than one bin, or any change of localization
/// or severity, starts a new episode.
pub fn episodes(verdicts: &[Verdict], eta_ms: i64) -> Vec<Episode> {
    let mut out: Vec<Episode> = Vec::new();
    for v in verdicts {
        let fresh = match out.last() {
            Some(e) => {
                e.to_ms + eta_ms != v.tau_ms
                    || e.localization != v.localization
                    || e.severity != v.severity
            }
            None => true,
        };
        if fresh {
            let mut max_scores = MaxScores::default();
            max_scores.update(&v.scores);
            out.push(Episode {
                from_ms: v.tau_ms,
                to_ms: v.tau_ms,
                bins: 1,
                localization: v.localization,
                severity: v.severity,
                business_impact: v.business_impact,
                timeout_risk: v.timeout_risk,
                max_scores,
            });
        } else {
            let e = out.last_mut().expect("fresh handled above");
            e.to_ms = v.tau_ms;
            e.bins += 1;
            e.business_impact |= v.business_impact;
            e.timeout_risk |= v.timeout_risk;
            e.max_scores.update(&v.scores);
        }
    }
    out
}

pub fn localization_label(l: Option<Localization>) -> &'static str {
    match l {
        Some(Localization::Internal) => "Internal",
        Some(Localization::External) => "External",
        Some(Localization::Mixed) => "Mixed",
        Some(Localization::Indeterminate) => "Indeterminate",
        None => "-",
    }
}

pub fn severity_label(s: Severity) -> &'static str {
    match s {
        Severity::None => "None",
        Severity::PerformanceDegradation => "Perf. degr.",
        Severity::Minor => "Minor",
        Severity::Major => "Major",
        Severity::Critical => "Critical",
    }
}

const COLUMNS: [&str; 9] = [
    "from_ms",
    "to_ms",
    "bins",
    "a(v)",
    "a(d1)",
    "a(d2)",
    "a(d3)",
    "localization",
    "incident",
];

fn row(e: &Episode) -> [String; 10] {
    [
        e.from_ms.to_string(),
        e.to_ms.to_string(),
        e.bins.to_string(),
        format!("{:.2}", e.max_scores.get(Feature::V)),
        format!("{:.2}", e.max_scores.get(Feature::D1)),
        format!("{:.2}", e.max_scores.get(Feature::D2)),
        format!("{:.2}", e.max_scores.get(Feature::D3)),
        localization_label(e.localization).to_string(),
        severity_label(e.severity).to_string(),
        if e.business_impact { "Yes" } else { "No" }.to_string(),
    ]
}

/// Pretty-printed fixed-width table.
pub fn render_text(episodes: &[Episode]) -> String {
    let header: Vec<String> = COLUMNS
        .iter()
        .map(|c| c.to_string())
        .chain(std::iter::once("impact".to_string()))
        .collect();
    let rows: Vec<[String; 10]> = episodes.iter().map(row).collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in &rows {
        for (w, cell) in widths.iter_mut().zip(r.iter()) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut emit = |cells: &[String]| {
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            let _ = write!(out, "{cell:<w$}");
        }
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
    };
    emit(&header);
    emit(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>());
    for r in &rows {
        emit(r);
    }
    if episodes.is_empty() {
        out.push_str("(no anomalous bins)\n");
    }
    out
}

/// CSV with a header row; all cells are numeric or enum names, so no
/// quoting is ever needed.
pub fn render_csv(episodes: &[Episode]) -> String {
    let mut out = String::new();
    out.push_str(&COLUMNS.join(","));
    out.push_str(",impact\n");
    for e in episodes {
        out.push_str(&row(e).join(","));
        out.push('\n');
    }
    out
}

/// JSON array of episodes.
pub fn render_json(episodes: &[Episode]) -> String {
    serde_json::to_string_pretty(episodes).expect("episodes serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::ScoreVector;
    use crate::explainer::Rule;

    fn verdict(tau: i64, loc: Localization, sev: Severity, v_score: f64) -> Verdict {
        Verdict {
            tau_ms: tau,
            localization: Some(loc),
            severity: sev,
            business_impact: sev.business_impact(),
            timeout_risk: false,
            triggering_rules: vec![Rule::L2],
            scores: ScoreVector {
                d1: Some(0.0),
                d2: Some(0.9),
                d3: Some(0.0),
                v: v_score,
            },
        }
    }

    #[test]
    fn contiguous_same_verdicts_merge_into_one_episode() {
        let verdicts = vec![
            verdict(1000, Localization::External, Severity::Minor, 0.3),
            verdict(2000, Localization::External, Severity::Minor, 0.4),
            verdict(3000, Localization::External, Severity::Minor, 0.35),
        ];
        let eps = episodes(&verdicts, 1000);
        assert_eq!(eps.len(), 1);
        assert_eq!(eps[0].bins, 3);
        assert_eq!(eps[0].max_scores.v, 0.4);
    }

    #[test]
    fn gaps_and_severity_changes_split_episodes() {
        let verdicts = vec![
            verdict(1000, Localization::External, Severity::Minor, 0.3),
            verdict(2000, Localization::External, Severity::Major, 0.6),
            verdict(5000, Localization::External, Severity::Major, 0.6),
        ];
        let eps = episodes(&verdicts, 1000);
        assert_eq!(eps.len(), 3);
    }

    #[test]
    fn renderers_cover_all_columns() {
        let verdicts = vec![verdict(1000, Localization::External, Severity::Minor, 0.33)];
        let eps = episodes(&verdicts, 1000);
        let text = render_text(&eps);
        assert!(text.contains("External"));
        assert!(text.contains("Minor"));
        let csv = render_csv(&eps);
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with("from_ms,to_ms,bins,a(v),a(d1),a(d2),a(d3),localization,incident,impact"));
        let json = render_json(&eps);
        assert!(json.contains("\"severity\": \"minor\""));
    }

    #[test]
    fn empty_input_renders_a_placeholder() {
        assert!(render_text(&[]).contains("no anomalous bins"));
    }
}
