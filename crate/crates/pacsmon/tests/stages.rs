//! Stage composability: running the four stages separately over
//! intermediate JSONL files must yield byte-identical output to the fused
//! pipeline.

use pacsmon::pipeline::{
    aggregate_stage, correlate_stage, detect_stage, explain_stage, run_trace_reader, EmitFlags,
    PipelineConfig, RunSinks,
};
use pacsmon::simulator::{builtin_scenario, generate};
use std::io::BufReader;

#[test]
fn staged_files_match_the_fused_pipeline_byte_for_byte() {
    let spec = builtin_scenario("s2-multi-internal", 42).expect("builtin");
    let trace = generate(&spec).expect("generates");
    let mut trace_bytes = Vec::new();
    for e in &trace.events {
        serde_json::to_writer(&mut trace_bytes, e).unwrap();
        trace_bytes.push(b'\n');
    }

    let cfg = PipelineConfig {
        anchor_alpha_to_first_event: false,
        emit: EmitFlags {
            payments: true,
            observations: true,
            scores: true,
            verdicts: true,
        },
        ..PipelineConfig::default()
    };

    // Fused: one pass, four sinks.
    let (mut fused_payments, mut fused_observations, mut fused_scores, mut fused_verdicts) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    run_trace_reader(
        BufReader::new(trace_bytes.as_slice()),
        cfg.clone(),
        None,
        &mut RunSinks {
            payments: Some(&mut fused_payments),
            observations: Some(&mut fused_observations),
            scores: Some(&mut fused_scores),
            verdicts: Some(&mut fused_verdicts),
        },
    )
    .expect("fused run");

    // Staged: each stage reads the previous stage's file.
    let mut staged_payments = Vec::new();
    correlate_stage(
        BufReader::new(trace_bytes.as_slice()),
        &mut staged_payments,
        &cfg.correlator,
    )
    .expect("correlate stage");

    let mut staged_observations = Vec::new();
    aggregate_stage(
        BufReader::new(staged_payments.as_slice()),
        &mut staged_observations,
        &cfg.aggregation,
    )
    .expect("aggregate stage");

    let mut staged_scores = Vec::new();
    detect_stage(
        BufReader::new(staged_observations.as_slice()),
        &mut staged_scores,
        &cfg.detector,
    )
    .expect("detect stage");

    let mut staged_verdicts = Vec::new();
    explain_stage(BufReader::new(staged_scores.as_slice()), &mut staged_verdicts)
        .expect("explain stage");

    assert!(!fused_payments.is_empty());
    assert!(!fused_verdicts.is_empty());
    assert_eq!(fused_payments, staged_payments, "payments diverge");
    assert_eq!(fused_observations, staged_observations, "observations diverge");
    assert_eq!(fused_scores, staged_scores, "scores diverge");
    if fused_verdicts != staged_verdicts {
        let f = String::from_utf8_lossy(&fused_verdicts);
        let s = String::from_utf8_lossy(&staged_verdicts);
        for (i, (a, b)) in f.lines().zip(s.lines()).enumerate() {
            if a != b {
                panic!("verdicts diverge at line {}:\nfused:  {a}\nstaged: {b}", i + 1);
            }
        }
        panic!(
            "verdicts diverge in length: fused {} lines, staged {} lines",
            f.lines().count(),
            s.lines().count()
        );
    }
}

#[test]
fn streaming_drain_matches_the_batch_driver() {
    use pacsmon::StreamPipeline;

    let spec = builtin_scenario("s1-mild-internal", 7).expect("builtin");
    let mut spec = spec;
    spec.total_duration_ms = 400_000; // shortened: same machinery, less data
    spec.windows[0].end_ms = 390_000;
    let trace = generate(&spec).expect("generates");

    let cfg = PipelineConfig {
        anchor_alpha_to_first_event: false,
        ..PipelineConfig::default()
    };
    let mut pipeline = StreamPipeline::new(cfg.clone()).expect("pipeline");
    let mut streamed_scores = Vec::new();
    for event in &trace.events {
        pipeline.push_event(event).expect("valid event");
        for bin in pipeline.drain().bins {
            streamed_scores.push(bin.scores);
        }
    }
    pipeline.finish().expect("finish");
    for bin in pipeline.drain().bins {
        streamed_scores.push(bin.scores);
    }

    let result =
        pacsmon::pipeline::run_events(&trace.events, cfg, None).expect("batch run");
    assert_eq!(streamed_scores, result.scores);
}
