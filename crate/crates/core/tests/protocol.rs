mod common;

use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use kadd_shap::explainer::{explain_kadd, sample_coalitions, BackgroundSet, ExplainOptions};
use kadd_shap::model::parse_terms;
use kadd_shap::protocol::{
    conformance_check, remote_model_client, serve, serve_tcp, ClientOptions, Frame, RemoteModel,
    TransportError,
};
use kadd_shap::BlackBoxModel;
use rand::Rng;

const FIXTURE: &str = include_str!("fixtures/first_feature.transcript");

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_kadd-shap")
}

fn recording(timeout: Duration) -> ClientOptions {
    ClientOptions {
        timeout,
        record_transcript: true,
    }
}

fn first_feature_server(m: usize) -> String {
    format!("exec:{} serve --model synthetic:x1 --features {m}", bin())
}

struct FirstFeature;

impl BlackBoxModel for FirstFeature {
    fn num_features(&self) -> usize {
        3
    }
    fn predict_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>, TransportError> {
        Ok(xs.iter().map(|x| x[0]).collect())
    }
    fn id(&self) -> String {
        "first-feature".into()
    }
}

fn fixture_requests() -> Vec<Vec<f64>> {
    FIXTURE
        .lines()
        .filter_map(|l| l.strip_prefix("> "))
        .filter_map(|l| match Frame::decode(l).unwrap() {
            Frame::Predict { instances, .. } => Some(instances),
            _ => None,
        })
        .flatten()
        .collect()
}

#[test]
fn reference_server_reproduces_the_golden_transcript() {
    let requests: String = FIXTURE
        .lines()
        .filter_map(|l| l.strip_prefix("> "))
        .map(|l| format!("{l}\n"))
        .collect();
    let expected: String = FIXTURE
        .lines()
        .filter_map(|l| l.strip_prefix("< "))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut out = Vec::new();
    serve(&FirstFeature, requests.as_bytes(), &mut out, 64).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), expected);
}

#[test]
fn client_against_child_process_reproduces_the_golden_transcript() {
    let remote = remote_model_client(&first_feature_server(3), 3, &recording(Duration::from_secs(30))).unwrap();
    let mut batches = Vec::new();
    for line in FIXTURE.lines().filter_map(|l| l.strip_prefix("> ")) {
        if let Frame::Predict { instances, .. } = Frame::decode(line).unwrap() {
            batches.push(instances);
        }
    }
    for batch in &batches {
        let values = remote.predict_batch(batch).unwrap();
        let column: Vec<f64> = batch.iter().map(|x| x[0]).collect();
        assert_eq!(values, column);
    }
    let transcript = remote.shutdown().unwrap().unwrap();
    let golden: Vec<&str> = FIXTURE.lines().collect();
    assert_eq!(transcript, golden);
    assert_eq!(fixture_requests().len(), 6);
}

#[test]
fn frames_round_trip_byte_for_byte() {
    for line in FIXTURE.lines() {
        let wire = &line[2..];
        assert_eq!(Frame::decode(wire).unwrap().encode(), wire);
    }
}

#[test]
fn tcp_session_echoes_first_feature() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let server = thread::spawn(move || serve_tcp(&FirstFeature, listener, 64, Some(1)));
    let remote = remote_model_client(&format!("tcp:{addr}"), 3, &ClientOptions::default()).unwrap();
    let batch = vec![vec![4.5, 1.0, 2.0], vec![-1.0, 0.0, 0.0], vec![0.25, 9.0, 9.0]];
    assert_eq!(remote.predict_batch(&batch).unwrap(), [4.5, -1.0, 0.25]);
    remote.shutdown().unwrap();
    server.join().unwrap().unwrap();
}

fn scripted(script: &str, timeout: Duration) -> Result<RemoteModel, TransportError> {
    remote_model_client(&format!("exec:{script}"), 2, &recording(timeout))
}

const READY: &str = r#"echo '{"type":"ready","version":1}'"#;

#[test]
fn wrong_prediction_count_is_a_count_mismatch() {
    let script = format!(
        r#"read l; {READY}; read l; echo '{{"type":"prediction","id":0,"values":[1.0]}}'; read l"#
    );
    let remote = scripted(&script, Duration::from_secs(10)).unwrap();
    let err = remote.predict_batch(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap_err();
    assert_eq!(err, TransportError::CountMismatch { expected: 2, got: 1 });
}

#[test]
fn transport_failures_are_distinct() {
    let version = scripted(r#"read l; echo '{"type":"ready","version":2}'"#, Duration::from_secs(10));
    assert!(matches!(version, Err(TransportError::Handshake(_))));

    let garbage = format!("read l; {READY}; read l; echo 'not json'; read l");
    let err = scripted(&garbage, Duration::from_secs(10))
        .unwrap()
        .predict_batch(&[vec![1.0, 2.0]])
        .unwrap_err();
    assert!(matches!(err, TransportError::MalformedFrame(_)), "{err:?}");

    let wrong_id = format!(
        r#"read l; {READY}; read l; echo '{{"type":"prediction","id":7,"values":[1.0]}}'; read l"#
    );
    let err = scripted(&wrong_id, Duration::from_secs(10))
        .unwrap()
        .predict_batch(&[vec![1.0, 2.0]])
        .unwrap_err();
    assert_eq!(err, TransportError::IdMismatch { expected: 0, got: 7 });

    let silent = format!("read l; {READY}; read l; sleep 5");
    let err = scripted(&silent, Duration::from_millis(200))
        .unwrap()
        .predict_batch(&[vec![1.0, 2.0]])
        .unwrap_err();
    assert!(matches!(err, TransportError::Timeout(_)), "{err:?}");

    let dies = format!("read l; {READY}; read l; exit 0");
    let err = scripted(&dies, Duration::from_secs(10))
        .unwrap()
        .predict_batch(&[vec![1.0, 2.0]])
        .unwrap_err();
    assert_eq!(err, TransportError::Closed);

    let server_error = format!(
        r#"read l; {READY}; read l; echo '{{"type":"error","message":"boom"}}'; read l"#
    );
    let err = scripted(&server_error, Duration::from_secs(10))
        .unwrap()
        .predict_batch(&[vec![1.0, 2.0]])
        .unwrap_err();
    assert_eq!(err, TransportError::Server("boom".into()));
}

#[test]
fn server_rejects_handshake_with_wrong_width() {
    let err = remote_model_client(&first_feature_server(3), 4, &ClientOptions::default()).unwrap_err();
    assert!(matches!(err, TransportError::Handshake(_)), "{err:?}");
}

#[test]
fn client_refuses_non_finite_and_ragged_instances() {
    let remote = remote_model_client(&first_feature_server(3), 3, &ClientOptions::default()).unwrap();
    assert_eq!(
        remote.predict_batch(&[vec![f64::NAN, 0.0, 0.0]]).unwrap_err(),
        TransportError::NonFinite("instances")
    );
    assert!(matches!(remote.predict_batch(&[vec![1.0]]), Err(TransportError::Model(_))));
    assert_eq!(remote.predict_batch(&[vec![2.0, 0.0, 0.0]]).unwrap(), [2.0]);
}

#[test]
fn thousand_batch_fuzz_session_has_no_violations() {
    let remote = remote_model_client(&first_feature_server(5), 5, &ClientOptions::default()).unwrap();
    let report = conformance_check(&remote, 1000, 17);
    assert_eq!(report.batches, 1000);
    assert!(report.passed(), "{:?}", &report.violations[..report.violations.len().min(5)]);
    remote.shutdown().unwrap();
}

#[test]
fn explanations_through_a_remote_model_stay_locally_accurate() {
    let spec = "x1 + 2*x2*x3 - 0.5*x1*x4 + x5";
    let server = format!("exec:{} serve --model 'synthetic:{spec}' --features 5", bin());
    let remote = remote_model_client(&server, 5, &ClientOptions::default()).unwrap();
    let local = kadd_shap::model::synthetic_interaction_model(5, parse_terms(spec).unwrap()).unwrap();
    let mut rng = common::rng(3);
    let bg = BackgroundSet::all(common::random_rows(&mut rng, 30, 5)).unwrap();
    let opts = ExplainOptions::default();
    for seed in 0..5 {
        let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..2.0)).collect();
        let sample = sample_coalitions(5, 16, seed).unwrap();
        let via_wire = explain_kadd(&remote, &x, &sample, &bg, 2, &opts).unwrap();
        let in_process = explain_kadd(&local, &x, &sample, &bg, 2, &opts).unwrap();
        assert!(via_wire.efficiency_gap < 1e-3 * via_wire.prediction.abs().max(1.0));
        assert_eq!(via_wire.shap_values, in_process.shap_values);
    }
    remote.shutdown().unwrap();
}
