//! Explaining a model that lives behind the line-delimited JSON protocol.
//! A reference server runs on a background thread; the explainer talks to
//! it over TCP exactly as it would to an external process.
//!
//! cargo run --example remote_model

use std::net::TcpListener;
use std::thread;

use kadd_shap::explainer::{explain_kadd, sample_coalitions, BackgroundSet, ExplainOptions};
use kadd_shap::model::{parse_terms, synthetic_interaction_model};
use kadd_shap::protocol::{conformance_check, remote_model_client, serve_tcp, ClientOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = 4;
    let served = synthetic_interaction_model(m, parse_terms("x1 + x2*x3 - 0.5*x4")?)?;
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let server = thread::spawn(move || serve_tcp(&served, listener, 4096, Some(1)));

    let options = ClientOptions { record_transcript: true, ..ClientOptions::default() };
    let remote = remote_model_client(&format!("tcp:{addr}"), m, &options)?;

    let report = conformance_check(&remote, 20, 1);
    println!("conformance: {} batches, {} violations", report.batches, report.violations.len());

    let background = BackgroundSet::all(vec![vec![0.0; m], vec![1.0; m], vec![0.5, 0.2, 0.9, 0.1]])?;
    let sample = sample_coalitions(m, 12, 5)?;
    let r = explain_kadd(&remote, &[1.0, 2.0, 0.5, 1.0], &sample, &background, 2, &ExplainOptions::default())?;
    println!("phi0 {:.4}, phi {:?}, f(x*) {:.4}", r.phi0, r.shap_values, r.prediction);

    let transcript = remote.shutdown()?.unwrap_or_default();
    println!("\nfirst frames on the wire:");
    for line in transcript.iter().take(4) {
        println!("  {}", if line.len() > 100 { &line[..100] } else { line });
    }
    server.join().expect("server thread")?;
    Ok(())
}
