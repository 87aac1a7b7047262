use std::io::{Read, Write};
use std::net::TcpStream;
use std::time::Duration;

use streamlda::corpus::{batches, Document};
use streamlda::dsgs::wire::{read_message, write_message};
use streamlda::dsgs::{
    replay, run_in_process, serve, serve_with, shard_documents, worker_run, ParameterClient, RetryPolicy,
    ServerOptions, WireMessage,
};
use streamlda::sampler::rng_from_seed;
use streamlda::stats::{Hyper, SparseDelta, SparseEntry};
use streamlda::streaming::{run_sgs, StreamConfig};
use streamlda::synth::{generate, DocLength, GenSpec};

fn hyper(k: usize, v: usize) -> Hyper {
    Hyper::new(0.1, 0.03, k, v).unwrap()
}

fn exchange(stream: &mut TcpStream, msg: &WireMessage) -> WireMessage {
    write_message(stream, msg).unwrap();
    read_message(stream).unwrap().expect("reply")
}

fn docs(n: usize, seed: u64) -> Vec<Document> {
    let mut spec = GenSpec::new(n, 3, 40, DocLength::Poisson(30.0));
    spec.seed = seed;
    generate(&spec).unwrap().corpus.documents
}

#[test]
fn fresh_server_snapshot_is_empty() {
    let server = serve("127.0.0.1:0", &hyper(3, 5), 1.0).unwrap();
    let mut s = TcpStream::connect(server.local_addr()).unwrap();
    let reply = exchange(&mut s, &WireMessage::Fetch);
    assert_eq!(
        reply,
        WireMessage::Snapshot {
            topics: 3,
            vocab: 5,
            lambda: 1.0,
            entries: vec![]
        }
    );
    server.shutdown();
}

#[test]
fn push_is_decayed_by_the_server() {
    let server = serve("127.0.0.1:0", &hyper(3, 5), 0.7).unwrap();
    let mut s = TcpStream::connect(server.local_addr()).unwrap();
    let push = WireMessage::Push {
        entries: vec![SparseEntry::new(1, 2, 3.0)],
    };
    assert_eq!(exchange(&mut s, &push), WireMessage::Ack { applied: true });
    match exchange(&mut s, &WireMessage::Fetch) {
        WireMessage::Snapshot { entries, .. } => {
            assert_eq!(entries.len(), 1);
            assert_eq!((entries[0].topic, entries[0].word), (1, 2));
            assert!((entries[0].value - 2.1).abs() < 1e-12);
        }
        other => panic!("{other:?}"),
    }
    let state = server.shutdown();
    assert_eq!(state.merges, 1);
    assert!((state.stats.total(1) - 2.1).abs() < 1e-12);
}

#[test]
fn pushes_add_without_decay() {
    let server = serve("127.0.0.1:0", &hyper(2, 2), 1.0).unwrap();
    let mut client = ParameterClient::new(server.local_addr().to_string());
    let delta = SparseDelta {
        entries: vec![SparseEntry::new(0, 0, 1.0)],
    };
    assert!(client.push(&delta).unwrap());
    assert!(client.push(&delta).unwrap());
    let snap = client.fetch().unwrap();
    assert_eq!(snap.stats.count(0, 0), 2.0);
    assert_eq!(snap.lambda, 1.0);
    server.shutdown();
}

#[test]
fn out_of_range_push_is_rejected_and_state_kept() {
    let server = serve("127.0.0.1:0", &hyper(2, 3), 1.0).unwrap();
    let mut client = ParameterClient::new(server.local_addr().to_string());
    let good = SparseDelta {
        entries: vec![SparseEntry::new(1, 1, 4.0)],
    };
    assert!(client.push(&good).unwrap());
    let bad = SparseDelta {
        entries: vec![SparseEntry::new(0, 0, 1.0), SparseEntry::new(2, 0, 1.0)],
    };
    assert!(!client.push(&bad).unwrap());
    let snap = client.fetch().unwrap();
    assert_eq!(snap.stats.entries(), good.entries);
    assert_eq!(server.shutdown().merges, 1);
}

#[test]
fn malformed_frame_closes_connection_only() {
    let server = serve("127.0.0.1:0", &hyper(2, 3), 1.0).unwrap();
    let mut s = TcpStream::connect(server.local_addr()).unwrap();
    s.write_all(&[1, 0, 0, 0, 9]).unwrap();
    s.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    let mut buf = [0u8; 1];
    assert_eq!(s.read(&mut buf).unwrap(), 0, "server should hang up");

    // The server keeps serving other connections.
    let mut client = ParameterClient::new(server.local_addr().to_string());
    assert_eq!(client.fetch().unwrap().stats.nnz(), 0);
    server.shutdown();
}

#[test]
fn unreachable_server_aborts_batches_with_reports() {
    // Bind and drop to get a port nobody listens on.
    let addr = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    let mut client = ParameterClient::with_retry(
        addr.to_string(),
        RetryPolicy {
            attempts: 3,
            initial_backoff: Duration::from_millis(1),
        },
    );
    let config = StreamConfig::new(hyper(3, 40), 5);
    let mut reports = Vec::new();
    let summary = worker_run(
        &mut client,
        batches(docs(10, 1), 5).unwrap(),
        &config,
        &mut rng_from_seed(0),
        |r| {
            reports.push(r.clone());
            Ok(())
        },
    )
    .unwrap();
    assert_eq!(summary.batches_ok, 0);
    assert_eq!(summary.batches_failed, 2);
    assert!(reports.iter().all(|r| r.error.is_some() && r.batch.is_none()));
}

#[test]
fn worker_delta_mass_equals_batch_tokens() {
    let server = serve("127.0.0.1:0", &hyper(3, 40), 1.0).unwrap();
    let mut client = ParameterClient::new(server.local_addr().to_string());
    let config = StreamConfig {
        max_iters: 10,
        ..StreamConfig::new(hyper(3, 40), 8)
    };
    let mut reports = Vec::new();
    worker_run(&mut client, batches(docs(24, 2), 8).unwrap(), &config, &mut rng_from_seed(1), |r| {
        reports.push(r.clone());
        Ok(())
    })
    .unwrap();
    assert_eq!(reports.len(), 3);
    for r in &reports {
        assert!((r.pushed_mass - r.tokens as f64).abs() < 1e-9, "{} vs {}", r.pushed_mass, r.tokens);
    }
    let total: usize = reports.iter().map(|r| r.tokens).sum();
    assert!((server.shutdown().stats.total_mass() - total as f64).abs() < 1e-9);
}

#[test]
fn single_worker_matches_serial_sgs() {
    let docs = docs(60, 3);
    let config = StreamConfig {
        seed: 4,
        ..StreamConfig::new(hyper(3, 40), 20)
    };
    let serial = run_sgs(batches(docs.clone(), 20).unwrap(), &config, &mut rng_from_seed(4), |_, _| Ok(())).unwrap();
    let run = run_in_process(vec![docs], &config).unwrap();
    assert_eq!(run.stats, serial);
    assert_eq!(run.merges, 3);
}

#[test]
fn four_workers_replay_and_conserve() {
    let docs = docs(160, 5);
    let tokens: usize = docs.iter().map(Document::len).sum();
    for lambda in [1.0, 0.9] {
        let config = StreamConfig {
            lambda,
            max_iters: 15,
            ..StreamConfig::new(hyper(3, 40), 10)
        };
        let run = run_in_process(shard_documents(&docs, 4), &config).unwrap();
        assert_eq!(run.merges, 16);
        assert_eq!(run.push_log.len(), 16);
        assert_eq!(run.workers.iter().map(|w| w.batches_ok).sum::<usize>(), 16);
        assert_eq!(replay(3, 40, lambda, &run.push_log).unwrap(), run.stats);
        if lambda == 1.0 {
            assert!((run.stats.total_mass() - tokens as f64).abs() < 1e-6);
        } else {
            // Telescoping: every push is scaled once per later merge, itself included.
            let n = run.push_log.len() as i32;
            let expect: f64 = run
                .push_log
                .iter()
                .enumerate()
                .map(|(i, d)| d.total_mass() * lambda.powi(n - i as i32))
                .sum();
            assert!((run.stats.total_mass() - expect).abs() < 1e-6 * expect);
        }
    }
}

#[test]
fn recorded_state_via_handle() {
    let server = serve_with("127.0.0.1:0", &hyper(2, 2), 1.0, ServerOptions { record_pushes: true }).unwrap();
    let mut client = ParameterClient::new(server.local_addr().to_string());
    let d = SparseDelta {
        entries: vec![SparseEntry::new(1, 0, 2.0)],
    };
    client.push(&d).unwrap();
    assert_eq!(server.merges(), 1);
    let state = server.shutdown();
    assert_eq!(state.push_log, Some(vec![d]));
}
