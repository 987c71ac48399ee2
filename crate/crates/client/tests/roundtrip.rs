use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use garden_client::{Client, StatsParams};
use garden_core::analyzer::{compute_stats, sweep_filter, PreviewRequest, StatsOptions, SweepRequest};
use garden_core::api::{RunRequest, RunState};
use garden_core::cleaners::{RuleSpec, Scope};
use garden_core::corpus::write_jsonl_file;
use garden_core::pipeline::Resources;
use garden_core::retriever::{build_index, Bm25Params, DEFAULT_SHARDS};
use garden_core::Document;
use garden_server::{bind, serve_on, AppState, ServeOptions};

fn corpus() -> Vec<Document> {
    (0..40)
        .map(|i| {
            let text = match i % 4 {
                0 => format!("Renmin University record {i} with some extra words"),
                1 => format!("short {i}"),
                2 => format!("Data processing for large language models, batch {i}.\nReferences\n[1] x"),
                _ => "x".repeat(i * 3),
            };
            Document::new(format!("d{i:02}"), text, "fixture")
        })
        .collect()
}

async fn start(dir: &std::path::Path) -> (Client, tokio::sync::oneshot::Sender<()>) {
    let corpus_path = dir.join("corpus.jsonl");
    write_jsonl_file(&corpus_path, &corpus()).unwrap();
    let config = dir.join("pipeline.json");
    std::fs::write(&config, r#"{"stages": [{"operator": "filter_by_length", "params": {"min_chars": 12}}]}"#).unwrap();
    let opts = ServeOptions { corpus: Some(corpus_path), config: Some(config), port: 0, ..Default::default() };
    let state = Arc::new(AppState::load(&opts).unwrap());
    let listener = bind(&opts).await.unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    tokio::spawn(serve_on(listener, state, async {
        let _ = rx.await;
    }));
    (Client::new(&format!("http://{addr}/")).unwrap(), tx)
}

#[tokio::test]
async fn typed_calls_match_library() {
    let dir = tempfile::tempdir().unwrap();
    let (client, _stop) = start(dir.path()).await;
    let docs = corpus();

    assert_eq!(client.health().await.unwrap().status, "ok");

    let opts = StatsOptions { sample: Some(10), seed: 3, bins: 8, ..Default::default() };
    let remote = client.stats(&StatsParams { sample: Some(10), seed: Some(3), bins: Some(8) }).await.unwrap();
    assert_eq!(remote, compute_stats(&docs, Default::default(), &opts));

    let index = build_index(&docs, DEFAULT_SHARDS, Bm25Params::default()).unwrap();
    let remote = client.search("renmin university", 5).await.unwrap();
    assert_eq!(remote.hits, index.search("renmin university", 5));

    let req = SweepRequest {
        filter: "filter_by_length".into(),
        param: "min_chars".into(),
        values: vec![0.0, 10.0, 30.0, 100.0],
        sample: 25,
        seed: 9,
        params: BTreeMap::new(),
    };
    assert_eq!(client.sweep(&req).await.unwrap(), sweep_filter(&docs, &req, &Resources::new()).unwrap());

    let preview = PreviewRequest { rule: RuleSpec::remove_exact(Scope::Line, "References"), sample: 40, seed: 0, max_cases: 3 };
    let report = client.clean_preview(&preview).await.unwrap();
    assert_eq!(report.docs_matched, 10);
    assert_eq!(report.cases.len(), 3);

    assert!(client.operators().await.unwrap().iter().any(|o| o.name == "clean_text"));
}

#[tokio::test]
async fn errors_carry_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (client, _stop) = start(dir.path()).await;
    let err = client.search("x", 0).await.unwrap_err();
    assert_eq!(err.code(), Some("invalid_request"));
    let err = client.put_config("stages: [{operator: dedup_minhash}, {operator: filter_by_length}]").await.unwrap_err();
    assert_eq!(err.code(), Some("invalid_config"));
    assert_eq!(client.run_status(42).await.unwrap_err().code(), Some("run_not_found"));
    assert!(Client::new("not a url").is_err());
    let dead = Client::new("http://127.0.0.1:1").unwrap();
    assert_eq!(dead.health().await.unwrap_err().code(), None);
}

#[tokio::test]
async fn config_and_run() {
    let dir = tempfile::tempdir().unwrap();
    let (client, _stop) = start(dir.path()).await;
    let v = client.config().await.unwrap();
    assert_eq!(v.version, 0);
    let v1 = client.put_config(v.content.replace("12", "20")).await.unwrap();
    assert_eq!(v1.version, 1);
    assert!(client.config().await.unwrap().content.contains("20"));

    let out = dir.path().join("out");
    let status = client
        .run_pipeline(&RunRequest {
            config_path: None,
            input: dir.path().join("corpus.jsonl").display().to_string(),
            output: out.display().to_string(),
        })
        .await
        .unwrap();
    let mut status = status;
    for _ in 0..200 {
        if status.state != RunState::Running {
            break;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
        status = client.run_status(status.id).await.unwrap();
    }
    assert_eq!(status.state, RunState::Succeeded, "{:?}", status.error);
    let report = status.report.unwrap();
    let expected = corpus().iter().filter(|d| d.char_len() >= 20).count();
    assert_eq!(report.output_count, expected);
}
