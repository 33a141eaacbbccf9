use wst_client::{Client, ClientError};
use wst_core::config::RunConfig;
use wst_core::storage::{load_manifest, read_frame};
use wst_core::workflow;
use wst_server::AppState;

async fn spawn_server() -> Client {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(wst_server::serve(listener, AppState::new()));
    Client::new(format!("http://{addr}/"))
}

#[tokio::test]
async fn client_drives_full_workflow() {
    let client = spawn_server().await;
    assert!(!client.health().await.unwrap().model_loaded);
    let err = client.model().await.unwrap_err();
    assert_eq!(err.code(), "E_NO_MODEL");

    let dir = tempfile::tempdir().unwrap();
    let cfg =
        RunConfig::from_json(r#"{"profile":"cm40-256","k":3,"seed":2,"synth":{"classes":3,"samples_per_class":6}}"#)
            .unwrap();
    let manifest = workflow::generate(&cfg, dir.path()).unwrap().manifest;

    let summary = client.train(&manifest, &cfg).await.unwrap();
    let (local, _) = workflow::train(&cfg, &manifest).unwrap();
    assert_eq!(summary.model_digest, local.model_digest());
    assert_eq!(client.model().await.unwrap().model_digest(), local.model_digest());

    let loaded = load_manifest(&manifest).unwrap();
    for entry in loaded.manifest.entries.iter().step_by(5) {
        let frame = read_frame(loaded.frame_path(entry)).unwrap();
        let remote = client.classify_frame(&frame).await.unwrap();
        let (want, _) = local
            .classify_frame(&frame, &workflow::transform_for(&local.filter_config).unwrap())
            .unwrap();
        assert_eq!(remote.decision, want);
    }
    assert_eq!(client.timing().await.unwrap().len(), 4);

    let report = client.evaluate(&manifest, &cfg).await.unwrap();
    assert_eq!(report, workflow::evaluate(&cfg, &manifest).unwrap());
    let stats = client.confusion_stats(&[vec![9, 1], vec![6, 4]]).await.unwrap();
    assert!((stats.diag_mean - 65.0).abs() < 1e-12);

    match client.evaluate(&dir.path().join("missing.json"), &cfg).await {
        Err(ClientError::Api { status, code, .. }) => {
            assert_eq!(status, 404);
            assert_eq!(code, "E_IO");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[tokio::test]
async fn unreachable_server_is_transport_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let err = Client::new(format!("http://{addr}")).health().await.unwrap_err();
    assert_eq!(err.code(), "E_TRANSPORT");
}
