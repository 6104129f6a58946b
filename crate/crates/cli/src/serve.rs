use std::path::{Path, PathBuf};
use std::sync::Arc;

use blockbot_core::auth::SystemClock;
use blockbot_core::command::ExpressionRegistry;
use blockbot_core::service::{QueueService, ServiceSettings};
use blockbot_core::store::FileBackend;
use blockbot_server::api::{router, AppState};
use serde_json::json;

use crate::config::FileConfig;
use crate::exit::Failure;
use crate::output::Output;
use crate::ServeArgs;

pub const DEFAULT_BIND: &str = "127.0.0.1:8700";

fn prepare_data_dir(dir: &Path) -> Result<(), Failure> {
    if dir.is_dir() {
        return Ok(());
    }
    let parent = match dir.parent() {
        Some(p) if p.as_os_str().is_empty() => Path::new("."),
        Some(p) => p,
        None => Path::new("/"),
    };
    if !parent.is_dir() {
        return Err(Failure::Usage(format!(
            "data directory {} cannot be created: {} does not exist",
            dir.display(),
            parent.display()
        )));
    }
    std::fs::create_dir(dir)
        .map_err(|e| Failure::Usage(format!("cannot create data directory {}: {e}", dir.display())))
}

/// Resolves on Ctrl-C or SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}

pub async fn run(args: ServeArgs, file: &FileConfig, out: &Output) -> Result<(), Failure> {
    let f = &file.serve;
    let bind = args.bind.or_else(|| f.bind.clone()).unwrap_or_else(|| DEFAULT_BIND.to_owned());
    let data = args.data.or_else(|| f.data.clone()).unwrap_or_else(|| PathBuf::from("./data"));
    if !bind.rsplit_once(':').is_some_and(|(_, p)| p.parse::<u16>().is_ok()) {
        return Err(Failure::Usage(format!("--bind expects host:port, got `{bind}`")));
    }
    let console = args.console.or_else(|| f.console.clone());
    if let Some(dir) = &console {
        if !dir.is_dir() {
            return Err(Failure::Usage(format!("console directory {} does not exist", dir.display())));
        }
    }
    let mut settings = ServiceSettings::default();
    if let Some(ttl) = args.session_ttl_ms.or(f.session_ttl_ms) {
        settings.session_ttl_ms = ttl;
    }
    if let Some(p) = f.password_hash {
        settings.password_hash = p;
    }
    let fsync = !args.no_fsync && f.fsync.unwrap_or(true);

    prepare_data_dir(&data)?;
    let backend = FileBackend::open(&data, fsync)
        .map_err(|e| Failure::Usage(format!("data directory {}: {e}", data.display())))?;
    let svc = QueueService::open(
        Arc::new(backend),
        Arc::new(SystemClock),
        settings,
        ExpressionRegistry::standard().clone(),
    )
    .map_err(|e| Failure::Internal(format!("cannot open service state: {e}")))?;

    let listener = blockbot_server::bind(&bind).await.map_err(|e| {
        let port = e.port.map(|p| format!("port {p}")).unwrap_or_else(|| "the port".into());
        Failure::Bind(format!("cannot listen on {} ({port} unavailable): {}", e.addr, e.source))
    })?;
    let addr = listener.local_addr().map_err(|e| Failure::Internal(e.to_string()))?;
    let app = router(AppState::new(Arc::new(svc)), console);
    tracing::info!(%addr, data = %data.display(), "queue service listening");
    out.record(&format!("listening http://{addr}"), json!({ "event": "listening", "url": format!("http://{addr}") }));

    blockbot_server::serve(listener, app, shutdown_signal())
        .await
        .map_err(|e| Failure::Internal(format!("server error: {e}")))?;
    tracing::info!("shut down");
    Ok(())
}
