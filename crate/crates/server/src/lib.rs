//! Network side of blockbot: the queue service HTTP API, its client, and
//! the robot executor that drains a queue.

pub mod api;
pub mod client;
pub mod executor;
pub mod telemetry;
pub mod watch;

use std::future::Future;
use std::net::SocketAddr;

use axum::Router;
use tokio::net::TcpListener;

#[derive(Debug, thiserror::Error)]
#[error("cannot bind {addr}: {source}")]
pub struct BindError {
    pub addr: String,
    pub port: Option<u16>,
    #[source]
    pub source: std::io::Error,
}

pub async fn bind(addr: &str) -> Result<TcpListener, BindError> {
    let port = addr.rsplit(':').next().and_then(|p| p.parse().ok());
    TcpListener::bind(addr).await.map_err(|source| BindError { addr: addr.to_owned(), port, source })
}

/// Serves `app` until `shutdown` resolves, then drains in-flight requests.
pub async fn serve(
    listener: TcpListener,
    app: Router,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, app.into_make_service_with_connect_info::<SocketAddr>())
        .with_graceful_shutdown(shutdown)
        .await
}
