//! HTTP/JSON service over the analysis and pipeline operations.
//!
//! Loaded artifacts (index, corpus, stats, models) are immutable shared
//! state. The only mutable state is the config version history and the
//! registry of pipeline runs, which execute one at a time.

mod error;
mod routes;
mod state;

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::Router;
use tokio::net::TcpListener;
use tower_http::cors::{Any, CorsLayer};

pub use error::ApiError;
pub use routes::DEFAULT_TOPK;
pub use state::{versioned_path, AppState, Artifacts, ServeOptions, StartupError};

pub const PORT_ENV: &str = "GARDEN_PORT";

pub fn router(state: Arc<AppState>) -> Router {
    let cors = CorsLayer::new().allow_origin(Any).allow_methods(Any).allow_headers(Any);
    routes::routes().layer(cors).with_state(state)
}

/// The port to listen on: `GARDEN_PORT` if set and valid, else the option.
pub fn effective_port(opts: &ServeOptions) -> u16 {
    std::env::var(PORT_ENV).ok().and_then(|p| p.trim().parse().ok()).unwrap_or(opts.port)
}

pub async fn bind(opts: &ServeOptions) -> Result<TcpListener, StartupError> {
    let addr = SocketAddr::new(opts.host, effective_port(opts));
    TcpListener::bind(addr).await.map_err(|source| StartupError::Bind { addr: addr.to_string(), source })
}

/// Serve until `shutdown` resolves; in-flight requests are allowed to finish.
pub async fn serve_on(
    listener: TcpListener,
    state: Arc<AppState>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
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
        _ = ctrl_c => {},
        _ = term => {},
    }
    tracing::info!("shutting down");
}
