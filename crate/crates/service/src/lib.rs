//! HTTP service for interactive scatter/gather browsing of a clustered
//! corpus.

pub mod error;
pub mod routes;
pub mod session;
pub mod state;

use std::net::SocketAddr;

pub use error::{ApiError, ApiResult};
pub use routes::router;
pub use session::{default_config, GatherRequest, Session, SessionView};
pub use state::{AppState, ServiceConfig};

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let state = AppState::open(config).map_err(std::io::Error::other)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("scattermesh listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
