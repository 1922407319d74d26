use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::Parser;
use planmap_service::{router, Store};

#[derive(Debug, Parser)]
#[command(name = "planmap-serve", version, about = "HTTP service for floor-plan tracing and map population")]
struct Args {
    /// Directory holding one subdirectory per project.
    #[arg(long, default_value = "planmap-data")]
    data: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
}

#[tokio::main]
async fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let store = Store::open(&args.data).map_err(|e| anyhow::anyhow!(e.message)).context("opening data directory")?;
    let listener = tokio::net::TcpListener::bind(args.addr).await.with_context(|| format!("binding {}", args.addr))?;
    log::info!("listening on {} with data in {}", args.addr, args.data.display());
    axum::serve(listener, router(Arc::new(store))).await?;
    Ok(())
}
