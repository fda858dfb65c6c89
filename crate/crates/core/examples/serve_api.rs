//! Serve the HTTP API on 127.0.0.1:8080 until Ctrl-C.
//!
//! ```text
//! curl localhost:8080/api/years
//! curl -X POST localhost:8080/api/generate -d '{"year": 2004, "rng_seed": 1}'
//! ```

use tempered::service::{serve, AppState};

#[path = "common/mod.rs"]
mod common;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let state = AppState::new(Some(common::data()?), Some(common::model()?));
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(serve(state, None, "127.0.0.1:8080"))?;
    Ok(())
}
