use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::Parser;
use crowdgaze::session::ExperimentParams;
use crowdgaze_service::app::system_clock;
use crowdgaze_service::{http, JsonlStore, Platform, PlatformConfig};
use tracing_subscriber::EnvFilter;

/// Gaze collection server. Default experiment parameters apply to campaigns that omit them.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    #[arg(long, env = "CROWDGAZE_LISTEN", default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    /// Directory holding events.jsonl and snapshot.json.
    #[arg(long, env = "CROWDGAZE_DATA_DIR", default_value = "data")]
    data_dir: PathBuf,
    /// Root seed for sessions created without an explicit seed.
    #[arg(long, env = "CROWDGAZE_SEED", default_value_t = 0)]
    seed: u64,
    /// Idle time after which a session is marked abandoned; 0 disables.
    #[arg(long, env = "CROWDGAZE_ABANDON_AFTER_SECS", default_value_t = 1800)]
    abandon_after_secs: u64,
    /// Events between snapshots; 0 disables.
    #[arg(long, env = "CROWDGAZE_SNAPSHOT_EVERY", default_value_t = 1000)]
    snapshot_every: u64,
    /// Clip length t_v before the frame of interest, seconds.
    #[arg(long, env = "CROWDGAZE_T_V", default_value_t = 10.0)]
    t_v: f64,
    /// Chart display time t_c, seconds.
    #[arg(long, env = "CROWDGAZE_T_C", default_value_t = 1.0)]
    t_c: f64,
    /// Tutorial animation length t_t, seconds.
    #[arg(long, env = "CROWDGAZE_T_T", default_value_t = 3.0)]
    t_t: f64,
    /// Font size f_s, pixels.
    #[arg(long, env = "CROWDGAZE_F_S", default_value_t = 20.0)]
    f_s: f64,
    /// Approval radius R_a, pixels.
    #[arg(long, env = "CROWDGAZE_R_A", default_value_t = 100.0)]
    r_a: f64,
    /// Relative triplet density D_r.
    #[arg(long, env = "CROWDGAZE_D_R", default_value_t = 0.5)]
    d_r: f64,
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let args = Args::parse();
    let default_params = ExperimentParams {
        t_v: args.t_v,
        t_c: args.t_c,
        t_t: args.t_t,
        f_s: args.f_s,
        r_a: args.r_a,
        d_r: args.d_r,
        ..ExperimentParams::default()
    };
    if let Some((field, reason)) = default_params.problems().first() {
        return Err(format!("{field}: {reason}").into());
    }
    let config = PlatformConfig {
        server_seed: args.seed,
        abandon_after: (args.abandon_after_secs > 0)
            .then(|| chrono::Duration::seconds(args.abandon_after_secs as i64)),
        snapshot_every: args.snapshot_every,
        default_params,
    };
    let store = JsonlStore::open(&args.data_dir)?;
    let platform = Arc::new(Platform::open(Box::new(store), config, system_clock())?);

    if args.abandon_after_secs > 0 {
        let sweeper = platform.clone();
        let period = Duration::from_secs((args.abandon_after_secs / 4).max(1));
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(period);
            loop {
                tick.tick().await;
                match sweeper.expire_idle() {
                    Ok(ids) if !ids.is_empty() => tracing::info!(count = ids.len(), "sessions abandoned"),
                    Ok(_) => {}
                    Err(e) => tracing::error!("expiry sweep failed: {e}"),
                }
            }
        });
    }

    let listener = tokio::net::TcpListener::bind(args.listen).await?;
    tracing::info!("listening on {}", args.listen);
    axum::serve(listener, http::router(platform))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
