//! Batch front end: one config file drives synthesis, preprocessing, feature
//! extraction, screening, classification and report rendering.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod output;

pub use commands::{
    cmd_classify, cmd_features, cmd_preprocess, cmd_report, cmd_stats, cmd_synth, Layout, Outcome,
};
pub use config::RunConfig;

/// Invalid configuration, manifest or missing upstream output.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

pub const EXIT_OK: i32 = 0;
pub const EXIT_COMPUTE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return EXIT_CONFIG;
        }
        if let Some(sqeeg_core::Error::Config(_)) = cause.downcast_ref::<sqeeg_core::Error>() {
            return EXIT_CONFIG;
        }
    }
    EXIT_COMPUTE
}

/// Run `f` on a pool of `threads` workers (0 means one per core).
pub fn with_threads<T: Send>(
    threads: usize,
    f: impl FnOnce() -> anyhow::Result<T> + Send,
) -> anyhow::Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    pool.install(f)
}
