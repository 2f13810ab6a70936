//! Library surface of the `llc-lab` command-line harness; the integration
//! and acceptance suites call these entry points directly.

pub mod commands;
pub mod config;
pub mod plot;
pub mod report;

/// Cap the global worker pool from the LLC_LAB_THREADS environment
/// variable. Call once at startup; later calls are ignored.
pub fn init_thread_pool() {
    if let Ok(v) = std::env::var("LLC_LAB_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}
