//! Worker pool sized by `THINLAB_THREADS`.
//!
//! Every parallel computation in the crate derives its randomness from
//! per-item substreams, so the pool size only affects speed.

use std::sync::OnceLock;

use rayon::ThreadPool;

pub const THREADS_ENV: &str = "THINLAB_THREADS";

fn configured_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn pool() -> &'static ThreadPool {
    static POOL: OnceLock<ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(configured_threads())
            .build()
            .expect("failed to build worker pool")
    })
}

/// Run `f` inside the shared worker pool, or directly when already running
/// on a worker of some pool (so callers can choose the pool).
pub fn install<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    if rayon::current_thread_index().is_some() {
        f()
    } else {
        pool().install(f)
    }
}

pub fn threads() -> usize {
    pool().current_num_threads()
}

/// Run `f` in a dedicated pool of `threads` workers.
pub fn install_with<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .expect("failed to build worker pool")
        .install(f)
}
