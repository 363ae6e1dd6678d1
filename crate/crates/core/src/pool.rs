//! Fixed-size worker pools, cached per worker count so that repeated
//! frames do not pay thread start-up.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::{ThreadPool, ThreadPoolBuilder};

static POOLS: OnceLock<Mutex<HashMap<usize, Arc<ThreadPool>>>> = OnceLock::new();

/// Pool with exactly `workers` threads (at least one).
pub fn pool(workers: usize) -> Arc<ThreadPool> {
    let workers = workers.max(1);
    let mut pools = POOLS.get_or_init(Default::default).lock().unwrap();
    pools
        .entry(workers)
        .or_insert_with(|| {
            Arc::new(
                ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .thread_name(move |i| format!("lodsplat-{workers}-{i}"))
                    .build()
                    .expect("failed to start worker pool"),
            )
        })
        .clone()
}

/// Split `0..len` into `parts` contiguous ranges of near-equal size.
pub fn partition(len: usize, parts: usize) -> Vec<std::ops::Range<usize>> {
    let parts = parts.max(1);
    let base = len / parts;
    let extra = len % parts;
    let mut start = 0;
    (0..parts)
        .map(|i| {
            let end = start + base + usize::from(i < extra);
            let r = start..end;
            start = end;
            r
        })
        .collect()
}
