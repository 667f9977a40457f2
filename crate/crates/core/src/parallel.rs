//! Data-parallel map helpers.
//!
//! With the `parallel` feature (the default) these fan out over rayon; the
//! mapped values come back in input order, so downstream pairwise reductions
//! are deterministic regardless of thread count. Without the feature both
//! entry points run sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, in parallel when the feature is enabled.
pub fn par_map<I, O, F>(items: &[I], f: F) -> Vec<O>
where
    I: Sync,
    O: Send,
    F: Fn(&I) -> O + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Always-sequential map, kept for determinism tests and benchmarks.
pub fn seq_map<I, O, F>(items: &[I], f: F) -> Vec<O>
where
    F: Fn(&I) -> O,
{
    items.iter().map(f).collect()
}

/// Execution mode selector for code paths that expose both variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    #[default]
    Parallel,
    Sequential,
}

pub fn map_with<I, O, F>(mode: ExecMode, items: &[I], f: F) -> Vec<O>
where
    I: Sync,
    O: Send,
    F: Fn(&I) -> O + Sync + Send,
{
    match mode {
        ExecMode::Parallel => par_map(items, f),
        ExecMode::Sequential => seq_map(items, f),
    }
}

/// Configure the global thread pool. Returns false when the pool was already
/// initialized (or the crate was built without the `parallel` feature).
pub fn configure_threads(n: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
        false
    }
}
