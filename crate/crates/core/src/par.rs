//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) work items are spread over the
//! rayon pool; without it they run in order on the calling thread. Either
//! way results come back ordered by index, so reductions over them are
//! deterministic.

/// Environment variable bounding the number of worker threads.
pub const WORKERS_ENV: &str = "JADCE_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Auto,
}

impl Execution {
    pub fn map_indexed<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Execution::Sequential => (0..n).map(f).collect(),
            Execution::Auto => map_indexed(n, f),
        }
    }
}

#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Configures the global pool from [`WORKERS_ENV`]. Returns the worker count
/// in effect. A no-op (returning 1) without the `parallel` feature.
pub fn init_workers_from_env() -> usize {
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
            if n > 0 {
                // the pool can only be built once per process
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let seq = Execution::Sequential.map_indexed(100, |i| i * i);
        let auto = Execution::Auto.map_indexed(100, |i| i * i);
        assert_eq!(seq, auto);
        assert_eq!(seq[9], 81);
    }
}
