//! Optional data parallelism for the embarrassingly parallel parts of the grid
//! (cells on one wavefront, anchored gradients inside one chunk).
//!
//! Results never depend on the thread count: parallel work only produces
//! independent per-cell values, which are then combined in a fixed order.

use rayon::prelude::*;

pub const THREADS_ENV: &str = "HYDRA_THREADS";

#[derive(Default)]
pub struct Parallelism {
    pool: Option<rayon::ThreadPool>,
}

impl std::fmt::Debug for Parallelism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Parallelism({} threads)", self.threads())
    }
}

impl Parallelism {
    pub fn sequential() -> Self {
        Self { pool: None }
    }

    /// `0` means sequential. Falls back to sequential if the pool cannot be built.
    pub fn with_threads(threads: usize) -> Self {
        if threads == 0 {
            return Self::sequential();
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .ok();
        Self { pool }
    }

    /// Reads `HYDRA_THREADS`; unset or unparsable means sequential.
    pub fn from_env() -> Self {
        Self::with_threads(threads_from_env())
    }

    pub fn threads(&self) -> usize {
        self.pool
            .as_ref()
            .map_or(0, rayon::ThreadPool::current_num_threads)
    }

    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match &self.pool {
            Some(pool) if items.len() > 1 => pool.install(|| items.par_iter().map(&f).collect()),
            _ => items.iter().map(f).collect(),
        }
    }
}

pub fn threads_from_env() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(0)
}
