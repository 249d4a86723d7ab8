//! Index-ordered fan-out over path indices.
//!
//! With the `parallel` feature, work is spread over a rayon pool; without it
//! every [`Execution`] mode runs sequentially. Results always come back in
//! index order, so downstream reductions see the same sequence regardless of
//! how many workers produced it.

/// How a batch of per-path jobs is scheduled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Global rayon pool.
    #[default]
    Parallel,
    /// Dedicated pool with a fixed worker count.
    Threads(usize),
}

impl Execution {
    pub fn from_workers(workers: Option<usize>) -> Self {
        match workers {
            None => Execution::Parallel,
            Some(0) | Some(1) => Execution::Sequential,
            Some(n) => Execution::Threads(n),
        }
    }
}

/// Evaluate `job(i)` for `i in 0..count`, returning results ordered by `i`.
pub fn map_indexed<T, F>(exec: Execution, count: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Execution::Sequential => (0..count).map(job).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..count).into_par_iter().map(job).collect()
        }
        #[cfg(feature = "parallel")]
        Execution::Threads(n) => {
            use rayon::prelude::*;
            match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                Ok(pool) => pool.install(|| (0..count).into_par_iter().map(job).collect()),
                Err(_) => (0..count).map(job).collect(),
            }
        }
        #[cfg(not(feature = "parallel"))]
        _ => (0..count).map(job).collect(),
    }
}
