//! Index-ordered map over `0..len`, parallel when the `parallel` feature is on.
//!
//! Output order is always index order, so folds over the result are
//! bit-stable regardless of thread count.

/// How replicate work is scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Rayon's current pool (global, or one the caller installed). Runs
    /// sequentially when built without the `parallel` feature.
    #[default]
    Parallel,
}

pub fn map_indexed<T, F>(len: usize, execution: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..len).into_par_iter().map(f).collect()
        }
        _ => (0..len).map(f).collect(),
    }
}
