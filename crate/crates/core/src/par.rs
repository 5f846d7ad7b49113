//! Data-parallel dispatch with a sequential fallback.
//!
//! Every parallel kernel in the crate partitions its output into disjoint
//! chunks and computes each chunk with a fixed sequential reduction order,
//! so the parallel and sequential paths produce bit-identical results.
//! Without the `parallel` feature everything runs on the calling thread.

use std::sync::atomic::{AtomicBool, Ordering};

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Minimum number of inner operations before a kernel fans out.
pub(crate) const MIN_PARALLEL_WORK: usize = 1 << 15;

/// Execution mode used by the data-parallel kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    Parallel,
}

/// Select the execution mode process-wide. `Parallel` is a no-op request
/// when the crate is built without the `parallel` feature.
pub fn set_exec_mode(mode: ExecMode) {
    FORCE_SEQUENTIAL.store(mode == ExecMode::Sequential, Ordering::Relaxed);
}

pub fn exec_mode() -> ExecMode {
    if cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::Relaxed) {
        ExecMode::Parallel
    } else {
        ExecMode::Sequential
    }
}

fn go_parallel(work: usize) -> bool {
    work >= MIN_PARALLEL_WORK && exec_mode() == ExecMode::Parallel
}

/// Apply `f(index, chunk)` to consecutive `chunk_len`-sized chunks of `out`.
pub(crate) fn for_each_chunk<F>(out: &mut [f64], chunk_len: usize, work: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if chunk_len == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    if go_parallel(work) {
        use rayon::prelude::*;
        out.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    let _ = work;
    out.chunks_mut(chunk_len)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
}

/// Map `f` over `0..n`, collecting results in index order.
pub fn map_indices<T, F>(n: usize, work_per_item: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if n > 1 && go_parallel(n.saturating_mul(work_per_item)) {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = work_per_item;
    (0..n).map(f).collect()
}
