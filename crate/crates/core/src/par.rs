//! Data-parallel helpers. With the `parallel` feature the loops run on rayon; without
//! it they run sequentially. Results are always collected in index order so reductions
//! do not depend on scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// `(0..n).map(f)` collected in order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T: Send, F: Fn(usize) -> T + Sync + Send>(n: usize, f: F) -> Vec<T> {
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T: Send, F: Fn(usize) -> T + Sync + Send>(n: usize, f: F) -> Vec<T> {
    (0..n).map(f).collect()
}

/// `items.iter().map(f)` collected in order.
#[cfg(feature = "parallel")]
pub fn map_slice<S: Sync, T: Send, F: Fn(&S) -> T + Sync + Send>(items: &[S], f: F) -> Vec<T> {
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_slice<S: Sync, T: Send, F: Fn(&S) -> T + Sync + Send>(items: &[S], f: F) -> Vec<T> {
    items.iter().map(f).collect()
}

/// Run `f` with at most `jobs` worker threads (`0` = library default).
#[cfg(feature = "parallel")]
pub fn with_jobs<R: Send, F: FnOnce() -> R + Send>(jobs: usize, f: F) -> R {
    if jobs == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(f),
        Err(e) => {
            log::warn!("could not build a {jobs}-thread pool ({e}); using the global pool");
            f()
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_jobs<R: Send, F: FnOnce() -> R + Send>(_jobs: usize, f: F) -> R {
    f()
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
