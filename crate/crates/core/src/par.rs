//! Data-parallel helpers. With the `parallel` feature the maps run on rayon;
//! otherwise, or after `set_mode(Mode::Sequential)`, they run in order on the
//! calling thread. Results are collected in input order, and every reduction
//! happens sequentially afterwards, so outputs do not depend on the mode.

use std::sync::atomic::{AtomicU8, Ordering};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Parallel,
    Sequential,
}

static MODE: AtomicU8 = AtomicU8::new(0);

pub fn set_mode(mode: Mode) {
    MODE.store(if mode == Mode::Parallel { 0 } else { 1 }, Ordering::Relaxed);
}

pub fn mode() -> Mode {
    if cfg!(feature = "parallel") && MODE.load(Ordering::Relaxed) == 0 {
        Mode::Parallel
    } else {
        Mode::Sequential
    }
}

/// `items.map(f).collect()`, possibly in parallel.
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if mode() == Mode::Parallel && items.len() > 1 {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
    }
    items.iter().map(f).collect()
}

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if mode() == Mode::Parallel && n > 1 {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// Deterministic sum of `f` over `items`: partial sums over fixed chunks,
/// added in chunk order.
pub fn sum<T, F>(items: &[T], f: F) -> f64
where
    T: Sync,
    F: Fn(&T) -> f64 + Sync + Send,
{
    const CHUNK: usize = 256;
    if items.len() <= CHUNK {
        return items.iter().map(f).sum();
    }
    let chunks: Vec<&[T]> = items.chunks(CHUNK).collect();
    map(&chunks, |c| c.iter().map(&f).sum::<f64>()).into_iter().sum()
}
