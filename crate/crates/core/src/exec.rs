//! Deterministic execution helpers: data-parallel maps with a sequential
//! fallback.
//!
//! Parallelism in this crate only ever takes the form *independent map,
//! order-preserving collect, sequential reduce*. Each mapped item is
//! computed by the same single-threaded code in either mode, and
//! reductions always run sequentially in index order — so parallel and
//! sequential execution produce bit-identical results, and the `parallel`
//! cargo feature (or [`with_sequential`]) only changes wall-clock time.

use std::cell::Cell;
use std::sync::atomic::{AtomicUsize, Ordering};

/// Requested thread budget; 0 means "library default".
static THREAD_BUDGET: AtomicUsize = AtomicUsize::new(0);

thread_local! {
    static FORCE_SEQUENTIAL: Cell<bool> = const { Cell::new(false) };
}

/// Set the global thread budget. `1` forces sequential execution
/// everywhere; `0` restores the default. With the `parallel` feature,
/// values above 1 size the rayon global pool — effective only before its
/// first use (first caller wins; later calls still update the budget used
/// by [`sequential_mode`]).
pub fn set_threads(n: usize) {
    THREAD_BUDGET.store(n, Ordering::Relaxed);
    #[cfg(feature = "parallel")]
    if n > 1 {
        // Ignore the error: the global pool can only be built once.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Current thread budget (0 = default).
pub fn threads() -> usize {
    THREAD_BUDGET.load(Ordering::Relaxed)
}

/// True if maps should run sequentially on this thread.
pub fn sequential_mode() -> bool {
    if cfg!(not(feature = "parallel")) {
        return true;
    }
    if THREAD_BUDGET.load(Ordering::Relaxed) == 1 {
        return true;
    }
    FORCE_SEQUENTIAL.with(|f| f.get())
}

/// Run `f` with parallel maps disabled on the current thread. Used by the
/// benchmark suite to compare modes, and by tests asserting bit-equality.
pub fn with_sequential<R>(f: impl FnOnce() -> R) -> R {
    FORCE_SEQUENTIAL.with(|flag| {
        let prev = flag.get();
        flag.set(true);
        let out = f();
        flag.set(prev);
        out
    })
}

/// Map `f` over `0..n`, preserving index order in the result.
pub fn map_indices<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if !sequential_mode() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// Map `f` over a slice, preserving element order in the result.
pub fn map_slice<T, U, F>(xs: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if !sequential_mode() {
            use rayon::prelude::*;
            return xs.par_iter().map(f).collect();
        }
    }
    xs.iter().map(f).collect()
}
