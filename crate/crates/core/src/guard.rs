//! Error propagation out of deeply nested lazy evaluation, and global limits.
//!
//! Differentials and morphisms are plain closures returning combinations; a failure
//! deep inside (a diverging perturbation series, an exhausted time budget) unwinds
//! with an [`Error`] payload that [`catch`] turns back into a `Result`.

use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Once;
use std::time::{Duration, Instant};

use once_cell::sync::Lazy;

use crate::error::{Error, Result};

pub fn fail(e: Error) -> ! {
    panic::panic_any(e)
}

static HOOK: Once = Once::new();

/// Runs `f`, converting an unwinding [`Error`] into `Err`; other panics propagate.
pub fn catch<T, F: FnOnce() -> T>(f: F) -> Result<T> {
    HOOK.call_once(|| {
        let prev = panic::take_hook();
        panic::set_hook(Box::new(move |info| {
            if info.payload().downcast_ref::<Error>().is_none() {
                prev(info);
            }
        }));
    });
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(v) => Ok(v),
        Err(payload) => match payload.downcast::<Error>() {
            Ok(e) => Err(*e),
            Err(p) => panic::resume_unwind(p),
        },
    }
}

/// Extra BPL iterations allowed beyond `2 * degree`; the cap is `2 * degree + this`.
static BPL_SLACK: AtomicUsize = AtomicUsize::new(64);

pub fn set_bpl_slack(n: usize) {
    BPL_SLACK.store(n, Ordering::Relaxed);
}

pub fn bpl_cap(degree: i32) -> usize {
    2 * degree.max(0) as usize + BPL_SLACK.load(Ordering::Relaxed)
}

static START: Lazy<Instant> = Lazy::new(Instant::now);
/// Deadline in milliseconds after START; 0 disables it.
static DEADLINE_MS: AtomicU64 = AtomicU64::new(0);

pub fn set_time_budget(budget: Option<Duration>) {
    let now = START.elapsed();
    let v = budget.map_or(0, |b| (now + b).as_millis() as u64).max(if budget.is_some() { 1 } else { 0 });
    DEADLINE_MS.store(v, Ordering::Relaxed);
}

/// Fails with a resource error once the configured budget is spent.
pub fn check_budget() {
    let d = DEADLINE_MS.load(Ordering::Relaxed);
    if d != 0 && START.elapsed().as_millis() as u64 > d {
        fail(Error::Resource("time budget exhausted".into()));
    }
}
