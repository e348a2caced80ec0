use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

/// Extra time granted beyond the budget before a run is abandoned.
pub const GRACE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BudgetError {
    #[error("budget must be positive, got {0} s")]
    InvalidBudget(f64),
    #[error("run exceeded its {budget} s budget (stopped after {elapsed:.2} s)")]
    BudgetExceeded { budget: f64, elapsed: f64 },
    #[error("run panicked: {0}")]
    Panicked(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timed<T> {
    pub value: T,
    pub wall_seconds: f64,
}

/// Runs `job` on its own thread and waits at most `budget * 1.1` seconds.
///
/// An overrunning job is detached and keeps its thread until it returns;
/// engines are expected to honour the budget they are given.
pub fn enforce_budget<T, F>(job: F, budget_seconds: f64) -> Result<Timed<T>, BudgetError>
where
    T: Send + 'static,
    F: FnOnce() -> T + Send + 'static,
{
    if !(budget_seconds > 0.0 && budget_seconds.is_finite()) {
        return Err(BudgetError::InvalidBudget(budget_seconds));
    }
    let limit = Duration::from_secs_f64(budget_seconds * (1.0 + GRACE_FRACTION));
    let (tx, rx) = mpsc::channel();
    let start = Instant::now();
    let handle = thread::Builder::new()
        .name("budgeted-run".into())
        .spawn(move || {
            let out = job();
            // the receiver may already have given up
            let _ = tx.send(out);
        })
        .map_err(|e| BudgetError::Panicked(e.to_string()))?;
    match rx.recv_timeout(limit) {
        Ok(value) => Ok(Timed {
            value,
            wall_seconds: start.elapsed().as_secs_f64(),
        }),
        Err(mpsc::RecvTimeoutError::Timeout) => Err(BudgetError::BudgetExceeded {
            budget: budget_seconds,
            elapsed: start.elapsed().as_secs_f64(),
        }),
        Err(mpsc::RecvTimeoutError::Disconnected) => {
            let msg = match handle.join() {
                Err(payload) => payload
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| payload.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "unknown panic".into()),
                Ok(()) => "worker exited without a result".into(),
            };
            Err(BudgetError::Panicked(msg))
        }
    }
}
