//! Simulated distributed-memory execution: worker groups with patch
//! ownership and coarse-problem holders, message channels, accumulated and
//! distributed vectors, collectives, and the parallel IETI-DP solve.

mod collectives;
mod comm;
mod dvector;
mod group;
mod solver;

pub use collectives::{accumulate, allgather, check_holders_agree, ddot, gather_to_holders, reduce_primal, scatter_primal, AccumulatePlan, PatchItems};
pub use comm::{Comm, MessageRecord, Payload, RecvHandle, SendHandle};
pub use dvector::{DVector, Repr};
pub use group::{contiguous_blocks, WorkerGroup};
pub use solver::{solve_distributed, DistributedSolution, MessageStats, PatchResult, RuntimeConfig, Timings};

use std::time::Duration;

/// Runs `f` on `workers` threads, each with its own [`Comm`], and returns the
/// results in rank order. Meant for exercising collectives directly.
pub fn run_group<T: Send>(workers: usize, f: impl Fn(&mut Comm) -> crate::Result<T> + Sync) -> crate::Result<Vec<T>> {
    if workers < 1 {
        return Err(crate::Error::Config("at least one worker is required".into()));
    }
    let comms = Comm::network(workers, Duration::from_secs(60));
    std::thread::scope(|s| {
        let handles: Vec<_> = comms
            .into_iter()
            .map(|mut c| {
                let f = &f;
                s.spawn(move || {
                    let alarm = c.alarm();
                    let r = f(&mut c);
                    if let Err(e) = &r {
                        alarm.abort_all(&e.to_string());
                    }
                    r
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().map_err(|_| crate::Error::Runtime("worker panicked".into()))?).collect()
    })
}
