//! Deterministic parallel trial driver.
//!
//! Trials are cut into fixed-size batches. Each batch folds its trials into a
//! fresh accumulator, and the batch results are merged in batch order, so the
//! output depends only on the trial count and never on the worker count or
//! on how rayon schedules the batches.

use rayon::prelude::*;

/// Trials per batch. Part of the reproducibility contract: changing it
/// changes the floating-point merge order.
pub const BATCH_SIZE: u64 = 1024;

pub fn run_batched<A, Make, Trial, Merge>(trials: u64, make: Make, trial: Trial, merge: Merge) -> A
where
    A: Send,
    Make: Fn() -> A + Sync,
    Trial: Fn(&mut A, u64) + Sync,
    Merge: Fn(&mut A, A),
{
    let batches = trials.div_ceil(BATCH_SIZE);
    let partials: Vec<A> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut acc = make();
            let end = ((b + 1) * BATCH_SIZE).min(trials);
            for t in b * BATCH_SIZE..end {
                trial(&mut acc, t);
            }
            acc
        })
        .collect();
    let mut total = make();
    for p in partials {
        merge(&mut total, p);
    }
    total
}

/// Runs `f` on a dedicated pool with `threads` workers, or on the global
/// pool when `threads` is `None`.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("failed to build thread pool")
            .install(f),
        None => f(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independent_of_thread_count() {
        let sum = |threads| {
            with_threads(Some(threads), || {
                run_batched(
                    10_000,
                    || 0.0f64,
                    |acc, t| *acc += (t as f64).sqrt().sin(),
                    |a, b| *a += b,
                )
            })
        };
        let one = sum(1);
        assert_eq!(one.to_bits(), sum(4).to_bits());
        assert_eq!(one.to_bits(), sum(7).to_bits());
    }

    #[test]
    fn covers_every_trial_once() {
        let seen = run_batched(
            3000,
            Vec::new,
            |acc: &mut Vec<u64>, t| acc.push(t),
            |a, b| a.extend(b),
        );
        assert_eq!(seen, (0..3000).collect::<Vec<_>>());
    }
}
