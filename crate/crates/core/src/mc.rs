//! Trial-indexed random substreams and deterministic parallel aggregation.
//!
//! Every trial draws from its own ChaCha8 stream: the master seed fixes the
//! key and the trial index is the 64-bit stream id. A trial therefore sees
//! the same numbers no matter which worker runs it, and success counts are
//! identical for any worker count.

use std::num::NonZeroUsize;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Per-trial generator.
pub type TrialRng = ChaCha8Rng;

/// Builds the generator for one trial of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Empirical accuracy estimate with a Wald 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub trials: u64,
    pub successes: u64,
    pub accuracy: f64,
    pub ci_halfwidth_95: f64,
    pub seed: u64,
}

impl SimResult {
    pub fn from_counts(trials: u64, successes: u64, seed: u64) -> Self {
        assert!(trials > 0 && successes <= trials);
        let accuracy = successes as f64 / trials as f64;
        Self {
            trials,
            successes,
            accuracy,
            ci_halfwidth_95: 1.96 * (accuracy * (1.0 - accuracy) / trials as f64).sqrt(),
            seed,
        }
    }

    /// Standard error of the estimator at the observed accuracy.
    pub fn std_error(&self) -> f64 {
        (self.accuracy * (1.0 - self.accuracy) / self.trials as f64).sqrt()
    }
}

/// Worker count used when the caller does not pin one.
pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(NonZeroUsize::get).unwrap_or(1)
}

/// Runs `trials` independent trials split over `workers` threads.
///
/// `make_state` builds per-worker scratch space; `trial` returns whether the
/// trial was a success.
pub fn run_trials<S, M, F>(trials: u64, seed: u64, workers: usize, make_state: M, trial: F) -> SimResult
where
    M: Fn() -> S + Sync,
    F: Fn(&mut S, &mut TrialRng) -> bool + Sync,
{
    let workers = (workers.max(1) as u64).min(trials.max(1));
    let base = ChaCha8Rng::seed_from_u64(seed);
    let count_range = |start: u64, end: u64| -> u64 {
        let mut state = make_state();
        let mut hits = 0;
        for t in start..end {
            let mut rng = base.clone();
            rng.set_stream(t);
            if trial(&mut state, &mut rng) {
                hits += 1;
            }
        }
        hits
    };

    let successes = if workers == 1 {
        count_range(0, trials)
    } else {
        let chunk = trials.div_ceil(workers);
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let start = (w * chunk).min(trials);
                    let end = ((w + 1) * chunk).min(trials);
                    let count_range = &count_range;
                    scope.spawn(move || count_range(start, end))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("trial worker panicked")).sum()
        })
    };
    SimResult::from_counts(trials, successes, seed)
}
