use rayon::prelude::*;

use latentsig_core::trainkit::{Clock, ShardExecutor, ShardResult};

/// Runs shards on a private rayon pool. Results come back in shard order,
/// so training output does not depend on the thread count.
pub struct RayonExecutor {
    pool: rayon::ThreadPool,
}

impl RayonExecutor {
    pub fn new(threads: usize) -> anyhow::Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
        Ok(Self { pool })
    }
}

impl ShardExecutor for RayonExecutor {
    fn run(&self, n: usize, job: &(dyn Fn(usize) -> ShardResult + Sync)) -> Vec<ShardResult> {
        self.pool.install(|| (0..n).into_par_iter().map(job).collect())
    }
}

/// Milliseconds since construction.
pub struct WallClock(std::time::Instant);

impl WallClock {
    pub fn new() -> Self {
        Self(std::time::Instant::now())
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now_ms(&self) -> u64 {
        self.0.elapsed().as_millis() as u64
    }
}
