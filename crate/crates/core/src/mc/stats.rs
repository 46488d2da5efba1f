use rayon::prelude::*;

/// Mean and variance accumulator with an order-sensitive but deterministic merge.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &RunningStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let total = self.count + other.count;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / total as f64;
        self.m2 += other.m2 + delta * delta * (self.count as f64 * other.count as f64 / total as f64);
        self.count = total;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance (0 for fewer than two samples).
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_err(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

const CHUNK: u64 = 512;

/// Runs `body` over path indices `0..trials` in fixed chunks and merges the
/// chunk accumulators in index order.
pub(crate) fn chunked_reduce<T, I, B, M>(trials: u64, init: I, body: B, merge: M) -> crate::Result<T>
where
    T: Send,
    I: Fn() -> T + Sync,
    B: Fn(&mut T, u64) -> crate::Result<()> + Sync,
    M: Fn(&mut T, T),
{
    let chunks = trials.div_ceil(CHUNK);
    let parts: Vec<T> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut acc = init();
            for path in chunk * CHUNK..((chunk + 1) * CHUNK).min(trials) {
                body(&mut acc, path)?;
            }
            Ok(acc)
        })
        .collect::<crate::Result<_>>()?;
    let mut total = init();
    for part in parts {
        merge(&mut total, part);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_matches_single_pass() {
        let data: Vec<f64> = (0..1000).map(|k| ((k * 37) % 101) as f64 * 0.1 - 3.0).collect();
        let mut whole = RunningStats::default();
        data.iter().for_each(|&x| whole.push(x));
        let mut left = RunningStats::default();
        let mut right = RunningStats::default();
        data[..313].iter().for_each(|&x| left.push(x));
        data[313..].iter().for_each(|&x| right.push(x));
        left.merge(&right);
        assert_eq!(left.count(), 1000);
        assert!((left.mean() - whole.mean()).abs() < 1e-12);
        assert!((left.variance() - whole.variance()).abs() < 1e-10);
    }

    #[test]
    fn chunked_reduce_is_thread_count_invariant() {
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
                chunked_reduce(
                    10_000,
                    RunningStats::default,
                    |acc, path| {
                        acc.push((path as f64).sin());
                        Ok(())
                    },
                    |a, b| a.merge(&b),
                )
                .unwrap()
            })
        };
        assert_eq!(run(1), run(7));
    }
}
