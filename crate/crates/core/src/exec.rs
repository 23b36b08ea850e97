//! Execution strategy for independent work items.
//!
//! Results are always collected in input order, so the choice of mode never
//! changes any output.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecMode {
    Sequential,
    #[default]
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Executor {
    pub mode: ExecMode,
    /// Worker count for the parallel mode; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Executor {
    pub const fn sequential() -> Self {
        Self {
            mode: ExecMode::Sequential,
            workers: None,
        }
    }

    pub const fn parallel(workers: Option<usize>) -> Self {
        Self {
            mode: ExecMode::Parallel,
            workers,
        }
    }

    /// True when work will actually run on more than one thread.
    pub fn is_parallel(&self) -> bool {
        cfg!(feature = "parallel") && self.mode == ExecMode::Parallel && self.workers != Some(1)
    }

    /// `items.iter().map(f).collect()`, possibly in parallel.
    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        if !self.is_parallel() {
            return items.iter().map(f).collect();
        }
        self.map_parallel(items, f)
    }

    #[cfg(feature = "parallel")]
    fn map_parallel<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        use rayon::prelude::*;
        match self.workers {
            Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
                Err(_) => items.iter().map(f).collect(),
            },
            None => items.par_iter().map(f).collect(),
        }
    }

    #[cfg(not(feature = "parallel"))]
    fn map_parallel<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        items.iter().map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_preserve_order() {
        let xs: Vec<u64> = (0..1000).collect();
        let f = |x: &u64| x.wrapping_mul(2_654_435_761) % 97;
        let a = Executor::sequential().map(&xs, f);
        let b = Executor::parallel(None).map(&xs, f);
        let c = Executor::parallel(Some(3)).map(&xs, f);
        assert_eq!(a, b);
        assert_eq!(a, c);
    }
}
