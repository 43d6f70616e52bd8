//! Data-parallel map helpers with a sequential fallback.
//!
//! Output order always matches input order, so results do not depend on the
//! worker count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How a batch operation schedules its per-item work.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Runs on the current rayon pool. Falls back to sequential when the
    /// crate is built without the `parallel` feature.
    #[default]
    Parallel,
}

impl Execution {
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }

    pub fn from_jobs(jobs: usize) -> Self {
        if jobs == 1 {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

pub fn map<T, U, F>(items: &[T], exec: Execution, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => items.par_iter().map(f).collect(),
        _ => items.iter().map(f).collect(),
    }
}

/// Like [`map`] but stops at an error. With parallel execution the reported
/// error is the one with the lowest index among those observed.
pub fn try_map<T, U, E, F>(items: &[T], exec: Execution, f: F) -> Result<Vec<U>, E>
where
    T: Sync,
    U: Send,
    E: Send,
    F: Fn(&T) -> Result<U, E> + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => items.par_iter().map(f).collect(),
        _ => items.iter().map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let items: Vec<u32> = (0..1000).collect();
        let seq = map(&items, Execution::Sequential, |x| x * 3);
        let par = map(&items, Execution::Parallel, |x| x * 3);
        assert_eq!(seq, par);
        assert_eq!(seq[10], 30);
    }

    #[test]
    fn try_map_reports_error() {
        let items: Vec<i32> = vec![1, 2, -3, 4];
        let out: Result<Vec<i32>, String> = try_map(&items, Execution::Parallel, |&x| {
            if x < 0 {
                Err(format!("negative {x}"))
            } else {
                Ok(x)
            }
        });
        assert_eq!(out.unwrap_err(), "negative -3");
    }

    #[test]
    fn jobs_one_is_sequential() {
        assert_eq!(Execution::from_jobs(1), Execution::Sequential);
        assert_eq!(Execution::from_jobs(0), Execution::Parallel);
    }
}
