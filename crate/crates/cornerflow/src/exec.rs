//! Data-parallel map over independent evaluations, with a sequential path.
//!
//! Every result depends only on its own input, so both paths produce
//! bitwise identical output regardless of thread count.

use crate::error::Result;

/// How batch evaluations are scheduled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    /// Uses the rayon thread pool when the `parallel` feature is enabled and
    /// falls back to sequential execution otherwise.
    Parallel,
}

impl Default for ExecMode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            ExecMode::Parallel
        } else {
            ExecMode::Sequential
        }
    }
}

/// `items.iter().map(f).collect()` under the chosen schedule.
pub fn map<T, R, F>(mode: ExecMode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Fallible [`map`]; the first error in input order is returned.
pub fn try_map<T, R, F>(mode: ExecMode, items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    map(mode, items, f).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn both_modes_agree() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64 * 0.37).collect();
        let f = |x: &f64| x.sin() * x.exp().ln_1p();
        assert_eq!(
            map(ExecMode::Sequential, &xs, f),
            map(ExecMode::Parallel, &xs, f)
        );
    }

    #[test]
    fn first_error_in_order_wins() {
        let xs = [1, 2, 3, 4];
        let r = try_map(ExecMode::Parallel, &xs, |&i| {
            if i >= 2 {
                Err(Error::TooFewPoints(i))
            } else {
                Ok(i)
            }
        });
        assert_eq!(r, Err(Error::TooFewPoints(2)));
    }
}
