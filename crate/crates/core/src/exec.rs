//! Data-parallel map over trial or grid indices.
//!
//! Results are always collected in index order, so every reduction done on
//! them is bit-identical between [`Execution::Parallel`] and
//! [`Execution::Sequential`]. Without the `parallel` feature the parallel mode
//! runs sequentially.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether work is actually spread over threads in this build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Evaluates `f(0), …, f(count - 1)` and returns the results in order.
    pub fn map_indexed<T, F>(self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            use rayon::prelude::*;
            return (0..count).into_par_iter().map(f).collect();
        }
        (0..count).map(f).collect()
    }

    /// Like [`Execution::map_indexed`] over a slice of inputs.
    pub fn map_slice<I, T, F>(self, items: &[I], f: F) -> Vec<T>
    where
        I: Sync,
        T: Send,
        F: Fn(&I) -> T + Sync + Send,
    {
        self.map_indexed(items.len(), |i| f(&items[i]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_preserve_order() {
        let seq = Execution::Sequential.map_indexed(1000, |i| (i as f64).sqrt());
        let par = Execution::Parallel.map_indexed(1000, |i| (i as f64).sqrt());
        assert_eq!(seq, par);
        assert_eq!(seq[9], 3.0);
    }
}
