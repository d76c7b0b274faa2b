//! Execution policy for embarrassingly parallel per-node / per-element work.
//!
//! Every parallel map preserves index order, and all reductions are done
//! sequentially afterwards, so results are bit-identical between policies
//! and thread counts.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Sequential,
    Parallel,
}

impl Default for Policy {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Policy::Parallel
        } else {
            Policy::Sequential
        }
    }
}

impl Policy {
    /// `(0..len).map(f).collect()`, possibly on the rayon pool.
    ///
    /// Without the `parallel` feature this always runs sequentially.
    pub fn map<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Policy::Parallel => {
                use rayon::prelude::*;
                (0..len).into_par_iter().map(f).collect()
            }
            _ => (0..len).map(f).collect(),
        }
    }

    /// Fallible variant of [`Policy::map`]; the error reported is the one at
    /// the lowest index.
    pub fn try_map<T, E, F>(self, len: usize, f: F) -> Result<Vec<T>, E>
    where
        T: Send,
        E: Send,
        F: Fn(usize) -> Result<T, E> + Sync + Send,
    {
        self.map(len, f).into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree() {
        let f = |i: usize| (i as f64).sin() * 1e-3 + (i as f64).sqrt();
        let a = Policy::Sequential.map(1000, f);
        let b = Policy::Parallel.map(1000, f);
        assert_eq!(a, b);
    }

    #[test]
    fn try_map_reports_first_error() {
        let r: Result<Vec<usize>, usize> = Policy::Parallel.try_map(100, |i| if i % 7 == 3 { Err(i) } else { Ok(i) });
        assert_eq!(r, Err(3));
    }
}
