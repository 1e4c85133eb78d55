//! Data-parallel helpers with a sequential fallback. Results are collected in
//! input order, so the policy never changes the numbers produced.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecPolicy {
    Parallel,
    Sequential,
}

impl Default for ExecPolicy {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            ExecPolicy::Parallel
        } else {
            ExecPolicy::Sequential
        }
    }
}

/// Sizes the global worker pool. Without the `parallel` feature only `1` is accepted.
pub fn set_threads(n: usize) -> Result<(), String> {
    if n == 0 {
        return Err("thread count must be positive".into());
    }
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
    }
    #[cfg(not(feature = "parallel"))]
    {
        if n == 1 {
            Ok(())
        } else {
            Err("built without the parallel feature; only one thread is available".into())
        }
    }
}

/// Applies `f` to every element in place.
pub fn for_each_mut<T, F>(policy: ExecPolicy, items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    match policy {
        #[cfg(feature = "parallel")]
        ExecPolicy::Parallel => {
            use rayon::prelude::*;
            items.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
        }
        _ => items.iter_mut().enumerate().for_each(|(i, x)| f(i, x)),
    }
}

/// Maps `f` over `0..n`, preserving order.
pub fn map_range<R, F>(policy: ExecPolicy, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    match policy {
        #[cfg(feature = "parallel")]
        ExecPolicy::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Runs two closures, concurrently under the parallel policy.
pub fn join<A, B, RA, RB>(policy: ExecPolicy, a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    match policy {
        #[cfg(feature = "parallel")]
        ExecPolicy::Parallel => rayon::join(a, b),
        _ => (a(), b()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree() {
        let f = |i: usize| (i as f64).sqrt().sin();
        assert_eq!(map_range(ExecPolicy::Parallel, 100, f), map_range(ExecPolicy::Sequential, 100, f));
        let mut a = vec![1.0; 10];
        for_each_mut(ExecPolicy::Parallel, &mut a, |i, x| *x += i as f64);
        assert_eq!(a[9], 10.0);
    }
}
