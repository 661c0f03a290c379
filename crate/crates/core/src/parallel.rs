use log::warn;
use rayon::prelude::*;

/// Maps `f` over `items` on up to `workers` threads; output order matches input order.
pub(crate) fn map_ordered<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if workers <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(e) => {
            warn!("could not start {workers} workers ({e}); running sequentially");
            items.iter().map(f).collect()
        }
    }
}
