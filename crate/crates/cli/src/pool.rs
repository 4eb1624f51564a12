//! A tiny worker pool for parameter sweeps and convergence levels.
//!
//! Jobs are independent closures; results come back in submission order, so
//! callers stay deterministic regardless of the thread count. The pool size
//! is capped by the `OUTWAVE_THREADS` environment variable when set.

/// Effective worker cap: `OUTWAVE_THREADS` if set and positive, otherwise the
/// machine's available parallelism.
pub fn thread_cap() -> usize {
    if let Ok(v) = std::env::var("OUTWAVE_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n >= 1 {
                return n;
            }
        }
    }
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

/// Run every job, at most [`thread_cap`] at a time, preserving order.
pub fn map_parallel<T, F>(jobs: Vec<F>) -> Vec<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    let workers = thread_cap().min(jobs.len().max(1));
    if workers <= 1 {
        return jobs.into_iter().map(|job| job()).collect();
    }

    let mut slots: Vec<Option<T>> = Vec::with_capacity(jobs.len());
    slots.resize_with(jobs.len(), || None);
    let queue: Vec<(usize, F)> = jobs.into_iter().enumerate().collect();
    let queue = std::sync::Mutex::new(queue);
    let slots_ref = std::sync::Mutex::new(&mut slots);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let job = queue.lock().expect("queue lock").pop();
                match job {
                    None => break,
                    Some((index, job)) => {
                        let value = job();
                        slots_ref.lock().expect("slot lock")[index] = Some(value);
                    }
                }
            });
        }
    });

    slots
        .into_iter()
        .map(|slot| slot.expect("every job ran"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_come_back_in_order() {
        let jobs: Vec<_> = (0..32).map(|i| move || i * i).collect();
        let out = map_parallel(jobs);
        for (i, v) in out.iter().enumerate() {
            assert_eq!(*v, i * i);
        }
    }

    #[test]
    fn env_cap_is_respected() {
        // only checks the parser; the env var itself is process-global
        assert!(thread_cap() >= 1);
    }
}
