//! Trial scheduling: independent seeded trials, optionally spread over
//! threads. Results always come back ordered by trial index, so reports are
//! identical whatever the parallelism degree.

pub fn thread_count() -> usize {
    std::env::var("INPLACE_LAB_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&t| t >= 1)
        .unwrap_or(1)
}

pub fn run_trials<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let threads = thread_count().min(n.max(1));
    if threads <= 1 {
        return (0..n).map(f).collect();
    }
    let chunk = n.div_ceil(threads);
    let mut out = Vec::with_capacity(n);
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for t in 0..threads {
            let lo = t * chunk;
            let hi = ((t + 1) * chunk).min(n);
            if lo >= hi {
                break;
            }
            let f = &f;
            handles.push(scope.spawn(move || (lo..hi).map(f).collect::<Vec<_>>()));
        }
        for h in handles {
            out.extend(h.join().expect("trial thread panicked"));
        }
    });
    out
}
