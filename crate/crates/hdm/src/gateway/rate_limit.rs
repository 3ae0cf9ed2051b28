//! Sliding-window rate limiter and a counting semaphore for bounded
//! concurrency. Both block the calling thread; `complete()` is allowed to
//! block awaiting admission.

use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex};

use super::clock::Clock;

/// Admits at most `count` requests in any window of `window_ms`.
pub struct RateLimiter {
    count: usize,
    window_ms: u64,
    admitted: Mutex<VecDeque<u64>>,
    clock: Arc<dyn Clock>,
}

impl RateLimiter {
    pub fn new(count: usize, window_ms: u64, clock: Arc<dyn Clock>) -> Self {
        assert!(window_ms > 0, "rate window must be positive");
        Self {
            count: count.max(1),
            window_ms,
            admitted: Mutex::new(VecDeque::new()),
            clock,
        }
    }

    /// Block until a slot is free, then record the admission timestamp.
    /// Returns the admission time in clock-ms.
    pub fn acquire(&self) -> u64 {
        loop {
            let wait_ms = {
                let mut admitted = self.admitted.lock().unwrap();
                let now = self.clock.now_ms();
                while let Some(&t) = admitted.front() {
                    if now.saturating_sub(t) >= self.window_ms {
                        admitted.pop_front();
                    } else {
                        break;
                    }
                }
                if admitted.len() < self.count {
                    admitted.push_back(now);
                    return now;
                }
                let oldest = *admitted.front().unwrap();
                (oldest + self.window_ms).saturating_sub(now).max(1)
            };
            self.clock.sleep_ms(wait_ms);
        }
    }
}

/// Counting semaphore over Mutex + Condvar.
pub struct Semaphore {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    pub fn new(permits: usize) -> Self {
        Self {
            permits: Mutex::new(permits.max(1)),
            cv: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut p = self.permits.lock().unwrap();
        while *p == 0 {
            p = self.cv.wait(p).unwrap();
        }
        *p -= 1;
        SemaphoreGuard { sem: self }
    }
}

pub struct SemaphoreGuard<'a> {
    sem: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        let mut p = self.sem.permits.lock().unwrap();
        *p += 1;
        self.sem.cv.notify_one();
    }
}

#[cfg(test)]
mod tests {
    use super::super::clock::MockClock;
    use super::*;

    #[test]
    fn window_quota_never_exceeded() {
        let clock = Arc::new(MockClock::new());
        let limiter = RateLimiter::new(3, 100, clock.clone());
        let mut admissions = Vec::new();
        for _ in 0..20 {
            admissions.push(limiter.acquire());
        }
        // Check every window of length 100 ms over the admission timeline.
        for &start in &admissions {
            let in_window = admissions
                .iter()
                .filter(|&&t| t >= start && t < start + 100)
                .count();
            assert!(in_window <= 3, "window starting at {start} admitted {in_window}");
        }
    }

    #[test]
    fn semaphore_bounds_concurrency() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        let sem = Arc::new(Semaphore::new(2));
        let in_flight = Arc::new(AtomicUsize::new(0));
        let max_seen = Arc::new(AtomicUsize::new(0));
        let handles: Vec<_> = (0..16)
            .map(|_| {
                let (sem, in_flight, max_seen) =
                    (sem.clone(), in_flight.clone(), max_seen.clone());
                std::thread::spawn(move || {
                    let _g = sem.acquire();
                    let n = in_flight.fetch_add(1, Ordering::SeqCst) + 1;
                    max_seen.fetch_max(n, Ordering::SeqCst);
                    std::thread::sleep(std::time::Duration::from_millis(2));
                    in_flight.fetch_sub(1, Ordering::SeqCst);
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert!(max_seen.load(Ordering::SeqCst) <= 2);
    }
}
