use std::sync::{Condvar, Mutex};

/// Counting semaphore that also remembers the highest concurrency seen.
#[derive(Debug)]
pub struct InFlight {
    limit: usize,
    state: Mutex<(usize, usize)>,
    freed: Condvar,
}

pub struct Permit<'a> {
    owner: &'a InFlight,
}

impl InFlight {
    pub fn new(limit: usize) -> Self {
        InFlight {
            limit: limit.max(1),
            state: Mutex::new((0, 0)),
            freed: Condvar::new(),
        }
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    /// Blocks until a slot is free.
    pub fn acquire(&self) -> Permit<'_> {
        let mut st = self.state.lock().expect("limiter lock");
        while st.0 >= self.limit {
            st = self.freed.wait(st).expect("limiter lock");
        }
        st.0 += 1;
        st.1 = st.1.max(st.0);
        Permit { owner: self }
    }

    pub fn current(&self) -> usize {
        self.state.lock().expect("limiter lock").0
    }

    pub fn peak(&self) -> usize {
        self.state.lock().expect("limiter lock").1
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut st = self.owner.state.lock().expect("limiter lock");
        st.0 -= 1;
        drop(st);
        self.owner.freed.notify_one();
    }
}
