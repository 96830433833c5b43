//! The event queue: a virtual clock plus a time-ordered, cancellable queue.
//!
//! Events with equal fire times are delivered in scheduling order (the ticket
//! doubles as the FIFO tiebreaker). Cancellation is lazy: the heap entry stays
//! behind, but the event body is removed so a cancelled ticket can never fire.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use thiserror::Error;

use super::time::SimTime;

pub type Ticket = u64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("cannot schedule at {fire_at} before current clock {now}")]
    SchedulingInPast { fire_at: SimTime, now: SimTime },
}

pub struct EventQueue<E> {
    now: SimTime,
    next_ticket: Ticket,
    heap: BinaryHeap<Reverse<(SimTime, Ticket)>>,
    pending: HashMap<Ticket, E>,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        EventQueue {
            now: SimTime::ZERO,
            next_ticket: 1,
            heap: BinaryHeap::new(),
            pending: HashMap::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// Enqueue `event` to fire at `fire_at`. Fails if `fire_at` is in the past.
    pub fn schedule(&mut self, fire_at: SimTime, event: E) -> Result<Ticket, ScheduleError> {
        if fire_at < self.now {
            return Err(ScheduleError::SchedulingInPast { fire_at, now: self.now });
        }
        let ticket = self.next_ticket;
        self.next_ticket += 1;
        self.heap.push(Reverse((fire_at, ticket)));
        self.pending.insert(ticket, event);
        Ok(ticket)
    }

    pub fn schedule_in(&mut self, delay: SimTime, event: E) -> Ticket {
        self.schedule(self.now + delay, event)
            .expect("now + delay is never in the past")
    }

    /// Remove a pending event. True iff it was still pending.
    pub fn cancel(&mut self, ticket: Ticket) -> bool {
        self.pending.remove(&ticket).is_some()
    }

    /// Pop the next event with `fire_at <= end`, advancing the clock to its
    /// fire time. Returns `None` when nothing (non-cancelled) is due.
    pub fn pop_due(&mut self, end: SimTime) -> Option<(SimTime, E)> {
        while let Some(&Reverse((fire_at, ticket))) = self.heap.peek() {
            if fire_at > end {
                return None;
            }
            self.heap.pop();
            if let Some(event) = self.pending.remove(&ticket) {
                debug_assert!(fire_at >= self.now);
                self.now = fire_at;
                return Some((fire_at, event));
            }
            // cancelled; skip
        }
        None
    }

    /// Deliver every event due up to `end` (including ones scheduled by the
    /// handler during this call), then advance the clock to `end`. Returns the
    /// number of events delivered.
    pub fn run_until<F>(&mut self, end: SimTime, mut handler: F) -> u64
    where
        F: FnMut(&mut Self, SimTime, E),
    {
        let mut processed = 0;
        while let Some((at, event)) = self.pop_due(end) {
            handler(self, at, event);
            processed += 1;
        }
        if end > self.now {
            self.now = end;
        }
        processed
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::rng::fnv1a64;

    fn t(us: u64) -> SimTime {
        SimTime::from_micros(us)
    }

    #[test]
    fn schedule_and_fire() {
        let mut q: EventQueue<&str> = EventQueue::new();
        let ticket = q.schedule(SimTime::from_secs_f64(0.5), "a").unwrap();
        assert_eq!(ticket, 1);
        let mut fired = Vec::new();
        q.run_until(SimTime::from_secs_f64(1.0), |_, at, e| fired.push((at, e)));
        assert_eq!(fired, vec![(SimTime::from_secs_f64(0.5), "a")]);
    }

    #[test]
    fn equal_times_fifo() {
        let mut q: EventQueue<u32> = EventQueue::new();
        q.schedule(t(100), 1).unwrap();
        q.schedule(t(100), 2).unwrap();
        q.schedule(t(100), 3).unwrap();
        let mut order = Vec::new();
        q.run_until(t(100), |_, _, e| order.push(e));
        assert_eq!(order, vec![1, 2, 3]);
    }

    #[test]
    fn scheduling_in_past_rejected() {
        let mut q: EventQueue<()> = EventQueue::new();
        q.schedule(t(200_000), ()).unwrap();
        q.run_until(t(200_000), |_, _, _| {});
        assert_eq!(
            q.schedule(t(100_000), ()),
            Err(ScheduleError::SchedulingInPast { fire_at: t(100_000), now: t(200_000) })
        );
    }

    #[test]
    fn empty_queue_advances_clock() {
        let mut q: EventQueue<()> = EventQueue::new();
        let n = q.run_until(t(10_000_000), |_, _, _| {});
        assert_eq!(n, 0);
        assert_eq!(q.now(), t(10_000_000));
    }

    #[test]
    fn run_until_boundary_inclusive() {
        let mut q: EventQueue<u32> = EventQueue::new();
        q.schedule(SimTime::from_secs_f64(1.0), 1).unwrap();
        q.schedule(SimTime::from_secs_f64(2.0), 2).unwrap();
        q.schedule(SimTime::from_secs_f64(3.0), 3).unwrap();
        let n = q.run_until(SimTime::from_secs_f64(2.5), |_, _, _| {});
        assert_eq!(n, 2);
        assert_eq!(q.now(), SimTime::from_secs_f64(2.5));
    }

    #[test]
    fn handler_scheduled_events_fire_in_same_call() {
        let mut q: EventQueue<u32> = EventQueue::new();
        q.schedule(t(10), 1).unwrap();
        let mut seen = Vec::new();
        q.run_until(t(100), |q, at, e| {
            seen.push(e);
            if e == 1 {
                q.schedule(at + t(5), 2).unwrap();
            }
        });
        assert_eq!(seen, vec![1, 2]);
    }

    #[test]
    fn cancel_semantics() {
        let mut q: EventQueue<u32> = EventQueue::new();
        let ticket = q.schedule(t(50), 9).unwrap();
        assert!(q.cancel(ticket));
        assert!(!q.cancel(ticket));
        let mut fired = 0;
        q.run_until(t(100), |_, _, _| fired += 1);
        assert_eq!(fired, 0);

        let ticket = q.schedule(t(200), 9).unwrap();
        q.run_until(t(200), |_, _, _| fired += 1);
        assert_eq!(fired, 1);
        assert!(!q.cancel(ticket), "cancel after fire returns false");
    }

    #[test]
    fn clock_never_moves_backwards() {
        let mut q: EventQueue<u32> = EventQueue::new();
        for i in 0..100 {
            q.schedule(t(i * 7 % 50), i as u32).unwrap();
        }
        let mut last = SimTime::ZERO;
        q.run_until(t(1000), |q, at, _| {
            assert!(at >= last);
            last = at;
            assert_eq!(q.now(), at);
        });
    }

    // Determinism: identical seeded workloads produce identical delivery logs.
    #[test]
    fn run_log_hash_is_reproducible() {
        fn run_log(seed: u64) -> u64 {
            let mut rng = crate::sim::rng::RngStream::new(seed, "workload");
            let mut q: EventQueue<u64> = EventQueue::new();
            for i in 0..500u64 {
                q.schedule(t(rng.next_u64() % 1_000_000), i).unwrap();
            }
            let mut log = Vec::new();
            q.run_until(t(1_000_000), |q, at, e| {
                log.extend_from_slice(&at.as_micros().to_le_bytes());
                log.extend_from_slice(&e.to_le_bytes());
                // occasionally reschedule, like a real handler would
                if e % 17 == 0 {
                    q.schedule_in(t(3), e + 1000);
                }
            });
            fnv1a64(&log)
        }
        assert_eq!(run_log(11), run_log(11));
        assert_ne!(run_log(11), run_log(12));
    }
}
