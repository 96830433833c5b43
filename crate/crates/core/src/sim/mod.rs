//! Deterministic discrete-event engine: virtual clock, ordered event queue,
//! and seeded named random streams.

pub mod queue;
pub mod rng;
pub mod time;

pub use queue::{EventQueue, ScheduleError, Ticket};
pub use rng::RngStream;
pub use time::SimTime;
