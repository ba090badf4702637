//! Time sources for the solvers.
//!
//! The inner loop rations approximate passes by objective decrease per unit
//! time, and the outer loops stop on a time budget.  Both read time through
//! the [`Clock`] trait so that the same code can run against the real
//! monotonic clock or against a deterministic *work clock* that advances by
//! a fixed amount per unit of oracle work.  The work clock makes entire runs
//! — including pass counts and the trace files they emit — bit-reproducible
//! across machines, which the test suite relies on.

use std::time::Instant;

/// Seconds charged per work unit by the deterministic clock.  One unit
/// roughly corresponds to one coordinate touched by an oracle, so the scale
/// is in the right ballpark for "one microsecond per unit".
pub const WORK_UNIT_SECONDS: f64 = 1e-6;

/// A monotone time source.  `now` returns seconds since the clock started.
pub trait Clock {
    /// Seconds elapsed since construction.
    fn now(&mut self) -> f64;

    /// Account for `work` abstract units of solver work.  The wall clock
    /// ignores this (real time passes by itself); the work clock advances.
    fn charge(&mut self, _work: u64) {}
}

/// Real monotonic time.
pub struct WallClock {
    start: Instant,
}

impl WallClock {
    /// Start counting now.
    pub fn new() -> Self {
        WallClock {
            start: Instant::now(),
        }
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now(&mut self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

/// Deterministic clock: time is `WORK_UNIT_SECONDS` per charged unit.
pub struct WorkClock {
    units: u64,
}

impl WorkClock {
    /// Start at zero accumulated work.
    pub fn new() -> Self {
        WorkClock { units: 0 }
    }

    /// Total units charged so far.
    pub fn units(&self) -> u64 {
        self.units
    }
}

impl Default for WorkClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WorkClock {
    fn now(&mut self) -> f64 {
        self.units as f64 * WORK_UNIT_SECONDS
    }

    fn charge(&mut self, work: u64) {
        self.units += work;
    }
}

/// Which clock a solver run should use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClockKind {
    /// Real monotonic time (the default for command-line runs).
    #[default]
    Wall,
    /// Deterministic work-unit time (bit-reproducible runs).
    Work,
}

impl ClockKind {
    /// Instantiate the chosen clock.
    pub fn make(self) -> Box<dyn Clock> {
        match self {
            ClockKind::Wall => Box::new(WallClock::new()),
            ClockKind::Work => Box::new(WorkClock::new()),
        }
    }
}
