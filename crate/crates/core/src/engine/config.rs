use serde::{Deserialize, Serialize};

use super::EngineError;

/// Tunables for one node. Times are in simulator ticks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub max_neighbors: usize,
    /// Capacity of both the receive (orphan New2) queue and the send queue.
    pub queue_capacity: usize,
    /// Extra New1 broadcasts per stage; also bounds one-way repair re-sends.
    pub retransmissions: u32,
    pub retransmit_interval: u64,
    /// REGISTERED entries older than this are purged.
    pub cleanup_timeout: u64,
    /// Buffered New2s older than this are dropped.
    pub orphan_timeout: u64,
    /// Delay before a REGISTERED entry re-sends its New2.
    pub repair_interval: u64,
    /// Compressed points in certificates and ciphertexts.
    pub compressed: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig::with_interval(10, 1)
    }
}

impl EngineConfig {
    /// Cleanup at 3x the interval, orphan timeout and repair at 1x.
    pub fn with_interval(interval: u64, retransmissions: u32) -> EngineConfig {
        EngineConfig {
            max_neighbors: 16,
            queue_capacity: 12,
            retransmissions,
            retransmit_interval: interval,
            cleanup_timeout: 3 * interval,
            orphan_timeout: interval,
            repair_interval: interval,
            compressed: false,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let positive = [
            ("max_neighbors", self.max_neighbors as u64),
            ("queue_capacity", self.queue_capacity as u64),
            ("retransmit_interval", self.retransmit_interval),
            ("cleanup_timeout", self.cleanup_timeout),
            ("orphan_timeout", self.orphan_timeout),
            ("repair_interval", self.repair_interval),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(EngineError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// Ticks after a stage start by which every retransmission has fired and
    /// every unfinished registration and orphan has been cleaned up.
    ///
    /// Worst case: the last New1 lands one tick after `k * interval`, the
    /// registration it refreshes re-sends New2 up to the tick before its
    /// purge, an established partner answers, and that answer arrives after
    /// the purge and sits as an orphan until it expires.
    pub fn quiescence_horizon(&self) -> u64 {
        u64::from(self.retransmissions) * self.retransmit_interval + self.cleanup_timeout + self.orphan_timeout + 2
    }
}
