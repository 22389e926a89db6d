use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropCause {
    CertFail,
    SigFail,
    MacFail,
    Stale,
    Malformed,
    Misaddressed,
    TableFull,
    SendQueueFull,
}

/// Per-cause counts of packets dropped on arrival.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DropCounters {
    pub cert_fail: u64,
    pub sig_fail: u64,
    pub mac_fail: u64,
    pub stale: u64,
    pub malformed: u64,
    pub misaddressed: u64,
    pub table_full: u64,
    pub send_queue_full: u64,
}

impl DropCounters {
    pub const COLUMNS: [&'static str; 8] = [
        "cert_fail",
        "sig_fail",
        "mac_fail",
        "stale",
        "malformed",
        "misaddressed",
        "table_full",
        "send_queue_full",
    ];

    pub fn bump(&mut self, cause: DropCause) {
        *self.slot(cause) += 1;
    }

    pub fn get(&self, cause: DropCause) -> u64 {
        self.values()[cause as usize]
    }

    fn slot(&mut self, cause: DropCause) -> &mut u64 {
        match cause {
            DropCause::CertFail => &mut self.cert_fail,
            DropCause::SigFail => &mut self.sig_fail,
            DropCause::MacFail => &mut self.mac_fail,
            DropCause::Stale => &mut self.stale,
            DropCause::Malformed => &mut self.malformed,
            DropCause::Misaddressed => &mut self.misaddressed,
            DropCause::TableFull => &mut self.table_full,
            DropCause::SendQueueFull => &mut self.send_queue_full,
        }
    }

    /// Values in [`DropCounters::COLUMNS`] order.
    pub fn values(&self) -> [u64; 8] {
        [
            self.cert_fail,
            self.sig_fail,
            self.mac_fail,
            self.stale,
            self.malformed,
            self.misaddressed,
            self.table_full,
            self.send_queue_full,
        ]
    }

    /// Drops of received packets (excludes send-queue overflow).
    pub fn received_total(&self) -> u64 {
        self.values().iter().sum::<u64>() - self.send_queue_full
    }
}

impl AddAssign for DropCounters {
    fn add_assign(&mut self, rhs: DropCounters) {
        self.cert_fail += rhs.cert_fail;
        self.sig_fail += rhs.sig_fail;
        self.mac_fail += rhs.mac_fail;
        self.stale += rhs.stale;
        self.malformed += rhs.malformed;
        self.misaddressed += rhs.misaddressed;
        self.table_full += rhs.table_full;
        self.send_queue_full += rhs.send_queue_full;
    }
}

/// Traffic and disposition counters for one engine.
///
/// Every processing attempt (a received frame, or a buffered New2 released
/// for reprocessing) ends in exactly one of `processed`, `ignored`,
/// `buffered` or a receive-side drop.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Metrics {
    pub frames_sent: u64,
    pub bytes_sent: u64,
    pub frames_received: u64,
    pub bytes_received: u64,
    pub processed: u64,
    pub ignored: u64,
    pub buffered: u64,
    pub released: u64,
    pub orphans_expired: u64,
    pub orphans_evicted: u64,
    pub keys_established: u64,
    pub entries_purged: u64,
    pub drops: DropCounters,
}

impl Metrics {
    /// `received + released == processed + ignored + buffered + drops`.
    pub fn is_conserved(&self) -> bool {
        self.frames_received + self.released
            == self.processed + self.ignored + self.buffered + self.drops.received_total()
    }
}

impl AddAssign for Metrics {
    fn add_assign(&mut self, rhs: Metrics) {
        self.frames_sent += rhs.frames_sent;
        self.bytes_sent += rhs.bytes_sent;
        self.frames_received += rhs.frames_received;
        self.bytes_received += rhs.bytes_received;
        self.processed += rhs.processed;
        self.ignored += rhs.ignored;
        self.buffered += rhs.buffered;
        self.released += rhs.released;
        self.orphans_expired += rhs.orphans_expired;
        self.orphans_evicted += rhs.orphans_evicted;
        self.keys_established += rhs.keys_established;
        self.entries_purged += rhs.entries_purged;
        self.drops += rhs.drops;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_and_get_agree_with_columns() {
        let mut d = DropCounters::default();
        d.bump(DropCause::Stale);
        d.bump(DropCause::Stale);
        d.bump(DropCause::SendQueueFull);
        assert_eq!(d.get(DropCause::Stale), 2);
        assert_eq!(d.values()[3], 2);
        assert_eq!(DropCounters::COLUMNS[3], "stale");
        assert_eq!(d.received_total(), 2);
    }
}
