use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

/// Per-rank access statistics of the shared space.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AccessCounters {
    pub local_element_reads: u64,
    pub local_element_writes: u64,
    pub remote_element_reads: u64,
    pub remote_element_writes: u64,
    pub bulk_gets: u64,
    pub bulk_puts: u64,
    pub bulk_bytes: u64,
    pub lock_acquisitions: u64,
    /// Element accesses that went through the shared (pointer-to-shared)
    /// path, whatever their affinity.
    pub shared_path_ops: u64,
}

impl AccessCounters {
    pub fn reset(&mut self) {
        *self = Self::default();
    }

    pub fn remote_element_accesses(&self) -> u64 {
        self.remote_element_reads + self.remote_element_writes
    }

    pub fn bulk_transfers(&self) -> u64 {
        self.bulk_gets + self.bulk_puts
    }

    fn zip(self, rhs: Self, f: impl Fn(u64, u64) -> u64) -> Self {
        Self {
            local_element_reads: f(self.local_element_reads, rhs.local_element_reads),
            local_element_writes: f(self.local_element_writes, rhs.local_element_writes),
            remote_element_reads: f(self.remote_element_reads, rhs.remote_element_reads),
            remote_element_writes: f(self.remote_element_writes, rhs.remote_element_writes),
            bulk_gets: f(self.bulk_gets, rhs.bulk_gets),
            bulk_puts: f(self.bulk_puts, rhs.bulk_puts),
            bulk_bytes: f(self.bulk_bytes, rhs.bulk_bytes),
            lock_acquisitions: f(self.lock_acquisitions, rhs.lock_acquisitions),
            shared_path_ops: f(self.shared_path_ops, rhs.shared_path_ops),
        }
    }
}

impl Add for AccessCounters {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.zip(rhs, |a, b| a + b)
    }
}

impl AddAssign for AccessCounters {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

/// Counter delta between two snapshots of the same rank.
impl Sub for AccessCounters {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.zip(rhs, |a, b| a - b)
    }
}

impl std::iter::Sum for AccessCounters {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankCounters {
    pub rank: usize,
    #[serde(flatten)]
    pub counters: AccessCounters,
}

/// Counters of every rank plus their totals; this is the JSON document the
/// CLI writes.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterSnapshot {
    pub ranks: Vec<RankCounters>,
    pub totals: AccessCounters,
}

impl CounterSnapshot {
    pub fn from_ranks(counters: impl IntoIterator<Item = AccessCounters>) -> Self {
        let ranks: Vec<RankCounters> = counters
            .into_iter()
            .enumerate()
            .map(|(rank, counters)| RankCounters { rank, counters })
            .collect();
        let totals = ranks.iter().map(|r| r.counters).sum();
        Self { ranks, totals }
    }

    pub fn rank(&self, rank: usize) -> AccessCounters {
        self.ranks[rank].counters
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_json_has_the_counter_fields() {
        let a = AccessCounters {
            remote_element_reads: 3,
            bulk_bytes: 24,
            ..Default::default()
        };
        let snap = CounterSnapshot::from_ranks([a, a]);
        assert_eq!(snap.totals.remote_element_reads, 6);
        let json: serde_json::Value = serde_json::to_value(&snap).unwrap();
        for field in [
            "local_element_reads",
            "local_element_writes",
            "remote_element_reads",
            "remote_element_writes",
            "bulk_gets",
            "bulk_puts",
            "bulk_bytes",
            "lock_acquisitions",
        ] {
            assert!(json["totals"][field].is_u64(), "{field}");
            assert!(json["ranks"][1][field].is_u64(), "{field}");
        }
        assert_eq!(json["ranks"][1]["rank"], 1);
        let back: CounterSnapshot = serde_json::from_value(json).unwrap();
        assert_eq!(back, snap);
    }

    #[test]
    fn reset_and_delta() {
        let mut a = AccessCounters {
            lock_acquisitions: 5,
            bulk_gets: 2,
            ..Default::default()
        };
        let before = a;
        a.lock_acquisitions += 3;
        assert_eq!((a - before).lock_acquisitions, 3);
        assert_eq!((a - before).bulk_gets, 0);
        a.reset();
        assert_eq!(a, AccessCounters::default());
    }
}
