//! Lock-free open-addressing accumulator keyed by canonical vertex pairs.

use std::io::{self, Write};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use thiserror::Error;

use crate::graph::VertexId;
use crate::rng::mix64;

/// Weights are stored as integers in units of `2^-20`.
pub const FIXED_POINT_BITS: u32 = 20;
const FIXED_SCALE: f64 = (1u64 << FIXED_POINT_BITS) as f64;
const EMPTY: u64 = u64::MAX;
const MAX_LOAD: f64 = 0.75;

#[inline]
pub fn to_fixed(w: f64) -> u64 {
    (w * FIXED_SCALE).round() as u64
}

#[inline]
pub fn from_fixed(w: u64) -> f64 {
    w as f64 / FIXED_SCALE
}

/// `min(u, v)` in the high half, `max(u, v)` in the low half.
#[inline]
pub fn pack_pair(u: VertexId, v: VertexId) -> u64 {
    (u64::from(u.min(v)) << 32) | u64::from(u.max(v))
}

#[inline]
pub fn unpack_pair(key: u64) -> (VertexId, VertexId) {
    ((key >> 32) as VertexId, key as VertexId)
}

#[derive(Debug, Error)]
#[error(
    "sparsifier table full: {occupied} of {capacity} slots used; \
     rerun with a capacity factor at least {suggested_factor:.1}x larger"
)]
pub struct TableFull {
    pub capacity: usize,
    pub occupied: usize,
    pub suggested_factor: f64,
}

/// Fixed-capacity concurrent hash map from packed pairs to fixed-point
/// weights. Linear probing, no deletion, no resizing. Occupancy is capped at
/// 3/4 of the capacity.
pub struct SparsifierTable {
    keys: Box<[AtomicU64]>,
    weights: Box<[AtomicU64]>,
    mask: usize,
    occupied: AtomicUsize,
    limit: usize,
}

impl SparsifierTable {
    /// Capacity is `min_slots` rounded up to a power of two (at least 16).
    pub fn with_capacity(min_slots: usize) -> Self {
        let capacity = min_slots.max(16).next_power_of_two();
        Self {
            keys: (0..capacity).map(|_| AtomicU64::new(EMPTY)).collect(),
            weights: (0..capacity).map(|_| AtomicU64::new(0)).collect(),
            mask: capacity - 1,
            occupied: AtomicUsize::new(0),
            limit: (capacity as f64 * MAX_LOAD) as usize,
        }
    }

    pub fn capacity(&self) -> usize {
        self.mask + 1
    }

    /// Number of distinct keys.
    pub fn len(&self) -> usize {
        self.occupied.load(Ordering::Acquire)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn full(&self) -> TableFull {
        TableFull { capacity: self.capacity(), occupied: self.len(), suggested_factor: 2.0 }
    }

    /// Adds `w` (fixed point) to the weight of `key`, inserting it if absent.
    pub fn upsert_add(&self, key: u64, w: u64) -> Result<(), TableFull> {
        debug_assert_ne!(key, EMPTY, "sentinel key");
        let mut idx = mix64(key) as usize & self.mask;
        for _ in 0..=self.mask {
            let mut current = self.keys[idx].load(Ordering::Acquire);
            if current == EMPTY {
                match self.keys[idx].compare_exchange(EMPTY, key, Ordering::AcqRel, Ordering::Acquire) {
                    Ok(_) => {
                        let occupied = self.occupied.fetch_add(1, Ordering::AcqRel) + 1;
                        self.weights[idx].fetch_add(w, Ordering::Relaxed);
                        if occupied > self.limit {
                            return Err(self.full());
                        }
                        return Ok(());
                    }
                    Err(actual) => current = actual,
                }
            }
            if current == key {
                self.weights[idx].fetch_add(w, Ordering::Relaxed);
                return Ok(());
            }
            idx = (idx + 1) & self.mask;
        }
        Err(self.full())
    }

    /// Fixed-point weight of `key`, if present.
    pub fn get(&self, key: u64) -> Option<u64> {
        let mut idx = mix64(key) as usize & self.mask;
        for _ in 0..=self.mask {
            match self.keys[idx].load(Ordering::Acquire) {
                EMPTY => return None,
                k if k == key => return Some(self.weights[idx].load(Ordering::Acquire)),
                _ => idx = (idx + 1) & self.mask,
            }
        }
        None
    }

    /// All `(key, fixed-point weight)` entries sorted by key.
    pub fn entries(&self) -> Vec<(u64, u64)> {
        let mut out: Vec<(u64, u64)> = self
            .keys
            .iter()
            .zip(self.weights.iter())
            .filter_map(|(k, w)| {
                let k = k.load(Ordering::Acquire);
                (k != EMPTY).then(|| (k, w.load(Ordering::Acquire)))
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Writes `u v weight` lines sorted by key.
    pub fn dump_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (key, weight) in self.entries() {
            let (u, v) = unpack_pair(key);
            writeln!(w, "{u} {v} {}", from_fixed(weight))?;
        }
        w.flush()
    }
}

impl std::fmt::Debug for SparsifierTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparsifierTable").field("capacity", &self.capacity()).field("len", &self.len()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pair_packing() {
        assert_eq!(pack_pair(3, 1), pack_pair(1, 3));
        assert_eq!(pack_pair(1, 3), (1u64 << 32) | 3);
        assert_eq!(unpack_pair(pack_pair(9, 2)), (2, 9));
        assert_ne!(pack_pair(VertexId::MAX - 1, VertexId::MAX - 1), EMPTY);
    }

    #[test]
    fn repeated_insert_accumulates_exactly() {
        let t = SparsifierTable::with_capacity(16);
        let k = pack_pair(0, 1);
        t.upsert_add(k, to_fixed(1.0)).unwrap();
        t.upsert_add(k, to_fixed(1.0)).unwrap();
        assert_eq!(from_fixed(t.get(k).unwrap()), 2.0);
        assert_eq!(t.len(), 1);
        assert_eq!(t.get(pack_pair(0, 2)), None);
    }

    #[test]
    fn concurrent_adds_to_one_key_are_exact() {
        let t = SparsifierTable::with_capacity(16);
        let k = pack_pair(4, 2);
        let third = to_fixed(1.0 / 3.0);
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| {
                    for _ in 0..100_000 {
                        t.upsert_add(k, third).unwrap();
                    }
                });
            }
        });
        // integer oracle: 8 * 10^5 * round(2^20 / 3)
        let expected = 8 * 100_000 * ((1u64 << 20) as f64 / 3.0).round() as u64;
        assert_eq!(t.get(k), Some(expected));
    }

    #[test]
    fn concurrent_distinct_keys_match_sequential_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ops: Vec<(u64, u64)> = (0..40_000)
            .map(|_| (pack_pair(rng.random_range(0..300), rng.random_range(0..300)), rng.random_range(1..1000)))
            .collect();
        let mut oracle: HashMap<u64, u64> = HashMap::new();
        for &(k, w) in &ops {
            *oracle.entry(k).or_default() += w;
        }
        let t = SparsifierTable::with_capacity(2 * oracle.len());
        std::thread::scope(|s| {
            for chunk in ops.chunks(ops.len() / 6 + 1) {
                let t = &t;
                s.spawn(move || {
                    for &(k, w) in chunk {
                        t.upsert_add(k, w).unwrap();
                    }
                });
            }
        });
        let mut expected: Vec<_> = oracle.into_iter().collect();
        expected.sort_unstable();
        assert_eq!(t.entries(), expected);
    }

    #[test]
    fn overfull_table_errors() {
        let t = SparsifierTable::with_capacity(16);
        for i in 0..12 {
            t.upsert_add(pack_pair(0, i), 1).unwrap();
        }
        let err = t.upsert_add(pack_pair(0, 99), 1).unwrap_err();
        assert_eq!(err.capacity, 16);
        assert!(err.to_string().contains("capacity factor"));
    }

    #[test]
    fn dump_is_sorted_text() {
        let t = SparsifierTable::with_capacity(16);
        t.upsert_add(pack_pair(2, 1), to_fixed(0.5)).unwrap();
        t.upsert_add(pack_pair(0, 3), to_fixed(2.0)).unwrap();
        let mut out = Vec::new();
        t.dump_text(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "0 3 2\n1 2 0.5\n");
    }
}
