use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BufferEntry {
    pub sample_id: u64,
    pub entropy: f64,
    pub insertion_index: u64,
}

/// Bounded FIFO of per-sample feature entropies for one modality.
///
/// Front is oldest. Insertion indices increase strictly from front to back.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBuffer")]
pub struct EntropyBuffer {
    capacity: usize,
    entries: VecDeque<BufferEntry>,
    next_index: u64,
}

#[derive(Deserialize)]
struct RawBuffer {
    capacity: usize,
    entries: VecDeque<BufferEntry>,
    next_index: u64,
}

impl TryFrom<RawBuffer> for EntropyBuffer {
    type Error = Error;

    fn try_from(raw: RawBuffer) -> Result<Self> {
        if raw.capacity == 0 || raw.entries.len() > raw.capacity {
            return Err(Error::InvalidArgument(format!(
                "buffer holds {} entries with capacity {}",
                raw.entries.len(),
                raw.capacity
            )));
        }
        let mut prev: Option<u64> = None;
        for e in &raw.entries {
            if !(e.entropy.is_finite() && e.entropy >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "buffer entropy {} is not a finite non-negative value",
                    e.entropy
                )));
            }
            if prev.is_some_and(|p| p >= e.insertion_index) || e.insertion_index >= raw.next_index {
                return Err(Error::InvalidArgument(
                    "buffer insertion indices out of order".into(),
                ));
            }
            prev = Some(e.insertion_index);
        }
        Ok(EntropyBuffer {
            capacity: raw.capacity,
            entries: raw.entries,
            next_index: raw.next_index,
        })
    }
}

impl EntropyBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("buffer capacity must be positive".into()));
        }
        Ok(EntropyBuffer {
            capacity,
            entries: VecDeque::with_capacity(capacity),
            next_index: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl ExactSizeIterator<Item = &BufferEntry> {
        self.entries.iter()
    }

    pub fn entropies(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.entropy).collect()
    }

    /// Appends `(sample_id, entropy)` pairs in order and evicts the oldest
    /// entries beyond capacity, returning them oldest first. Entropies
    /// must be finite and non-negative.
    pub fn push(&mut self, new_entries: &[(u64, f64)]) -> Vec<BufferEntry> {
        let mut evicted = Vec::new();
        for &(sample_id, entropy) in new_entries {
            debug_assert!(entropy.is_finite() && entropy >= 0.0);
            self.entries.push_back(BufferEntry {
                sample_id,
                entropy,
                insertion_index: self.next_index,
            });
            self.next_index += 1;
            if self.entries.len() > self.capacity {
                evicted.extend(self.entries.pop_front());
            }
        }
        evicted
    }

    /// Recomputes the entropy of the `count` oldest entries (all of them
    /// if fewer) in place. Positions and insertion indices are unchanged.
    /// On error nothing is modified.
    pub fn refresh_oldest<F>(&mut self, count: usize, mut recompute: F) -> Result<usize>
    where
        F: FnMut(u64) -> Result<f64>,
    {
        let n = count.min(self.entries.len());
        let fresh = self
            .entries
            .iter()
            .take(n)
            .map(|e| recompute(e.sample_id))
            .collect::<Result<Vec<_>>>()?;
        for (e, h) in self.entries.iter_mut().zip(fresh) {
            e.entropy = h;
        }
        Ok(n)
    }
}

/// Entries refreshed per iteration: ⌊M / r⌋.
pub fn refresh_count(capacity: usize, refresh_step: usize) -> Result<usize> {
    if refresh_step == 0 {
        return Err(Error::InvalidArgument("refresh step must be at least 1".into()));
    }
    Ok(capacity / refresh_step)
}

/// Refreshes the ⌊M/r⌋ oldest entries through `recompute`, which maps a
/// stored sample id to its entropy under the current momentum model.
pub fn buffer_refresh<F>(buffer: &mut EntropyBuffer, refresh_step: usize, recompute: F) -> Result<usize>
where
    F: FnMut(u64) -> Result<f64>,
{
    let n = refresh_count(buffer.capacity(), refresh_step)?;
    buffer.refresh_oldest(n, recompute)
}

/// True once both buffers hold at least ⌈M/2⌉ entries.
pub fn eal_ready(visual: &EntropyBuffer, text: &EntropyBuffer, capacity: usize) -> bool {
    let half = capacity.div_ceil(2);
    visual.len() >= half && text.len() >= half
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(buf: &EntropyBuffer) -> Vec<u64> {
        buf.entries().map(|e| e.sample_id).collect()
    }

    #[test]
    fn push_below_capacity() {
        let mut b = EntropyBuffer::new(4).unwrap();
        assert!(b.push(&[(0, 0.1), (1, 0.2), (2, 0.3)]).is_empty());
        assert_eq!(b.len(), 3);
    }

    #[test]
    fn full_buffer_evicts_oldest() {
        let mut b = EntropyBuffer::new(4).unwrap();
        b.push(&[(10, 0.1), (11, 0.2), (12, 0.3), (13, 0.4)]);
        let ev = b.push(&[(14, 0.5), (15, 0.6)]);
        assert_eq!(ev.iter().map(|e| e.insertion_index).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(ids(&b), vec![12, 13, 14, 15]);
    }

    #[test]
    fn oversized_push_keeps_last_m() {
        let mut b = EntropyBuffer::new(3).unwrap();
        let batch: Vec<(u64, f64)> = (0..7).map(|i| (i, i as f64)).collect();
        let ev = b.push(&batch);
        assert_eq!(ev.len(), 4);
        assert_eq!(ids(&b), vec![4, 5, 6]);
    }

    #[test]
    fn gate_threshold() {
        let mut v = EntropyBuffer::new(2048).unwrap();
        let mut s = EntropyBuffer::new(2048).unwrap();
        let fill = |n: usize| -> Vec<(u64, f64)> { (0..n as u64).map(|i| (i, 1.0)).collect() };
        v.push(&fill(1024));
        s.push(&fill(1024));
        assert!(eal_ready(&v, &s, 2048));

        let mut v = EntropyBuffer::new(2048).unwrap();
        let mut s = EntropyBuffer::new(2048).unwrap();
        v.push(&fill(1023));
        s.push(&fill(2048));
        assert!(!eal_ready(&v, &s, 2048));

        let mut v = EntropyBuffer::new(4).unwrap();
        let mut s = EntropyBuffer::new(4).unwrap();
        v.push(&fill(2));
        s.push(&fill(2));
        assert!(eal_ready(&v, &s, 4));

        // Odd capacity rounds the half up.
        let mut v = EntropyBuffer::new(5).unwrap();
        let mut s = EntropyBuffer::new(5).unwrap();
        v.push(&fill(2));
        s.push(&fill(2));
        assert!(!eal_ready(&v, &s, 5));
        v.push(&fill(1));
        s.push(&fill(1));
        assert!(eal_ready(&v, &s, 5));
    }

    #[test]
    fn refresh_counts() {
        assert_eq!(refresh_count(2048, 50).unwrap(), 40);
        assert_eq!(refresh_count(2048, 16).unwrap(), 128);
        assert_eq!(refresh_count(2048, 128).unwrap(), 16);
        assert!(refresh_count(2048, 0).is_err());
    }

    #[test]
    fn refresh_is_in_place_and_clamped() {
        let mut b = EntropyBuffer::new(8).unwrap();
        b.push(&[(7, 0.1), (8, 0.2), (9, 0.3), (10, 0.4), (11, 0.5)]);
        let before: Vec<u64> = b.entries().map(|e| e.insertion_index).collect();
        let n = buffer_refresh(&mut b, 1, |id| Ok(id as f64)).unwrap();
        assert_eq!(n, 5);
        assert_eq!(b.entropies(), vec![7.0, 8.0, 9.0, 10.0, 11.0]);
        assert_eq!(b.entries().map(|e| e.insertion_index).collect::<Vec<_>>(), before);

        let n = buffer_refresh(&mut b, 4, |_| Ok(0.0)).unwrap();
        assert_eq!(n, 2);
        assert_eq!(b.entropies(), vec![0.0, 0.0, 9.0, 10.0, 11.0]);
    }

    #[test]
    fn refresh_error_names_id_and_leaves_buffer() {
        let mut b = EntropyBuffer::new(4).unwrap();
        b.push(&[(1, 0.1), (99, 0.2)]);
        let snapshot = b.clone();
        let err = b
            .refresh_oldest(2, |id| if id == 99 { Err(Error::UnknownSample(id)) } else { Ok(5.0) })
            .unwrap_err();
        assert!(err.to_string().contains("99"));
        assert_eq!(b, snapshot);
    }

    #[test]
    fn deserialize_rejects_overfull() {
        let json = r#"{"capacity":1,"next_index":2,"entries":[
            {"sample_id":0,"entropy":0.1,"insertion_index":0},
            {"sample_id":1,"entropy":0.1,"insertion_index":1}]}"#;
        assert!(serde_json::from_str::<EntropyBuffer>(json).is_err());
    }
}
