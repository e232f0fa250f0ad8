//! Ring geometry and edge configurations.
//!
//! Vertices carry labels `m ∈ {-N+1, …, N}` and are stored at internal index
//! `j = m + N - 1`. The sink is `m = N` (last index), the source `m = 0`.
//! Edge `e_j` joins internal vertices `j` and `(j + 1) mod 2N`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RingConfig {
    half_size: usize,
}

impl RingConfig {
    pub fn new(half_size: usize) -> Result<Self> {
        if half_size == 0 {
            return Err(Error::ParameterOutOfRange {
                name: "N",
                value: 0.0,
                expected: "N >= 1",
            });
        }
        Ok(Self { half_size })
    }

    /// `N`.
    pub fn half_size(&self) -> usize {
        self.half_size
    }

    /// Number of vertices (and of edges), `2N`.
    pub fn vertices(&self) -> usize {
        2 * self.half_size
    }

    pub fn sink_index(&self) -> usize {
        self.vertices() - 1
    }

    pub fn source_index(&self) -> usize {
        self.half_size - 1
    }

    pub fn sink_label(&self) -> i64 {
        self.half_size as i64
    }

    pub fn index_of(&self, label: i64) -> Result<usize> {
        let n = self.half_size as i64;
        if label <= -n || label > n {
            return Err(Error::VertexOutOfRange {
                vertex: label,
                half_size: self.half_size,
            });
        }
        Ok((label + n - 1) as usize)
    }

    /// Like [`index_of`](Self::index_of) but wraps any label onto the ring (`N ≡ -N`).
    pub fn wrap_index(&self, label: i64) -> usize {
        let m = self.vertices() as i64;
        (label + self.half_size as i64 - 1).rem_euclid(m) as usize
    }

    pub fn label_of(&self, index: usize) -> i64 {
        index as i64 - self.half_size as i64 + 1
    }

    /// Labels from `-N+1` to `N`.
    pub fn labels(&self) -> impl Iterator<Item = i64> {
        let n = self.half_size as i64;
        (-n + 1)..=n
    }

    /// Endpoints `(j, j+1 mod 2N)` of edge `e_j`.
    pub fn edge_endpoints(&self, edge: usize) -> (usize, usize) {
        (edge, (edge + 1) % self.vertices())
    }
}

/// Set of ring edges present during one step; edge `j` present iff bit `j` is set.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EdgeConfig {
    width: usize,
    words: Vec<u64>,
}

impl EdgeConfig {
    pub fn empty(width: usize) -> Self {
        Self {
            width,
            words: vec![0; width.div_ceil(64)],
        }
    }

    pub fn full(width: usize) -> Self {
        let mut k = Self::empty(width);
        for j in 0..width {
            k.set(j, true);
        }
        k
    }

    /// Low `width` bits of `mask`; `width <= 64`.
    pub fn from_mask(width: usize, mask: u64) -> Self {
        assert!(width <= 64, "from_mask supports at most 64 edges");
        let mut k = Self::empty(width);
        if width > 0 {
            let keep = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
            k.words[0] = mask & keep;
        }
        k
    }

    pub fn from_present(width: usize, present: impl IntoIterator<Item = usize>) -> Self {
        let mut k = Self::empty(width);
        for j in present {
            k.set(j, true);
        }
        k
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn is_present(&self, edge: usize) -> bool {
        debug_assert!(edge < self.width);
        self.words[edge / 64] >> (edge % 64) & 1 == 1
    }

    pub fn set(&mut self, edge: usize, present: bool) {
        assert!(edge < self.width, "edge {edge} outside width {}", self.width);
        let bit = 1u64 << (edge % 64);
        if present {
            self.words[edge / 64] |= bit;
        } else {
            self.words[edge / 64] &= !bit;
        }
    }

    /// `|K|`, the number of present edges.
    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Low 64 bits as an integer mask.
    pub fn mask(&self) -> u64 {
        self.words.first().copied().unwrap_or(0)
    }

    pub fn is_full(&self) -> bool {
        self.count() == self.width
    }

    pub(crate) fn check_width(&self, ring: &RingConfig) -> Result<()> {
        if self.width != ring.vertices() {
            return Err(Error::DimensionMismatch {
                expected: ring.vertices(),
                found: self.width,
            });
        }
        Ok(())
    }
}
