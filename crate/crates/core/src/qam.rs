//! Gray-labelled square QAM with unit average energy.
//!
//! Labelling convention: the point with index `m` carries the label `m`
//! written MSB first over `log2 M` bits. The high half of the label selects
//! the in-phase level and the low half the quadrature level, each through a
//! binary-reflected Gray code. On each axis, Gray index 0 is the most positive
//! level, so for QPSK the first bit picks the sign of the real part and the
//! second bit the sign of the imaginary part (`0 -> +`, `1 -> -`):
//!
//! ```text
//! 00 -> (+1 +1i)/√2    01 -> (+1 -1i)/√2
//! 10 -> (-1 +1i)/√2    11 -> (-1 -1i)/√2
//! ```

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// Supported constellation sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum QamOrder {
    Qam4,
    Qam16,
    Qam64,
}

impl QamOrder {
    pub fn from_order(m: u32) -> Result<Self> {
        match m {
            4 => Ok(Self::Qam4),
            16 => Ok(Self::Qam16),
            64 => Ok(Self::Qam64),
            other => Err(param(format!("unsupported QAM order {other} (expected 4, 16 or 64)"))),
        }
    }

    pub fn order(self) -> usize {
        match self {
            Self::Qam4 => 4,
            Self::Qam16 => 16,
            Self::Qam64 => 64,
        }
    }

    pub fn bits_per_symbol(self) -> usize {
        self.order().trailing_zeros() as usize
    }
}

impl TryFrom<u32> for QamOrder {
    type Error = crate::Error;

    fn try_from(m: u32) -> Result<Self> {
        Self::from_order(m)
    }
}

impl From<QamOrder> for u32 {
    fn from(q: QamOrder) -> u32 {
        q.order() as u32
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    order: QamOrder,
    points: Vec<Complex64>,
    /// Per-axis amplitude levels indexed by Gray index, before scaling.
    levels: Vec<f64>,
    scale: f64,
}

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

impl Constellation {
    pub fn new(order: QamOrder) -> Self {
        let m = order.order();
        let side = (m as f64).sqrt() as usize;
        let axis_bits = order.bits_per_symbol() / 2;
        // level for a Gray-coded axis label: amplitude index j has label gray(j).
        let mut levels = vec![0.0; side];
        for j in 0..side {
            levels[gray(j)] = side as f64 - 1.0 - 2.0 * j as f64;
        }
        let energy = 2.0 * ((side * side - 1) as f64) / 3.0;
        let scale = 1.0 / energy.sqrt();
        let mask = side - 1;
        let points = (0..m)
            .map(|label| {
                let i_lbl = label >> axis_bits;
                let q_lbl = label & mask;
                Complex64::new(levels[i_lbl] * scale, levels[q_lbl] * scale)
            })
            .collect();
        Self { order, points, levels, scale }
    }

    pub fn order(&self) -> QamOrder {
        self.order
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.order.bits_per_symbol()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, index: usize) -> Complex64 {
        self.points[index]
    }

    /// Bit `b` (0 = MSB) of the label of point `index`.
    #[inline]
    pub fn label_bit(&self, index: usize, b: usize) -> u8 {
        ((index >> (self.bits_per_symbol() - 1 - b)) & 1) as u8
    }

    /// Largest real (and imaginary) coordinate; the alphabet is symmetric.
    pub fn max_amplitude(&self) -> f64 {
        (self.levels.len() - 1) as f64 * self.scale
    }

    pub fn index_of_bits(&self, bits: &[u8]) -> usize {
        bits.iter().fold(0, |acc, &b| (acc << 1) | (b & 1) as usize)
    }

    /// Maps bits to unit-energy symbols.
    pub fn map(&self, bits: &[u8]) -> Result<Vec<Complex64>> {
        let k = self.bits_per_symbol();
        if bits.len() % k != 0 {
            return Err(param(format!("{} bits is not a multiple of {k}", bits.len())));
        }
        Ok(bits.chunks(k).map(|c| self.points[self.index_of_bits(c)]).collect())
    }

    fn axis_label(&self, v: f64) -> usize {
        let side = self.levels.len();
        // amplitude index j has level (side-1-2j)·scale
        let j = (((side - 1) as f64 - v / self.scale) / 2.0).round();
        let j = j.clamp(0.0, (side - 1) as f64) as usize;
        gray(j)
    }

    /// Index of the nearest constellation point (Euclidean).
    pub fn slice_index(&self, z: Complex64) -> usize {
        let axis_bits = self.bits_per_symbol() / 2;
        (self.axis_label(z.re) << axis_bits) | self.axis_label(z.im)
    }

    /// Nearest point and its label bits.
    pub fn slice(&self, z: Complex64) -> (Complex64, Vec<u8>) {
        let idx = self.slice_index(z);
        (self.points[idx], self.bits_of(idx))
    }

    pub fn bits_of(&self, index: usize) -> Vec<u8> {
        (0..self.bits_per_symbol()).map(|b| self.label_bit(index, b)).collect()
    }

    /// Number of differing label bits between two points.
    #[inline]
    pub fn bit_distance(&self, a: usize, b: usize) -> u32 {
        (a ^ b).count_ones()
    }
}

/// Maps `bits` onto the Gray QAM alphabet of order `m`.
pub fn qam_map(bits: &[u8], m: u32) -> Result<Vec<Complex64>> {
    Constellation::new(QamOrder::from_order(m)?).map(bits)
}

/// Nearest alphabet point to `sym` and its label.
pub fn qam_slice(sym: Complex64, m: u32) -> Result<(Complex64, Vec<u8>)> {
    Ok(Constellation::new(QamOrder::from_order(m)?).slice(sym))
}
