//! Inversion vectors: the isometric embedding of a permutahedron into the
//! hypercube indexed by value pairs.

use super::{mask, GraphHandle, Shape, Vertex};
use crate::error::{Error, Result};

/// Characteristic vector of the inversion set of a permutation, one bit per
/// unordered value pair `{a, b}` in lexicographic pair order
/// `{1,2}, {1,3}, ..., {1,m}, {2,3}, ...`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InversionVector {
    bits: Vec<u64>,
    npairs: u32,
}

impl InversionVector {
    pub fn len(&self) -> u32 {
        self.npairs
    }

    pub fn is_empty(&self) -> bool {
        self.npairs == 0
    }

    pub fn get(&self, pair_index: u32) -> bool {
        (self.bits[(pair_index / 64) as usize] >> (pair_index % 64)) & 1 == 1
    }

    pub fn count_ones(&self) -> u32 {
        self.bits.iter().map(|w| w.count_ones()).sum()
    }

    /// Hamming distance, i.e. the size of the symmetric difference of the
    /// two inversion sets.
    pub fn hamming(&self, other: &InversionVector) -> u32 {
        assert_eq!(self.npairs, other.npairs, "incompatible inversion vectors");
        self.bits
            .iter()
            .zip(&other.bits)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }
}

/// Inversion vector of a permutahedron vertex: bit for `{a, b}` set iff the
/// pair appears out of order in the word.
pub fn inversion_vector(g: &GraphHandle, v: Vertex) -> Result<InversionVector> {
    let Shape::Permutahedron { n, width } = g.shape() else {
        return Err(Error::UnsupportedFamily(
            "inversion vectors are defined for permutahedra".into(),
        ));
    };
    if !g.contains(v) {
        return Err(Error::InvalidPermutation(format!("{:#x}", v.0)));
    }
    let m = *n as usize + 1;
    // position of each value, 0-based
    let mut pos = [0u8; 26];
    for p in 0..m {
        let val = ((v.0 >> (p as u32 * width)) & mask(*width)) as usize;
        pos[val] = p as u8;
    }
    let npairs = (m * (m - 1) / 2) as u32;
    let mut bits = vec![0u64; npairs.div_ceil(64) as usize];
    let mut idx = 0u32;
    for a in 1..=m {
        for b in a + 1..=m {
            if pos[b] < pos[a] {
                bits[(idx / 64) as usize] |= 1u64 << (idx % 64);
            }
            idx += 1;
        }
    }
    Ok(InversionVector { bits, npairs })
}
