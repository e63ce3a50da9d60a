//! Fixed-length bit strings used for tape contents.
//!
//! Bit 0 is the leftmost cell. The hex form packs four bits per digit,
//! most-significant bit first, padding the tail with zeros; the declared
//! length disambiguates on decode.

use std::fmt;

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Bits {
    bits: Vec<bool>,
}

impl Bits {
    pub fn zeros(len: usize) -> Self {
        Bits {
            bits: vec![false; len],
        }
    }

    pub fn ones(len: usize) -> Self {
        Bits {
            bits: vec![true; len],
        }
    }

    pub fn from_bools(bits: Vec<bool>) -> Self {
        Bits { bits }
    }

    /// Parse a string of `0`/`1` characters.
    pub fn from_binary(s: &str) -> Option<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Bits::from_bools)
    }

    /// The low `len` bits of `value`, bit 0 of the result = LSB of `value`.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= 64);
        Bits {
            bits: (0..len).map(|i| value >> i & 1 == 1).collect(),
        }
    }

    /// Inverse of [`Bits::from_u64`].
    pub fn to_u64(&self) -> u64 {
        assert!(self.len() <= 64);
        self.bits
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| acc | (b as u64) << i)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, v: bool) {
        self.bits[i] = v;
    }

    pub fn flip(&mut self, i: usize) {
        self.bits[i] = !self.bits[i];
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.bits
    }

    pub fn as_mut_slice(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    pub fn slice(&self, start: usize, len: usize) -> Bits {
        Bits {
            bits: self.bits[start..start + len].to_vec(),
        }
    }

    pub fn splice(&mut self, start: usize, src: &Bits) {
        self.bits[start..start + src.len()].copy_from_slice(&src.bits);
    }

    pub fn concat(&self, other: &Bits) -> Bits {
        let mut bits = self.bits.clone();
        bits.extend_from_slice(&other.bits);
        Bits { bits }
    }

    pub fn all_zero(&self) -> bool {
        self.bits.iter().all(|&b| !b)
    }

    pub fn all_one(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }

    /// XOR `src` into the range starting at `start`.
    pub fn xor_in(&mut self, start: usize, src: &Bits) {
        for (i, &b) in src.bits.iter().enumerate() {
            self.bits[start + i] ^= b;
        }
    }

    pub fn to_hex(&self) -> String {
        let mut out = String::with_capacity(self.len().div_ceil(4));
        for chunk in self.bits.chunks(4) {
            let mut v = 0u8;
            for (i, &b) in chunk.iter().enumerate() {
                if b {
                    v |= 1 << (3 - i);
                }
            }
            out.push(char::from_digit(v as u32, 16).unwrap());
        }
        out
    }

    pub fn from_hex(s: &str, len: usize) -> Option<Self> {
        if s.len() != len.div_ceil(4) {
            return None;
        }
        let mut bits = Vec::with_capacity(len);
        for c in s.chars() {
            let v = c.to_digit(16)? as u8;
            for i in 0..4 {
                bits.push(v >> (3 - i) & 1 == 1);
            }
        }
        // Trailing pad bits must be zero.
        if bits[len..].iter().any(|&b| b) {
            return None;
        }
        bits.truncate(len);
        Some(Bits { bits })
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            write!(f, "{}", b as u8)?;
        }
        Ok(())
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromIterator<bool> for Bits {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Bits {
            bits: iter.into_iter().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hex_round_trip_known() {
        let b = Bits::from_binary("10110").unwrap();
        assert_eq!(b.to_hex(), "b0");
        assert_eq!(Bits::from_hex("b0", 5).unwrap(), b);
    }

    #[test]
    fn hex_rejects_dirty_padding() {
        // 5-bit string needs 2 digits; low 3 bits of the last digit must be 0.
        assert!(Bits::from_hex("b1", 5).is_none());
    }

    #[test]
    fn u64_round_trip() {
        let b = Bits::from_u64(0b1011, 4);
        assert_eq!(b.to_u64(), 0b1011);
        assert_eq!(format!("{b}"), "1101"); // bit 0 first
    }

    proptest! {
        #[test]
        fn hex_round_trip(bits in proptest::collection::vec(any::<bool>(), 0..200)) {
            let b = Bits::from_bools(bits);
            let h = b.to_hex();
            prop_assert_eq!(Bits::from_hex(&h, b.len()).unwrap(), b);
        }
    }
}
