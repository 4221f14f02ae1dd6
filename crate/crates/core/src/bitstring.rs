use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed-length binary assignment.
///
/// Variable `b` is bit `b` of `value`; in text form variable 0 is the leftmost
/// character. `value` is therefore also the statevector basis index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bitstring {
    value: u64,
    len: usize,
}

impl Bitstring {
    pub const MAX_LEN: usize = 64;

    pub fn new(value: u64, len: usize) -> Result<Self> {
        if len > Self::MAX_LEN {
            return Err(Error::invalid(format!("bitstring length {len} exceeds 64")));
        }
        if len < 64 && value >> len != 0 {
            return Err(Error::invalid(format!(
                "value {value} does not fit in {len} bits"
            )));
        }
        Ok(Self { value, len })
    }

    pub fn zeros(len: usize) -> Self {
        Self { value: 0, len }
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        let mut value = 0u64;
        for (b, &on) in bits.iter().enumerate() {
            if on {
                value |= 1 << b;
            }
        }
        Self::new(value, bits.len())
    }

    #[inline]
    pub fn value(&self) -> u64 {
        self.value
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, b: usize) -> bool {
        (self.value >> b) & 1 == 1
    }

    pub fn with(mut self, b: usize, on: bool) -> Self {
        if on {
            self.value |= 1 << b;
        } else {
            self.value &= !(1 << b);
        }
        self
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |b| self.get(b))
    }

    pub fn count_ones(&self) -> u32 {
        self.value.count_ones()
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.bits().map(|b| if b { '1' } else { '0' }).collect();
        f.write_str(&s)
    }
}

impl FromStr for Bitstring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|ch| match ch {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::invalid(format!("bad bit character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_bits(&bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn leftmost_is_bit_zero() {
        let b: Bitstring = "100".parse().unwrap();
        assert_eq!(b.value(), 1);
        assert!(b.get(0));
        let b: Bitstring = "001".parse().unwrap();
        assert_eq!(b.value(), 4);
    }

    #[test]
    fn rejects_junk() {
        assert!("10x".parse::<Bitstring>().is_err());
        assert!(Bitstring::new(8, 3).is_err());
    }

    proptest! {
        #[test]
        fn text_round_trip(value in 0u64..4096) {
            let b = Bitstring::new(value, 12).unwrap();
            let back: Bitstring = b.to_string().parse().unwrap();
            prop_assert_eq!(b, back);
        }
    }
}
