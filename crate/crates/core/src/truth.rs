// SPDX-License-Identifier: Apache-2.0
//! Truth tables over at most [`MAX_VARS`] variables.

use std::fmt;

use serde::{Deserialize, Serialize};

pub const MAX_VARS: usize = 8;
const WORDS: usize = 1 << (MAX_VARS - 6);

/// Bit `m` of the table is the function value on minterm `m`, where bit `j`
/// of `m` is the value of variable `j`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct TruthTable {
    vars: u8,
    words: [u64; WORDS],
}

impl TruthTable {
    pub fn constant(vars: usize, value: bool) -> Self {
        let mut t = Self { vars: vars as u8, words: [0; WORDS] };
        if value {
            t.words = [!0; WORDS];
            t.mask();
        }
        t
    }

    /// Projection onto variable `var`.
    pub fn var(vars: usize, var: usize) -> Self {
        assert!(var < vars && vars <= MAX_VARS);
        Self::from_fn(vars, |m| (m >> var) & 1 == 1)
    }

    pub fn from_fn(vars: usize, f: impl Fn(usize) -> bool) -> Self {
        assert!(vars <= MAX_VARS, "truth table limited to {MAX_VARS} variables");
        let mut t = Self { vars: vars as u8, words: [0; WORDS] };
        for m in 0..(1usize << vars) {
            if f(m) {
                t.set(m, true);
            }
        }
        t
    }

    pub fn vars(&self) -> usize {
        self.vars as usize
    }

    pub fn len(&self) -> usize {
        1 << self.vars
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn get(&self, minterm: usize) -> bool {
        (self.words[minterm >> 6] >> (minterm & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, minterm: usize, value: bool) {
        let w = &mut self.words[minterm >> 6];
        if value {
            *w |= 1 << (minterm & 63);
        } else {
            *w &= !(1 << (minterm & 63));
        }
    }

    fn mask(&mut self) {
        let n = self.len();
        if n < 64 {
            self.words[0] &= (1u64 << n) - 1;
            for w in &mut self.words[1..] {
                *w = 0;
            }
        } else {
            for w in &mut self.words[n / 64..] {
                *w = 0;
            }
        }
    }

    pub fn not(&self) -> Self {
        let mut t = *self;
        for w in &mut t.words {
            *w = !*w;
        }
        t.mask();
        t
    }

    pub fn zip(&self, other: &Self, f: impl Fn(u64, u64) -> u64) -> Self {
        debug_assert_eq!(self.vars, other.vars);
        let mut t = *self;
        for (a, b) in t.words.iter_mut().zip(other.words.iter()) {
            *a = f(*a, *b);
        }
        t.mask();
        t
    }

    pub fn mux(sel: &Self, a: &Self, b: &Self) -> Self {
        let mut t = *sel;
        for i in 0..WORDS {
            t.words[i] = (sel.words[i] & a.words[i]) | (!sel.words[i] & b.words[i]);
        }
        t.mask();
        t
    }

    pub fn is_const(&self) -> Option<bool> {
        if *self == Self::constant(self.vars(), false) {
            Some(false)
        } else if *self == Self::constant(self.vars(), true) {
            Some(true)
        } else {
            None
        }
    }

    pub fn depends_on(&self, var: usize) -> bool {
        (0..self.len()).any(|m| m & (1 << var) == 0 && self.get(m) != self.get(m | (1 << var)))
    }

    /// Re-expresses the table over a larger variable list: `mapping[j]` is
    /// the position of current variable `j` among the `vars` new variables.
    pub fn expand(&self, vars: usize, mapping: &[usize]) -> Self {
        debug_assert_eq!(mapping.len(), self.vars());
        Self::from_fn(vars, |m| {
            let mut idx = 0;
            for (j, &pos) in mapping.iter().enumerate() {
                idx |= ((m >> pos) & 1) << j;
            }
            self.get(idx)
        })
    }

    /// Drops variables not in `keep` (which must be a superset of the
    /// support). Returns the reduced table over `keep.len()` variables.
    pub fn restrict(&self, keep: &[usize]) -> Self {
        Self::from_fn(keep.len(), |m| {
            let mut idx = 0;
            for (j, &pos) in keep.iter().enumerate() {
                idx |= ((m >> j) & 1) << pos;
            }
            self.get(idx)
        })
    }

    /// Evaluates on 64 lanes; `inputs[j]` holds the lanes of variable `j`.
    pub fn eval_lanes(&self, inputs: &[u64]) -> u64 {
        debug_assert_eq!(inputs.len(), self.vars());
        if let Some(c) = self.is_const_fast() {
            return if c { !0 } else { 0 };
        }
        let mut out = 0u64;
        for lane in 0..64 {
            let mut idx = 0usize;
            for (j, w) in inputs.iter().enumerate() {
                idx |= (((w >> lane) & 1) as usize) << j;
            }
            if self.get(idx) {
                out |= 1 << lane;
            }
        }
        out
    }

    fn is_const_fast(&self) -> Option<bool> {
        if self.vars == 0 {
            Some(self.words[0] & 1 == 1)
        } else {
            None
        }
    }

    /// Hex string, most significant minterm first, at least one digit.
    pub fn to_hex(&self) -> String {
        let digits = self.len().div_ceil(4);
        (0..digits)
            .rev()
            .map(|d| {
                let mut nib = 0;
                for b in 0..4 {
                    let m = d * 4 + b;
                    if m < self.len() && self.get(m) {
                        nib |= 1 << b;
                    }
                }
                char::from_digit(nib, 16).unwrap()
            })
            .collect()
    }

    pub fn from_hex(vars: usize, hex: &str) -> Option<Self> {
        if vars > MAX_VARS {
            return None;
        }
        let mut t = Self::constant(vars, false);
        for (d, c) in hex.chars().rev().enumerate() {
            let nib = c.to_digit(16)?;
            for b in 0..4 {
                let m = d * 4 + b;
                if nib & (1 << b) != 0 {
                    if m >= t.len() {
                        return None;
                    }
                    t.set(m, true);
                }
            }
        }
        Some(t)
    }
}

impl fmt::Debug for TruthTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TruthTable({}; 0x{})", self.vars, self.to_hex())
    }
}

impl Serialize for TruthTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("TruthTable", 2)?;
        st.serialize_field("vars", &self.vars)?;
        st.serialize_field("hex", &self.to_hex())?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for TruthTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            vars: usize,
            hex: String,
        }
        let raw = Raw::deserialize(d)?;
        TruthTable::from_hex(raw.vars, &raw.hex)
            .ok_or_else(|| serde::de::Error::custom("malformed truth table"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xor_hex_and_expand() {
        let a = TruthTable::var(2, 0);
        let b = TruthTable::var(2, 1);
        let x = a.zip(&b, |p, q| p ^ q);
        assert_eq!(x.to_hex(), "6");
        let wide = x.expand(4, &[0, 1]);
        assert_eq!(wide.to_hex(), "6666");
        assert!(!wide.depends_on(3));
        assert_eq!(wide.restrict(&[0, 1]), x);
        assert_eq!(TruthTable::from_hex(4, "6666"), Some(wide));
    }

    #[test]
    fn eight_variable_tables() {
        let t = TruthTable::var(8, 7);
        assert!(t.get(128) && !t.get(127));
        assert_eq!(t.not().not(), t);
        assert_eq!(TruthTable::constant(8, true).is_const(), Some(true));
    }

    #[test]
    fn lane_evaluation_matches_lookup() {
        let t = TruthTable::from_fn(3, |m| m.count_ones() >= 2);
        let ins = [0b1010_1010u64, 0b1100_1100, 0b1111_0000];
        assert_eq!(t.eval_lanes(&ins) & 0xff, 0b1110_1000);
    }
}
