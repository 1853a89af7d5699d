//! Subsets of {0..t} as bitmasks, ordered by mask value, plus wedge signs.

use std::collections::HashMap;

#[derive(Clone, Debug)]
pub struct Combos {
    pub t: usize,
    pub r: usize,
    pub list: Vec<u32>,
    index: HashMap<u32, usize>,
}

impl Combos {
    pub fn new(t: usize, r: usize) -> Combos {
        assert!(t < 32);
        let list: Vec<u32> = if r > t {
            vec![]
        } else {
            (0u32..(1u32 << t)).filter(|m| m.count_ones() as usize == r).collect()
        };
        let index = list.iter().enumerate().map(|(i, &m)| (m, i)).collect();
        Combos { t, r, list, index }
    }

    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }

    pub fn idx(&self, mask: u32) -> usize {
        self.index[&mask]
    }

    pub fn get(&self, mask: u32) -> Option<usize> {
        self.index.get(&mask).copied()
    }
}

pub fn elems(mask: u32) -> Vec<usize> {
    (0..32).filter(|i| mask >> i & 1 == 1).collect()
}

/// Sign of e_K ^ e_J = sign * e_{K u J} for disjoint K, J: parity of pairs
/// (a in K, b in J) with a > b.
pub fn wedge_sign(k: u32, j: u32) -> bool {
    let mut n = 0;
    for a in elems(k) {
        n += (j & ((1u32 << a) - 1)).count_ones();
    }
    n % 2 == 1
}

/// Number of r-subsets of t elements.
pub fn binom(t: usize, r: usize) -> usize {
    if r > t {
        return 0;
    }
    (0..r).fold(1usize, |acc, i| acc * (t - i) / (i + 1))
}
