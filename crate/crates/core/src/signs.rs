//! Sign calculus and partition combinatorics as pure parity functions.
//!
//! Index conventions: all sublists are 0-based in code. A [`Partition3`] of
//! `[k]` cuts it into a prefix of length `i1`, a middle of length `i2` and the
//! remaining suffix; the 1-based insertion position is `i1 + 1`.

use std::fmt;
use std::ops::{Add, AddAssign, Mul};

use crate::rational::Q;

/// An element of Z/2. `Parity::ODD` means the sign -1.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Parity(bool);

impl Parity {
    pub const EVEN: Parity = Parity(false);
    pub const ODD: Parity = Parity(true);

    pub fn of(n: i64) -> Parity {
        Parity(n.rem_euclid(2) == 1)
    }

    pub fn is_odd(self) -> bool {
        self.0
    }

    pub fn is_even(self) -> bool {
        !self.0
    }

    /// The sign `(-1)^self`.
    pub fn sign(self) -> i64 {
        if self.0 {
            -1
        } else {
            1
        }
    }

    pub fn apply(self, x: Q) -> Q {
        if self.0 {
            -x
        } else {
            x
        }
    }
}

// Addition in Z/2 is exclusive or.
impl Add for Parity {
    type Output = Parity;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn add(self, o: Parity) -> Parity {
        Parity(self.0 ^ o.0)
    }
}

impl AddAssign for Parity {
    #[allow(clippy::suspicious_op_assign_impl)]
    fn add_assign(&mut self, o: Parity) {
        self.0 ^= o.0;
    }
}

impl Mul for Parity {
    type Output = Parity;
    fn mul(self, o: Parity) -> Parity {
        Parity(self.0 && o.0)
    }
}

impl std::iter::Sum for Parity {
    fn sum<I: Iterator<Item = Parity>>(it: I) -> Parity {
        it.fold(Parity::EVEN, |a, b| a + b)
    }
}

impl fmt::Debug for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.0 { "-" } else { "+" })
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Ordered 3-partition of `[k]`: `(0..i1)`, `(i1..i1+i2)`, `(i1+i2..k)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition3 {
    pub k: usize,
    pub i1: usize,
    pub i2: usize,
}

impl Partition3 {
    pub fn new(k: usize, i1: usize, i2: usize) -> Option<Partition3> {
        (i1 + i2 <= k).then_some(Partition3 { k, i1, i2 })
    }
    pub fn first(&self) -> std::ops::Range<usize> {
        0..self.i1
    }
    pub fn middle(&self) -> std::ops::Range<usize> {
        self.i1..self.i1 + self.i2
    }
    pub fn last(&self) -> std::ops::Range<usize> {
        self.i1 + self.i2..self.k
    }
    pub fn i3(&self) -> usize {
        self.k - self.i1 - self.i2
    }
}

/// Complementary order-preserving sublists `I ⊔ J = [l]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SplitIJ {
    pub l: usize,
    pub i: Vec<usize>,
    pub j: Vec<usize>,
}

impl SplitIJ {
    /// Split from a bitmask: bit `b` set means `b ∈ I`.
    pub fn from_mask(l: usize, mask: u64) -> SplitIJ {
        let (i, j) = (0..l).partition(|b| mask >> b & 1 == 1);
        SplitIJ { l, i, j }
    }
}

/// Sign of reordering `(γ^I, γ^J)` back to `γ`: crossing pairs `j ∈ J`, `i ∈ I`, `j < i`.
pub fn koszul_sign(split: &SplitIJ, degs: &[i64]) -> Parity {
    debug_assert_eq!(degs.len(), split.l);
    let mut s = Parity::EVEN;
    for &i in &split.i {
        for &j in &split.j {
            if j < i {
                s += Parity::of(degs[i] * degs[j]);
            }
        }
    }
    s
}

/// Koszul sign of the permutation taking `x_0..x_{l-1}` to `x_{perm[0]}..x_{perm[l-1]}`.
pub fn permutation_sign(perm: &[usize], degs: &[i64]) -> Parity {
    let mut s = Parity::EVEN;
    for a in 0..perm.len() {
        for b in a + 1..perm.len() {
            if perm[a] > perm[b] {
                s += Parity::of(degs[perm[a]] * degs[perm[b]]);
            }
        }
    }
    s
}

/// `ε(α;γ) = Σ j(|α_j|+1) + Σ|γ_j| + kn + 1` with `k = alpha_degs.len()`.
pub fn epsilon(alpha_degs: &[i64], gamma_degs: &[i64], n: i64) -> Parity {
    epsilon_k(alpha_degs.len() as i64, alpha_degs, gamma_degs, n)
}

/// The same formula with an explicit `k`; `k = -1` (no boundary outputs) uses empty `α`.
pub fn epsilon_k(k: i64, alpha_degs: &[i64], gamma_degs: &[i64], n: i64) -> Parity {
    let a: i64 = alpha_degs
        .iter()
        .enumerate()
        .map(|(j, d)| (j as i64 + 1) * (d + 1))
        .sum();
    let g: i64 = gamma_degs.iter().sum();
    Parity::of(a + g + k * n + 1)
}

/// `ι` for inserting the middle block of `part` with interior split `split`.
pub fn iota(alpha_degs: &[i64], gamma_degs: &[i64], part: &Partition3, split: &SplitIJ) -> Parity {
    let pre: i64 = part.first().map(|j| alpha_degs[j] + 1).sum();
    let gj: i64 = split.j.iter().map(|&j| gamma_degs[j]).sum();
    let gi: i64 = split.i.iter().map(|&i| gamma_degs[i]).sum();
    Parity::of(gj * pre + pre + gi) + koszul_sign(split, gamma_degs)
}

/// `δ = k2(k1 - i) + i - n`.
pub fn delta_glue(k1: i64, k2: i64, i: i64, n: i64) -> Parity {
    Parity::of(k2 * (k1 - i) + i - n)
}

/// `(deg_{k+1}+1)·Σ_{j≤k}(deg_j+1)` for the cyclic rotation of `k+1` inputs.
pub fn cyclic_sign(degs: &[i64]) -> Parity {
    match degs.split_last() {
        None => Parity::EVEN,
        Some((last, rest)) => Parity::of((last + 1) * rest.iter().map(|d| d + 1).sum::<i64>()),
    }
}

pub fn enumerate_partitions(k: usize) -> Vec<Partition3> {
    let mut out = Vec::with_capacity((k + 1) * (k + 2) / 2);
    for i1 in 0..=k {
        for i2 in 0..=k - i1 {
            out.push(Partition3 { k, i1, i2 });
        }
    }
    out
}

pub fn enumerate_splits(l: usize) -> Vec<SplitIJ> {
    assert!(l < 64, "interior arity too large");
    (0..1u64 << l).map(|m| SplitIJ::from_mask(l, m)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn koszul_examples() {
        let id = SplitIJ { l: 3, i: vec![0, 1, 2], j: vec![] };
        assert_eq!(koszul_sign(&id, &[1, 1, 1]), Parity::EVEN);
        let sw = SplitIJ { l: 2, i: vec![1], j: vec![0] };
        assert_eq!(koszul_sign(&sw, &[1, 1]), Parity::ODD);
        for s in enumerate_splits(4) {
            assert_eq!(koszul_sign(&s, &[2, 0, 2, 4]), Parity::EVEN);
        }
    }

    #[test]
    fn epsilon_examples() {
        assert_eq!(epsilon(&[], &[], 3), Parity::ODD);
        assert_eq!(epsilon(&[0], &[], 2), Parity::EVEN);
        assert_eq!(epsilon(&[1, 1], &[2], 1), Parity::ODD);
    }

    #[test]
    fn iota_examples() {
        let all = SplitIJ { l: 2, i: vec![0, 1], j: vec![] };
        let p = Partition3 { k: 2, i1: 0, i2: 1 };
        assert_eq!(iota(&[1, 0], &[1, 2], &p, &all), Parity::ODD);
        let q = Partition3 { k: 3, i1: 2, i2: 1 };
        for s in enumerate_splits(3) {
            assert_eq!(iota(&[1, 0, 3], &[2, 2, 2], &q, &s), Parity::of(2 + 1));
        }
        let e = Partition3 { k: 0, i1: 0, i2: 0 };
        assert_eq!(iota(&[], &[], &e, &SplitIJ::from_mask(0, 0)), Parity::EVEN);
    }

    #[test]
    fn delta_and_cyclic_examples() {
        assert_eq!(delta_glue(0, 0, 0, 3), Parity::ODD);
        assert_eq!(delta_glue(1, 0, 1, 2), Parity::ODD);
        for n in 0..4 {
            assert_eq!(delta_glue(3, 2, 1, n) + delta_glue(3, 2, 1, n + 1), Parity::ODD);
        }
        assert_eq!(cyclic_sign(&[1, 3, 1]), Parity::EVEN);
        assert_eq!(cyclic_sign(&[0, 0]), Parity::ODD);
        assert_eq!(cyclic_sign(&[1, 0, 1]), Parity::EVEN);
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_partitions(0).len(), 1);
        for k in 0..7 {
            assert_eq!(enumerate_partitions(k).len(), (k + 1) * (k + 2) / 2);
        }
        assert_eq!(enumerate_splits(3).len(), 8);
        let mut seen = std::collections::HashSet::new();
        for s in enumerate_splits(5) {
            assert!(seen.insert((s.i.clone(), s.j.clone())));
        }
    }

    #[test]
    fn shuffle_is_a_permutation_sign() {
        for l in 0..=5usize {
            let degs: Vec<i64> = (0..l as i64).map(|x| x * 3 + 1).collect();
            for s in enumerate_splits(l) {
                let perm: Vec<usize> = s.i.iter().chain(&s.j).copied().collect();
                assert_eq!(koszul_sign(&s, &degs), permutation_sign(&perm, &degs));
            }
        }
    }
}
