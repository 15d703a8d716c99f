//! Packed Pauli strings, product bases and the abelian groups `K_beta`.
//!
//! Qubit `i` is bit `i` of every mask (qubit 0 is the least significant bit).
//! The text form writes qubit 0 first, so `"XIZ"` is `X` on qubit 0 and `Z`
//! on qubit 2.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 64;

fn mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::QubitCount(n));
    }
    Ok(())
}

fn check_same(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::LengthMismatch { expected, got });
    }
    Ok(())
}

/// An `n`-bit string; used both as an eigenstate label `b` and a column label `c`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    n: usize,
    bits: u64,
}

impl BitString {
    pub fn new(n: usize, bits: u64) -> Result<Self> {
        check_n(n)?;
        if bits & !mask(n) != 0 {
            return Err(Error::BitsOverflow { n, value: bits });
        }
        Ok(Self { n, bits })
    }

    pub fn zero(n: usize) -> Self {
        assert!((1..=MAX_QUBITS).contains(&n), "qubit count {n} out of range");
        Self { n, bits: 0 }
    }

    /// Sets bit `i` for every `i` in `ones`.
    pub fn from_indices(n: usize, ones: &[usize]) -> Result<Self> {
        check_n(n)?;
        let mut bits = 0u64;
        for &i in ones {
            if i >= n {
                return Err(Error::InvalidParameter(format!("bit index {i} >= n = {n}")));
            }
            bits |= 1 << i;
        }
        Ok(Self { n, bits })
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let bits = rng.random::<u64>() & mask(n);
        Self { n, bits }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn bits(&self) -> u64 {
        self.bits
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        (self.bits >> i) & 1 == 1
    }

    /// Hamming weight `|b|`.
    #[inline]
    pub fn weight(&self) -> usize {
        self.bits.count_ones() as usize
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        self.bits == 0
    }

    /// Mod-2 inner product `c . b`.
    #[inline]
    pub fn dot(&self, other: &BitString) -> bool {
        (self.bits & other.bits).count_ones() & 1 == 1
    }
}

impl fmt::Display for BitString {
    /// Bit 0 first, matching the Pauli text convention.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n = s.chars().count();
        check_n(n)?;
        let mut bits = 0u64;
        for (i, ch) in s.chars().enumerate() {
            match ch {
                '0' => {}
                '1' => bits |= 1 << i,
                other => return Err(Error::Format(format!("bad bit {other:?} in {s:?}"))),
            }
        }
        Ok(Self { n, bits })
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// One of the three single-qubit Pauli axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn as_char(self) -> char {
        match self {
            Axis::X => 'x',
            Axis::Y => 'y',
            Axis::Z => 'z',
        }
    }

    pub fn pauli(self) -> Pauli {
        match self {
            Axis::X => Pauli::X,
            Axis::Y => Pauli::Y,
            Axis::Z => Pauli::Z,
        }
    }
}

/// Single-qubit Pauli label (no phase).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    /// `(x, z)` symplectic bits.
    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// Per-qubit measurement/reshaping axes `beta in {x, y, z}^n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BasisAxes {
    axes: Vec<Axis>,
    x_part: u64,
    z_part: u64,
}

impl BasisAxes {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        check_n(axes.len())?;
        let mut x_part = 0u64;
        let mut z_part = 0u64;
        for (i, a) in axes.iter().enumerate() {
            let (x, z) = a.pauli().bits();
            x_part |= (x as u64) << i;
            z_part |= (z as u64) << i;
        }
        Ok(Self {
            axes,
            x_part,
            z_part,
        })
    }

    pub fn uniform(n: usize, axis: Axis) -> Result<Self> {
        Self::new(vec![axis; n])
    }

    /// Uniform draw from `{x, y, z}^n`.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let axes = (0..n).map(|_| Axis::ALL[rng.random_range(0..3)]).collect();
        Self::new(axes).expect("n validated by caller")
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> Axis {
        self.axes[i]
    }
}

impl fmt::Display for BasisAxes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.axes {
            write!(f, "{}", a.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for BasisAxes {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let axes = s
            .chars()
            .map(|c| match c.to_ascii_lowercase() {
                'x' => Ok(Axis::X),
                'y' => Ok(Axis::Y),
                'z' => Ok(Axis::Z),
                _ => Err(Error::BasisParse(s.to_string())),
            })
            .collect::<Result<Vec<_>>>()?;
        BasisAxes::new(axes).map_err(|_| Error::BasisParse(s.to_string()))
    }
}

impl Serialize for BasisAxes {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BasisAxes {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An unsigned `n`-qubit Pauli operator in symplectic form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: u64,
    z: u64,
}

impl PauliString {
    pub fn new(n: usize, x: u64, z: u64) -> Result<Self> {
        check_n(n)?;
        if (x | z) & !mask(n) != 0 {
            return Err(Error::BitsOverflow { n, value: x | z });
        }
        Ok(Self { n, x, z })
    }

    pub fn identity(n: usize) -> Self {
        assert!((1..=MAX_QUBITS).contains(&n), "qubit count {n} out of range");
        Self { n, x: 0, z: 0 }
    }

    pub fn from_sites(sites: &[Pauli]) -> Result<Self> {
        check_n(sites.len())?;
        let mut x = 0u64;
        let mut z = 0u64;
        for (i, p) in sites.iter().enumerate() {
            let (xb, zb) = p.bits();
            x |= (xb as u64) << i;
            z |= (zb as u64) << i;
        }
        Ok(Self { n: sites.len(), x, z })
    }

    /// `p` on qubit `i`, identity elsewhere.
    pub fn single(n: usize, i: usize, p: Pauli) -> Result<Self> {
        let mut sites = vec![Pauli::I; n];
        if i >= n {
            return Err(Error::InvalidParameter(format!("qubit {i} >= n = {n}")));
        }
        sites[i] = p;
        Self::from_sites(&sites)
    }

    /// `p` on qubits `i` and `j`.
    pub fn pair(n: usize, i: usize, pi: Pauli, j: usize, pj: Pauli) -> Result<Self> {
        if i >= n || j >= n || i == j {
            return Err(Error::InvalidParameter(format!(
                "invalid qubit pair ({i}, {j}) for n = {n}"
            )));
        }
        let mut sites = vec![Pauli::I; n];
        sites[i] = pi;
        sites[j] = pj;
        Self::from_sites(&sites)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn x_mask(&self) -> u64 {
        self.x
    }

    #[inline]
    pub fn z_mask(&self) -> u64 {
        self.z
    }

    /// Qubits carrying a non-identity factor.
    #[inline]
    pub fn support(&self) -> u64 {
        self.x | self.z
    }

    pub fn site(&self, i: usize) -> Pauli {
        Pauli::from_bits((self.x >> i) & 1 == 1, (self.z >> i) & 1 == 1)
    }

    pub fn sites(&self) -> Vec<Pauli> {
        (0..self.n).map(|i| self.site(i)).collect()
    }

    #[inline]
    pub fn weight(&self) -> usize {
        self.support().count_ones() as usize
    }

    #[inline]
    pub fn is_identity(&self) -> bool {
        self.support() == 0
    }

    /// Number of `Y` factors; fixes the phase `i^{#Y}` of the `X^x Z^z` product form.
    #[inline]
    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// Symplectic commutation test.
    pub fn commutes(&self, other: &PauliString) -> Result<bool> {
        check_same(self.n, other.n)?;
        Ok(self.commutes_unchecked(other))
    }

    #[inline]
    pub(crate) fn commutes_unchecked(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) & 1 == 0
    }

    /// True iff every non-identity site carries exactly `sigma^{beta_i}`.
    pub fn in_kbeta(&self, beta: &BasisAxes) -> Result<bool> {
        check_same(beta.n(), self.n)?;
        Ok(self.kbeta_bits_unchecked(beta).is_some())
    }

    /// The bit string `c` with `kbeta_from_bits(beta, c) == self`, if `self` is in `K_beta`.
    pub fn kbeta_bits(&self, beta: &BasisAxes) -> Result<Option<BitString>> {
        check_same(beta.n(), self.n)?;
        Ok(self.kbeta_bits_unchecked(beta))
    }

    #[inline]
    pub(crate) fn kbeta_bits_unchecked(&self, beta: &BasisAxes) -> Option<BitString> {
        let s = self.support();
        if self.x == s & beta.x_part && self.z == s & beta.z_part {
            Some(BitString { n: self.n, bits: s })
        } else {
            None
        }
    }

    /// Text-order key: per-site codes I < X < Y < Z, qubit 0 most significant.
    fn site_code(&self, i: usize) -> u8 {
        match self.site(i) {
            Pauli::I => 0,
            Pauli::X => 1,
            Pauli::Y => 2,
            Pauli::Z => 3,
        }
    }
}

impl Ord for PauliString {
    /// Lexicographic order of the text form.
    fn cmp(&self, other: &Self) -> Ordering {
        let common = self.n.min(other.n);
        for i in 0..common {
            match self.site_code(i).cmp(&other.site_code(i)) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.n.cmp(&other.n)
    }
}

impl PartialOrd for PauliString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            write!(f, "{}", self.site(i).as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let sites = s
            .chars()
            .map(|c| Pauli::from_char(c).ok_or_else(|| Error::PauliParse(s.to_string())))
            .collect::<Result<Vec<_>>>()?;
        PauliString::from_sites(&sites).map_err(|_| Error::PauliParse(s.to_string()))
    }
}

impl Serialize for PauliString {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `weight(P)`: number of non-identity sites.
pub fn weight(p: &PauliString) -> usize {
    p.weight()
}

pub fn in_kbeta(p: &PauliString, beta: &BasisAxes) -> Result<bool> {
    p.in_kbeta(beta)
}

pub fn commutes(p: &PauliString, q: &PauliString) -> Result<bool> {
    p.commutes(q)
}

/// `P_c = prod_i (sigma^{beta_i})^{c_i}`.
pub fn kbeta_from_bits(beta: &BasisAxes, c: &BitString) -> Result<PauliString> {
    check_same(beta.n(), c.n())?;
    Ok(kbeta_from_bits_unchecked(beta, c.bits()))
}

#[inline]
pub(crate) fn kbeta_from_bits_unchecked(beta: &BasisAxes, c: u64) -> PauliString {
    PauliString {
        n: beta.n(),
        x: c & beta.x_part,
        z: c & beta.z_part,
    }
}

/// Result of the group average `2^{-n} sum_{Q in K_beta} Q P Q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reshaped {
    /// The average returns `P` unchanged.
    Kept,
    /// The average vanishes.
    Annihilated,
}

/// `K_beta` is its own centralizer, so the average keeps exactly its members.
pub fn reshape_average(p: &PauliString, beta: &BasisAxes) -> Result<Reshaped> {
    Ok(if p.in_kbeta(beta)? {
        Reshaped::Kept
    } else {
        Reshaped::Annihilated
    })
}

/// Uniform element of `K_beta`.
pub fn sample_kbeta<R: Rng + ?Sized>(beta: &BasisAxes, rng: &mut R) -> PauliString {
    let c = rng.random::<u64>() & mask(beta.n());
    kbeta_from_bits_unchecked(beta, c)
}

/// All `2^n` members of `K_beta`, ordered by their bit label.
pub fn enumerate_kbeta(beta: &BasisAxes) -> Result<Vec<PauliString>> {
    if beta.n() > 24 {
        return Err(Error::InvalidParameter(format!(
            "refusing to enumerate 2^{} group elements",
            beta.n()
        )));
    }
    Ok((0..1u64 << beta.n())
        .map(|c| kbeta_from_bits_unchecked(beta, c))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn weight_examples() {
        assert_eq!(PauliString::identity(5).weight(), 0);
        assert_eq!(ps("XYI").weight(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let p = PauliString::new(10, rng.random::<u64>() & 0x3ff, rng.random::<u64>() & 0x3ff)
                .unwrap();
            let decoded = p.sites().iter().filter(|s| **s != Pauli::I).count();
            assert_eq!(weight(&p), decoded);
        }
    }

    #[test]
    fn text_codec_qubit_zero_first() {
        let p = ps("XIZ");
        assert_eq!(p.site(0), Pauli::X);
        assert_eq!(p.site(1), Pauli::I);
        assert_eq!(p.site(2), Pauli::Z);
        assert_eq!(p.to_string(), "XIZ");
        assert!("XQ".parse::<PauliString>().is_err());
        assert!("".parse::<PauliString>().is_err());
    }

    #[test]
    fn kbeta_membership() {
        let beta: BasisAxes = "xz".parse().unwrap();
        assert!(in_kbeta(&ps("XI"), &beta).unwrap());
        assert!(!in_kbeta(&ps("ZI"), &beta).unwrap());
        assert!(in_kbeta(&ps("XI"), &"xzz".parse().unwrap()).is_err());

        let beta3: BasisAxes = "yxz".parse().unwrap();
        let all = enumerate_kbeta(&beta3).unwrap();
        assert_eq!(all.len(), 8);
        let distinct: std::collections::HashSet<_> = all.iter().collect();
        assert_eq!(distinct.len(), 8);
        assert!(all.iter().all(|p| p.in_kbeta(&beta3).unwrap()));
    }

    #[test]
    fn kbeta_from_bits_examples() {
        let beta: BasisAxes = "zy".parse().unwrap();
        let id = kbeta_from_bits(&beta, &BitString::zero(2)).unwrap();
        assert!(id.is_identity());
        // c = 01 in text order means bit 1 set: I on qubit 0, Y on qubit 1.
        let c = BitString::from_indices(2, &[1]).unwrap();
        assert_eq!(kbeta_from_bits(&beta, &c).unwrap(), ps("IY"));
    }

    #[test]
    fn kbeta_round_trip_and_weight() {
        let beta: BasisAxes = "xyzx".parse().unwrap();
        for c in 0..16u64 {
            let bs = BitString::new(4, c).unwrap();
            let p = kbeta_from_bits(&beta, &bs).unwrap();
            assert_eq!(p.kbeta_bits(&beta).unwrap(), Some(bs));
            assert_eq!(p.weight(), bs.weight());
        }
    }

    #[test]
    fn commutation_basics() {
        assert!(commutes(&ps("X"), &ps("X")).unwrap());
        assert!(!commutes(&ps("X"), &ps("Z")).unwrap());
        assert!(commutes(&ps("XX"), &ps("ZZ")).unwrap());
        assert!(commutes(&ps("X"), &ps("XX")).is_err());
    }

    #[test]
    fn kbeta_is_abelian() {
        for beta_s in ["xyzx", "zzzz", "xyy"] {
            let beta: BasisAxes = beta_s.parse().unwrap();
            let all = enumerate_kbeta(&beta).unwrap();
            for p in &all {
                for q in &all {
                    assert!(p.commutes(q).unwrap());
                }
            }
        }
    }

    #[test]
    fn reshape_examples() {
        let beta: BasisAxes = "xz".parse().unwrap();
        assert_eq!(reshape_average(&ps("IZ"), &beta).unwrap(), Reshaped::Kept);
        assert_eq!(
            reshape_average(&ps("ZI"), &beta).unwrap(),
            Reshaped::Annihilated
        );
    }

    #[test]
    fn sample_kbeta_membership_and_determinism() {
        let beta: BasisAxes = "xyzzy".parse().unwrap();
        let mut a = ChaCha8Rng::seed_from_u64(11);
        let mut b = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let p = sample_kbeta(&beta, &mut a);
            assert!(p.in_kbeta(&beta).unwrap());
            assert_eq!(p, sample_kbeta(&beta, &mut b));
        }
    }

    #[test]
    fn sample_kbeta_is_uniform() {
        let beta: BasisAxes = "xz".parse().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            let c = sample_kbeta(&beta, &mut rng).kbeta_bits(&beta).unwrap().unwrap();
            counts[c.bits() as usize] += 1;
        }
        // chi-square with 3 dof; 16.27 is the 0.1% critical value
        let expected = draws as f64 / 4.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 16.27, "chi2 = {chi2}");
        for c in counts {
            assert!((c as f64 / draws as f64 - 0.25).abs() < 0.01);
        }
    }

    #[test]
    fn ordering_matches_text() {
        let mut v: Vec<PauliString> = ["ZI", "IX", "XY", "IZ", "YI", "XX"]
            .iter()
            .map(|s| ps(s))
            .collect();
        v.sort();
        let text: Vec<String> = v.iter().map(|p| p.to_string()).collect();
        let mut sorted = text.clone();
        sorted.sort();
        assert_eq!(text, sorted);
    }
}
