//! Sparse k-body Pauli Hamiltonians, instance generators and the
//! commuting effective Hamiltonian left after reshaping onto `K_beta`.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dense::{check_dense, CMatrix, C64};
use crate::error::{Error, Result};
use crate::pauli::{BasisAxes, BitString, Pauli, PauliString};

pub const HAMILTONIAN_SCHEMA: &str = "hamlearn.hamiltonian/1";

/// Couplings with magnitude below this are not stored.
pub const COUPLING_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strictness {
    /// Reject terms heavier than `declared_k` and more than `declared_m` terms.
    Strict,
    /// Accept such terms but keep track of the excess.
    Relaxed,
}

/// How much a relaxed Hamiltonian exceeds its declared `(k, M)` model.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelExcess {
    pub overweight_terms: usize,
    /// l1 mass of the terms heavier than `declared_k`.
    pub overweight_l1: f64,
    pub extra_terms: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseHamiltonian {
    n: usize,
    declared_k: usize,
    declared_m: usize,
    strictness: Strictness,
    terms: BTreeMap<PauliString, f64>,
}

impl SparseHamiltonian {
    pub fn new(n: usize, declared_k: usize, declared_m: usize, strictness: Strictness) -> Result<Self> {
        if n == 0 || n > crate::pauli::MAX_QUBITS {
            return Err(Error::QubitCount(n));
        }
        if declared_k > n {
            return Err(Error::InvalidParameter(format!("k = {declared_k} exceeds n = {n}")));
        }
        Ok(Self {
            n,
            declared_k,
            declared_m,
            strictness,
            terms: BTreeMap::new(),
        })
    }

    /// Strict Hamiltonian whose declared `M` is the number of supplied terms.
    pub fn from_terms<I>(n: usize, k: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (PauliString, f64)>,
    {
        let terms: Vec<_> = terms.into_iter().collect();
        let mut h = Self::new(n, k, terms.len(), Strictness::Strict)?;
        for (p, c) in terms {
            h.insert(p, c)?;
        }
        Ok(h)
    }

    pub fn insert(&mut self, p: PauliString, coeff: f64) -> Result<()> {
        let violation = |reason: String| Error::ModelViolation {
            pauli: p.to_string(),
            reason,
        };
        if p.n() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: p.n(),
            });
        }
        if p.is_identity() {
            return Err(violation("identity term is fixed to zero".into()));
        }
        if !coeff.is_finite() || coeff == 0.0 {
            return Err(violation(format!("coefficient {coeff} must be finite and nonzero")));
        }
        if coeff.abs() > 1.0 {
            return Err(violation(format!("|coefficient| = {} exceeds 1", coeff.abs())));
        }
        if self.strictness == Strictness::Strict {
            if p.weight() > self.declared_k {
                return Err(violation(format!(
                    "weight {} exceeds declared k = {}",
                    p.weight(),
                    self.declared_k
                )));
            }
            if !self.terms.contains_key(&p) && self.terms.len() >= self.declared_m {
                return Err(violation(format!(
                    "term count would exceed declared M = {}",
                    self.declared_m
                )));
            }
        }
        self.terms.insert(p, coeff);
        Ok(())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn declared_k(&self) -> usize {
        self.declared_k
    }

    pub fn declared_m(&self) -> usize {
        self.declared_m
    }

    pub fn strictness(&self) -> Strictness {
        self.strictness
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &BTreeMap<PauliString, f64> {
        &self.terms
    }

    pub fn coeff(&self, p: &PauliString) -> f64 {
        self.terms.get(p).copied().unwrap_or(0.0)
    }

    pub fn l1_norm(&self) -> f64 {
        self.terms.values().map(|c| c.abs()).sum()
    }

    pub fn excess(&self) -> ModelExcess {
        let mut e = ModelExcess::default();
        for (p, c) in &self.terms {
            if p.weight() > self.declared_k {
                e.overweight_terms += 1;
                e.overweight_l1 += c.abs();
            }
        }
        e.extra_terms = self.terms.len().saturating_sub(self.declared_m);
        e
    }

    /// Keeps the terms that survive reshaping onto `K_beta`, keyed by their bit label.
    pub fn effective(&self, beta: &BasisAxes) -> Result<EffectiveHamiltonian> {
        if beta.n() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: beta.n(),
            });
        }
        let coeffs = self
            .terms
            .iter()
            .filter_map(|(p, &mu)| p.kbeta_bits_unchecked(beta).map(|c| (c, mu)))
            .collect();
        Ok(EffectiveHamiltonian {
            beta: beta.clone(),
            coeffs,
        })
    }

    /// `sum_P mu_P P` as a dense `2^n x 2^n` matrix.
    pub fn dense_matrix(&self) -> Result<CMatrix> {
        crate::dense::dense_from_terms(self.n, self.terms.iter().map(|(p, &c)| (*p, c)))
    }

    pub fn to_file(&self, provenance: Option<serde_json::Value>) -> HamiltonianFile {
        HamiltonianFile {
            schema: HAMILTONIAN_SCHEMA.to_string(),
            n: self.n,
            k: self.declared_k,
            terms: self
                .terms
                .iter()
                .map(|(p, &coeff)| TermRecord { pauli: *p, coeff })
                .collect(),
            provenance,
        }
    }

    pub fn to_json(&self, provenance: Option<serde_json::Value>) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_file(provenance))
            .expect("hamiltonian serialization cannot fail");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: HamiltonianFile =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        file.into_hamiltonian()
    }
}

/// On-disk Hamiltonian: terms sorted by Pauli text for diffability.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HamiltonianFile {
    #[serde(default = "default_schema")]
    pub schema: String,
    pub n: usize,
    pub k: usize,
    pub terms: Vec<TermRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

fn default_schema() -> String {
    HAMILTONIAN_SCHEMA.to_string()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermRecord {
    pub pauli: PauliString,
    pub coeff: f64,
}

impl HamiltonianFile {
    /// Files may hold terms heavier than `k`; such Hamiltonians load relaxed.
    pub fn into_hamiltonian(self) -> Result<SparseHamiltonian> {
        if self.schema != HAMILTONIAN_SCHEMA {
            return Err(Error::Format(format!("unsupported schema {:?}", self.schema)));
        }
        let relaxed = self.terms.iter().any(|t| t.pauli.weight() > self.k);
        let strictness = if relaxed {
            Strictness::Relaxed
        } else {
            Strictness::Strict
        };
        let mut h = SparseHamiltonian::new(self.n, self.k, self.terms.len(), strictness)?;
        for t in self.terms {
            if h.terms.contains_key(&t.pauli) {
                return Err(Error::Format(format!("duplicate term {}", t.pauli)));
            }
            h.insert(t.pauli, t.coeff)?;
        }
        Ok(h)
    }
}

/// Law for the planted coefficients of random instances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum CoeffLaw {
    /// Uniform on `[-1, 1]` without zero.
    Uniform,
    /// Magnitude uniform on `[min, 1]`, independent fair sign.
    SignedMagnitude { min: f64 },
}

impl Default for CoeffLaw {
    fn default() -> Self {
        CoeffLaw::SignedMagnitude { min: 0.1 }
    }
}

impl CoeffLaw {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            CoeffLaw::Uniform => loop {
                let v: f64 = rng.random_range(-1.0..=1.0);
                if v != 0.0 {
                    return v;
                }
            },
            CoeffLaw::SignedMagnitude { min } => {
                let mag = if min >= 1.0 {
                    1.0
                } else {
                    rng.random_range(min..=1.0)
                };
                if rng.random_bool(0.5) {
                    mag
                } else {
                    -mag
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let CoeffLaw::SignedMagnitude { min } = *self {
            if !(min > 0.0 && min <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "coefficient magnitude floor {min} must lie in (0, 1]"
                )));
            }
        }
        Ok(())
    }
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// `sum_{l=1..k} 3^l C(n, l)`: non-identity Paulis of weight at most `k`.
pub fn count_k_body_paulis(n: usize, k: usize) -> u128 {
    (1..=k.min(n))
        .map(|l| 3u128.pow(l as u32) * binomial(n, l))
        .sum()
}

/// Every non-identity Pauli of weight `1..=k`, in weight-major order.
pub fn enumerate_k_body_paulis(n: usize, k: usize) -> Result<Vec<PauliString>> {
    let total = count_k_body_paulis(n, k);
    if total > 5_000_000 {
        return Err(Error::InvalidParameter(format!(
            "{total} weight-<={k} Paulis is too many to enumerate"
        )));
    }
    let mut out = Vec::with_capacity(total as usize);
    for l in 1..=k.min(n) {
        for support in crate::csolve::weight_exactly(n, l) {
            let qubits: Vec<usize> = (0..n).filter(|i| (support >> i) & 1 == 1).collect();
            for code in 0..3usize.pow(l as u32) {
                let mut sites = vec![Pauli::I; n];
                let mut c = code;
                for &q in &qubits {
                    sites[q] = [Pauli::X, Pauli::Y, Pauli::Z][c % 3];
                    c /= 3;
                }
                out.push(PauliString::from_sites(&sites)?);
            }
        }
    }
    Ok(out)
}

fn random_k_body_pauli<R: Rng + ?Sized>(n: usize, k: usize, weights: &[f64], rng: &mut R) -> PauliString {
    // weight class l with probability 3^l C(n,l) / total, then a uniform member of it
    let total: f64 = weights.iter().sum();
    let mut u = rng.random_range(0.0..total);
    let mut l = 1;
    for (idx, w) in weights.iter().enumerate() {
        if u < *w {
            l = idx + 1;
            break;
        }
        u -= w;
        l = idx + 1;
    }
    let l = l.min(k);
    let qubits = index::sample(rng, n, l);
    let mut sites = vec![Pauli::I; n];
    for q in qubits.iter() {
        sites[q] = [Pauli::X, Pauli::Y, Pauli::Z][rng.random_range(0..3)];
    }
    PauliString::from_sites(&sites).expect("n validated")
}

/// Exactly `m` distinct non-identity terms of weight at most `k`.
pub fn random_k_body<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    m: usize,
    law: CoeffLaw,
    rng: &mut R,
) -> Result<SparseHamiltonian> {
    if k > n {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds n = {n}")));
    }
    law.validate()?;
    let available = count_k_body_paulis(n, k);
    if (m as u128) > available {
        return Err(Error::TooManyTerms {
            requested: m,
            available: available.min(usize::MAX as u128) as usize,
            k,
            n,
        });
    }
    let mut h = SparseHamiltonian::new(n, k, m, Strictness::Strict)?;
    if available <= 200_000 {
        let all = enumerate_k_body_paulis(n, k)?;
        let mut picks: Vec<usize> = index::sample(rng, all.len(), m).into_vec();
        picks.sort_unstable();
        for i in picks {
            let c = law.sample(rng);
            h.insert(all[i], c)?;
        }
    } else {
        let weights: Vec<f64> = (1..=k)
            .map(|l| 3f64.powi(l as i32) * binomial(n, l) as f64)
            .collect();
        while h.len() < m {
            let p = random_k_body_pauli(n, k, &weights, rng);
            if !h.terms.contains_key(&p) {
                let c = law.sample(rng);
                h.insert(p, c)?;
            }
        }
    }
    Ok(h)
}

/// Sparse Sachdev-Ye instance rescaled so the largest coupling has magnitude 1.
/// Returns the Hamiltonian and the realized scale `xi = max |J_ij|` (0 when empty).
pub fn sparse_sy<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<(SparseHamiltonian, f64)> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParameter(format!("keep probability p = {p} outside (0, 1]")));
    }
    if n < 2 {
        return Err(Error::InvalidParameter("sparse SY needs at least 2 qubits".into()));
    }
    let mut couplings = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            // draw both variables for every pair so the stream layout is fixed
            let keep = rng.random_bool(p);
            let g: f64 = StandardNormal.sample(rng);
            if keep && g != 0.0 {
                couplings.push((i, j, g));
            }
        }
    }
    let xi = couplings.iter().fold(0.0f64, |m, c| m.max(c.2.abs()));
    let mut h = SparseHamiltonian::new(n, 2, 3 * couplings.len(), Strictness::Strict)?;
    for (i, j, g) in couplings {
        let mu = (g / xi).clamp(-1.0, 1.0);
        for a in [Pauli::X, Pauli::Y, Pauli::Z] {
            h.insert(PauliString::pair(n, i, a, j, a)?, mu)?;
        }
    }
    Ok((h, xi))
}

/// Lattice coordinates of site `idx` on a `side^dim` lattice.
fn lattice_coords(idx: usize, side: usize, dim: usize) -> Vec<f64> {
    let mut c = Vec::with_capacity(dim);
    let mut r = idx;
    for _ in 0..dim {
        c.push((r % side) as f64);
        r /= side;
    }
    c
}

/// One random two-body Pauli per site pair with `|mu| = 1 / (1 + d^alpha)`.
pub fn power_law<R: Rng + ?Sized>(
    side: usize,
    dim: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<SparseHamiltonian> {
    if !(dim == 1 || dim == 2) {
        return Err(Error::InvalidParameter(format!("lattice dimension {dim} not in {{1, 2}}")));
    }
    if side < 2 {
        return Err(Error::InvalidParameter("lattice side must be at least 2".into()));
    }
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::InvalidParameter(format!("decay exponent {alpha} must be >= 0")));
    }
    let n = side.pow(dim as u32);
    if n > crate::pauli::MAX_QUBITS {
        return Err(Error::QubitCount(n));
    }
    let mut terms = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let (ci, cj) = (lattice_coords(i, side, dim), lattice_coords(j, side, dim));
            let d = ci
                .iter()
                .zip(&cj)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let a = [Pauli::X, Pauli::Y, Pauli::Z][rng.random_range(0..3)];
            let b = [Pauli::X, Pauli::Y, Pauli::Z][rng.random_range(0..3)];
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let mag = 1.0 / (1.0 + d.powf(alpha));
            if mag >= COUPLING_FLOOR {
                terms.push((PauliString::pair(n, i, a, j, b)?, sign * mag));
            }
        }
    }
    SparseHamiltonian::from_terms(n, 2, terms)
}

/// `H_eff = sum_c mu_c P_c` restricted to the members of `K_beta`.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveHamiltonian {
    beta: BasisAxes,
    coeffs: BTreeMap<BitString, f64>,
}

impl EffectiveHamiltonian {
    pub fn beta(&self) -> &BasisAxes {
        &self.beta
    }

    pub fn n(&self) -> usize {
        self.beta.n()
    }

    pub fn coeffs(&self) -> &BTreeMap<BitString, f64> {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Back to Pauli labels.
    pub fn as_hamiltonian(&self) -> Result<SparseHamiltonian> {
        let n = self.n();
        let terms = self
            .coeffs
            .iter()
            .map(|(c, &mu)| (crate::pauli::kbeta_from_bits_unchecked(&self.beta, c.bits()), mu));
        SparseHamiltonian::from_terms(n, n, terms)
    }

    /// `lambda_b = sum_c mu_c (-1)^{c.b}`.
    pub fn eigenvalue(&self, b: &BitString) -> Result<f64> {
        self.check(b)?;
        Ok(self
            .coeffs
            .iter()
            .map(|(c, mu)| if c.dot(b) { -mu } else { *mu })
            .sum())
    }

    /// `lambda_b - lambda_0 = -2 sum_{c.b = 1} mu_c`.
    pub fn eigenvalue_gap(&self, b: &BitString) -> Result<f64> {
        self.check(b)?;
        Ok(-2.0
            * self
                .coeffs
                .iter()
                .filter(|(c, _)| c.dot(b))
                .map(|(_, mu)| mu)
                .sum::<f64>())
    }

    /// The full `2^n` coefficient vector `mu_beta` indexed by `c`.
    pub fn coefficient_vector(&self) -> Result<Vec<f64>> {
        if self.n() > 24 {
            return Err(Error::InvalidParameter("coefficient vector too large".into()));
        }
        let mut v = vec![0.0; 1 << self.n()];
        for (c, &mu) in &self.coeffs {
            v[c.bits() as usize] = mu;
        }
        Ok(v)
    }

    fn check(&self, b: &BitString) -> Result<()> {
        if b.n() != self.n() {
            return Err(Error::LengthMismatch {
                expected: self.n(),
                got: b.n(),
            });
        }
        Ok(())
    }
}

pub fn effective_hamiltonian(h: &SparseHamiltonian, beta: &BasisAxes) -> Result<EffectiveHamiltonian> {
    h.effective(beta)
}

pub fn eigenvalue(heff: &EffectiveHamiltonian, b: &BitString) -> Result<f64> {
    heff.eigenvalue(b)
}

/// In-place unnormalized fast Walsh-Hadamard transform; length must be a power of two.
pub fn walsh_hadamard(v: &mut [f64]) {
    let len = v.len();
    assert!(len.is_power_of_two(), "length {len} is not a power of two");
    let mut h = 1;
    while h < len {
        for start in (0..len).step_by(2 * h) {
            for i in start..start + h {
                let (a, b) = (v[i], v[i + h]);
                v[i] = a + b;
                v[i + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// Amplitude `<j|b>_beta` helper: per-qubit eigenvector of `sigma^axis` with eigenvalue `(-1)^bit`.
pub fn axis_eigenvector(axis: crate::pauli::Axis, bit: bool) -> [C64; 2] {
    use crate::pauli::Axis;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let s = if bit { -1.0 } else { 1.0 };
    match axis {
        Axis::Z => {
            if bit {
                [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]
            } else {
                [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]
            }
        }
        Axis::X => [C64::new(r, 0.0), C64::new(s * r, 0.0)],
        Axis::Y => [C64::new(r, 0.0), C64::new(0.0, s * r)],
    }
}

/// Product state `|b>_beta` as a dense vector.
pub fn product_state(beta: &BasisAxes, b: &BitString) -> Result<Vec<C64>> {
    check_dense(beta.n())?;
    if b.n() != beta.n() {
        return Err(Error::LengthMismatch {
            expected: beta.n(),
            got: b.n(),
        });
    }
    let n = beta.n();
    let factors: Vec<[C64; 2]> = (0..n).map(|i| axis_eigenvector(beta.axis(i), b.get(i))).collect();
    let dim = 1usize << n;
    Ok((0..dim)
        .map(|j| {
            factors
                .iter()
                .enumerate()
                .fold(C64::new(1.0, 0.0), |acc, (q, f)| acc * f[(j >> q) & 1])
        })
        .collect())
}
