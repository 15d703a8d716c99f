//! Small dense linear algebra for oracle checks and the statevector simulator.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pauli::PauliString;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Default ceiling on the qubit count of any dense construction.
pub const DEFAULT_DENSE_LIMIT: usize = 12;

/// Environment variable that overrides [`DEFAULT_DENSE_LIMIT`].
pub const DENSE_LIMIT_ENV: &str = "HAMLEARN_DENSE_LIMIT";

pub fn dense_limit() -> usize {
    std::env::var(DENSE_LIMIT_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_DENSE_LIMIT)
}

pub fn check_dense(n: usize) -> Result<()> {
    let limit = dense_limit();
    if n > limit {
        return Err(Error::DenseLimitExceeded { n, limit });
    }
    Ok(())
}

/// `i^k`.
#[inline]
pub fn i_pow(k: u32) -> C64 {
    match k & 3 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

/// `out = P psi` using `P|j> = i^{#Y} (-1)^{|j & z|} |j ^ x>`.
pub fn apply_pauli_into(p: &PauliString, psi: &[C64], out: &mut [C64]) {
    let phase = i_pow(p.y_count());
    let (x, z) = (p.x_mask() as usize, p.z_mask() as usize);
    for (j, amp) in psi.iter().enumerate() {
        let v = phase * amp;
        out[j ^ x] = if (j & z).count_ones() & 1 == 1 { -v } else { v };
    }
}

pub fn apply_pauli(p: &PauliString, psi: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); psi.len()];
    apply_pauli_into(p, psi, &mut out);
    out
}

/// `<psi| P |psi>`; real because `P` is Hermitian.
pub fn pauli_expectation(p: &PauliString, psi: &[C64]) -> f64 {
    let phase = i_pow(p.y_count());
    let (x, z) = (p.x_mask() as usize, p.z_mask() as usize);
    let mut acc = C64::new(0.0, 0.0);
    for (j, amp) in psi.iter().enumerate() {
        let mut v = phase * amp;
        if (j & z).count_ones() & 1 == 1 {
            v = -v;
        }
        acc += psi[j ^ x].conj() * v;
    }
    acc.re
}

pub fn pauli_matrix(p: &PauliString) -> CMatrix {
    let dim = 1usize << p.n();
    let phase = i_pow(p.y_count());
    let (x, z) = (p.x_mask() as usize, p.z_mask() as usize);
    let mut m = CMatrix::zeros(dim, dim);
    for j in 0..dim {
        let v = if (j & z).count_ones() & 1 == 1 {
            -phase
        } else {
            phase
        };
        m[(j ^ x, j)] = v;
    }
    m
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `sum_P c_P P` as a dense `2^n x 2^n` matrix.
pub fn dense_from_terms<I>(n: usize, terms: I) -> Result<CMatrix>
where
    I: IntoIterator<Item = (PauliString, f64)>,
{
    check_dense(n)?;
    let dim = 1usize << n;
    let mut m = CMatrix::zeros(dim, dim);
    for (p, mu) in terms {
        if p.n() != n {
            return Err(Error::LengthMismatch { expected: n, got: p.n() });
        }
        let phase = i_pow(p.y_count()) * mu;
        let (x, z) = (p.x_mask() as usize, p.z_mask() as usize);
        for j in 0..dim {
            let v = if (j & z).count_ones() & 1 == 1 { -phase } else { phase };
            m[(j ^ x, j)] += v;
        }
    }
    Ok(m)
}

/// Eigendecomposition of a Hermitian matrix, `H = V diag(values) V^dagger`.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(h: &CMatrix) -> Self {
        let eig = h.clone().symmetric_eigen();
        Self {
            values: eig.eigenvalues.iter().copied().collect(),
            vectors: eig.eigenvectors,
        }
    }

    /// `exp(-i H t)`.
    pub fn propagator(&self, t: f64) -> CMatrix {
        let dim = self.values.len();
        let mut scaled = self.vectors.clone();
        for (col, &e) in self.values.iter().enumerate() {
            let ph = C64::from_polar(1.0, -e * t);
            for row in 0..dim {
                scaled[(row, col)] *= ph;
            }
        }
        scaled * self.vectors.adjoint()
    }

    pub fn evolve(&self, psi: &[C64], t: f64) -> Vec<C64> {
        let v = CVector::from_column_slice(psi);
        let coeffs = self.vectors.adjoint() * v;
        let phased = CVector::from_iterator(
            coeffs.len(),
            coeffs
                .iter()
                .zip(&self.values)
                .map(|(c, &e)| c * C64::from_polar(1.0, -e * t)),
        );
        (&self.vectors * phased).iter().copied().collect()
    }

    pub fn spectral_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Dense `y = M x` into a preallocated buffer.
pub fn matvec_into(m: &CMatrix, x: &[C64], out: &mut [C64]) {
    let dim = x.len();
    for v in out.iter_mut() {
        *v = C64::new(0.0, 0.0);
    }
    // column-major storage: accumulate column by column
    for (col, &xc) in x.iter().enumerate() {
        if xc.re == 0.0 && xc.im == 0.0 {
            continue;
        }
        let column = m.column(col);
        for row in 0..dim {
            out[row] += column[row] * xc;
        }
    }
}
