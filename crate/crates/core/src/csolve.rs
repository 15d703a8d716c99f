//! Sparse recovery over the weight-k Hadamard operator.
//!
//! Columns are the bit strings of weight at most `k` (weight-major, then
//! numeric); rows are sampled bit strings; entry `(l, j)` is
//! `(-1)^{popcount(c_j & b_l)}`. The l1 problem
//! `min ||z||_1 s.t. ||Az - y||_2 <= eta sqrt(Gamma)` is solved by bisecting on
//! the radius `xi` of the constrained least-squares problem
//! `f(xi) = min_{||z||_1 <= xi} ||Az - y||_2`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::binomial;
use crate::pauli::BitString;

pub const CS_INSTANCE_SCHEMA: &str = "hamlearn.cs_instance/1";
pub const COLUMN_ORDER: &str = "weight-major-numeric";

/// Largest column set [`enumerate_columns`] will build.
pub const MAX_COLUMNS: u128 = 1 << 22;

/// Row-sign tables up to this many entries are stored densely.
const DENSE_SIGN_LIMIT: usize = 1 << 26;

/// Desk-scale constant for [`recommended_gamma`]. [`calibrate_gamma_constant`]
/// at `n = 10, k = 2`, 60 trials, 97% target gives 0.178 (`M = 5`, `Gamma = 28`)
/// and 0.070 (`M = 8`, `Gamma = 34`); the larger value is rounded up for margin.
pub const CALIBRATED_GAMMA_C: f64 = 0.25;

/// All `n`-bit words with exactly `l` ones, ascending.
pub fn weight_exactly(n: usize, l: usize) -> Vec<u64> {
    if l > n {
        return Vec::new();
    }
    if l == 0 {
        return vec![0];
    }
    let mut out = Vec::with_capacity(binomial(n, l).min(1 << 24) as usize);
    let limit: u128 = 1u128 << n;
    let mut v: u64 = if l == 64 { u64::MAX } else { (1u64 << l) - 1 };
    loop {
        out.push(v);
        // Gosper's hack
        let c = v & v.wrapping_neg();
        let r = v as u128 + c as u128;
        if r >= limit {
            break;
        }
        let r = r as u64;
        v = (((r ^ v) >> 2) / c) | r;
        if (v as u128) >= limit {
            break;
        }
    }
    out
}

pub fn column_count(n: usize, k: usize) -> u128 {
    (0..=k.min(n)).map(|l| binomial(n, l)).sum()
}

fn column_words(n: usize, k: usize) -> Result<Vec<u64>> {
    if k > n {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds n = {n}")));
    }
    let d = column_count(n, k);
    if d > MAX_COLUMNS {
        return Err(Error::InvalidParameter(format!("{d} columns is too many")));
    }
    Ok((0..=k).flat_map(|l| weight_exactly(n, l)).collect())
}

pub fn enumerate_columns(n: usize, k: usize) -> Result<Vec<BitString>> {
    column_words(n, k)?
        .into_iter()
        .map(|c| BitString::new(n, c))
        .collect()
}

pub fn sample_rows<R: Rng + ?Sized>(n: usize, gamma: usize, rng: &mut R) -> Vec<BitString> {
    (0..gamma).map(|_| BitString::random(n, rng)).collect()
}

/// `ceil(C M max(ln^2 M ln(M ln D) ln D, ln(1/delta)))`, capped at `2^n`.
/// For `M = 1` the polylog term vanishes and the floor `max(1, ceil(C ln(1/delta)))` applies.
pub fn recommended_gamma(m: usize, d: usize, delta_cs: f64, c: f64, n: usize) -> Result<usize> {
    if m == 0 {
        return Err(Error::InvalidParameter("sparsity M must be at least 1".into()));
    }
    if d < 2 {
        return Err(Error::InvalidParameter(format!("column count D = {d} below 2")));
    }
    if !(delta_cs > 0.0 && delta_cs < 1.0) || !(c > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < delta_cs < 1 and C > 0, got {delta_cs}, {c}"
        )));
    }
    let mf = m as f64;
    let ld = (d as f64).ln();
    let log_term = (1.0 / delta_cs).ln();
    let raw = if m == 1 {
        (c * log_term).ceil().max(1.0)
    } else {
        let poly = mf.ln().powi(2) * (mf * ld).ln() * ld;
        (c * mf * poly.max(log_term)).ceil().max(1.0)
    };
    let cap = if n >= 63 { f64::MAX } else { (1u64 << n) as f64 };
    Ok(raw.min(cap) as usize)
}

/// Sub-sampled weight-k Hadamard operator.
#[derive(Clone, Debug)]
pub struct WeightKOperator {
    n: usize,
    k: usize,
    columns: Vec<u64>,
    rows: Vec<u64>,
    signs: Option<Vec<f64>>,
}

impl WeightKOperator {
    pub fn new(n: usize, k: usize, rows: &[BitString]) -> Result<Self> {
        let columns = column_words(n, k)?;
        let mut words = Vec::with_capacity(rows.len());
        for r in rows {
            if r.n() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: r.n(),
                });
            }
            words.push(r.bits());
        }
        Ok(Self::from_words(n, k, columns, words))
    }

    fn from_words(n: usize, k: usize, columns: Vec<u64>, rows: Vec<u64>) -> Self {
        let signs = (rows.len() * columns.len() <= DENSE_SIGN_LIMIT).then(|| {
            rows.iter()
                .flat_map(|&b| columns.iter().map(move |&c| sign(c & b)))
                .collect()
        });
        Self {
            n,
            k,
            columns,
            rows,
            signs,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn gamma(&self) -> usize {
        self.rows.len()
    }

    pub fn d(&self) -> usize {
        self.columns.len()
    }

    pub fn column_words(&self) -> &[u64] {
        &self.columns
    }

    pub fn row_words(&self) -> &[u64] {
        &self.rows
    }

    pub fn columns(&self) -> Vec<BitString> {
        self.columns
            .iter()
            .map(|&c| BitString::new(self.n, c).expect("column fits"))
            .collect()
    }

    pub fn rows(&self) -> Vec<BitString> {
        self.rows
            .iter()
            .map(|&b| BitString::new(self.n, b).expect("row fits"))
            .collect()
    }

    /// Keeps rows `keep` (in that order).
    pub fn select_rows(&self, keep: &[usize]) -> Self {
        let rows = keep.iter().map(|&i| self.rows[i]).collect();
        Self::from_words(self.n, self.k, self.columns.clone(), rows)
    }

    #[inline]
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        sign(self.rows[row] & self.columns[col])
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d() {
            return Err(Error::ShapeMismatch {
                expected: self.d(),
                got: x.len(),
            });
        }
        let mut out = vec![0.0; self.gamma()];
        self.apply_into(x, &mut out);
        Ok(out)
    }

    pub fn apply_adjoint(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.gamma() {
            return Err(Error::ShapeMismatch {
                expected: self.gamma(),
                got: v.len(),
            });
        }
        let mut out = vec![0.0; self.d()];
        self.apply_adjoint_into(v, &mut out);
        Ok(out)
    }

    pub(crate) fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.d();
        match &self.signs {
            Some(s) => {
                for (l, o) in out.iter_mut().enumerate() {
                    let row = &s[l * d..(l + 1) * d];
                    *o = row.iter().zip(x).fold(0.0, |acc, (a, b)| acc + a * b);
                }
            }
            None => {
                for (o, &b) in out.iter_mut().zip(&self.rows) {
                    *o = self
                        .columns
                        .iter()
                        .zip(x)
                        .fold(0.0, |acc, (&c, xv)| acc + sign(c & b) * xv);
                }
            }
        }
    }

    pub(crate) fn apply_adjoint_into(&self, v: &[f64], out: &mut [f64]) {
        let d = self.d();
        out.iter_mut().for_each(|o| *o = 0.0);
        match &self.signs {
            Some(s) => {
                for (l, &vl) in v.iter().enumerate() {
                    let row = &s[l * d..(l + 1) * d];
                    for (o, a) in out.iter_mut().zip(row) {
                        *o += a * vl;
                    }
                }
            }
            None => {
                for (&b, &vl) in self.rows.iter().zip(v) {
                    for (o, &c) in out.iter_mut().zip(&self.columns) {
                        *o += sign(c & b) * vl;
                    }
                }
            }
        }
    }

    pub fn dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.gamma(), self.d(), |l, j| self.entry(l, j))
    }

    /// `A^T A`.
    pub fn gram(&self) -> DMatrix<f64> {
        let a = self.dense();
        a.transpose() * a
    }
}

#[inline]
fn sign(word: u64) -> f64 {
    if word.count_ones() & 1 == 1 {
        -1.0
    } else {
        1.0
    }
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean projection onto `{z : ||z||_1 <= xi}` (sort-and-threshold).
pub fn project_l1_ball(v: &[f64], xi: f64) -> Vec<f64> {
    if xi <= 0.0 {
        return vec![0.0; v.len()];
    }
    if l1(v) <= xi {
        return v.to_vec();
    }
    let mut u: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - xi) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    v.iter()
        .map(|&x| x.signum() * (x.abs() - theta).max(0.0))
        .collect()
}

/// Result of one constrained least-squares solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LsSolution {
    pub z: Vec<f64>,
    /// `||Az - y||_2` at `z`.
    pub f_val: f64,
    /// Certified lower bound on `f(xi)`.
    pub f_lower: f64,
    pub iters: usize,
    /// `f_val - f(xi) <= tol` was certified by the duality gap.
    pub certified: bool,
}

/// `min ||Az - y||_2` over an l1 ball, with cached step size and Gram matrix.
pub struct LsProblem<'a> {
    op: &'a WeightKOperator,
    y: &'a [f64],
    lipschitz: f64,
    gram: Option<DMatrix<f64>>,
    aty: Vec<f64>,
}

/// Gram matrices are formed only up to this many columns.
const GRAM_LIMIT: usize = 1024;

impl<'a> LsProblem<'a> {
    pub fn new(op: &'a WeightKOperator, y: &'a [f64]) -> Result<Self> {
        if y.len() != op.gamma() {
            return Err(Error::ShapeMismatch {
                expected: op.gamma(),
                got: y.len(),
            });
        }
        let aty = op.apply_adjoint(y)?;
        let gram = (op.d() <= GRAM_LIMIT).then(|| op.gram());
        let lipschitz = match &gram {
            Some(g) => g.clone().symmetric_eigen().eigenvalues.max().max(0.0) * (1.0 + 1e-12),
            None => power_iteration(op) * 1.02,
        };
        Ok(Self {
            op,
            y,
            lipschitz,
            gram,
            aty,
        })
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn residual(&self, z: &[f64], out: &mut [f64]) {
        self.op.apply_into(z, out);
        for (o, yv) in out.iter_mut().zip(self.y) {
            *o -= yv;
        }
    }

    /// Gap `<grad, z> + xi ||grad||_inf` bounding `g(z) - min g` for `g = ||Az-y||^2 / 2`.
    fn certificate(&self, z: &[f64], xi: f64, r: &mut [f64], grad: &mut [f64]) -> (f64, f64, f64) {
        self.residual(z, r);
        self.op.apply_adjoint_into(r, grad);
        let f = l2(r);
        let gap = (dot(grad, z) + xi * grad.iter().fold(0.0f64, |m, g| m.max(g.abs()))).max(0.0);
        let excess = (2.0 * gap / f.max(f64::MIN_POSITIVE)).min((2.0 * gap).sqrt()).min(f);
        let lower = (f * f - 2.0 * gap).max(0.0).sqrt();
        (f, excess, lower)
    }

    /// Exact minimizer on the sign pattern of `z`, if it keeps that pattern.
    fn polish(&self, z: &[f64], xi: f64) -> Option<Vec<f64>> {
        let gram = self.gram.as_ref()?;
        let scale = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return None;
        }
        let support: Vec<usize> = (0..z.len()).filter(|&i| z[i].abs() > 1e-13 * scale).collect();
        let s = support.len();
        if s == 0 || s > self.op.gamma() {
            return None;
        }
        let g = DMatrix::from_fn(s, s, |i, j| gram[(support[i], support[j])]);
        let h = DVector::from_iterator(s, support.iter().map(|&i| self.aty[i]));
        let sg = DVector::from_iterator(s, support.iter().map(|&i| z[i].signum()));
        let chol = g.cholesky()?;
        let gh = chol.solve(&h);
        let w = if l1(gh.as_slice()) <= xi {
            gh
        } else {
            let gs = chol.solve(&sg);
            let mu = (sg.dot(&gh) - xi) / sg.dot(&gs);
            if !(mu >= 0.0) {
                return None;
            }
            gh - gs * mu
        };
        if w.iter().zip(sg.iter()).any(|(wi, si)| wi * si <= 0.0) {
            return None;
        }
        let mut out = vec![0.0; z.len()];
        for (k, &i) in support.iter().enumerate() {
            out[i] = w[k];
        }
        // rounding can push the l1 norm a hair over the radius
        let norm = l1(&out);
        if norm > xi {
            out.iter_mut().for_each(|v| *v *= xi / norm);
        }
        Some(out)
    }

    /// Accelerated projected gradient with gradient-based restart, certified by
    /// the Frank-Wolfe gap and finished by an active-set polish.
    pub fn solve(&self, xi: f64, tol: f64, max_iters: usize, warm: Option<&[f64]>) -> LsSolution {
        let d = self.op.d();
        let gam = self.op.gamma();
        let mut r = vec![0.0; gam];
        let mut grad = vec![0.0; d];
        if xi <= 0.0 || self.lipschitz == 0.0 {
            let z = vec![0.0; d];
            let (f, excess, lower) = self.certificate(&z, xi.max(0.0), &mut r, &mut grad);
            return LsSolution {
                certified: excess <= tol || xi <= 0.0,
                z,
                f_val: f,
                f_lower: if xi <= 0.0 { f } else { lower },
                iters: 0,
            };
        }
        let step = 1.0 / self.lipschitz;
        let mut z = match warm {
            Some(w) if w.len() == d => project_l1_ball(w, xi),
            _ => vec![0.0; d],
        };
        let mut best = z.clone();
        let (mut best_f, mut best_excess, mut best_lower) = self.certificate(&z, xi, &mut r, &mut grad);
        let mut w = z.clone();
        let mut t = 1.0f64;
        let mut iters = 0;
        let check_every = 20;
        while best_excess > tol && iters < max_iters {
            iters += 1;
            self.residual(&w, &mut r);
            self.op.apply_adjoint_into(&r, &mut grad);
            let trial: Vec<f64> = w.iter().zip(&grad).map(|(wi, gi)| wi - step * gi).collect();
            let z_new = project_l1_ball(&trial, xi);
            // restart when the momentum direction opposes the gradient mapping
            let restart = w
                .iter()
                .zip(&z_new)
                .zip(&z)
                .map(|((wi, zn), zo)| (wi - zn) * (zn - zo))
                .sum::<f64>()
                > 0.0;
            if restart {
                t = 1.0;
                w.clone_from(&z_new);
            } else {
                let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                let beta = (t - 1.0) / t_next;
                for ((wi, zn), zo) in w.iter_mut().zip(&z_new).zip(&z) {
                    *wi = zn + beta * (zn - zo);
                }
                t = t_next;
            }
            z = z_new;
            if iters % check_every == 0 || iters == max_iters {
                let (f, excess, lower) = self.certificate(&z, xi, &mut r, &mut grad);
                if f < best_f || excess < best_excess {
                    best.clone_from(&z);
                    (best_f, best_excess) = (f, excess);
                }
                best_lower = best_lower.max(lower);
                if best_excess > tol {
                    if let Some(p) = self.polish(&z, xi) {
                        let (pf, pex, plow) = self.certificate(&p, xi, &mut r, &mut grad);
                        best_lower = best_lower.max(plow);
                        if pf <= best_f {
                            best = p;
                            (best_f, best_excess) = (pf, pex);
                        }
                    }
                }
            }
        }
        LsSolution {
            z: best,
            f_val: best_f,
            f_lower: best_lower.min(best_f),
            iters,
            certified: best_excess <= tol,
        }
    }
}

fn power_iteration(op: &WeightKOperator) -> f64 {
    let d = op.d();
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 + (i as f64 * 0.618_034).fract()).collect();
    let mut av = vec![0.0; op.gamma()];
    let mut atav = vec![0.0; d];
    let mut est = 0.0;
    for _ in 0..500 {
        let nv = l2(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        op.apply_into(&v, &mut av);
        op.apply_adjoint_into(&av, &mut atav);
        let next = dot(&v, &atav);
        std::mem::swap(&mut v, &mut atav);
        if (next - est).abs() <= 1e-10 * next {
            return next;
        }
        est = next;
    }
    est
}

pub fn solve_constrained_ls(
    op: &WeightKOperator,
    y: &[f64],
    xi: f64,
    tol: f64,
    max_iters: usize,
) -> Result<LsSolution> {
    if !(xi >= 0.0) {
        return Err(Error::InvalidParameter(format!("radius {xi} must be >= 0")));
    }
    Ok(LsProblem::new(op, y)?.solve(xi, tol, max_iters, None))
}

#[derive(Clone, Debug)]
pub struct CsInstance {
    pub op: WeightKOperator,
    pub y: Vec<f64>,
    pub eta: f64,
    /// Inflated noise level for modeling error.
    pub eta_tilde: Option<f64>,
    /// Right end of the initial bisection bracket.
    pub xi_upper: f64,
}

impl CsInstance {
    pub fn eta_eff(&self) -> f64 {
        self.eta_tilde.unwrap_or(self.eta)
    }

    /// `sqrt(Gamma) eta_eff`.
    pub fn threshold(&self) -> f64 {
        (self.op.gamma() as f64).sqrt() * self.eta_eff()
    }

    pub fn to_record(&self) -> CsInstanceRecord {
        CsInstanceRecord {
            schema: CS_INSTANCE_SCHEMA.to_string(),
            n: self.op.n(),
            k: self.op.k(),
            column_order: COLUMN_ORDER.to_string(),
            rows: self.op.row_words().to_vec(),
            y: self.y.clone(),
            eta: self.eta,
            eta_tilde: self.eta_tilde,
            xi_upper: self.xi_upper,
        }
    }

    pub fn from_record(rec: &CsInstanceRecord) -> Result<Self> {
        if rec.schema != CS_INSTANCE_SCHEMA || rec.column_order != COLUMN_ORDER {
            return Err(Error::Format(format!(
                "unsupported instance {:?} / {:?}",
                rec.schema, rec.column_order
            )));
        }
        let rows = rec
            .rows
            .iter()
            .map(|&b| BitString::new(rec.n, b))
            .collect::<Result<Vec<_>>>()?;
        let op = WeightKOperator::new(rec.n, rec.k, &rows)?;
        if rec.y.len() != op.gamma() {
            return Err(Error::ShapeMismatch {
                expected: op.gamma(),
                got: rec.y.len(),
            });
        }
        Ok(Self {
            op,
            y: rec.y.clone(),
            eta: rec.eta,
            eta_tilde: rec.eta_tilde,
            xi_upper: rec.xi_upper,
        })
    }
}

/// JSON form of a [`CsInstance`] for cross-solver comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsInstanceRecord {
    pub schema: String,
    pub n: usize,
    pub k: usize,
    pub column_order: String,
    pub rows: Vec<u64>,
    pub y: Vec<f64>,
    pub eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_tilde: Option<f64>,
    pub xi_upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub xi_star_bracket: (f64, f64),
    pub xi_final: f64,
    pub bisection_iters: usize,
    pub inner_iters_total: usize,
    pub residual: f64,
    pub objective: f64,
    pub threshold: f64,
    /// Every inner solve met its tolerance certificate.
    pub certified: bool,
    /// `f(0) <= threshold`, so zero was returned directly.
    pub zero_shortcut: bool,
    /// The initial bracket had to be widened.
    pub bracket_expanded: bool,
    /// No radius up to the widened bracket met the threshold.
    pub infeasible: bool,
}

/// Inner iteration cap for each `f(xi)` evaluation.
pub const DEFAULT_MAX_INNER: usize = 20_000;

/// Bisection on `xi` until the bracket is at most `2 nu` wide, then a final
/// solve at the midpoint.
pub fn solve_l1min(instance: &CsInstance, nu: f64, tol_inner: f64) -> Result<(Vec<f64>, SolveDiagnostics)> {
    solve_l1min_with(instance, nu, tol_inner, DEFAULT_MAX_INNER)
}

/// `tol_inner = nu sqrt(Gamma) / 100`.
pub fn default_tol_inner(nu: f64, gamma: usize) -> f64 {
    nu * (gamma as f64).sqrt() / 100.0
}

pub fn solve_l1min_with(
    instance: &CsInstance,
    nu: f64,
    tol_inner: f64,
    max_inner: usize,
) -> Result<(Vec<f64>, SolveDiagnostics)> {
    if !(nu > 0.0) || !(tol_inner > 0.0) {
        return Err(Error::InvalidParameter("nu and tol_inner must be positive".into()));
    }
    if !(instance.xi_upper > 0.0) {
        return Err(Error::InvalidParameter("bracket upper end must be positive".into()));
    }
    let op = &instance.op;
    let d = op.d();
    let threshold = instance.threshold();
    let f0 = l2(&instance.y);
    let mut diag = SolveDiagnostics {
        xi_star_bracket: (0.0, instance.xi_upper),
        xi_final: 0.0,
        bisection_iters: 0,
        inner_iters_total: 0,
        residual: f0,
        objective: 0.0,
        threshold,
        certified: true,
        zero_shortcut: false,
        bracket_expanded: false,
        infeasible: false,
    };
    if f0 <= threshold {
        diag.zero_shortcut = true;
        return Ok((vec![0.0; d], diag));
    }
    let problem = LsProblem::new(op, &instance.y)?;
    let eval = |xi: f64, warm: Option<&[f64]>, diag: &mut SolveDiagnostics| {
        let s = problem.solve(xi, tol_inner, max_inner, warm);
        diag.inner_iters_total += s.iters;
        diag.certified &= s.certified;
        s
    };

    let (mut lo, mut hi) = (0.0, instance.xi_upper);
    let mut warm_hi = eval(hi, None, &mut diag);
    let mut expansions = 0;
    while warm_hi.f_val > threshold + tol_inner && expansions < 8 {
        diag.bracket_expanded = true;
        lo = hi;
        hi *= 2.0;
        warm_hi = eval(hi, Some(&warm_hi.z), &mut diag);
        expansions += 1;
    }
    if warm_hi.f_val > threshold + tol_inner {
        diag.infeasible = true;
    }
    let mut warm = warm_hi.z.clone();
    while hi - lo > 2.0 * nu && !diag.infeasible {
        diag.bisection_iters += 1;
        let mid = 0.5 * (lo + hi);
        let s = eval(mid, Some(&warm), &mut diag);
        if s.f_val > threshold + tol_inner {
            lo = mid;
        } else {
            hi = mid;
        }
        warm = s.z;
    }
    diag.xi_star_bracket = (lo, hi);
    let xi = if diag.infeasible { hi } else { 0.5 * (lo + hi) };
    let fin = eval(xi, Some(&warm), &mut diag);
    diag.xi_final = xi;
    diag.residual = fin.f_val;
    diag.objective = l1(&fin.z);
    Ok((fin.z, diag))
}

/// One point of a recovery-rate sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub gamma: usize,
    pub successes: usize,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaCalibration {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub target_rate: f64,
    /// Smallest swept `Gamma` reaching the target rate.
    pub gamma: Option<usize>,
    /// `gamma` divided by the `C = 1` formula value.
    pub c: Option<f64>,
    pub sweep: Vec<SweepPoint>,
}

/// Planted `m`-sparse vector over the non-constant columns, magnitudes in `[0.1, 1]`.
pub fn planted_sparse<R: Rng + ?Sized>(d: usize, m: usize, rng: &mut R) -> Vec<f64> {
    let mut x = vec![0.0; d];
    for j in rand::seq::index::sample(rng, d - 1, m.min(d - 1)).iter() {
        let mag: f64 = rng.random_range(0.1..=1.0);
        x[j + 1] = if rng.random_bool(0.5) { mag } else { -mag };
    }
    x
}

/// Indices of the `m` largest magnitudes.
pub fn top_support(x: &[f64], m: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
    idx.truncate(m);
    idx.sort_unstable();
    idx
}

/// Noiseless recovery: error at most `1e-6` and exact top-`m` support.
pub fn noiseless_recovery_trial(n: usize, k: usize, m: usize, gamma: usize, seed: u64) -> Result<bool> {
    let mut rng = crate::seed::rng_at(seed, &[crate::seed::stream::INSTANCE]);
    let rows = sample_rows(n, gamma, &mut rng);
    let op = WeightKOperator::new(n, k, &rows)?;
    let x = planted_sparse(op.d(), m, &mut rng);
    let y = op.apply(&x)?;
    let inst = CsInstance {
        op,
        y,
        eta: 0.0,
        eta_tilde: None,
        xi_upper: 2.0 * m as f64,
    };
    let nu = 1e-9;
    let (xs, _) = solve_l1min(&inst, nu, default_tol_inner(nu, gamma))?;
    let err = l2(&x.iter().zip(&xs).map(|(a, b)| a - b).collect::<Vec<_>>());
    let planted: Vec<usize> = (0..x.len()).filter(|&i| x[i] != 0.0).collect();
    Ok(err <= 1e-6 && top_support(&xs, m) == planted)
}

/// Sweeps `Gamma` upward and records the smallest value whose noiseless
/// recovery rate reaches `target_rate`.
pub fn calibrate_gamma_constant(
    n: usize,
    k: usize,
    m: usize,
    trials: usize,
    target_rate: f64,
    gammas: &[usize],
    seed: u64,
) -> Result<GammaCalibration> {
    use rayon::prelude::*;
    let d = column_count(n, k) as usize;
    let base = recommended_gamma(m, d, 0.5, 1.0, n)? as f64;
    let mut sweep = Vec::new();
    let mut found = None;
    for (gi, &gamma) in gammas.iter().enumerate() {
        let results: Vec<bool> = (0..trials)
            .into_par_iter()
            .map(|t| noiseless_recovery_trial(n, k, m, gamma, crate::seed::derive_seed(seed, &[gi as u64, t as u64])))
            .collect::<Result<_>>()?;
        let successes = results.iter().filter(|&&ok| ok).count();
        sweep.push(SweepPoint {
            gamma,
            successes,
            trials,
        });
        if successes as f64 >= target_rate * trials as f64 {
            found = Some(gamma);
            break;
        }
    }
    Ok(GammaCalibration {
        n,
        k,
        m,
        target_rate,
        gamma: found,
        c: found.map(|g| g as f64 / base),
        sweep,
    })
}
