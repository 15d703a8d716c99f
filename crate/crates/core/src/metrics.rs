//! Error metrics, the time lower bound, and dense checks of how coefficient
//! errors translate into errors on dynamics.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dense::{self, check_dense, inner, CMatrix, HermitianEigen, C64};
use crate::error::{Error, Result};
use crate::pauli::PauliString;

/// `(sum |mu_hat - mu|^p)^{1/p}` over the union of both supports.
pub fn lp_error(mu: &BTreeMap<PauliString, f64>, mu_hat: &BTreeMap<PauliString, f64>, p: f64) -> f64 {
    let diff = difference(mu, mu_hat);
    lp_norm(diff.values().copied(), p)
}

/// `mu_hat - mu` with missing entries read as zero.
pub fn difference(
    mu: &BTreeMap<PauliString, f64>,
    mu_hat: &BTreeMap<PauliString, f64>,
) -> BTreeMap<PauliString, f64> {
    let keys: BTreeSet<&PauliString> = mu.keys().chain(mu_hat.keys()).collect();
    keys.into_iter()
        .map(|k| {
            let a = mu.get(k).copied().unwrap_or(0.0);
            let b = mu_hat.get(k).copied().unwrap_or(0.0);
            (*k, b - a)
        })
        .collect()
}

pub fn lp_norm<I: IntoIterator<Item = f64>>(values: I, p: f64) -> f64 {
    let v: Vec<f64> = values.into_iter().map(f64::abs).collect();
    let scale = v.iter().copied().fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    // scaling avoids underflow of tiny entries raised to p
    scale * v.iter().map(|x| (x / scale).powf(p)).sum::<f64>().powf(1.0 / p)
}

/// l1 error of the best `m`-term approximation of `x`.
pub fn sigma_m_l1(x: &[f64], m: usize) -> f64 {
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    if m >= mags.len() {
        return 0.0;
    }
    mags.sort_by(|a, b| b.total_cmp(a));
    mags[m..].iter().sum()
}

/// `M / (eps1 e ln(1/gamma))` for measurement noise `gamma` in `(0, 0.5)`.
pub fn lower_bound_time(m: usize, eps1: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(Error::InvalidParameter(format!("noise strength {gamma} outside (0, 0.5)")));
    }
    if !(eps1 > 0.0) {
        return Err(Error::InvalidParameter(format!("eps1 = {eps1} must be positive")));
    }
    Ok(m as f64 / (eps1 * std::f64::consts::E * (1.0 / gamma).ln()))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::ShapeMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 2 || xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParameter("slope needs two or more positive points".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("all x values equal".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    /// Keys are `"1"`, `"1.5"`, `"2"`.
    pub lp_errors: BTreeMap<String, f64>,
    pub threshold: f64,
    pub support_precision: f64,
    pub support_recall: f64,
    /// Best `M`-term l1 approximation error of `mu_hat - mu`.
    pub sigma_m_l1: f64,
}

pub fn error_summary(
    mu: &BTreeMap<PauliString, f64>,
    mu_hat: &BTreeMap<PauliString, f64>,
    m: usize,
    threshold: f64,
) -> ErrorSummary {
    let lp_errors = [("1", 1.0), ("1.5", 1.5), ("2", 2.0)]
        .into_iter()
        .map(|(k, p)| (k.to_string(), lp_error(mu, mu_hat, p)))
        .collect();
    let truth: BTreeSet<_> = mu.iter().filter(|(_, v)| v.abs() > threshold).map(|(k, _)| *k).collect();
    let found: BTreeSet<_> = mu_hat.iter().filter(|(_, v)| v.abs() > threshold).map(|(k, _)| *k).collect();
    let hit = truth.intersection(&found).count() as f64;
    let ratio = |num: f64, den: usize| if den == 0 { 1.0 } else { num / den as f64 };
    let diff: Vec<f64> = difference(mu, mu_hat).into_values().collect();
    ErrorSummary {
        lp_errors,
        threshold,
        support_precision: ratio(hit, found.len()),
        support_recall: ratio(hit, truth.len()),
        sigma_m_l1: sigma_m_l1(&diff, m),
    }
}

pub fn haar_state(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let mut psi: Vec<C64> = (0..1usize << n)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let nrm = dense::norm(&psi);
    psi.iter_mut().for_each(|v| *v /= nrm);
    psi
}

/// Random Hermitian matrix of unit spectral norm.
pub fn random_observable(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let dim = 1usize << n;
    let g = CMatrix::from_fn(dim, dim, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let h = (&g + g.adjoint()) * C64::new(0.5, 0.0);
    let s = HermitianEigen::new(&h).spectral_norm();
    h / C64::new(s, 0.0)
}

fn expectation(o: &CMatrix, psi: &[C64]) -> f64 {
    let mut out = vec![C64::new(0.0, 0.0); psi.len()];
    dense::matvec_into(o, psi, &mut out);
    inner(psi, &out).re
}

/// Trace distance of two pure states, `2 sqrt(1 - |<a|b>|^2)`.
pub fn pure_trace_distance(a: &[C64], b: &[C64]) -> f64 {
    2.0 * (1.0 - inner(a, b).norm_sqr()).max(0.0).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    /// Random `(O, psi, t)` draws for the pointwise bounds.
    pub samples: usize,
    /// Haar states for the average-case l2 bound.
    pub haar_states: usize,
    pub t_max: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            samples: 100,
            haar_states: 500,
            t_max: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperationalReport {
    pub n: usize,
    pub l1_gap: f64,
    pub l2_gap: f64,
    pub spectral_gap: f64,
    pub spectral_violation: bool,
    /// `|2^{-n/2} ||H - H'||_F - ||mu - mu'||_2|`, relative to the larger side.
    pub parseval_rel_err: f64,
    pub parseval_violation: bool,
    pub samples: usize,
    pub expectation_violations: usize,
    pub trace_violations: usize,
    /// Largest observed value over the bound `2 t ||mu - mu'||_1`.
    pub max_expectation_ratio: f64,
    pub max_trace_ratio: f64,
    pub haar_mean: f64,
    pub haar_stderr: f64,
    pub haar_bound: f64,
    pub haar_violation: bool,
}

impl OperationalReport {
    pub fn violations(&self) -> usize {
        self.expectation_violations
            + self.trace_violations
            + self.spectral_violation as usize
            + self.parseval_violation as usize
            + self.haar_violation as usize
    }
}

const SLACK: f64 = 1e-10;

/// Checks how the coefficient distance bounds dynamical distances on dense
/// simulations of `h` and `h_hat`, given as coefficient maps on `n` qubits.
pub fn operational_checks(
    n: usize,
    h: &BTreeMap<PauliString, f64>,
    h_hat: &BTreeMap<PauliString, f64>,
    cfg: &CheckConfig,
    rng: &mut ChaCha8Rng,
) -> Result<OperationalReport> {
    check_dense(n)?;
    let a = dense::dense_from_terms(n, h.iter().map(|(p, &c)| (*p, c)))?;
    let b = dense::dense_from_terms(n, h_hat.iter().map(|(p, &c)| (*p, c)))?;
    let diff = difference(h, h_hat);
    let l1 = lp_norm(diff.values().copied(), 1.0);
    let l2 = lp_norm(diff.values().copied(), 2.0);
    let delta = &a - &b;
    let spectral = HermitianEigen::new(&delta).spectral_norm();
    let frob = delta.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt() / ((1u64 << n) as f64).sqrt();
    let parseval_rel_err = (frob - l2).abs() / frob.max(l2).max(f64::MIN_POSITIVE);
    let (ea, eb) = (HermitianEigen::new(&a), HermitianEigen::new(&b));

    let (mut exp_v, mut tr_v) = (0, 0);
    let (mut max_exp, mut max_tr) = (0.0f64, 0.0f64);
    for _ in 0..cfg.samples {
        let o = random_observable(n, rng);
        let psi = haar_state(n, rng);
        let t = rng.random_range(0.0..cfg.t_max);
        let (pa, pb) = (ea.evolve(&psi, t), eb.evolve(&psi, t));
        let bound = 2.0 * t * l1;
        let de = (expectation(&o, &pa) - expectation(&o, &pb)).abs();
        let dt = pure_trace_distance(&pa, &pb);
        exp_v += (de > bound + SLACK) as usize;
        tr_v += (dt > bound + SLACK) as usize;
        if bound > 0.0 {
            max_exp = max_exp.max(de / bound);
            max_tr = max_tr.max(dt / bound);
        }
    }

    // average-case bound E|<O>_t - <O'>_t|^2 <= 2 t^2 ||O||_F^2 ||mu - mu'||_2^2
    let o = random_observable(n, rng);
    let o_frob2: f64 = o.iter().map(|v| v.norm_sqr()).sum();
    let t = cfg.t_max;
    let vals: Vec<f64> = (0..cfg.haar_states)
        .map(|_| {
            let psi = haar_state(n, rng);
            (expectation(&o, &ea.evolve(&psi, t)) - expectation(&o, &eb.evolve(&psi, t))).powi(2)
        })
        .collect();
    let k = vals.len().max(1) as f64;
    let haar_mean = vals.iter().sum::<f64>() / k;
    let var = vals.iter().map(|v| (v - haar_mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
    let haar_stderr = (var / k).sqrt();
    let haar_bound = 2.0 * t * t * o_frob2 * l2 * l2;

    Ok(OperationalReport {
        n,
        l1_gap: l1,
        l2_gap: l2,
        spectral_gap: spectral,
        spectral_violation: spectral > l1 + SLACK,
        parseval_rel_err,
        parseval_violation: parseval_rel_err > 1e-10,
        samples: cfg.samples,
        expectation_violations: exp_v,
        trace_violations: tr_v,
        max_expectation_ratio: max_exp,
        max_trace_ratio: max_tr,
        haar_mean,
        haar_stderr,
        haar_bound,
        haar_violation: haar_mean > haar_bound + 3.0 * haar_stderr + SLACK,
    })
}
