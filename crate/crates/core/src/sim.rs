//! Simulators for the phase-estimation experiment: prepare
//! `(|0>_beta + |b>_beta)/sqrt 2`, evolve for time `t` with a random element of
//! `K_beta` conjugating each of the `r` steps, then measure `X^b_beta` or `Y^b_beta`.
//!
//! Two oracles share one interface. [`AnalyticOracle`] draws outcomes from the
//! exact commuting-case law and scales to any `n`; [`StatevectorOracle`] runs
//! full trajectories and is limited by the dense limit.

use std::collections::HashMap;
use std::io::Write;
use std::sync::RwLock;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::dense::{self, check_dense, CMatrix, HermitianEigen, C64};
use crate::error::{Error, Result};
use crate::model::{product_state, SparseHamiltonian};
use crate::pauli::{sample_kbeta, Axis, BasisAxes, BitString, Pauli, PauliString};

/// Admissible SPAM level for the frequency-estimation guarantee.
pub fn spam_threshold() -> f64 {
    1.0 / (3.0 * 2f64.sqrt())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpamModel {
    /// Probability that the outcome is replaced by a fair coin.
    pub gamma_meas: f64,
    /// Probability that the initial relative phase is negated.
    pub prep_flip: f64,
}

impl SpamModel {
    pub fn new(gamma_meas: f64, prep_flip: f64) -> Result<Self> {
        for (name, v) in [("gamma_meas", gamma_meas), ("prep_flip", prep_flip)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Ok(Self {
            gamma_meas,
            prep_flip,
        })
    }

    pub fn noiseless() -> Self {
        Self::default()
    }

    /// Conservative proxy `gamma_meas + 2 prep_flip`.
    pub fn epsilon_spam(&self) -> f64 {
        self.gamma_meas + 2.0 * self.prep_flip
    }

    pub fn admissible(&self) -> bool {
        self.epsilon_spam() <= spam_threshold()
    }

    /// Factor multiplying the ideal expectation once both error sources act.
    pub fn contraction(&self) -> f64 {
        (1.0 - self.gamma_meas) * (1.0 - 2.0 * self.prep_flip)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Observable {
    X,
    Y,
}

impl Observable {
    pub fn as_str(self) -> &'static str {
        match self {
            Observable::X => "X",
            Observable::Y => "Y",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Analytic,
    Statevector,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(Mode::Analytic),
            "statevector" => Ok(Mode::Statevector),
            other => Err(Error::InvalidParameter(format!("unknown mode {other:?}"))),
        }
    }
}

/// One experiment setting. `r` reshaping steps of length `tau = t / r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub beta: BasisAxes,
    pub b: BitString,
    pub t: f64,
    pub r: u64,
    pub observable: Observable,
}

impl ExperimentSpec {
    pub fn with_steps(beta: BasisAxes, b: BitString, t: f64, r: u64, observable: Observable) -> Result<Self> {
        if b.n() != beta.n() {
            return Err(Error::LengthMismatch {
                expected: beta.n(),
                got: b.n(),
            });
        }
        if b.is_zero() {
            return Err(Error::ZeroBitString);
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!("evolution time {t} must be positive")));
        }
        if r == 0 {
            return Err(Error::InvalidParameter("need at least one reshaping step".into()));
        }
        Ok(Self {
            beta,
            b,
            t,
            r,
            observable,
        })
    }

    /// `r = round(t / tau)`, which must be at least 1.
    pub fn with_interval(beta: BasisAxes, b: BitString, t: f64, tau: f64, observable: Observable) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("reshaping interval {tau} must be positive")));
        }
        let r = (t / tau).round();
        if !(r >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "t / tau = {} rounds to zero steps",
                t / tau
            )));
        }
        Self::with_steps(beta, b, t, r as u64, observable)
    }

    pub fn tau(&self) -> f64 {
        self.t / self.r as f64
    }

    pub fn n(&self) -> usize {
        self.beta.n()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shot {
    pub spec: ExperimentSpec,
    pub outcome: i8,
    pub evolution_time_charged: f64,
}

/// A Pauli string with a `+-1` prefactor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SignedPauli {
    pub negative: bool,
    pub pauli: PauliString,
}

impl SignedPauli {
    pub fn sign(&self) -> f64 {
        if self.negative {
            -1.0
        } else {
            1.0
        }
    }
}

fn nonzero_b(beta: &BasisAxes, b: &BitString) -> Result<()> {
    if b.n() != beta.n() {
        return Err(Error::LengthMismatch {
            expected: beta.n(),
            got: b.n(),
        });
    }
    if b.is_zero() {
        return Err(Error::ZeroBitString);
    }
    Ok(())
}

fn flip_factor(axis: Axis) -> Pauli {
    match axis {
        Axis::Z => Pauli::X,
        Axis::X | Axis::Y => Pauli::Z,
    }
}

/// `X^b_beta`, mapping `|0>_beta` to `|b>_beta`.
pub fn observable_xb(beta: &BasisAxes, b: &BitString) -> Result<PauliString> {
    nonzero_b(beta, b)?;
    let sites: Vec<Pauli> = (0..beta.n())
        .map(|i| if b.get(i) { flip_factor(beta.axis(i)) } else { Pauli::I })
        .collect();
    PauliString::from_sites(&sites)
}

/// `Y^b_beta`, mapping `|0>_beta` to `i|b>_beta`.
pub fn observable_yb(beta: &BasisAxes, b: &BitString) -> Result<SignedPauli> {
    nonzero_b(beta, b)?;
    let first = (0..beta.n()).find(|&i| b.get(i)).expect("b is nonzero");
    let mut negative = false;
    let sites: Vec<Pauli> = (0..beta.n())
        .map(|i| {
            if !b.get(i) {
                Pauli::I
            } else if i == first {
                match beta.axis(i) {
                    Axis::Z => Pauli::Y,
                    Axis::Y => Pauli::X,
                    Axis::X => {
                        negative = true;
                        Pauli::Y
                    }
                }
            } else {
                flip_factor(beta.axis(i))
            }
        })
        .collect();
    Ok(SignedPauli {
        negative,
        pauli: PauliString::from_sites(&sites)?,
    })
}

pub fn observable(beta: &BasisAxes, b: &BitString, obs: Observable) -> Result<SignedPauli> {
    match obs {
        Observable::X => Ok(SignedPauli {
            negative: false,
            pauli: observable_xb(beta, b)?,
        }),
        Observable::Y => observable_yb(beta, b),
    }
}

/// `(|0>_beta + |b>_beta) / sqrt 2`.
pub fn prepare_initial(beta: &BasisAxes, b: &BitString) -> Result<Vec<C64>> {
    prepare_with_phase(beta, b, false)
}

fn prepare_with_phase(beta: &BasisAxes, b: &BitString, flipped: bool) -> Result<Vec<C64>> {
    nonzero_b(beta, b)?;
    check_dense(beta.n())?;
    let zero = product_state(beta, &BitString::zero(beta.n()))?;
    let one = product_state(beta, b)?;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let s = if flipped { -r } else { r };
    Ok(zero.iter().zip(&one).map(|(a, c)| a * r + c * s).collect())
}

/// Ideal expectation of the measured observable: `cos(dt)` for X, `-sin(dt)` for Y.
pub fn ideal_mean(obs: Observable, delta: f64, t: f64) -> f64 {
    match obs {
        Observable::X => (delta * t).cos(),
        Observable::Y => -(delta * t).sin(),
    }
}

/// Reshaping-error scale `4 M^2 t^2 / r`.
pub fn reshaping_bound(m_terms: usize, t: f64, r: u64) -> f64 {
    4.0 * (m_terms as f64).powi(2) * t * t / r as f64
}

fn pm_one(plus: bool) -> i8 {
    if plus {
        1
    } else {
        -1
    }
}

/// Draws one `+-1` outcome with mean `e`, then applies measurement depolarization.
fn draw_outcome<R: Rng + ?Sized>(e: f64, gamma_meas: f64, rng: &mut R) -> i8 {
    let p_plus = ((1.0 + e) / 2.0).clamp(0.0, 1.0);
    let ideal = pm_one(rng.random_bool(p_plus));
    if gamma_meas > 0.0 && rng.random_bool(gamma_meas) {
        pm_one(rng.random_bool(0.5))
    } else {
        ideal
    }
}

/// Exact per-shot mean in the commuting model, before clamping.
pub fn analytic_mean(
    h: &SparseHamiltonian,
    spec: &ExperimentSpec,
    spam: &SpamModel,
    bias_fraction: f64,
) -> Result<f64> {
    let delta = h.effective(&spec.beta)?.eigenvalue_gap(&spec.b)?;
    let zeta = bias_fraction * reshaping_bound(h.len(), spec.t, spec.r);
    Ok(spam.contraction() * ideal_mean(spec.observable, delta, spec.t) + zeta)
}

fn checked_probability(mean: f64) -> Result<(f64, bool)> {
    if !mean.is_finite() {
        return Err(Error::MeanOutOfRange { mean });
    }
    let clamped = mean.abs() > 1.0;
    Ok(((1.0 + mean.clamp(-1.0, 1.0)) / 2.0, clamped))
}

/// One analytic shot. A mean outside `[-1, 1]` is an error here; the batch oracle
/// clamps instead and flags the batch.
pub fn run_shot_analytic<R: Rng + ?Sized>(
    h: &SparseHamiltonian,
    spec: &ExperimentSpec,
    spam: &SpamModel,
    rng: &mut R,
    adversarial_bias: Option<f64>,
) -> Result<Shot> {
    let mean = analytic_mean(h, spec, &SpamModel::new(0.0, spam.prep_flip)?, adversarial_bias.unwrap_or(0.0))?;
    let (p, clamped) = checked_probability(mean)?;
    if clamped {
        return Err(Error::MeanOutOfRange { mean });
    }
    let e = 2.0 * p - 1.0;
    Ok(Shot {
        spec: spec.clone(),
        outcome: draw_outcome(e, spam.gamma_meas, rng),
        evolution_time_charged: spec.t,
    })
}

/// Cached `exp(-i H tau)` for one Hamiltonian.
pub struct PropagatorCache {
    eig: HermitianEigen,
    cache: RwLock<HashMap<u64, std::sync::Arc<CMatrix>>>,
}

impl PropagatorCache {
    pub fn new(h: &SparseHamiltonian) -> Result<Self> {
        let m = h.dense_matrix()?;
        Ok(Self {
            eig: HermitianEigen::new(&m),
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn get(&self, tau: f64) -> std::sync::Arc<CMatrix> {
        let key = tau.to_bits();
        if let Some(u) = self.cache.read().expect("cache lock").get(&key) {
            return u.clone();
        }
        let u = std::sync::Arc::new(self.eig.propagator(tau));
        self.cache
            .write()
            .expect("cache lock")
            .entry(key)
            .or_insert(u)
            .clone()
    }

    pub fn eigen(&self) -> &HermitianEigen {
        &self.eig
    }
}

/// Final state of one reshaped trajectory.
pub fn reshaped_trajectory<R: Rng + ?Sized>(
    spec: &ExperimentSpec,
    u: &CMatrix,
    flipped: bool,
    rng: &mut R,
) -> Result<Vec<C64>> {
    let mut psi = prepare_with_phase(&spec.beta, &spec.b, flipped)?;
    let mut tmp = vec![C64::new(0.0, 0.0); psi.len()];
    for _ in 0..spec.r {
        let q = sample_kbeta(&spec.beta, rng);
        dense::apply_pauli_into(&q, &psi, &mut tmp);
        dense::matvec_into(u, &tmp, &mut psi);
        dense::apply_pauli_into(&q, &psi, &mut tmp);
        std::mem::swap(&mut psi, &mut tmp);
    }
    Ok(psi)
}

/// Exact expectation of the measured observable at the end of one trajectory.
pub fn trajectory_expectation<R: Rng + ?Sized>(
    spec: &ExperimentSpec,
    u: &CMatrix,
    spam: &SpamModel,
    rng: &mut R,
) -> Result<f64> {
    let flipped = spam.prep_flip > 0.0 && rng.random_bool(spam.prep_flip);
    let psi = reshaped_trajectory(spec, u, flipped, rng)?;
    let o = observable(&spec.beta, &spec.b, spec.observable)?;
    Ok(o.sign() * dense::pauli_expectation(&o.pauli, &psi))
}

/// One full statevector shot. Builds the propagator each call; use
/// [`StatevectorOracle`] for repeated shots.
pub fn run_shot_statevector<R: Rng + ?Sized>(
    h: &SparseHamiltonian,
    spec: &ExperimentSpec,
    spam: &SpamModel,
    rng: &mut R,
) -> Result<Shot> {
    check_shape(h, spec)?;
    let cache = PropagatorCache::new(h)?;
    let u = cache.get(spec.tau());
    let e = trajectory_expectation(spec, &u, spam, rng)?;
    Ok(Shot {
        spec: spec.clone(),
        outcome: draw_outcome(e, spam.gamma_meas, rng),
        evolution_time_charged: spec.t,
    })
}

fn check_shape(h: &SparseHamiltonian, spec: &ExperimentSpec) -> Result<()> {
    if h.n() != spec.n() {
        return Err(Error::LengthMismatch {
            expected: h.n(),
            got: spec.n(),
        });
    }
    Ok(())
}

/// Outcome of a batch of identical shots.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Batch {
    pub sum: i64,
    pub shots: u32,
    /// The requested mean left `[-1, 1]` and was clamped.
    pub clamped: bool,
}

impl Batch {
    pub fn mean(&self) -> f64 {
        self.sum as f64 / self.shots as f64
    }
}

/// Black-box access to the unknown dynamics.
pub trait ShotOracle: Sync {
    fn n(&self) -> usize;
    fn mode(&self) -> Mode;
    /// Runs `shots` independent shots of `spec`; each is charged `spec.t`.
    fn run_batch(&self, spec: &ExperimentSpec, shots: u32, rng: &mut ChaCha8Rng) -> Result<Batch>;

    /// `count` consecutive batches drawn from one stream.
    fn run_batches(&self, spec: &ExperimentSpec, shots: u32, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Batch>> {
        (0..count).map(|_| self.run_batch(spec, shots, rng)).collect()
    }
}

/// Commuting-model oracle. A batch sum is one binomial draw, which has the same
/// law as summing independent Bernoulli outcomes.
pub struct AnalyticOracle {
    h: SparseHamiltonian,
    spam: SpamModel,
    bias_fraction: f64,
}

impl AnalyticOracle {
    pub fn new(h: SparseHamiltonian, spam: SpamModel) -> Self {
        Self {
            h,
            spam,
            bias_fraction: 0.0,
        }
    }

    /// Adds the deterministic bias `fraction * 4 M^2 t^2 / r` to every mean.
    pub fn with_bias(mut self, fraction: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&fraction) {
            return Err(Error::InvalidParameter(format!(
                "bias fraction {fraction} outside [-1, 1]"
            )));
        }
        self.bias_fraction = fraction;
        Ok(self)
    }

    pub fn hamiltonian(&self) -> &SparseHamiltonian {
        &self.h
    }

    pub fn spam(&self) -> &SpamModel {
        &self.spam
    }
}

impl ShotOracle for AnalyticOracle {
    fn n(&self) -> usize {
        self.h.n()
    }

    fn mode(&self) -> Mode {
        Mode::Analytic
    }

    fn run_batch(&self, spec: &ExperimentSpec, shots: u32, rng: &mut ChaCha8Rng) -> Result<Batch> {
        Ok(self.run_batches(spec, shots, 1, rng)?.remove(0))
    }

    // the mean is fixed by the spec, so the effective Hamiltonian is built once
    fn run_batches(&self, spec: &ExperimentSpec, shots: u32, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Batch>> {
        check_shape(&self.h, spec)?;
        let mean = analytic_mean(&self.h, spec, &self.spam, self.bias_fraction)?;
        let (p, clamped) = checked_probability(mean)?;
        let dist = Binomial::new(shots as u64, p).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Ok((0..count)
            .map(|_| Batch {
                sum: 2 * dist.sample(rng) as i64 - shots as i64,
                shots,
                clamped,
            })
            .collect())
    }
}

pub struct StatevectorOracle {
    h: SparseHamiltonian,
    spam: SpamModel,
    cache: PropagatorCache,
}

impl StatevectorOracle {
    pub fn new(h: SparseHamiltonian, spam: SpamModel) -> Result<Self> {
        let cache = PropagatorCache::new(&h)?;
        Ok(Self { h, spam, cache })
    }

    pub fn hamiltonian(&self) -> &SparseHamiltonian {
        &self.h
    }

    pub fn propagators(&self) -> &PropagatorCache {
        &self.cache
    }

    /// One shot with its record; used for shot logs.
    pub fn shot(&self, spec: &ExperimentSpec, rng: &mut ChaCha8Rng) -> Result<Shot> {
        check_shape(&self.h, spec)?;
        let u = self.cache.get(spec.tau());
        let e = trajectory_expectation(spec, &u, &self.spam, rng)?;
        Ok(Shot {
            spec: spec.clone(),
            outcome: draw_outcome(e, self.spam.gamma_meas, rng),
            evolution_time_charged: spec.t,
        })
    }
}

impl ShotOracle for StatevectorOracle {
    fn n(&self) -> usize {
        self.h.n()
    }

    fn mode(&self) -> Mode {
        Mode::Statevector
    }

    fn run_batch(&self, spec: &ExperimentSpec, shots: u32, rng: &mut ChaCha8Rng) -> Result<Batch> {
        let mut sum = 0i64;
        for _ in 0..shots {
            sum += self.shot(spec, rng)?.outcome as i64;
        }
        Ok(Batch {
            sum,
            shots,
            clamped: false,
        })
    }
}

/// One line of a JSONL shot log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub beta: String,
    pub b: String,
    pub t: f64,
    pub tau: f64,
    pub obs: Observable,
    pub outcome: i8,
    pub seed: u64,
}

impl ShotRecord {
    pub fn from_shot(shot: &Shot, seed: u64) -> Self {
        Self {
            beta: shot.spec.beta.to_string(),
            b: shot.spec.b.to_string(),
            t: shot.spec.t,
            tau: shot.spec.tau(),
            obs: shot.spec.observable,
            outcome: shot.outcome,
            seed,
        }
    }
}

pub fn write_shot_log<W: Write>(mut w: W, records: &[ShotRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
