//! End-to-end learning: random bases, per-row frequency estimation of
//! `lambda_b - lambda_0`, l1 recovery per basis, then merging across bases.
//!
//! Every experiment is fixed by [`plan`] before any shot runs. Each probe group
//! carries its own seed, so execution order never changes a result.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csolve::{self, CsInstance, SolveDiagnostics, WeightKOperator};
use crate::error::{Error, Result};
use crate::metrics;
use crate::model::SparseHamiltonian;
use crate::pauli::{kbeta_from_bits_unchecked, BasisAxes, BitString, PauliString};
use crate::rfe::{self, RfeSchedule};
use crate::seed::{derive_seed, rng_at, stream};
use crate::sim::{ExperimentSpec, Mode, Observable, ShotOracle, SpamModel};

pub const REPORT_SCHEMA: &str = "hamlearn.report/1";
pub const MANIFEST_SCHEMA: &str = "hamlearn.manifest/1";

/// `r_j = ceil(12 sqrt 2 M^2 t_j^2)` keeps `4 M^2 t^2 / r` below `1 / (3 sqrt 2)`.
pub fn default_reshaping_factor() -> f64 {
    12.0 * 2f64.sqrt()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeRule {
    #[default]
    Mean,
    First,
    MinResidualBasis,
}

impl std::str::FromStr for MergeRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(MergeRule::Mean),
            "first" => Ok(MergeRule::First),
            "min_residual_basis" | "min-residual-basis" => Ok(MergeRule::MinResidualBasis),
            other => Err(Error::InvalidParameter(format!("unknown merge rule {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    pub k: usize,
    /// Assumed number of terms.
    pub m: usize,
    pub eps: f64,
    pub p: f64,
    pub delta: f64,
    pub mode: Mode,
    pub spam: SpamModel,
    pub seed: u64,
    /// Constant `C` of the row-count formula.
    pub c_gamma: f64,
    /// Constant in `eta = eps / (C_cal L M^{1/p - 1/2})`.
    pub c_cal: f64,
    pub merge_rule: MergeRule,
    pub reshaping_factor: f64,
    pub shots_per_sample: u32,
    pub median_batch: Option<usize>,
    /// Bisection resolution as a fraction of `eta`.
    pub nu_ratio: f64,
    /// Extra noise allowance for terms outside the model, added to `eta`.
    pub model_error_l1: Option<f64>,
    /// Abort before any shot when the planned total time exceeds this.
    pub max_total_time: Option<f64>,
}

impl LearnConfig {
    pub fn new(k: usize, m: usize, eps: f64) -> Self {
        Self {
            k,
            m,
            eps,
            p: 2.0,
            delta: 0.1,
            mode: Mode::Analytic,
            spam: SpamModel::noiseless(),
            seed: 0,
            c_gamma: 1.0,
            c_cal: 3.0,
            merge_rule: MergeRule::Mean,
            reshaping_factor: default_reshaping_factor(),
            shots_per_sample: rfe::DEFAULT_SHOTS_PER_SAMPLE,
            median_batch: None,
            nu_ratio: 0.1,
            model_error_l1: None,
            max_total_time: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.m == 0 {
            return bad("assumed term count M must be at least 1".into());
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad(format!("eps = {} must be positive", self.eps));
        }
        if !(1.0..=2.0).contains(&self.p) {
            return bad(format!("p = {} outside [1, 2]", self.p));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta = {} outside (0, 1)", self.delta));
        }
        if !(self.c_gamma > 0.0 && self.c_cal > 0.0 && self.reshaping_factor > 0.0 && self.nu_ratio > 0.0) {
            return bad("calibration constants must be positive".into());
        }
        if self.shots_per_sample == 0 || self.median_batch == Some(0) {
            return bad("shot and batch counts must be positive".into());
        }
        if let Some(e) = self.model_error_l1 {
            if !(e >= 0.0) {
                return bad(format!("model error {e} must be >= 0"));
            }
        }
        SpamModel::new(self.spam.gamma_meas, self.spam.prep_flip)?;
        Ok(())
    }
}

/// `L = ceil(3^k ln(M / delta_basis))`.
pub fn basis_count(k: usize, m: usize, delta_basis: f64) -> usize {
    (3f64.powi(k as i32) * (m as f64 / delta_basis).ln()).ceil().max(1.0) as usize
}

pub fn sample_bases(n: usize, k: usize, m: usize, delta_basis: f64, rng: &mut ChaCha8Rng) -> Result<Vec<BasisAxes>> {
    if !(delta_basis > 0.0 && delta_basis < 1.0) {
        return Err(Error::InvalidParameter(format!("delta_basis = {delta_basis} outside (0, 1)")));
    }
    Ok((0..basis_count(k, m, delta_basis))
        .map(|_| BasisAxes::random(n, rng))
        .collect())
}

/// `eta = eps / (c_cal L M^{1/p - 1/2})`.
pub fn eta_from_eps(eps: f64, p: f64, m: usize, l: usize, c_cal: f64) -> f64 {
    eps / (c_cal * l as f64 * (m as f64).powf(1.0 / p - 0.5))
}

/// Reshaping steps for one probe time.
pub fn reshaping_steps(factor: f64, m: usize, t: f64) -> u64 {
    (factor * (m as f64).powi(2) * t * t).ceil().max(1.0) as u64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundSetting {
    pub t: f64,
    pub r: u64,
    pub tau: f64,
}

/// Formula-derived parameters of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub n: usize,
    pub d: usize,
    pub bases: usize,
    pub delta_basis: f64,
    pub delta_cs: f64,
    pub q: f64,
    pub gamma: usize,
    pub eta: f64,
    pub eta_eff: f64,
    pub nu: f64,
    pub tol_inner: f64,
    pub xi_upper: f64,
    pub schedule: RfeSchedule,
    pub rounds: Vec<RoundSetting>,
}

pub fn derive_params(n: usize, cfg: &LearnConfig) -> Result<DerivedParams> {
    cfg.validate()?;
    if cfg.k > n {
        return Err(Error::InvalidParameter(format!("k = {} exceeds n = {n}", cfg.k)));
    }
    let d = csolve::column_count(n, cfg.k) as usize;
    let delta_basis = cfg.delta / 3.0;
    let bases = basis_count(cfg.k, cfg.m, delta_basis);
    let delta_cs = cfg.delta / (3.0 * bases as f64);
    let gamma = csolve::recommended_gamma(cfg.m, d.max(2), delta_cs, cfg.c_gamma, n)?;
    let q = cfg.delta / (3.0 * bases as f64 * gamma as f64);
    let eta = eta_from_eps(cfg.eps, cfg.p, cfg.m, bases, cfg.c_cal);
    let eta_eff = eta + cfg.model_error_l1.unwrap_or(0.0);
    let nu = cfg.nu_ratio * eta;
    let a = 2.0 * cfg.m as f64;
    let mut schedule = rfe::build_schedule(a, eta, q)?.with_shots_per_sample(cfg.shots_per_sample)?;
    if let Some(mb) = cfg.median_batch {
        schedule = schedule.with_median_batch(mb)?;
    }
    let rounds = schedule
        .times
        .iter()
        .map(|&t| {
            let r = reshaping_steps(cfg.reshaping_factor, cfg.m, t);
            RoundSetting { t, r, tau: t / r as f64 }
        })
        .collect();
    Ok(DerivedParams {
        n,
        d,
        bases,
        delta_basis,
        delta_cs,
        q,
        gamma,
        eta,
        eta_eff,
        nu,
        tol_inner: csolve::default_tol_inner(nu, gamma),
        xi_upper: 2.0 * cfg.m as f64,
        schedule,
        rounds,
    })
}

/// One batch of probe samples: `samples` averages of `shots` shots each, reduced to a median.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeGroup {
    pub basis: usize,
    pub row: usize,
    pub round: usize,
    pub spec: ExperimentSpec,
    pub samples: usize,
    pub shots: u32,
    pub seed: u64,
}

impl ProbeGroup {
    /// Evolution time charged to the whole group.
    pub fn time(&self) -> f64 {
        self.spec.t * self.samples as f64 * self.shots as f64
    }

    pub fn shot_count(&self) -> u64 {
        self.samples as u64 * self.shots as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupResult {
    /// Median of the sample means; the sine probe is stored negated so that
    /// `z = x + i y` tracks `e^{i delta t}`.
    pub value: f64,
    pub clamped: usize,
}

/// All experiments of a run, fixed before execution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnPlan {
    pub derived: DerivedParams,
    pub bases: Vec<BasisAxes>,
    pub rows: Vec<Vec<BitString>>,
    pub seed: u64,
}

pub fn plan(n: usize, cfg: &LearnConfig) -> Result<LearnPlan> {
    let derived = derive_params(n, cfg)?;
    let mut brng = rng_at(cfg.seed, &[stream::BASES]);
    let bases = (0..derived.bases).map(|_| BasisAxes::random(n, &mut brng)).collect();
    plan_for_bases(cfg, derived, bases)
}

/// Plan with caller-chosen bases (the basis count in `derived` is overwritten).
pub fn plan_for_bases(cfg: &LearnConfig, mut derived: DerivedParams, bases: Vec<BasisAxes>) -> Result<LearnPlan> {
    if bases.iter().any(|b| b.n() != derived.n) {
        return Err(Error::InvalidParameter("basis length differs from n".into()));
    }
    derived.bases = bases.len();
    let rows = (0..bases.len())
        .map(|i| {
            let mut rrng = rng_at(cfg.seed, &[stream::ROWS, i as u64]);
            csolve::sample_rows(derived.n, derived.gamma, &mut rrng)
        })
        .collect();
    Ok(LearnPlan {
        derived,
        bases,
        rows,
        seed: cfg.seed,
    })
}

impl LearnPlan {
    /// Probe groups of one basis; rows with `b = 0` need no experiment.
    pub fn groups(&self, basis: usize) -> Vec<ProbeGroup> {
        let beta = &self.bases[basis];
        let sched = &self.derived.schedule;
        let mut out = Vec::new();
        for (row, b) in self.rows[basis].iter().enumerate() {
            if b.is_zero() {
                continue;
            }
            for (round, rs) in self.derived.rounds.iter().enumerate() {
                for (oi, obs) in [Observable::X, Observable::Y].into_iter().enumerate() {
                    out.push(ProbeGroup {
                        basis,
                        row,
                        round,
                        spec: ExperimentSpec {
                            beta: beta.clone(),
                            b: *b,
                            t: rs.t,
                            r: rs.r,
                            observable: obs,
                        },
                        samples: sched.m,
                        shots: sched.shots_per_sample,
                        seed: derive_seed(
                            self.seed,
                            &[stream::PROBES, basis as u64, row as u64, round as u64, oi as u64],
                        ),
                    });
                }
            }
        }
        out
    }

    pub fn all_groups(&self) -> Vec<ProbeGroup> {
        (0..self.bases.len()).flat_map(|i| self.groups(i)).collect()
    }

    pub fn nonzero_rows(&self) -> usize {
        self.rows.iter().flatten().filter(|b| !b.is_zero()).count()
    }

    pub fn predicted_shots(&self) -> u64 {
        self.nonzero_rows() as u64 * self.derived.schedule.shots()
    }

    /// Total evolution time the plan will charge.
    pub fn predicted_time(&self) -> f64 {
        let s = &self.derived.schedule;
        let per_row: f64 = self.derived.rounds.iter().map(|r| r.t).sum::<f64>() * 2.0 * s.m as f64 * s.shots_per_sample as f64;
        per_row * self.nonzero_rows() as f64
    }
}

pub fn execute_group<O: ShotOracle + ?Sized>(oracle: &O, group: &ProbeGroup) -> Result<GroupResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(group.seed);
    let batches = oracle.run_batches(&group.spec, group.shots, group.samples, &mut rng)?;
    let clamped = batches.iter().filter(|b| b.clamped).count();
    let sign = match group.spec.observable {
        Observable::X => 1.0,
        Observable::Y => -1.0,
    };
    let mut means: Vec<f64> = batches.iter().map(|b| sign * b.mean()).collect();
    Ok(GroupResult {
        value: rfe::median(&mut means),
        clamped,
    })
}

/// Estimates for one basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisEstimate {
    pub beta: BasisAxes,
    pub gamma: usize,
    /// Every weight-`1..=k` member of `K_beta` with its estimate.
    pub values: Vec<(PauliString, f64)>,
    /// Estimated identity coefficient `-lambda_0` of the shifted Hamiltonian.
    pub identity_coeff: f64,
    pub residual: f64,
    pub recovered_support: Vec<PauliString>,
    /// Rows whose fitted value misses the estimate by more than `4 eta_eff`.
    pub flagged_rows: usize,
    pub clamped_batches: usize,
    pub unreliable: bool,
    pub diagnostics: SolveDiagnostics,
}

/// Turns executed group results into the basis estimate. `results` is indexed
/// like `plan.groups(basis)`.
pub fn assemble_basis(plan: &LearnPlan, basis: usize, results: &[GroupResult]) -> Result<BasisEstimate> {
    let dp = &plan.derived;
    let rounds = dp.rounds.len();
    let rows = &plan.rows[basis];
    let expected = rows.iter().filter(|b| !b.is_zero()).count() * rounds * 2;
    if results.len() != expected {
        return Err(Error::ShapeMismatch {
            expected,
            got: results.len(),
        });
    }
    let mut y = vec![0.0; rows.len()];
    let mut cursor = 0;
    for (row, b) in rows.iter().enumerate() {
        if b.is_zero() {
            continue;
        }
        let zs: Vec<Complex64> = (0..rounds)
            .map(|l| {
                let x = results[cursor + 2 * l].value;
                let yv = results[cursor + 2 * l + 1].value;
                Complex64::new(x, yv)
            })
            .collect();
        cursor += 2 * rounds;
        y[row] = rfe::refine(&dp.schedule, &zs)?.theta_hat;
    }
    let clamped_batches = results.iter().map(|r| r.clamped).sum();
    let beta = plan.bases[basis].clone();
    let op = WeightKOperator::new(dp.n, plan_k(dp), rows)?;
    let inst = CsInstance {
        op,
        y,
        eta: dp.eta,
        eta_tilde: (dp.eta_eff != dp.eta).then_some(dp.eta_eff),
        xi_upper: dp.xi_upper,
    };
    let (x, diagnostics) = csolve::solve_l1min(&inst, dp.nu, dp.tol_inner)?;
    let fitted = inst.op.apply(&x)?;
    let flagged_rows = fitted
        .iter()
        .zip(&inst.y)
        .filter(|(f, yv)| (*f - *yv).abs() > 4.0 * dp.eta_eff + dp.nu)
        .count();
    let cols = inst.op.column_words();
    let mut values = Vec::with_capacity(cols.len().saturating_sub(1));
    let mut identity_coeff = 0.0;
    for (j, &c) in cols.iter().enumerate() {
        if c == 0 {
            identity_coeff = x[j];
        } else {
            values.push((kbeta_from_bits_unchecked(&beta, c), x[j]));
        }
    }
    let scale = values.iter().fold(0.0f64, |m, (_, v)| m.max(v.abs()));
    let recovered_support = values
        .iter()
        .filter(|(_, v)| v.abs() > (dp.eta_eff * 10.0).max(1e-9 * scale))
        .map(|(p, _)| *p)
        .collect();
    Ok(BasisEstimate {
        gamma: inst.op.gamma(),
        beta,
        values,
        identity_coeff,
        residual: diagnostics.residual,
        recovered_support,
        flagged_rows,
        clamped_batches,
        unreliable: flagged_rows as f64 > (dp.gamma as f64 * dp.q).max(1.0) || diagnostics.infeasible,
        diagnostics,
    })
}

fn plan_k(dp: &DerivedParams) -> usize {
    // D = sum_{l <= k} C(n, l) determines k uniquely
    (0..=dp.n)
        .find(|&k| csolve::column_count(dp.n, k) as usize == dp.d)
        .expect("column count matches some k")
}

pub fn learn_basis<O: ShotOracle + ?Sized>(oracle: &O, plan: &LearnPlan, basis: usize) -> Result<BasisEstimate> {
    let groups = plan.groups(basis);
    let results = groups
        .par_iter()
        .map(|g| execute_group(oracle, g))
        .collect::<Result<Vec<_>>>()?;
    assemble_basis(plan, basis, &results)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Merged {
    pub estimates: BTreeMap<PauliString, f64>,
    /// How many bases covered each Pauli.
    pub coverage: BTreeMap<PauliString, usize>,
}

pub fn merge_estimates(per_basis: &[BasisEstimate], rule: MergeRule) -> Merged {
    let mut buckets: BTreeMap<PauliString, Vec<(usize, f64)>> = BTreeMap::new();
    for (i, be) in per_basis.iter().enumerate() {
        for &(p, v) in &be.values {
            buckets.entry(p).or_default().push((i, v));
        }
    }
    let mut out = Merged::default();
    for (p, vals) in buckets {
        let v = match rule {
            MergeRule::Mean => vals.iter().map(|x| x.1).sum::<f64>() / vals.len() as f64,
            MergeRule::First => vals[0].1,
            MergeRule::MinResidualBasis => {
                vals.iter()
                    .min_by(|a, b| {
                        per_basis[a.0]
                            .residual
                            .total_cmp(&per_basis[b.0].residual)
                            .then(a.0.cmp(&b.0))
                    })
                    .expect("bucket is nonempty")
                    .1
            }
        };
        out.coverage.insert(p, vals.len());
        out.estimates.insert(p, v);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisSummary {
    pub beta: BasisAxes,
    pub gamma: usize,
    pub residual: f64,
    pub recovered_support: Vec<PauliString>,
    pub flagged_rows: usize,
    pub clamped_batches: usize,
    pub unreliable: bool,
    pub diagnostics: SolveDiagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    /// Number of single-shot experiments.
    pub n_exp: u64,
    pub total_time: f64,
    pub max_time: f64,
    pub rounds: Vec<RoundSetting>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub l1: f64,
    pub l2: f64,
    pub lp: f64,
    pub p: f64,
    /// True terms that no sampled basis covered.
    pub uncovered_true_terms: Vec<PauliString>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnReport {
    pub schema: String,
    pub version: String,
    pub mode: Mode,
    pub n: usize,
    pub config: LearnConfig,
    pub derived: DerivedParams,
    /// Merged estimates over every covered Pauli of weight `1..=k`.
    pub estimates: BTreeMap<PauliString, f64>,
    pub covered_paulis: usize,
    /// Weight-`<=k` Paulis outside every sampled basis; reported as 0.
    pub uncovered_paulis: u128,
    pub per_basis: Vec<BasisSummary>,
    pub totals: Totals,
    pub errors: Option<ErrorReport>,
    /// `M / (eps1 e ln(1/gamma_meas))`; absent without measurement noise.
    pub lower_bound_time: Option<f64>,
    pub eps1_for_bound: f64,
    /// Target met (`l^p` error <= eps); `None` without ground truth.
    pub success: Option<bool>,
    pub unreliable_bases: usize,
}

impl LearnReport {
    pub fn estimate(&self, p: &PauliString) -> f64 {
        self.estimates.get(p).copied().unwrap_or(0.0)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization cannot fail");
        s.push('\n');
        s
    }
}

/// Runs the whole protocol against `oracle`.
pub fn learn<O: ShotOracle + ?Sized>(
    oracle: &O,
    cfg: &LearnConfig,
    ground_truth: Option<&SparseHamiltonian>,
) -> Result<LearnReport> {
    let pl = plan(oracle.n(), cfg)?;
    learn_with_plan(oracle, &pl, cfg, ground_truth)
}

pub fn learn_with_plan<O: ShotOracle + ?Sized>(
    oracle: &O,
    plan: &LearnPlan,
    cfg: &LearnConfig,
    ground_truth: Option<&SparseHamiltonian>,
) -> Result<LearnReport> {
    if let Some(limit) = cfg.max_total_time {
        let need = plan.predicted_time();
        if need > limit {
            return Err(Error::InfeasibleBudget(format!(
                "planned total evolution time {need:.4e} exceeds limit {limit:.4e} \
                 ({} shots over {} bases x {} rows, max t = {:.4e})",
                plan.predicted_shots(),
                plan.bases.len(),
                plan.derived.gamma,
                plan.derived.schedule.max_time()
            )));
        }
    }
    if let Some(h) = ground_truth {
        if h.n() != oracle.n() {
            return Err(Error::LengthMismatch {
                expected: oracle.n(),
                got: h.n(),
            });
        }
    }
    let per_basis = (0..plan.bases.len())
        .into_par_iter()
        .map(|i| learn_basis(oracle, plan, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(build_report(oracle.mode(), plan, cfg, per_basis, ground_truth))
}

/// Report from finished basis estimates; also used after out-of-order execution.
pub fn build_report(
    mode: Mode,
    plan: &LearnPlan,
    cfg: &LearnConfig,
    per_basis: Vec<BasisEstimate>,
    ground_truth: Option<&SparseHamiltonian>,
) -> LearnReport {
    let dp = &plan.derived;
    let merged = merge_estimates(&per_basis, cfg.merge_rule);
    let mut n_exp = 0u64;
    let mut total_time = 0.0;
    let mut max_time = 0.0f64;
    for basis in 0..plan.bases.len() {
        for g in plan.groups(basis) {
            n_exp += g.shot_count();
            total_time += g.time();
            max_time = max_time.max(g.spec.t);
        }
    }
    let errors = ground_truth.map(|h| {
        let truth: BTreeMap<PauliString, f64> = h.terms().clone();
        ErrorReport {
            l1: metrics::lp_error(&truth, &merged.estimates, 1.0),
            l2: metrics::lp_error(&truth, &merged.estimates, 2.0),
            lp: metrics::lp_error(&truth, &merged.estimates, cfg.p),
            p: cfg.p,
            uncovered_true_terms: truth
                .keys()
                .filter(|p| !merged.coverage.contains_key(p))
                .copied()
                .collect(),
        }
    });
    let eps1_target = cfg.eps * (cfg.m as f64).powf(1.0 - 1.0 / cfg.p);
    let eps1 = match &errors {
        Some(e) if e.l1 > 0.0 => e.l1,
        _ => eps1_target,
    };
    let lower_bound_time = metrics::lower_bound_time(cfg.m, eps1, cfg.spam.gamma_meas).ok();
    let total_paulis = crate::model::count_k_body_paulis(dp.n, cfg.k);
    let unreliable_bases = per_basis.iter().filter(|b| b.unreliable).count();
    LearnReport {
        schema: REPORT_SCHEMA.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        mode,
        n: dp.n,
        config: cfg.clone(),
        derived: dp.clone(),
        covered_paulis: merged.estimates.len(),
        uncovered_paulis: total_paulis - merged.estimates.len() as u128,
        success: errors.as_ref().map(|e| e.lp <= cfg.eps),
        estimates: merged.estimates,
        per_basis: per_basis
            .into_iter()
            .map(|b| BasisSummary {
                beta: b.beta,
                gamma: b.gamma,
                residual: b.residual,
                recovered_support: b.recovered_support,
                flagged_rows: b.flagged_rows,
                clamped_batches: b.clamped_batches,
                unreliable: b.unreliable,
                diagnostics: b.diagnostics,
            })
            .collect(),
        totals: Totals {
            n_exp,
            total_time,
            max_time,
            rounds: dp.rounds.clone(),
        },
        errors,
        lower_bound_time,
        eps1_for_bound: eps1,
        unreliable_bases,
    }
}

/// Everything needed to replay a run bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub version: String,
    pub config: LearnConfig,
    pub derived: DerivedParams,
    /// Input Hamiltonian file, if the run read one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<String>,
    /// Analytic bias fraction passed to the oracle.
    #[serde(default)]
    pub bias_fraction: f64,
}

impl RunManifest {
    pub fn new(cfg: &LearnConfig, derived: &DerivedParams, hamiltonian: Option<String>, bias_fraction: f64) -> Self {
        Self {
            schema: MANIFEST_SCHEMA.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: cfg.clone(),
            derived: derived.clone(),
            hamiltonian,
            bias_fraction,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{random_k_body, CoeffLaw};
    use crate::pauli::{kbeta_from_bits, Axis};
    use crate::sim::AnalyticOracle;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn basis_count_example() {
        assert_eq!(basis_count(2, 100, 0.01), 83);
    }

    #[test]
    fn eta_formula() {
        let a = eta_from_eps(0.1, 2.0, 7, 10, 3.0);
        assert!((a - 0.1 / 30.0).abs() < 1e-15);
        let b = eta_from_eps(0.1, 1.0, 4, 10, 3.0);
        assert!((b - 0.1 / 60.0).abs() < 1e-15);
        assert!((eta_from_eps(0.1, 1.5, 4, 20, 3.0) * 2.0 - eta_from_eps(0.1, 1.5, 4, 10, 3.0)).abs() < 1e-15);
    }

    #[test]
    fn reshaping_steps_meet_threshold() {
        for &(m, t) in &[(1usize, 0.1), (6, 3.0), (4, 100.0)] {
            let r = reshaping_steps(default_reshaping_factor(), m, t);
            assert!(crate::sim::reshaping_bound(m, t, r) < crate::sim::spam_threshold());
        }
    }

    #[test]
    fn merge_rules() {
        let beta = BasisAxes::uniform(2, Axis::Z).unwrap();
        let mk = |v: f64, res: f64| BasisEstimate {
            beta: beta.clone(),
            gamma: 1,
            values: vec![(ps("ZI"), v)],
            identity_coeff: 0.0,
            residual: res,
            recovered_support: vec![],
            flagged_rows: 0,
            clamped_batches: 0,
            unreliable: false,
            diagnostics: SolveDiagnostics {
                xi_star_bracket: (0.0, 1.0),
                xi_final: 0.5,
                bisection_iters: 0,
                inner_iters_total: 0,
                residual: res,
                objective: 0.0,
                threshold: 0.0,
                certified: true,
                zero_shortcut: false,
                bracket_expanded: false,
                infeasible: false,
            },
        };
        let bs = vec![mk(0.50, 0.3), mk(0.52, 0.1), mk(0.48, 0.2)];
        let mean = merge_estimates(&bs, MergeRule::Mean);
        assert!((mean.estimates[&ps("ZI")] - 0.50).abs() < 1e-15);
        assert_eq!(mean.coverage[&ps("ZI")], 3);
        assert_eq!(merge_estimates(&bs, MergeRule::First).estimates[&ps("ZI")], 0.50);
        assert_eq!(merge_estimates(&bs, MergeRule::MinResidualBasis).estimates[&ps("ZI")], 0.52);
        assert_eq!(merge_estimates(&bs[..1], MergeRule::Mean).estimates[&ps("ZI")], 0.50);
    }

    #[test]
    fn plan_is_deterministic_and_skips_zero_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let _h = random_k_body(4, 1, 3, CoeffLaw::default(), &mut rng).unwrap();
        let mut cfg = LearnConfig::new(1, 3, 0.5);
        cfg.seed = 11;
        let a = plan(4, &cfg).unwrap();
        let b = plan(4, &cfg).unwrap();
        assert_eq!(a, b);
        let groups = a.all_groups();
        assert_eq!(groups.len(), a.nonzero_rows() * a.derived.rounds.len() * 2);
        assert!(groups.iter().all(|g| !g.spec.b.is_zero()));
        assert_eq!(a.predicted_shots(), groups.iter().map(|g| g.shot_count()).sum::<u64>());
    }

    #[test]
    fn empty_effective_hamiltonian_gives_zero_estimates() {
        // every term has an X, so a z-basis annihilates all of them
        let n = 3;
        let h = SparseHamiltonian::from_terms(n, 1, [(ps("XII"), 0.7), (ps("IXI"), -0.4)]).unwrap();
        let mut cfg = LearnConfig::new(1, 2, 0.3);
        cfg.median_batch = Some(9);
        let derived = derive_params(n, &cfg).unwrap();
        let pl = plan_for_bases(&cfg, derived, vec![BasisAxes::uniform(n, Axis::Z).unwrap()]).unwrap();
        let oracle = AnalyticOracle::new(h, SpamModel::noiseless());
        let est = learn_basis(&oracle, &pl, 0).unwrap();
        assert!(est.values.iter().all(|(_, v)| *v == 0.0));
        assert!(est.diagnostics.zero_shortcut);
    }

    #[test]
    fn commuting_instance_recovered_in_its_basis() {
        let n = 5;
        let beta: BasisAxes = "xyzzx".parse().unwrap();
        let terms = [(0b00011u64, 0.6), (0b00100, -0.3), (0b10001, 0.45)]
            .map(|(c, v)| (kbeta_from_bits(&beta, &BitString::new(n, c).unwrap()).unwrap(), v));
        let h = SparseHamiltonian::from_terms(n, 2, terms).unwrap();
        let mut cfg = LearnConfig::new(2, 3, 0.05);
        cfg.seed = 5;
        let derived = derive_params(n, &cfg).unwrap();
        let eta = derived.eta;
        let pl = plan_for_bases(&cfg, derived, vec![beta]).unwrap();
        let oracle = AnalyticOracle::new(h.clone(), SpamModel::noiseless());
        let est = learn_basis(&oracle, &pl, 0).unwrap();
        for (p, v) in &est.values {
            assert!((v - h.coeff(p)).abs() < 10.0 * eta, "{p}: {v} vs {}", h.coeff(p));
        }
        let mut support = est.recovered_support.clone();
        support.sort();
        let mut truth: Vec<_> = h.terms().keys().copied().collect();
        truth.sort();
        assert_eq!(support, truth);
    }

    #[test]
    fn budget_guard() {
        let h = SparseHamiltonian::from_terms(3, 1, [(ps("ZII"), 0.5)]).unwrap();
        let mut cfg = LearnConfig::new(1, 1, 0.1);
        cfg.max_total_time = Some(1.0);
        let oracle = AnalyticOracle::new(h, SpamModel::noiseless());
        assert!(matches!(learn(&oracle, &cfg, None), Err(Error::InfeasibleBudget(_))));
    }

    #[test]
    fn config_validation() {
        let mut c = LearnConfig::new(2, 3, 0.1);
        c.p = 2.5;
        assert!(c.validate().is_err());
        let mut c = LearnConfig::new(2, 3, 0.1);
        c.delta = 1.0;
        assert!(c.validate().is_err());
        assert!(LearnConfig::new(0, 3, 0.1).validate().is_err());
        assert!(LearnConfig::new(2, 0, 0.1).validate().is_err());
    }
}
