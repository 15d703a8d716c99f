use anyhow::{bail, Context, Result};

use hamlearn::learner::{self, LearnConfig, LearnReport, MergeRule, RunManifest};
use hamlearn::sim::{AnalyticOracle, Mode, ShotOracle, SpamModel, StatevectorOracle};
use hamlearn::SparseHamiltonian;

/// Learner settings shared by `learn` and `bench`. Unset flags keep the
/// config-file value, then the library default.
#[derive(clap::Args, Clone, Debug, Default)]
pub struct ConfigFlags {
    /// JSON file with any subset of the learner config fields.
    #[arg(long)]
    pub config: Option<String>,
    /// Maximum Pauli weight; defaults to the file's declared k.
    #[arg(long)]
    pub k: Option<usize>,
    /// Error norm exponent in [1, 2].
    #[arg(long)]
    pub p: Option<f64>,
    /// Overall failure probability.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Shot simulator: analytic or statevector.
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Measurement noise: probability an outcome is a fair coin.
    #[arg(long = "gamma-spam")]
    pub gamma_spam: Option<f64>,
    /// Probability that the prepared relative phase is flipped.
    #[arg(long = "prep-flip")]
    pub prep_flip: Option<f64>,
    /// How estimates from several bases combine: mean, first, min_residual_basis.
    #[arg(long)]
    pub merge: Option<MergeRule>,
    /// Constant in the row count of each sparse solve.
    #[arg(long = "c-gamma")]
    pub c_gamma: Option<f64>,
    /// Divisor splitting eps into the per-row noise budget.
    #[arg(long = "c-cal")]
    pub c_cal: Option<f64>,
    /// Fixed number of samples per median, overriding the confidence-derived count.
    #[arg(long = "median-batch")]
    pub median_batch: Option<usize>,
    /// Shots averaged into one probe sample.
    #[arg(long = "shots-per-sample")]
    pub shots_per_sample: Option<u32>,
    /// Known l1 weight of terms outside the model, added to the noise level.
    #[arg(long = "model-error")]
    pub model_error: Option<f64>,
    /// Refuse runs whose planned total evolution time exceeds this.
    #[arg(long = "max-time")]
    pub max_time: Option<f64>,
    /// Analytic-mode bias as a fraction of the reshaping bound.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub bias: f64,
}

impl ConfigFlags {
    /// Final config for a given `M`, `eps`, seed, and default `k`.
    pub fn build(&self, default_k: usize, m: usize, eps: f64, seed: u64) -> Result<LearnConfig> {
        let mut cfg = LearnConfig::new(self.k.unwrap_or(default_k), m, eps);
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
            let patch: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {path}"))?;
            let mut base = serde_json::to_value(&cfg)?;
            match (base.as_object_mut(), patch.as_object()) {
                (Some(b), Some(p)) => {
                    for (k, v) in p {
                        if !b.contains_key(k) {
                            bail!("unknown config field {k:?} in {path}");
                        }
                        b.insert(k.clone(), v.clone());
                    }
                }
                _ => bail!("{path} must hold a JSON object"),
            }
            cfg = serde_json::from_value(base).with_context(|| format!("config in {path}"))?;
            // flags for M, eps, and seed still win
            cfg.m = m;
            cfg.eps = eps;
            cfg.seed = seed;
            if let Some(k) = self.k {
                cfg.k = k;
            }
        }
        cfg.seed = seed;
        if let Some(v) = self.p {
            cfg.p = v;
        }
        if let Some(v) = self.delta {
            cfg.delta = v;
        }
        if let Some(v) = self.mode {
            cfg.mode = v;
        }
        let gm = self.gamma_spam.unwrap_or(cfg.spam.gamma_meas);
        let pf = self.prep_flip.unwrap_or(cfg.spam.prep_flip);
        cfg.spam = SpamModel::new(gm, pf)?;
        if let Some(v) = self.merge {
            cfg.merge_rule = v;
        }
        if let Some(v) = self.c_gamma {
            cfg.c_gamma = v;
        }
        if let Some(v) = self.c_cal {
            cfg.c_cal = v;
        }
        if self.median_batch.is_some() {
            cfg.median_batch = self.median_batch;
        }
        if let Some(v) = self.shots_per_sample {
            cfg.shots_per_sample = v;
        }
        if self.model_error.is_some() {
            cfg.model_error_l1 = self.model_error;
        }
        if self.max_time.is_some() {
            cfg.max_total_time = self.max_time;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(clap::Args)]
pub struct Args {
    /// Hamiltonian JSON file; it drives the simulator and serves as ground truth.
    #[arg(long, required_unless_present = "replay")]
    hamiltonian: Option<String>,
    /// Target accuracy.
    #[arg(long, required_unless_present = "replay")]
    eps: Option<f64>,
    /// Assumed term count; defaults to the number of terms in the file.
    #[arg(long = "M", alias = "m")]
    m: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    flags: ConfigFlags,
    /// Report path, `-` for stdout.
    #[arg(long, default_value = "-")]
    out: String,
    /// Also write a manifest that replays this run.
    #[arg(long)]
    manifest: Option<String>,
    /// Rerun a manifest; other learner flags are ignored.
    #[arg(long)]
    replay: Option<String>,
}

pub fn load_hamiltonian(path: &str) -> Result<SparseHamiltonian> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
    SparseHamiltonian::from_json(&text).with_context(|| format!("loading {path}"))
}

/// Runs the learner on `h` in the configured mode.
pub fn run_learner(h: &SparseHamiltonian, cfg: &LearnConfig, bias: f64) -> Result<LearnReport> {
    let oracle: Box<dyn ShotOracle> = match cfg.mode {
        Mode::Analytic => Box::new(AnalyticOracle::new(h.clone(), cfg.spam).with_bias(bias)?),
        Mode::Statevector => {
            if bias != 0.0 {
                bail!("--bias applies to analytic mode only");
            }
            Box::new(StatevectorOracle::new(h.clone(), cfg.spam)?)
        }
    };
    Ok(learner::learn(oracle.as_ref(), cfg, Some(h))?)
}

pub fn run(a: Args) -> Result<u8> {
    let (h_path, cfg, bias) = match &a.replay {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
            let man: RunManifest = serde_json::from_str(&text).with_context(|| format!("parsing {path}"))?;
            if man.schema != learner::MANIFEST_SCHEMA {
                bail!("{path}: unsupported manifest schema {:?}", man.schema);
            }
            let h = man.hamiltonian.clone().context("manifest names no Hamiltonian file")?;
            (h, man.config, man.bias_fraction)
        }
        None => {
            let h_path = a.hamiltonian.clone().expect("clap enforces --hamiltonian");
            let h = load_hamiltonian(&h_path)?;
            let m = a.m.unwrap_or(h.len().max(1));
            let cfg = a.flags.build(h.declared_k(), m, a.eps.expect("clap enforces --eps"), a.seed)?;
            (h_path, cfg, a.flags.bias)
        }
    };
    let h = load_hamiltonian(&h_path)?;
    let report = run_learner(&h, &cfg, bias)?;
    if let Some(path) = &a.manifest {
        let man = RunManifest::new(&cfg, &report.derived, Some(h_path.clone()), bias);
        let mut text = serde_json::to_string_pretty(&man)?;
        text.push('\n');
        crate::write_output(path, &text)?;
    }
    crate::write_output(&a.out, &report.to_json())?;
    if let Some(e) = &report.errors {
        eprintln!(
            "l{} error {:.4e} (target {}), T = {:.4e}, N_exp = {}",
            e.p, e.lp, cfg.eps, report.totals.total_time, report.totals.n_exp
        );
    }
    Ok(if report.success == Some(true) { 0 } else { 2 })
}
