use std::collections::BTreeMap;
use std::io::Write;

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use hamlearn::learner::LearnReport;
use hamlearn::metrics::{self, CheckConfig, OperationalReport};
use hamlearn::pauli::{BasisAxes, BitString, PauliString};
use hamlearn::seed::{derive_seed, rng_at, stream};
use hamlearn::sim::{self, ExperimentSpec, Observable, ShotRecord, SpamModel, StatevectorOracle};

use crate::learn::load_hamiltonian;

pub const CHECK_SCHEMA: &str = "hamlearn.check/1";

#[derive(clap::Args)]
pub struct Args {
    /// Reference Hamiltonian file.
    #[arg(long)]
    hamiltonian: String,
    /// Learn report whose estimates are compared with the reference.
    #[arg(long, conflicts_with = "other")]
    report: Option<String>,
    /// Second Hamiltonian file to compare with the reference.
    #[arg(long)]
    other: Option<String>,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long = "haar-states", default_value_t = 500)]
    haar_states: usize,
    #[arg(long = "t-max", default_value_t = 2.0)]
    t_max: f64,
    /// Random reshaping experiments checked against the reshaping bound.
    #[arg(long, default_value_t = 4)]
    cells: usize,
    /// Statevector shots per experiment.
    #[arg(long, default_value_t = 2000)]
    shots: usize,
    #[arg(long = "gamma-spam", default_value_t = 0.0)]
    gamma_spam: f64,
    #[arg(long = "prep-flip", default_value_t = 0.0)]
    prep_flip: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSONL file receiving one record per simulated shot.
    #[arg(long = "shot-log")]
    shot_log: Option<String>,
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Debug, Serialize)]
pub struct ReshapingCell {
    pub beta: String,
    pub b: String,
    pub t: f64,
    pub r: u64,
    pub observable: Observable,
    pub shots: usize,
    pub mean: f64,
    pub ideal: f64,
    pub stderr: f64,
    /// `4 M^2 t^2 / r + eps_spam + 3 stderr`.
    pub allowed: f64,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct CheckReport {
    pub schema: &'static str,
    pub operational: Option<OperationalReport>,
    pub reshaping: Vec<ReshapingCell>,
    pub violations: usize,
}

fn reshaping_cells(
    h: &hamlearn::SparseHamiltonian,
    a: &Args,
    spam: SpamModel,
    log: &mut Option<std::io::BufWriter<std::fs::File>>,
) -> Result<Vec<ReshapingCell>> {
    if a.cells == 0 || a.shots == 0 {
        return Ok(Vec::new());
    }
    let n = h.n();
    let oracle = StatevectorOracle::new(h.clone(), spam)?;
    let m_terms = h.len().max(1);
    let mut pick = rng_at(a.seed, &[stream::CHECKS, 0]);
    let mut cells = Vec::with_capacity(a.cells);
    for cell in 0..a.cells {
        let beta = BasisAxes::random(n, &mut pick);
        let mut b = BitString::random(n, &mut pick);
        while b.is_zero() {
            b = BitString::random(n, &mut pick);
        }
        let t = pick.random_range(0.1..1.0);
        let r = [16u64, 64, 256][pick.random_range(0..3)];
        let obs = if cell % 2 == 0 { Observable::X } else { Observable::Y };
        let spec = ExperimentSpec::with_steps(beta.clone(), b, t, r, obs)?;
        let delta = h.effective(&beta)?.eigenvalue_gap(&b)?;
        let mut sum = 0i64;
        for s in 0..a.shots {
            let seed = derive_seed(a.seed, &[stream::CHECKS, 1, cell as u64, s as u64]);
            let shot = oracle.shot(&spec, &mut ChaCha8Rng::seed_from_u64(seed))?;
            sum += shot.outcome as i64;
            if let Some(w) = log.as_mut() {
                serde_json::to_writer(&mut *w, &ShotRecord::from_shot(&shot, seed))?;
                w.write_all(b"\n")?;
            }
        }
        let mean = sum as f64 / a.shots as f64;
        let ideal = sim::ideal_mean(obs, delta, t);
        let stderr = ((1.0 - mean * mean).max(0.0) / a.shots as f64).sqrt();
        let allowed = sim::reshaping_bound(m_terms, t, r) + spam.epsilon_spam() + 3.0 * stderr;
        cells.push(ReshapingCell {
            beta: beta.to_string(),
            b: b.to_string(),
            t,
            r,
            observable: obs,
            shots: a.shots,
            mean,
            ideal,
            stderr,
            allowed,
            pass: (mean - ideal).abs() <= allowed,
        });
    }
    Ok(cells)
}

pub fn run(a: Args) -> Result<u8> {
    let h = load_hamiltonian(&a.hamiltonian)?;
    let spam = SpamModel::new(a.gamma_spam, a.prep_flip)?;
    let estimate: Option<BTreeMap<PauliString, f64>> = if let Some(path) = &a.report {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
        let rep: LearnReport = serde_json::from_str(&text).with_context(|| format!("parsing {path}"))?;
        if rep.n != h.n() {
            bail!("report covers {} qubits, Hamiltonian has {}", rep.n, h.n());
        }
        Some(rep.estimates)
    } else if let Some(path) = &a.other {
        let o = load_hamiltonian(path)?;
        if o.n() != h.n() {
            bail!("{path} has {} qubits, reference has {}", o.n(), h.n());
        }
        Some(o.terms().clone())
    } else {
        None
    };
    let operational = match &estimate {
        Some(est) => {
            let cfg = CheckConfig {
                samples: a.samples,
                haar_states: a.haar_states,
                t_max: a.t_max,
            };
            let mut rng = rng_at(a.seed, &[stream::CHECKS, 2]);
            Some(metrics::operational_checks(h.n(), h.terms(), est, &cfg, &mut rng)?)
        }
        None => None,
    };
    let mut log = match &a.shot_log {
        Some(p) => Some(std::io::BufWriter::new(
            std::fs::File::create(p).with_context(|| format!("creating {p}"))?,
        )),
        None => None,
    };
    let reshaping = reshaping_cells(&h, &a, spam, &mut log)?;
    if let Some(mut w) = log {
        w.flush()?;
    }
    let violations = operational.as_ref().map_or(0, |o| o.violations())
        + reshaping.iter().filter(|c| !c.pass).count();
    let report = CheckReport {
        schema: CHECK_SCHEMA,
        operational,
        reshaping,
        violations,
    };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    crate::write_output(&a.out, &text)?;
    Ok(if violations == 0 { 0 } else { 2 })
}
