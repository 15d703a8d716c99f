use std::collections::BTreeMap;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use hamlearn::learner::LearnReport;
use hamlearn::metrics::log_log_slope;
use hamlearn::model::{self, CoeffLaw};
use hamlearn::seed::{derive_seed, rng_at, stream};
use hamlearn::SparseHamiltonian;

use crate::learn::{load_hamiltonian, run_learner, ConfigFlags};

pub const BENCH_SCHEMA: &str = "hamlearn.bench/1";
pub const SUMMARY_SCHEMA: &str = "hamlearn.bench-summary/1";

#[derive(clap::Args)]
pub struct Args {
    /// Comma-separated accuracy targets.
    #[arg(long, value_delimiter = ',', required = true)]
    eps: Vec<f64>,
    /// Comma-separated term counts; ignored with --hamiltonian.
    #[arg(long = "M", alias = "m", value_delimiter = ',', default_value = "4")]
    m: Vec<usize>,
    /// Comma-separated qubit counts; ignored with --hamiltonian.
    #[arg(long, value_delimiter = ',', default_value = "8")]
    n: Vec<usize>,
    /// Comma-separated learner seeds.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    /// Seed of the generated instances; one instance per (n, M).
    #[arg(long = "instance-seed", default_value_t = 0)]
    instance_seed: u64,
    /// Fixed instance instead of generated ones.
    #[arg(long)]
    hamiltonian: Option<String>,
    #[command(flatten)]
    flags: ConfigFlags,
    /// Concurrent runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// CSV path, `-` for stdout.
    #[arg(long, default_value = "-")]
    out: String,
    /// JSON file with per-(n, M) slopes of log T against log(1/eps).
    #[arg(long)]
    summary: Option<String>,
}

/// One CSV row. Column order is part of the schema.
#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub schema: &'static str,
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub eps: f64,
    pub p: f64,
    pub delta: f64,
    pub seed: u64,
    pub status: String,
    pub total_time: Option<f64>,
    pub n_exp: Option<u64>,
    pub max_time: Option<f64>,
    pub err_l1: Option<f64>,
    pub err_l2: Option<f64>,
    pub err_lp: Option<f64>,
    pub success: Option<bool>,
    pub lower_bound_time: Option<f64>,
    pub bases: Option<usize>,
    pub gamma: Option<usize>,
    pub eta: Option<f64>,
    pub message: String,
}

struct Job {
    n: usize,
    m: usize,
    eps: f64,
    seed: u64,
    instance: std::sync::Arc<SparseHamiltonian>,
}

fn instance(n: usize, k: usize, m: usize, seed: u64) -> Result<SparseHamiltonian> {
    let mut rng = rng_at(derive_seed(seed, &[n as u64, k as u64, m as u64]), &[stream::INSTANCE]);
    Ok(model::random_k_body(n, k, m, CoeffLaw::default(), &mut rng)?)
}

fn run_job(job: &Job, flags: &ConfigFlags) -> Row {
    let h = job.instance.as_ref();
    let k = flags.k.unwrap_or(h.declared_k());
    let cfg = flags.build(k, job.m, job.eps, job.seed);
    let mut row = Row {
        schema: BENCH_SCHEMA,
        n: job.n,
        k,
        m: job.m,
        eps: job.eps,
        p: cfg.as_ref().map(|c| c.p).unwrap_or(f64::NAN),
        delta: cfg.as_ref().map(|c| c.delta).unwrap_or(f64::NAN),
        seed: job.seed,
        status: "error".into(),
        total_time: None,
        n_exp: None,
        max_time: None,
        err_l1: None,
        err_l2: None,
        err_lp: None,
        success: None,
        lower_bound_time: None,
        bases: None,
        gamma: None,
        eta: None,
        message: String::new(),
    };
    let res: Result<LearnReport> = cfg.and_then(|c| run_learner(h, &c, flags.bias));
    match res {
        Ok(r) => {
            row.status = "ok".into();
            row.total_time = Some(r.totals.total_time);
            row.n_exp = Some(r.totals.n_exp);
            row.max_time = Some(r.totals.max_time);
            if let Some(e) = &r.errors {
                row.err_l1 = Some(e.l1);
                row.err_l2 = Some(e.l2);
                row.err_lp = Some(e.lp);
            }
            row.success = r.success;
            row.lower_bound_time = r.lower_bound_time;
            row.bases = Some(r.derived.bases);
            row.gamma = Some(r.derived.gamma);
            row.eta = Some(r.derived.eta);
        }
        Err(e) => row.message = format!("{e:#}"),
    }
    row
}

#[derive(Debug, Serialize)]
pub struct GroupSummary {
    pub n: usize,
    pub m: usize,
    /// `(eps, median T over seeds)` in the order given.
    pub median_time: Vec<(f64, f64)>,
    pub slope_time_vs_inv_eps: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub schema: &'static str,
    pub groups: Vec<GroupSummary>,
    /// Per `(n, eps)`: whether median T is nondecreasing in M.
    pub time_monotone_in_m: Vec<(usize, f64, bool)>,
}

fn median(mut v: Vec<f64>) -> f64 {
    hamlearn::rfe::median(&mut v)
}

pub fn summarize(rows: &[Row]) -> Summary {
    let mut by_group: BTreeMap<(usize, usize), BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for r in rows {
        if let Some(t) = r.total_time {
            by_group
                .entry((r.n, r.m))
                .or_default()
                .entry(r.eps.to_bits())
                .or_default()
                .push(t);
        }
    }
    let mut groups = Vec::new();
    for ((n, m), per_eps) in &by_group {
        let median_time: Vec<(f64, f64)> = per_eps
            .iter()
            .map(|(e, ts)| (f64::from_bits(*e), median(ts.clone())))
            .collect();
        let inv: Vec<f64> = median_time.iter().map(|p| 1.0 / p.0).collect();
        let ts: Vec<f64> = median_time.iter().map(|p| p.1).collect();
        groups.push(GroupSummary {
            n: *n,
            m: *m,
            slope_time_vs_inv_eps: log_log_slope(&inv, &ts).ok(),
            median_time,
        });
    }
    let mut by_eps: BTreeMap<(usize, u64), Vec<(usize, f64)>> = BTreeMap::new();
    for g in &groups {
        for &(e, t) in &g.median_time {
            by_eps.entry((g.n, e.to_bits())).or_default().push((g.m, t));
        }
    }
    let time_monotone_in_m = by_eps
        .into_iter()
        .filter(|(_, v)| v.len() > 1)
        .map(|((n, e), v)| (n, f64::from_bits(e), v.windows(2).all(|w| w[0].1 <= w[1].1)))
        .collect();
    Summary {
        schema: SUMMARY_SCHEMA,
        groups,
        time_monotone_in_m,
    }
}

pub fn run(a: Args) -> Result<()> {
    let default_k = a.flags.k.unwrap_or(2);
    let mut instances = Vec::new();
    match &a.hamiltonian {
        Some(path) => {
            let h = load_hamiltonian(path)?;
            for &m in &a.m {
                // the sweep keeps the assumed M list; a single fixed instance is shared
                instances.push((h.n(), m, std::sync::Arc::new(h.clone())));
            }
        }
        None => {
            for &n in &a.n {
                for &m in &a.m {
                    let h = instance(n, default_k, m, a.instance_seed)
                        .with_context(|| format!("generating instance n = {n}, M = {m}"))?;
                    instances.push((n, m, std::sync::Arc::new(h)));
                }
            }
        }
    }
    let mut jobs = Vec::new();
    for (n, m, h) in &instances {
        for &eps in &a.eps {
            for &seed in &a.seeds {
                jobs.push(Job {
                    n: *n,
                    m: *m,
                    eps,
                    seed,
                    instance: h.clone(),
                });
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.jobs.max(1)).build()?;
    let flags = a.flags.clone();
    let rows: Vec<Row> = pool.install(|| jobs.par_iter().map(|j| run_job(j, &flags)).collect());

    let mut wtr = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        wtr.serialize(r)?;
    }
    let text = String::from_utf8(wtr.into_inner()?)?;
    crate::write_output(&a.out, &text)?;
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    if failed > 0 {
        eprintln!("{failed} of {} runs failed; see the message column", rows.len());
    }
    if let Some(path) = &a.summary {
        let mut s = serde_json::to_string_pretty(&summarize(&rows))?;
        s.push('\n');
        crate::write_output(path, &s)?;
    }
    Ok(())
}
