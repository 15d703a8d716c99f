//! Robust frequency estimation: locate `theta` in `[-A, A]` by repeated 3/2
//! interval refinement, each round probing `e^{i theta s_l}` through medians of
//! noisy cosine and sine estimates.
//!
//! The probe times are fixed before any probe runs, so a caller can execute all
//! probes up front and hand the medians to [`refine`].

use std::f64::consts::PI;

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shots averaged into one probe sample.
pub const DEFAULT_SHOTS_PER_SAMPLE: u32 = 54;

/// Per-round shrink factor of the bracketing interval.
pub const SHRINK: f64 = 1.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfeSchedule {
    pub a: f64,
    pub eps: f64,
    pub q: f64,
    pub lambda: f64,
    pub rounds: usize,
    pub times: Vec<f64>,
    /// Median batch size per probe.
    pub m: usize,
    pub shots_per_sample: u32,
}

/// `ceil(18 ln(4 L / q))`.
pub fn median_batch_size(rounds: usize, q: f64) -> usize {
    (18.0 * (4.0 * rounds as f64 / q).ln()).ceil().max(1.0) as usize
}

pub fn build_schedule(a: f64, eps: f64, q: f64) -> Result<RfeSchedule> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::InvalidParameter(format!("frequency bound A = {a} must be positive")));
    }
    if !(eps > 0.0) || eps >= a {
        return Err(Error::InvalidParameter(format!(
            "accuracy eps = {eps} must lie in (0, A = {a})"
        )));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!("failure probability q = {q} outside (0, 1)")));
    }
    let lambda = eps / 3.0;
    let rounds = ((a / lambda).ln() / SHRINK.ln()).ceil().max(1.0) as usize;
    let times = (0..rounds)
        .map(|l| PI / (2.0 * a) * SHRINK.powi(l as i32))
        .collect();
    Ok(RfeSchedule {
        a,
        eps,
        q,
        lambda,
        rounds,
        times,
        m: median_batch_size(rounds, q),
        shots_per_sample: DEFAULT_SHOTS_PER_SAMPLE,
    })
}

impl RfeSchedule {
    pub fn with_median_batch(mut self, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("median batch must be positive".into()));
        }
        self.m = m;
        Ok(self)
    }

    pub fn with_shots_per_sample(mut self, shots: u32) -> Result<Self> {
        if shots == 0 {
            return Err(Error::InvalidParameter("shots per sample must be positive".into()));
        }
        self.shots_per_sample = shots;
        Ok(self)
    }

    /// Probe-level time ledger `2 m sum_l s_l` (cosine and sine probes).
    pub fn probe_time(&self) -> f64 {
        2.0 * self.m as f64 * self.times.iter().sum::<f64>()
    }

    /// Time summed over every individual shot.
    pub fn shot_time(&self) -> f64 {
        self.probe_time() * self.shots_per_sample as f64
    }

    pub fn probe_samples(&self) -> u64 {
        2 * self.m as u64 * self.rounds as u64
    }

    pub fn shots(&self) -> u64 {
        self.probe_samples() * self.shots_per_sample as u64
    }

    pub fn max_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// `[a, (a + 2b) / 3]`
    Left,
    /// `[(2a + b) / 3, b]`
    Right,
}

/// Picks the sub-interval holding `theta` given `z ~ e^{i theta pi / (b - a)}`.
pub fn discriminate(z: Complex64, a: f64, b: f64) -> Branch {
    let rot = Complex64::from_polar(1.0, -(a + b) * PI / (2.0 * (b - a)));
    if (rot * z).im <= 0.0 {
        Branch::Left
    } else {
        Branch::Right
    }
}

pub fn apply_branch(branch: Branch, a: f64, b: f64) -> (f64, f64) {
    match branch {
        Branch::Left => (a, (a + 2.0 * b) / 3.0),
        Branch::Right => ((2.0 * a + b) / 3.0, b),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreqEstimate {
    pub theta_hat: f64,
    pub interval: (f64, f64),
    /// Individual `+-1` shots behind the probes.
    pub shots_used: u64,
    /// Probe samples, each an average of `shots_per_sample` shots.
    pub probe_samples: u64,
    /// `2 m sum_l s_l`.
    pub evolution_time_used: f64,
    pub branches: Vec<Branch>,
}

/// Runs the refinement on precomputed round values `z_l = X_median + i Y_median`.
pub fn refine(schedule: &RfeSchedule, probes: &[Complex64]) -> Result<FreqEstimate> {
    if probes.len() != schedule.rounds {
        return Err(Error::ShapeMismatch {
            expected: schedule.rounds,
            got: probes.len(),
        });
    }
    let (mut a, mut b) = (-schedule.a, schedule.a);
    let mut branches = Vec::with_capacity(schedule.rounds);
    for &z in probes {
        let br = discriminate(z, a, b);
        (a, b) = apply_branch(br, a, b);
        branches.push(br);
    }
    Ok(FreqEstimate {
        theta_hat: 0.5 * (a + b),
        interval: (a, b),
        shots_used: schedule.shots(),
        probe_samples: schedule.probe_samples(),
        evolution_time_used: schedule.probe_time(),
        branches,
    })
}

/// Median; the mean of the two central values for even lengths.
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of nothing");
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Sequential driver. `probe(t, m, rng)` returns the medians of `m` cosine and
/// `m` sine samples at time `t`.
pub fn estimate_frequency<F>(schedule: &RfeSchedule, mut probe: F, rng: &mut ChaCha8Rng) -> Result<FreqEstimate>
where
    F: FnMut(f64, usize, &mut ChaCha8Rng) -> Result<(f64, f64)>,
{
    let mut zs = Vec::with_capacity(schedule.rounds);
    for &t in &schedule.times {
        let (x, y) = probe(t, schedule.m, rng)?;
        zs.push(Complex64::new(x, y));
    }
    refine(schedule, &zs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn exact(theta: f64) -> impl FnMut(f64, usize, &mut ChaCha8Rng) -> Result<(f64, f64)> {
        move |t, _, _| Ok(((theta * t).cos(), (theta * t).sin()))
    }

    #[test]
    fn schedule_example() {
        let s = build_schedule(2.0, 0.06, 0.1).unwrap();
        assert!((s.lambda - 0.02).abs() < 1e-15);
        assert_eq!(s.rounds, 12);
        assert!((s.times[0] - PI / 4.0).abs() < 1e-15);
        // lambda = eps / 3 keeps A / lambda above 3, so at least three rounds run
        assert_eq!(build_schedule(2.0, 2.0 / 1.49, 0.1).unwrap().rounds, 4);
        assert_eq!(build_schedule(2.0, 1.999, 0.1).unwrap().rounds, 3);
        assert!(build_schedule(2.0, 2.0, 0.1).is_err());
        assert!(build_schedule(2.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn probe_times_track_interval_width() {
        let s = build_schedule(3.0, 0.01, 0.05).unwrap();
        let (mut a, mut b) = (-3.0, 3.0);
        for &t in &s.times {
            assert!((t - PI / (b - a)).abs() < 1e-9 * t);
            (a, b) = apply_branch(Branch::Right, a, b);
        }
        assert!(b - a <= 2.0 * s.lambda + 1e-12);
    }

    #[test]
    fn time_ledger_closed_form() {
        // sum_l s_l = (pi / A)(1.5^L - 1) and 1.5^{L-1} < A / lambda <= 1.5^L
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let a = rng.random_range(0.5..20.0);
            let eps = a * rng.random_range(1e-4..0.6);
            let s = build_schedule(a, eps, 0.1).unwrap();
            let sum: f64 = s.times.iter().sum();
            let closed = PI / a * (SHRINK.powi(s.rounds as i32) - 1.0);
            assert!((sum - closed).abs() < 1e-9 * closed);
            assert!(sum <= 3.0 * PI / (2.0 * s.lambda));
            assert!(s.probe_time() <= 3.0 * PI * s.m as f64 / s.lambda);
        }
    }

    #[test]
    fn discriminate_endpoints() {
        let (a, b) = (-1.0, 2.0);
        let z = |theta: f64| Complex64::from_polar(1.0, theta * PI / (b - a));
        assert_eq!(discriminate(z(a), a, b), Branch::Left);
        assert_eq!(discriminate(z(b), a, b), Branch::Right);
        // midpoint lies in both branches
        let (l, r) = (apply_branch(Branch::Left, a, b), apply_branch(Branch::Right, a, b));
        let mid = 0.5 * (a + b);
        assert!(l.0 <= mid && mid <= l.1 && r.0 <= mid && mid <= r.1);
    }

    #[test]
    fn noiseless_estimates() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = build_schedule(2.0, 1e-3, 0.05).unwrap();
        let e = estimate_frequency(&s, exact(0.0), &mut rng).unwrap();
        assert!(e.theta_hat.abs() <= 1e-3);
        let e = estimate_frequency(&s, exact(1.234), &mut rng).unwrap();
        assert!((e.theta_hat - 1.234).abs() <= 1e-3);
        assert!(e.interval.1 - e.interval.0 <= 2.0 * s.lambda + 1e-12);
        assert_eq!(e.probe_samples, 2 * s.m as u64 * s.rounds as u64);
        assert_eq!(e.shots_used, 54 * e.probe_samples);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn probe_count_mismatch() {
        let s = build_schedule(2.0, 0.1, 0.1).unwrap();
        assert!(refine(&s, &[]).is_err());
    }
}
