//! Power-law tail fitting by maximum likelihood with KS-selected lower cutoff.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub xmin: f64,
    /// Kolmogorov–Smirnov distance between the fitted and empirical tail.
    pub ks: f64,
    pub n_tail: usize,
    /// Fraction of all samples at or above `xmin`.
    pub tail_fraction: f64,
    pub discrete: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XminScan {
    /// At most this many candidate cutoffs, spread evenly over the ranked
    /// unique values.
    Capped(usize),
    /// Every unique value is tried.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscreteEstimator {
    /// Closed form `1 + n / Σ ln(x / (xmin - 1/2))`.
    Approximate,
    /// Numerical maximization of the zeta likelihood.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawOptions {
    pub discrete: bool,
    pub scan: XminScan,
    pub min_tail: usize,
    pub estimator: DiscreteEstimator,
}

impl PowerLawOptions {
    pub fn continuous() -> Self {
        PowerLawOptions { discrete: false, scan: XminScan::Capped(500), min_tail: 50, estimator: DiscreteEstimator::Exact }
    }

    pub fn discrete() -> Self {
        PowerLawOptions { discrete: true, ..Self::continuous() }
    }
}

/// Fits with default options: capped scan, 50-sample minimum tail.
pub fn powerlaw_fit(samples: &[f64], discrete: bool) -> Result<PowerLawFit> {
    let opts = if discrete { PowerLawOptions::discrete() } else { PowerLawOptions::continuous() };
    powerlaw_fit_with(samples, &opts)
}

pub fn powerlaw_fit_with(samples: &[f64], opts: &PowerLawOptions) -> Result<PowerLawFit> {
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("non-finite sample"));
    }
    let mut x: Vec<f64> = samples.iter().copied().filter(|&v| v > 0.0).collect();
    if opts.discrete && x.iter().any(|v| v.fract() != 0.0) {
        return Err(Error::invalid("discrete fit requires integer samples"));
    }
    x.sort_by(f64::total_cmp);
    let n = x.len();
    let min_tail = opts.min_tail.max(2);
    if n < min_tail {
        return Err(Error::FitFailure(format!("{n} positive samples, need at least {min_tail}")));
    }

    // first index of every unique value that still leaves min_tail samples
    let mut starts: Vec<usize> = Vec::new();
    for i in 0..=n - min_tail {
        if i == 0 || x[i] != x[i - 1] {
            starts.push(i);
        }
    }
    // the largest value alone cannot be a tail
    starts.retain(|&i| x[i] < x[n - 1]);
    if starts.is_empty() {
        return Err(Error::FitFailure(format!(
            "no candidate cutoff leaves {min_tail} samples with more than one distinct value"
        )));
    }
    if let XminScan::Capped(cap) = opts.scan {
        if starts.len() > cap && cap > 0 {
            let k = starts.len();
            let picked: Vec<usize> = (0..cap).map(|j| starts[j * (k - 1) / (cap - 1).max(1)]).collect();
            starts = picked;
            starts.dedup();
        }
    }

    let logs: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let mut suffix = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] + logs[i];
    }

    let mut best: Option<PowerLawFit> = None;
    for &s in &starts {
        let xmin = x[s];
        let tail = &x[s..];
        let n_t = tail.len();
        let sum_log = suffix[s];
        let fit = if opts.discrete {
            let approx = 1.0 + n_t as f64 / (sum_log - n_t as f64 * (xmin - 0.5).ln());
            let alpha = match opts.estimator {
                DiscreteEstimator::Approximate => approx,
                DiscreteEstimator::Exact => discrete_mle(xmin, n_t, sum_log, approx),
            };
            if !(alpha > 1.0) {
                continue;
            }
            let ks = ks_discrete(tail, alpha);
            PowerLawFit { alpha, xmin, ks, n_tail: n_t, tail_fraction: n_t as f64 / n as f64, discrete: true }
        } else {
            let denom = sum_log - n_t as f64 * xmin.ln();
            if denom <= 0.0 {
                continue;
            }
            let alpha = 1.0 + n_t as f64 / denom;
            let ks = ks_continuous(tail, alpha);
            PowerLawFit { alpha, xmin, ks, n_tail: n_t, tail_fraction: n_t as f64 / n as f64, discrete: false }
        };
        if best.is_none_or(|b| fit.ks < b.ks) {
            best = Some(fit);
        }
    }
    best.ok_or_else(|| Error::FitFailure("no admissible cutoff".into()))
}

fn ks_continuous(tail: &[f64], alpha: f64) -> f64 {
    let n = tail.len() as f64;
    let xmin = tail[0];
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < tail.len() {
        let mut j = i;
        while j + 1 < tail.len() && tail[j + 1] == tail[i] {
            j += 1;
        }
        let cdf = 1.0 - (tail[i] / xmin).powf(1.0 - alpha);
        let below = i as f64 / n;
        let at = (j + 1) as f64 / n;
        d = d.max((cdf - below).abs()).max((at - cdf).abs());
        i = j + 1;
    }
    d
}

fn ks_discrete(tail: &[f64], alpha: f64) -> f64 {
    let n = tail.len() as f64;
    let xmin = tail[0];
    let z0 = hurwitz_zeta(alpha, xmin);
    // z tracks ζ(α, y) for the current integer y
    let mut y = xmin;
    let mut z = z0;
    let advance = |target: f64, y: &mut f64, z: &mut f64| {
        if target - *y < 32.0 {
            while *y < target {
                *z -= y.powf(-alpha);
                *y += 1.0;
            }
        } else {
            *y = target;
            *z = hurwitz_zeta(alpha, target);
        }
    };
    let mut d: f64 = 0.0;
    let mut prev_ecdf = 0.0;
    let mut i = 0;
    while i < tail.len() {
        let mut j = i;
        while j + 1 < tail.len() && tail[j + 1] == tail[i] {
            j += 1;
        }
        let u = tail[i];
        if u - 1.0 >= xmin && u - 1.0 > y - 1.0 {
            // largest integer below u: empirical CDF still at its previous level
            advance(u, &mut y, &mut z);
            let cdf_before = 1.0 - z / z0;
            d = d.max((prev_ecdf - cdf_before).abs());
        }
        advance(u + 1.0, &mut y, &mut z);
        let cdf = 1.0 - z / z0;
        let ecdf = (j + 1) as f64 / n;
        d = d.max((ecdf - cdf).abs());
        prev_ecdf = ecdf;
        i = j + 1;
    }
    d
}

/// Maximizes `-n ln ζ(α, xmin) - α Σ ln x` by golden-section search around
/// the closed-form estimate.
fn discrete_mle(xmin: f64, n: usize, sum_log: f64, guess: f64) -> f64 {
    let nll = |a: f64| n as f64 * hurwitz_zeta(a, xmin).ln() + a * sum_log;
    let center = if guess.is_finite() && guess > 1.0 { guess } else { 2.0 };
    let (mut lo, mut hi) = ((center - 1.0).max(1.0 + 1e-6), center + 1.0);
    // widen until the minimum is bracketed
    while nll(hi) < nll(hi - 1e-3) && hi < 50.0 {
        hi += 1.0;
    }
    const PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = hi - PHI * (hi - lo);
    let mut d = lo + PHI * (hi - lo);
    let (mut fc, mut fd) = (nll(c), nll(d));
    while hi - lo > 1e-9 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - PHI * (hi - lo);
            fc = nll(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + PHI * (hi - lo);
            fd = nll(d);
        }
    }
    0.5 * (lo + hi)
}

/// Hurwitz zeta `ζ(s, q) = Σ_{k≥0} (q + k)^{-s}` for `s > 1`, `q > 0`,
/// via Euler–Maclaurin summation.
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    debug_assert!(s > 1.0 && q > 0.0);
    const B2J: [f64; 8] = [
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
        7.0 / 6.0,
        -3617.0 / 510.0,
    ];
    let shift = if q < 12.0 { (12.0 - q).ceil() as usize } else { 0 };
    let mut sum = 0.0;
    for k in 0..shift {
        sum += (q + k as f64).powf(-s);
    }
    let a = q + shift as f64;
    let a_pow = a.powf(-s);
    sum += a * a_pow / (s - 1.0) + 0.5 * a_pow;
    // term_j = B_2j / (2j)! * s (s+1) ... (s+2j-2) * a^{-s-2j+1}
    let mut poch = s;
    let mut power = a_pow / a;
    let mut fact = 2.0;
    for (j, b) in B2J.iter().enumerate() {
        let term = b / fact * poch * power;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
        let k = 2.0 * (j as f64 + 1.0);
        poch *= (s + k - 1.0) * (s + k);
        power /= a * a;
        fact *= (k + 1.0) * (k + 2.0);
    }
    sum
}
