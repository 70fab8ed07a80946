use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rating::Risk;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Over,
    Under,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Over => "over",
            Direction::Under => "under",
        }
    }
}

/// One hypergeometric over/under-representation test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypergeomTest {
    /// Observed successes among the draws.
    pub k: u64,
    /// Draws (group size).
    pub n: u64,
    /// Successes in the population.
    pub big_k: u64,
    /// Population size.
    pub big_n: u64,
    pub p_value: f64,
    pub direction: Direction,
    /// `k/n == K/N`; the lower tail was used.
    pub tie: bool,
    /// Bonferroni-corrected threshold `p_s / n_tests`.
    pub threshold: f64,
    pub significant: bool,
}

/// A test result attached to a group (module, rank or distance shell) and a rating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentResult {
    pub group: usize,
    pub rating: Risk,
    #[serde(flatten)]
    pub test: HypergeomTest,
}

const EXACT_TABLE: usize = 171;

fn ln_factorial(n: u64) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut f = 1.0f64;
        let mut out = Vec::with_capacity(EXACT_TABLE);
        out.push(0.0);
        for i in 1..EXACT_TABLE {
            f *= i as f64;
            out.push(f.ln());
        }
        out
    });
    if (n as usize) < EXACT_TABLE {
        table[n as usize]
    } else {
        statrs::function::gamma::ln_gamma(n as f64 + 1.0)
    }
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// `P(Y = k)` for `Y ~ Hypergeometric(N, K, n)`.
pub fn hypergeom_pmf(k: u64, n: u64, big_k: u64, big_n: u64) -> f64 {
    if k > n || k > big_k || n - k > big_n - big_k {
        return 0.0;
    }
    (ln_choose(big_k, k) + ln_choose(big_n - big_k, n - k) - ln_choose(big_n, n)).exp()
}

/// `P(Y ≥ k)` when `upper`, else `P(Y ≤ k)`, by direct summation from `k`.
pub fn hypergeom_tail(k: u64, n: u64, big_k: u64, big_n: u64, upper: bool) -> f64 {
    let lo = n.saturating_sub(big_n - big_k);
    let hi = n.min(big_k);
    if upper && k <= lo || !upper && k >= hi {
        return 1.0;
    }
    let mut term = hypergeom_pmf(k, n, big_k, big_n);
    let mut sum = term;
    let (nn, kk, n_all) = (n as f64, big_k as f64, big_n as f64);
    let mut j = k;
    if upper {
        while j < hi {
            let jf = j as f64;
            term *= (kk - jf) * (nn - jf) / ((jf + 1.0) * (n_all - kk - nn + jf + 1.0));
            sum += term;
            j += 1;
            if term < sum * 1e-18 {
                break;
            }
        }
    } else {
        while j > lo {
            let jf = j as f64;
            term *= jf * (n_all - kk - nn + jf) / ((kk - jf + 1.0) * (nn - jf + 1.0));
            sum += term;
            j -= 1;
            if term < sum * 1e-18 {
                break;
            }
        }
    }
    sum.min(1.0)
}

/// Hypergeometric enrichment test with Bonferroni correction over `n_tests`.
pub fn hypergeom_test(k: u64, n: u64, big_k: u64, big_n: u64, n_tests: usize, p_s: f64) -> Result<HypergeomTest> {
    if n > big_n || big_k > big_n || k > n.min(big_k) || n - k > big_n - big_k {
        return Err(Error::invalid(format!("inconsistent counts k={k} n={n} K={big_k} N={big_n}")));
    }
    if n == 0 || n_tests == 0 {
        return Err(Error::invalid("hypergeometric test needs n ≥ 1 and n_tests ≥ 1"));
    }
    if !(p_s > 0.0 && p_s <= 1.0) {
        return Err(Error::invalid(format!("significance level {p_s} outside (0, 1]")));
    }
    // compare k/n with K/N exactly in integers
    let lhs = k as u128 * big_n as u128;
    let rhs = big_k as u128 * n as u128;
    let (direction, tie) = match lhs.cmp(&rhs) {
        std::cmp::Ordering::Greater => (Direction::Over, false),
        std::cmp::Ordering::Less => (Direction::Under, false),
        std::cmp::Ordering::Equal => (Direction::Under, true),
    };
    let p_value = hypergeom_tail(k, n, big_k, big_n, direction == Direction::Over);
    let threshold = p_s / n_tests as f64;
    Ok(HypergeomTest {
        k,
        n,
        big_k,
        big_n,
        p_value,
        direction,
        tie,
        threshold,
        significant: p_value < threshold,
    })
}
