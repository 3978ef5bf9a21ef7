//! Nonparametric tests for comparing approaches over paired runs.
//!
//! Rows are runs (blocks), columns are approaches (treatments). All p-values
//! come from the chi-square or normal distributions implemented here on top
//! of the regularized incomplete gamma function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ALPHA: f64 = 0.05;
pub const DEFAULT_EXACT_THRESHOLD: usize = 12;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

impl TestResult {
    fn null() -> Self {
        TestResult {
            statistic: 0.0,
            p_value: 1.0,
        }
    }
}

/// Real-valued matrix with at least two rows and two columns.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedSamples {
    rows: Vec<Vec<f64>>,
}

impl PairedSamples {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        check_shape(rows.len(), rows.first().map_or(0, Vec::len), rows.iter().map(Vec::len))?;
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::config("samples must be finite"));
        }
        Ok(PairedSamples { rows })
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::config("columns differ in length"));
        }
        PairedSamples::new((0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect())
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn num_blocks(&self) -> usize {
        self.rows.len()
    }

    pub fn num_treatments(&self) -> usize {
        self.rows[0].len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }
}

/// Boolean matrix with the same shape rules as [`PairedSamples`].
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryOutcomes {
    rows: Vec<Vec<bool>>,
}

impl BinaryOutcomes {
    pub fn new(rows: Vec<Vec<bool>>) -> Result<Self> {
        check_shape(rows.len(), rows.first().map_or(0, Vec::len), rows.iter().map(Vec::len))?;
        Ok(BinaryOutcomes { rows })
    }

    pub fn from_columns(columns: &[Vec<bool>]) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::config("columns differ in length"));
        }
        BinaryOutcomes::new((0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect())
    }

    pub fn rows(&self) -> &[Vec<bool>] {
        &self.rows
    }

    pub fn column(&self, j: usize) -> Vec<bool> {
        self.rows.iter().map(|r| r[j]).collect()
    }
}

fn check_shape(rows: usize, cols: usize, mut lens: impl Iterator<Item = usize>) -> Result<()> {
    if rows < 2 || cols < 2 {
        return Err(Error::config(format!(
            "need at least 2 rows and 2 columns, got {rows} x {cols}"
        )));
    }
    if !lens.all(|l| l == cols) {
        return Err(Error::config("ragged sample matrix"));
    }
    Ok(())
}

/// Ranks starting at 1, tied values sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Sizes of the tie groups in `values` (groups of one included).
fn tie_groups(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        out.push(j - i);
        i = j;
    }
    out
}

/// Friedman rank test with tie correction.
pub fn friedman_test(samples: &PairedSamples) -> TestResult {
    let n = samples.num_blocks() as f64;
    let k = samples.num_treatments();
    let kf = k as f64;
    let mut rank_sums = vec![0.0; k];
    let mut tie_term = 0.0;
    for row in samples.rows() {
        for (s, r) in rank_sums.iter_mut().zip(average_ranks(row)) {
            *s += r;
        }
        tie_term += tie_groups(row)
            .into_iter()
            .map(|t| {
                let t = t as f64;
                t * t * t - t
            })
            .sum::<f64>();
    }
    let correction = 1.0 - tie_term / (n * kf * (kf * kf - 1.0));
    if correction <= 0.0 {
        return TestResult::null();
    }
    let ss: f64 = rank_sums.iter().map(|r| r * r).sum();
    let raw = 12.0 / (n * kf * (kf + 1.0)) * ss - 3.0 * n * (kf + 1.0);
    let statistic = (raw / correction).max(0.0);
    TestResult {
        statistic,
        p_value: chi_square_sf(statistic, k - 1),
    }
}

/// Two-sided Wilcoxon signed-rank test on paired samples. Zero differences
/// are dropped; the exact null distribution is used when at most
/// `exact_threshold` non-zero differences remain, otherwise a normal
/// approximation with tie and continuity correction.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64], exact_threshold: usize) -> Result<TestResult> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::config("wilcoxon needs two equal-length samples of at least 2"));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Ok(TestResult::null());
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let n = diffs.len();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w = w_plus.min(total - w_plus);

    let p_value = if n <= exact_threshold {
        exact_signed_rank_p(&ranks, w)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let ties: f64 = tie_groups(&abs)
            .into_iter()
            .map(|t| {
                let t = t as f64;
                t * t * t - t
            })
            .sum();
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - ties / 48.0;
        if var <= 0.0 {
            1.0
        } else {
            let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
            (2.0 * normal_sf(z)).min(1.0)
        }
    };
    Ok(TestResult {
        statistic: w,
        p_value,
    })
}

/// P(min(W+, W-) <= w) under the sign-flip null, by dynamic programming over
/// doubled (hence integral) ranks.
fn exact_signed_rank_p(ranks: &[f64], w: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    // counts[s] = number of sign assignments whose positive doubled-rank sum is s
    let mut counts = vec![0u64; max + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let limit = (w * 2.0).round() as usize;
    let below: u64 = counts[..=limit.min(max)].iter().sum();
    let total = (1u64 << ranks.len()) as f64;
    (2.0 * below as f64 / total).min(1.0)
}

/// Cochran's Q for k related binary samples.
pub fn cochran_q(outcomes: &BinaryOutcomes) -> TestResult {
    let k = outcomes.rows()[0].len();
    let kf = k as f64;
    let mut col = vec![0.0; k];
    let mut sum_r = 0.0;
    let mut sum_r2 = 0.0;
    for row in outcomes.rows() {
        let r = row.iter().filter(|&&v| v).count() as f64;
        sum_r += r;
        sum_r2 += r * r;
        for (c, &v) in col.iter_mut().zip(row) {
            if v {
                *c += 1.0;
            }
        }
    }
    let denom = kf * sum_r - sum_r2;
    if denom == 0.0 {
        return TestResult::null();
    }
    let mean = sum_r / kf;
    let num: f64 = col.iter().map(|c| (c - mean) * (c - mean)).sum();
    let statistic = kf * (kf - 1.0) * num / denom;
    TestResult {
        statistic,
        p_value: chi_square_sf(statistic, k - 1),
    }
}

/// McNemar's test with continuity correction on two paired boolean samples.
pub fn mcnemar(a: &[bool], b: &[bool]) -> Result<TestResult> {
    if a.len() != b.len() {
        return Err(Error::config("mcnemar needs equal-length samples"));
    }
    let only_a = a.iter().zip(b).filter(|(x, y)| **x && !**y).count() as f64;
    let only_b = a.iter().zip(b).filter(|(x, y)| !**x && **y).count() as f64;
    if only_a + only_b == 0.0 {
        return Ok(TestResult::null());
    }
    let d = (only_a - only_b).abs() - 1.0;
    let statistic = (d * d / (only_a + only_b)).max(0.0);
    Ok(TestResult {
        statistic,
        p_value: chi_square_sf(statistic, 1),
    })
}

/// Bartlett's test for equal variances across the columns.
pub fn bartlett_test(samples: &PairedSamples) -> Result<TestResult> {
    let groups: Vec<Vec<f64>> = (0..samples.num_treatments()).map(|j| samples.column(j)).collect();
    bartlett_groups(&groups)
}

/// Bartlett's test over groups of possibly different sizes.
pub fn bartlett_groups(groups: &[Vec<f64>]) -> Result<TestResult> {
    if groups.len() < 2 || groups.iter().any(|g| g.len() < 2) {
        return Err(Error::config("bartlett needs at least two groups of two values"));
    }
    let k = groups.len();
    let mut pooled = 0.0;
    let mut log_sum = 0.0;
    let mut inv_sum = 0.0;
    let mut dof_total = 0.0;
    for (j, g) in groups.iter().enumerate() {
        let n = g.len() as f64;
        let mean = g.iter().sum::<f64>() / n;
        let var = g.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        if var <= 0.0 {
            return Err(Error::Undefined(format!("group {j} has zero variance")));
        }
        pooled += (n - 1.0) * var;
        log_sum += (n - 1.0) * var.ln();
        inv_sum += 1.0 / (n - 1.0);
        dof_total += n - 1.0;
    }
    pooled /= dof_total;
    let num = dof_total * pooled.ln() - log_sum;
    let c = 1.0 + (inv_sum - 1.0 / dof_total) / (3.0 * (k as f64 - 1.0));
    let statistic = (num / c).max(0.0);
    Ok(TestResult {
        statistic,
        p_value: chi_square_sf(statistic, k - 1),
    })
}

pub fn bonferroni(p: f64, m: usize) -> f64 {
    (p * m as f64).min(1.0)
}

/// Survival function of the chi-square distribution.
pub fn chi_square_sf(x: f64, df: usize) -> f64 {
    assert!(df >= 1, "chi-square needs df >= 1");
    if x <= 0.0 {
        return 1.0;
    }
    regularized_gamma_q(df as f64 / 2.0, x / 2.0)
}

/// P(Z > z) for a standard normal Z.
pub fn normal_sf(z: f64) -> f64 {
    let u = z / std::f64::consts::SQRT_2;
    if u >= 0.0 {
        0.5 * erfc_nonneg(u)
    } else {
        1.0 - 0.5 * erfc_nonneg(-u)
    }
}

fn erfc_nonneg(u: f64) -> f64 {
    if u == 0.0 {
        1.0
    } else {
        regularized_gamma_q(0.5, u * u)
    }
}

/// ln Γ(x) for x > 0 (Lanczos, g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 10_000;

/// Upper regularized incomplete gamma Q(a, x) = Γ(a, x) / Γ(a): power series
/// for x < a + 1, Lentz continued fraction otherwise.
pub fn regularized_gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    let log_prefix = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..GAMMA_MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * GAMMA_EPS {
                break;
            }
        }
        (1.0 - sum * log_prefix.exp()).clamp(0.0, 1.0)
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..GAMMA_MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < GAMMA_EPS {
                break;
            }
        }
        (log_prefix.exp() * h).clamp(0.0, 1.0)
    }
}
