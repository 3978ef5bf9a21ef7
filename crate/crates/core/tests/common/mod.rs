//! Independent reference computations used by the integration tests.
#![allow(dead_code)]

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Rank of each value: 1 + (#smaller) + (#equal - 1) / 2.
pub fn ranks_by_counting(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let less = xs.iter().filter(|&&y| y < x).count() as f64;
            let equal = xs.iter().filter(|&&y| y == x).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

/// Two-sided exact Wilcoxon p by enumerating all 2^n sign assignments of
/// the non-zero differences: 2 * P(W+ <= min(W+, W-)), capped at 1.
pub fn wilcoxon_enumerated(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| *v != 0.0).collect();
    if d.is_empty() {
        return (0.0, 1.0);
    }
    let r = ranks_by_counting(&d.iter().map(|v| v.abs()).collect::<Vec<_>>());
    let total: f64 = r.iter().sum();
    let w_plus: f64 = d.iter().zip(&r).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let w = w_plus.min(total - w_plus);
    let n = d.len();
    let mut hits = 0u64;
    for mask in 0u64..(1 << n) {
        let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| r[i]).sum();
        if s <= w + 1e-9 {
            hits += 1;
        }
    }
    (w, (2.0 * hits as f64 / (1u64 << n) as f64).min(1.0))
}

/// Γ(k/2) for integer k >= 1 from Γ(1) = 1, Γ(1/2) = √π and Γ(z+1) = zΓ(z).
fn gamma_half(k: usize) -> f64 {
    let (mut z, mut g) = if k % 2 == 0 { (1.0, 1.0) } else { (0.5, std::f64::consts::PI.sqrt()) };
    while z < k as f64 / 2.0 {
        g *= z;
        z += 1.0;
    }
    g
}

/// Chi-square survival function by composite Simpson integration of the
/// density after substituting t = u² (removes the singularity at 0).
pub fn chi2_sf_simpson(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let k = df as f64;
    let norm = 2f64.powf(k / 2.0) * gamma_half(df);
    let f = |u: f64| {
        let t = u * u;
        if t == 0.0 {
            return if df == 1 { 2.0 / norm } else { 0.0 };
        }
        2.0 * u * t.powf(k / 2.0 - 1.0) * (-t / 2.0).exp() / norm
    };
    let hi = x.sqrt();
    let n = 200_000;
    let h = hi / n as f64;
    let mut s = f(0.0) + f(hi);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    1.0 - s * h / 3.0
}

pub fn chi2_sf_statrs(x: f64, df: usize) -> f64 {
    ChiSquared::new(df as f64).unwrap().sf(x)
}

/// Friedman statistic with tie correction, straight from the textbook
/// formula on counted ranks.
pub fn friedman_formula(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len() as f64;
    let k = rows[0].len();
    let kf = k as f64;
    let mut sums = vec![0.0; k];
    let mut ties = 0.0;
    for row in rows {
        let r = ranks_by_counting(row);
        for j in 0..k {
            sums[j] += r[j];
        }
        let mut seen: Vec<f64> = Vec::new();
        for &v in row {
            if !seen.contains(&v) {
                seen.push(v);
                let t = row.iter().filter(|&&y| y == v).count() as f64;
                ties += t * t * t - t;
            }
        }
    }
    let mean_rank = n * (kf + 1.0) / 2.0;
    let ss: f64 = sums.iter().map(|s| (s - mean_rank).powi(2)).sum();
    let chi = 12.0 * ss / (n * kf * (kf + 1.0));
    chi / (1.0 - ties / (n * kf * (kf * kf - 1.0)))
}

pub fn cochran_formula(rows: &[Vec<bool>]) -> f64 {
    let k = rows[0].len() as f64;
    let cols: Vec<f64> = (0..rows[0].len())
        .map(|j| rows.iter().filter(|r| r[j]).count() as f64)
        .collect();
    let row_totals: Vec<f64> = rows.iter().map(|r| r.iter().filter(|v| **v).count() as f64).collect();
    let n: f64 = row_totals.iter().sum();
    let num = k * (k - 1.0) * cols.iter().map(|c| (c - n / k).powi(2)).sum::<f64>();
    let den = k * n - row_totals.iter().map(|r| r * r).sum::<f64>();
    num / den
}

pub fn mcnemar_formula(b: usize, c: usize) -> f64 {
    let (b, c) = (b as f64, c as f64);
    (((b - c).abs() - 1.0).powi(2) / (b + c)).max(0.0)
}

pub fn bartlett_formula(groups: &[Vec<f64>]) -> f64 {
    let k = groups.len() as f64;
    let n: f64 = groups.iter().map(|g| g.len() as f64).sum();
    let vars: Vec<f64> = groups
        .iter()
        .map(|g| {
            let m = g.iter().sum::<f64>() / g.len() as f64;
            g.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (g.len() as f64 - 1.0)
        })
        .collect();
    let sp = groups.iter().zip(&vars).map(|(g, v)| (g.len() as f64 - 1.0) * v).sum::<f64>() / (n - k);
    let num = (n - k) * sp.ln() - groups.iter().zip(&vars).map(|(g, v)| (g.len() as f64 - 1.0) * v.ln()).sum::<f64>();
    let c = 1.0
        + (groups.iter().map(|g| 1.0 / (g.len() as f64 - 1.0)).sum::<f64>() - 1.0 / (n - k)) / (3.0 * (k - 1.0));
    num / c
}

/// Fixed tables with reference values computed by scipy / statsmodels.
pub mod tables {
    pub const FRIEDMAN: [[f64; 3]; 4] = [[7.0, 9.0, 8.0], [6.0, 5.0, 7.0], [9.0, 7.0, 7.0], [8.0, 5.0, 6.0]];
    pub const FRIEDMAN_STAT: f64 = 0.933_333_333_333_333_3;
    pub const FRIEDMAN_P: f64 = 0.627_089_085_273_056_2;

    pub const COCHRAN: [[u8; 3]; 10] = [
        [1, 1, 0],
        [1, 0, 0],
        [1, 1, 1],
        [0, 0, 0],
        [1, 0, 1],
        [1, 1, 0],
        [0, 1, 0],
        [1, 0, 0],
        [1, 1, 0],
        [1, 0, 0],
    ];
    pub const COCHRAN_Q: f64 = 6.75;
    pub const COCHRAN_P: f64 = 0.034_218_118_311_666_025;

    pub const BARTLETT_A: [f64; 7] = [8.88, 9.12, 9.0, 8.5, 8.75, 9.3, 9.15];
    pub const BARTLETT_B: [f64; 7] = [7.2, 8.1, 9.3, 6.4, 8.8, 9.9, 7.7];
    pub const BARTLETT_STAT: f64 = 9.533_882_081_677_465;
    pub const BARTLETT_P: f64 = 0.002_017_130_005_829_216_2;

    pub const BARTLETT3: [[f64; 3]; 5] =
        [[2.1, 3.0, 1.2], [2.5, 3.9, 1.0], [1.9, 2.2, 1.3], [2.2, 4.5, 1.1], [2.6, 3.3, 0.9]];
    pub const BARTLETT3_STAT: f64 = 9.887_873_612_531_251;
    pub const BARTLETT3_P: f64 = 0.007_126_487_474_5;
}

pub fn discordant_pair(b: usize, c: usize, agree: usize) -> (Vec<bool>, Vec<bool>) {
    let mut x = vec![true; b];
    let mut y = vec![false; b];
    x.extend(vec![false; c]);
    y.extend(vec![true; c]);
    for i in 0..agree {
        x.push(i % 2 == 0);
        y.push(i % 2 == 0);
    }
    (x, y)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1e-300) || (a - b).abs() <= tol
}
