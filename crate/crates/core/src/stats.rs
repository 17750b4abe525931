//! Group-comparison tests, multiple-comparison control, correlation and
//! mediation. All tests are two-sided.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::recording::Group;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MannWhitneyExact,
    MannWhitneyNormal,
    ChiSquare,
    ChiSquareYates,
    Permutation,
    Pearson,
    PartialCorrelation,
    Sobel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: Method,
    pub corrected_p: Option<f64>,
    pub reject: Option<bool>,
}

impl StatResult {
    fn new(statistic: f64, p: f64, method: Method) -> Self {
        StatResult {
            statistic,
            p_value: clamp_p(p),
            method,
            corrected_p: None,
            reject: None,
        }
    }
}

fn clamp_p(p: f64) -> f64 {
    if p.is_nan() {
        1.0
    } else {
        p.clamp(f64::MIN_POSITIVE, 1.0)
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

fn two_sided_normal(z: f64) -> f64 {
    2.0 * std_normal().sf(z.abs())
}

/// Combined size at or below which Mann-Whitney enumerates exactly.
pub const MANN_WHITNEY_EXACT_MAX: usize = 12;

/// Midranks (1-based) of `values`, ties averaged.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        let r = (start + end + 1) as f64 / 2.0;
        for &k in &idx[start..end] {
            ranks[k] = r;
        }
        start = end;
    }
    ranks
}

/// Mann-Whitney U. Reports `min(U_a, U_b)`.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<StatResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::domain("Mann-Whitney needs two non-empty samples"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite sample value"));
    }
    let (na, nb) = (a.len(), b.len());
    let n = na + nb;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let offset = (na * (na + 1)) as f64 / 2.0;
    let ua = ranks[..na].iter().sum::<f64>() - offset;
    let u = ua.min((na * nb) as f64 - ua);
    let mean = (na * nb) as f64 / 2.0;
    let dev = (ua - mean).abs();

    if n <= MANN_WHITNEY_EXACT_MAX {
        let (mut hit, mut total) = (0u64, 0u64);
        for mask in 0u32..(1u32 << n) {
            if mask.count_ones() as usize != na {
                continue;
            }
            let r: f64 = (0..n).filter(|k| mask >> k & 1 == 1).map(|k| ranks[k]).sum();
            total += 1;
            if ((r - offset) - mean).abs() >= dev - 1e-9 {
                hit += 1;
            }
        }
        return Ok(StatResult::new(u, hit as f64 / total as f64, Method::MannWhitneyExact));
    }

    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let nf = n as f64;
    let var = (na * nb) as f64 / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((dev - 0.5).max(0.0)) / var.sqrt();
        two_sided_normal(z)
    };
    Ok(StatResult::new(u, p, Method::MannWhitneyNormal))
}

/// Pearson chi-square on a 2x2 table, df = 1.
pub fn chi_square_independence(table: [[u64; 2]; 2], yates: bool) -> Result<StatResult> {
    let rows = [table[0][0] + table[0][1], table[1][0] + table[1][1]];
    let cols = [table[0][0] + table[1][0], table[0][1] + table[1][1]];
    if rows.contains(&0) || cols.contains(&0) {
        return Err(Error::domain("contingency table has a zero marginal"));
    }
    let n = (rows[0] + rows[1]) as f64;
    let mut stat = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let e = rows[i] as f64 * cols[j] as f64 / n;
            let mut d = (table[i][j] as f64 - e).abs();
            if yates {
                d = (d - 0.5).max(0.0);
            }
            stat += d * d / e;
        }
    }
    let p = ChiSquared::new(1.0).expect("df 1").sf(stat);
    let method = if yates { Method::ChiSquareYates } else { Method::ChiSquare };
    Ok(StatResult::new(stat, p, method))
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn lexicographic(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.len().cmp(&b.len()).then_with(|| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    })
}

/// Difference-of-means permutation test, `p = (1 + #{|T*| >= |T|}) / (r + 1)`.
///
/// The two samples are put in a canonical order first, so swapping them
/// gives the same p for the same seed.
pub fn permutation_test(a: &[f64], b: &[f64], r: usize, seed_value: u64) -> Result<StatResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::domain("permutation test needs at least two values per group"));
    }
    if r == 0 {
        return Err(Error::domain("permutation count must be positive"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite sample value"));
    }
    let (first, second) = if lexicographic(a, b).is_le() { (a, b) } else { (b, a) };
    let observed = mean(a) - mean(b);
    let pooled: Vec<f64> = first.iter().chain(second).copied().collect();
    let lo = pooled.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = pooled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Ok(StatResult::new(0.0, 1.0, Method::Permutation));
    }
    let scale = pooled.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let threshold = observed.abs() - 1e-10 * scale;
    let na = first.len();
    let total: f64 = pooled.iter().sum();
    let mut rng = seed::rng(seed_value);
    let mut perm = pooled.clone();
    let mut hits = 0usize;
    for _ in 0..r {
        perm.shuffle(&mut rng);
        let sa: f64 = perm[..na].iter().sum();
        let t = sa / na as f64 - (total - sa) / (pooled.len() - na) as f64;
        if t.abs() >= threshold {
            hits += 1;
        }
    }
    Ok(StatResult::new(
        observed,
        (1 + hits) as f64 / (r + 1) as f64,
        Method::Permutation,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BhDecision {
    pub reject: bool,
    pub adjusted_p: f64,
}

/// Benjamini-Hochberg step-up procedure.
pub fn fdr_bh(p_values: &[f64], alpha: f64) -> Result<Vec<BhDecision>> {
    if p_values.is_empty() {
        return Err(Error::domain("no p-values"));
    }
    if p_values.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
        return Err(Error::domain("p-values must lie in (0, 1]"));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p_values[i].total_cmp(&p_values[j]).then(i.cmp(&j)));
    let mut cutoff = 0;
    for (k, &i) in order.iter().enumerate() {
        if p_values[i] <= (k + 1) as f64 * alpha / m as f64 {
            cutoff = k + 1;
        }
    }
    let mut out = vec![BhDecision { reject: false, adjusted_p: 1.0 }; m];
    let mut running = 1.0f64;
    for (k, &i) in order.iter().enumerate().rev() {
        running = running.min(p_values[i] * m as f64 / (k + 1) as f64).min(1.0);
        let adjusted = running.max(p_values[i]);
        out[i] = BhDecision {
            reject: k < cutoff,
            adjusted_p: adjusted,
        };
    }
    Ok(out)
}

pub fn bonferroni(p_values: &[f64], alpha: f64) -> Vec<bool> {
    let m = p_values.len() as f64;
    p_values.iter().map(|p| *p <= alpha / m).collect()
}

fn centered(x: &[f64]) -> Vec<f64> {
    let m = mean(x);
    x.iter().map(|v| v - m).collect()
}

fn correlation_of(x: &[f64], y: &[f64], df: usize, method: Method) -> Result<StatResult> {
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let syy: f64 = y.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    if !(sxx > 0.0) || !(syy > 0.0) {
        return Err(Error::domain("zero variance"));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let p = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * (df as f64 / (1.0 - r * r)).sqrt();
        2.0 * StudentsT::new(0.0, 1.0, df as f64).expect("df > 0").sf(t.abs())
    };
    Ok(StatResult::new(r, p, method))
}

/// Pearson r with a t-distributed two-sided p on `n - 2` df.
pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Result<StatResult> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::domain("correlation needs two equal-length samples of at least 3"));
    }
    let (cx, cy) = (centered(x), centered(y));
    let sx: f64 = cx.iter().map(|v| v * v).sum();
    let sy: f64 = cy.iter().map(|v| v * v).sum();
    let tol = |raw: &[f64]| 1e-24 * raw.iter().map(|v| v * v).sum::<f64>();
    if sx <= tol(x) || sy <= tol(y) {
        return Err(Error::domain("zero variance"));
    }
    correlation_of(&cx, &cy, x.len() - 2, Method::Pearson)
}

/// Correlation of the residuals of `x` and `y` after least-squares projection
/// onto an intercept and the covariate columns.
pub fn partial_correlation(x: &[f64], y: &[f64], covariates: &[Vec<f64>]) -> Result<StatResult> {
    let n = x.len();
    let k = covariates.len();
    if y.len() != n || covariates.iter().any(|c| c.len() != n) {
        return Err(Error::domain("partial correlation inputs differ in length"));
    }
    if n <= k + 2 {
        return Err(Error::domain("too few observations for the covariates"));
    }
    let mut basis: Vec<Vec<f64>> = vec![vec![1.0 / (n as f64).sqrt(); n]];
    for c in covariates {
        let norm0 = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut v = c.clone();
        for q in &basis {
            let d: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= d * qi;
            }
        }
        let norm = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        if norm0 == 0.0 || norm <= 1e-10 * norm0 {
            return Err(Error::domain("covariate matrix is rank deficient"));
        }
        basis.push(v.into_iter().map(|t| t / norm).collect());
    }
    let residual = |s: &[f64]| {
        let mut v = s.to_vec();
        for q in &basis {
            let d: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= d * qi;
            }
        }
        v
    };
    let (rx, ry) = (residual(x), residual(y));
    let tiny = |res: &[f64], raw: &[f64]| {
        res.iter().map(|v| v * v).sum::<f64>() <= 1e-20 * raw.iter().map(|v| v * v).sum::<f64>()
    };
    if tiny(&rx, x) || tiny(&ry, y) {
        return Err(Error::domain("residual has zero variance"));
    }
    correlation_of(&rx, &ry, n - 2 - k, Method::PartialCorrelation)
}

/// Sobel test of the indirect effect `a * b`.
pub fn sobel_test(a: f64, se_a: f64, b: f64, se_b: f64) -> Result<StatResult> {
    if !(se_a > 0.0) || !(se_b > 0.0) {
        return Err(Error::domain("standard errors must be positive"));
    }
    let den = (b * b * se_a * se_a + a * a * se_b * se_b).sqrt();
    let z = if den == 0.0 { 0.0 } else { a * b / den };
    Ok(StatResult::new(z, two_sided_normal(z), Method::Sobel))
}

/// `(z = 0.945, p = 0.345)`
pub fn format_sobel(r: &StatResult) -> String {
    format!("(z = {:.3}, p = {})", r.statistic, format_p(r.p_value))
}

/// Three decimals, or `<0.001`.
pub fn format_p(p: f64) -> String {
    if p < 0.001 {
        "<0.001".to_string()
    } else {
        format!("{p:.3}")
    }
}

/// `5 (45.45)`
pub fn format_count_percent(count: u64, total: u64) -> String {
    format!("{count} ({:.2})", 100.0 * count as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTest {
    pub feature: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub adjusted_p: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenResult {
    pub tests: Vec<FeatureTest>,
}

impl ScreenResult {
    pub fn mask(&self) -> Vec<bool> {
        self.tests.iter().map(|t| t.reject).collect()
    }
}

/// Per-feature permutation test of GS against PS followed by BH-FDR.
/// Feature `j` uses `seed::derive(seed, j)`.
pub fn groupwise_feature_screen(
    features: &[Vec<f64>],
    groups: &[Group],
    r: usize,
    alpha: f64,
    seed_value: u64,
) -> Result<ScreenResult> {
    if features.len() != groups.len() || features.is_empty() {
        return Err(Error::domain("one label per subject is required"));
    }
    let d = features[0].len();
    if d == 0 || features.iter().any(|f| f.len() != d) {
        return Err(Error::domain("subjects must share a non-empty feature dimension"));
    }
    let tests = (0..d)
        .into_par_iter()
        .map(|j| {
            let pick = |g: Group| -> Vec<f64> {
                features
                    .iter()
                    .zip(groups)
                    .filter(|(_, &l)| l == g)
                    .map(|(f, _)| f[j])
                    .collect()
            };
            permutation_test(&pick(Group::GS), &pick(Group::PS), r, seed::derive(seed_value, j as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    let p: Vec<f64> = tests.iter().map(|t| t.p_value).collect();
    let bh = fdr_bh(&p, alpha)?;
    Ok(ScreenResult {
        tests: tests
            .iter()
            .zip(bh)
            .enumerate()
            .map(|(j, (t, q))| FeatureTest {
                feature: j,
                statistic: t.statistic,
                p_value: t.p_value,
                adjusted_p: q.adjusted_p,
                reject: q.reject,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn mann_whitney_examples() {
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_relative_eq!(r.p_value, 1.0 / 3.0, epsilon = 1e-12);
        let a: Vec<f64> = (1..=5).map(f64::from).collect();
        let b: Vec<f64> = (6..=10).map(f64::from).collect();
        assert_relative_eq!(mann_whitney_u(&a, &b).unwrap().p_value, 2.0 / 252.0, epsilon = 1e-12);
        assert_eq!(mann_whitney_u(&a, &a).unwrap().p_value, 1.0);
        assert!(mann_whitney_u(&[], &a).is_err());
    }

    #[test]
    fn mann_whitney_normal_path() {
        let a: Vec<f64> = (0..20).map(f64::from).collect();
        let b: Vec<f64> = (0..20).map(|v| f64::from(v) + 0.5).collect();
        let r = mann_whitney_u(&a, &b).unwrap();
        assert_eq!(r.method, Method::MannWhitneyNormal);
        assert!(r.p_value > 0.5);
        let c: Vec<f64> = (100..120).map(f64::from).collect();
        assert!(mann_whitney_u(&a, &c).unwrap().p_value < 1e-6);
        let flat = vec![1.0; 10];
        assert_eq!(mann_whitney_u(&flat, &flat).unwrap().p_value, 1.0);
    }

    #[test]
    fn chi_square_examples() {
        let r = chi_square_independence([[10, 10], [10, 10]], false).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        let r = chi_square_independence([[20, 0], [0, 20]], false).unwrap();
        assert_relative_eq!(r.statistic, 40.0, epsilon = 1e-12);
        assert!(r.p_value < 1e-9);
        let y = chi_square_independence([[20, 0], [0, 20]], true).unwrap();
        assert!(y.statistic < 40.0);
        assert!(chi_square_independence([[0, 0], [3, 4]], false).is_err());
    }

    #[test]
    fn permutation_examples() {
        assert_eq!(permutation_test(&[2.0; 5], &[2.0; 5], 1000, 1).unwrap().p_value, 1.0);
        let mut rng = seed::rng(3);
        let a: Vec<f64> = (0..10).map(|_| StandardNormal.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..10).map(|_| 5.0 + Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
        let r = permutation_test(&a, &b, 1000, 7).unwrap();
        assert_eq!(r.p_value, 1.0 / 1001.0);
        let c: Vec<f64> = b.iter().map(|v| v - 4.5).collect();
        let p1 = permutation_test(&a, &c, 500, 9).unwrap().p_value;
        assert_eq!(p1, permutation_test(&c, &a, 500, 9).unwrap().p_value);
        let sa: Vec<f64> = a.iter().map(|v| v + 100.0).collect();
        let sc: Vec<f64> = c.iter().map(|v| v + 100.0).collect();
        assert_eq!(p1, permutation_test(&sa, &sc, 500, 9).unwrap().p_value);
        assert!(permutation_test(&[1.0], &a, 10, 1).is_err());
    }

    #[test]
    fn bh_examples() {
        let r = fdr_bh(&[0.01, 0.02, 0.04], 0.05).unwrap();
        assert!(r.iter().all(|d| d.reject));
        assert!(fdr_bh(&[0.5; 6], 0.05).unwrap().iter().all(|d| !d.reject));
        let one = fdr_bh(&[0.001], 0.05).unwrap();
        assert!(one[0].reject);
        assert_eq!(one[0].adjusted_p, 0.001);
        assert!(fdr_bh(&[], 0.05).is_err());
        assert!(fdr_bh(&[0.0], 0.05).is_err());
        let mut rng = seed::rng(11);
        for _ in 0..200 {
            let p: Vec<f64> = (0..10).map(|_| rng.random_range(1e-4..=1.0)).collect();
            let r = fdr_bh(&p, 0.05).unwrap();
            for (pi, d) in p.iter().zip(&r) {
                assert!(d.adjusted_p >= *pi);
            }
        }
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_relative_eq!(pearson_correlation(&x, &x).unwrap().statistic, 1.0);
        let y: Vec<f64> = x.iter().map(|v| -2.0 * v + 7.0).collect();
        assert_relative_eq!(pearson_correlation(&x, &y).unwrap().statistic, -1.0);
        let r = pearson_correlation(&x, &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert_relative_eq!(r.statistic, 0.8, epsilon = 1e-12);
        assert!(pearson_correlation(&x, &[3.0; 4]).is_err());
        assert!(pearson_correlation(&x[..2], &x[..2]).is_err());
    }

    #[test]
    fn partial_examples() {
        let mut rng = seed::rng(5);
        let n = 40;
        let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a + b).collect();
        let r = partial_correlation(&x, &y, &[z.clone()]).unwrap();
        assert_relative_eq!(r.statistic, 1.0, epsilon = 1e-9);
        assert!(partial_correlation(&x, &z, &[z.clone()]).is_err());
        assert!(partial_correlation(&x, &y, &[z.clone(), z.clone()]).is_err());
        assert!(partial_correlation(&x, &y, &[vec![1.0; n]]).is_err());

        // Covariate orthogonal to both x and y after centering.
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let ys = [2.0, 1.0, 4.0, 3.0, 6.0, 5.0];
        let cov = vec![vec![1.0, 0.0, -1.0, -1.0, 0.0, 1.0]];
        let (xc, yc, cc) = (centered(&xs), centered(&ys), centered(&cov[0]));
        assert!(xc.iter().zip(&cc).map(|(a, b)| a * b).sum::<f64>().abs() < 1e-12);
        assert!(yc.iter().zip(&cc).map(|(a, b)| a * b).sum::<f64>().abs() < 1e-12);
        let p = partial_correlation(&xs, &ys, &cov).unwrap().statistic;
        assert_relative_eq!(p, pearson_correlation(&xs, &ys).unwrap().statistic, epsilon = 1e-9);
    }

    #[test]
    fn sobel_examples() {
        let r = sobel_test(0.0, 1.0, 2.0, 1.0).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
        let r = sobel_test(2.0, 0.5, 1.0, 0.25).unwrap();
        assert_relative_eq!(r.statistic, 2.0 / 0.5f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(r.p_value, 0.004677734981047, epsilon = 1e-9);
        assert!(sobel_test(1.0, 0.0, 1.0, 1.0).is_err());
        let s = StatResult::new(0.945, 0.3446, Method::Sobel);
        assert_eq!(format_sobel(&s), "(z = 0.945, p = 0.345)");
        assert_eq!(format_count_percent(5, 11), "5 (45.45)");
        assert_eq!(format_p(0.98912), "0.989");
    }

    #[test]
    fn screen_matches_direct_calls() {
        let mut rng = seed::rng(8);
        let groups: Vec<Group> = (0..12).map(|i| if i < 5 { Group::GS } else { Group::PS }).collect();
        let feats: Vec<Vec<f64>> = groups
            .iter()
            .map(|g| {
                let shift = if *g == Group::PS { 3.0 } else { 0.0 };
                vec![shift + Distribution::<f64>::sample(&StandardNormal, &mut rng), StandardNormal.sample(&mut rng)]
            })
            .collect();
        let s = groupwise_feature_screen(&feats, &groups, 400, 0.05, 21).unwrap();
        let gs: Vec<f64> = feats[..5].iter().map(|f| f[0]).collect();
        let ps: Vec<f64> = feats[5..].iter().map(|f| f[0]).collect();
        let direct = permutation_test(&gs, &ps, 400, seed::derive(21, 0)).unwrap();
        assert_eq!(s.tests[0].p_value, direct.p_value);
        assert!(s.mask()[0]);
        assert!(groupwise_feature_screen(&feats[..1], &groups[..1], 10, 0.05, 1).is_err());
    }
}
