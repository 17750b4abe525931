//! Standardization, four linear and instance-based classifiers,
//! leave-one-subject-out evaluation and the ACC / F1 / kappa metrics.
//!
//! PS is the positive class throughout. Every tie resolves to GS.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recording::{Group, Session};

/// One subject's feature vector for one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectFeatureSet {
    pub subject_id: String,
    pub features: Vec<f64>,
    pub label: Group,
    pub session: Option<Session>,
}

fn sign(g: Group) -> f64 {
    match g {
        Group::PS => 1.0,
        Group::GS => -1.0,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_xy(x: &[Vec<f64>], y: &[Group]) -> Result<usize> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::domain("feature rows and labels must be non-empty and equal in number"));
    }
    let d = x[0].len();
    if x.iter().any(|r| r.len() != d) {
        return Err(Error::domain("ragged feature matrix"));
    }
    if !y.contains(&Group::GS) || !y.contains(&Group::PS) {
        return Err(Error::domain("training labels contain a single class"));
    }
    Ok(d)
}

/// Column means and population standard deviations of a training fold.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub const VARIANCE_FLOOR: f64 = 1e-12;

impl Standardizer {
    pub fn fit(train: &[Vec<f64>]) -> Self {
        let n = train.len() as f64;
        let d = train.first().map_or(0, Vec::len);
        let mut mean = vec![0.0; d];
        for row in train {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; d];
        for row in train {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| (s / n).max(VARIANCE_FLOOR).sqrt())
            .collect();
        Standardizer { mean, std }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| {
                let z = (v - m) / s;
                // Constant columns sit at the floor; rounding residue maps to 0.
                if *s <= VARIANCE_FLOOR.sqrt() {
                    0.0
                } else {
                    z
                }
            })
            .collect()
    }
}

/// Z-score both folds with the training fold's statistics.
pub fn standardize(train: &[Vec<f64>], test: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let s = Standardizer::fit(train);
    (
        train.iter().map(|r| s.apply(r)).collect(),
        test.iter().map(|r| s.apply(r)).collect(),
    )
}

/// `f(x) = w.x + b`; positive means PS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub w: Vec<f64>,
    pub b: f64,
}

impl LinearModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.w, x) + self.b
    }

    pub fn predict(&self, x: &[f64]) -> Group {
        if self.decision(x) > 0.0 {
            Group::PS
        } else {
            Group::GS
        }
    }
}

pub const SVM_TOLERANCE: f64 = 1e-8;
pub const SVM_MAX_ITER: usize = 100_000;

/// Linear SVM minimizing `mean hinge + lambda |w|^2`, solved in the dual with
/// maximal-violating-pair SMO from `alpha = 0`.
pub fn train_svm_linear(x: &[Vec<f64>], y: &[Group], lambda: f64) -> Result<LinearModel> {
    let d = check_xy(x, y)?;
    if !(lambda > 0.0) {
        return Err(Error::domain("lambda must be positive"));
    }
    let n = x.len();
    let c = 1.0 / (2.0 * lambda * n as f64);
    let ys: Vec<f64> = y.iter().map(|&g| sign(g)).collect();
    let k: Vec<Vec<f64>> = x
        .iter()
        .map(|a| x.iter().map(|b| dot(a, b)).collect())
        .collect();
    let q = |i: usize, j: usize| ys[i] * ys[j] * k[i][j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    for _ in 0..SVM_MAX_ITER {
        let mut i = usize::MAX;
        let mut gmax = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut gmin = f64::INFINITY;
        for t in 0..n {
            let v = -ys[t] * grad[t];
            if up(alpha[t], ys[t]) && v > gmax {
                gmax = v;
                i = t;
            }
            if low(alpha[t], ys[t]) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < SVM_TOLERANCE {
            break;
        }
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if ys[i] != ys[j] {
            let quad = (q(i, i) + q(j, j) + 2.0 * q(i, j)).max(1e-12);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (q(i, i) + q(j, j) - 2.0 * q(i, j)).max(1e-12);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }

    let mut w = vec![0.0; d];
    for (t, row) in x.iter().enumerate() {
        if alpha[t] > 0.0 {
            for (wk, v) in w.iter_mut().zip(row) {
                *wk += alpha[t] * ys[t] * v;
            }
        }
    }
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = ys[t] * grad[t];
        if alpha[t] >= c {
            if ys[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if ys[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 {
        sum_free / free as f64
    } else {
        0.5 * (ub + lb)
    };
    Ok(LinearModel { w, b: -rho })
}

/// Primal SVM objective, for checking solver output.
pub fn svm_objective(x: &[Vec<f64>], y: &[Group], lambda: f64, model: &LinearModel) -> f64 {
    let hinge: f64 = x
        .iter()
        .zip(y)
        .map(|(r, &g)| (1.0 - sign(g) * model.decision(r)).max(0.0))
        .sum();
    hinge / x.len() as f64 + lambda * dot(&model.w, &model.w)
}

/// Diagonal-covariance linear discriminant with empirical class priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalLda {
    pub mean_gs: Vec<f64>,
    pub mean_ps: Vec<f64>,
    pub var: Vec<f64>,
    pub log_prior_gs: f64,
    pub log_prior_ps: f64,
}

pub fn train_lda_diagonal(x: &[Vec<f64>], y: &[Group]) -> Result<DiagonalLda> {
    let d = check_xy(x, y)?;
    let n_gs = y.iter().filter(|&&g| g == Group::GS).count();
    let n_ps = y.len() - n_gs;
    if n_gs < 2 || n_ps < 2 {
        return Err(Error::domain("each class needs at least two samples"));
    }
    let class_mean = |g: Group, count: usize| {
        let mut m = vec![0.0; d];
        for (row, _) in x.iter().zip(y).filter(|(_, &l)| l == g) {
            for (a, v) in m.iter_mut().zip(row) {
                *a += v;
            }
        }
        m.into_iter().map(|v| v / count as f64).collect::<Vec<_>>()
    };
    let mean_gs = class_mean(Group::GS, n_gs);
    let mean_ps = class_mean(Group::PS, n_ps);
    let mut var = vec![0.0; d];
    for (row, &g) in x.iter().zip(y) {
        let m = if g == Group::GS { &mean_gs } else { &mean_ps };
        for ((s, v), mu) in var.iter_mut().zip(row).zip(m) {
            *s += (v - mu) * (v - mu);
        }
    }
    let dof = (y.len() - 2) as f64;
    let var = var.into_iter().map(|s| (s / dof).max(VARIANCE_FLOOR)).collect();
    let n = y.len() as f64;
    Ok(DiagonalLda {
        mean_gs,
        mean_ps,
        var,
        log_prior_gs: (n_gs as f64 / n).ln(),
        log_prior_ps: (n_ps as f64 / n).ln(),
    })
}

impl DiagonalLda {
    fn score(&self, x: &[f64], mean: &[f64], log_prior: f64) -> f64 {
        let q: f64 = x
            .iter()
            .zip(mean)
            .zip(&self.var)
            .map(|((v, m), s)| (v - m) * (v - m) / s)
            .sum();
        log_prior - 0.5 * q
    }

    pub fn predict(&self, x: &[f64]) -> Group {
        let gs = self.score(x, &self.mean_gs, self.log_prior_gs);
        let ps = self.score(x, &self.mean_ps, self.log_prior_ps);
        if ps > gs {
            Group::PS
        } else {
            Group::GS
        }
    }
}

/// Inverse-distance weighted vote among the `k` nearest training points.
pub fn knn_predict(x: &[Vec<f64>], y: &[Group], query: &[f64], k: usize) -> Result<Group> {
    if x.len() != y.len() {
        return Err(Error::domain("feature rows and labels differ in number"));
    }
    if k == 0 || k > x.len() {
        return Err(Error::domain(format!("k = {k} with {} training points", x.len())));
    }
    let mut dist: Vec<(f64, usize)> = x
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let d2: f64 = r.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
            (d2.sqrt(), i)
        })
        .collect();
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    if dist[0].0 == 0.0 {
        return Ok(y[dist[0].1]);
    }
    let (mut gs, mut ps) = (0.0, 0.0);
    for &(d, i) in &dist[..k] {
        match y[i] {
            Group::GS => gs += 1.0 / d,
            Group::PS => ps += 1.0 / d,
        }
    }
    Ok(if ps > gs { Group::PS } else { Group::GS })
}

fn log1pexp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `mean log(1 + exp(-y f(x))) + lambda |w|^2`, with `b` unpenalized.
pub fn logreg_objective(x: &[Vec<f64>], y: &[Group], lambda: f64, model: &LinearModel) -> f64 {
    let loss: f64 = x
        .iter()
        .zip(y)
        .map(|(r, &g)| log1pexp(-sign(g) * model.decision(r)))
        .sum();
    loss / x.len() as f64 + lambda * dot(&model.w, &model.w)
}

/// Gradient of `logreg_objective` as `(dw, db)`.
pub fn logreg_gradient(x: &[Vec<f64>], y: &[Group], lambda: f64, model: &LinearModel) -> (Vec<f64>, f64) {
    let n = x.len() as f64;
    let mut gw: Vec<f64> = model.w.iter().map(|w| 2.0 * lambda * w).collect();
    let mut gb = 0.0;
    for (r, &g) in x.iter().zip(y) {
        let s = sign(g);
        let coef = -s * sigmoid(-s * model.decision(r)) / n;
        for (a, v) in gw.iter_mut().zip(r) {
            *a += coef * v;
        }
        gb += coef;
    }
    (gw, gb)
}

pub const LOGREG_GRADIENT_TOL: f64 = 1e-8;

fn cholesky_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for j in 0..n {
        let mut s = a[j][j];
        for k in 0..j {
            s -= a[j][k] * a[j][k];
        }
        if s <= 0.0 {
            return None;
        }
        let l = s.sqrt();
        a[j][j] = l;
        for i in j + 1..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= a[i][k] * a[j][k];
            }
            a[i][j] = s / l;
        }
    }
    for i in 0..n {
        for k in 0..i {
            b[i] -= a[i][k] * b[k];
        }
        b[i] /= a[i][i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            b[i] -= a[k][i] * b[k];
        }
        b[i] /= a[i][i];
    }
    Some(b)
}

/// L2-penalized logistic regression by damped Newton iterations from zero.
pub fn train_logreg(x: &[Vec<f64>], y: &[Group], lambda: f64) -> Result<LinearModel> {
    let d = check_xy(x, y)?;
    if !(lambda > 0.0) {
        return Err(Error::domain("lambda must be positive"));
    }
    let n = x.len() as f64;
    let mut model = LinearModel { w: vec![0.0; d], b: 0.0 };
    for _ in 0..200 {
        let (gw, gb) = logreg_gradient(x, y, lambda, &model);
        let gnorm = (dot(&gw, &gw) + gb * gb).sqrt();
        if gnorm < LOGREG_GRADIENT_TOL {
            break;
        }
        let mut h = vec![vec![0.0; d + 1]; d + 1];
        for r in x {
            let p = sigmoid(model.decision(r));
            let wgt = p * (1.0 - p) / n;
            for i in 0..=d {
                let xi = if i < d { r[i] } else { 1.0 };
                for j in 0..=i {
                    let xj = if j < d { r[j] } else { 1.0 };
                    h[i][j] += wgt * xi * xj;
                }
            }
        }
        for i in 0..d {
            h[i][i] += 2.0 * lambda;
        }
        for i in 0..=d {
            for j in i + 1..=d {
                h[i][j] = h[j][i];
            }
        }
        let mut g = gw.clone();
        g.push(gb);
        let step = cholesky_solve(h, g.clone()).unwrap_or_else(|| g.clone());
        let f0 = logreg_objective(x, y, lambda, &model);
        let slope: f64 = -dot(&step, &g);
        let mut t = 1.0;
        loop {
            let cand = LinearModel {
                w: model.w.iter().zip(&step).map(|(w, s)| w - t * s).collect(),
                b: model.b - t * step[d],
            };
            let f1 = logreg_objective(x, y, lambda, &cand);
            if f1 <= f0 + 1e-4 * t * slope || t < 1e-10 {
                model = cand;
                break;
            }
            t *= 0.5;
        }
    }
    Ok(model)
}

pub fn logreg_probability(model: &LinearModel, x: &[f64]) -> f64 {
    sigmoid(model.decision(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Svm,
    Lda,
    Knn,
    Lr,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 4] = [
        ClassifierKind::Svm,
        ClassifierKind::Lda,
        ClassifierKind::Knn,
        ClassifierKind::Lr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::Svm => "SVM",
            ClassifierKind::Lda => "LDA",
            ClassifierKind::Knn => "k-NN",
            ClassifierKind::Lr => "LR",
        }
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "svm" => Ok(ClassifierKind::Svm),
            "lda" => Ok(ClassifierKind::Lda),
            "knn" => Ok(ClassifierKind::Knn),
            "lr" | "logreg" => Ok(ClassifierKind::Lr),
            _ => Err(Error::Config(format!("unknown classifier '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    pub lambda: f64,
    pub k: usize,
}

impl ClassifierSpec {
    pub fn new(kind: ClassifierKind) -> Self {
        ClassifierSpec { kind, lambda: 0.1, k: 5 }
    }

    /// Train on `(x, y)` and label each row of `test`.
    pub fn fit_predict(&self, x: &[Vec<f64>], y: &[Group], test: &[Vec<f64>]) -> Result<Vec<Group>> {
        match self.kind {
            ClassifierKind::Svm => {
                let m = train_svm_linear(x, y, self.lambda)?;
                Ok(test.iter().map(|r| m.predict(r)).collect())
            }
            ClassifierKind::Lr => {
                let m = train_logreg(x, y, self.lambda)?;
                Ok(test.iter().map(|r| m.predict(r)).collect())
            }
            ClassifierKind::Lda => {
                let m = train_lda_diagonal(x, y)?;
                Ok(test.iter().map(|r| m.predict(r)).collect())
            }
            ClassifierKind::Knn => test.iter().map(|r| knn_predict(x, y, r, self.k)).collect(),
        }
    }
}

/// Confusion counts with PS as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn from_pairs(truth: &[Group], predicted: &[Group]) -> Self {
        let mut c = Confusion::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t, p) {
                (Group::PS, Group::PS) => c.tp += 1,
                (Group::GS, Group::GS) => c.tn += 1,
                (Group::GS, Group::PS) => c.fp += 1,
                (Group::PS, Group::GS) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub acc: f64,
    pub f1: f64,
    pub kappa: f64,
}

fn ratio(num: i128, den: i128) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Each metric is one division of exact integer numerator and denominator.
pub fn metrics(c: &Confusion) -> Result<Metrics> {
    let n = c.total() as i128;
    if n == 0 {
        return Err(Error::domain("no predictions"));
    }
    let (tp, tn, fp, fn_) = (c.tp as i128, c.tn as i128, c.fp as i128, c.fn_ as i128);
    let agree = tp + tn;
    let chance = (tp + fp) * (tp + fn_) + (fn_ + tn) * (fp + tn);
    Ok(Metrics {
        acc: ratio(agree, n),
        f1: ratio(2 * tp, 2 * tp + fp + fn_),
        kappa: ratio(n * agree - chance, n * n - chance),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub subject_id: String,
    pub truth: Group,
    pub predicted: Group,
    /// Set when the training fold could not fit the classifier and the
    /// fold's majority class was predicted instead.
    pub fallback: Option<String>,
    pub train_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub classifier: ClassifierKind,
    pub folds: Vec<FoldResult>,
    pub confusion: Confusion,
    pub metrics: Metrics,
}

impl ClassificationReport {
    /// Every fold's held-out subject is absent from its training ids.
    pub fn leakage_free(&self) -> bool {
        self.folds
            .iter()
            .all(|f| !f.train_ids.contains(&f.subject_id))
    }
}

fn majority(y: &[Group]) -> Group {
    let ps = y.iter().filter(|&&g| g == Group::PS).count();
    if 2 * ps > y.len() {
        Group::PS
    } else {
        Group::GS
    }
}

/// Leave-one-subject-out evaluation with per-fold standardization.
pub fn loso_cv(data: &[SubjectFeatureSet], spec: &ClassifierSpec) -> Result<ClassificationReport> {
    if data.len() < 3 {
        return Err(Error::domain("leave-one-subject-out needs at least three subjects"));
    }
    let d = data[0].features.len();
    if d == 0 || data.iter().any(|s| s.features.len() != d) {
        return Err(Error::domain("subjects must share a non-empty feature dimension"));
    }
    let labels: Vec<Group> = data.iter().map(|s| s.label).collect();
    if !labels.contains(&Group::GS) || !labels.contains(&Group::PS) {
        return Err(Error::domain("dataset contains a single class"));
    }
    let mut ids: Vec<&str> = data.iter().map(|s| s.subject_id.as_str()).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::domain("duplicate subject ids"));
    }
    let folds = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let train: Vec<&SubjectFeatureSet> = data
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, s)| s)
                .collect();
            let raw: Vec<Vec<f64>> = train.iter().map(|s| s.features.clone()).collect();
            let y: Vec<Group> = train.iter().map(|s| s.label).collect();
            let (x, test) = standardize(&raw, std::slice::from_ref(&data[i].features));
            let (predicted, fallback) = match spec.fit_predict(&x, &y, &test) {
                Ok(p) => (p[0], None),
                Err(Error::Domain(msg)) => (majority(&y), Some(msg)),
                Err(e) => return Err(e),
            };
            Ok(FoldResult {
                subject_id: data[i].subject_id.clone(),
                truth: data[i].label,
                predicted,
                fallback,
                train_ids: train.iter().map(|s| s.subject_id.clone()).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let truth: Vec<Group> = folds.iter().map(|f| f.truth).collect();
    let pred: Vec<Group> = folds.iter().map(|f| f.predicted).collect();
    let confusion = Confusion::from_pairs(&truth, &pred);
    Ok(ClassificationReport {
        classifier: spec.kind,
        metrics: metrics(&confusion)?,
        confusion,
        folds,
    })
}
