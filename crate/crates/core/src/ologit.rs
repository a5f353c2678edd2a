//! Proportional-odds ordered logit for 1..=5 star ratings.
//!
//! Reported orientation: `Pr(R >= 6-j) = logistic(eps_j + eta)` for
//! j = 1..4, with `eta = sum(alpha_i * x1_i + beta_i * x2_i)`. So `eps_1`
//! governs five stars and `eps_4` governs "at least two".
//!
//! Internally the model uses increasing cutpoints `c_1 < ... < c_4` with
//! `Pr(R >= j+1) = logistic(eta - c_j)`, i.e. `eps_j = -c_{5-j}`, and the
//! optimizer works on `(c_1, ln(c_2-c_1), ..., slopes)` so ordering can
//! never break. Rating levels that do not occur are collapsed out before
//! fitting; their cutpoints are reported as infinite.
//!
//! Every row contributes `ln(F(u) - F(l))` where `F` is the logistic CDF and
//! `u`, `l` are linear in the parameters. The same engine therefore fits the
//! relaxed model (one slope vector per cutpoint) used by the parallel-lines
//! test.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use thiserror::Error;

use crate::aggregator::DesignMatrix;
use crate::par::{self, Exec};
use crate::Diagnostic;

/// Cutpoints in reported orientation.
pub const N_CUTS: usize = 4;
const LEVELS: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum OlogitError {
    #[error("need at least two distinct rating levels, found {0}")]
    TooFewLevels(usize),
    #[error("rating {0} outside 1..=5")]
    BadRating(u8),
    #[error("column '{0}' is zero in every row")]
    EmptyColumn(String),
    #[error("information matrix is singular; collinear columns: {}", .0.join(", "))]
    Collinear(Vec<String>),
    #[error("cutpoints are not monotone: {0:?}")]
    NonMonotone([f64; N_CUTS]),
    #[error("{what}: expected {expected} values, got {got}")]
    Shape { what: &'static str, expected: usize, got: usize },
    #[error("no rows")]
    Empty,
}

/// Ratings with an n x p predictor matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct OrdinalData {
    pub names: Vec<String>,
    /// Row-major, `n * names.len()`.
    pub x: Vec<f64>,
    pub y: Vec<u8>,
    /// Affordance labels when built from a design matrix: slope `2i` is the
    /// low-pole weight (alpha) and `2i+1` the high-pole weight (beta).
    pub affordances: Vec<String>,
    nonzero: Vec<Vec<(usize, f64)>>,
}

impl OrdinalData {
    pub fn new(names: Vec<String>, x: Vec<f64>, y: Vec<u8>) -> Result<Self, OlogitError> {
        let p = names.len();
        if x.len() != y.len() * p {
            return Err(OlogitError::Shape {
                what: "predictor matrix",
                expected: y.len() * p,
                got: x.len(),
            });
        }
        if let Some(&bad) = y.iter().find(|r| !(1..=5).contains(*r)) {
            return Err(OlogitError::BadRating(bad));
        }
        let nonzero = (0..y.len())
            .map(|i| {
                x[i * p..(i + 1) * p]
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, v)| (j, *v))
                    .collect()
            })
            .collect();
        Ok(OrdinalData {
            names,
            x,
            y,
            affordances: Vec::new(),
            nonzero,
        })
    }

    pub fn intercept_only(y: Vec<u8>) -> Result<Self, OlogitError> {
        Self::new(Vec::new(), Vec::new(), y)
    }

    /// Columns `<key>__x1, <key>__x2` per affordance. Affordances whose two
    /// columns agree in every row are dropped with a diagnostic.
    pub fn from_design(d: &DesignMatrix) -> Result<(Self, Vec<Diagnostic>), OlogitError> {
        let mut keep = Vec::new();
        let mut diags = Vec::new();
        for (j, key) in d.keys.iter().enumerate() {
            if d.rows.iter().all(|r| r.indicators[j].0 == r.indicators[j].1) {
                diags.push(Diagnostic::general(format!(
                    "affordance {key} dropped: x1 and x2 columns are identical"
                )));
            } else {
                keep.push(j);
            }
        }
        let mut names = Vec::new();
        let mut affordances = Vec::new();
        for &j in &keep {
            let k = d.keys[j].to_string();
            names.push(format!("{k}__x1"));
            names.push(format!("{k}__x2"));
            affordances.push(k);
        }
        let mut x = Vec::with_capacity(d.rows.len() * names.len());
        for r in &d.rows {
            for &j in &keep {
                let (a, b) = r.indicators[j];
                x.push(a as u8 as f64);
                x.push(b as u8 as f64);
            }
        }
        let y = d.rows.iter().map(|r| r.stars).collect();
        let mut data = Self::new(names, x, y)?;
        data.affordances = affordances;
        Ok((data, diags))
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.p();
        &self.x[i * p..(i + 1) * p]
    }

    fn eta(&self, i: usize, slopes: &[f64]) -> f64 {
        self.nonzero[i].iter().map(|&(j, v)| v * slopes[j]).sum()
    }
}

/// Parameters in reported orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub epsilon: [f64; N_CUTS],
    pub slopes: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(p: usize) -> Self {
        ModelParams {
            epsilon: [0.0; N_CUTS],
            slopes: vec![0.0; p],
        }
    }

    /// Internal increasing cutpoints.
    fn cutpoints(&self) -> [f64; N_CUTS] {
        let e = self.epsilon;
        [-e[3], -e[2], -e[1], -e[0]]
    }

    fn is_monotone(&self) -> bool {
        self.epsilon.windows(2).all(|w| w[0] <= w[1]) && self.epsilon.iter().all(|e| !e.is_nan())
    }

    /// Flattened `[eps_1..eps_4, slopes...]`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.epsilon.iter().chain(&self.slopes).copied().collect()
    }

    pub fn from_vec(v: &[f64]) -> Self {
        ModelParams {
            epsilon: [v[0], v[1], v[2], v[3]],
            slopes: v[N_CUTS..].to_vec(),
        }
    }
}

fn log_sigmoid(x: f64) -> f64 {
    if x < 0.0 {
        x - x.exp().ln_1p()
    } else {
        -(-x).exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(F(u) - F(l))` for `l < u`, either bound possibly infinite.
pub fn log_prob_between(u: f64, l: f64) -> f64 {
    if l == f64::NEG_INFINITY {
        return log_sigmoid(u);
    }
    if u == f64::INFINITY {
        return log_sigmoid(-l);
    }
    if u <= l {
        return f64::NEG_INFINITY;
    }
    log_sigmoid(u) + log_sigmoid(-l) + (-(l - u).exp_m1()).ln()
}

/// Per-row `ln Pr(R = y)` under explicit parameters.
pub fn row_log_prob(y: u8, eta: f64, p: &ModelParams) -> f64 {
    let c = p.cutpoints();
    let j = y as usize;
    let u = if j >= 2 { eta - c[j - 2] } else { f64::INFINITY };
    let l = if j <= 4 { eta - c[j - 1] } else { f64::NEG_INFINITY };
    log_prob_between(u, l)
}

/// Category probabilities `Pr(R = 1..5)` at linear predictor `eta`.
pub fn category_probs(eta: f64, p: &ModelParams) -> [f64; LEVELS] {
    let mut out = [0.0; LEVELS];
    for (j, o) in out.iter_mut().enumerate() {
        *o = row_log_prob(j as u8 + 1, eta, p).exp();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Structure {
    /// One slope vector shared by every cutpoint.
    Proportional,
    /// A slope vector per cutpoint.
    Relaxed,
}

/// Compressed problem: observed levels renumbered 1..=levels.
struct Problem<'a> {
    data: &'a OrdinalData,
    y: Vec<usize>,
    levels: usize,
    structure: Structure,
}

/// One side of a row interval: value and sparse gradient in theta.
struct Bound {
    value: f64,
    grad: Vec<(usize, f64)>,
}

struct Eval {
    ll: f64,
    grad: Vec<f64>,
    /// Full symmetric matrix, row-major.
    hess: Vec<f64>,
}

impl<'a> Problem<'a> {
    fn new(data: &'a OrdinalData, structure: Structure, observed: &[u8]) -> Self {
        let y = data
            .y
            .iter()
            .map(|r| observed.iter().position(|o| o == r).unwrap() + 1)
            .collect();
        Problem {
            data,
            y,
            levels: observed.len(),
            structure,
        }
    }

    fn cuts(&self) -> usize {
        self.levels - 1
    }

    fn dim(&self) -> usize {
        let p = self.data.p();
        match self.structure {
            Structure::Proportional => self.cuts() + p,
            Structure::Relaxed => self.cuts() * (1 + p),
        }
    }

    fn slope_offset(&self, cut: usize) -> usize {
        match self.structure {
            Structure::Proportional => self.cuts(),
            Structure::Relaxed => self.cuts() + cut * self.data.p(),
        }
    }

    /// `eta - c_cut` with its gradient (cut is 0-based).
    fn bound(&self, i: usize, cut: usize, theta: &[f64]) -> Bound {
        let off = self.slope_offset(cut);
        let nz = &self.data.nonzero[i];
        let mut grad = Vec::with_capacity(nz.len() + 1);
        grad.push((cut, -1.0));
        let mut value = -theta[cut];
        for &(j, v) in nz {
            value += v * theta[off + j];
            grad.push((off + j, v));
        }
        Bound { value, grad }
    }

    fn row_bounds(&self, i: usize, theta: &[f64]) -> (Option<Bound>, Option<Bound>) {
        let y = self.y[i];
        let upper = (y >= 2).then(|| self.bound(i, y - 2, theta));
        let lower = (y < self.levels).then(|| self.bound(i, y - 1, theta));
        (upper, lower)
    }

    fn log_lik(&self, theta: &[f64], exec: Exec) -> f64 {
        par::chunked_reduce(
            exec,
            self.data.n(),
            |range| {
                range
                    .map(|i| {
                        let (u, l) = self.row_bounds(i, theta);
                        log_prob_between(
                            u.map_or(f64::INFINITY, |b| b.value),
                            l.map_or(f64::NEG_INFINITY, |b| b.value),
                        )
                    })
                    .sum::<f64>()
            },
            |a, b| a + b,
        )
        .unwrap_or(0.0)
    }

    fn evaluate(&self, theta: &[f64], exec: Exec, with_hessian: bool) -> Eval {
        let q = self.dim();
        let fold = |range: std::ops::Range<usize>| {
            let mut e = Eval {
                ll: 0.0,
                grad: vec![0.0; q],
                hess: if with_hessian { vec![0.0; q * q] } else { Vec::new() },
            };
            for i in range {
                let (u, l) = self.row_bounds(i, theta);
                let uv = u.as_ref().map_or(f64::INFINITY, |b| b.value);
                let lv = l.as_ref().map_or(f64::NEG_INFINITY, |b| b.value);
                let lp = log_prob_between(uv, lv);
                e.ll += lp;
                // A = f(u)/P, B = f(l)/P with f the logistic density
                let a = u
                    .as_ref()
                    .map_or(0.0, |b| (log_sigmoid(b.value) + log_sigmoid(-b.value) - lp).exp());
                let bb = l
                    .as_ref()
                    .map_or(0.0, |b| (log_sigmoid(b.value) + log_sigmoid(-b.value) - lp).exp());
                if let Some(u) = &u {
                    for &(k, v) in &u.grad {
                        e.grad[k] += a * v;
                    }
                }
                if let Some(l) = &l {
                    for &(k, v) in &l.grad {
                        e.grad[k] -= bb * v;
                    }
                }
                if !with_hessian {
                    continue;
                }
                let duu = u.as_ref().map_or(0.0, |b| a * (1.0 - 2.0 * sigmoid(b.value)) - a * a);
                let dll = l.as_ref().map_or(0.0, |b| -bb * (1.0 - 2.0 * sigmoid(b.value)) - bb * bb);
                let dul = a * bb;
                let mut outer = |g1: &[(usize, f64)], g2: &[(usize, f64)], w: f64| {
                    for &(r, vr) in g1 {
                        for &(c, vc) in g2 {
                            e.hess[r * q + c] += w * vr * vc;
                        }
                    }
                };
                if let Some(u) = &u {
                    outer(&u.grad, &u.grad, duu);
                }
                if let Some(l) = &l {
                    outer(&l.grad, &l.grad, dll);
                }
                if let (Some(u), Some(l)) = (&u, &l) {
                    outer(&u.grad, &l.grad, dul);
                    outer(&l.grad, &u.grad, dul);
                }
            }
            e
        };
        let merge = |mut a: Eval, b: Eval| {
            a.ll += b.ll;
            a.grad.iter_mut().zip(&b.grad).for_each(|(x, y)| *x += y);
            a.hess.iter_mut().zip(&b.hess).for_each(|(x, y)| *x += y);
            a
        };
        par::chunked_reduce(exec, self.data.n(), fold, merge).unwrap_or(Eval {
            ll: 0.0,
            grad: vec![0.0; q],
            hess: vec![0.0; if with_hessian { q * q } else { 0 }],
        })
    }

    /// theta (natural) -> phi (log-gap cutpoints).
    fn to_phi(&self, theta: &[f64]) -> Vec<f64> {
        let mut phi = theta.to_vec();
        for j in 1..self.cuts() {
            phi[j] = (theta[j] - theta[j - 1]).ln();
        }
        phi
    }

    fn to_theta(&self, phi: &[f64]) -> Vec<f64> {
        let mut theta = phi.to_vec();
        for j in 1..self.cuts() {
            theta[j] = theta[j - 1] + phi[j].exp();
        }
        theta
    }

    /// Gradient and Hessian in phi from those in theta.
    fn chain(&self, phi: &[f64], e: &Eval) -> (DVector<f64>, DMatrix<f64>) {
        let q = self.dim();
        let k = self.cuts();
        // J[a][b] = d theta_a / d phi_b
        let mut jac = DMatrix::<f64>::identity(q, q);
        for a in 0..k {
            jac[(a, 0)] = 1.0;
            for b in 1..=a {
                jac[(a, b)] = phi[b].exp();
            }
        }
        let g = DVector::from_column_slice(&e.grad);
        let h = DMatrix::from_row_slice(q, q, &e.hess);
        let gphi = jac.transpose() * &g;
        let mut hphi = jac.transpose() * h * &jac;
        for b in 1..k {
            let tail: f64 = (b..k).map(|a| e.grad[a]).sum();
            hphi[(b, b)] += phi[b].exp() * tail;
        }
        (gphi, hphi)
    }

    fn optimize(&self, start: Vec<f64>, opts: &FitOptions) -> Optimum {
        let mut theta = start;
        let mut phi = self.to_phi(&theta);
        let mut iterations = 0;
        let mut converged = false;
        let mut trace = Vec::new();
        loop {
            let e = self.evaluate(&theta, opts.exec, true);
            trace.push(e.ll);
            let gmax = e.grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            if gmax < opts.tolerance {
                converged = true;
                break;
            }
            if iterations >= opts.max_iterations || !e.ll.is_finite() {
                break;
            }
            let (g, h) = self.chain(&phi, &e);
            let step = newton_direction(&g, &h);
            // a step may lose this much to summation rounding and still count
            // as non-decreasing
            let slack = 64.0 * f64::EPSILON * (e.ll.abs() + self.data.n() as f64);
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let cand: Vec<f64> = phi.iter().zip(step.iter()).map(|(p, s)| p + t * s).collect();
                let cand_theta = self.to_theta(&cand);
                let ll = self.log_lik(&cand_theta, opts.exec);
                if ll.is_finite() && ll >= e.ll - slack {
                    phi = cand;
                    theta = cand_theta;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            iterations += 1;
            if !accepted {
                break;
            }
        }
        Optimum {
            theta,
            iterations,
            converged,
            trace,
        }
    }
}

struct Optimum {
    theta: Vec<f64>,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

/// Ascent direction `(-H)^{-1} g`, with Levenberg damping when `-H` is not
/// positive definite.
fn newton_direction(g: &DVector<f64>, h: &DMatrix<f64>) -> DVector<f64> {
    let neg = -h;
    let scale = neg.diagonal().iter().fold(0.0f64, |m, d| m.max(d.abs())).max(1e-12);
    let mut lambda = 0.0;
    for _ in 0..30 {
        let mut m = neg.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += lambda;
        }
        if let Some(ch) = m.cholesky() {
            return ch.solve(g);
        }
        lambda = if lambda == 0.0 { 1e-8 * scale } else { lambda * 10.0 };
    }
    g / scale
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Converged when the gradient max-norm falls below this.
    pub tolerance: f64,
    pub exec: Exec,
    /// Also fit the relaxed model and run the parallel-lines test.
    pub parallel_test: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 100,
            tolerance: 1e-8,
            exec: Exec::default(),
            parallel_test: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoR2 {
    pub mcfadden: f64,
    pub cox_snell: f64,
    pub nagelkerke: f64,
}

pub fn pseudo_r2(log_lik: f64, null_log_lik: f64, n: usize) -> PseudoR2 {
    let n = n as f64;
    let mcfadden = if null_log_lik == 0.0 { 0.0 } else { 1.0 - log_lik / null_log_lik };
    let cox_snell = 1.0 - (2.0 * (null_log_lik - log_lik) / n).exp();
    let max = 1.0 - (2.0 * null_log_lik / n).exp();
    let nagelkerke = if max > 0.0 { cox_snell / max } else { 0.0 };
    PseudoR2 {
        mcfadden,
        cox_snell,
        nagelkerke,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParallelStatus {
    /// p > 0.05: proportional odds not rejected.
    Holds,
    Rejected,
    /// The relaxed model did not converge.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: Option<f64>,
    pub status: ParallelStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub affordances: Vec<String>,
    pub params: ModelParams,
    pub epsilon_se: [f64; N_CUTS],
    pub std_errors: Vec<f64>,
    pub wald_p: Vec<f64>,
    pub log_lik: f64,
    pub null_log_lik: f64,
    pub pseudo_r2: PseudoR2,
    pub parallel: Option<ParallelTest>,
    pub converged: bool,
    pub iterations: usize,
    /// Some slope exceeds 10 in magnitude.
    pub separation: bool,
    pub n: usize,
    /// Log-likelihood after each Newton step (first entry is the start).
    pub trace: Vec<f64>,
}

/// One affordance's coefficient pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefPair {
    pub affordance: String,
    pub alpha: f64,
    pub alpha_se: f64,
    pub alpha_p: f64,
    pub beta: f64,
    pub beta_se: f64,
    pub beta_p: f64,
}

impl FitResult {
    /// Coefficient pairs, for fits built from a design matrix.
    pub fn pairs(&self) -> Vec<CoefPair> {
        self.affordances
            .iter()
            .enumerate()
            .map(|(i, a)| CoefPair {
                affordance: a.clone(),
                alpha: self.params.slopes[2 * i],
                alpha_se: self.std_errors[2 * i],
                alpha_p: self.wald_p[2 * i],
                beta: self.params.slopes[2 * i + 1],
                beta_se: self.std_errors[2 * i + 1],
                beta_p: self.wald_p[2 * i + 1],
            })
            .collect()
    }
}

fn observed_levels(y: &[u8]) -> Vec<u8> {
    let mut lv: Vec<u8> = y.to_vec();
    lv.sort_unstable();
    lv.dedup();
    lv
}

/// Intercept-only maximum log-likelihood: `sum n_j ln(n_j / n)`.
pub fn null_log_likelihood(y: &[u8]) -> f64 {
    let n = y.len() as f64;
    let mut counts = [0usize; LEVELS];
    for &r in y {
        counts[r as usize - 1] += 1;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| c as f64 * (c as f64 / n).ln())
        .sum()
}

/// Empirical cumulative logits as internal cutpoints of the compressed
/// problem.
fn empirical_cutpoints(prob: &Problem) -> Vec<f64> {
    let n = prob.data.n() as f64;
    let mut counts = vec![0usize; prob.levels];
    for &y in &prob.y {
        counts[y - 1] += 1;
    }
    let mut below = 0usize;
    (0..prob.cuts())
        .map(|j| {
            below += counts[j];
            let p = below as f64 / n;
            (p / (1.0 - p)).ln()
        })
        .collect()
}

/// Names of columns that are linear combinations of earlier columns and
/// the intercept.
pub fn collinear_columns(data: &OrdinalData) -> Vec<String> {
    let n = data.n();
    let mut basis: Vec<Vec<f64>> = vec![vec![1.0 / (n as f64).sqrt(); n]];
    let mut out = Vec::new();
    for (j, name) in data.names.iter().enumerate() {
        let mut v: Vec<f64> = (0..n).map(|i| data.row(i)[j]).collect();
        let norm0 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        for _ in 0..2 {
            for b in &basis {
                let d: f64 = v.iter().zip(b).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(b).for_each(|(a, b)| *a -= d * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm0 == 0.0 || norm <= 1e-9 * norm0 {
            out.push(name.clone());
        } else {
            basis.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    out
}

fn check_fit_input(data: &OrdinalData) -> Result<Vec<u8>, OlogitError> {
    if data.n() == 0 {
        return Err(OlogitError::Empty);
    }
    let levels = observed_levels(&data.y);
    if levels.len() < 2 {
        return Err(OlogitError::TooFewLevels(levels.len()));
    }
    for j in 0..data.p() {
        if (0..data.n()).all(|i| data.row(i)[j] == 0.0) {
            return Err(OlogitError::EmptyColumn(data.names[j].clone()));
        }
    }
    let collinear = collinear_columns(data);
    if !collinear.is_empty() {
        return Err(OlogitError::Collinear(collinear));
    }
    Ok(levels)
}

/// Expand compressed cutpoints to the four reported ones.
fn expand_epsilon(levels: &[u8], cuts: &[f64], ses: &[f64]) -> ([f64; N_CUTS], [f64; N_CUTS]) {
    let mut eps = [0.0; N_CUTS];
    let mut se = [f64::NAN; N_CUTS];
    // eps_j governs Pr(R >= 6-j)
    for j in 0..N_CUTS {
        let rating = (LEVELS - j) as u8;
        let idx = levels.iter().position(|&l| l >= rating);
        match idx {
            Some(0) => eps[j] = f64::INFINITY,
            None => eps[j] = f64::NEG_INFINITY,
            Some(t) => {
                eps[j] = -cuts[t - 1];
                se[j] = ses[t - 1];
            }
        }
    }
    (eps, se)
}

fn wald_p(coef: f64, se: f64) -> f64 {
    let z = coef / se;
    if !z.is_finite() {
        return f64::NAN;
    }
    let normal = Normal::standard();
    2.0 * normal.sf(z.abs())
}

/// Maximum-likelihood fit.
pub fn fit(data: &OrdinalData, opts: &FitOptions) -> Result<FitResult, OlogitError> {
    let levels = check_fit_input(data)?;
    let prob = Problem::new(data, Structure::Proportional, &levels);
    let mut start = empirical_cutpoints(&prob);
    start.extend(std::iter::repeat(0.0).take(data.p()));
    let opt = prob.optimize(start, opts);

    let e = prob.evaluate(&opt.theta, opts.exec, true);
    let q = prob.dim();
    let info = -DMatrix::from_row_slice(q, q, &e.hess);
    let cov = info
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| info.try_inverse())
        .ok_or_else(|| OlogitError::Collinear(data.names.clone()))?;
    let ses: Vec<f64> = (0..q).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();

    let k = prob.cuts();
    let (epsilon, epsilon_se) = expand_epsilon(&levels, &opt.theta[..k], &ses[..k]);
    let slopes = opt.theta[k..].to_vec();
    let std_errors = ses[k..].to_vec();
    let wald: Vec<f64> = slopes.iter().zip(&std_errors).map(|(c, s)| wald_p(*c, *s)).collect();
    let null_log_lik = null_log_likelihood(&data.y);
    let log_lik = e.ll;
    let mut result = FitResult {
        names: data.names.clone(),
        affordances: data.affordances.clone(),
        params: ModelParams { epsilon, slopes },
        epsilon_se,
        std_errors,
        wald_p: wald,
        log_lik,
        null_log_lik,
        pseudo_r2: pseudo_r2(log_lik, null_log_lik, data.n()),
        parallel: None,
        converged: opt.converged,
        iterations: opt.iterations,
        separation: opt.theta[k..].iter().any(|c| c.abs() > 10.0),
        n: data.n(),
        trace: opt.trace,
    };
    if opts.parallel_test {
        result.parallel = Some(parallel_lines_test(data, &result, opts));
    }
    Ok(result)
}

/// Likelihood-ratio test of the shared-slope assumption against a model
/// with a slope vector per cutpoint; `df = (cutpoints - 1) * p`.
pub fn parallel_lines_test(data: &OrdinalData, fit: &FitResult, opts: &FitOptions) -> ParallelTest {
    let levels = observed_levels(&data.y);
    let p = data.p();
    let df = (levels.len().saturating_sub(2)) * p;
    if df == 0 {
        return ParallelTest {
            statistic: 0.0,
            df: 0,
            p_value: Some(1.0),
            status: ParallelStatus::Holds,
        };
    }
    let inconclusive = ParallelTest {
        statistic: f64::NAN,
        df,
        p_value: None,
        status: ParallelStatus::Inconclusive,
    };
    if !fit.converged {
        return inconclusive;
    }
    let prob = Problem::new(data, Structure::Relaxed, &levels);
    let k = prob.cuts();
    // start from the proportional fit, replicated per cutpoint
    let mut start: Vec<f64> = (0..k)
        .map(|t| {
            let rating = levels[t + 1];
            -fit.params.epsilon[LEVELS - rating as usize]
        })
        .collect();
    for _ in 0..k {
        start.extend_from_slice(&fit.params.slopes);
    }
    let opt = prob.optimize(start, opts);
    if !opt.converged {
        return inconclusive;
    }
    let relaxed = prob.log_lik(&opt.theta, opts.exec);
    let statistic = (2.0 * (relaxed - fit.log_lik)).max(0.0);
    let p_value = ChiSquared::new(df as f64).map(|c| c.sf(statistic)).unwrap_or(f64::NAN);
    ParallelTest {
        statistic,
        df,
        p_value: Some(p_value),
        status: if p_value > 0.05 {
            ParallelStatus::Holds
        } else {
            ParallelStatus::Rejected
        },
    }
}

fn check_params(data: &OrdinalData, params: &ModelParams) -> Result<(), OlogitError> {
    if params.slopes.len() != data.p() {
        return Err(OlogitError::Shape {
            what: "slopes",
            expected: data.p(),
            got: params.slopes.len(),
        });
    }
    if !params.is_monotone() {
        return Err(OlogitError::NonMonotone(params.epsilon));
    }
    Ok(())
}

/// Log-likelihood at explicit parameters over all five levels.
pub fn log_likelihood(data: &OrdinalData, params: &ModelParams, exec: Exec) -> Result<f64, OlogitError> {
    check_params(data, params)?;
    Ok(par::chunked_reduce(
        exec,
        data.n(),
        |range| {
            range
                .map(|i| row_log_prob(data.y[i], data.eta(i, &params.slopes), params))
                .sum::<f64>()
        },
        |a, b| a + b,
    )
    .unwrap_or(0.0))
}

/// Analytic gradient in the layout of [`ModelParams::to_vec`].
pub fn gradient(data: &OrdinalData, params: &ModelParams, exec: Exec) -> Result<Vec<f64>, OlogitError> {
    check_params(data, params)?;
    let all: Vec<u8> = (1..=LEVELS as u8).collect();
    let prob = Problem {
        data,
        y: data.y.iter().map(|&r| r as usize).collect(),
        levels: all.len(),
        structure: Structure::Proportional,
    };
    let theta: Vec<f64> = params.cutpoints().iter().chain(&params.slopes).copied().collect();
    let e = prob.evaluate(&theta, exec, false);
    // d/d eps_j = -d/d c_{5-j}
    let mut out: Vec<f64> = (0..N_CUTS).map(|j| -e.grad[N_CUTS - 1 - j]).collect();
    out.extend_from_slice(&e.grad[N_CUTS..]);
    Ok(out)
}

pub fn odds_ratio(coef: f64) -> f64 {
    coef.exp()
}

/// `**` below 0.01, `*` below 0.05, otherwise the p-value itself.
pub fn significance(p: f64) -> String {
    if p < 0.01 {
        "**".into()
    } else if p < 0.05 {
        "*".into()
    } else if p.is_nan() {
        "NA".into()
    } else {
        format!("{p:.2}")
    }
}

/// Metadata written next to the coefficient table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitHeader {
    /// `eps_j` enters `Pr(R >= 6-j)`; internal cutpoints are `c_{5-j} = -eps_j`.
    pub epsilon: [f64; N_CUTS],
    pub epsilon_se: [f64; N_CUTS],
    pub log_lik: f64,
    pub null_log_lik: f64,
    pub pseudo_r2: PseudoR2,
    pub parallel: Option<ParallelTest>,
    pub converged: bool,
    pub iterations: usize,
    pub separation: bool,
    pub n: usize,
    pub dropped: Vec<String>,
}

impl FitHeader {
    pub fn new(fit: &FitResult, dropped: Vec<String>) -> Self {
        FitHeader {
            epsilon: fit.params.epsilon,
            epsilon_se: fit.epsilon_se,
            log_lik: fit.log_lik,
            null_log_lik: fit.null_log_lik,
            pseudo_r2: fit.pseudo_r2,
            parallel: fit.parallel.clone(),
            converged: fit.converged,
            iterations: fit.iterations,
            separation: fit.separation,
            n: fit.n,
            dropped,
        }
    }
}

/// Coefficient table, one row per affordance.
pub fn write_fit_report<W: std::io::Write>(w: W, fit: &FitResult, pole_labels: &[String]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "affordance",
        "pole_labels",
        "alpha",
        "alpha_se",
        "alpha_sig",
        "beta",
        "beta_se",
        "beta_sig",
    ])?;
    for (i, c) in fit.pairs().iter().enumerate() {
        out.write_record([
            c.affordance.clone(),
            pole_labels.get(i).cloned().unwrap_or_default(),
            format!("{:.4}", c.alpha),
            format!("{:.4}", c.alpha_se),
            significance(c.alpha_p),
            format!("{:.4}", c.beta),
            format!("{:.4}", c.beta_se),
            significance(c.beta_p),
        ])?;
    }
    out.flush()?;
    Ok(())
}
