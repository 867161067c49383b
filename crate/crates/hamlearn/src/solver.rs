//! Projected Newton inversion of the series map and sample-size arithmetic.

use std::f64::consts::E;
use std::fmt::Write as _;

use thiserror::Error;

use crate::series::{evaluate_all, evaluate_jacobian, ExpansionParameters, TermSeries};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("beta = {beta} exceeds the guaranteed threshold {threshold}")]
    Regime { beta: f64, threshold: f64 },
    #[error("non-finite value at iteration {0}")]
    Numeric(usize),
    #[error("invalid parameter: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnReport {
    pub term_ids: Vec<String>,
    pub estimates: Vec<f64>,
    pub iterations_run: usize,
    pub residual_inf: f64,
    pub params: ExpansionParameters,
    pub shots: Option<u64>,
    pub seed: Option<u64>,
    pub guaranteed: bool,
}

impl LearnReport {
    /// Key-value header followed by `term_id<TAB>estimate` rows.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<u64>| v.map(|s| s.to_string()).unwrap_or_else(|| "none".into());
        let mut s = String::new();
        let _ = writeln!(s, "residual_inf\t{:e}", self.residual_inf);
        let _ = writeln!(s, "iterations\t{}", self.iterations_run);
        let _ = writeln!(s, "m_hat\t{}", self.params.m_hat);
        let _ = writeln!(s, "K\t{}", self.params.neumann_depth);
        let _ = writeln!(s, "T\t{}", self.params.iterations);
        let _ = writeln!(s, "S\t{}", opt(self.shots));
        let _ = writeln!(s, "seed\t{}", opt(self.seed));
        let _ = writeln!(s, "guaranteed\t{}", self.guaranteed);
        s.push('\n');
        for (id, v) in self.term_ids.iter().zip(&self.estimates) {
            let _ = writeln!(s, "{id}\t{v:.17e}");
        }
        s
    }
}

/// ⌈log₂(3/(|b|ε))⌉, at least 1.
pub fn neumann_depth(scale: f64, epsilon: f64) -> usize {
    ((3.0 / (scale.abs() * epsilon)).log2().ceil() as i64).max(1) as usize
}

/// ⌈-log₂(300e⁶(𝔡+1)¹⁰|b|ε)⌉; nonpositive outside the guaranteed regime.
pub fn iteration_bound(scale: f64, epsilon: f64, degree: usize) -> i64 {
    let d = degree.max(1) as f64;
    (-(300.0 * E.powi(6) * (d + 1.0).powi(10) * scale.abs() * epsilon).log2()).ceil() as i64
}

/// Iteration count actually used: the bound when positive, otherwise at least K.
pub fn iteration_count(scale: f64, epsilon: f64, degree: usize, k: usize) -> usize {
    let t = iteration_bound(scale, epsilon, degree);
    if t >= 1 {
        t as usize
    } else {
        k.max(1)
    }
}

pub fn project(x: &mut [f64]) {
    for v in x.iter_mut() {
        *v = v.clamp(-1.0, 1.0);
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// `b⁻¹ Σ_{k<K} (I + b⁻¹J)^k F` through K sparse products.
fn neumann_step(fs: &[TermSeries], x: &[f64], series_param: f64, scale: f64, k: usize, f: &[f64]) -> Vec<f64> {
    let j = evaluate_jacobian(fs, x, series_param);
    let mut term = f.to_vec();
    let mut acc = f.to_vec();
    for _ in 1..k {
        let jt = j.matvec(&term);
        for (t, jv) in term.iter_mut().zip(jt) {
            *t += jv / scale;
        }
        for (a, t) in acc.iter_mut().zip(&term) {
            *a += t;
        }
    }
    acc.iter().map(|v| v / scale).collect()
}

/// Newton iteration `x ← Proj[x + b⁻¹Σ_{k<K}(I+b⁻¹J)^k F(x)]` from `x = 0`.
///
/// `series_param` multiplies degree-`m` monomials as `s^m`; `scale` is `b`,
/// with `J ≈ -b I` near the origin.
pub fn newton_iterate(
    fs: &[TermSeries],
    series_param: f64,
    scale: f64,
    k: usize,
    t: usize,
) -> Result<(Vec<f64>, usize), SolverError> {
    if scale == 0.0 || !scale.is_finite() {
        return Err(SolverError::Invalid(format!("scale = {scale}")));
    }
    let mut x = vec![0.0; fs.len()];
    let mut run = 0;
    for it in 0..t {
        let f = evaluate_all(fs, &x, series_param);
        let step = neumann_step(fs, &x, series_param, scale, k, &f);
        let mut next: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::Numeric(it));
        }
        project(&mut next);
        let moved = x.iter().zip(&next).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        x = next;
        run = it + 1;
        if moved < 1e-15 {
            break;
        }
    }
    Ok((x, run))
}

pub fn residual_inf(fs: &[TermSeries], x: &[f64], series_param: f64) -> f64 {
    inf_norm(&evaluate_all(fs, x, series_param))
}

/// Gibbs-mode learning. With `allow_override` the regime check becomes a
/// non-guaranteed marker on the report.
pub fn newton_learn(
    fs: &[TermSeries],
    beta: f64,
    epsilon: f64,
    params: &ExpansionParameters,
    allow_override: bool,
) -> Result<LearnReport, SolverError> {
    if !(beta > 0.0) || !(epsilon > 0.0) {
        return Err(SolverError::Invalid(format!("beta = {beta}, epsilon = {epsilon}")));
    }
    let guaranteed = beta <= params.beta_c_newton;
    if !guaranteed && !allow_override {
        return Err(SolverError::Regime { beta, threshold: params.beta_c_newton });
    }
    let k = neumann_depth(beta, epsilon);
    let t = iteration_count(beta, epsilon, params.degree_bound, k);
    let (x, run) = newton_iterate(fs, beta, beta, k, t)?;
    let mut params = params.clone();
    params.neumann_depth = k;
    params.iterations = t;
    params.m_hat = fs.iter().map(|f| f.truncation).max().unwrap_or(params.m_hat);
    Ok(LearnReport {
        term_ids: fs.iter().map(|f| f.term_id.clone()).collect(),
        residual_inf: residual_inf(fs, &x, beta),
        estimates: x,
        iterations_run: run,
        params,
        shots: None,
        seed: None,
        guaranteed,
    })
}

/// `⌈C(𝔡+1)/(β²ε²)·ln(2M/δ)⌉` shots per color.
pub fn sample_size(beta: f64, epsilon: f64, delta: f64, degree: usize, m: usize, c: f64) -> u64 {
    let v = c * (degree as f64 + 1.0) / (beta * beta * epsilon * epsilon) * (2.0 * m as f64 / delta).ln();
    v.ceil() as u64
}

pub const DEFAULT_SAMPLE_CONSTANT: f64 = 8.0;

/// Trajectory of `z_{n+1} = c + d z_n²` for `steps` steps.
pub fn decay_trajectory(c: f64, d: f64, z0: f64, steps: usize) -> Vec<f64> {
    let mut out = vec![z0];
    for _ in 0..steps {
        let z = *out.last().unwrap();
        out.push(c + d * z * z);
    }
    out
}

/// First `n ≥ log₂(1/(cd)) - 1`.
pub fn decay_steps(c: f64, d: f64) -> usize {
    ((1.0 / (c * d)).log2() - 1.0).ceil().max(0.0) as usize
}
