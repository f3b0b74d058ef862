//! FISTA and scaled-ADMM reconstruction, with a conjugate-gradient inner
//! solver for the ADMM data-fidelity update.

use std::time::{Duration, Instant};

use ndarray::Array4;

use crate::error::{PolarError, Result};
use crate::forward::{estimate_lipschitz, ForwardOperator};
use crate::prox::{fista_prox_raw, haar_tv_prox_raw, weighted_tv, TvWeights};
use crate::tensor::{Measurement, PolarizationStack, ANGLES3, ANGLES4};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Fista,
    Admm,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub lambda: f64,
    pub lambda_w: f64,
    /// FISTA step-size tuning factor c: step = 1 / (L * c).
    pub step_factor: f64,
    pub iterations: usize,
    /// ADMM penalty parameter.
    pub rho: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    /// Measurement-noise scale of the data term; kept at 1 and folded into
    /// lambda.
    pub noise_scale: f64,
    pub log_every: usize,
    /// Seed for the power-iteration start of the Lipschitz estimate.
    pub seed: u64,
}

impl SolverConfig {
    /// FISTA defaults for synthetic data: c = 45, lambda = lambda_w = 5e-5,
    /// 10k iterations.
    pub fn fista_simulation() -> Self {
        Self {
            kind: SolverKind::Fista,
            lambda: 5e-5,
            lambda_w: 5e-5,
            step_factor: 45.0,
            iterations: 10_000,
            rho: 0.15,
            cg_tol: 1e-3,
            cg_max_iter: 30,
            noise_scale: 1.0,
            log_every: 50,
            seed: 0,
        }
    }

    /// FISTA defaults for real captures: c = 1000, lambda = lambda_w = 5e-3,
    /// 500 iterations.
    pub fn fista_real() -> Self {
        Self {
            lambda: 5e-3,
            lambda_w: 5e-3,
            step_factor: 1000.0,
            iterations: 500,
            ..Self::fista_simulation()
        }
    }

    /// ADMM defaults: rho = 0.15, lambda = 3e-5, lambda_w = 6e-5, 200 outer
    /// iterations, CG tolerance 1e-3 with 30 inner iterations.
    pub fn admm_defaults() -> Self {
        Self {
            kind: SolverKind::Admm,
            lambda: 3e-5,
            lambda_w: 6e-5,
            iterations: 200,
            ..Self::fista_simulation()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("step_factor", self.step_factor),
            ("rho", self.rho),
            ("cg_tol", self.cg_tol),
            ("noise_scale", self.noise_scale),
        ];
        for (name, v) in pos {
            if !v.is_finite() || v <= 0.0 {
                return Err(PolarError::InvalidDims(format!("{name} must be positive")));
            }
        }
        if self.lambda < 0.0 || self.lambda_w < 0.0 {
            return Err(PolarError::InvalidDims("lambda values must be >= 0".into()));
        }
        if self.iterations < 1 || self.cg_max_iter < 1 || self.log_every < 1 {
            return Err(PolarError::InvalidDims("iteration counts must be >= 1".into()));
        }
        Ok(())
    }

    pub fn weights(&self) -> TvWeights {
        TvWeights { lambda: self.lambda, lambda_w: self.lambda_w }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub estimate: PolarizationStack,
    /// (iteration, objective) pairs, logged every `log_every` iterations and
    /// at the final iterate.
    pub objective_trace: Vec<(usize, f64)>,
    /// ADMM consensus residual ||v - z|| per outer iteration; empty for FISTA.
    pub residual_trace: Vec<f64>,
    pub iterations: usize,
    pub wall_time: Duration,
}

impl SolveReport {
    /// Trace rows as `iteration,objective,residual` CSV.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,objective,residual\n");
        let max_len = self.objective_trace.len().max(self.residual_trace.len());
        if self.residual_trace.is_empty() {
            for (it, obj) in &self.objective_trace {
                out.push_str(&format!("{it},{obj},\n"));
            }
        } else {
            // ADMM: one row per outer iteration, objective where logged
            let mut next_obj = self.objective_trace.iter().peekable();
            for it in 1..=max_len {
                let obj = match next_obj.peek() {
                    Some((i, o)) if *i == it => {
                        let s = o.to_string();
                        next_obj.next();
                        s
                    }
                    _ => String::new(),
                };
                let res = self.residual_trace.get(it - 1).map(|r| r.to_string()).unwrap_or_default();
                out.push_str(&format!("{it},{obj},{res}\n"));
            }
        }
        out
    }
}

fn dot(a: &Array4<f64>, b: &Array4<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn norm(a: &Array4<f64>) -> f64 {
    dot(a, a).sqrt()
}

fn labels_for(p: usize) -> Vec<u32> {
    if p == 3 {
        ANGLES3.to_vec()
    } else {
        ANGLES4.to_vec()
    }
}

fn objective(op: &ForwardOperator, x: &Array4<f64>, y: &Measurement, cfg: &SolverConfig) -> f64 {
    let r = op.apply_raw(x) - y.data();
    let data_term = 0.5 * r.iter().map(|v| v * v).sum::<f64>() / (cfg.noise_scale * cfg.noise_scale);
    data_term + cfg.lambda * weighted_tv(x, &cfg.weights())
}

/// Plain FISTA from zero initialization with a fixed step 1 / (L * c) and the
/// combined non-negativity + Haar TV prox.
pub fn fista_reconstruct(
    y: &Measurement,
    op: &ForwardOperator,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    cfg.validate()?;
    if cfg.kind != SolverKind::Fista {
        return Err(PolarError::InvalidDims("config kind is not FISTA".into()));
    }
    let start = Instant::now();
    let (h, w, c, p) = op.scene_dims();
    if (y.channels(), y.height(), y.width()) != (c, h, w) {
        return Err(PolarError::DimensionMismatch("measurement vs operator".into()));
    }
    let lipschitz = estimate_lipschitz(op, 50, cfg.seed);
    let step = 1.0 / (lipschitz * cfg.step_factor) * cfg.noise_scale * cfg.noise_scale;
    let tau = cfg.lambda / (lipschitz * cfg.step_factor);
    let weights = cfg.weights();

    let mut x = Array4::<f64>::zeros((p, c, h, w));
    let mut v = x.clone();
    let mut t = 1.0_f64;
    let mut trace = Vec::new();
    let inv_sigma2 = 1.0 / (cfg.noise_scale * cfg.noise_scale);

    for k in 1..=cfg.iterations {
        let grad = op.adjoint_raw(&(op.apply_raw(&v) - y.data())) * inv_sigma2;
        let x_tilde = &v - &(grad * step);
        let x_next = fista_prox_raw(&x_tilde, tau, &weights);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = (t - 1.0) / t_next;
        v = &x_next + &((&x_next - &x) * momentum);
        x = x_next;
        t = t_next;
        if k % cfg.log_every == 0 || k == cfg.iterations {
            let obj = objective(op, &x, y, cfg);
            if !obj.is_finite() {
                return Err(PolarError::SolverDiverged(format!(
                    "non-finite objective at iteration {k}"
                )));
            }
            trace.push((k, obj));
        }
    }

    Ok(SolveReport {
        estimate: PolarizationStack::new(x, labels_for(p))?,
        objective_trace: trace,
        residual_trace: Vec::new(),
        iterations: cfg.iterations,
        wall_time: start.elapsed(),
    })
}

/// Standard conjugate gradient for a symmetric positive-definite operator.
/// Stops when the residual norm drops below `tol * ||b||` or after
/// `max_iter` iterations.
pub fn conjugate_gradient<F>(
    apply: F,
    b: &Array4<f64>,
    x0: &Array4<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<Array4<f64>>
where
    F: Fn(&Array4<f64>) -> Array4<f64>,
{
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(Array4::zeros(b.dim()));
    }
    let mut x = x0.clone();
    let mut r = b - &apply(&x);
    let mut p = r.clone();
    let mut rs = dot(&r, &r);
    for _ in 0..max_iter {
        if rs.sqrt() <= tol * b_norm {
            break;
        }
        let ap = apply(&p);
        let curvature = dot(&p, &ap);
        if curvature <= 0.0 {
            return Err(PolarError::NegativeCurvature);
        }
        let alpha = rs / curvature;
        x = &x + &(&p * alpha);
        r = &r - &(&ap * alpha);
        let rs_next = dot(&r, &r);
        p = &r + &(&p * (rs_next / rs));
        rs = rs_next;
    }
    Ok(x)
}

/// Scaled ADMM from zero initialization. The v-update solves
/// (A^T A + rho I) v = A^T y + rho (z - u) inexactly by warm-started CG, the
/// z-update applies the Haar TV prox followed by the non-negativity clamp,
/// and u accumulates the consensus error. The final estimate is z.
pub fn admm_reconstruct(
    y: &Measurement,
    op: &ForwardOperator,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    cfg.validate()?;
    if cfg.kind != SolverKind::Admm {
        return Err(PolarError::InvalidDims("config kind is not ADMM".into()));
    }
    let start = Instant::now();
    let (h, w, c, p) = op.scene_dims();
    if (y.channels(), y.height(), y.width()) != (c, h, w) {
        return Err(PolarError::DimensionMismatch("measurement vs operator".into()));
    }
    let weights = cfg.weights();
    let tau = cfg.lambda / cfg.rho;
    let aty = op.adjoint_raw(y.data());

    let mut v = Array4::<f64>::zeros((p, c, h, w));
    let mut z = v.clone();
    let mut u = v.clone();
    let mut residuals = Vec::with_capacity(cfg.iterations);
    let mut trace = Vec::new();
    let normal_op = |x: &Array4<f64>| op.adjoint_raw(&op.apply_raw(x)) + &(x * cfg.rho);

    for k in 1..=cfg.iterations {
        let b = &aty + &((&z - &u) * cfg.rho);
        v = conjugate_gradient(normal_op, &b, &v, cfg.cg_tol, cfg.cg_max_iter)?;
        let vu = &v + &u;
        z = haar_tv_prox_raw(&vu, tau, &weights).mapv(|t| t.max(0.0));
        u = &u + &v - &z;
        residuals.push(norm(&(&v - &z)));
        if k % cfg.log_every == 0 || k == cfg.iterations {
            let obj = objective(op, &z, y, cfg);
            if !obj.is_finite() {
                return Err(PolarError::SolverDiverged(format!(
                    "non-finite objective at iteration {k}"
                )));
            }
            trace.push((k, obj));
        }
    }

    Ok(SolveReport {
        estimate: PolarizationStack::new(z, labels_for(p))?,
        objective_trace: trace,
        residual_trace: residuals,
        iterations: cfg.iterations,
        wall_time: start.elapsed(),
    })
}

/// Dispatch on `cfg.kind`.
pub fn reconstruct(y: &Measurement, op: &ForwardOperator, cfg: &SolverConfig) -> Result<SolveReport> {
    match cfg.kind {
        SolverKind::Fista => fista_reconstruct(y, op, cfg),
        SolverKind::Admm => admm_reconstruct(y, op, cfg),
    }
}
