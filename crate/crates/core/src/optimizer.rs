//! Multistart BFGS with finite-difference gradients.
//!
//! Every start draws from its own ChaCha stream (`seed`, stream = start
//! index), so serial and parallel runs visit identical iterates and the
//! winner is chosen by a total order on (loss, canonical parameters).

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::basis::PointSet;
use crate::error::{Error, Result};
use crate::objective::{Mode, ObjectiveContext};
use nalgebra::DMatrix;

/// Loss reported for infeasible (singular) configurations.
pub const PENALTY: f64 = 1e6;

/// True for penalty values and NaN.
pub fn is_penalty(v: f64) -> bool {
    !(v < PENALTY)
}

/// Optimizer settings. Keys of a JSON config file mirror these fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptConfig {
    pub n_starts: usize,
    pub seed: u64,
    /// Relative finite-difference step.
    pub grad_step: f64,
    pub ls_shrink: f64,
    /// Sufficient-decrease constant of the backtracking line search.
    pub ls_armijo: f64,
    pub grad_tol: f64,
    pub step_tol: f64,
    pub max_iters: usize,
    /// Restart perturbation radius, relative to the domain diameter.
    pub perturb_delta: f64,
    pub perturb_rounds: usize,
    /// Extra descents with finite-difference steps reduced by these factors.
    pub polish_factors: Vec<f64>,
    /// Worker threads; `None` uses the global rayon pool, `Some(1)` runs serially.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            n_starts: 200,
            seed: 0,
            grad_step: 1e-6,
            ls_shrink: 0.5,
            ls_armijo: 1e-4,
            grad_tol: 1e-10,
            step_tol: 1e-12,
            max_iters: 500,
            perturb_delta: 1e-3,
            perturb_rounds: 3,
            polish_factors: vec![1e-2, 1e-4],
            threads: None,
        }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("grad_step", self.grad_step),
            ("ls_armijo", self.ls_armijo),
            ("grad_tol", self.grad_tol),
            ("step_tol", self.step_tol),
            ("perturb_delta", self.perturb_delta),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.ls_shrink > 0.0 && self.ls_shrink < 1.0) {
            return Err(Error::Config(format!(
                "ls_shrink must lie in (0, 1), got {}",
                self.ls_shrink
            )));
        }
        if self.ls_armijo >= 1.0 {
            return Err(Error::Config("ls_armijo must be below 1".into()));
        }
        if self.n_starts == 0 || self.max_iters == 0 {
            return Err(Error::Config(
                "n_starts and max_iters must be at least 1".into(),
            ));
        }
        if self.polish_factors.iter().any(|f| !(*f > 0.0)) {
            return Err(Error::Config("polish factors must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding, ignoring the thread count.
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        c.threads = None;
        let text = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// A function to minimize over `R^n`.
pub trait Objective: Sync {
    fn n_params(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Writes the gradient into `grad` and returns the value at `x`.
    fn value_and_gradient(&self, x: &[f64], h: f64, grad: &mut [f64]) -> f64 {
        finite_diff_gradient(|t| self.value(t), x, h, grad)
    }

    fn random_start(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;

    /// Length scale for perturbations and the largest single step.
    fn scale(&self) -> f64 {
        1.0
    }

    /// Maps `x` to a canonical representative of its symmetry class.
    fn canonicalize(&self, _x: &mut [f64]) {}
}

impl Objective for ObjectiveContext {
    fn n_params(&self) -> usize {
        ObjectiveContext::n_params(self)
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.loss(x)
    }

    fn value_and_gradient(&self, x: &[f64], h: f64, grad: &mut [f64]) -> f64 {
        self.loss_gradient(x, h, grad)
    }

    fn random_start(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        ObjectiveContext::random_start(self, rng)
    }

    fn scale(&self) -> f64 {
        self.domain().diameter()
    }

    fn canonicalize(&self, x: &mut [f64]) {
        ObjectiveContext::canonicalize(self, x)
    }
}

// Central difference, falling back to one side when a probe is infeasible.
pub(crate) fn combine_difference(f0: f64, fp: f64, fm: f64, step: f64) -> f64 {
    match (is_penalty(fp), is_penalty(fm)) {
        (false, false) => (fp - fm) / (2.0 * step),
        (false, true) if !is_penalty(f0) => (fp - f0) / step,
        (true, false) if !is_penalty(f0) => (f0 - fm) / step,
        _ => 0.0,
    }
}

/// Central-difference gradient with per-coordinate step `h·max(1, |xᵢ|)`.
/// Returns `f(x)`.
pub fn finite_diff_gradient<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x: &[f64],
    h: f64,
    grad: &mut [f64],
) -> f64 {
    let f0 = f(x);
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let step = h * x[i].abs().max(1.0);
        probe[i] = x[i] + step;
        let fp = f(&probe);
        probe[i] = x[i] - step;
        let fm = f(&probe);
        probe[i] = x[i];
        grad[i] = combine_difference(f0, fp, fm, step);
    }
    f0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GradientTolerance,
    StepTolerance,
    MaxIterations,
    LineSearchFailed,
}

/// Outcome of a single BFGS descent.
#[derive(Debug, Clone)]
pub struct Descent {
    pub x: Vec<f64>,
    pub value: f64,
    pub iters: usize,
    pub stop: StopReason,
    /// Objective at the start and after every accepted step.
    pub trace: Vec<f64>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// BFGS with an inverse-Hessian update and backtracking line search.
pub fn bfgs_descent<O: Objective + ?Sized>(obj: &O, x0: &[f64], cfg: &OptConfig) -> Descent {
    bfgs_with_step(obj, x0, cfg, cfg.grad_step)
}

fn bfgs_with_step<O: Objective + ?Sized>(obj: &O, x0: &[f64], cfg: &OptConfig, h: f64) -> Descent {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut f = obj.value_and_gradient(&x, h, &mut g);
    let mut trace = vec![f];
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut d = vec![0.0; n];
    let mut xn = vec![0.0; n];
    let mut gn = vec![0.0; n];
    let max_step = obj.scale();
    let mut stop = StopReason::MaxIterations;
    let mut iters = 0;
    while iters < cfg.max_iters {
        if inf_norm(&g) <= cfg.grad_tol {
            stop = StopReason::GradientTolerance;
            break;
        }
        for i in 0..n {
            d[i] = -(0..n).map(|j| hinv[(i, j)] * g[j]).sum::<f64>();
        }
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            hinv.fill_with_identity();
            fresh = true;
            for i in 0..n {
                d[i] = -g[i];
            }
            slope = -g.iter().map(|v| v * v).sum::<f64>();
        }
        let dn = inf_norm(&d);
        if dn > max_step {
            let s = max_step / dn;
            d.iter_mut().for_each(|v| *v *= s);
            slope *= s;
        }
        let xscale = 1.0 + inf_norm(&x);
        let mut t = 1.0;
        let accepted = loop {
            for i in 0..n {
                xn[i] = x[i] + t * d[i];
            }
            let fv = obj.value(&xn);
            if fv <= f + cfg.ls_armijo * t * slope {
                break Some(fv);
            }
            t *= cfg.ls_shrink;
            if t * inf_norm(&d) < cfg.step_tol * xscale {
                break None;
            }
        };
        iters += 1;
        let Some(_) = accepted else {
            if fresh {
                stop = StopReason::LineSearchFailed;
                break;
            }
            hinv.fill_with_identity();
            fresh = true;
            continue;
        };
        let fnew = obj.value_and_gradient(&xn, h, &mut gn);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ss = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        let yy = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if sy > 1e-12 * ss * yy && sy > 0.0 {
            if fresh {
                // initial scaling of the identity
                hinv.fill_with_identity();
                hinv *= sy / (yy * yy);
                fresh = false;
            }
            update_inverse_hessian(&mut hinv, &s, &y, sy);
        }
        let small_step = inf_norm(&s) <= cfg.step_tol * xscale;
        std::mem::swap(&mut x, &mut xn);
        std::mem::swap(&mut g, &mut gn);
        f = fnew;
        trace.push(f);
        if small_step {
            stop = StopReason::StepTolerance;
            break;
        }
    }
    Descent {
        x,
        value: f,
        iters,
        stop,
        trace,
    }
}

// H ← (I − ρsyᵀ) H (I − ρysᵀ) + ρssᵀ
fn update_inverse_hessian(h: &mut DMatrix<f64>, s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| h[(i, j)] * y[j]).sum())
        .collect();
    let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
    let coef = rho * rho * yhy + rho;
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] += coef * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

/// Result of one multistart member.
#[derive(Debug, Clone)]
pub struct StartOutcome {
    pub index: usize,
    pub x: Vec<f64>,
    pub value: f64,
    pub iters: usize,
}

fn run_start<O: Objective + ?Sized>(obj: &O, cfg: &OptConfig, index: usize) -> StartOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let x0 = obj.random_start(&mut rng);
    let first = bfgs_descent(obj, &x0, cfg);
    let mut iters = first.iters;
    let (mut best_x, mut best_v) = (first.x, first.value);
    let delta = cfg.perturb_delta * obj.scale();
    for _ in 0..cfg.perturb_rounds {
        let xp: Vec<f64> = best_x
            .iter()
            .map(|v| v + rng.random_range(-delta..=delta))
            .collect();
        let r = bfgs_descent(obj, &xp, cfg);
        iters += r.iters;
        if r.value < best_v {
            best_x = r.x;
            best_v = r.value;
        }
    }
    for factor in &cfg.polish_factors {
        let r = bfgs_with_step(obj, &best_x, cfg, cfg.grad_step * factor);
        iters += r.iters;
        if r.value < best_v {
            best_x = r.x;
            best_v = r.value;
        }
    }
    obj.canonicalize(&mut best_x);
    let value = obj.value(&best_x);
    log::debug!("start {index}: loss {value:e} after {iters} iterations");
    StartOutcome {
        index,
        x: best_x,
        value,
        iters,
    }
}

fn outcome_order(a: &StartOutcome, b: &StartOutcome) -> Ordering {
    a.value
        .total_cmp(&b.value)
        .then_with(|| {
            a.x.iter()
                .zip(&b.x)
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
        .then(a.index.cmp(&b.index))
}

/// Runs every start and returns all outcomes in start order.
pub fn multistart<O: Objective + ?Sized>(obj: &O, cfg: &OptConfig) -> Result<Vec<StartOutcome>> {
    cfg.validate()?;
    let run = || -> Vec<StartOutcome> {
        (0..cfg.n_starts)
            .into_par_iter()
            .map(|i| run_start(obj, cfg, i))
            .collect()
    };
    Ok(match cfg.threads {
        Some(1) => (0..cfg.n_starts).map(|i| run_start(obj, cfg, i)).collect(),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(run),
        None => run(),
    })
}

/// Best outcome under the deterministic (loss, parameters) order.
pub fn best_outcome(outcomes: &[StartOutcome]) -> Option<&StartOutcome> {
    outcomes.iter().min_by(|a, b| outcome_order(a, b))
}

/// Optimizer output for a σ objective.
#[derive(Debug, Clone)]
pub struct OptResult {
    /// Winning point set (sorted lexicographically in symmetric mode).
    pub best_x: PointSet,
    pub best_y: Option<DMatrix<f64>>,
    pub best_sigma: f64,
    pub best_loss: f64,
    pub best_params: Vec<f64>,
    pub start_index: usize,
    /// Final σ of every start, in start order.
    pub history: Vec<f64>,
    pub iterations: usize,
    /// Indices of winning points outside the closed domain.
    pub outside: Vec<usize>,
}

/// Multistart minimization of the context's σ objective.
pub fn minimize(ctx: &ObjectiveContext, cfg: &OptConfig) -> Result<OptResult> {
    let outcomes = multistart(ctx, cfg)?;
    let best = best_outcome(&outcomes).expect("n_starts >= 1").clone();
    let history: Vec<f64> = outcomes.iter().map(|o| ctx.sigma_at(&o.x)).collect();
    let best_x = ctx.points_from_params(&best.x);
    let domain = ctx.domain();
    let outside = best_x
        .iter()
        .enumerate()
        .filter(|(_, p)| !domain.contains(p))
        .map(|(i, _)| i)
        .collect::<Vec<_>>();
    if !outside.is_empty() {
        log::warn!(
            "{} optimized points lie outside the {domain}",
            outside.len()
        );
    }
    Ok(OptResult {
        best_sigma: history[best.index],
        best_y: match ctx.mode() {
            Mode::Symmetric => None,
            Mode::General(_) => ctx.y_from_params(&best.x),
        },
        best_x,
        best_loss: best.value,
        start_index: best.index,
        iterations: outcomes.iter().map(|o| o.iters).sum(),
        best_params: best.x,
        history,
        outside,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosenbrock;

    impl Objective for Rosenbrock {
        fn n_params(&self) -> usize {
            2
        }
        fn value(&self, x: &[f64]) -> f64 {
            (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
        }
        fn random_start(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
            vec![rng.random_range(-2.0..2.0), rng.random_range(-1.0..3.0)]
        }
        fn scale(&self) -> f64 {
            10.0
        }
    }

    struct Bowl;

    impl Objective for Bowl {
        fn n_params(&self) -> usize {
            3
        }
        fn value(&self, x: &[f64]) -> f64 {
            x.iter()
                .enumerate()
                .map(|(i, v)| (i + 1) as f64 * (v - 0.5).powi(2))
                .sum()
        }
        fn random_start(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
            (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()
        }
    }

    #[test]
    fn quadratic_gradient() {
        let mut g = [0.0; 2];
        finite_diff_gradient(|x| x[0] * x[0] + x[1] * x[1], &[1.0, 2.0], 1e-6, &mut g);
        assert!((g[0] - 2.0).abs() < 1e-6 && (g[1] - 4.0).abs() < 1e-6);
    }

    #[test]
    fn one_sided_fallback_at_barrier() {
        let f = |x: &[f64]| if x[0] > 1.0 { PENALTY } else { x[0] * x[0] };
        let mut g = [0.0];
        finite_diff_gradient(f, &[1.0], 1e-6, &mut g);
        assert!((g[0] - 2.0).abs() < 1e-5);
    }

    #[test]
    fn rosenbrock_from_classic_start() {
        let cfg = OptConfig {
            max_iters: 2000,
            ..OptConfig::default()
        };
        let r = bfgs_descent(&Rosenbrock, &[-1.2, 1.0], &cfg);
        assert!(
            (r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6,
            "{:?} {:?}",
            r.x,
            r.stop
        );
    }

    #[test]
    fn accepted_steps_decrease_sufficiently() {
        let cfg = OptConfig::default();
        let r = bfgs_descent(&Rosenbrock, &[-1.2, 1.0], &cfg);
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.value <= r.trace[0]);
    }

    #[test]
    fn bowl_converges() {
        let r = bfgs_descent(&Bowl, &[0.9, -0.3, 0.0], &OptConfig::default());
        assert!(r.x.iter().all(|v| (v - 0.5).abs() < 1e-6));
        assert!(r.value < 1e-12);
    }

    #[test]
    fn serial_and_parallel_agree() {
        let base = OptConfig {
            n_starts: 12,
            seed: 42,
            perturb_rounds: 1,
            ..OptConfig::default()
        };
        let serial = multistart(
            &Rosenbrock,
            &OptConfig {
                threads: Some(1),
                ..base.clone()
            },
        )
        .unwrap();
        let again = multistart(
            &Rosenbrock,
            &OptConfig {
                threads: Some(1),
                ..base.clone()
            },
        )
        .unwrap();
        let parallel = multistart(
            &Rosenbrock,
            &OptConfig {
                threads: Some(3),
                ..base
            },
        )
        .unwrap();
        for ((a, b), c) in serial.iter().zip(&again).zip(&parallel) {
            assert_eq!(a.x, b.x);
            assert_eq!(a.x, c.x);
            assert_eq!(a.value.to_bits(), c.value.to_bits());
        }
        assert_eq!(
            best_outcome(&serial).unwrap().index,
            best_outcome(&parallel).unwrap().index
        );
    }

    #[test]
    fn config_validation_and_hash() {
        assert!(OptConfig::default().validate().is_ok());
        let bad = OptConfig {
            grad_tol: 0.0,
            ..OptConfig::default()
        };
        assert!(bad.validate().is_err());
        let a = OptConfig::default();
        let b = OptConfig {
            threads: Some(4),
            ..a.clone()
        };
        assert_eq!(a.config_hash(), b.config_hash());
        let c = OptConfig {
            seed: 1,
            ..a.clone()
        };
        assert_ne!(a.config_hash(), c.config_hash());
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = OptConfig {
            n_starts: 7,
            threads: Some(2),
            ..OptConfig::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<OptConfig>(&text).unwrap(), cfg);
        let partial: OptConfig = serde_json::from_str(r#"{"n_starts": 3}"#).unwrap();
        assert_eq!(partial.n_starts, 3);
        assert!(serde_json::from_str::<OptConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
