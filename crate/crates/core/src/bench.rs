//! Validation harness: random function ensembles, projection-error
//! statistics, table reproduction and theorem-recovery checks.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affine::AffineMap;
use crate::basis::{legendre_and_derivative, BasisSet, Domain, PointSet};
use crate::error::{Error, Result};
use crate::linalg::max_abs;
use crate::objective::{ObjectiveContext, Space};
use crate::optimizer::{minimize, OptConfig};
use crate::refquad::{gauss_legendre, reference_rule, ClassicalRule, InnerProductSpec};
use crate::rules::{build_rule, BilinearRule, Projector};

/// Default number of samples per ensemble.
pub const DEFAULT_SAMPLES: usize = 1000;

/// Default exactness degree of the reference rule for "exact" coefficients.
pub const DEFAULT_REF_DEGREE: usize = 40;

/// The random function classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    /// Unit-norm members of `ℙ_n` with uniform random coefficients.
    Pprime(usize),
    /// `1 / (1 + (a·x)²)` with `a` on the unit circle.
    C,
    /// `e^{a·x} cos(4 b·x) p(x)` with `a, b` on the unit circle, `p ∈ ℙ′₂`.
    Tp,
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnsembleKind::Pprime(n) => write!(f, "pprime{n}"),
            EnsembleKind::C => f.write_str("c"),
            EnsembleKind::Tp => f.write_str("tp"),
        }
    }
}

impl FromStr for EnsembleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        match s.as_str() {
            "c" => Ok(EnsembleKind::C),
            "tp" => Ok(EnsembleKind::Tp),
            _ => s
                .strip_prefix("pprime")
                .or_else(|| s.strip_prefix("p'"))
                .and_then(|n| n.parse().ok())
                .map(EnsembleKind::Pprime)
                .ok_or_else(|| {
                    Error::Parameter(format!(
                        "unknown ensemble {s:?} (expected pprime<N>, c or tp)"
                    ))
                }),
        }
    }
}

/// A member of `ℙ_n` given by coefficients on an orthonormal basis.
#[derive(Debug, Clone)]
pub struct PolySample {
    pub coeffs: Vec<f64>,
    pub basis: Arc<BasisSet>,
}

impl PolySample {
    pub fn eval(&self, p: &[f64]) -> f64 {
        self.basis
            .eval(p)
            .iter()
            .zip(&self.coeffs)
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// One sampled function.
#[derive(Debug, Clone)]
pub enum SampleFunction {
    Poly(PolySample),
    Rational {
        a: [f64; 2],
    },
    Tp {
        a: [f64; 2],
        b: [f64; 2],
        p: PolySample,
    },
}

impl SampleFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            SampleFunction::Poly(p) => p.eval(x),
            SampleFunction::Rational { a } => {
                let t = a[0] * x[0] + a[1] * x[1];
                1.0 / (1.0 + t * t)
            }
            SampleFunction::Tp { a, b, p } => {
                let ea = (a[0] * x[0] + a[1] * x[1]).exp();
                ea * (4.0 * (b[0] * x[0] + b[1] * x[1])).cos() * p.eval(x)
            }
        }
    }
}

/// A seeded distribution over functions on a (possibly transported) domain.
#[derive(Debug, Clone)]
pub struct FunctionEnsemble {
    pub kind: EnsembleKind,
    pub domain: Domain,
    pub frame: Option<AffineMap>,
    pub seed: u64,
}

/// Orthonormal `ℙ_n` on the image of `frame`.
fn orthonormal_poly(domain: Domain, frame: Option<&AffineMap>, n: usize) -> Result<BasisSet> {
    let f0 = ObjectiveContext::polynomial(n, InnerProductSpec::l2(domain))?.basis_f0();
    match frame {
        Some(map) => f0.transported(map, map.det().abs().powf(-0.5)),
        None => Ok(f0),
    }
}

fn unit_vector(rng: &mut ChaCha8Rng) -> [f64; 2] {
    let t = rng.random_range(0.0..2.0 * PI);
    [t.cos(), t.sin()]
}

fn unit_coefficients(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let mut c: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    c.iter_mut().for_each(|v| *v /= norm);
    c
}

impl FunctionEnsemble {
    pub fn new(kind: EnsembleKind, domain: Domain, seed: u64) -> Self {
        Self {
            kind,
            domain,
            frame: None,
            seed,
        }
    }

    /// The ensemble on the same image domain as `rule`.
    pub fn for_rule(kind: EnsembleKind, rule: &BilinearRule, seed: u64) -> Self {
        Self {
            kind,
            domain: rule.domain,
            frame: rule.frame.clone(),
            seed,
        }
    }

    /// `count` functions, deterministic in the seed.
    pub fn sample(&self, count: usize) -> Result<Vec<SampleFunction>> {
        if count == 0 {
            return Err(Error::Parameter("sample count must be at least 1".into()));
        }
        if !matches!(self.kind, EnsembleKind::Pprime(_)) && self.domain.dim() != 2 {
            return Err(Error::Unsupported(format!(
                "ensemble {} on {}",
                self.kind, self.domain
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let degree = match self.kind {
            EnsembleKind::Pprime(n) => n,
            _ => 2,
        };
        let basis = Arc::new(orthonormal_poly(self.domain, self.frame.as_ref(), degree)?);
        let k = basis.len();
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            out.push(match self.kind {
                EnsembleKind::Pprime(_) => SampleFunction::Poly(PolySample {
                    coeffs: unit_coefficients(&mut rng, k),
                    basis: basis.clone(),
                }),
                EnsembleKind::C => SampleFunction::Rational {
                    a: unit_vector(&mut rng),
                },
                EnsembleKind::Tp => {
                    let a = unit_vector(&mut rng);
                    let b = unit_vector(&mut rng);
                    SampleFunction::Tp {
                        a,
                        b,
                        p: PolySample {
                            coeffs: unit_coefficients(&mut rng, k),
                            basis: basis.clone(),
                        },
                    }
                }
            });
        }
        Ok(out)
    }
}

/// Mean relative projection error of one rule on one ensemble.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BenchReport {
    pub rule: String,
    pub ensemble: EnsembleKind,
    pub count: usize,
    pub ref_degree: usize,
    pub seed: u64,
    pub mean_relative_error: f64,
    pub max_relative_error: f64,
}

/// Human-readable identifier of a rule.
pub fn rule_label(rule: &BilinearRule) -> String {
    let space = match rule.space {
        Space::Polynomial { degree } => format!("P{degree}"),
        Space::Trigonometric { frequency } => format!("T{frequency}"),
    };
    let frame = if rule.frame.is_some() {
        " (mapped)"
    } else {
        ""
    };
    format!(
        "{} {} {} {}-point{frame}",
        rule.domain,
        rule.ip,
        space,
        rule.len()
    )
}

// Sum in index order by recursive halving.
fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Reference rule on the rule's image domain.
fn image_reference_rule(rule: &BilinearRule, ref_degree: usize) -> Result<ClassicalRule> {
    let r = reference_rule(rule.domain, ref_degree)?;
    Ok(match &rule.frame {
        Some(f) => r.transported(f),
        None => r,
    })
}

fn space_degree(rule: &BilinearRule) -> usize {
    match rule.space {
        Space::Polynomial { degree } => degree,
        Space::Trigonometric { frequency } => frequency,
    }
}

/// Per-sample relative errors `‖P_Q g − P g‖₂ / ‖P g‖₂`.
pub fn relative_errors(
    rule: &BilinearRule,
    samples: &[SampleFunction],
    ref_degree: usize,
) -> Result<Vec<f64>> {
    if rule.ip.is_h1() {
        return Err(Error::Unsupported(
            "projection benchmarks for H1 rules".into(),
        ));
    }
    let degree = space_degree(rule);
    if ref_degree < 2 * degree {
        return Err(Error::Config(format!(
            "reference degree {ref_degree} cannot integrate products of degree-{degree} functions exactly"
        )));
    }
    let projector = Projector::new(rule)?;
    let f0 = rule.bases()?.f0;
    let reference = image_reference_rule(rule, ref_degree)?;
    let ref_vals: DMatrix<f64> = f0.eval_unchecked(&reference.nodes);
    let errors: Vec<f64> = samples
        .par_iter()
        .map(|g| {
            let gv: Vec<f64> = rule.points_y.iter().map(|p| g.eval(p)).collect();
            let approx = projector.project(&gv).expect("length matches");
            let mut exact = vec![0.0; f0.len()];
            for (q, (p, w)) in reference.nodes.iter().zip(&reference.weights).enumerate() {
                let wg = w * g.eval(p);
                for (i, e) in exact.iter_mut().enumerate() {
                    *e += wg * ref_vals[(q, i)];
                }
            }
            let num = approx
                .iter()
                .zip(&exact)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let den = exact.iter().map(|v| v * v).sum::<f64>().sqrt();
            num / den
        })
        .collect();
    Ok(errors)
}

/// Mean relative ℓ² error of the approximate projection over `count`
/// samples, with exact coefficients from a degree-`ref_degree` rule.
pub fn projection_error(
    rule: &BilinearRule,
    ensemble: &FunctionEnsemble,
    count: usize,
    ref_degree: usize,
) -> Result<BenchReport> {
    if ensemble.domain != rule.domain || ensemble.frame != rule.frame {
        return Err(Error::Parameter(
            "ensemble and rule live on different domains".into(),
        ));
    }
    let samples = ensemble.sample(count)?;
    let errors = relative_errors(rule, &samples, ref_degree)?;
    Ok(BenchReport {
        rule: rule_label(rule),
        ensemble: ensemble.kind,
        count,
        ref_degree,
        seed: ensemble.seed,
        mean_relative_error: pairwise_sum(&errors) / count as f64,
        max_relative_error: errors.iter().copied().fold(0.0, f64::max),
    })
}

/// Worst case of `‖P_Q g − P g‖₂ − σ‖g₁‖` over `ℙ′_{n+1}` samples, where
/// `g₁` is the degree-(n+1) component. Non-positive means the bound held.
pub fn error_bound_margin(rule: &BilinearRule, count: usize, seed: u64) -> Result<f64> {
    if matches!(rule.space, Space::Trigonometric { .. }) {
        return Err(Error::Unsupported(
            "error bound sampling on trigonometric rules".into(),
        ));
    }
    let ctx = rule.context()?;
    let bases = rule.bases()?;
    let joint_len = ctx.k() + ctx.p();
    let projector = Projector::new(rule)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..count {
        let c = unit_coefficients(&mut rng, joint_len);
        let gv: Vec<f64> = rule
            .points_y
            .iter()
            .map(|p| {
                let a = bases.f0.eval(p);
                let b = bases.g1.eval(p);
                a.iter().chain(&b).zip(&c).map(|(u, v)| u * v).sum()
            })
            .collect();
        let approx = projector.project(&gv)?;
        let err = approx
            .iter()
            .zip(&c[..ctx.k()])
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let g1 = c[ctx.k()..].iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.max(err - rule.sigma * g1);
    }
    Ok(worst)
}

/// One row of a reproduced table.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TableRow {
    pub n: usize,
    pub k: usize,
    pub sigma: Option<f64>,
    pub kappa_inf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// `2.82218e+0` style with five decimals.
pub fn format_sci(v: f64) -> String {
    let t = format!("{v:.5e}");
    match t.split_once('e') {
        Some((m, e)) if !e.starts_with('-') => format!("{m}e+{e}"),
        _ => t,
    }
}

impl fmt::Display for TableRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.error, self.sigma) {
            (Some(e), _) => write!(f, "{} {} failed {e}", self.n, self.k),
            (None, sigma) => {
                let sigma = sigma.map_or("n/a".to_string(), |s| format!("{s:.5}"));
                let kappa = self.kappa_inf.map_or("n/a".to_string(), format_sci);
                write!(f, "{} {} {sigma} {kappa}", self.n, self.k)
            }
        }
    }
}

impl FromStr for TableRow {
    type Err = Error;

    /// Parses the text form written by `Display`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Format(format!("malformed table row {s:?}"));
        let mut it = s.split_whitespace();
        let n = it.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let k = it.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let third = it.next().ok_or_else(bad)?;
        if third == "failed" {
            let rest: Vec<&str> = it.collect();
            return Ok(TableRow {
                n,
                k,
                sigma: None,
                kappa_inf: None,
                error: Some(rest.join(" ")),
            });
        }
        let opt = |v: &str| -> Result<Option<f64>> {
            if v == "n/a" {
                Ok(None)
            } else {
                v.parse().map(Some).map_err(|_| bad())
            }
        };
        let sigma = opt(third)?;
        let kappa_inf = opt(it.next().ok_or_else(bad)?)?;
        if it.next().is_some() {
            return Err(bad());
        }
        Ok(TableRow {
            n,
            k,
            sigma,
            kappa_inf,
            error: None,
        })
    }
}

/// Builds rules for `n = n_min..=n_max` and reports `(n, k, σ, κ∞)`.
pub fn reproduce_table(
    domain: Domain,
    ip: &InnerProductSpec,
    n_min: usize,
    n_max: usize,
    cfg: &OptConfig,
) -> Vec<(TableRow, Option<BilinearRule>)> {
    (n_min..=n_max)
        .map(|n| {
            let k = match domain {
                Domain::Circle => 2 * n + 1,
                _ => crate::basis::poly_dim(domain.dim(), n),
            };
            match build_rule(domain, n, ip, cfg) {
                Ok(rule) => (
                    TableRow {
                        n,
                        k,
                        sigma: Some(rule.sigma),
                        kappa_inf: rule.kappa_inf,
                        error: None,
                    },
                    Some(rule),
                ),
                Err(e) => (
                    TableRow {
                        n,
                        k,
                        sigma: None,
                        kappa_inf: None,
                        error: Some(e.to_string()),
                    },
                    None,
                ),
            }
        })
        .collect()
}

/// Roots of `P_n'` on (-1, 1) by bisection on a fine bracketing grid.
pub fn legendre_derivative_roots(n: usize) -> Vec<f64> {
    let dp = |x: f64| legendre_and_derivative(n, x).1;
    let grid = 2000 * n.max(1);
    let mut roots = Vec::new();
    let mut a = -1.0 + 1e-12;
    let mut fa = dp(a);
    for i in 1..=grid {
        let b = -1.0 + 2.0 * i as f64 / grid as f64 - if i == grid { 1e-12 } else { 0.0 };
        let fb = dp(b);
        if fa == 0.0 {
            roots.push(a);
        } else if fa * fb < 0.0 {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = dp(mid);
                if fm == 0.0 || hi - lo < 1e-16 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if flo * fm < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        a = b;
        fa = fb;
    }
    roots
}

/// Outcome of one theorem-recovery check.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TheoremCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TheoremReport {
    pub checks: Vec<TheoremCheck>,
}

impl TheoremReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: &str, result: Result<(bool, String)>) -> TheoremCheck {
    match result {
        Ok((passed, detail)) => TheoremCheck {
            name: name.to_string(),
            passed,
            detail,
        },
        Err(e) => TheoremCheck {
            name: name.to_string(),
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Optimizing on `ℙ_{n-1}` over the interval recovers the `n` Gauss nodes and weights.
pub fn gauss_recovery(n: usize, cfg: &OptConfig) -> Result<(bool, String)> {
    let rule = build_rule(
        Domain::unit_interval(),
        n - 1,
        &InnerProductSpec::l2(Domain::unit_interval()),
        cfg,
    )?;
    let g = gauss_legendre(n, -1.0, 1.0)?;
    let node_dev = rule
        .points_x
        .coords()
        .iter()
        .zip(g.nodes.coords())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let weight_dev = (0..n)
        .map(|i| (rule.w[(i, i)] - g.weights[i]).abs())
        .fold(0.0, f64::max);
    let off = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| rule.w[(i, j)].abs())
        .fold(0.0, f64::max);
    let passed = node_dev <= 1e-7 && weight_dev <= 1e-8 && off <= 1e-8 && rule.sigma <= 1e-10;
    Ok((
        passed,
        format!("n = {n}: node dev {node_dev:.2e}, weight dev {weight_dev:.2e}, off-diagonal {off:.2e}, sigma {:.2e}", rule.sigma),
    ))
}

/// Equispaced nodes on the circle give σ = 1 and `W = (2π/n) I`.
pub fn trapezoid_optimality(frequency: usize) -> Result<(bool, String)> {
    let ctx = ObjectiveContext::trigonometric(frequency)?;
    let n = 2 * frequency + 1;
    let pts = PointSet::new(1, (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect())?;
    let rule = BilinearRule::from_points(&ctx, &pts, None)?;
    let wdev = max_abs(&(&rule.w - DMatrix::identity(n, n) * (2.0 * PI / n as f64)));
    let passed = (rule.sigma - 1.0).abs() <= 1e-12 && wdev <= 1e-10;
    Ok((
        passed,
        format!(
            "{n} points: sigma {:.15}, |W - (2pi/n) I| {wdev:.2e}",
            rule.sigma
        ),
    ))
}

/// `σ ≥ 1` for random node sets containing 0 on the circle.
pub fn circle_lower_bound(
    frequency: usize,
    count: usize,
    seed: u64,
) -> Result<(bool, String, f64)> {
    let ctx = ObjectiveContext::trigonometric(frequency)?;
    let n = 2 * frequency + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_sigma = f64::INFINITY;
    for _ in 0..count {
        let mut pts = vec![0.0];
        pts.extend((1..n).map(|_| rng.random_range(0.0..2.0 * PI)));
        let s = ctx.sigma_symmetric(&PointSet::new(1, pts)?)?.sigma;
        min_sigma = min_sigma.min(s);
    }
    Ok((
        min_sigma >= 1.0 - 1e-9,
        format!("{n} points, {count} random sets: min sigma {min_sigma:.12}"),
        min_sigma,
    ))
}

/// A four-point rule on `ℙ₂` with both endpoints fixed: the optimized
/// interior nodes are the roots of `P₃'`.
pub fn lobatto_recovery(cfg: &OptConfig) -> Result<(bool, String)> {
    let (rule, interior) = lobatto_rule(cfg)?;
    let oracle = legendre_derivative_roots(3);
    let dev = interior
        .iter()
        .zip(&oracle)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let passed = interior.len() == oracle.len() && dev <= 1e-6 && rule.sigma <= 1e-8;
    Ok((
        passed,
        format!(
            "interior nodes {interior:?}, deviation {dev:.2e}, sigma {:.2e}",
            rule.sigma
        ),
    ))
}

/// Builds the endpoint-constrained four-point rule; returns it with its
/// sorted interior nodes.
pub fn lobatto_rule(cfg: &OptConfig) -> Result<(BilinearRule, Vec<f64>)> {
    let ip = InnerProductSpec::l2(Domain::unit_interval());
    let ctx = ObjectiveContext::polynomial(2, ip)?.with_general(
        PointSet::new(1, vec![-1.0, 1.0])?,
        2,
        true,
    )?;
    let res = minimize(&ctx, cfg)?;
    let rule = BilinearRule::from_points(&ctx, &res.best_x, res.best_y.as_ref())?;
    let mut interior: Vec<f64> = res.best_x.coords()[2..].to_vec();
    interior.sort_by(f64::total_cmp);
    Ok((rule, interior))
}

/// The optimizer's best σ on the circle with `2 frequency + 1` points.
pub fn circle_optimum(frequency: usize, cfg: &OptConfig) -> Result<(bool, String)> {
    let ctx = ObjectiveContext::trigonometric(frequency)?;
    let res = minimize(&ctx, cfg)?;
    Ok((
        res.best_sigma <= 1.0 + 1e-9,
        format!("{} points: best sigma {:.12}", ctx.k(), res.best_sigma),
    ))
}

/// Gauss recovery for `ℙ_1..ℙ_9`, trapezoid optimality, the circle
/// lower bound and optimum for 3, 5 and 7 points, and Lobatto recovery.
pub fn theorem_suite(cfg: &OptConfig) -> TheoremReport {
    let mut checks = Vec::new();
    for n in 1..=9 {
        checks.push(check(
            &format!("gauss recovery P{n}"),
            gauss_recovery(n + 1, cfg),
        ));
    }
    for freq in 1..=3 {
        let pts = 2 * freq + 1;
        checks.push(check(
            &format!("trapezoid optimality {pts} points"),
            trapezoid_optimality(freq),
        ));
        checks.push(check(
            &format!("circle lower bound {pts} points"),
            circle_lower_bound(freq, 100, cfg.seed).map(|(p, d, _)| (p, d)),
        ));
        checks.push(check(
            &format!("circle optimum {pts} points"),
            circle_optimum(freq, cfg),
        ));
    }
    checks.push(check("lobatto recovery", lobatto_recovery(cfg)));
    TheoremReport { checks }
}

/// Worst `|Q(f, g) − ⟨f, g⟩|` over random unit-coefficient pairs in the
/// rule's space.
pub fn exactness_witness(rule: &BilinearRule, pairs: usize, seed: u64) -> Result<f64> {
    let bases = rule.bases()?;
    let m = rule.reference_gram(&bases)?;
    let fx = bases.f0.eval_unchecked(&rule.points_x);
    let fy = bases.f0.eval_unchecked(&rule.points_y);
    let k = bases.f0.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let a = nalgebra::DVector::from_vec(unit_coefficients(&mut rng, k));
        let b = nalgebra::DVector::from_vec(unit_coefficients(&mut rng, k));
        let f_vals: Vec<f64> = (&fx * &a).iter().copied().collect();
        let g_vals: Vec<f64> = (&fy * &b).iter().copied().collect();
        let q = crate::rules::apply(rule, &f_vals, &g_vals)?;
        worst = worst.max((q - a.dot(&(&m * &b))).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_kinds() {
        assert_eq!(
            "pprime6".parse::<EnsembleKind>().unwrap(),
            EnsembleKind::Pprime(6)
        );
        assert_eq!("TP".parse::<EnsembleKind>().unwrap(), EnsembleKind::Tp);
        assert!("q3".parse::<EnsembleKind>().is_err());
        assert_eq!(EnsembleKind::Pprime(5).to_string(), "pprime5");
    }

    #[test]
    fn pprime_samples_unit_norm() {
        let e = FunctionEnsemble::new(EnsembleKind::Pprime(6), Domain::Triangle, 4);
        for s in e.sample(20).unwrap() {
            let SampleFunction::Poly(p) = s else { panic!() };
            let n: f64 = p.coeffs.iter().map(|v| v * v).sum();
            assert!((n - 1.0).abs() < 1e-12);
            assert_eq!(p.coeffs.len(), 28);
        }
    }

    #[test]
    fn parameter_vectors_on_unit_circle() {
        let e = FunctionEnsemble::new(EnsembleKind::Tp, Domain::Triangle, 1);
        for s in e.sample(50).unwrap() {
            let SampleFunction::Tp { a, b, .. } = s else {
                panic!()
            };
            assert!((a[0].hypot(a[1]) - 1.0).abs() < 1e-14);
            assert!((b[0].hypot(b[1]) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn substitutions() {
        let c = SampleFunction::Rational { a: [1.0, 0.0] };
        assert!((c.eval(&[0.5, 0.3]) - 1.0 / 1.25).abs() < 1e-15);
        let basis = Arc::new(orthonormal_poly(Domain::Triangle, None, 0).unwrap());
        let konst = basis.eval(&[0.0, 0.0])[0];
        let tp = SampleFunction::Tp {
            a: [0.0, 1.0],
            b: [1.0, 0.0],
            p: PolySample {
                coeffs: vec![1.0],
                basis,
            },
        };
        let (x, y) = (-0.4, 0.2);
        assert!((tp.eval(&[x, y]) - y.exp() * (4.0 * x).cos() * konst).abs() < 1e-14);
    }

    #[test]
    fn sampling_is_deterministic() {
        let e = FunctionEnsemble::new(EnsembleKind::C, Domain::Disk, 77);
        let a = e.sample(5).unwrap();
        let b = e.sample(5).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.eval(&[0.1, 0.2]), y.eval(&[0.1, 0.2]));
        }
        assert!(
            FunctionEnsemble::new(EnsembleKind::C, Domain::unit_interval(), 0)
                .sample(1)
                .is_err()
        );
    }

    #[test]
    fn derivative_roots_of_p3() {
        let r = legendre_derivative_roots(3);
        assert_eq!(r.len(), 2);
        assert!((r[0] + 1.0 / 5f64.sqrt()).abs() < 1e-14);
        assert!((r[1] - 1.0 / 5f64.sqrt()).abs() < 1e-14);
        assert_eq!(legendre_derivative_roots(6).len(), 5);
    }

    #[test]
    fn trapezoid_checks() {
        for k in 1..4 {
            assert!(trapezoid_optimality(k).unwrap().0);
        }
        assert!(circle_lower_bound(1, 50, 3).unwrap().0);
    }

    #[test]
    fn table_row_format() {
        let row = TableRow {
            n: 2,
            k: 6,
            sigma: Some(0.303725),
            kappa_inf: Some(6.29185),
            error: None,
        };
        assert_eq!(row.to_string(), "2 6 0.30373 6.29185e+0");
        let back: TableRow = row.to_string().parse().unwrap();
        assert_eq!(back.n, 2);
        assert_eq!(back.kappa_inf, Some(6.29185));
        assert_eq!(format_sci(1.15455e1), "1.15455e+1");
        assert_eq!(format_sci(3.99e-15), "3.99000e-15");
        let failed = TableRow {
            n: 1,
            k: 3,
            sigma: None,
            kappa_inf: None,
            error: Some("singular matrix".into()),
        };
        assert_eq!(failed.to_string().parse::<TableRow>().unwrap(), failed);
    }
}
