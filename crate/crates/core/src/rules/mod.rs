//! Bilinear quadrature rules: building, applying, projecting and
//! transporting them under affine maps.

mod io;

pub use io::{load_rule, read_rule_unverified, save_rule, to_text, Integrity, RULE_FORMAT_VERSION};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::affine::AffineMap;
use crate::basis::{BasisSet, Domain, PointSet};
use crate::error::{Error, Result};
use crate::linalg::{condition_inf, inverse_with_condition, max_abs};
use crate::objective::{sigma_of_weights, w_general, w_invertible, Mode, ObjectiveContext, Space};
use crate::optimizer::{minimize, OptConfig};
use crate::refquad::{gram_matrix, InnerProductSpec, DEFAULT_H1_GAUSS_POINTS};

/// Largest `‖FᵀWG − M‖_max` a stored rule may have.
pub const EXACTNESS_TOL: f64 = 1e-9;

/// Where a rule came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub crate_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_starts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_index: Option<usize>,
    /// Indices of points outside the closed domain.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outside_points: Vec<usize>,
    /// Exactness residual against a Gram matrix recomputed on the image of
    /// a change of variables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pushforward_residual: Option<f64>,
}

impl Provenance {
    fn local() -> Self {
        Self {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            ..Self::default()
        }
    }
}

/// `Q(f, g) = f(x)ᵀ W g(y)`, exact on `𝓕₀ × 𝓕₀`.
#[derive(Debug, Clone)]
pub struct BilinearRule {
    pub domain: Domain,
    /// Inner product on the reference domain.
    pub ip: InnerProductSpec,
    pub space: Space,
    /// Dimension of `𝓕₀`.
    pub k: usize,
    /// Affine map from the reference domain, for transported rules.
    pub frame: Option<AffineMap>,
    pub points_x: PointSet,
    pub points_y: PointSet,
    pub w: DMatrix<f64>,
    /// `(W₀, W₁)`: the L² part and the derivative part of an H¹ rule.
    pub w_split: Option<(DMatrix<f64>, DMatrix<f64>)>,
    pub sigma: f64,
    /// `None` when `FᵀW` is not square.
    pub kappa_inf: Option<f64>,
    pub provenance: Provenance,
}

/// Orthonormal `𝓕₀` and `𝒢₁` bases of a rule, on its (possibly
/// transported) domain.
#[derive(Debug, Clone)]
pub struct RuleBases {
    pub f0: BasisSet,
    pub g1: BasisSet,
}

impl BilinearRule {
    /// Assembles a rule at given points: `W = F⁻ᵀ M F⁻¹` when `y` is
    /// `None`, otherwise the general `W(Y)` for `m ≥ k` points.
    pub fn from_points(
        ctx: &ObjectiveContext,
        points: &PointSet,
        y: Option<&DMatrix<f64>>,
    ) -> Result<Self> {
        let (f, gamma) = ctx.eval_pair(points);
        let m = ctx.gram();
        let w = match y {
            None => w_invertible(&f, &f, m).map_err(|e| match e {
                Error::Singular { condition } => Error::Construction(format!(
                    "evaluation matrix at the optimized points is singular (condition {condition:e})"
                )),
                other => other,
            })?,
            Some(y) => w_general(&f, &f, m, y)?,
        };
        let sigma = sigma_of_weights(&f, &w, &gamma)?;
        let proj = f.transpose() * &w;
        let kappa_inf = if proj.is_square() {
            Some(condition_inf(&proj)?)
        } else {
            None
        };
        let w_split = if ctx.ip().is_h1() {
            Some(h1_split(ctx, &f, &w)?)
        } else {
            None
        };
        Ok(Self {
            domain: ctx.domain(),
            ip: ctx.ip().clone(),
            space: ctx.space(),
            k: ctx.k(),
            frame: None,
            points_x: points.clone(),
            points_y: points.clone(),
            w,
            w_split,
            sigma,
            kappa_inf,
            provenance: Provenance::local(),
        })
    }

    /// Number of evaluation points.
    pub fn len(&self) -> usize {
        self.points_x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points_x.is_empty()
    }

    pub fn context(&self) -> Result<ObjectiveContext> {
        ObjectiveContext::for_space(self.space, self.ip.clone())
    }

    /// The inner product on the rule's actual domain.
    pub fn image_ip(&self) -> Result<InnerProductSpec> {
        match &self.frame {
            Some(f) => self.ip.transported(f),
            None => Ok(self.ip.clone()),
        }
    }

    pub fn bases(&self) -> Result<RuleBases> {
        let ctx = self.context()?;
        let (f0, g1) = (ctx.basis_f0(), ctx.basis_g1());
        Ok(match &self.frame {
            Some(map) => {
                let scale = map.det().abs().powf(-0.5);
                RuleBases {
                    f0: f0.transported(map, scale)?,
                    g1: g1.transported(map, scale)?,
                }
            }
            None => RuleBases { f0, g1 },
        })
    }

    /// Gram matrix of `𝓕₀` recomputed by a reference rule on the image.
    pub fn reference_gram(&self, bases: &RuleBases) -> Result<DMatrix<f64>> {
        let ip = self.image_ip()?;
        let degree = match self.space {
            Space::Polynomial { degree } => degree,
            Space::Trigonometric { frequency } => frequency,
        };
        let rule = ip.gram_rule(degree, DEFAULT_H1_GAUSS_POINTS)?;
        Ok(gram_matrix(&bases.f0, &bases.f0, &ip, &rule)?.entries)
    }

    /// `‖F(x)ᵀ W F(y) − M‖_max` with `M` recomputed from scratch.
    pub fn exactness_residual(&self) -> Result<f64> {
        let bases = self.bases()?;
        let m = self.reference_gram(&bases)?;
        let fx = bases.f0.eval_unchecked(&self.points_x);
        let fy = bases.f0.eval_unchecked(&self.points_y);
        if fx.nrows() != self.w.nrows() || fy.nrows() != self.w.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.w.nrows(),
                actual: fx.nrows(),
            });
        }
        Ok(max_abs(&(fx.transpose() * &self.w * fy - m)))
    }

    /// The k × m matrix `F(x)ᵀW` of the approximate projection.
    pub fn projection_matrix(&self) -> Result<DMatrix<f64>> {
        let bases = self.bases()?;
        Ok(bases.f0.eval_unchecked(&self.points_x).transpose() * &self.w)
    }

    fn check_invariants(&self) -> Result<()> {
        if self.w.nrows() != self.points_x.len() || self.w.ncols() != self.points_y.len() {
            return Err(Error::DimensionMismatch {
                expected: self.points_x.len(),
                actual: self.w.nrows(),
            });
        }
        if !(self.sigma >= 0.0) || self.kappa_inf.is_some_and(|k| !(k >= 1.0)) {
            return Err(Error::Format(
                "sigma must be non-negative and kappa_inf at least 1".into(),
            ));
        }
        if let Some((w0, w1)) = &self.w_split {
            let dev = max_abs(&(w0 + w1 - &self.w));
            if dev > 1e-13 * max_abs(&self.w).max(1.0) {
                return Err(Error::Format(format!("W0 + W1 differs from W by {dev:e}")));
            }
        }
        Ok(())
    }
}

// W₀ = F⁻ᵀ M_L² F⁻¹ (minimum norm, unique for square F); W₁ = W − W₀.
fn h1_split(
    ctx: &ObjectiveContext,
    f: &DMatrix<f64>,
    w: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let l2 = InnerProductSpec::l2(ctx.domain());
    let f0 = ctx.basis_f0();
    let rule = l2.gram_rule(
        f0.degrees().into_iter().max().unwrap_or(0),
        DEFAULT_H1_GAUSS_POINTS,
    )?;
    let m_l2 = gram_matrix(&f0, &f0, &l2, &rule)?.entries;
    let w0 = if f.is_square() {
        let (finv, _) = inverse_with_condition(f)?;
        finv.transpose() * m_l2 * finv
    } else {
        w_general(f, f, &m_l2, &DMatrix::zeros(f.nrows(), f.nrows()))?
    };
    let w1 = w - &w0;
    Ok((w0, w1))
}

/// Full pipeline: orthonormal bases, multistart optimization, `W`, σ and κ∞.
pub fn build_rule(
    domain: Domain,
    n: usize,
    ip: &InnerProductSpec,
    cfg: &OptConfig,
) -> Result<BilinearRule> {
    if ip.domain != domain {
        return Err(Error::Parameter(format!(
            "inner product is on {} but the rule is requested on {domain}",
            ip.domain
        )));
    }
    let ctx = match domain {
        Domain::Circle => {
            ObjectiveContext::for_space(Space::Trigonometric { frequency: n }, ip.clone())?
        }
        _ => ObjectiveContext::polynomial(n, ip.clone())?,
    };
    build_from_context(&ctx, cfg)
}

/// Optimizes and assembles a rule for an existing context.
pub fn build_from_context(ctx: &ObjectiveContext, cfg: &OptConfig) -> Result<BilinearRule> {
    let res = minimize(ctx, cfg)?;
    let y = match ctx.mode() {
        Mode::Symmetric => None,
        Mode::General(_) => res.best_y.clone(),
    };
    let mut rule = BilinearRule::from_points(ctx, &res.best_x, y.as_ref())?;
    rule.provenance = Provenance {
        seed: Some(cfg.seed),
        config_hash: Some(cfg.config_hash()),
        n_starts: Some(cfg.n_starts),
        start_index: Some(res.start_index),
        outside_points: res.outside.clone(),
        ..Provenance::local()
    };
    log::info!(
        "built {} rule on {}: k = {}, sigma = {:.5}, start {}",
        rule.ip,
        rule.domain,
        rule.k,
        rule.sigma,
        res.start_index
    );
    Ok(rule)
}

/// `f_valsᵀ W g_vals`.
pub fn apply(rule: &BilinearRule, f_vals: &[f64], g_vals: &[f64]) -> Result<f64> {
    if f_vals.len() != rule.w.nrows() {
        return Err(Error::DimensionMismatch {
            expected: rule.w.nrows(),
            actual: f_vals.len(),
        });
    }
    if g_vals.len() != rule.w.ncols() {
        return Err(Error::DimensionMismatch {
            expected: rule.w.ncols(),
            actual: g_vals.len(),
        });
    }
    let wg = &rule.w * DVector::from_column_slice(g_vals);
    Ok(f_vals.iter().zip(wg.iter()).map(|(a, b)| a * b).sum())
}

/// Coefficients `F(x)ᵀ W g(y)` of the approximate orthogonal projection.
pub fn project(rule: &BilinearRule, g_vals: &[f64]) -> Result<Vec<f64>> {
    Projector::new(rule)?.project(g_vals)
}

/// A rule's projection matrix, precomputed for repeated use.
#[derive(Debug, Clone)]
pub struct Projector {
    matrix: DMatrix<f64>,
}

impl Projector {
    pub fn new(rule: &BilinearRule) -> Result<Self> {
        Ok(Self {
            matrix: rule.projection_matrix()?,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn project(&self, g_vals: &[f64]) -> Result<Vec<f64>> {
        if g_vals.len() != self.matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.matrix.ncols(),
                actual: g_vals.len(),
            });
        }
        Ok((&self.matrix * DVector::from_column_slice(g_vals))
            .iter()
            .copied()
            .collect())
    }
}

/// `‖FᵀW‖∞ ‖(FᵀW)⁻¹‖∞`.
pub fn kappa_inf(rule: &BilinearRule) -> Result<f64> {
    let p = rule.projection_matrix()?;
    if !p.is_square() {
        return Err(Error::Unsupported(format!(
            "condition number of a non-square {}x{} projection matrix",
            p.nrows(),
            p.ncols()
        )));
    }
    condition_inf(&p)
}

/// `‖W‖∞ ‖W⁻¹‖∞`, the conditioning of the weight matrix alone. For H¹ rules
/// this differs from [`kappa_inf`] since `W` is not diagonal.
pub fn weight_condition(rule: &BilinearRule) -> Result<f64> {
    if !rule.w.is_square() {
        return Err(Error::Unsupported(
            "condition number of a non-square weight matrix".into(),
        ));
    }
    condition_inf(&rule.w)
}

/// `σ₁(F(x)ᵀ W Γ(y))` against an arbitrary basis of the minimization space.
pub fn sigma_of_rule(rule: &BilinearRule, g1: &BasisSet) -> Result<f64> {
    if g1.domain() != rule.domain {
        return Err(Error::Parameter(format!(
            "basis on {} does not match the rule on {}",
            g1.domain(),
            rule.domain
        )));
    }
    let bases = rule.bases()?;
    let f = bases.f0.eval_unchecked(&rule.points_x);
    let gamma = g1.eval_unchecked(&rule.points_y);
    sigma_of_weights(&f, &rule.w, &gamma)
}

fn transport_points(
    rule: &BilinearRule,
    map: &AffineMap,
) -> Result<(PointSet, PointSet, AffineMap)> {
    if map.dim() != rule.domain.dim() {
        return Err(Error::DimensionMismatch {
            expected: rule.domain.dim(),
            actual: map.dim(),
        });
    }
    let frame = match &rule.frame {
        Some(f) => AffineMap::new(map.linear() * f.linear(), map.apply(f.translation()))?,
        None => map.clone(),
    };
    Ok((rule.points_x.mapped(map), rule.points_y.mapped(map), frame))
}

fn finish_transport(mut out: BilinearRule) -> Result<BilinearRule> {
    let bases = out.bases()?;
    let f = bases.f0.eval_unchecked(&out.points_x);
    let gamma = bases.g1.eval_unchecked(&out.points_y);
    out.sigma = sigma_of_weights(&f, &out.w, &gamma)?;
    let proj = f.transpose() * &out.w;
    out.kappa_inf = if proj.is_square() {
        Some(condition_inf(&proj)?)
    } else {
        None
    };
    let residual = out.exactness_residual()?;
    out.provenance.pushforward_residual = Some(residual);
    Ok(out)
}

/// L² rule on `Φ(Ω)`: points mapped by `Φ`, `W̃ = |det DΦ| W`.
///
/// The transported basis is `f̃ = f∘Φ⁻¹ · |det DΦ|^{-1/2}`, which stays
/// orthonormal, so exactness `F̃ᵀW̃F̃ = I` holds with this scaling.
pub fn pushforward_l2(rule: &BilinearRule, map: &AffineMap) -> Result<BilinearRule> {
    if rule.ip.is_h1() {
        return Err(Error::Unsupported("pushforward_l2 on an H1 rule".into()));
    }
    let (px, py, frame) = transport_points(rule, map)?;
    let jac = map.det().abs();
    finish_transport(BilinearRule {
        frame: Some(frame),
        points_x: px,
        points_y: py,
        w: &rule.w * jac,
        w_split: None,
        ..rule.clone()
    })
}

/// H¹ rule on `Φ(Ω)` for a similarity `Φ = λU + b`:
/// `W̃ = |λ|^d W₀ + |λ|^(d-2) W₁` with the coefficient transported as `A∘Φ⁻¹`.
///
/// The residual against a recomputed image Gram matrix is stored in the
/// provenance.
pub fn pushforward_h1(rule: &BilinearRule, map: &AffineMap) -> Result<BilinearRule> {
    let Some((w0, w1)) = &rule.w_split else {
        return Err(Error::Unsupported(
            "pushforward_h1 needs an H1 rule with a W0/W1 split".into(),
        ));
    };
    let lambda = map.similarity_factor().ok_or_else(|| {
        Error::Unsupported("H1 change of variables requires a similarity map".into())
    })?;
    let d = rule.domain.dim() as i32;
    let (px, py, frame) = transport_points(rule, map)?;
    let w0t = w0 * lambda.powi(d);
    let w1t = w1 * lambda.powi(d - 2);
    finish_transport(BilinearRule {
        frame: Some(frame),
        points_x: px,
        points_y: py,
        w: &w0t + &w1t,
        w_split: Some((w0t, w1t)),
        ..rule.clone()
    })
}
