//! Exactness constraints, weight matrices and the σ objectives.
//!
//! A rule `Q(f, g) = f(x)ᵀ W g(y)` is exact on an orthonormal pair when
//! `F(x)ᵀ W G(y) = M`. Its quality σ is the largest singular value of the
//! coupling `F(x)ᵀ W Γ(y)` against the next orthogonal slice `𝒢₁`; in the
//! square symmetric case this is `σ₁(F⁻¹Γ)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{poly_dim, poly_space, trig_space, BasisSet, Domain, PointSet};
use crate::error::{Error, Result};
use crate::linalg::{
    inverse_with_condition, lambda_max_sym, max_abs, pinv_full_rank, sigma_max, SINGULAR_CONDITION,
};
use crate::optimizer::{combine_difference, finite_diff_gradient, PENALTY};
use crate::refquad::{gram_matrix, orthonormalize, InnerProductSpec, DEFAULT_H1_GAUSS_POINTS};

/// Largest cross inner product allowed between `𝓕₀` and `𝒢₁`.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

/// Which function space a context is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    /// `ℙ_n`, with `𝒢₁ = ℙ_{n+1} ∩ ℙ_n^⊥`.
    Polynomial { degree: usize },
    /// `T_k`, with `𝒢₁` spanned by `sin((k+1)x), cos((k+1)x)`.
    Trigonometric { frequency: usize },
}

/// Non-square rules: `fixed` points are held in place, `free` points and the
/// `m × m` matrix `Y` are optimized.
#[derive(Debug, Clone)]
pub struct GeneralMode {
    pub fixed: PointSet,
    pub free: usize,
    /// Adds `‖offdiag W(Y)‖²_F` to the loss, selecting diagonal rules among
    /// the otherwise degenerate family of minimizers.
    pub diagonal_penalty: bool,
}

#[derive(Debug, Clone)]
pub enum Mode {
    Symmetric,
    General(GeneralMode),
}

/// Everything the σ objective needs: the joint orthonormal basis of
/// `𝓕₀ ⊕ 𝒢₁`, the inner product and the optimization mode.
#[derive(Debug, Clone)]
pub struct ObjectiveContext {
    space: Space,
    ip: InnerProductSpec,
    joint: BasisSet,
    k: usize,
    p: usize,
    gram: DMatrix<f64>,
    mode: Mode,
    orthogonality_defect: f64,
}

/// `σ₁(F⁻¹Γ)` with the matrices it came from.
#[derive(Debug, Clone)]
pub struct SymmetricEval {
    pub sigma: f64,
    pub f: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
}

impl ObjectiveContext {
    /// `𝓕₀ = ℙ_n` on `ip.domain`, orthonormalized jointly with `ℙ_{n+1}`.
    pub fn polynomial(n: usize, ip: InnerProductSpec) -> Result<Self> {
        let domain = ip.domain;
        let raw = poly_space(domain, n + 1)?;
        let rule = ip.gram_rule(n + 1, DEFAULT_H1_GAUSS_POINTS)?;
        let joint = orthonormalize(&raw, &ip, &rule)?;
        let k = poly_dim(domain.dim(), n);
        Self::assemble(Space::Polynomial { degree: n }, ip, joint, k)
    }

    /// `𝓕₀ = T_k` on the circle (`2k + 1` functions).
    pub fn trigonometric(frequency: usize) -> Result<Self> {
        let ip = InnerProductSpec::l2(Domain::Circle);
        let raw = trig_space(frequency + 1);
        let width = raw.len();
        let joint = raw.with_transform(&DMatrix::identity(width, width), ip.clone());
        Self::assemble(
            Space::Trigonometric { frequency },
            ip,
            joint,
            2 * frequency + 1,
        )
    }

    /// Context for a stored space descriptor.
    pub fn for_space(space: Space, ip: InnerProductSpec) -> Result<Self> {
        match space {
            Space::Polynomial { degree } => Self::polynomial(degree, ip),
            Space::Trigonometric { frequency } => {
                if ip != InnerProductSpec::l2(Domain::Circle) {
                    return Err(Error::Unsupported(format!(
                        "trigonometric rules under {ip} on {}",
                        ip.domain
                    )));
                }
                Self::trigonometric(frequency)
            }
        }
    }

    fn assemble(space: Space, ip: InnerProductSpec, joint: BasisSet, k: usize) -> Result<Self> {
        let p = joint.len() - k;
        let f0 = joint.select(0..k)?;
        let g1 = joint.select(k..k + p)?;
        let degree = match space {
            Space::Polynomial { degree } => degree + 1,
            Space::Trigonometric { frequency } => frequency + 1,
        };
        let rule = ip.gram_rule(degree, DEFAULT_H1_GAUSS_POINTS)?;
        let cross = gram_matrix(&f0, &g1, &ip, &rule)?;
        let orthogonality_defect = max_abs(&cross.entries);
        if orthogonality_defect > ORTHOGONALITY_TOL {
            return Err(Error::Construction(format!(
                "minimization space is not orthogonal to the exact space (defect {orthogonality_defect:e})"
            )));
        }
        Ok(Self {
            space,
            ip,
            joint,
            k,
            p,
            gram: DMatrix::identity(k, k),
            mode: Mode::Symmetric,
            orthogonality_defect,
        })
    }

    /// Switches to the non-square mode with `fixed` points and `free` optimized ones.
    pub fn with_general(
        mut self,
        fixed: PointSet,
        free: usize,
        diagonal_penalty: bool,
    ) -> Result<Self> {
        if fixed.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: fixed.dim(),
            });
        }
        if fixed.len() + free < self.k {
            return Err(Error::Parameter(format!(
                "{} points cannot be exact on a space of dimension {}",
                fixed.len() + free,
                self.k
            )));
        }
        self.mode = Mode::General(GeneralMode {
            fixed,
            free,
            diagonal_penalty,
        });
        Ok(self)
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn ip(&self) -> &InnerProductSpec {
        &self.ip
    }

    pub fn domain(&self) -> Domain {
        self.ip.domain
    }

    pub fn dim(&self) -> usize {
        self.ip.domain.dim()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn mode(&self) -> &Mode {
        &self.mode
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn orthogonality_defect(&self) -> f64 {
        self.orthogonality_defect
    }

    pub fn basis_f0(&self) -> BasisSet {
        self.joint.select(0..self.k).expect("k <= joint width")
    }

    pub fn basis_g1(&self) -> BasisSet {
        self.joint
            .select(self.k..self.k + self.p)
            .expect("joint width")
    }

    /// Number of rule points.
    pub fn m(&self) -> usize {
        match &self.mode {
            Mode::Symmetric => self.k,
            Mode::General(g) => g.fixed.len() + g.free,
        }
    }

    /// Length of the optimizer's parameter vector.
    pub fn n_params(&self) -> usize {
        match &self.mode {
            Mode::Symmetric => self.k * self.dim(),
            Mode::General(g) => {
                let m = self.m();
                g.free * self.dim() + m * m
            }
        }
    }

    /// Rule points encoded by `theta` (fixed points first in general mode).
    pub fn points_from_params(&self, theta: &[f64]) -> PointSet {
        let d = self.dim();
        match &self.mode {
            Mode::Symmetric => PointSet::new(d, theta.to_vec()).expect("k * d coordinates"),
            Mode::General(g) => {
                let mut coords = g.fixed.coords().to_vec();
                coords.extend_from_slice(&theta[..g.free * d]);
                PointSet::new(d, coords).expect("m * d coordinates")
            }
        }
    }

    /// The free matrix encoded by `theta` (general mode only).
    pub fn y_from_params(&self, theta: &[f64]) -> Option<DMatrix<f64>> {
        match &self.mode {
            Mode::Symmetric => None,
            Mode::General(g) => {
                let m = self.m();
                let start = g.free * self.dim();
                Some(DMatrix::from_row_slice(m, m, &theta[start..start + m * m]))
            }
        }
    }

    /// `(F, Γ)` at `points`, without a domain check.
    pub fn eval_pair(&self, points: &PointSet) -> (DMatrix<f64>, DMatrix<f64>) {
        let rows = self.joint.eval_unchecked(points);
        let f = rows.columns(0, self.k).into_owned();
        let gamma = rows.columns(self.k, self.p).into_owned();
        (f, gamma)
    }

    /// `σ₁(F(x)⁻¹Γ(x))` for `|x| = k`; a singular `F` gives the penalty value.
    pub fn sigma_symmetric(&self, points: &PointSet) -> Result<SymmetricEval> {
        if points.len() != self.k || points.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                actual: points.len(),
            });
        }
        let (f, gamma) = self.eval_pair(points);
        let sigma = match inverse_with_condition(&f) {
            Ok((inv, _)) => {
                let s = sigma_max(&(inv * &gamma));
                if s.is_finite() {
                    s
                } else {
                    2.0 * PENALTY
                }
            }
            Err(_) => PENALTY,
        };
        Ok(SymmetricEval { sigma, f, gamma })
    }

    /// `σ₁(F⁺Γ + FᵀY(I − FF⁺)Γ)` for `m ≥ k` points; rank deficiency gives
    /// the penalty value.
    pub fn sigma_general(&self, points: &PointSet, y: &DMatrix<f64>) -> Result<f64> {
        let m = points.len();
        if m < self.k || y.nrows() != m || y.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: y.nrows(),
            });
        }
        let (f, gamma) = self.eval_pair(points);
        Ok(general_parts(&f, &gamma, y).map_or(PENALTY, |(b, _)| sigma_max(&b)))
    }

    /// The quantity the optimizer minimizes: `σ²` (plus the diagonal
    /// penalty in general mode).
    pub fn loss(&self, theta: &[f64]) -> f64 {
        match &self.mode {
            Mode::Symmetric => self.sym_state(theta).map_or_else(|v| v, |s| s.loss),
            Mode::General(g) => {
                let points = self.points_from_params(theta);
                let y = self.y_from_params(theta).expect("general mode");
                let (f, gamma) = self.eval_pair(&points);
                let Some((b, w)) = general_parts(&f, &gamma, &y) else {
                    return PENALTY;
                };
                let s = sigma_max(&b);
                let mut loss = s * s;
                if g.diagonal_penalty {
                    for i in 0..w.nrows() {
                        for j in 0..w.ncols() {
                            if i != j {
                                loss += w[(i, j)] * w[(i, j)];
                            }
                        }
                    }
                }
                if loss.is_finite() {
                    loss
                } else {
                    2.0 * PENALTY
                }
            }
        }
    }

    /// σ at `theta` (no diagonal penalty), computed by SVD.
    pub fn sigma_at(&self, theta: &[f64]) -> f64 {
        let points = self.points_from_params(theta);
        match &self.mode {
            Mode::Symmetric => self.sigma_symmetric(&points).map_or(PENALTY, |e| e.sigma),
            Mode::General(_) => {
                let y = self.y_from_params(theta).expect("general mode");
                self.sigma_general(&points, &y).unwrap_or(PENALTY)
            }
        }
    }

    /// Central-difference gradient of [`loss`](Self::loss), returning the
    /// loss at `theta`.
    ///
    /// In symmetric mode each probe moves one point, so `F` and `Γ` change
    /// in a single row and `F⁻¹Γ` is updated by a rank-one correction
    /// instead of being recomputed.
    pub fn loss_gradient(&self, theta: &[f64], h: f64, grad: &mut [f64]) -> f64 {
        if !matches!(self.mode, Mode::Symmetric) {
            return finite_diff_gradient(|t| self.loss(t), theta, h, grad);
        }
        let state = match self.sym_state(theta) {
            Ok(s) => s,
            Err(_) => return finite_diff_gradient(|t| self.loss(t), theta, h, grad),
        };
        let d = self.dim();
        let width = self.k + self.p;
        let mut q = vec![0.0; d];
        let mut row = vec![0.0; width];
        let mut work = ProbeWork::new(self.k, self.p);
        for (idx, g) in grad.iter_mut().enumerate() {
            let i = idx / d;
            let step = h * theta[idx].abs().max(1.0);
            q.copy_from_slice(&theta[i * d..(i + 1) * d]);
            let c = idx % d;
            q[c] = theta[idx] + step;
            self.joint.fill(&q, width, &mut row);
            let fp = state.probe(i, &row, self.k, &mut work);
            q[c] = theta[idx] - step;
            self.joint.fill(&q, width, &mut row);
            let fm = state.probe(i, &row, self.k, &mut work);
            *g = combine_difference(state.loss, fp, fm, step);
        }
        state.loss
    }

    fn sym_state(&self, theta: &[f64]) -> std::result::Result<SymState, f64> {
        let d = self.dim();
        let (k, p) = (self.k, self.p);
        let width = k + p;
        let mut rows = DMatrix::zeros(k, width);
        let mut buf = vec![0.0; width];
        for i in 0..k {
            self.joint.fill(&theta[i * d..(i + 1) * d], width, &mut buf);
            for (j, v) in buf.iter().enumerate() {
                rows[(i, j)] = *v;
            }
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(2.0 * PENALTY);
        }
        let f = rows.columns(0, k).into_owned();
        let (finv, cond) = inverse_with_condition(&f).map_err(|_| PENALTY)?;
        let a = &finv * rows.columns(k, p);
        let ata = a.transpose() * &a;
        let loss = lambda_max_sym(&ata);
        if !loss.is_finite() {
            return Err(2.0 * PENALTY);
        }
        Ok(SymState {
            rows,
            finv,
            a,
            ata,
            cond,
            loss,
        })
    }

    /// Canonical form of `theta`: points sorted lexicographically (free
    /// points only in general mode, with `Y` permuted to match).
    pub fn canonicalize(&self, theta: &mut [f64]) {
        let d = self.dim();
        match &self.mode {
            Mode::Symmetric => {
                let sorted = PointSet::new(d, theta.to_vec())
                    .expect("k * d")
                    .sorted_lex();
                theta.copy_from_slice(sorted.coords());
            }
            Mode::General(g) => {
                let nf = g.fixed.len();
                let m = self.m();
                let mut order: Vec<usize> = (0..g.free).collect();
                order.sort_by(|&a, &b| {
                    crate::basis::lex_cmp(&theta[a * d..(a + 1) * d], &theta[b * d..(b + 1) * d])
                });
                let old = theta.to_vec();
                for (new, &o) in order.iter().enumerate() {
                    theta[new * d..(new + 1) * d].copy_from_slice(&old[o * d..(o + 1) * d]);
                }
                // point permutation on all m points
                let perm: Vec<usize> = (0..nf).chain(order.iter().map(|o| nf + o)).collect();
                let ys = g.free * d;
                for r in 0..m {
                    for c in 0..m {
                        theta[ys + r * m + c] = old[ys + perm[r] * m + perm[c]];
                    }
                }
            }
        }
    }

    /// Uniform random start: points in the domain, `Y = 0`.
    pub fn random_start<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.dim();
        let mut theta = vec![0.0; self.n_params()];
        let npts = match &self.mode {
            Mode::Symmetric => self.k,
            Mode::General(g) => g.free,
        };
        for i in 0..npts {
            self.domain()
                .sample_point(rng, &mut theta[i * d..(i + 1) * d]);
        }
        theta
    }
}

struct SymState {
    rows: DMatrix<f64>,
    finv: DMatrix<f64>,
    a: DMatrix<f64>,
    ata: DMatrix<f64>,
    cond: f64,
    loss: f64,
}

struct ProbeWork {
    u: DVector<f64>,
    v: DVector<f64>,
    w: DVector<f64>,
    t: DVector<f64>,
    ata: DMatrix<f64>,
}

impl ProbeWork {
    fn new(k: usize, p: usize) -> Self {
        Self {
            u: DVector::zeros(k),
            v: DVector::zeros(p),
            w: DVector::zeros(p),
            t: DVector::zeros(p),
            ata: DMatrix::zeros(p, p),
        }
    }
}

impl SymState {
    /// Loss after replacing row `i` of `[F Γ]` by `row`.
    ///
    /// With `c = F⁻¹eᵢ` and row changes `u`, `v`, Sherman–Morrison gives
    /// `A' = A + c wᵀ` where `w = (v − Aᵀu) / (1 + uᵀc)`.
    fn probe(&self, i: usize, row: &[f64], k: usize, work: &mut ProbeWork) -> f64 {
        let p = self.a.ncols();
        for j in 0..k {
            work.u[j] = row[j] - self.rows[(i, j)];
        }
        for j in 0..p {
            work.v[j] = row[k + j] - self.rows[(i, k + j)];
        }
        if work.u.iter().chain(work.v.iter()).any(|x| !x.is_finite()) {
            return 2.0 * PENALTY;
        }
        let c = self.finv.column(i);
        let denom = 1.0 + work.u.dot(&c);
        if !(denom.abs() * SINGULAR_CONDITION > self.cond) {
            return PENALTY;
        }
        work.w.gemv_tr(-1.0 / denom, &self.a, &work.u, 0.0);
        work.w.axpy(1.0 / denom, &work.v, 1.0);
        work.t.gemv_tr(1.0, &self.a, &c, 0.0);
        let cc = c.dot(&c);
        work.ata.copy_from(&self.ata);
        for r in 0..p {
            for s in 0..p {
                work.ata[(r, s)] +=
                    work.t[r] * work.w[s] + work.w[r] * work.t[s] + cc * work.w[r] * work.w[s];
            }
        }
        let loss = lambda_max_sym(&work.ata);
        if loss.is_finite() {
            loss
        } else {
            2.0 * PENALTY
        }
    }
}

// (F⁺Γ + FᵀY(I − FF⁺)Γ, W(Y)) for M = I, or None on rank deficiency
fn general_parts(
    f: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let fp = pinv_full_rank(f).ok()?;
    let fpg = &fp * gamma;
    let resid = gamma - f * &fpg;
    let b = &fpg + f.transpose() * y * resid;
    let proj = f * &fp;
    let w = fp.transpose() * &fp + y - &proj * y * &proj;
    Some((b, w))
}

/// `W = (Fᵀ)⁻¹ M G⁻¹` for square invertible `F`, `G`.
pub fn w_invertible(f: &DMatrix<f64>, g: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (finv, _) = inverse_with_condition(f)?;
    let (ginv, _) = inverse_with_condition(g)?;
    let w = finv.transpose() * m * ginv;
    check_constraint(f, &w, g, m)?;
    Ok(w)
}

/// `W = (Fᵀ)⁺ M G⁺ + Y − F F⁺ Y G G⁺`, exact for every `Y`.
pub fn w_general(
    f: &DMatrix<f64>,
    g: &DMatrix<f64>,
    m: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if y.nrows() != f.nrows() || y.ncols() != g.nrows() {
        return Err(Error::DimensionMismatch {
            expected: f.nrows(),
            actual: y.nrows(),
        });
    }
    let fp = pinv_full_rank(f)?;
    let gp = pinv_full_rank(g)?;
    let w = fp.transpose() * m * &gp + y - f * &fp * y * g * &gp;
    Ok(w)
}

fn check_constraint(
    f: &DMatrix<f64>,
    w: &DMatrix<f64>,
    g: &DMatrix<f64>,
    m: &DMatrix<f64>,
) -> Result<()> {
    let residual = max_abs(&(f.transpose() * w * g - m));
    let tolerance = 1e-10 * max_abs(m).max(1.0);
    if residual > tolerance {
        return Err(Error::ExactnessResidual {
            residual,
            tolerance,
        });
    }
    Ok(())
}

/// `σ₁(FᵀWΓ)`: the coupling of a rule against `𝒢₁`.
pub fn sigma_of_weights(f: &DMatrix<f64>, w: &DMatrix<f64>, gamma: &DMatrix<f64>) -> Result<f64> {
    if f.nrows() != w.nrows() || w.ncols() != gamma.nrows() {
        return Err(Error::DimensionMismatch {
            expected: w.nrows(),
            actual: f.nrows(),
        });
    }
    Ok(sigma_max(&(f.transpose() * w * gamma)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::is_penalty;
    use crate::refquad::gauss_legendre;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn interval_ctx(n: usize) -> ObjectiveContext {
        ObjectiveContext::polynomial(n, InnerProductSpec::l2(Domain::unit_interval())).unwrap()
    }

    #[test]
    fn triangle_constant_space_has_zero_optimum() {
        let ctx = ObjectiveContext::polynomial(0, InnerProductSpec::l2(Domain::Triangle)).unwrap();
        assert_eq!((ctx.k(), ctx.p()), (1, 2));
        // degree-1 orthonormal functions vanish together at the centroid
        let c = PointSet::new(2, vec![-1.0 / 3.0, -1.0 / 3.0]).unwrap();
        assert!(ctx.sigma_symmetric(&c).unwrap().sigma < 1e-14);
    }

    #[test]
    fn gauss_points_zero_sigma() {
        for n in 1..8 {
            let ctx = interval_ctx(n - 1);
            let g = gauss_legendre(n, -1.0, 1.0).unwrap();
            assert!(ctx.sigma_symmetric(&g.nodes).unwrap().sigma < 1e-12);
        }
    }

    #[test]
    fn equispaced_circle_sigma_one() {
        for k in 1..4 {
            let ctx = ObjectiveContext::trigonometric(k).unwrap();
            let n = 2 * k + 1;
            let pts: Vec<f64> = (0..n)
                .map(|j| 2.0 * std::f64::consts::PI * j as f64 / n as f64)
                .collect();
            let s = ctx
                .sigma_symmetric(&PointSet::new(1, pts).unwrap())
                .unwrap()
                .sigma;
            assert!((s - 1.0).abs() < 1e-12, "k={k}: {s}");
        }
    }

    #[test]
    fn gauss_weights_from_w_invertible() {
        let ctx = interval_ctx(4);
        let g = gauss_legendre(5, -1.0, 1.0).unwrap();
        let (f, _) = ctx.eval_pair(&g.nodes);
        let w = w_invertible(&f, &f, ctx.gram()).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { g.weights[i] } else { 0.0 };
                assert!((w[(i, j)] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn w_invertible_identity() {
        let i = DMatrix::<f64>::identity(3, 3);
        assert_eq!(w_invertible(&i, &i, &i).unwrap(), i);
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            w_invertible(&s, &s, &DMatrix::identity(2, 2)),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn w_general_square_ignores_y() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let m = DMatrix::identity(4, 4);
        let w0 = w_general(&f, &f, &m, &DMatrix::zeros(4, 4)).unwrap();
        let y = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let w1 = w_general(&f, &f, &m, &y).unwrap();
        assert!((w0 - w1).abs().max() < 1e-11);
    }

    #[test]
    fn sigma_general_reduces_to_symmetric() {
        let ctx = ObjectiveContext::polynomial(1, InnerProductSpec::l2(Domain::Triangle)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let th = ctx.random_start(&mut rng);
            let pts = ctx.points_from_params(&th);
            let y = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
            let a = ctx.sigma_symmetric(&pts).unwrap().sigma;
            let b = ctx.sigma_general(&pts, &y).unwrap();
            assert!((a - b).abs() < 1e-10 * (1.0 + a));
        }
    }

    #[test]
    fn rank_one_gradient_matches_generic() {
        for ip in [
            InnerProductSpec::l2(Domain::Triangle),
            InnerProductSpec::l2(Domain::Disk),
        ] {
            let ctx = ObjectiveContext::polynomial(2, ip).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let th = ctx.random_start(&mut rng);
            let mut fast = vec![0.0; th.len()];
            let mut slow = vec![0.0; th.len()];
            let l1 = ctx.loss_gradient(&th, 1e-6, &mut fast);
            let l2 = finite_diff_gradient(|t| ctx.loss(t), &th, 1e-6, &mut slow);
            assert_eq!(l1, l2);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() <= 1e-5 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn loss_is_sigma_squared() {
        let ctx = ObjectiveContext::polynomial(3, InnerProductSpec::l2(Domain::Square)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let th = ctx.random_start(&mut rng);
        let s = ctx.sigma_at(&th);
        assert!((ctx.loss(&th).sqrt() - s).abs() < 1e-10 * s.max(1.0));
    }

    #[test]
    fn singular_configuration_is_penalized() {
        let ctx = interval_ctx(2);
        let th = [0.3, 0.3, -0.5];
        assert_eq!(ctx.loss(&th), PENALTY);
        assert_eq!(ctx.sigma_at(&th), PENALTY);
        assert!(is_penalty(ctx.loss(&th)));
    }

    #[test]
    fn canonicalize_general_permutes_y() {
        let ctx = interval_ctx(2)
            .with_general(PointSet::new(1, vec![-1.0, 1.0]).unwrap(), 2, true)
            .unwrap();
        let mut th = vec![0.0; ctx.n_params()];
        th[0] = 0.5;
        th[1] = -0.5;
        for (i, v) in th[2..].iter_mut().enumerate() {
            *v = i as f64;
        }
        let before = ctx.loss(&th);
        ctx.canonicalize(&mut th);
        assert_eq!(&th[..2], &[-0.5, 0.5]);
        assert!((ctx.loss(&th) - before).abs() <= 1e-12 * before.max(1.0));
    }

    #[test]
    fn orthogonality_defect_small() {
        for d in [Domain::Triangle, Domain::Square, Domain::Disk] {
            let ctx = ObjectiveContext::polynomial(3, InnerProductSpec::l2(d)).unwrap();
            assert!(ctx.orthogonality_defect() < 1e-12);
            assert_eq!(ctx.p(), 5);
        }
    }
}
