//! Classical reference quadratures, Gram matrices and Cholesky
//! orthonormalization.
//!
//! The reference rules here are the trusted integrators every other check
//! in the crate is measured against: Gauss–Legendre from the Golub–Welsch
//! eigenproblem, the periodic trapezoid rule, and tensor/collapsed products
//! of those on the square, triangle and disk.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::affine::AffineMap;
use crate::basis::{legendre_and_derivative, BasisSet, Domain, PointSet};
use crate::error::{Error, Result};

/// Number of Gauss points used for H¹ Gram matrices when the coefficient
/// is not polynomial.
pub const DEFAULT_H1_GAUSS_POINTS: usize = 40;

/// Relative pivot floor for the Cholesky factorization of a Gram matrix.
pub const CHOLESKY_PIVOT_TOL: f64 = 1e-12;

/// Diffusion coefficient `A(x)` of an H¹ inner product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coefficient {
    /// `A ≡ 1`.
    One,
    /// `A(x) = 1 + x²`.
    OnePlusXSquared,
    /// `A(x) = eˣ`.
    Exp,
}

impl Coefficient {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Coefficient::One => 1.0,
            Coefficient::OnePlusXSquared => 1.0 + x * x,
            Coefficient::Exp => x.exp(),
        }
    }

    /// Polynomial degree of `A`, if it is a polynomial.
    pub fn poly_degree(&self) -> Option<usize> {
        match self {
            Coefficient::One => Some(0),
            Coefficient::OnePlusXSquared => Some(2),
            Coefficient::Exp => None,
        }
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Coefficient::One => "one",
            Coefficient::OnePlusXSquared => "1+x^2",
            Coefficient::Exp => "exp",
        })
    }
}

impl FromStr for Coefficient {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(' ', "").as_str() {
            "one" | "1" | "unit" => Ok(Coefficient::One),
            "1+x^2" | "1+x2" | "quadratic" | "poly" => Ok(Coefficient::OnePlusXSquared),
            "exp" | "e^x" => Ok(Coefficient::Exp),
            other => Err(Error::Parameter(format!(
                "unknown H1 coefficient {other:?}"
            ))),
        }
    }
}

/// An L² or weighted H¹ inner product on a domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerProductSpec {
    pub domain: Domain,
    pub sobolev_order: u8,
    pub coefficient: Coefficient,
    /// Set when the inner product lives on the image of an affine map; the
    /// coefficient is then evaluated at the pre-image.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<AffineMap>,
}

impl InnerProductSpec {
    pub fn l2(domain: Domain) -> Self {
        Self {
            domain,
            sobolev_order: 0,
            coefficient: Coefficient::One,
            frame: None,
        }
    }

    pub fn h1(domain: Domain, coefficient: Coefficient) -> Result<Self> {
        if !matches!(domain, Domain::Interval { .. }) {
            return Err(Error::Unsupported(format!("H1 inner products on {domain}")));
        }
        Ok(Self {
            domain,
            sobolev_order: 1,
            coefficient,
            frame: None,
        })
    }

    pub fn is_h1(&self) -> bool {
        self.sobolev_order == 1
    }

    /// The same inner product on the image of `map`.
    pub fn transported(&self, map: &AffineMap) -> Result<Self> {
        let frame = match &self.frame {
            Some(f) => {
                let lin = map.linear() * f.linear();
                AffineMap::new(lin, map.apply(f.translation()))?
            }
            None => map.clone(),
        };
        Ok(Self {
            frame: Some(frame),
            ..self.clone()
        })
    }

    /// `A` at a point given in (possibly transported) coordinates.
    pub fn coefficient_at(&self, p: &[f64]) -> f64 {
        match &self.frame {
            Some(f) => self.coefficient.eval(f.inverse().apply(p)[0]),
            None => self.coefficient.eval(p[0]),
        }
    }

    /// Reference rule for Gram matrices of polynomial bases up to `degree`.
    pub fn gram_rule(&self, degree: usize, h1_points: usize) -> Result<ClassicalRule> {
        let rule = match (self.sobolev_order, self.coefficient.poly_degree()) {
            (0, _) => reference_rule(self.domain, 2 * degree)?,
            (_, Some(c)) => reference_rule(self.domain, 2 * degree + c)?,
            (_, None) => {
                let Domain::Interval { a, b } = self.domain else {
                    return Err(Error::Unsupported(format!("H1 on {}", self.domain)));
                };
                gauss_legendre(h1_points.max(degree + 1), a, b)?
            }
        };
        Ok(match &self.frame {
            Some(f) => rule.transported(f),
            None => rule,
        })
    }
}

impl fmt::Display for InnerProductSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_h1() {
            write!(f, "H1(A = {})", self.coefficient)
        } else {
            f.write_str("L2")
        }
    }
}

/// Nodes and scalar weights integrating a stated space exactly.
#[derive(Debug, Clone)]
pub struct ClassicalRule {
    pub domain: Domain,
    pub nodes: PointSet,
    pub weights: Vec<f64>,
    /// Polynomial degree (or trigonometric frequency) integrated exactly.
    pub exact_degree: usize,
}

impl ClassicalRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }

    /// Nodes pushed through `map`, weights scaled by `|det|`.
    pub fn transported(&self, map: &AffineMap) -> ClassicalRule {
        let jac = map.det().abs();
        ClassicalRule {
            domain: self.domain,
            nodes: self.nodes.mapped(map),
            weights: self.weights.iter().map(|w| w * jac).collect(),
            exact_degree: self.exact_degree,
        }
    }
}

/// Gauss–Legendre rule with `n` points on `(a, b)`.
///
/// Nodes are the eigenvalues of the symmetric tridiagonal Jacobi matrix of
/// multiplication by `x` on `P_{n-1}`, polished by a Newton step on `P_n`;
/// weights use `2 / ((1 - x²) P_n'(x)²)`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<ClassicalRule> {
    if n == 0 {
        return Err(Error::Parameter(
            "Gauss-Legendre needs at least one point".into(),
        ));
    }
    let domain = Domain::interval(a, b)?;
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let k = i as f64;
        let beta = k / (4.0 * k * k - 1.0).sqrt();
        jac[(i, i - 1)] = beta;
        jac[(i - 1, i)] = beta;
    }
    let eig = SymmetricEigen::try_new(jac, f64::EPSILON, 10_000).ok_or_else(|| {
        Error::Construction(format!(
            "tridiagonal eigensolver did not converge (n = {n})"
        ))
    })?;
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);
    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..2 {
            let (p, d) = legendre_and_derivative(n, *x);
            if d != 0.0 {
                *x -= p / d;
            }
        }
        let (_, d) = legendre_and_derivative(n, *x);
        weights.push(2.0 / ((1.0 - *x * *x) * d * d));
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let coords = nodes.iter().map(|x| mid + half * x).collect();
    Ok(ClassicalRule {
        domain,
        nodes: PointSet::new(1, coords)?,
        weights: weights.iter().map(|w| w * half).collect(),
        exact_degree: 2 * n - 1,
    })
}

/// The `n`-point periodic trapezoid rule on `[0, 2π)`, exact on `T_{n-1}`.
pub fn trapezoid_trig(n: usize) -> Result<ClassicalRule> {
    if n == 0 {
        return Err(Error::Parameter(
            "trapezoid rule needs at least one point".into(),
        ));
    }
    let h = 2.0 * PI / n as f64;
    Ok(ClassicalRule {
        domain: Domain::Circle,
        nodes: PointSet::new(1, (0..n).map(|j| h * j as f64).collect())?,
        weights: vec![h; n],
        exact_degree: n - 1,
    })
}

/// A rule on `domain` exact for total degree `target_degree` (trigonometric
/// frequency on the circle).
pub fn reference_rule(domain: Domain, target_degree: usize) -> Result<ClassicalRule> {
    let q = target_degree / 2 + 1; // 2q - 1 >= target_degree
    let rule = match domain {
        Domain::Interval { a, b } => gauss_legendre(q, a, b)?,
        Domain::Circle => trapezoid_trig(target_degree + 1)?,
        Domain::Square => {
            let g = gauss_legendre(q, -1.0, 1.0)?;
            let mut coords = Vec::with_capacity(2 * q * q);
            let mut weights = Vec::with_capacity(q * q);
            for (x, wx) in g.nodes.iter().zip(&g.weights) {
                for (y, wy) in g.nodes.iter().zip(&g.weights) {
                    coords.extend_from_slice(&[x[0], y[0]]);
                    weights.push(wx * wy);
                }
            }
            ClassicalRule {
                domain,
                nodes: PointSet::new(2, coords)?,
                weights,
                exact_degree: target_degree,
            }
        }
        Domain::Triangle => {
            // Duffy collapse of [-1,1]² onto the triangle; the Jacobian
            // (1 - v)/2 raises the degree in v by one.
            let gu = gauss_legendre(q, -1.0, 1.0)?;
            let gv = gauss_legendre(q + 1, -1.0, 1.0)?;
            let mut coords = Vec::new();
            let mut weights = Vec::new();
            for (u, wu) in gu.nodes.iter().zip(&gu.weights) {
                for (v, wv) in gv.nodes.iter().zip(&gv.weights) {
                    let (u, v) = (u[0], v[0]);
                    coords.extend_from_slice(&[0.5 * (1.0 + u) * (1.0 - v) - 1.0, v]);
                    weights.push(wu * wv * 0.5 * (1.0 - v));
                }
            }
            ClassicalRule {
                domain,
                nodes: PointSet::new(2, coords)?,
                weights,
                exact_degree: target_degree,
            }
        }
        Domain::Disk => {
            // Gauss in r (with the Jacobian r) times trapezoid in θ.
            let gr = gauss_legendre(q + 1, 0.0, 1.0)?;
            let nt = target_degree + 1;
            let h = 2.0 * PI / nt as f64;
            let mut coords = Vec::new();
            let mut weights = Vec::new();
            for (r, wr) in gr.nodes.iter().zip(&gr.weights) {
                let r = r[0];
                for j in 0..nt {
                    let t = h * j as f64;
                    coords.extend_from_slice(&[r * t.cos(), r * t.sin()]);
                    weights.push(wr * r * h);
                }
            }
            ClassicalRule {
                domain,
                nodes: PointSet::new(2, coords)?,
                weights,
                exact_degree: target_degree,
            }
        }
    };
    validate_rule(&rule, target_degree)?;
    Ok(rule)
}

fn validate_rule(rule: &ClassicalRule, degree: usize) -> Result<()> {
    let measure = rule.domain.measure();
    let total: f64 = rule.weights.iter().sum();
    if (total - measure).abs() > 1e-12 * measure {
        return Err(Error::Construction(format!(
            "rule on {} integrates 1 to {total}, expected {measure}",
            rule.domain
        )));
    }
    if rule.domain == Domain::Circle {
        return Ok(());
    }
    // spot check the top degree; keep the closed form well conditioned
    let d = degree.min(12);
    let (a, b) = if rule.domain.dim() == 1 {
        (d, 0)
    } else {
        (d - d / 2, d / 2)
    };
    let exact = monomial_integral(rule.domain, a, b)?;
    let approx =
        rule.integrate(|p| p[0].powi(a as i32) * p.get(1).map_or(1.0, |y| y.powi(b as i32)));
    if (approx - exact).abs() > 1e-12 * (1.0 + exact.abs()) {
        return Err(Error::Construction(format!(
            "rule on {} fails exactness for x^{a} y^{b}: {approx} vs {exact}",
            rule.domain
        )));
    }
    Ok(())
}

/// `Γ(k / 2)` for positive integers `k`.
fn gamma_half(k: usize) -> f64 {
    match k {
        1 => PI.sqrt(),
        2 => 1.0,
        _ => (k as f64 / 2.0 - 1.0) * gamma_half(k - 2),
    }
}

/// Closed-form `∫ x^a y^b` over `domain` (`b` is ignored in one dimension).
pub fn monomial_integral(domain: Domain, a: usize, b: usize) -> Result<f64> {
    Ok(match domain {
        Domain::Interval { a: lo, b: hi } => {
            let p = (a + 1) as i32;
            (hi.powi(p) - lo.powi(p)) / p as f64
        }
        Domain::Square => {
            let one = |e: usize| {
                if e.is_multiple_of(2) {
                    2.0 / (e + 1) as f64
                } else {
                    0.0
                }
            };
            one(a) * one(b)
        }
        Domain::Triangle => {
            // x runs over [-1, -y]; integrate in x, then use ∫ y^m over [-1, 1].
            let even = |m: usize| {
                if m.is_multiple_of(2) {
                    2.0 / (m + 1) as f64
                } else {
                    0.0
                }
            };
            let sign = if a.is_multiple_of(2) { -1.0 } else { 1.0 };
            sign * (even(a + b + 1) - even(b)) / (a + 1) as f64
        }
        Domain::Disk => {
            if a % 2 == 1 || b % 2 == 1 {
                0.0
            } else {
                2.0 * gamma_half(a + 1) * gamma_half(b + 1)
                    / ((a + b + 2) as f64 * gamma_half(a + b + 2))
            }
        }
        Domain::Circle => {
            return Err(Error::Unsupported(
                "monomial integrals on the circle".into(),
            ));
        }
    })
}

/// Matrix of pairwise inner products of two bases.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub entries: DMatrix<f64>,
    pub ip: InnerProductSpec,
}

impl GramMatrix {
    pub fn max_asymmetry(&self) -> f64 {
        (&self.entries - self.entries.transpose()).abs().max()
    }

    pub fn cholesky(&self) -> Result<DMatrix<f64>> {
        cholesky(&self.entries)
    }
}

/// `M_ij = ⟨a_i, b_j⟩` under `ip`, integrated by `rule`.
pub fn gram_matrix(
    a: &BasisSet,
    b: &BasisSet,
    ip: &InnerProductSpec,
    rule: &ClassicalRule,
) -> Result<GramMatrix> {
    if a.domain() != ip.domain || b.domain() != ip.domain {
        return Err(Error::Parameter(format!(
            "bases on {} / {} do not match the inner product on {}",
            a.domain(),
            b.domain(),
            ip.domain
        )));
    }
    if ip.is_h1() && !(a.has_derivatives() && b.has_derivatives()) {
        return Err(Error::Unsupported(
            "H1 Gram matrix needs derivative evaluators for both bases".into(),
        ));
    }
    let mut m = DMatrix::zeros(a.len(), b.len());
    for (p, &w) in rule.nodes.iter().zip(&rule.weights) {
        let fa = a.eval(p);
        let fb = b.eval(p);
        for i in 0..fa.len() {
            for j in 0..fb.len() {
                m[(i, j)] += w * fa[i] * fb[j];
            }
        }
        if ip.is_h1() {
            let da = a.eval_derivative(p)?;
            let db = b.eval_derivative(p)?;
            let coef = ip.coefficient_at(p);
            for i in 0..da.len() {
                for j in 0..db.len() {
                    m[(i, j)] += w * coef * da[i] * db[j];
                }
            }
        }
    }
    Ok(GramMatrix {
        entries: m,
        ip: ip.clone(),
    })
}

/// Lower Cholesky factor with a relative pivot floor.
pub fn cholesky(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: m.ncols(),
        });
    }
    let scale = (0..n).map(|i| m[(i, i)]).fold(0.0, f64::max);
    let tolerance = CHOLESKY_PIVOT_TOL * scale;
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = m[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if !(pivot > tolerance) {
            return Err(Error::NotPositiveDefinite {
                index: j,
                pivot,
                tolerance,
            });
        }
        let d = pivot.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Orthonormalizes `raw` under `ip` by the Cholesky factor of its Gram
/// matrix: `new = L⁻¹ raw`. The result keeps the same column selection.
pub fn orthonormalize(
    raw: &BasisSet,
    ip: &InnerProductSpec,
    rule: &ClassicalRule,
) -> Result<BasisSet> {
    let full = raw.prefix();
    let width = raw.eval_width();
    let gram = gram_matrix(&full, &full, ip, rule)?;
    let l_new = gram.cholesky()?;
    let l_total = match raw.transform() {
        Some(t) => t.matrix().view((0, 0), (width, width)).into_owned() * l_new,
        None => l_new,
    };
    Ok(raw.with_transform(&l_total, ip.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::poly_space;

    #[test]
    fn gauss_small_cases() {
        let g1 = gauss_legendre(1, -1.0, 1.0).unwrap();
        assert!(g1.nodes.point(0)[0].abs() < 1e-16);
        assert!((g1.weights[0] - 2.0).abs() < 1e-15);
        let g2 = gauss_legendre(2, -1.0, 1.0).unwrap();
        let r = 1.0 / 3f64.sqrt();
        assert!((g2.nodes.point(0)[0] + r).abs() < 1e-15);
        assert!((g2.nodes.point(1)[0] - r).abs() < 1e-15);
        assert!(g2.weights.iter().all(|w| (w - 1.0).abs() < 1e-15));
        let g5 = gauss_legendre(5, -1.0, 1.0).unwrap();
        assert!((g5.integrate(|p| p[0].powi(8)) - 2.0 / 9.0).abs() < 1e-14);
        assert!(gauss_legendre(0, -1.0, 1.0).is_err());
    }

    #[test]
    fn gauss_exactness_sweep() {
        for n in 1..=30 {
            for &(a, b) in &[(-1.0, 1.0), (0.0, 3.0), (-2.5, -0.5)] {
                let g = gauss_legendre(n, a, b).unwrap();
                assert!(g.weights.iter().all(|&w| w > 0.0));
                let sum: f64 = g.weights.iter().sum();
                assert!((sum - (b - a)).abs() < 1e-12);
                for j in 0..2 * n {
                    let exact = monomial_integral(Domain::Interval { a, b }, j, 0).unwrap();
                    let approx = g.integrate(|p| p[0].powi(j as i32));
                    assert!(
                        (approx - exact).abs() < 1e-13 * (b - a) * (1.0 + exact.abs()),
                        "n={n} j={j} ({a},{b}): {approx} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn trapezoid_examples() {
        let t1 = trapezoid_trig(1).unwrap();
        assert_eq!(t1.nodes.point(0)[0], 0.0);
        assert!((t1.weights[0] - 2.0 * PI).abs() < 1e-15);
        let t5 = trapezoid_trig(5).unwrap();
        assert!(t5.integrate(|p| (4.0 * p[0]).cos()).abs() < 1e-13);
        assert!((t5.integrate(|p| (5.0 * p[0]).cos()) - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn trapezoid_exact_on_trig_polynomials() {
        for n in 1..20 {
            let t = trapezoid_trig(n).unwrap();
            for f in 0..n {
                let c = t.integrate(|p| (f as f64 * p[0]).cos());
                let s = t.integrate(|p| (f as f64 * p[0]).sin());
                let want = if f == 0 { 2.0 * PI } else { 0.0 };
                assert!((c - want).abs() < 1e-12 && s.abs() < 1e-12, "n={n} f={f}");
            }
        }
    }

    #[test]
    fn reference_rule_measures() {
        let tri = reference_rule(Domain::Triangle, 2).unwrap();
        assert!((tri.integrate(|_| 1.0) - 2.0).abs() < 1e-13);
        let disk = reference_rule(Domain::Disk, 0).unwrap();
        assert!((disk.integrate(|_| 1.0) - PI).abs() < 1e-13);
    }

    #[test]
    fn reference_rules_reproduce_monomials() {
        for domain in [
            Domain::Triangle,
            Domain::Square,
            Domain::Disk,
            Domain::unit_interval(),
        ] {
            for deg in [0, 3, 8, 12] {
                let rule = reference_rule(domain, deg).unwrap();
                for a in 0..=deg {
                    let bmax = if domain.dim() == 1 { 0 } else { deg - a };
                    for b in 0..=bmax {
                        let exact = monomial_integral(domain, a, b).unwrap();
                        let approx = rule.integrate(|p| {
                            p[0].powi(a as i32) * p.get(1).map_or(1.0, |y| y.powi(b as i32))
                        });
                        assert!(
                            (approx - exact).abs() <= 1e-12 * exact.abs().max(1.0),
                            "{domain} deg {deg}: x^{a} y^{b} {approx} vs {exact}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn monomial_closed_forms() {
        // ∫_T x dA over the reference triangle: centroid (-1/3, -1/3), area 2
        assert!((monomial_integral(Domain::Triangle, 1, 0).unwrap() + 2.0 / 3.0).abs() < 1e-15);
        assert!((monomial_integral(Domain::Disk, 2, 0).unwrap() - PI / 4.0).abs() < 1e-15);
        assert!((monomial_integral(Domain::Square, 2, 2).unwrap() - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn gram_of_legendre_pair() {
        let b = poly_space(Domain::unit_interval(), 1).unwrap();
        let ip = InnerProductSpec::l2(Domain::unit_interval());
        let rule = reference_rule(ip.domain, 4).unwrap();
        let g = gram_matrix(&b, &b, &ip, &rule).unwrap();
        assert!((g.entries[(0, 0)] - 2.0).abs() < 1e-14);
        assert!((g.entries[(1, 1)] - 2.0 / 3.0).abs() < 1e-14);
        assert!(g.entries[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn h1_gram_with_exp_weight_is_positive_definite() {
        let d = Domain::unit_interval();
        let b = poly_space(d, 6).unwrap();
        let ip = InnerProductSpec::h1(d, Coefficient::Exp).unwrap();
        let rule = ip.gram_rule(6, DEFAULT_H1_GAUSS_POINTS).unwrap();
        let g = gram_matrix(&b, &b, &ip, &rule).unwrap();
        assert!(g.max_asymmetry() <= 1e-13 * g.entries.abs().max());
        assert!(g.cholesky().is_ok());
    }

    #[test]
    fn h1_requires_derivatives_and_interval() {
        assert!(InnerProductSpec::h1(Domain::Triangle, Coefficient::One).is_err());
        let tri = poly_space(Domain::Triangle, 1).unwrap();
        let mut ip = InnerProductSpec::l2(Domain::Triangle);
        ip.sobolev_order = 1;
        let rule = reference_rule(Domain::Triangle, 2).unwrap();
        assert!(matches!(
            gram_matrix(&tri, &tri, &ip, &rule),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn orthonormalize_hand_cholesky() {
        let d = Domain::unit_interval();
        let raw = poly_space(d, 1).unwrap();
        let ip = InnerProductSpec::l2(d);
        let rule = reference_rule(d, 4).unwrap();
        let on = orthonormalize(&raw, &ip, &rule).unwrap();
        for &x in &[-0.7, 0.0, 0.3, 1.0] {
            let v = on.eval(&[x]);
            assert!((v[0] - 1.0 / 2f64.sqrt()).abs() < 1e-15);
            assert!((v[1] - x * 1.5f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn orthonormalize_is_idempotent() {
        let raw = poly_space(Domain::Triangle, 4).unwrap();
        let ip = InnerProductSpec::l2(Domain::Triangle);
        let rule = reference_rule(Domain::Triangle, 10).unwrap();
        let once = orthonormalize(&raw, &ip, &rule).unwrap();
        let twice = orthonormalize(&once, &ip, &rule).unwrap();
        for b in [&once, &twice] {
            assert_eq!(b.len(), 15);
            let g = gram_matrix(b, b, &ip, &rule).unwrap();
            let dev = (g.entries - DMatrix::identity(15, 15)).abs().max();
            assert!(dev < 1e-11, "{dev}");
        }
        // the second factor is the identity up to round-off
        for &p in &[[-0.5, -0.2], [0.1, -0.9]] {
            let a = once.eval(&p);
            let b = twice.eval(&p);
            assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
        }
    }

    #[test]
    fn cholesky_rejects_dependent_family() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            cholesky(&m),
            Err(Error::NotPositiveDefinite { index: 1, .. })
        ));
    }
}
