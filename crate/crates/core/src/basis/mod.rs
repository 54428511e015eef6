//! Basis families, integration domains and evaluation matrices.
//!
//! A [`BasisSet`] is an ordered, degree-graded list of raw family members
//! (Legendre, Koornwinder, tensor Legendre, Zernike or trigonometric),
//! optionally composed with a lower-triangular change of basis that makes it
//! orthonormal under some inner product, and optionally transported to the
//! image of an affine map.

mod poly;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::affine::AffineMap;
use crate::error::{Error, Result};
use crate::refquad::InnerProductSpec;

pub use poly::{jacobi, legendre, legendre_and_derivative, trig_frequency};

/// Membership slack used by the closed-domain tests.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

/// Integration domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Interval {
        a: f64,
        b: f64,
    },
    /// Right triangle with vertices (-1,-1), (-1,1), (1,-1).
    Triangle,
    /// `[-1, 1]²`.
    Square,
    /// Closed unit disk.
    Disk,
    /// Periodic `[0, 2π)`.
    Circle,
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Parameter(format!(
                "interval requires a < b, got ({a}, {b})"
            )));
        }
        Ok(Domain::Interval { a, b })
    }

    /// The default interval `[-1, 1]`.
    pub fn unit_interval() -> Self {
        Domain::Interval { a: -1.0, b: 1.0 }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } | Domain::Circle => 1,
            _ => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Domain::Interval { .. } => "interval",
            Domain::Triangle => "triangle",
            Domain::Square => "square",
            Domain::Disk => "disk",
            Domain::Circle => "circle",
        }
    }

    /// Closed-domain membership. The circle is periodic, so every finite
    /// angle belongs to it.
    pub fn contains(&self, p: &[f64]) -> bool {
        if p.len() != self.dim() || p.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let t = MEMBERSHIP_TOL;
        match *self {
            Domain::Interval { a, b } => p[0] >= a - t && p[0] <= b + t,
            Domain::Triangle => p[0] >= -1.0 - t && p[1] >= -1.0 - t && p[0] + p[1] <= t,
            Domain::Square => p.iter().all(|v| v.abs() <= 1.0 + t),
            Domain::Disk => p[0].hypot(p[1]) <= 1.0 + t,
            Domain::Circle => true,
        }
    }

    /// Lebesgue measure.
    pub fn measure(&self) -> f64 {
        match *self {
            Domain::Interval { a, b } => b - a,
            Domain::Triangle => 2.0,
            Domain::Square => 4.0,
            Domain::Disk => std::f64::consts::PI,
            Domain::Circle => 2.0 * std::f64::consts::PI,
        }
    }

    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        match *self {
            Domain::Interval { a, b } => vec![(a, b)],
            Domain::Circle => vec![(0.0, 2.0 * std::f64::consts::PI)],
            _ => vec![(-1.0, 1.0), (-1.0, 1.0)],
        }
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            Domain::Interval { a, b } => b - a,
            Domain::Triangle | Domain::Square => 2.0 * std::f64::consts::SQRT_2,
            Domain::Disk => 2.0,
            Domain::Circle => 2.0 * std::f64::consts::PI,
        }
    }

    /// Uniform sample by rejection from the bounding box.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let bbox = self.bounding_box();
        loop {
            for (slot, &(lo, hi)) in out.iter_mut().zip(&bbox) {
                *slot = lo + (hi - lo) * rng.random::<f64>();
            }
            if *self == Domain::Circle || self.contains(out) {
                return;
            }
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Interval { a, b } => write!(f, "interval({a}, {b})"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "interval" => Ok(Domain::unit_interval()),
            "triangle" => Ok(Domain::Triangle),
            "square" => Ok(Domain::Square),
            "disk" => Ok(Domain::Disk),
            "circle" => Ok(Domain::Circle),
            other => Err(Error::Parameter(format!("unknown domain {other:?}"))),
        }
    }
}

/// A list of points in `R^d`, stored flat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(Error::Parameter(format!(
                "{} coordinates do not form points of dimension {dim}",
                coords.len()
            )));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_points<P: AsRef<[f64]>>(points: &[P]) -> Result<Self> {
        let dim = points.first().map(|p| p.as_ref().len()).unwrap_or(1);
        let mut coords = Vec::with_capacity(dim * points.len());
        for p in points {
            if p.as_ref().len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: p.as_ref().len(),
                });
            }
            coords.extend_from_slice(p.as_ref());
        }
        Ok(Self { dim, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Points in lexicographic order.
    pub fn sorted_lex(&self) -> PointSet {
        let mut pts: Vec<&[f64]> = self.iter().collect();
        pts.sort_by(|a, b| lex_cmp(a, b));
        PointSet {
            dim: self.dim,
            coords: pts.concat(),
        }
    }

    pub fn mapped(&self, map: &AffineMap) -> PointSet {
        let mut coords = vec![0.0; self.coords.len()];
        for (src, dst) in self
            .coords
            .chunks_exact(self.dim)
            .zip(coords.chunks_exact_mut(self.dim))
        {
            map.apply_into(src, dst);
        }
        PointSet {
            dim: self.dim,
            coords,
        }
    }
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            ord => return ord,
        }
    }
    a.len().cmp(&b.len())
}

/// One raw family member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    Legendre(usize),
    Koornwinder { m: usize, n: usize },
    TensorLegendre { a: usize, b: usize },
    Zernike { m: i32, n: usize },
    Trig(usize),
}

impl Term {
    /// Total polynomial degree, or trigonometric frequency.
    pub fn degree(&self) -> usize {
        match *self {
            Term::Legendre(n) => n,
            Term::Koornwinder { m, n } => m + n,
            Term::TensorLegendre { a, b } => a + b,
            Term::Zernike { n, .. } => n,
            Term::Trig(j) => trig_frequency(j),
        }
    }

    fn eval(&self, domain: &Domain, p: &[f64]) -> f64 {
        match *self {
            Term::Legendre(n) => legendre(n, interval_coordinate(domain, p[0])),
            Term::Koornwinder { m, n } => poly::koornwinder(m, n, p[0], p[1]),
            Term::TensorLegendre { a, b } => legendre(a, p[0]) * legendre(b, p[1]),
            Term::Zernike { m, n } => poly::zernike(m, n, p[0], p[1]),
            Term::Trig(j) => poly::trig(j, p[0]),
        }
    }

    fn derivative(&self, domain: &Domain, p: &[f64]) -> Option<f64> {
        match (*self, *domain) {
            (Term::Legendre(n), Domain::Interval { a, b }) => {
                let (_, d) = legendre_and_derivative(n, interval_coordinate(domain, p[0]));
                Some(d * 2.0 / (b - a))
            }
            _ => None,
        }
    }
}

fn interval_coordinate(domain: &Domain, x: f64) -> f64 {
    match *domain {
        Domain::Interval { a, b } => (2.0 * x - a - b) / (b - a),
        _ => x,
    }
}

/// Lower-triangular change of basis `new = L⁻¹ raw`.
#[derive(Debug, Clone)]
pub(crate) struct Transform {
    /// Row-major lower triangle of `L`.
    l: Vec<f64>,
    size: usize,
    ip: InnerProductSpec,
}

impl Transform {
    pub(crate) fn new(l: &DMatrix<f64>, ip: InnerProductSpec) -> Self {
        let size = l.nrows();
        let mut rows = vec![0.0; size * size];
        for i in 0..size {
            for j in 0..=i {
                rows[i * size + j] = l[(i, j)];
            }
        }
        Self { l: rows, size, ip }
    }

    pub(crate) fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.size, self.size, &self.l)
    }

    /// In-place forward substitution on the first `upto` entries.
    fn solve_in_place(&self, v: &mut [f64], upto: usize) {
        let n = self.size;
        for i in 0..upto {
            let row = &self.l[i * n..i * n + i];
            let s: f64 = row.iter().zip(&v[..i]).map(|(a, b)| a * b).sum();
            v[i] = (v[i] - s) / self.l[i * n + i];
        }
    }
}

/// Transport to the image of an affine map: `f̃(Φ(x)) = scale · f(x)`.
#[derive(Debug, Clone)]
pub(crate) struct Frame {
    pub(crate) map: AffineMap,
    pub(crate) inverse: AffineMap,
    pub(crate) scale: f64,
}

/// Whether a basis is raw or orthonormal under some inner product.
#[derive(Debug, Clone, Copy)]
pub enum Ortho<'a> {
    Raw,
    Orthonormal(&'a InnerProductSpec),
}

/// An ordered, degree-graded family of evaluable functions on a domain.
#[derive(Debug, Clone)]
pub struct BasisSet {
    domain: Domain,
    terms: Arc<Vec<Term>>,
    transform: Option<Arc<Transform>>,
    frame: Option<Arc<Frame>>,
    columns: Range<usize>,
}

impl BasisSet {
    /// A raw basis from an explicit term list (must be degree-graded).
    pub fn from_terms(domain: Domain, terms: Vec<Term>) -> Result<Self> {
        if terms.windows(2).any(|w| w[0].degree() > w[1].degree()) {
            return Err(Error::Parameter(
                "basis terms must be ordered by degree".into(),
            ));
        }
        let len = terms.len();
        Ok(Self {
            domain,
            terms: Arc::new(terms),
            transform: None,
            frame: None,
            columns: 0..len,
        })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Number of raw terms the evaluation needs (the selected columns plus
    /// everything before them in the triangular transform).
    pub(crate) fn eval_width(&self) -> usize {
        self.columns.end
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms[self.columns.clone()]
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.terms().iter().map(Term::degree).collect()
    }

    pub fn ortho(&self) -> Ortho<'_> {
        match &self.transform {
            Some(t) => Ortho::Orthonormal(&t.ip),
            None => Ortho::Raw,
        }
    }

    pub fn is_orthonormal(&self) -> bool {
        self.transform.is_some()
    }

    pub fn has_derivatives(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.derivative(&self.domain, &[0.0]).is_some())
    }

    /// The frame map, when the basis lives on an affine image.
    pub fn frame(&self) -> Option<&AffineMap> {
        self.frame.as_deref().map(|f| &f.map)
    }

    pub(crate) fn transform(&self) -> Option<&Transform> {
        self.transform.as_deref()
    }

    /// Sub-basis of the columns `range` (relative to this basis).
    pub fn select(&self, range: Range<usize>) -> Result<BasisSet> {
        if range.start > range.end || range.end > self.len() {
            return Err(Error::Parameter(format!(
                "column range {range:?} out of bounds for a basis of {} functions",
                self.len()
            )));
        }
        let mut out = self.clone();
        out.columns = self.columns.start + range.start..self.columns.start + range.end;
        Ok(out)
    }

    /// All columns up to the end of this selection.
    pub(crate) fn prefix(&self) -> BasisSet {
        let mut out = self.clone();
        out.columns = 0..self.columns.end;
        out
    }

    pub(crate) fn with_transform(&self, l: &DMatrix<f64>, ip: InnerProductSpec) -> BasisSet {
        let mut out = self.clone();
        out.transform = Some(Arc::new(Transform::new(l, ip)));
        out
    }

    /// The same functions transported by `map`, scaled by `scale`.
    pub fn transported(&self, map: &AffineMap, scale: f64) -> Result<BasisSet> {
        if map.dim() != self.domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.domain.dim(),
                actual: map.dim(),
            });
        }
        let (map, scale) = match &self.frame {
            // compose with an existing frame
            Some(f) => {
                let lin = map.linear() * f.map.linear();
                let shift = map.apply(f.map.translation());
                (AffineMap::new(lin, shift)?, scale * f.scale)
            }
            None => (map.clone(), scale),
        };
        let mut out = self.clone();
        out.frame = Some(Arc::new(Frame {
            inverse: map.inverse(),
            map,
            scale,
        }));
        Ok(out)
    }

    /// Membership in the basis' (possibly transported) domain.
    pub fn contains(&self, p: &[f64]) -> bool {
        match &self.frame {
            Some(f) => p.len() == self.domain.dim() && self.domain.contains(&f.inverse.apply(p)),
            None => self.domain.contains(p),
        }
    }

    /// Evaluates raw terms `0..upto` at `p` (mapped back through the frame)
    /// and applies the transform in place. `out.len() >= upto`.
    pub(crate) fn fill(&self, p: &[f64], upto: usize, out: &mut [f64]) {
        let mut local = [0.0; 2];
        let q: &[f64] = match &self.frame {
            Some(f) => {
                f.inverse.apply_into(p, &mut local[..p.len()]);
                &local[..p.len()]
            }
            None => p,
        };
        for (slot, term) in out[..upto].iter_mut().zip(self.terms.iter()) {
            *slot = term.eval(&self.domain, q);
        }
        if let Some(t) = &self.transform {
            t.solve_in_place(out, upto);
        }
        if let Some(f) = &self.frame {
            for v in &mut out[..upto] {
                *v *= f.scale;
            }
        }
    }

    /// Values of the selected functions at `p` (no domain check).
    pub fn eval(&self, p: &[f64]) -> Vec<f64> {
        let mut buf = vec![0.0; self.eval_width()];
        self.fill(p, self.eval_width(), &mut buf);
        buf[self.columns.clone()].to_vec()
    }

    /// First derivatives at `p`. Only available on interval domains.
    pub fn eval_derivative(&self, p: &[f64]) -> Result<Vec<f64>> {
        let upto = self.eval_width();
        let (q, chain, scale) = match &self.frame {
            Some(f) => (f.inverse.apply(p), f.inverse.linear()[(0, 0)], f.scale),
            None => (p.to_vec(), 1.0, 1.0),
        };
        let mut out = vec![0.0; upto];
        for (slot, term) in out.iter_mut().zip(self.terms.iter()) {
            *slot = term.derivative(&self.domain, &q).ok_or_else(|| {
                Error::Unsupported(format!("derivatives of {term:?} on {}", self.domain))
            })?;
        }
        if let Some(t) = &self.transform {
            t.solve_in_place(&mut out, upto);
        }
        for v in &mut out {
            *v *= chain * scale;
        }
        Ok(out[self.columns.clone()].to_vec())
    }

    /// Evaluation matrix without the domain check (optimizer probes).
    pub fn eval_unchecked(&self, points: &PointSet) -> DMatrix<f64> {
        let width = self.eval_width();
        let mut buf = vec![0.0; width];
        let mut m = DMatrix::zeros(points.len(), self.len());
        for (i, p) in points.iter().enumerate() {
            self.fill(p, width, &mut buf);
            for (j, c) in self.columns.clone().enumerate() {
                m[(i, j)] = buf[c];
            }
        }
        m
    }
}

/// Rows indexed by points, columns by basis functions.
#[derive(Debug, Clone)]
pub struct EvalMatrix {
    pub values: DMatrix<f64>,
    pub points: PointSet,
    pub basis: BasisSet,
}

/// Evaluation matrix of `basis` at `points`, rejecting points outside the
/// basis' closed domain.
pub fn eval_matrix(basis: &BasisSet, points: &PointSet) -> Result<EvalMatrix> {
    if points.dim() != basis.domain().dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.domain().dim(),
            actual: points.dim(),
        });
    }
    for (index, p) in points.iter().enumerate() {
        if !basis.contains(p) {
            return Err(Error::Evaluation {
                index,
                source: Box::new(Error::OutsideDomain {
                    domain: basis.domain().to_string(),
                    point: p.to_vec(),
                }),
            });
        }
    }
    Ok(EvalMatrix {
        values: basis.eval_unchecked(points),
        points: points.clone(),
        basis: basis.clone(),
    })
}

/// `P_n(x)`.
pub fn legendre_eval(n: usize, x: f64) -> f64 {
    legendre(n, x)
}

/// `P_n^{(alpha, beta)}(x)`.
pub fn jacobi_eval(n: usize, alpha: f64, beta: f64, x: f64) -> Result<f64> {
    if !(alpha > -1.0 && beta > -1.0) {
        return Err(Error::Parameter(format!(
            "Jacobi parameters must exceed -1, got ({alpha}, {beta})"
        )));
    }
    Ok(jacobi(n, alpha, beta, x))
}

/// Unnormalized Koornwinder polynomial `K_{m,n}` on the reference triangle.
pub fn koornwinder_eval(m: usize, n: usize, p: &[f64]) -> Result<f64> {
    if p.len() != 2 || !Domain::Triangle.contains(p) {
        return Err(Error::OutsideDomain {
            domain: Domain::Triangle.to_string(),
            point: p.to_vec(),
        });
    }
    Ok(poly::koornwinder(m, n, p[0], p[1]))
}

/// Zernike polynomial `Z_{m,n}` at a Cartesian point of the unit disk.
pub fn zernike_eval(m: i32, n: usize, p: &[f64]) -> Result<f64> {
    let am = m.unsigned_abs() as usize;
    if am > n || !(n - am).is_multiple_of(2) {
        return Err(Error::Parameter(format!(
            "Zernike indices need n >= |m| with n - |m| even, got m={m}, n={n}"
        )));
    }
    if p.len() != 2 || !Domain::Disk.contains(p) {
        return Err(Error::OutsideDomain {
            domain: Domain::Disk.to_string(),
            point: p.to_vec(),
        });
    }
    Ok(poly::zernike(m, n, p[0], p[1]))
}

/// `j`-th member of the orthonormal family `{1, sin x, cos x, …}` truncated
/// at frequency `n_max`.
pub fn trig_eval(j: usize, n_max: usize, x: f64) -> Result<f64> {
    if j > 2 * n_max {
        return Err(Error::Parameter(format!(
            "trigonometric index {j} out of range for frequency {n_max}"
        )));
    }
    Ok(poly::trig(j, x))
}

/// Dimension of total-degree-`n` polynomials in `dim` variables.
pub fn poly_dim(dim: usize, n: usize) -> usize {
    match dim {
        1 => n + 1,
        2 => (n + 1) * (n + 2) / 2,
        _ => unreachable!("only 1-D and 2-D domains are supported"),
    }
}

/// The graded raw basis of total-degree-`n` polynomials on `domain`.
pub fn poly_space(domain: Domain, n: usize) -> Result<BasisSet> {
    let mut terms = Vec::new();
    match domain {
        Domain::Interval { .. } => terms.extend((0..=n).map(Term::Legendre)),
        Domain::Triangle => {
            for d in 0..=n {
                terms.extend((0..=d).map(|m| Term::Koornwinder { m, n: d - m }));
            }
        }
        Domain::Square => {
            for d in 0..=n {
                terms.extend((0..=d).map(|a| Term::TensorLegendre { a, b: d - a }));
            }
        }
        Domain::Disk => {
            for d in 0..=n as i32 {
                terms.extend(
                    (-d..=d)
                        .step_by(2)
                        .map(|m| Term::Zernike { m, n: d as usize }),
                );
            }
        }
        Domain::Circle => {
            return Err(Error::Unsupported(
                "algebraic polynomials on the circle; use trig_space".into(),
            ))
        }
    }
    BasisSet::from_terms(domain, terms)
}

/// `{1, sin x, cos x, …, sin(n x), cos(n x)}` on the circle.
pub fn trig_space(n_max: usize) -> BasisSet {
    BasisSet::from_terms(Domain::Circle, (0..2 * n_max + 1).map(Term::Trig).collect())
        .expect("trigonometric terms are graded")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_membership() {
        assert!(Domain::Triangle.contains(&[-1.0, -1.0]));
        assert!(Domain::Triangle.contains(&[1.0, -1.0]));
        assert!(!Domain::Triangle.contains(&[0.1, 0.0]));
        assert!(Domain::Disk.contains(&[0.6, 0.8]));
        assert!(!Domain::Disk.contains(&[0.8, 0.8]));
        assert!(Domain::Square.contains(&[1.0, -1.0]));
        assert!(!Domain::Square.contains(&[1.1, 0.0]));
        assert!(Domain::Circle.contains(&[17.0]));
        assert!(Domain::interval(0.0, 2.0).unwrap().contains(&[2.0]));
        assert!(Domain::interval(1.0, 1.0).is_err());
        assert!(Domain::interval(2.0, 1.0).is_err());
    }

    #[test]
    fn domain_parse() {
        assert_eq!("Triangle".parse::<Domain>().unwrap(), Domain::Triangle);
        assert_eq!(
            "interval".parse::<Domain>().unwrap(),
            Domain::unit_interval()
        );
        assert!("cube".parse::<Domain>().is_err());
    }

    #[test]
    fn koornwinder_examples() {
        assert_eq!(koornwinder_eval(0, 0, &[-0.2, -0.3]).unwrap(), 1.0);
        // (0, -1): argument (2x+y+1)/(1-y) = 0, so K_{1,0} = P_1(0) = 0
        assert_eq!(koornwinder_eval(1, 0, &[0.0, -1.0]).unwrap(), 0.0);
        // vertex (1, -1): factor 1, argument 1
        assert!((koornwinder_eval(1, 0, &[1.0, -1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(koornwinder_eval(0, 0, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn zernike_errors() {
        assert!(zernike_eval(1, 2, &[0.1, 0.1]).is_err());
        assert!(zernike_eval(3, 1, &[0.1, 0.1]).is_err());
        assert!(zernike_eval(0, 2, &[1.0, 1.0]).is_err());
        assert!(zernike_eval(-2, 2, &[0.3, 0.1]).is_ok());
    }

    #[test]
    fn trig_range() {
        assert!(trig_eval(5, 2, 0.0).is_err());
        assert!(trig_eval(4, 2, 0.0).is_ok());
        assert!(
            (trig_eval(0, 3, 1.0).unwrap() - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs()
                < 1e-16
        );
    }

    #[test]
    fn poly_space_sizes() {
        assert_eq!(poly_space(Domain::Triangle, 2).unwrap().len(), 6);
        assert_eq!(poly_space(Domain::unit_interval(), 0).unwrap().len(), 1);
        assert_eq!(poly_space(Domain::Square, 8).unwrap().len(), 45);
        assert_eq!(poly_space(Domain::Disk, 4).unwrap().len(), 15);
        assert!(poly_space(Domain::Circle, 2).is_err());
        for n in 0..9 {
            for d in [Domain::Triangle, Domain::Square, Domain::Disk] {
                let b = poly_space(d, n).unwrap();
                assert_eq!(b.len(), poly_dim(2, n));
                let deg = b.degrees();
                assert!(deg.windows(2).all(|w| w[0] <= w[1]));
                assert_eq!(*deg.last().unwrap(), n);
            }
        }
    }

    #[test]
    fn eval_matrix_of_constant() {
        let b = poly_space(Domain::Triangle, 0).unwrap();
        let pts = PointSet::from_points(&[[-0.5, -0.5], [-0.9, 0.1], [0.2, -0.9]]).unwrap();
        let e = eval_matrix(&b, &pts).unwrap();
        assert_eq!(e.values.shape(), (3, 1));
        assert!(e.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn eval_matrix_reports_point_index() {
        let b = poly_space(Domain::Disk, 1).unwrap();
        let pts = PointSet::from_points(&[[0.0, 0.0], [0.9, 0.9]]).unwrap();
        match eval_matrix(&b, &pts) {
            Err(Error::Evaluation { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn eval_matrix_entries_match_direct_evaluation() {
        let b = poly_space(Domain::Square, 3).unwrap();
        let pts = PointSet::from_points(&[[0.1, -0.4], [0.7, 0.2]]).unwrap();
        let e = eval_matrix(&b, &pts).unwrap();
        for (i, p) in pts.iter().enumerate() {
            for (j, t) in b.terms().iter().enumerate() {
                let Term::TensorLegendre { a, b: bb } = *t else {
                    unreachable!()
                };
                assert_eq!(e.values[(i, j)], legendre(a, p[0]) * legendre(bb, p[1]));
            }
        }
    }

    #[test]
    fn select_and_sort() {
        let b = poly_space(Domain::unit_interval(), 4).unwrap();
        let tail = b.select(3..5).unwrap();
        assert_eq!(tail.degrees(), vec![3, 4]);
        assert!(b.select(3..6).is_err());
        let ps = PointSet::from_points(&[[0.5, 0.1], [-0.2, 0.3], [0.5, -0.1]]).unwrap();
        let s = ps.sorted_lex();
        assert_eq!(s.coords(), &[-0.2, 0.3, 0.5, -0.1, 0.5, 0.1]);
    }

    #[test]
    fn interval_legendre_derivatives_scale_with_length() {
        let b = poly_space(Domain::interval(0.0, 4.0).unwrap(), 3).unwrap();
        let d = b.eval_derivative(&[1.0]).unwrap();
        // t = (2x - 4)/4 → dt/dx = 1/2; P_1' = 1, P_2'(t) = 3t with t = -1/2
        assert!((d[1] - 0.5).abs() < 1e-15);
        assert!((d[2] - 0.5 * 3.0 * -0.5).abs() < 1e-15);
        assert!(poly_space(Domain::Triangle, 1)
            .unwrap()
            .eval_derivative(&[0.0, 0.0])
            .is_err());
    }
}
