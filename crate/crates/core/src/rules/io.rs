//! Versioned, checksummed JSON rule files.
//!
//! Floating-point arrays are written as decimal strings with 17 significant
//! digits, which round-trip every `f64` exactly. The checksum is the SHA-256
//! of the compact JSON encoding of every field except the checksum itself.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{BilinearRule, Provenance, EXACTNESS_TOL};
use crate::affine::AffineMap;
use crate::basis::{Domain, PointSet};
use crate::error::{Error, Result};
use crate::objective::Space;
use crate::refquad::{Coefficient, InnerProductSpec};

pub const RULE_FORMAT_VERSION: &str = "biquad-rule/1";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixText {
    rows: usize,
    cols: usize,
    /// Row-major entries.
    data: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameText {
    linear: MatrixText,
    translation: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IpText {
    sobolev_order: u8,
    coefficient: Coefficient,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RuleBody {
    version: String,
    domain: Domain,
    ip: IpText,
    space: Space,
    k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    frame: Option<FrameText>,
    dim: usize,
    points_x: Vec<String>,
    points_y: Vec<String>,
    w: MatrixText,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    w0: Option<MatrixText>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    w1: Option<MatrixText>,
    sigma: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kappa_inf: Option<String>,
    provenance: Provenance,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RuleFile {
    #[serde(flatten)]
    body: RuleBody,
    checksum: String,
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Format(format!("not a number: {s:?}")))
}

fn parse_all(v: &[String]) -> Result<Vec<f64>> {
    v.iter().map(|s| parse(s)).collect()
}

fn matrix_text(m: &DMatrix<f64>) -> MatrixText {
    let mut data = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            data.push(fmt(m[(i, j)]));
        }
    }
    MatrixText {
        rows: m.nrows(),
        cols: m.ncols(),
        data,
    }
}

fn matrix_from(t: &MatrixText) -> Result<DMatrix<f64>> {
    if t.data.len() != t.rows * t.cols {
        return Err(Error::Format(format!(
            "matrix declares {}x{} but has {} entries",
            t.rows,
            t.cols,
            t.data.len()
        )));
    }
    Ok(DMatrix::from_row_slice(
        t.rows,
        t.cols,
        &parse_all(&t.data)?,
    ))
}

fn body_of(rule: &BilinearRule) -> RuleBody {
    RuleBody {
        version: RULE_FORMAT_VERSION.to_string(),
        domain: rule.domain,
        ip: IpText {
            sobolev_order: rule.ip.sobolev_order,
            coefficient: rule.ip.coefficient,
        },
        space: rule.space,
        k: rule.k,
        frame: rule.frame.as_ref().map(|f| FrameText {
            linear: matrix_text(&f.linear()),
            translation: f.translation().iter().map(|v| fmt(*v)).collect(),
        }),
        dim: rule.points_x.dim(),
        points_x: rule.points_x.coords().iter().map(|v| fmt(*v)).collect(),
        points_y: rule.points_y.coords().iter().map(|v| fmt(*v)).collect(),
        w: matrix_text(&rule.w),
        w0: rule.w_split.as_ref().map(|(w0, _)| matrix_text(w0)),
        w1: rule.w_split.as_ref().map(|(_, w1)| matrix_text(w1)),
        sigma: fmt(rule.sigma),
        kappa_inf: rule.kappa_inf.map(fmt),
        provenance: rule.provenance.clone(),
    }
}

fn checksum(body: &RuleBody) -> String {
    let text = serde_json::to_string(body).expect("rule body serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn rule_from(body: &RuleBody) -> Result<BilinearRule> {
    let frame = match &body.frame {
        Some(f) => Some(AffineMap::new(
            matrix_from(&f.linear)?,
            parse_all(&f.translation)?,
        )?),
        None => None,
    };
    let ip = InnerProductSpec {
        domain: body.domain,
        sobolev_order: body.ip.sobolev_order,
        coefficient: body.ip.coefficient,
        frame: None,
    };
    let w_split = match (&body.w0, &body.w1) {
        (Some(a), Some(b)) => Some((matrix_from(a)?, matrix_from(b)?)),
        (None, None) => None,
        _ => return Err(Error::Format("W0 and W1 must appear together".into())),
    };
    let rule = BilinearRule {
        domain: body.domain,
        ip,
        space: body.space,
        k: body.k,
        frame,
        points_x: PointSet::new(body.dim, parse_all(&body.points_x)?)?,
        points_y: PointSet::new(body.dim, parse_all(&body.points_y)?)?,
        w: matrix_from(&body.w)?,
        w_split,
        sigma: parse(&body.sigma)?,
        kappa_inf: body.kappa_inf.as_deref().map(parse).transpose()?,
        provenance: body.provenance.clone(),
    };
    rule.check_invariants()?;
    Ok(rule)
}

/// Serialized file contents.
pub fn to_text(rule: &BilinearRule) -> String {
    let body = body_of(rule);
    let file = RuleFile {
        checksum: checksum(&body),
        body,
    };
    let mut text = serde_json::to_string_pretty(&file).expect("rule file serializes");
    text.push('\n');
    text
}

pub fn save_rule(rule: &BilinearRule, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_text(rule))?;
    Ok(())
}

/// Outcome of the integrity checks on a rule file.
#[derive(Debug, Clone)]
pub struct Integrity {
    pub stored_checksum: String,
    pub computed_checksum: String,
    pub exactness_residual: f64,
}

impl Integrity {
    pub fn checksum_ok(&self) -> bool {
        self.stored_checksum == self.computed_checksum
    }

    pub fn exact(&self) -> bool {
        self.exactness_residual <= EXACTNESS_TOL
    }
}

fn check_version(text: &str) -> Result<()> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let found = value
        .get("version")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::Format("missing version field".into()))?;
    if found != RULE_FORMAT_VERSION {
        return Err(Error::Version {
            found: found.to_string(),
            expected: RULE_FORMAT_VERSION.to_string(),
        });
    }
    Ok(())
}

/// Parses a rule file and reports its integrity without rejecting it.
/// Only a version mismatch or a malformed file is an error.
pub fn read_rule_unverified(path: impl AsRef<Path>) -> Result<(BilinearRule, Integrity)> {
    let text = fs::read_to_string(path)?;
    check_version(&text)?;
    let file: RuleFile = serde_json::from_str(&text)?;
    let rule = rule_from(&file.body)?;
    let integrity = Integrity {
        stored_checksum: file.checksum.clone(),
        computed_checksum: checksum(&file.body),
        exactness_residual: rule.exactness_residual()?,
    };
    Ok((rule, integrity))
}

/// Loads a rule, re-verifying exactness and then the checksum.
pub fn load_rule(path: impl AsRef<Path>) -> Result<BilinearRule> {
    let (rule, integrity) = read_rule_unverified(path)?;
    if !integrity.exact() {
        return Err(Error::ExactnessResidual {
            residual: integrity.exactness_residual,
            tolerance: EXACTNESS_TOL,
        });
    }
    if !integrity.checksum_ok() {
        return Err(Error::Checksum {
            stored: integrity.stored_checksum,
            computed: integrity.computed_checksum,
        });
    }
    Ok(rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::ObjectiveContext;
    use crate::refquad::gauss_legendre;

    fn sample_rule() -> BilinearRule {
        let ctx =
            ObjectiveContext::polynomial(3, InnerProductSpec::l2(Domain::unit_interval())).unwrap();
        let g = gauss_legendre(4, -1.0, 1.0).unwrap();
        BilinearRule::from_points(&ctx, &g.nodes, None).unwrap()
    }

    #[test]
    fn save_load_save_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.rule");
        let b = dir.path().join("b.rule");
        let rule = sample_rule();
        save_rule(&rule, &a).unwrap();
        let loaded = load_rule(&a).unwrap();
        save_rule(&loaded, &b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        assert_eq!(loaded.w, rule.w);
        assert_eq!(loaded.sigma.to_bits(), rule.sigma.to_bits());
    }

    #[test]
    fn tampered_weight_rejected_by_exactness() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.rule");
        let rule = sample_rule();
        let mut body = body_of(&rule);
        body.w.data[0] = fmt(parse(&body.w.data[0]).unwrap() * 1.01);
        let file = RuleFile {
            checksum: checksum(&body_of(&rule)),
            body,
        };
        fs::write(&path, serde_json::to_string_pretty(&file).unwrap()).unwrap();
        assert!(matches!(
            load_rule(&path),
            Err(Error::ExactnessResidual { .. })
        ));
    }

    #[test]
    fn checksum_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.rule");
        let text = to_text(&sample_rule())
            .replace("\"crate_version\"", "\"crate_version\" ")
            .replace(&env!("CARGO_PKG_VERSION").to_string(), "0.0.0-edited");
        fs::write(&path, text).unwrap();
        assert!(matches!(load_rule(&path), Err(Error::Checksum { .. })));
    }

    #[test]
    fn version_required() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.rule");
        let text = to_text(&sample_rule()).replace(RULE_FORMAT_VERSION, "biquad-rule/0");
        fs::write(&path, text).unwrap();
        assert!(matches!(load_rule(&path), Err(Error::Version { .. })));
        assert!(text_has_version(&to_text(&sample_rule())));
    }

    fn text_has_version(t: &str) -> bool {
        t.contains("\"version\": \"biquad-rule/1\"")
    }
}
