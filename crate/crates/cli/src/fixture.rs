//! JSON fixtures: algebroids, morphisms, metrics and kernel frames over one
//! coordinate chart.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use algebroid_core::connection::KernelFrames;
use algebroid_core::{parse_expression, AlgebroidChart, FieldMatrix, Morphism, ScalarField};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: line {line}, column {column}: {message}")]
    Json {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{at}: {source}")]
    Expression {
        at: String,
        source: algebroid_core::ParseError,
    },
    #[error("{at}: {message}")]
    Shape { at: String, message: String },
    #[error("{at}: unknown {kind} `{name}`")]
    Dangling {
        at: String,
        kind: &'static str,
        name: String,
    },
}

/// A JSON number or an expression string.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawExpr {
    Number(f64),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFixture {
    base: RawBase,
    #[serde(default)]
    algebroids: BTreeMap<String, RawAlgebroid>,
    #[serde(default)]
    morphisms: BTreeMap<String, RawMorphism>,
    #[serde(default)]
    metrics: BTreeMap<String, RawMetric>,
    #[serde(default)]
    kernels: BTreeMap<String, RawKernel>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBase {
    coords: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAlgebroid {
    basis: Vec<String>,
    anchor: Option<Vec<Vec<RawExpr>>>,
    #[serde(default)]
    brackets: Vec<RawBracket>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBracket {
    i: usize,
    j: usize,
    coeffs: BTreeMap<String, RawExpr>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMorphism {
    from: String,
    to: String,
    matrix: Vec<Vec<RawExpr>>,
    source_metric: Option<String>,
    target_metric: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMetric {
    on: String,
    matrix: Vec<Vec<RawExpr>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    #[serde(default)]
    ker: Vec<Vec<RawExpr>>,
    #[serde(default)]
    coker: Vec<Vec<RawExpr>>,
}

#[derive(Debug, Clone)]
pub struct MorphismEntry {
    pub from: String,
    pub to: String,
    pub morphism: Morphism,
    pub source_metric: Option<String>,
    pub target_metric: Option<String>,
}

#[derive(Debug, Clone)]
pub struct MetricEntry {
    pub on: String,
    pub matrix: FieldMatrix,
}

/// A loaded fixture with every expression parsed and every name resolved.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub coords: Vec<String>,
    pub algebroids: BTreeMap<String, Arc<AlgebroidChart>>,
    pub morphisms: BTreeMap<String, MorphismEntry>,
    pub metrics: BTreeMap<String, MetricEntry>,
    pub kernels: BTreeMap<String, KernelFrames>,
}

pub fn load_fixture(path: impl AsRef<Path>) -> Result<Fixture, FixtureError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| FixtureError::Io {
        path: shown.clone(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| shown.clone());
    parse_fixture(&name, &text).map_err(|e| match e {
        FixtureError::Json {
            line,
            column,
            message,
            ..
        } => FixtureError::Json {
            path: shown,
            line,
            column,
            message,
        },
        other => other,
    })
}

/// Parses fixture JSON; `name` labels the fixture in reports.
pub fn parse_fixture(name: &str, text: &str) -> Result<Fixture, FixtureError> {
    let raw: RawFixture = serde_json::from_str(text).map_err(|e| FixtureError::Json {
        path: name.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let coords = raw.base.coords.clone();
    let expr = |at: &str, e: &RawExpr| -> Result<ScalarField, FixtureError> {
        match e {
            RawExpr::Number(v) => Ok(ScalarField::constant(*v)),
            RawExpr::Text(t) => {
                parse_expression(t, &coords).map_err(|source| FixtureError::Expression {
                    at: at.to_string(),
                    source,
                })
            }
        }
    };
    let matrix = |at: &str,
                  rows: &[Vec<RawExpr>],
                  shape: (usize, usize)|
     -> Result<Vec<Vec<ScalarField>>, FixtureError> {
        if rows.len() != shape.0 {
            return Err(FixtureError::Shape {
                at: at.to_string(),
                message: format!("expected {} rows, found {}", shape.0, rows.len()),
            });
        }
        rows.iter()
            .enumerate()
            .map(|(r, row)| {
                if row.len() != shape.1 {
                    return Err(FixtureError::Shape {
                        at: format!("{at}[{r}]"),
                        message: format!("expected {} entries, found {}", shape.1, row.len()),
                    });
                }
                row.iter()
                    .enumerate()
                    .map(|(c, e)| expr(&format!("{at}[{r}][{c}]"), e))
                    .collect()
            })
            .collect()
    };

    let m = coords.len();
    let mut algebroids = BTreeMap::new();
    for (an, a) in &raw.algebroids {
        let at = format!("algebroids.{an}");
        let s = a.basis.len();
        let anchor = match &a.anchor {
            Some(rows) => matrix(&format!("{at}.anchor"), rows, (s, m))?,
            None => vec![vec![ScalarField::zero(); m]; s],
        };
        let mut brackets = Vec::new();
        for (n, b) in a.brackets.iter().enumerate() {
            let bat = format!("{at}.brackets[{n}]");
            for idx in [b.i, b.j] {
                if idx == 0 || idx > s {
                    return Err(FixtureError::Shape {
                        at: bat,
                        message: format!("basis index {idx} outside 1..={s}"),
                    });
                }
            }
            let mut coeffs = vec![ScalarField::zero(); s];
            for (k, v) in &b.coeffs {
                let kat = format!("{bat}.coeffs.{k}");
                let idx = k
                    .parse::<usize>()
                    .ok()
                    .filter(|&k| k >= 1 && k <= s)
                    .ok_or_else(|| FixtureError::Shape {
                        at: kat.clone(),
                        message: format!("coefficient key must be a basis index in 1..={s}"),
                    })?;
                coeffs[idx - 1] = expr(&kat, v)?;
            }
            brackets.push((b.i - 1, b.j - 1, coeffs));
        }
        let chart = AlgebroidChart::new(coords.clone(), a.basis.clone(), anchor, brackets)
            .map_err(|e| FixtureError::Shape {
                at: at.clone(),
                message: e.to_string(),
            })?;
        algebroids.insert(an.clone(), chart.shared());
    }

    let lookup = |at: &str, name: &str| {
        algebroids
            .get(name)
            .cloned()
            .ok_or_else(|| FixtureError::Dangling {
                at: at.to_string(),
                kind: "algebroid",
                name: name.to_string(),
            })
    };

    let mut metrics = BTreeMap::new();
    for (gn, g) in &raw.metrics {
        let at = format!("metrics.{gn}");
        let on = lookup(&format!("{at}.on"), &g.on)?;
        let s = on.rank();
        let rows = matrix(&format!("{at}.matrix"), &g.matrix, (s, s))?;
        metrics.insert(
            gn.clone(),
            MetricEntry {
                on: g.on.clone(),
                matrix: FieldMatrix::from_rows(rows).map_err(|e| FixtureError::Shape {
                    at: at.clone(),
                    message: e.to_string(),
                })?,
            },
        );
    }

    let mut morphisms = BTreeMap::new();
    for (mn, mo) in &raw.morphisms {
        let at = format!("morphisms.{mn}");
        let from = lookup(&format!("{at}.from"), &mo.from)?;
        let to = lookup(&format!("{at}.to"), &mo.to)?;
        for (field, metric, algebroid) in [
            ("source_metric", &mo.source_metric, &mo.from),
            ("target_metric", &mo.target_metric, &mo.to),
        ] {
            if let Some(g) = metric {
                let entry = metrics.get(g).ok_or_else(|| FixtureError::Dangling {
                    at: format!("{at}.{field}"),
                    kind: "metric",
                    name: g.clone(),
                })?;
                if &entry.on != algebroid {
                    return Err(FixtureError::Shape {
                        at: format!("{at}.{field}"),
                        message: format!("metric `{g}` lives on `{}`, not `{algebroid}`", entry.on),
                    });
                }
            }
        }
        let rows = matrix(
            &format!("{at}.matrix"),
            &mo.matrix,
            (from.rank(), to.rank()),
        )?;
        let morphism = Morphism::new(from, to, rows).map_err(|e| FixtureError::Shape {
            at: at.clone(),
            message: e.to_string(),
        })?;
        morphisms.insert(
            mn.clone(),
            MorphismEntry {
                from: mo.from.clone(),
                to: mo.to.clone(),
                morphism,
                source_metric: mo.source_metric.clone(),
                target_metric: mo.target_metric.clone(),
            },
        );
    }

    let mut kernels = BTreeMap::new();
    for (mn, k) in &raw.kernels {
        let at = format!("kernels.{mn}");
        let entry = morphisms.get(mn).ok_or_else(|| FixtureError::Dangling {
            at: at.clone(),
            kind: "morphism",
            name: mn.clone(),
        })?;
        let (s, t) = (
            entry.morphism.source().rank(),
            entry.morphism.target().rank(),
        );
        let ker = matrix(&format!("{at}.ker"), &k.ker, (k.ker.len(), s))?;
        let coker = matrix(&format!("{at}.coker"), &k.coker, (k.coker.len(), t))?;
        kernels.insert(mn.clone(), KernelFrames { ker, coker });
    }

    Ok(Fixture {
        name: name.to_string(),
        coords,
        algebroids,
        morphisms,
        metrics,
        kernels,
    })
}

impl Fixture {
    pub fn algebroid(&self, name: &str) -> Result<&Arc<AlgebroidChart>, FixtureError> {
        self.algebroids
            .get(name)
            .ok_or_else(|| FixtureError::Dangling {
                at: "command line".into(),
                kind: "algebroid",
                name: name.to_string(),
            })
    }

    pub fn morphism(&self, name: &str) -> Result<&MorphismEntry, FixtureError> {
        self.morphisms
            .get(name)
            .ok_or_else(|| FixtureError::Dangling {
                at: "command line".into(),
                kind: "morphism",
                name: name.to_string(),
            })
    }

    /// The named metric, else the first metric declared on `algebroid`.
    pub fn metric_for(&self, algebroid: &str, named: Option<&String>) -> Option<FieldMatrix> {
        match named {
            Some(n) => self.metrics.get(n).map(|g| g.matrix.clone()),
            None => self
                .metrics
                .values()
                .find(|g| g.on == algebroid)
                .map(|g| g.matrix.clone()),
        }
    }
}
