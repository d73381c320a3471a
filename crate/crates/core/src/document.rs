//! JSON model documents: parsing with field paths in errors, loading into a
//! model plus repaired connection, and emission of the built-in corpus.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::connection::{
    deform, half_bracket_connection, repair_connection, resolve_table, verify_axioms,
    vezzoni_correction, AxiomReport, ConnectionError, ConnectionTable, DeformationTensor, Ledger,
    RawEntry, TableFrame,
};
use crate::corpus;
use crate::lie_contact::{build_model_with_frame, ContactForm, ContactModel, LieAlgebra, LieError};
use crate::rational::Rational;

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("malformed JSON at {path}: {message}")]
    Json { path: String, message: String },
    #[error("invalid value at {path}: {message}")]
    Field { path: String, message: String },
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error(transparent)]
    Connection(#[from] ConnectionError),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

fn field(path: impl Into<String>, message: impl Into<String>) -> DocumentError {
    DocumentError::Field {
        path: path.into(),
        message: message.into(),
    }
}

/// `{x, y, result}` with `[x, y] = Σ result` or `∇_x y = Σ result`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparseEntry {
    pub x: String,
    pub y: String,
    pub result: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameVector {
    pub name: String,
    pub vector: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameKind {
    Original,
    Adapted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableDocument {
    pub frame: FrameKind,
    pub table: Vec<SparseEntry>,
}

/// A Lie algebra with contact form, optional adapted frame, optional
/// connection table, and optional deformation tensor on 𝒟.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub name: String,
    pub dimension: usize,
    pub basis: Vec<String>,
    pub brackets: Vec<SparseEntry>,
    pub alpha: BTreeMap<String, String>,
    #[serde(default)]
    pub parameters: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<Vec<FrameVector>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connection: Option<TableDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deformation: Option<TableDocument>,
}

pub fn parse_document(text: &str) -> Result<ModelDocument, DocumentError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        DocumentError::Json {
            path,
            message: e.into_inner().to_string(),
        }
    })
}

/// Pretty JSON with a trailing newline.
pub fn emit_document(doc: &ModelDocument) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents serialize");
    s.push('\n');
    s
}

fn parse_rational(path: &str, s: &str) -> Result<Rational, DocumentError> {
    s.parse::<Rational>()
        .map_err(|e| field(path, e.to_string()))
}

fn parse_combination(
    path: &str,
    map: &BTreeMap<String, String>,
    basis: &[String],
) -> Result<Vec<Rational>, DocumentError> {
    let mut v = vec![Rational::ZERO; basis.len()];
    for (name, value) in map {
        let p = format!("{path}.{name}");
        let i = basis
            .iter()
            .position(|b| b == name)
            .ok_or_else(|| field(&p, format!("unknown basis name {name:?}")))?;
        v[i] = parse_rational(&p, value)?;
    }
    Ok(v)
}

fn raw_entries(path: &str, table: &[SparseEntry]) -> Result<Vec<RawEntry>, DocumentError> {
    table
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let result = e
                .result
                .iter()
                .map(|(n, v)| {
                    Ok((
                        n.clone(),
                        parse_rational(&format!("{path}[{k}].result.{n}"), v)?,
                    ))
                })
                .collect::<Result<Vec<_>, DocumentError>>()?;
            Ok(RawEntry {
                x: e.x.clone(),
                y: e.y.clone(),
                result,
            })
        })
        .collect()
}

/// Where the working connection of a loaded document came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConnectionSource {
    Document,
    /// No table given: half-bracket base with the ω-parallel correction.
    DefaultBase,
}

/// A parsed and validated document.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub model: ContactModel,
    pub source: ConnectionSource,
    /// The table after symbol resolution and before repair.
    pub raw: Option<ConnectionTable>,
    pub raw_report: Option<AxiomReport>,
    /// The repaired table, before any deformation.
    pub repaired: ConnectionTable,
    pub deformation: Option<DeformationTensor>,
    /// The working connection: repaired, then deformed.
    pub connection: ConnectionTable,
    pub ledger: Ledger,
}

pub fn build_model_from_document(doc: &ModelDocument) -> Result<ContactModel, DocumentError> {
    if doc.dimension != doc.basis.len() {
        return Err(field(
            "dimension",
            format!(
                "{} does not match {} basis names",
                doc.dimension,
                doc.basis.len()
            ),
        ));
    }
    for (k, name) in doc.basis.iter().enumerate() {
        if doc.basis[..k].contains(name) {
            return Err(field(
                format!("basis[{k}]"),
                format!("duplicate name {name:?}"),
            ));
        }
    }
    let index = |path: String, name: &str| {
        doc.basis
            .iter()
            .position(|b| b == name)
            .ok_or_else(|| field(path, format!("unknown basis name {name:?}")))
    };
    let mut brackets = Vec::with_capacity(doc.brackets.len());
    for (k, e) in doc.brackets.iter().enumerate() {
        let x = index(format!("brackets[{k}].x"), &e.x)?;
        let y = index(format!("brackets[{k}].y"), &e.y)?;
        let v = parse_combination(&format!("brackets[{k}].result"), &e.result, &doc.basis)?;
        brackets.push((x, y, v));
    }
    let algebra = LieAlgebra::new(doc.basis.clone(), &brackets)?;
    let alpha = ContactForm::new(parse_combination("alpha", &doc.alpha, &doc.basis)?);
    let mut parameters = BTreeMap::new();
    for (name, value) in &doc.parameters {
        parameters.insert(
            name.clone(),
            parse_rational(&format!("parameters.{name}"), value)?,
        );
    }
    let frame = match &doc.frame {
        None => None,
        Some(list) => {
            let mut names = Vec::with_capacity(list.len());
            let mut vectors = Vec::with_capacity(list.len());
            for (k, f) in list.iter().enumerate() {
                names.push(f.name.clone());
                vectors.push(parse_combination(
                    &format!("frame[{k}].vector"),
                    &f.vector,
                    &doc.basis,
                )?);
            }
            Some((names, vectors))
        }
    };
    Ok(build_model_with_frame(algebra, alpha, parameters, frame)?.with_name(doc.name.clone()))
}

fn deformation_from(
    model: &ContactModel,
    table: &TableDocument,
) -> Result<DeformationTensor, DocumentError> {
    if table.frame != FrameKind::Adapted {
        return Err(field(
            "deformation.frame",
            "a deformation is given in the adapted frame",
        ));
    }
    let dd = model.xi();
    let mut s = DeformationTensor::zeros(dd);
    let index = |path: String, name: &str| {
        model
            .frame
            .index_of(name)
            .filter(|&i| i < dd)
            .ok_or_else(|| {
                field(
                    path,
                    format!("{name:?} is not a frame vector of the distribution"),
                )
            })
    };
    for (k, e) in table.table.iter().enumerate() {
        let x = index(format!("deformation.table[{k}].x"), &e.x)?;
        let y = index(format!("deformation.table[{k}].y"), &e.y)?;
        for (name, value) in &e.result {
            let p = format!("deformation.table[{k}].result.{name}");
            let c = index(p.clone(), name)?;
            s.s3.add_to(x, y, c, parse_rational(&p, value)?);
        }
    }
    Ok(s)
}

/// Builds the model, resolves and repairs the connection table, and applies
/// the deformation.
pub fn load_model(doc: &ModelDocument) -> Result<LoadedModel, DocumentError> {
    let model = build_model_from_document(doc)?;
    let (source, raw, raw_report, repaired, ledger) = match &doc.connection {
        Some(table) => {
            let frame = match table.frame {
                FrameKind::Original => TableFrame::Original,
                FrameKind::Adapted => TableFrame::Adapted,
            };
            let entries = raw_entries("connection.table", &table.table)?;
            let (raw, mut ledger) = resolve_table(&model, frame, &entries)?;
            let report = verify_axioms(&model, &raw);
            let (fixed, repairs) = repair_connection(&model, &raw);
            ledger.extend(repairs);
            (
                ConnectionSource::Document,
                Some(raw),
                Some(report),
                fixed,
                ledger,
            )
        }
        None => {
            let base = vezzoni_correction(&model, &half_bracket_connection(&model))?;
            (ConnectionSource::DefaultBase, None, None, base, Vec::new())
        }
    };
    let deformation = doc
        .deformation
        .as_ref()
        .map(|t| deformation_from(&model, t))
        .transpose()?;
    let connection = match &deformation {
        Some(s) => deform(&model.omega, &repaired, s)?,
        None => repaired.clone(),
    };
    Ok(LoadedModel {
        model,
        source,
        raw,
        raw_report,
        repaired,
        deformation,
        connection,
        ledger,
    })
}

fn combination(names: &[String], v: &[Rational]) -> BTreeMap<String, String> {
    names
        .iter()
        .zip(v)
        .filter(|(_, q)| !q.is_zero())
        .map(|(n, q)| (n.clone(), q.to_string()))
        .collect()
}

/// Document of a model without connection, with its frame written out.
pub fn model_document(model: &ContactModel) -> ModelDocument {
    let names = model.algebra.names().to_vec();
    let d = names.len();
    let c = model.algebra.structure_constants();
    let mut brackets = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            let v = c.fiber(i, j);
            if v.iter().any(|q| !q.is_zero()) {
                brackets.push(SparseEntry {
                    x: names[i].clone(),
                    y: names[j].clone(),
                    result: combination(&names, &v),
                });
            }
        }
    }
    let frame = (0..d)
        .map(|i| FrameVector {
            name: model.frame.names[i].clone(),
            vector: combination(&names, &model.frame.vector(i)),
        })
        .collect();
    ModelDocument {
        name: model.name.clone(),
        dimension: d,
        basis: names.clone(),
        brackets,
        alpha: combination(&names, &model.alpha.coefficients),
        parameters: model
            .parameters
            .iter()
            .map(|(k, v)| (k.clone(), v.to_string()))
            .collect(),
        frame: Some(frame),
        connection: None,
        deformation: None,
    }
}

/// Sparse adapted-frame table of all nonzero entries.
pub fn table_document(model: &ContactModel, gamma: &ConnectionTable) -> TableDocument {
    let names = &model.frame.names;
    let d = model.dim();
    let mut table = Vec::new();
    for i in 0..d {
        for j in 0..d {
            let v = gamma.entry(i, j);
            if v.iter().any(|q| !q.is_zero()) {
                table.push(SparseEntry {
                    x: names[i].clone(),
                    y: names[j].clone(),
                    result: combination(names, &v),
                });
            }
        }
    }
    TableDocument {
        frame: FrameKind::Adapted,
        table,
    }
}

fn entries_document(entries: &[RawEntry]) -> TableDocument {
    let table = entries
        .iter()
        .map(|e| SparseEntry {
            x: e.x.clone(),
            y: e.y.clone(),
            result: e
                .result
                .iter()
                .map(|(n, q)| (n.clone(), q.to_string()))
                .collect(),
        })
        .collect();
    TableDocument {
        frame: FrameKind::Adapted,
        table,
    }
}

/// Which built-in example to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Example1,
    Example2,
    Example3A,
    Example3B,
}

impl std::str::FromStr for Which {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1" => Ok(Which::Example1),
            "2" => Ok(Which::Example2),
            "3a" | "3A" => Ok(Which::Example3A),
            "3b" | "3B" => Ok(Which::Example3B),
            other => Err(format!(
                "unknown example {other:?}; expected 1, 2, 3a or 3b"
            )),
        }
    }
}

/// Which connection table accompanies an emitted example.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableChoice {
    /// The table as printed (Example 1 family, Example 3 connections).
    Raw,
    /// Example 2: the half-bracket connection `∇′`.
    Prime,
    /// Example 2: the corrected connection `∇̃` as printed.
    Tilde,
    /// Example 2: `∇̃` together with the printed deformation `S`.
    Deformed,
    /// Example 2: the final flat table.
    Flat,
    None,
}

impl std::str::FromStr for TableChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw" => Ok(TableChoice::Raw),
            "prime" => Ok(TableChoice::Prime),
            "tilde" => Ok(TableChoice::Tilde),
            "s" => Ok(TableChoice::Deformed),
            "flat" => Ok(TableChoice::Flat),
            "none" => Ok(TableChoice::None),
            other => Err(format!("unknown table {other:?}")),
        }
    }
}

impl Which {
    pub fn default_table(&self) -> TableChoice {
        match self {
            Which::Example2 => TableChoice::Deformed,
            _ => TableChoice::Raw,
        }
    }
}

/// Builds the document for a built-in example. `s` applies to Examples 2
/// and 3; `params` overrides the Example 1 family coefficients.
pub fn corpus_document(
    which: Which,
    s: Rational,
    table: TableChoice,
    params: &BTreeMap<String, Rational>,
) -> Result<ModelDocument, DocumentError> {
    let unsupported = || {
        field(
            "table",
            format!("table {table:?} is not available for {which:?}"),
        )
    };
    match which {
        Which::Example1 => {
            for k in params.keys() {
                if !["a1", "b1", "c1", "d1", "a2", "b2", "c2", "d2"].contains(&k.as_str()) {
                    return Err(field(
                        format!("parameters.{k}"),
                        "unknown family coefficient",
                    ));
                }
            }
            let p = corpus::Example1Params::from_map(params);
            let mut model = corpus::example1_model();
            model.parameters = p.as_map();
            let mut doc = model_document(&model);
            match table {
                TableChoice::Raw => {
                    doc.connection = Some(entries_document(&corpus::example1_entries(&p)))
                }
                TableChoice::None => {}
                _ => return Err(unsupported()),
            }
            Ok(doc)
        }
        Which::Example2 => {
            let model = corpus::example2_model(s)?;
            let mut doc = model_document(&model);
            match table {
                TableChoice::Prime => {
                    doc.connection = Some(table_document(&model, &half_bracket_connection(&model)))
                }
                TableChoice::Tilde => {
                    doc.connection = Some(entries_document(&corpus::example2_tilde_entries()))
                }
                TableChoice::Deformed => {
                    doc.connection = Some(entries_document(&corpus::example2_tilde_entries()));
                    doc.deformation =
                        Some(entries_document(&corpus::example2_deformation_entries()));
                }
                TableChoice::Flat => {
                    doc.connection = Some(entries_document(&corpus::example2_flat_entries()))
                }
                TableChoice::None => {}
                TableChoice::Raw => return Err(unsupported()),
            }
            Ok(doc)
        }
        Which::Example3A | Which::Example3B => {
            let model = corpus::example3_model(s)?;
            let model = model.with_name(if which == Which::Example3A {
                "example3a"
            } else {
                "example3b"
            });
            let mut doc = model_document(&model);
            match table {
                TableChoice::Raw => {
                    let entries = if which == Which::Example3A {
                        corpus::example3a_entries(s)
                    } else {
                        corpus::example3b_entries(s)
                    };
                    doc.connection = Some(entries_document(&entries));
                }
                TableChoice::None => {}
                _ => return Err(unsupported()),
            }
            Ok(doc)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::{classify, curvature};

    fn q(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn round_trip_is_byte_identical() {
        for which in [
            Which::Example1,
            Which::Example2,
            Which::Example3A,
            Which::Example3B,
        ] {
            for s in [q(1, 1), q(2, 1), q(-1, 2)] {
                let doc =
                    corpus_document(which, s, which.default_table(), &BTreeMap::new()).unwrap();
                let text = emit_document(&doc);
                let again = emit_document(&parse_document(&text).unwrap());
                assert_eq!(text, again);
            }
        }
    }

    #[test]
    fn example2_default_document_is_flat() {
        let doc = corpus_document(
            Which::Example2,
            q(1, 1),
            TableChoice::Deformed,
            &BTreeMap::new(),
        )
        .unwrap();
        let loaded = load_model(&parse_document(&emit_document(&doc)).unwrap()).unwrap();
        assert!(curvature(&loaded.model, &loaded.connection).is_zero());
        assert_eq!(loaded.ledger.len(), 2);
    }

    #[test]
    fn example3b_document_repairs_on_load() {
        let doc = corpus_document(
            Which::Example3B,
            q(1, 1),
            TableChoice::Raw,
            &BTreeMap::new(),
        )
        .unwrap();
        let loaded = load_model(&doc).unwrap();
        assert!(!loaded.raw_report.as_ref().unwrap().all_pass());
        assert!(verify_axioms(&loaded.model, &loaded.connection).all_pass());
        let m = corpus::example3_model(q(1, 1)).unwrap();
        let (g, ledger) = corpus::example3b(&m).unwrap();
        assert_eq!(loaded.connection, g);
        assert_eq!(loaded.ledger, ledger);
    }

    #[test]
    fn missing_connection_uses_default_base() {
        let doc = corpus_document(
            Which::Example3A,
            q(1, 1),
            TableChoice::None,
            &BTreeMap::new(),
        )
        .unwrap();
        let loaded = load_model(&doc).unwrap();
        assert_eq!(loaded.source, ConnectionSource::DefaultBase);
        assert!(classify(&loaded.model, &loaded.connection).is_ok());
    }

    #[test]
    fn example1_parameters_are_substituted() {
        let params = BTreeMap::from([("b1".to_string(), q(2, 1)), ("d1".to_string(), q(1, 3))]);
        let doc = corpus_document(Which::Example1, q(1, 1), TableChoice::Raw, &params).unwrap();
        assert_eq!(doc.parameters.get("b1").map(String::as_str), Some("2"));
        let loaded = load_model(&doc).unwrap();
        let p = corpus::Example1Params::from_map(&params);
        assert_eq!(
            loaded.raw.unwrap(),
            corpus::example1_table(&loaded.model, &p)
        );
        let bad = BTreeMap::from([("z9".to_string(), q(1, 1))]);
        assert!(corpus_document(Which::Example1, q(1, 1), TableChoice::Raw, &bad).is_err());
    }

    #[test]
    fn malformed_json_reports_path() {
        let doc = corpus_document(
            Which::Example2,
            q(1, 1),
            TableChoice::Tilde,
            &BTreeMap::new(),
        )
        .unwrap();
        let text = emit_document(&doc).replacen("\"x\": \"E2\"", "\"x\": 7", 1);
        match parse_document(&text) {
            Err(DocumentError::Json { path, .. }) => assert_eq!(path, "brackets[0].x"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_document("not json"),
            Err(DocumentError::Json { .. })
        ));
    }

    #[test]
    fn bad_values_report_path() {
        let mut doc = corpus_document(
            Which::Example2,
            q(1, 1),
            TableChoice::Tilde,
            &BTreeMap::new(),
        )
        .unwrap();
        doc.alpha.insert("E4".into(), "1/0".into());
        match load_model(&doc) {
            Err(DocumentError::Field { path, .. }) => assert_eq!(path, "alpha.E4"),
            other => panic!("unexpected {other:?}"),
        }
        let mut doc = corpus_document(
            Which::Example2,
            q(1, 1),
            TableChoice::Tilde,
            &BTreeMap::new(),
        )
        .unwrap();
        doc.brackets[1].result.insert("Q".into(), "1".into());
        match load_model(&doc) {
            Err(DocumentError::Field { path, .. }) => assert_eq!(path, "brackets[1].result.Q"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn asymmetric_deformation_rejected() {
        let mut doc = corpus_document(
            Which::Example2,
            q(1, 1),
            TableChoice::Deformed,
            &BTreeMap::new(),
        )
        .unwrap();
        doc.deformation.as_mut().unwrap().table.pop();
        assert!(matches!(
            load_model(&doc),
            Err(DocumentError::Connection(
                ConnectionError::InvalidDeformation(_)
            ))
        ));
    }

    #[test]
    fn unsupported_table_rejected() {
        assert!(corpus_document(
            Which::Example3A,
            q(1, 1),
            TableChoice::Flat,
            &BTreeMap::new()
        )
        .is_err());
        assert!(corpus_document(
            Which::Example2,
            q(0, 1),
            TableChoice::Flat,
            &BTreeMap::new()
        )
        .is_err());
    }
}
