//! The `ctwist` command line: model ingestion, axiom checks, curvature and
//! classification reports, normality scans, deformation search, Siegel
//! diagnostics and the built-in example corpus.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::connection::{verify_axioms, AxiomReport, ConnectionTable, LedgerEntry, LedgerKind};
use crate::curvature::{classify, curvature, ClassificationReport, CurvatureTensor};
use crate::document::{
    corpus_document, emit_document, load_model, parse_document, table_document, DocumentError,
    LoadedModel, TableChoice, TableDocument, Which,
};
use crate::fiber::{j_of_z, verify_siegel_model, SiegelPoint, SiegelReport};
use crate::lie_contact::ContactModel;
use crate::rational::Rational;
use crate::solver::{
    solve, Objective, ObjectiveKind, ProgressEvent, Solution, SolverError, SolverOptions,
};
use crate::twistor::{normality_scan, ScanOptions, ScanReport, ScanWitness};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PROPERTY: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "ctwist",
    version,
    about = "Contact connections, curvature and contact twistor spaces"
)]
pub struct Cli {
    /// Write the JSON report to this file instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    pub report: Option<PathBuf>,
    /// Stream solver iterations as line-delimited JSON on standard error.
    #[arg(long, global = true)]
    pub progress: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Verify the contact axioms and ∇ω = 0, and list the repair ledger.
    Check(ModelArg),
    /// Curvature summary and nonzero curvature components.
    Curvature(ModelArg),
    /// Normality and CR-integrability verdicts.
    Classify(ModelArg),
    /// Numerical normality scan over sampled fibre points.
    Scan(ScanArgs),
    /// Search for a deformation with the requested curvature property.
    Solve(SolveArgs),
    /// Siegel upper half-space diagnostics.
    Fiber(FiberArgs),
    /// Emit a built-in example document.
    Examples(ExampleArgs),
}

#[derive(Debug, Args)]
pub struct ModelArg {
    /// Model document (JSON).
    pub model: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// Model document (JSON).
    pub model: PathBuf,
    /// Which almost contact structure to test, 1 or 2.
    #[arg(long, default_value_t = 1)]
    pub k: u8,
    /// Number of fibre points, including `J₀`.
    #[arg(long, default_value_t = 25)]
    pub samples: usize,
    /// Seed for the Siegel samples.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Positive scale of the vertical part of the twistor metric.
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Model document (JSON).
    pub model: PathBuf,
    /// flat, ricci_type, reeb_flat or normal.
    #[arg(long, default_value = "flat")]
    pub objective: ObjectiveKind,
    /// Number of starting points; the first is the undeformed connection.
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
    /// Seed for the random starting points.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest denominator tried when rationalizing a solution.
    #[arg(long = "max-den", default_value_t = 1000)]
    pub max_den: u64,
    /// Iteration cap per restart.
    #[arg(long = "max-iterations", default_value_t = 200)]
    pub max_iterations: usize,
    /// Residual norm accepted as converged.
    #[arg(long, default_value_t = 1e-12)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct FiberArgs {
    /// Half the dimension of the contact distribution.
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Number of sampled Siegel points.
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    /// Seed for the samples.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ExampleArgs {
    /// 1, 2, 3a or 3b.
    #[arg(long)]
    pub which: Which,
    /// Structure parameter of Examples 2 and 3.
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub s: Rational,
    /// raw, prime, tilde, s, flat or none.
    #[arg(long)]
    pub table: Option<TableChoice>,
    /// Example 1 family coefficient, as `name=value`.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    /// Write the document here instead of standard output.
    #[arg(long)]
    pub emit: Option<PathBuf>,
}

/// Frame-labelled report of a single command.
#[derive(Debug, Clone, Serialize)]
pub struct ReportDocument {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelEcho>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axioms: Option<AxiomSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ledger: Option<Vec<LedgerRecord>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curvature: Option<CurvatureSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fiber: Option<FiberSection>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelEcho {
    pub name: String,
    pub dimension: usize,
    pub basis: Vec<String>,
    pub frame: Vec<String>,
    pub parameters: BTreeMap<String, String>,
    /// `document` or `default_base`.
    pub connection_source: String,
    pub deformed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomStatus {
    pub passes: bool,
    pub status: BTreeMap<String, bool>,
    pub implication_holds: bool,
    pub violations: Vec<ViolationRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ViolationRecord {
    pub axiom: String,
    pub indices: Vec<String>,
    pub residual: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomSection {
    /// The table as read, before repair.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw: Option<AxiomStatus>,
    /// The working connection.
    pub connection: AxiomStatus,
}

#[derive(Debug, Clone, Serialize)]
pub struct LedgerRecord {
    pub entry: String,
    pub kind: String,
    pub detail: String,
    pub old: String,
    pub new: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvatureSummary {
    pub flat: bool,
    pub reeb_flat: bool,
    pub ricci_type: bool,
    pub ricci_type_residual: String,
    pub ricci_type_residual_exact: String,
    /// The verdicts come from exact rational arithmetic.
    pub exact: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ricci_type_witness: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<CurvatureComponent>>,
}

/// `R(x, y) z` for frame vectors, nonzero values only.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureComponent {
    pub x: String,
    pub y: String,
    pub z: String,
    pub value: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationSection {
    pub is_flat: bool,
    pub reeb_flat: bool,
    pub ricci_type: bool,
    pub normal_phi1: bool,
    pub normal_phi2: bool,
    pub cr1_integrable: bool,
    pub cr2_integrable: bool,
    pub xi_h_killing: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessRecord {
    pub sample: usize,
    pub x: String,
    pub y: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanSection {
    pub k: u8,
    pub samples: usize,
    pub seed: u64,
    pub t: f64,
    pub max_dd: String,
    pub max_xi: String,
    pub max_mixed: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_dd: Option<WitnessRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_xi: Option<WitnessRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_mixed: Option<WitnessRecord>,
    pub normal: bool,
    pub cr_integrable: bool,
    /// The scan verdicts equal the exact classification.
    pub agrees_with_classification: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverSection {
    pub objective: ObjectiveKind,
    pub converged: bool,
    pub residual_norm: String,
    pub iterations: usize,
    pub restart_index: usize,
    pub coefficients: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rational_coefficients: Option<Vec<String>>,
    pub exact_zero: bool,
    /// The rational deformation in the adapted frame, when one was found.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deformation: Option<TableDocument>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationSection>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FiberSection {
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub base_flipped: bool,
    /// `J(iI)` row-major.
    pub base_j: Vec<Vec<String>>,
    pub base_defect: String,
    pub max_square_defect: String,
    pub max_tangent_defect: String,
    pub max_metric_error: String,
    pub max_holomorphy_error: String,
    pub holomorphy_sign: f64,
    pub passes: bool,
}

fn decimal(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.11e}")
}

fn sparse(names: &[String], v: &[Rational]) -> BTreeMap<String, String> {
    names
        .iter()
        .zip(v)
        .filter(|(_, q)| !q.is_zero())
        .map(|(n, q)| (n.clone(), q.to_string()))
        .collect()
}

fn axiom_status(model: &ContactModel, report: &AxiomReport) -> AxiomStatus {
    let names = &model.frame.names;
    AxiomStatus {
        passes: report.all_pass(),
        status: report
            .status
            .iter()
            .map(|(a, ok)| (a.label().to_string(), *ok))
            .collect(),
        implication_holds: report.implication_holds,
        violations: report
            .violations
            .iter()
            .map(|v| ViolationRecord {
                axiom: v.axiom.label().to_string(),
                indices: v.indices.iter().map(|&i| names[i].clone()).collect(),
                residual: v.residual.to_string(),
            })
            .collect(),
    }
}

fn ledger_record(model: &ContactModel, e: &LedgerEntry) -> LedgerRecord {
    let names = &model.frame.names;
    let (kind, detail) = match &e.kind {
        LedgerKind::Symbol { symbol, resolved } => {
            ("symbol", format!("{symbol} read as {resolved}"))
        }
        LedgerKind::Forced(a) => ("forced", a.label().to_string()),
        LedgerKind::Linear { ambiguous } => (
            "linear",
            if *ambiguous {
                "ambiguous".to_string()
            } else {
                "unique".to_string()
            },
        ),
    };
    let fmt = |v: &[Rational]| crate::connection::format_vector(names, v);
    LedgerRecord {
        entry: format!("∇_{{{}}}{}", names[e.x], names[e.y]),
        kind: kind.to_string(),
        detail,
        old: fmt(&e.old),
        new: fmt(&e.new),
    }
}

fn classification_section(c: &ClassificationReport) -> ClassificationSection {
    ClassificationSection {
        is_flat: c.is_flat,
        reeb_flat: c.reeb_flat,
        ricci_type: c.ricci_type,
        normal_phi1: c.normal_phi1,
        normal_phi2: c.normal_phi2,
        cr1_integrable: c.cr1_integrable,
        cr2_integrable: c.cr2_integrable,
        xi_h_killing: c.xi_h_killing,
    }
}

fn curvature_summary(
    model: &ContactModel,
    c: &ClassificationReport,
    r: Option<&CurvatureTensor>,
) -> CurvatureSummary {
    let names = &model.frame.names;
    let components = r.map(|r| {
        let d = model.dim();
        let mut out = Vec::new();
        for x in 0..d {
            for y in x + 1..d {
                for z in 0..d {
                    let v: Vec<Rational> = (0..d).map(|l| r.r.get(x, y, z, l)).collect();
                    if v.iter().any(|q| !q.is_zero()) {
                        out.push(CurvatureComponent {
                            x: names[x].clone(),
                            y: names[y].clone(),
                            z: names[z].clone(),
                            value: sparse(names, &v),
                        });
                    }
                }
            }
        }
        out
    });
    CurvatureSummary {
        flat: c.is_flat,
        reeb_flat: c.reeb_flat,
        ricci_type: c.ricci_type,
        ricci_type_residual: decimal(c.ricci_type_residual_norm.to_f64()),
        ricci_type_residual_exact: c.ricci_type_residual_norm.to_string(),
        exact: true,
        ricci_type_witness: c
            .ricci_type_witness
            .map(|w| w.iter().map(|&i| names[i].clone()).collect()),
        components,
    }
}

fn model_echo(loaded: &LoadedModel) -> ModelEcho {
    let m = &loaded.model;
    ModelEcho {
        name: m.name.clone(),
        dimension: m.dim(),
        basis: m.algebra.names().to_vec(),
        frame: m.frame.names.clone(),
        parameters: m
            .parameters
            .iter()
            .map(|(k, v)| (k.clone(), v.to_string()))
            .collect(),
        connection_source: match loaded.source {
            crate::document::ConnectionSource::Document => "document".to_string(),
            crate::document::ConnectionSource::DefaultBase => "default_base".to_string(),
        },
        deformed: loaded.deformation.is_some(),
    }
}

fn witness(model: &ContactModel, w: Option<ScanWitness>, mixed: bool) -> Option<WitnessRecord> {
    let names = &model.frame.names;
    w.map(|w| WitnessRecord {
        sample: w.sample,
        x: names[w.x].clone(),
        y: if mixed {
            format!("V{}", w.y)
        } else {
            names[w.y].clone()
        },
    })
}

/// Whether a scan reproduces the exact verdicts for its `k`.
pub fn scan_agrees(scan: &ScanReport, c: &ClassificationReport) -> bool {
    match scan.k {
        1 => scan.normal == c.normal_phi1 && scan.cr_integrable == c.cr1_integrable,
        _ => scan.normal == c.normal_phi2 && scan.cr_integrable == c.cr2_integrable,
    }
}

fn empty_report(command: &str) -> ReportDocument {
    ReportDocument {
        tool: "ctwist".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        model: None,
        axioms: None,
        ledger: None,
        curvature: None,
        classification: None,
        scan: None,
        solver: None,
        fiber: None,
    }
}

enum Failure {
    Input(String),
    NoConvergence(Box<ReportDocument>, String),
}

impl From<DocumentError> for Failure {
    fn from(e: DocumentError) -> Self {
        Failure::Input(e.to_string())
    }
}

fn read_model(path: &PathBuf) -> Result<LoadedModel, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
    let doc =
        parse_document(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    load_model(&doc).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn base_report(command: &str, loaded: &LoadedModel) -> ReportDocument {
    let mut report = empty_report(command);
    report.model = Some(model_echo(loaded));
    report.ledger = Some(
        loaded
            .ledger
            .iter()
            .map(|e| ledger_record(&loaded.model, e))
            .collect(),
    );
    report
}

fn classify_loaded(loaded: &LoadedModel) -> Result<ClassificationReport, Failure> {
    classify(&loaded.model, &loaded.connection).map_err(|e| Failure::Input(e.to_string()))
}

fn cmd_check(args: &ModelArg) -> Result<(ReportDocument, i32), Failure> {
    let loaded = read_model(&args.model)?;
    let mut report = base_report("check", &loaded);
    let raw = loaded
        .raw_report
        .as_ref()
        .map(|r| axiom_status(&loaded.model, r));
    let working = verify_axioms(&loaded.model, &loaded.connection);
    let ok = raw.as_ref().is_none_or(|r| r.passes && r.implication_holds)
        && working.all_pass()
        && working.passes(crate::connection::Axiom::NablaOmega);
    report.axioms = Some(AxiomSection {
        raw,
        connection: axiom_status(&loaded.model, &working),
    });
    Ok((report, if ok { EXIT_OK } else { EXIT_PROPERTY }))
}

fn cmd_curvature(args: &ModelArg) -> Result<(ReportDocument, i32), Failure> {
    let loaded = read_model(&args.model)?;
    let c = classify_loaded(&loaded)?;
    let r = curvature(&loaded.model, &loaded.connection);
    let mut report = base_report("curvature", &loaded);
    report.curvature = Some(curvature_summary(&loaded.model, &c, Some(&r)));
    Ok((report, EXIT_OK))
}

fn cmd_classify(args: &ModelArg) -> Result<(ReportDocument, i32), Failure> {
    let loaded = read_model(&args.model)?;
    let c = classify_loaded(&loaded)?;
    let mut report = base_report("classify", &loaded);
    report.curvature = Some(curvature_summary(&loaded.model, &c, None));
    report.classification = Some(classification_section(&c));
    Ok((report, EXIT_OK))
}

fn cmd_scan(args: &ScanArgs) -> Result<(ReportDocument, i32), Failure> {
    let loaded = read_model(&args.model)?;
    let c = classify_loaded(&loaded)?;
    let options = ScanOptions {
        k: args.k,
        samples: args.samples,
        seed: args.seed,
        t: args.t,
    };
    if options.samples == 0 {
        return Err(Failure::Input("--samples must be positive".to_string()));
    }
    let scan = normality_scan(&loaded.model, &loaded.connection, &options)
        .map_err(|e| Failure::Input(e.to_string()))?;
    let agrees = scan_agrees(&scan, &c);
    let m = &loaded.model;
    let mut report = base_report("scan", &loaded);
    report.classification = Some(classification_section(&c));
    report.scan = Some(ScanSection {
        k: scan.k,
        samples: scan.samples,
        seed: args.seed,
        t: scan.t,
        max_dd: decimal(scan.max_dd),
        max_xi: decimal(scan.max_xi),
        max_mixed: decimal(scan.max_mixed),
        witness_dd: witness(m, scan.witness_dd, false),
        witness_xi: witness(m, scan.witness_xi, false),
        witness_mixed: witness(m, scan.witness_mixed, true),
        normal: scan.normal,
        cr_integrable: scan.cr_integrable,
        agrees_with_classification: agrees,
    });
    Ok((report, if agrees { EXIT_OK } else { EXIT_PROPERTY }))
}

fn solver_section(
    model: &ContactModel,
    base: &ConnectionTable,
    kind: ObjectiveKind,
    sol: &Solution,
    converged: bool,
) -> SolverSection {
    let rational = sol.rationalized.as_ref();
    let classification = rational.filter(|r| r.exact_zero).and_then(|r| {
        crate::connection::deform(&model.omega, base, &r.s)
            .ok()
            .and_then(|g| classify(model, &g).ok())
    });
    SolverSection {
        objective: kind,
        converged,
        residual_norm: decimal(sol.residual_norm),
        iterations: sol.iterations,
        restart_index: sol.restart_index,
        coefficients: sol.coefficients.iter().map(|&x| decimal(x)).collect(),
        rational_coefficients: rational
            .map(|r| r.coefficients.iter().map(|q| q.to_string()).collect()),
        exact_zero: rational.is_some_and(|r| r.exact_zero),
        deformation: rational.map(|r| {
            let mut g = ConnectionTable::zeros(model.dim());
            for i in 0..model.xi() {
                for j in 0..model.xi() {
                    let mut v = vec![Rational::ZERO; model.dim()];
                    for (k, slot) in v.iter_mut().enumerate().take(model.xi()) {
                        *slot = r.s.s3.get(i, j, k);
                    }
                    g.set_entry(i, j, &v);
                }
            }
            table_document(model, &g)
        }),
        classification: classification.as_ref().map(classification_section),
    }
}

fn cmd_solve(
    args: &SolveArgs,
    progress: Option<&mut dyn FnMut(&ProgressEvent)>,
) -> Result<(ReportDocument, i32), Failure> {
    let loaded = read_model(&args.model)?;
    let options = SolverOptions {
        max_iterations: args.max_iterations,
        restarts: args.restarts,
        seed: args.seed,
        tolerance: args.tolerance,
        max_denominator: args.max_den,
        parallel: true,
        ..SolverOptions::default()
    };
    let mut report = base_report("solve", &loaded);
    let outcome = solve(
        &loaded.model,
        &loaded.connection,
        Objective::new(args.objective),
        &options,
        progress,
    );
    match outcome {
        Ok(sol) => {
            report.solver = Some(solver_section(
                &loaded.model,
                &loaded.connection,
                args.objective,
                &sol,
                true,
            ));
            Ok((report, EXIT_OK))
        }
        Err(SolverError::NoConvergence { best }) => {
            report.solver = Some(solver_section(
                &loaded.model,
                &loaded.connection,
                args.objective,
                &best,
                false,
            ));
            let msg = format!(
                "no restart converged; best residual {}",
                decimal(best.residual_norm)
            );
            Err(Failure::NoConvergence(Box::new(report), msg))
        }
        Err(e) => Err(Failure::Input(e.to_string())),
    }
}

fn fiber_section(args: &FiberArgs, r: &SiegelReport) -> FiberSection {
    let base = j_of_z(&SiegelPoint::base(args.n)).expect("iI is a Siegel point");
    let m = &base.j.matrix;
    FiberSection {
        n: r.n,
        samples: r.samples,
        seed: args.seed,
        base_flipped: r.base_flipped,
        base_j: (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| decimal(m[(i, j)])).collect())
            .collect(),
        base_defect: decimal(r.base_defect),
        max_square_defect: decimal(r.max_square_defect),
        max_tangent_defect: decimal(r.max_tangent_defect),
        max_metric_error: decimal(r.max_metric_error),
        max_holomorphy_error: decimal(r.max_holomorphy_error),
        holomorphy_sign: r.holomorphy_sign,
        passes: r.passes(),
    }
}

fn cmd_fiber(args: &FiberArgs) -> Result<(ReportDocument, i32), Failure> {
    if args.n == 0 {
        return Err(Failure::Input("--n must be positive".to_string()));
    }
    let r = verify_siegel_model(args.n, args.samples, args.seed);
    let mut report = empty_report("fiber");
    report.fiber = Some(fiber_section(args, &r));
    Ok((report, if r.passes() { EXIT_OK } else { EXIT_PROPERTY }))
}

fn cmd_examples(args: &ExampleArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let mut params = BTreeMap::new();
    for p in &args.params {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| Failure::Input(format!("--param {p:?} is not NAME=VALUE")))?;
        let q: Rational = v
            .parse()
            .map_err(|e| Failure::Input(format!("--param {k}: {e}")))?;
        params.insert(k.to_string(), q);
    }
    if !params.is_empty() && args.which != Which::Example1 {
        return Err(Failure::Input(
            "--param applies to example 1 only".to_string(),
        ));
    }
    let table = args.table.unwrap_or_else(|| args.which.default_table());
    let doc = corpus_document(args.which, args.s, table, &params)?;
    load_model(&doc)?;
    let text = emit_document(&doc);
    match &args.emit {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))?,
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Input(e.to_string()))?,
    }
    Ok(EXIT_OK)
}

fn write_report(
    report: &ReportDocument,
    path: Option<&PathBuf>,
    out: &mut dyn Write,
) -> Result<(), String> {
    let mut text = serde_json::to_string_pretty(report).map_err(|e| e.to_string())?;
    text.push('\n');
    match path {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| format!("cannot write {}: {e}", p.display()))
        }
        None => out.write_all(text.as_bytes()).map_err(|e| e.to_string()),
    }
}

/// Runs one command line; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Check(a) => cmd_check(a),
        Command::Curvature(a) => cmd_curvature(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Scan(a) => cmd_scan(a),
        Command::Solve(a) => {
            let mut sink = |e: &ProgressEvent| {
                if let Ok(line) = serde_json::to_string(e) {
                    let _ = writeln!(err, "{line}");
                }
            };
            let progress: Option<&mut dyn FnMut(&ProgressEvent)> =
                if cli.progress { Some(&mut sink) } else { None };
            cmd_solve(a, progress)
        }
        Command::Fiber(a) => cmd_fiber(a),
        Command::Examples(a) => {
            return match cmd_examples(a, out) {
                Ok(code) => code,
                Err(Failure::Input(msg)) | Err(Failure::NoConvergence(_, msg)) => {
                    let _ = writeln!(err, "error: {msg}");
                    EXIT_INPUT
                }
            }
        }
    };
    let (report, code) = match outcome {
        Ok(pair) => pair,
        Err(Failure::Input(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            return EXIT_INPUT;
        }
        Err(Failure::NoConvergence(report, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            (*report, EXIT_NO_CONVERGENCE)
        }
    };
    if let Err(msg) = write_report(&report, cli.report.as_ref(), out) {
        let _ = writeln!(err, "error: {msg}");
        return EXIT_INPUT;
    }
    code
}
