//! Search of the affine space of contact connections `∇ + S` for connections
//! whose curvature meets a target: flat, Ricci type, Reeb-flat, or normal.
//!
//! The decision variables are the coefficients of the totally symmetric
//! tensor `ω(S(·,·),·)` on 𝒟, so every candidate is an admissible deformation.
//! The residual is quadratic in these coefficients and is minimized by
//! damped least squares with random restarts; converged points are rounded
//! to small-denominator rationals and re-verified exactly.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::connection::{
    deform_unchecked, omega_inverse_transpose, symmetric_triples, verify_axioms, ConnectionTable,
    DeformationTensor,
};
use crate::curvature::{
    curvature_derivative, curvature_from, rd_tensor_frame, ricci_type_residual, CurvatureTensor,
};
use crate::lie_contact::ContactModel;
use crate::linalg::{Matrix, QMatrix, Tensor3};
use crate::rational::{Rational, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("base connection is not a contact connection: {0}")]
    InvalidBase(String),
    #[error("invalid solver option: {0}")]
    BadOptions(String),
    #[error("no restart converged; best residual {}", best.residual_norm)]
    NoConvergence { best: Box<Solution> },
    #[error("expected {expected} coefficients, got {got}")]
    WrongParameterCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    Flat,
    RicciType,
    ReebFlat,
    Normal,
}

impl ObjectiveKind {
    pub fn label(&self) -> &'static str {
        match self {
            ObjectiveKind::Flat => "flat",
            ObjectiveKind::RicciType => "ricci_type",
            ObjectiveKind::ReebFlat => "reeb_flat",
            ObjectiveKind::Normal => "normal",
        }
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ObjectiveKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "flat" => Ok(ObjectiveKind::Flat),
            "ricci" | "ricci_type" => Ok(ObjectiveKind::RicciType),
            "reeb" | "reeb_flat" => Ok(ObjectiveKind::ReebFlat),
            "normal" => Ok(ObjectiveKind::Normal),
            other => Err(format!("unknown objective {other:?}")),
        }
    }
}

/// Target curvature property with per-block weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub kind: ObjectiveKind,
    pub flat_weight: f64,
    pub ricci_weight: f64,
    pub reeb_weight: f64,
}

impl Objective {
    pub fn new(kind: ObjectiveKind) -> Self {
        Objective {
            kind,
            flat_weight: 1.0,
            ricci_weight: 1.0,
            reeb_weight: 1.0,
        }
    }

    fn blocks(&self) -> Vec<(Block, f64)> {
        match self.kind {
            ObjectiveKind::Flat => vec![(Block::Flat, self.flat_weight)],
            ObjectiveKind::RicciType => vec![(Block::Ricci, self.ricci_weight)],
            ObjectiveKind::ReebFlat => vec![(Block::Reeb, self.reeb_weight)],
            ObjectiveKind::Normal => vec![
                (Block::Ricci, self.ricci_weight),
                (Block::Reeb, self.reeb_weight),
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Block {
    Flat,
    Ricci,
    Reeb,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Convergence threshold on the sup-norm of the residual.
    pub tolerance: f64,
    pub damping_init: f64,
    pub max_denominator: u64,
    /// Run restarts on the rayon pool.
    pub parallel: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 200,
            restarts: 20,
            seed: 0,
            tolerance: 1e-12,
            damping_init: 1e-3,
            max_denominator: 1000,
            parallel: false,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<(), SolverError> {
        let bad = |what: &str| Err(SolverError::BadOptions(format!("{what} must be positive")));
        if self.max_iterations == 0 {
            return bad("max_iterations");
        }
        if self.restarts == 0 {
            return bad("restarts");
        }
        if self.tolerance.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return bad("tolerance");
        }
        if self.damping_init.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return bad("damping_init");
        }
        if self.max_denominator == 0 {
            return bad("max_denominator");
        }
        Ok(())
    }
}

/// Exact rounding of a float solution that passed exact re-verification.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalSolution {
    pub coefficients: Vec<Rational>,
    pub s: DeformationTensor<Rational>,
    /// The objective's residual vanishes identically at these coefficients.
    pub exact_zero: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub coefficients: Vec<f64>,
    pub s: DeformationTensor<f64>,
    pub residual_norm: f64,
    pub rationalized: Option<RationalSolution>,
    pub iterations: usize,
    pub restart_index: usize,
}

/// One damped least-squares iteration of one restart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProgressEvent {
    pub restart: usize,
    pub iteration: usize,
    pub residual: f64,
    pub damping: f64,
}

/// Precomputed data for evaluating the residual and its Jacobian.
#[derive(Debug, Clone)]
pub struct Problem {
    objective: Objective,
    constants: Tensor3<f64>,
    constants_exact: Tensor3<Rational>,
    base: ConnectionTable<f64>,
    base_exact: ConnectionTable<Rational>,
    omega: Matrix<f64>,
    omega_inv: Matrix<f64>,
    omega_exact: QMatrix,
    omega_inv_exact: QMatrix,
    omega_inv_t_exact: QMatrix,
    directions: Vec<ConnectionTable<f64>>,
}

fn to_f64_matrix(m: &QMatrix) -> Matrix<f64> {
    m.map(|q| q.to_f64())
}

impl Problem {
    pub fn new(
        model: &ContactModel,
        base: &ConnectionTable,
        objective: Objective,
    ) -> Result<Self, SolverError> {
        let report = verify_axioms(model, base);
        if !report.all_pass() {
            let v = &report.violations[0];
            return Err(SolverError::InvalidBase(format!(
                "{} at {:?}",
                v.axiom, v.indices
            )));
        }
        let omega_inv_exact = model
            .omega
            .inverse()
            .ok_or_else(|| SolverError::InvalidBase("ω degenerate".into()))?;
        let omega_inv_t_exact =
            omega_inverse_transpose(model).map_err(|e| SolverError::InvalidBase(e.to_string()))?;
        let omega_inv_t = to_f64_matrix(&omega_inv_t_exact);
        let m = symmetric_triples(model.omega.rows()).len();
        let zero = ConnectionTable::<f64>::zeros(model.dim());
        let directions = (0..m)
            .map(|p| {
                let mut e = vec![0.0; m];
                e[p] = 1.0;
                deform_unchecked(
                    &zero,
                    &DeformationTensor::from_symmetric_coefficients(&e, &omega_inv_t),
                )
            })
            .collect();
        Ok(Problem {
            objective,
            constants: model.frame_constants().map(|q| q.to_f64()),
            constants_exact: model.frame_constants().clone(),
            base: base.to_f64(),
            base_exact: base.clone(),
            omega: to_f64_matrix(&model.omega),
            omega_inv: to_f64_matrix(&omega_inv_exact),
            omega_exact: model.omega.clone(),
            omega_inv_exact,
            omega_inv_t_exact,
            directions,
        })
    }

    /// `C(2n+2, 3)`.
    pub fn parameter_count(&self) -> usize {
        self.directions.len()
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }

    fn check_len(&self, p: usize) -> Result<(), SolverError> {
        if p != self.parameter_count() {
            return Err(SolverError::WrongParameterCount {
                expected: self.parameter_count(),
                got: p,
            });
        }
        Ok(())
    }

    pub fn connection(&self, coeffs: &[f64]) -> ConnectionTable<f64> {
        let mut g = self.base.clone();
        for (dir, &c) in self.directions.iter().zip(coeffs) {
            if c != 0.0 {
                g.gamma = g.gamma.zip_with(&dir.gamma, |a, b| a + c * b);
            }
        }
        g
    }

    pub fn deformation(&self, coeffs: &[f64]) -> DeformationTensor<f64> {
        DeformationTensor::from_symmetric_coefficients(
            coeffs,
            &to_f64_matrix(&self.omega_inv_t_exact),
        )
    }

    pub fn residual(&self, coeffs: &[f64]) -> Result<Vec<f64>, SolverError> {
        self.check_len(coeffs.len())?;
        let r = curvature_from(&self.constants, &self.connection(coeffs));
        Ok(self.weighted_blocks(&r))
    }

    fn weighted_blocks(&self, r: &CurvatureTensor<f64>) -> Vec<f64> {
        let mut out = Vec::new();
        for (block, w) in self.objective.blocks() {
            out.extend(
                block_values(block, r, &self.omega, &self.omega_inv)
                    .into_iter()
                    .map(|v| w * v),
            );
        }
        out
    }

    /// Analytic Jacobian: the curvature is quadratic in the coefficients and
    /// every block is linear in the curvature.
    pub fn jacobian(&self, coeffs: &[f64]) -> Result<DMatrix<f64>, SolverError> {
        self.check_len(coeffs.len())?;
        let g = self.connection(coeffs);
        let cols: Vec<Vec<f64>> = self
            .directions
            .iter()
            .map(|dir| self.weighted_blocks(&curvature_derivative(&self.constants, &g, dir)))
            .collect();
        let rows = cols.first().map_or(0, Vec::len);
        Ok(DMatrix::from_fn(rows, cols.len(), |r, c| cols[c][r]))
    }

    pub fn exact_deformation(&self, coeffs: &[Rational]) -> DeformationTensor<Rational> {
        DeformationTensor::from_symmetric_coefficients(coeffs, &self.omega_inv_t_exact)
    }

    /// Unweighted residual in exact arithmetic.
    pub fn exact_residual(&self, coeffs: &[Rational]) -> Result<Vec<Rational>, SolverError> {
        self.check_len(coeffs.len())?;
        let g = deform_unchecked(&self.base_exact, &self.exact_deformation(coeffs));
        let r = curvature_from(&self.constants_exact, &g);
        let mut out = Vec::new();
        for (block, _) in self.objective.blocks() {
            out.extend(block_values(
                block,
                &r,
                &self.omega_exact,
                &self.omega_inv_exact,
            ));
        }
        Ok(out)
    }
}

fn block_values<T: Scalar>(
    block: Block,
    r: &CurvatureTensor<T>,
    omega: &Matrix<T>,
    omega_inv: &Matrix<T>,
) -> Vec<T> {
    let d = r.dim();
    let xi = d - 1;
    let mut out = Vec::new();
    match block {
        Block::Flat => {
            for i in 0..d {
                for j in i + 1..d {
                    for k in 0..d {
                        for l in 0..d {
                            out.push(r.r.get(i, j, k, l));
                        }
                    }
                }
            }
        }
        Block::Reeb => {
            for i in 0..xi {
                for j in 0..d {
                    for l in 0..d {
                        out.push(r.r.get(i, xi, j, l));
                    }
                }
            }
        }
        Block::Ricci => {
            let rd = rd_tensor_frame(r, omega, omega_inv);
            out.extend_from_slice(ricci_type_residual(&rd).as_slice());
        }
    }
    out
}

/// Residual of `objective` at `base + S(coeffs)`.
pub fn residual(
    model: &ContactModel,
    base: &ConnectionTable,
    coeffs: &[f64],
    objective: Objective,
) -> Result<Vec<f64>, SolverError> {
    Problem::new(model, base, objective)?.residual(coeffs)
}

/// Analytic Jacobian of [`residual`].
pub fn jacobian(
    model: &ContactModel,
    base: &ConnectionTable,
    coeffs: &[f64],
    objective: Objective,
) -> Result<DMatrix<f64>, SolverError> {
    Problem::new(model, base, objective)?.jacobian(coeffs)
}

/// Central finite-difference Jacobian with step `h`.
pub fn finite_difference_jacobian(
    problem: &Problem,
    coeffs: &[f64],
    h: f64,
) -> Result<DMatrix<f64>, SolverError> {
    let m = problem.parameter_count();
    let mut cols = Vec::with_capacity(m);
    for p in 0..m {
        let mut plus = coeffs.to_vec();
        let mut minus = coeffs.to_vec();
        plus[p] += h;
        minus[p] -= h;
        let rp = problem.residual(&plus)?;
        let rm = problem.residual(&minus)?;
        cols.push(
            rp.iter()
                .zip(&rm)
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect::<Vec<_>>(),
        );
    }
    let rows = cols.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows, m, |r, c| cols[c][r]))
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, &x| a.max(x.abs()))
}

fn half_sq(v: &[f64]) -> f64 {
    0.5 * v.iter().map(|x| x * x).sum::<f64>()
}

struct RestartOutcome {
    coeffs: Vec<f64>,
    residual_norm: f64,
    iterations: usize,
    events: Vec<ProgressEvent>,
}

fn levenberg_marquardt(
    problem: &Problem,
    start: Vec<f64>,
    options: &SolverOptions,
    restart: usize,
    free: Option<&[bool]>,
) -> RestartOutcome {
    let mut p = start;
    let mut r = problem
        .residual(&p)
        .expect("parameter count fixed by the problem");
    let mut cost = half_sq(&r);
    let mut lambda = options.damping_init;
    let mut events = Vec::new();
    let mut iterations = 0;
    while iterations < options.max_iterations && sup(&r) >= options.tolerance {
        iterations += 1;
        let mut jac = problem
            .jacobian(&p)
            .expect("parameter count fixed by the problem");
        if let Some(mask) = free {
            for (c, &is_free) in mask.iter().enumerate() {
                if !is_free {
                    jac.column_mut(c).fill(0.0);
                }
            }
        }
        let rv = DVector::from_column_slice(&r);
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * rv;
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for k in 0..a.nrows() {
                a[(k, k)] += lambda;
            }
            let Some(delta) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            let rt = problem
                .residual(&trial)
                .expect("parameter count fixed by the problem");
            let ct = half_sq(&rt);
            if ct < cost {
                p = trial;
                r = rt;
                cost = ct;
                lambda = (lambda * 0.1).max(1e-15);
                accepted = true;
                break;
            }
            lambda *= 10.0;
        }
        events.push(ProgressEvent {
            restart,
            iteration: iterations,
            residual: sup(&r),
            damping: lambda,
        });
        if !accepted {
            break;
        }
    }
    RestartOutcome {
        residual_norm: sup(&r),
        coeffs: p,
        iterations,
        events,
    }
}

fn start_point(m: usize, seed: u64, restart: usize) -> Vec<f64> {
    if restart == 0 {
        return vec![0.0; m];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect()
}

fn verify_exact(problem: &Problem, coeffs: &[Rational]) -> Option<RationalSolution> {
    let res = problem.exact_residual(coeffs).ok()?;
    if res.iter().all(|q| q.is_zero()) {
        Some(RationalSolution {
            coefficients: coeffs.to_vec(),
            s: problem.exact_deformation(coeffs),
            exact_zero: true,
        })
    } else {
        None
    }
}

fn round_all(coeffs: &[f64], max_den: u64) -> Option<Vec<Rational>> {
    coeffs
        .iter()
        .map(|&x| Rational::approximate(x, max_den))
        .collect()
}

/// Rounds a converged point to rationals with bounded denominators and
/// verifies exactly. When plain rounding fails, coefficients are fixed one
/// at a time, closest to a rational first, re-solving for the others after
/// each fix, so that a point on a positive-dimensional solution set can
/// slide to a rational one.
fn rationalize(
    problem: &Problem,
    coeffs: &[f64],
    options: &SolverOptions,
) -> Option<RationalSolution> {
    if let Some(found) =
        round_all(coeffs, options.max_denominator).and_then(|q| verify_exact(problem, &q))
    {
        return Some(found);
    }
    let m = coeffs.len();
    let mut current = coeffs.to_vec();
    let mut free = vec![true; m];
    let gap = |x: f64| {
        Rational::approximate(x, options.max_denominator)
            .map_or(f64::INFINITY, |q| (q.to_f64() - x).abs())
    };
    for _ in 0..m {
        let next = (0..m)
            .filter(|&k| free[k])
            .min_by(|&a, &b| gap(current[a]).total_cmp(&gap(current[b])).then(a.cmp(&b)))?;
        let mut trial = current.clone();
        trial[next] = Rational::approximate(trial[next], options.max_denominator)?.to_f64();
        free[next] = false;
        let out = levenberg_marquardt(problem, trial, options, 0, Some(&free));
        if out.residual_norm >= options.tolerance {
            return None;
        }
        current = out.coeffs;
        if let Some(found) =
            round_all(&current, options.max_denominator).and_then(|q| verify_exact(problem, &q))
        {
            return Some(found);
        }
    }
    None
}

/// Runs damped least squares from `options.restarts` starting points,
/// `S = 0` first, and returns the selected restart.
///
/// Among converged restarts, one whose rounding verifies exactly is
/// preferred; ties are broken by residual and then by restart index. A base
/// that already meets the objective exactly returns `S = 0` immediately.
pub fn solve(
    model: &ContactModel,
    base: &ConnectionTable,
    objective: Objective,
    options: &SolverOptions,
    progress: Option<&mut dyn FnMut(&ProgressEvent)>,
) -> Result<Solution, SolverError> {
    options.validate()?;
    let problem = Problem::new(model, base, objective)?;
    let m = problem.parameter_count();
    let zero = vec![Rational::ZERO; m];
    if let Some(exact) = verify_exact(&problem, &zero) {
        return Ok(Solution {
            s: problem.deformation(&vec![0.0; m]),
            coefficients: vec![0.0; m],
            residual_norm: 0.0,
            rationalized: Some(exact),
            iterations: 0,
            restart_index: 0,
        });
    }
    let run = |restart: usize| {
        let out = levenberg_marquardt(
            &problem,
            start_point(m, options.seed, restart),
            options,
            restart,
            None,
        );
        let rationalized = if out.residual_norm < options.tolerance {
            rationalize(&problem, &out.coeffs, options)
        } else {
            None
        };
        (out, rationalized)
    };
    let outcomes: Vec<(RestartOutcome, Option<RationalSolution>)> = if options.parallel {
        (0..options.restarts).into_par_iter().map(run).collect()
    } else {
        (0..options.restarts).map(run).collect()
    };
    if let Some(cb) = progress {
        for (out, _) in &outcomes {
            for e in &out.events {
                cb(e);
            }
        }
    }
    let key = |(i, (out, rat)): &(usize, &(RestartOutcome, Option<RationalSolution>))| {
        let converged = out.residual_norm < options.tolerance;
        (!(converged && rat.is_some()), out.residual_norm, *i)
    };
    let (best_index, (best, rationalized)) = outcomes
        .iter()
        .enumerate()
        .min_by(|a, b| {
            let (ka, kb) = (key(a), key(b));
            ka.0.cmp(&kb.0)
                .then(ka.1.total_cmp(&kb.1))
                .then(ka.2.cmp(&kb.2))
        })
        .expect("at least one restart");
    let solution = Solution {
        s: problem.deformation(&best.coeffs),
        coefficients: best.coeffs.clone(),
        residual_norm: best.residual_norm,
        rationalized: rationalized.clone(),
        iterations: best.iterations,
        restart_index: best_index,
    };
    if solution.residual_norm >= options.tolerance {
        return Err(SolverError::NoConvergence {
            best: Box::new(solution),
        });
    }
    Ok(solution)
}
