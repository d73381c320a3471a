//! Lie algebras with a left-invariant contact form.
//!
//! All vectors are coordinate vectors of left-invariant fields. Frame
//! coordinates refer to the adapted frame `A_1, …, A_2n, ξ`, with the Reeb
//! field stored last.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::linalg::{pfaffian, unit, QMatrix, Tensor3};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LieError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("the algebra dimension {0} is not odd and at least 3")]
    EvenDimension(usize),
    #[error("conflicting bracket values for [{x}, {y}]")]
    InconsistentBracket { x: String, y: String },
    #[error("bracket [{0}, {0}] must vanish")]
    NonzeroSelfBracket(String),
    #[error("alpha ∧ (dalpha)^n vanishes: the form is not contact")]
    NotContact,
    #[error("the Reeb system alpha(xi) = 1, dalpha(xi, ·) = 0 has no unique solution")]
    NoReeb,
    #[error("bad parameter {name}: {reason}")]
    BadParameter { name: String, reason: String },
    #[error("degenerate skew form: rank {rank} < {expected}")]
    Degenerate { rank: usize, expected: usize },
    #[error("invalid adapted frame: {0}")]
    InvalidFrame(String),
}

/// Finite-dimensional real Lie algebra given by exact structure constants.
#[derive(Debug, Clone, PartialEq)]
pub struct LieAlgebra {
    names: Vec<String>,
    c: Tensor3<Rational>,
}

/// One failed Jacobi triple with its nonzero cyclic sum.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiViolation {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub cyclic_sum: Vec<Rational>,
}

impl LieAlgebra {
    /// Builds an algebra from sparse brackets `[b_x, b_y] = result`, completing
    /// antisymmetrically. Unlisted brackets are zero.
    pub fn new(
        names: Vec<String>,
        brackets: &[(usize, usize, Vec<Rational>)],
    ) -> Result<Self, LieError> {
        let dim = names.len();
        let mut c = Tensor3::zeros(dim);
        let mut seen = vec![false; dim * dim];
        for (x, y, v) in brackets {
            let (x, y) = (*x, *y);
            if x >= dim || y >= dim {
                return Err(LieError::DimensionMismatch {
                    expected: dim,
                    got: x.max(y) + 1,
                });
            }
            if v.len() != dim {
                return Err(LieError::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            if x == y {
                if v.iter().any(|q| !q.is_zero()) {
                    return Err(LieError::NonzeroSelfBracket(names[x].clone()));
                }
                continue;
            }
            let neg: Vec<Rational> = v.iter().map(|&q| -q).collect();
            for (a, b, val) in [(x, y, v), (y, x, &neg)] {
                if seen[a * dim + b] && c.fiber(a, b) != *val {
                    return Err(LieError::InconsistentBracket {
                        x: names[x].clone(),
                        y: names[y].clone(),
                    });
                }
                seen[a * dim + b] = true;
                c.set_fiber(a, b, val);
            }
        }
        Ok(LieAlgebra { names, c })
    }

    /// The abelian algebra on the given basis names.
    pub fn abelian(names: Vec<String>) -> Self {
        let dim = names.len();
        LieAlgebra {
            names,
            c: Tensor3::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn structure_constants(&self) -> &Tensor3<Rational> {
        &self.c
    }

    pub fn bracket(&self, x: &[Rational], y: &[Rational]) -> Result<Vec<Rational>, LieError> {
        bracket_with(&self.c, x, y)
    }

    /// Matrix of `ad_x` (column convention).
    pub fn ad(&self, x: &[Rational]) -> Result<QMatrix, LieError> {
        let d = self.dim();
        let cols: Result<Vec<_>, _> = (0..d).map(|j| self.bracket(x, &unit(d, j))).collect();
        Ok(QMatrix::from_columns(&cols?))
    }

    pub fn check_jacobi(&self) -> Vec<JacobiViolation> {
        check_jacobi(self)
    }
}

fn bracket_with(
    c: &Tensor3<Rational>,
    x: &[Rational],
    y: &[Rational],
) -> Result<Vec<Rational>, LieError> {
    let d = c.dim();
    for v in [x, y] {
        if v.len() != d {
            return Err(LieError::DimensionMismatch {
                expected: d,
                got: v.len(),
            });
        }
    }
    let mut out = vec![Rational::ZERO; d];
    for i in 0..d {
        if x[i].is_zero() {
            continue;
        }
        for j in 0..d {
            if y[j].is_zero() {
                continue;
            }
            let f = x[i] * y[j];
            for (k, o) in out.iter_mut().enumerate() {
                let cijk = c.get(i, j, k);
                if !cijk.is_zero() {
                    *o += f * cijk;
                }
            }
        }
    }
    Ok(out)
}

/// Evaluates `[[b_i,b_j],b_k] + [[b_j,b_k],b_i] + [[b_k,b_i],b_j]` over all
/// triples `i < j < k`.
pub fn check_jacobi(algebra: &LieAlgebra) -> Vec<JacobiViolation> {
    let d = algebra.dim();
    let e = |i| unit::<Rational>(d, i);
    let br = |x: &[Rational], y: &[Rational]| algebra.bracket(x, y).expect("dimension checked");
    let mut out = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            for k in j + 1..d {
                let t1 = br(&br(&e(i), &e(j)), &e(k));
                let t2 = br(&br(&e(j), &e(k)), &e(i));
                let t3 = br(&br(&e(k), &e(i)), &e(j));
                let sum: Vec<Rational> = (0..d).map(|m| t1[m] + t2[m] + t3[m]).collect();
                if sum.iter().any(|q| !q.is_zero()) {
                    out.push(JacobiViolation {
                        i,
                        j,
                        k,
                        cyclic_sum: sum,
                    });
                }
            }
        }
    }
    out
}

/// Trace of `ad_{b_x}`; the algebra is unimodular iff this vanishes for every
/// basis vector.
pub fn unimodular_trace(algebra: &LieAlgebra, x: usize) -> Rational {
    (0..algebra.dim()).map(|k| algebra.c.get(x, k, k)).sum()
}

/// Left-invariant 1-form `α = Σ α_i b_i*`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactForm {
    pub coefficients: Vec<Rational>,
}

impl ContactForm {
    pub fn new(coefficients: Vec<Rational>) -> Self {
        ContactForm { coefficients }
    }

    pub fn eval(&self, v: &[Rational]) -> Rational {
        self.coefficients.iter().zip(v).map(|(&a, &b)| a * b).sum()
    }
}

/// Frame `A_1, …, A_2n, ξ` given by its change-of-basis matrix, whose
/// columns are the frame vectors in algebra coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedFrame {
    pub names: Vec<String>,
    pub change_of_basis: QMatrix,
    inverse: QMatrix,
}

impl AdaptedFrame {
    pub fn vector(&self, i: usize) -> Vec<Rational> {
        self.change_of_basis.column(i)
    }

    /// Algebra coordinates to frame coordinates.
    pub fn to_frame(&self, v: &[Rational]) -> Vec<Rational> {
        self.inverse.mul_vec(v)
    }

    /// Frame coordinates to algebra coordinates.
    pub fn to_algebra(&self, v: &[Rational]) -> Vec<Rational> {
        self.change_of_basis.mul_vec(v)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// A symplectic basis `e_1, …, e_n, e_{n+1}, …, e_2n` of a skew form.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticBasis {
    pub vectors: Vec<Vec<Rational>>,
    /// Columns are the basis vectors in the input coordinates.
    pub transform: QMatrix,
}

/// Symplectic Gram–Schmidt over the rationals.
///
/// Each step pairs the first remaining vector `u` with the first remaining
/// `v` such that `ω(u, v) ≠ 0`, orienting the pair so that the partner is
/// rescaled by a positive-denominator factor, then projects the rest onto
/// the ω-orthogonal complement.
pub fn symplectic_basis(omega: &QMatrix) -> Result<SymplecticBasis, LieError> {
    let d = omega.rows();
    if omega.cols() != d || d % 2 == 1 {
        return Err(LieError::Degenerate {
            rank: omega.rank(),
            expected: d + d % 2,
        });
    }
    let n = d / 2;
    let w = |x: &[Rational], y: &[Rational]| omega.bilinear(x, y);
    let mut remaining: Vec<Vec<Rational>> = (0..d).map(|i| unit(d, i)).collect();
    let mut es = Vec::with_capacity(n);
    let mut fs = Vec::with_capacity(n);
    for _ in 0..n {
        let mut pair = None;
        'outer: for (pu, u) in remaining.iter().enumerate() {
            for (pv, v) in remaining.iter().enumerate().skip(pu + 1) {
                let val = w(u, v);
                if !val.is_zero() {
                    pair = Some((pu, pv, val));
                    break 'outer;
                }
            }
        }
        let Some((pu, pv, val)) = pair else {
            return Err(LieError::Degenerate {
                rank: omega.rank(),
                expected: d,
            });
        };
        let (u, v) = (remaining[pu].clone(), remaining[pv].clone());
        let (e, f) = if val > Rational::ZERO {
            (u, v.iter().map(|&x| x / val).collect::<Vec<_>>())
        } else {
            (v, u.iter().map(|&x| x / (-val)).collect::<Vec<_>>())
        };
        remaining = remaining
            .into_iter()
            .enumerate()
            .filter(|&(p, _)| p != pu && p != pv)
            .map(|(_, x)| {
                let a = w(&x, &f);
                let b = w(&x, &e);
                (0..d)
                    .map(|m| x[m] - a * e[m] + b * f[m])
                    .collect::<Vec<_>>()
            })
            .filter(|x: &Vec<Rational>| x.iter().any(|q| !q.is_zero()))
            .collect();
        es.push(e);
        fs.push(f);
    }
    let vectors: Vec<Vec<Rational>> = es.into_iter().chain(fs).collect();
    let transform = QMatrix::from_columns(&vectors);
    Ok(SymplecticBasis { vectors, transform })
}

/// Lie algebra, contact form, adapted frame, and the derived data used by
/// every other module.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactModel {
    pub name: String,
    pub algebra: LieAlgebra,
    pub alpha: ContactForm,
    pub frame: AdaptedFrame,
    /// `ω_ij = dα(A_i, A_j)` on the 𝒟-part of the frame.
    pub omega: QMatrix,
    pub parameters: BTreeMap<String, Rational>,
    frame_constants: Tensor3<Rational>,
    symplectic: SymplecticBasis,
}

impl ContactModel {
    /// Half the dimension of the contact distribution.
    pub fn n(&self) -> usize {
        (self.dim() - 1) / 2
    }

    pub fn dim(&self) -> usize {
        self.algebra.dim()
    }

    /// Frame index of the Reeb field.
    pub fn xi(&self) -> usize {
        self.dim() - 1
    }

    pub fn frame_names(&self) -> &[String] {
        &self.frame.names
    }

    /// Structure constants in the adapted frame.
    pub fn frame_constants(&self) -> &Tensor3<Rational> {
        &self.frame_constants
    }

    /// The fixed symplectic basis of `(𝒟, ω)`, in 𝒟-frame coordinates.
    pub fn symplectic(&self) -> &SymplecticBasis {
        &self.symplectic
    }

    /// Reeb field in algebra coordinates.
    pub fn reeb(&self) -> Vec<Rational> {
        self.frame.vector(self.xi())
    }

    /// Bracket of two vectors given in frame coordinates.
    pub fn bracket(&self, x: &[Rational], y: &[Rational]) -> Result<Vec<Rational>, LieError> {
        bracket_with(&self.frame_constants, x, y)
    }

    /// `dα(x, y) = −α([x, y])` for frame-coordinate vectors.
    pub fn d_alpha(&self, x: &[Rational], y: &[Rational]) -> Result<Rational, LieError> {
        Ok(-self.bracket(x, y)?[self.xi()])
    }

    /// `dα` on the whole frame: the 𝒟-block is `omega`, the ξ row and
    /// column vanish.
    pub fn omega_full(&self) -> QMatrix {
        let d = self.dim();
        let mut m = QMatrix::zeros(d, d);
        for i in 0..d - 1 {
            for j in 0..d - 1 {
                m[(i, j)] = self.omega[(i, j)];
            }
        }
        m
    }

    /// Pfaffian of `ω` on 𝒟 in the adapted frame.
    pub fn omega_pfaffian(&self) -> Rational {
        pfaffian(&self.omega)
    }
}

/// `d_alpha` as a free function over a model.
pub fn d_alpha(model: &ContactModel, x: &[Rational], y: &[Rational]) -> Result<Rational, LieError> {
    model.d_alpha(x, y)
}

/// `bracket` as a free function over a model, in frame coordinates.
pub fn bracket(
    model: &ContactModel,
    x: &[Rational],
    y: &[Rational],
) -> Result<Vec<Rational>, LieError> {
    model.bracket(x, y)
}

/// Gram matrix of `dα` on the algebra basis.
fn d_alpha_matrix(algebra: &LieAlgebra, alpha: &ContactForm) -> QMatrix {
    let d = algebra.dim();
    let mut m = QMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let v = algebra
                .bracket(&unit(d, i), &unit(d, j))
                .expect("dimension checked");
            m[(i, j)] = -alpha.eval(&v);
        }
    }
    m
}

/// Value of `α ∧ (dα)^n` on the basis, up to the positive factor `n!`: the
/// Pfaffian of `dα` bordered by `α`.
pub fn contact_volume(algebra: &LieAlgebra, alpha: &ContactForm) -> Rational {
    let d = algebra.dim();
    let w = d_alpha_matrix(algebra, alpha);
    let mut b = QMatrix::zeros(d + 1, d + 1);
    for i in 0..d {
        for j in 0..d {
            b[(i, j)] = w[(i, j)];
        }
        b[(i, d)] = alpha.coefficients[i];
        b[(d, i)] = -alpha.coefficients[i];
    }
    pfaffian(&b)
}

/// Builds a model with the frame chosen by projecting the algebra basis onto
/// `Ker α` along ξ and keeping the first linearly independent vectors.
pub fn build_model(
    algebra: LieAlgebra,
    alpha: ContactForm,
    parameters: BTreeMap<String, Rational>,
) -> Result<ContactModel, LieError> {
    build_model_with_frame(algebra, alpha, parameters, None)
}

/// Builds a model, optionally with an explicit frame given as
/// `(names, vectors in algebra coordinates)` with ξ last.
pub fn build_model_with_frame(
    algebra: LieAlgebra,
    alpha: ContactForm,
    parameters: BTreeMap<String, Rational>,
    frame: Option<(Vec<String>, Vec<Vec<Rational>>)>,
) -> Result<ContactModel, LieError> {
    if let Some(s) = parameters.get("s") {
        if s.is_zero() {
            return Err(LieError::BadParameter {
                name: "s".into(),
                reason: "must be nonzero".into(),
            });
        }
    }
    let d = algebra.dim();
    if d < 3 || d.is_multiple_of(2) {
        return Err(LieError::EvenDimension(d));
    }
    if alpha.coefficients.len() != d {
        return Err(LieError::DimensionMismatch {
            expected: d,
            got: alpha.coefficients.len(),
        });
    }
    if contact_volume(&algebra, &alpha).is_zero() {
        return Err(LieError::NotContact);
    }
    let w = d_alpha_matrix(&algebra, &alpha);
    let mut system = QMatrix::zeros(d + 1, d);
    let mut rhs = vec![Rational::ZERO; d + 1];
    for j in 0..d {
        system[(0, j)] = alpha.coefficients[j];
        for i in 0..d {
            system[(i + 1, j)] = w[(j, i)];
        }
    }
    rhs[0] = Rational::ONE;
    let xi = match system.solve(&rhs) {
        Ok((x, 0)) => x,
        _ => return Err(LieError::NoReeb),
    };

    let (names, vectors) = match frame {
        Some((names, vectors)) => {
            validate_frame(&alpha, &xi, &names, &vectors)?;
            (names, vectors)
        }
        None => {
            let mut vectors: Vec<Vec<Rational>> = Vec::new();
            for i in 0..d {
                let a = alpha.coefficients[i];
                let v: Vec<Rational> = (0..d)
                    .map(|m| unit::<Rational>(d, i)[m] - a * xi[m])
                    .collect();
                let mut trial = vectors.clone();
                trial.push(v.clone());
                if QMatrix::from_columns(&trial).rank() == trial.len() {
                    vectors = trial;
                }
                if vectors.len() == d - 1 {
                    break;
                }
            }
            vectors.push(xi.clone());
            let names = (1..=d).map(|i| format!("A{i}")).collect();
            (names, vectors)
        }
    };
    let change_of_basis = QMatrix::from_columns(&vectors);
    let inverse = change_of_basis
        .inverse()
        .ok_or_else(|| LieError::InvalidFrame("frame vectors are linearly dependent".into()))?;
    let frame = AdaptedFrame {
        names,
        change_of_basis,
        inverse,
    };

    let mut fc = Tensor3::zeros(d);
    for i in 0..d {
        for j in 0..d {
            let b = algebra.bracket(&frame.vector(i), &frame.vector(j))?;
            fc.set_fiber(i, j, &frame.to_frame(&b));
        }
    }
    let mut omega = QMatrix::zeros(d - 1, d - 1);
    for i in 0..d - 1 {
        for j in 0..d - 1 {
            omega[(i, j)] = -fc.get(i, j, d - 1);
        }
    }
    let symplectic = symplectic_basis(&omega)?;
    Ok(ContactModel {
        name: String::new(),
        algebra,
        alpha,
        frame,
        omega,
        parameters,
        frame_constants: fc,
        symplectic,
    })
}

fn validate_frame(
    alpha: &ContactForm,
    xi: &[Rational],
    names: &[String],
    vectors: &[Vec<Rational>],
) -> Result<(), LieError> {
    let d = xi.len();
    if vectors.len() != d || names.len() != d {
        return Err(LieError::InvalidFrame(format!(
            "expected {d} frame vectors, got {}",
            vectors.len()
        )));
    }
    for (name, v) in names.iter().zip(vectors).take(d - 1) {
        if v.len() != d {
            return Err(LieError::DimensionMismatch {
                expected: d,
                got: v.len(),
            });
        }
        if !alpha.eval(v).is_zero() {
            return Err(LieError::InvalidFrame(format!(
                "{name} is not in the kernel of alpha"
            )));
        }
    }
    if vectors[d - 1] != xi {
        return Err(LieError::InvalidFrame(format!(
            "last frame vector {} is not the Reeb field",
            names[d - 1]
        )));
    }
    Ok(())
}

impl ContactModel {
    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}
