//! Contact connections in the adapted frame: construction, axiom checks,
//! deformation by symmetric tensors, and repair of hand-copied tables.

use std::fmt;

use thiserror::Error;

use crate::lie_contact::ContactModel;
use crate::linalg::{Matrix, QMatrix, Tensor3};
use crate::rational::{Rational, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConnectionError {
    #[error("omega is degenerate on the contact distribution")]
    OmegaDegenerate,
    #[error("invalid deformation tensor: {0}")]
    InvalidDeformation(String),
    #[error("connection violates the contact axioms ({0}); run repair_connection first")]
    InvalidConnection(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown symbol {0:?} in connection table")]
    UnknownSymbol(String),
    #[error("duplicate connection entry for ({0}, {1})")]
    DuplicateEntry(String, String),
}

/// `Γ[i][j][k]`: `∇_{A_i} A_j = Σ_k Γ[i][j][k] A_k` in the adapted frame,
/// including the ξ rows and columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionTable<T: Scalar = Rational> {
    pub gamma: Tensor3<T>,
}

impl<T: Scalar> ConnectionTable<T> {
    pub fn zeros(dim: usize) -> Self {
        ConnectionTable {
            gamma: Tensor3::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.dim()
    }

    /// Coordinates of `∇_{A_i} A_j`.
    pub fn entry(&self, i: usize, j: usize) -> Vec<T> {
        self.gamma.fiber(i, j)
    }

    pub fn set_entry(&mut self, i: usize, j: usize, v: &[T]) {
        self.gamma.set_fiber(i, j, v);
    }

    /// `∇_x y` for arbitrary frame-coordinate vectors.
    pub fn covariant(&self, x: &[T], y: &[T]) -> Vec<T> {
        let d = self.dim();
        let mut out = vec![T::zero(); d];
        for i in 0..d {
            if x[i] == T::zero() {
                continue;
            }
            for j in 0..d {
                if y[j] == T::zero() {
                    continue;
                }
                let f = x[i] * y[j];
                for (k, o) in out.iter_mut().enumerate() {
                    *o = *o + f * self.gamma.get(i, j, k);
                }
            }
        }
        out
    }
}

impl ConnectionTable<Rational> {
    pub fn to_f64(&self) -> ConnectionTable<f64> {
        ConnectionTable {
            gamma: self.gamma.map(|q| q.to_f64()),
        }
    }
}

/// Symmetric 3-tensor `S[i][j][k]` on 𝒟: `S(A_i, A_j) = Σ_k S[i][j][k] A_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationTensor<T: Scalar = Rational> {
    pub s3: Tensor3<T>,
}

impl<T: Scalar> DeformationTensor<T> {
    pub fn zeros(d: usize) -> Self {
        DeformationTensor {
            s3: Tensor3::zeros(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.s3.dim()
    }

    /// Checks `S(X,Y) = S(Y,X)` and total symmetry of `ω(S(·,·),·)`.
    pub fn validate(&self, omega: &Matrix<T>) -> Result<(), ConnectionError> {
        let d = self.dim();
        if omega.rows() != d {
            return Err(ConnectionError::DimensionMismatch {
                expected: omega.rows(),
                got: d,
            });
        }
        let low = self.lowered(omega);
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let diff = self.s3.get(i, j, k) - self.s3.get(j, i, k);
                    if !diff.is_negligible() {
                        return Err(ConnectionError::InvalidDeformation(format!(
                            "S(A{},A{}) != S(A{},A{}) in component {}",
                            i + 1,
                            j + 1,
                            j + 1,
                            i + 1,
                            k + 1
                        )));
                    }
                    let diff = low.get(i, j, k) - low.get(i, k, j);
                    if !diff.is_negligible() {
                        return Err(ConnectionError::InvalidDeformation(format!(
                            "omega(S(A{i1},A{j1}),A{k1}) != omega(S(A{i1},A{k1}),A{j1})",
                            i1 = i + 1,
                            j1 = j + 1,
                            k1 = k + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// `s[i][j][k] = ω(S(A_i, A_j), A_k)`.
    pub fn lowered(&self, omega: &Matrix<T>) -> Tensor3<T> {
        let d = self.dim();
        let mut out = Tensor3::zeros(d);
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let v = (0..d).fold(T::zero(), |acc, l| {
                        acc + self.s3.get(i, j, l) * omega[(l, k)]
                    });
                    out.set(i, j, k, v);
                }
            }
        }
        out
    }

    /// Inverse of [`Self::lowered`]; `omega_inv_t` is `(ωᵀ)⁻¹`.
    pub fn from_lowered(lowered: &Tensor3<T>, omega_inv_t: &Matrix<T>) -> Self {
        let d = lowered.dim();
        let mut s3 = Tensor3::zeros(d);
        for i in 0..d {
            for j in 0..d {
                let v = omega_inv_t.mul_vec(&lowered.fiber(i, j));
                s3.set_fiber(i, j, &v);
            }
        }
        DeformationTensor { s3 }
    }

    /// Builds `S` from the coefficients of the totally symmetric tensor
    /// `ω(S(·,·),·)`, ordered as [`symmetric_triples`].
    pub fn from_symmetric_coefficients(coeffs: &[T], omega_inv_t: &Matrix<T>) -> Self {
        let d = omega_inv_t.rows();
        let triples = symmetric_triples(d);
        assert_eq!(
            coeffs.len(),
            triples.len(),
            "wrong number of symmetric coefficients"
        );
        let mut low = Tensor3::zeros(d);
        for (&(a, b, c), &v) in triples.iter().zip(coeffs) {
            for (i, j, k) in permutations3(a, b, c) {
                low.set(i, j, k, v);
            }
        }
        Self::from_lowered(&low, omega_inv_t)
    }

    /// Inverse of [`Self::from_symmetric_coefficients`].
    pub fn symmetric_coefficients(&self, omega: &Matrix<T>) -> Vec<T> {
        let low = self.lowered(omega);
        symmetric_triples(self.dim())
            .iter()
            .map(|&(a, b, c)| low.get(a, b, c))
            .collect()
    }

    pub fn add(&self, other: &Self) -> Self {
        DeformationTensor {
            s3: self.s3.zip_with(&other.s3, |a, b| a + b),
        }
    }

    pub fn neg(&self) -> Self {
        DeformationTensor {
            s3: self.s3.map(|a| -a),
        }
    }
}

/// Index triples `a ≤ b ≤ c` in `0..d`; there are `C(d+2, 3)` of them.
pub fn symmetric_triples(d: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for a in 0..d {
        for b in a..d {
            for c in b..d {
                out.push((a, b, c));
            }
        }
    }
    out
}

fn permutations3(a: usize, b: usize, c: usize) -> [(usize, usize, usize); 6] {
    [
        (a, b, c),
        (a, c, b),
        (b, a, c),
        (b, c, a),
        (c, a, b),
        (c, b, a),
    ]
}

/// `(ωᵀ)⁻¹` for the model's 𝒟-block.
pub fn omega_inverse_transpose(model: &ContactModel) -> Result<QMatrix, ConnectionError> {
    model
        .omega
        .transpose()
        .inverse()
        .ok_or(ConnectionError::OmegaDegenerate)
}

/// `∇′_{A_i}A_j = ½([A_i,A_j] − α([A_i,A_j])ξ)` on 𝒟, `∇′_ξ = ad_ξ`, `∇′ξ = 0`.
pub fn half_bracket_connection(model: &ContactModel) -> ConnectionTable {
    let d = model.dim();
    let xi = model.xi();
    let c = model.frame_constants();
    let half = Rational::new(1, 2);
    let mut g = ConnectionTable::zeros(d);
    for i in 0..xi {
        for j in 0..xi {
            for k in 0..xi {
                g.gamma.set(i, j, k, half * c.get(i, j, k));
            }
        }
    }
    set_reeb_rows(model, &mut g);
    g
}

fn set_reeb_rows(model: &ContactModel, g: &mut ConnectionTable) {
    let d = model.dim();
    let xi = model.xi();
    let c = model.frame_constants();
    for j in 0..d {
        for k in 0..d {
            let v = if j < xi {
                c.get(xi, j, k)
            } else {
                Rational::ZERO
            };
            g.gamma.set(xi, j, k, v);
            g.gamma.set(j, xi, k, Rational::ZERO);
        }
    }
}

/// `(∇_{A_i} ω)(A_j, A_k)` with `ω = dα` on the whole frame.
pub fn nabla_omega<T: Scalar>(
    omega_full: &Matrix<T>,
    gamma: &ConnectionTable<T>,
    i: usize,
    j: usize,
    k: usize,
) -> T {
    let d = gamma.dim();
    let mut acc = T::zero();
    for m in 0..d {
        acc = acc
            - gamma.gamma.get(i, j, m) * omega_full[(m, k)]
            - omega_full[(j, m)] * gamma.gamma.get(i, k, m);
    }
    acc
}

/// `𝒩` defined by `ω(𝒩(X,Y), Z) = (∇′_X ω)(Y, Z)` on 𝒟, as a 𝒟-valued
/// tensor `N[x][y][k]`.
pub fn vezzoni_tensor(
    model: &ContactModel,
    gamma_prime: &ConnectionTable,
) -> Result<Tensor3<Rational>, ConnectionError> {
    let xi = model.xi();
    let wf = model.omega_full();
    let winv_t = omega_inverse_transpose(model)?;
    let mut low = Tensor3::zeros(xi);
    for x in 0..xi {
        for y in 0..xi {
            for z in 0..xi {
                low.set(x, y, z, nabla_omega(&wf, gamma_prime, x, y, z));
            }
        }
    }
    Ok(DeformationTensor::from_lowered(&low, &winv_t).s3)
}

/// `∇̃ = ∇′ + ⅓(𝒩(X,Y) + 𝒩(Y,X))` on 𝒟 × 𝒟, with the ξ rows and columns
/// re-materialized.
pub fn vezzoni_correction(
    model: &ContactModel,
    gamma_prime: &ConnectionTable,
) -> Result<ConnectionTable, ConnectionError> {
    let nt = vezzoni_tensor(model, gamma_prime)?;
    let xi = model.xi();
    let third = Rational::new(1, 3);
    let mut g = gamma_prime.clone();
    for x in 0..xi {
        for y in 0..xi {
            for k in 0..xi {
                g.gamma
                    .add_to(x, y, k, third * (nt.get(x, y, k) + nt.get(y, x, k)));
            }
        }
    }
    set_reeb_rows(model, &mut g);
    Ok(g)
}

/// The contact axioms, plus the derived `∇ω = 0` over the whole frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axiom {
    /// `∇_X Y` lies in 𝒟 for `Y` in 𝒟.
    PreservesDistribution,
    /// `∇_ξ Y = [ξ, Y]` on 𝒟.
    ReebDerivative,
    /// `∇_X ξ = 0`.
    ReebParallel,
    /// `(∇_Y dα)(Y1, Y2) = 0` on 𝒟.
    OmegaParallel,
    /// `[X1,X2] = ∇_{X1}X2 − ∇_{X2}X1 − dα(X1,X2)ξ`.
    Torsion,
    /// `(∇_X dα)(Y, Z) = 0` for all frame vectors.
    NablaOmega,
}

impl Axiom {
    pub const ALL: [Axiom; 6] = [
        Axiom::PreservesDistribution,
        Axiom::ReebDerivative,
        Axiom::ReebParallel,
        Axiom::OmegaParallel,
        Axiom::Torsion,
        Axiom::NablaOmega,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Axiom::PreservesDistribution => "preserves_distribution",
            Axiom::ReebDerivative => "reeb_derivative",
            Axiom::ReebParallel => "reeb_parallel",
            Axiom::OmegaParallel => "omega_parallel",
            Axiom::Torsion => "torsion",
            Axiom::NablaOmega => "nabla_omega",
        }
    }
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomViolation {
    pub axiom: Axiom,
    /// Frame indices of the failing evaluation; the meaning depends on the
    /// axiom (entry slots followed by a component or form arguments).
    pub indices: Vec<usize>,
    pub residual: Rational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomReport {
    pub status: Vec<(Axiom, bool)>,
    pub violations: Vec<AxiomViolation>,
    /// False only if the five axioms pass while `∇ω = 0` fails.
    pub implication_holds: bool,
}

impl AxiomReport {
    pub fn passes(&self, axiom: Axiom) -> bool {
        self.status.iter().any(|&(a, ok)| a == axiom && ok)
    }

    /// All five contact axioms hold.
    pub fn all_pass(&self) -> bool {
        self.status
            .iter()
            .filter(|(a, _)| *a != Axiom::NablaOmega)
            .all(|&(_, ok)| ok)
    }
}

/// Exhaustive exact check of the contact axioms.
pub fn verify_axioms(model: &ContactModel, gamma: &ConnectionTable) -> AxiomReport {
    let d = model.dim();
    let xi = model.xi();
    let c = model.frame_constants();
    let wf = model.omega_full();
    let mut violations = Vec::new();
    let mut push = |axiom, indices: Vec<usize>, residual: Rational| {
        if !residual.is_zero() {
            violations.push(AxiomViolation {
                axiom,
                indices,
                residual,
            });
        }
    };
    if gamma.dim() != d {
        push(Axiom::PreservesDistribution, vec![], Rational::ONE);
    } else {
        for i in 0..d {
            for j in 0..xi {
                push(
                    Axiom::PreservesDistribution,
                    vec![i, j],
                    gamma.gamma.get(i, j, xi),
                );
            }
        }
        for j in 0..xi {
            for k in 0..d {
                push(
                    Axiom::ReebDerivative,
                    vec![j, k],
                    gamma.gamma.get(xi, j, k) - c.get(xi, j, k),
                );
            }
        }
        for i in 0..d {
            for k in 0..d {
                push(Axiom::ReebParallel, vec![i, k], gamma.gamma.get(i, xi, k));
            }
        }
        for i in 0..xi {
            for j in 0..xi {
                for k in j + 1..xi {
                    push(
                        Axiom::OmegaParallel,
                        vec![i, j, k],
                        nabla_omega(&wf, gamma, i, j, k),
                    );
                }
            }
        }
        for a in 0..d {
            for b in a + 1..d {
                for k in 0..d {
                    let reeb = if k == xi { wf[(a, b)] } else { Rational::ZERO };
                    let r =
                        gamma.gamma.get(a, b, k) - gamma.gamma.get(b, a, k) - reeb - c.get(a, b, k);
                    push(Axiom::Torsion, vec![a, b, k], r);
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                for k in j + 1..d {
                    push(
                        Axiom::NablaOmega,
                        vec![i, j, k],
                        nabla_omega(&wf, gamma, i, j, k),
                    );
                }
            }
        }
    }
    let status: Vec<(Axiom, bool)> = Axiom::ALL
        .iter()
        .map(|&a| (a, !violations.iter().any(|v| v.axiom == a)))
        .collect();
    let five = status
        .iter()
        .filter(|(a, _)| *a != Axiom::NablaOmega)
        .all(|&(_, ok)| ok);
    let nabla_ok = status.iter().any(|&(a, ok)| a == Axiom::NablaOmega && ok);
    AxiomReport {
        status,
        violations,
        implication_holds: !five || nabla_ok,
    }
}

/// `∇ + S`, with `S` acting on 𝒟 × 𝒟.
pub fn deform<T: Scalar>(
    omega: &Matrix<T>,
    gamma: &ConnectionTable<T>,
    s: &DeformationTensor<T>,
) -> Result<ConnectionTable<T>, ConnectionError> {
    let dd = gamma.dim() - 1;
    if s.dim() != dd {
        return Err(ConnectionError::DimensionMismatch {
            expected: dd,
            got: s.dim(),
        });
    }
    s.validate(omega)?;
    Ok(deform_unchecked(gamma, s))
}

/// `∇ + S` without validating `S`; the solver uses this with tensors that are
/// symmetric by construction.
pub fn deform_unchecked<T: Scalar>(
    gamma: &ConnectionTable<T>,
    s: &DeformationTensor<T>,
) -> ConnectionTable<T> {
    let dd = s.dim();
    let mut out = gamma.clone();
    for i in 0..dd {
        for j in 0..dd {
            for k in 0..dd {
                let v = s.s3.get(i, j, k);
                if v != T::zero() {
                    out.gamma.add_to(i, j, k, v);
                }
            }
        }
    }
    out
}

/// `g1 − g2` as a deformation tensor; fails unless it is a valid one.
pub fn difference(
    model: &ContactModel,
    g1: &ConnectionTable,
    g2: &ConnectionTable,
) -> Result<DeformationTensor, ConnectionError> {
    let d = model.dim();
    let xi = model.xi();
    let mut s = DeformationTensor::zeros(xi);
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let v = g1.gamma.get(i, j, k) - g2.gamma.get(i, j, k);
                if i < xi && j < xi && k < xi {
                    s.s3.set(i, j, k, v);
                } else if !v.is_zero() {
                    return Err(ConnectionError::InvalidDeformation(format!(
                        "difference has a component outside the distribution at ({}, {}, {})",
                        i + 1,
                        j + 1,
                        k + 1
                    )));
                }
            }
        }
    }
    s.validate(&model.omega)?;
    Ok(s)
}

/// Why an entry of a raw table was changed or reinterpreted.
#[derive(Debug, Clone, PartialEq)]
pub enum LedgerKind {
    /// A symbol from the algebra basis was read as the frame vector with the
    /// same index.
    Symbol { symbol: String, resolved: String },
    /// The entry is fixed outright by one axiom.
    Forced(Axiom),
    /// The entry belongs to the smallest set of entries whose change makes
    /// the linear torsion and `∇ω` constraints solvable.
    Linear { ambiguous: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerEntry {
    /// Frame indices of the entry `∇_{A_x} A_y`.
    pub x: usize,
    pub y: usize,
    pub kind: LedgerKind,
    pub old: Vec<Rational>,
    pub new: Vec<Rational>,
}

pub type Ledger = Vec<LedgerEntry>;

/// Largest number of 𝒟 × 𝒟 entries the sparse repair search frees at once
/// before falling back to a least-change projection over all entries.
pub const REPAIR_SEARCH_DEPTH: usize = 3;

/// Repairs a raw table into a contact connection.
///
/// Entries fixed outright by an axiom (the ξ rows and columns and the
/// ξ-components of 𝒟 × 𝒟 entries) are replaced by their forced values. The
/// remaining 𝒟 × 𝒟 block is subject to the linear torsion and `∇ω = 0`
/// constraints; the repair frees the smallest set of entries that makes
/// them solvable and, within that set, takes the solution closest to the
/// raw values. Every changed entry is reported with old and new values.
pub fn repair_connection(model: &ContactModel, raw: &ConnectionTable) -> (ConnectionTable, Ledger) {
    let d = model.dim();
    let xi = model.xi();
    let c = model.frame_constants();
    let mut g = raw.clone();
    let mut ledger = Vec::new();

    for i in 0..d {
        for j in 0..d {
            let old = raw.entry(i, j);
            let (forced, axiom): (Vec<Rational>, Axiom) = if j == xi {
                (vec![Rational::ZERO; d], Axiom::ReebParallel)
            } else if i == xi {
                (c.fiber(xi, j), Axiom::ReebDerivative)
            } else {
                let mut v = old.clone();
                v[xi] = Rational::ZERO;
                (v, Axiom::PreservesDistribution)
            };
            if forced != old {
                g.set_entry(i, j, &forced);
                ledger.push(LedgerEntry {
                    x: i,
                    y: j,
                    kind: LedgerKind::Forced(axiom),
                    old,
                    new: forced,
                });
            }
        }
    }

    let system = LinearSystem::new(model);
    let current = system.unknowns_of(&g);
    let violated = system.violated_rows(&current);
    if violated.is_empty() {
        return (g, ledger);
    }

    let entries: Vec<usize> = (0..xi * xi).collect();
    let touching: Vec<usize> = entries
        .iter()
        .copied()
        .filter(|&e| violated.iter().any(|&r| system.row_touches(r, e)))
        .collect();

    let mut found: Option<(Vec<usize>, Vec<Rational>)> = None;
    let mut ambiguous = false;
    'depth: for size in 1..=REPAIR_SEARCH_DEPTH.min(touching.len()) {
        let mut hits = 0;
        for subset in combinations(&touching, size) {
            if !violated
                .iter()
                .all(|&r| subset.iter().any(|&e| system.row_touches(r, e)))
            {
                continue;
            }
            if let Some(sol) = system.least_change(&current, &subset) {
                hits += 1;
                if found.is_none() {
                    found = Some((subset, sol));
                }
            }
        }
        if found.is_some() {
            ambiguous = hits > 1;
            break 'depth;
        }
    }
    let (free, solution) = match found {
        Some(f) => f,
        None => {
            let sol = system
                .least_change(&current, &entries)
                .expect("the affine space of contact connections is nonempty");
            (entries, sol)
        }
    };
    for &e in &free {
        let (i, j) = (e / xi, e % xi);
        let old = g.entry(i, j);
        let mut new = old.clone();
        new[..xi].copy_from_slice(&solution[e * xi..(e + 1) * xi]);
        if new != old {
            g.set_entry(i, j, &new);
            ledger.push(LedgerEntry {
                x: i,
                y: j,
                kind: LedgerKind::Linear { ambiguous },
                old,
                new,
            });
        }
    }
    (g, ledger)
}

fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(
        items: &[usize],
        k: usize,
        start: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for p in start..items.len() {
            cur.push(items[p]);
            rec(items, k, p + 1, cur, out);
            cur.pop();
        }
    }
    rec(items, k, 0, &mut cur, &mut out);
    out
}

/// Torsion and `∇ω = 0` constraints on the 𝒟 × 𝒟 × 𝒟 block of Γ.
///
/// Unknown `u[(i·m + j)·m + k] = Γ[i][j][k]` with `m = 2n`; entry `e = i·m + j`
/// owns the unknowns `e·m .. (e+1)·m`.
struct LinearSystem {
    m: usize,
    rows: Vec<Vec<(usize, Rational)>>,
    rhs: Vec<Rational>,
}

impl LinearSystem {
    fn new(model: &ContactModel) -> Self {
        let m = model.xi();
        let c = model.frame_constants();
        let w = &model.omega;
        let var = |i: usize, j: usize, k: usize| (i * m + j) * m + k;
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for i in 0..m {
            for j in i + 1..m {
                for k in 0..m {
                    rows.push(vec![
                        (var(i, j, k), Rational::ONE),
                        (var(j, i, k), -Rational::ONE),
                    ]);
                    rhs.push(c.get(i, j, k));
                }
            }
        }
        for i in 0..m {
            for j in 0..m {
                for l in j + 1..m {
                    let mut row = Vec::new();
                    for k in 0..m {
                        if !w[(k, l)].is_zero() {
                            row.push((var(i, j, k), w[(k, l)]));
                        }
                        if !w[(j, k)].is_zero() {
                            row.push((var(i, l, k), w[(j, k)]));
                        }
                    }
                    rows.push(row);
                    rhs.push(Rational::ZERO);
                }
            }
        }
        LinearSystem { m, rows, rhs }
    }

    fn unknowns_of(&self, g: &ConnectionTable) -> Vec<Rational> {
        let m = self.m;
        let mut u = vec![Rational::ZERO; m * m * m];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    u[(i * m + j) * m + k] = g.gamma.get(i, j, k);
                }
            }
        }
        u
    }

    fn row_value(&self, r: usize, u: &[Rational]) -> Rational {
        self.rows[r]
            .iter()
            .map(|&(v, a)| a * u[v])
            .sum::<Rational>()
            - self.rhs[r]
    }

    fn violated_rows(&self, u: &[Rational]) -> Vec<usize> {
        (0..self.rows.len())
            .filter(|&r| !self.row_value(r, u).is_zero())
            .collect()
    }

    fn row_touches(&self, r: usize, entry: usize) -> bool {
        self.rows[r].iter().any(|&(v, _)| v / self.m == entry)
    }

    /// Frees the unknowns of `entries` and returns the full unknown vector
    /// closest to `u` (Euclidean norm on the freed unknowns) satisfying all
    /// constraints, or `None` when infeasible.
    fn least_change(&self, u: &[Rational], entries: &[usize]) -> Option<Vec<Rational>> {
        let m = self.m;
        let free: Vec<usize> = entries.iter().flat_map(|&e| e * m..(e + 1) * m).collect();
        let col_of = |v: usize| free.iter().position(|&f| f == v);
        let rows: Vec<usize> = (0..self.rows.len())
            .filter(|&r| self.rows[r].iter().any(|&(v, _)| col_of(v).is_some()))
            .collect();
        let mut a = QMatrix::zeros(rows.len(), free.len());
        let mut resid = vec![Rational::ZERO; rows.len()];
        for (ri, &r) in rows.iter().enumerate() {
            for &(v, coef) in &self.rows[r] {
                if let Some(cidx) = col_of(v) {
                    a[(ri, cidx)] += coef;
                }
            }
            resid[ri] = -self.row_value(r, u);
        }
        let aat = a.mul(&a.transpose());
        let (y, _) = aat.solve(&resid).ok()?;
        let delta = a.transpose().mul_vec(&y);
        if a.mul_vec(&delta) != resid {
            return None;
        }
        let mut out = u.to_vec();
        for (cidx, &v) in free.iter().enumerate() {
            out[v] += delta[cidx];
        }
        if !self.violated_rows(&out).is_empty() {
            return None;
        }
        Some(out)
    }
}

/// Which basis a serialized table is written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFrame {
    /// `∇_{E_x} E_y` in the algebra basis.
    Original,
    /// `∇_{A_x} A_y` in the adapted frame.
    Adapted,
}

/// One serialized entry `∇_x y = Σ coefficient · name`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawEntry {
    pub x: String,
    pub y: String,
    pub result: Vec<(String, Rational)>,
}

/// Converts a named sparse table into frame coefficients.
///
/// In an adapted table, a name that is not a frame name but is an algebra
/// basis name with a numeric suffix shared by a frame name is read as that
/// frame vector; every such reading is returned as a ledger entry.
pub fn resolve_table(
    model: &ContactModel,
    frame: TableFrame,
    entries: &[RawEntry],
) -> Result<(ConnectionTable, Ledger), ConnectionError> {
    let d = model.dim();
    let mut ledger = Vec::new();
    match frame {
        TableFrame::Adapted => {
            let mut g = ConnectionTable::zeros(d);
            let mut seen = vec![false; d * d];
            for e in entries {
                let mut notes = Vec::new();
                let lookup = |name: &str,
                              notes: &mut Vec<(String, String)>|
                 -> Result<usize, ConnectionError> {
                    if let Some(i) = model.frame.index_of(name) {
                        return Ok(i);
                    }
                    let resolved = resolve_foreign(model, name)
                        .ok_or_else(|| ConnectionError::UnknownSymbol(name.into()))?;
                    notes.push((name.to_string(), model.frame.names[resolved].clone()));
                    Ok(resolved)
                };
                let x = lookup(&e.x, &mut notes)?;
                let y = lookup(&e.y, &mut notes)?;
                if seen[x * d + y] {
                    return Err(ConnectionError::DuplicateEntry(e.x.clone(), e.y.clone()));
                }
                seen[x * d + y] = true;
                let mut v = vec![Rational::ZERO; d];
                for (name, q) in &e.result {
                    let k = lookup(name, &mut notes)?;
                    v[k] += *q;
                }
                g.set_entry(x, y, &v);
                for (symbol, resolved) in notes {
                    ledger.push(LedgerEntry {
                        x,
                        y,
                        kind: LedgerKind::Symbol { symbol, resolved },
                        old: v.clone(),
                        new: v.clone(),
                    });
                }
            }
            Ok((g, ledger))
        }
        TableFrame::Original => {
            let alg = &model.algebra;
            let mut orig = Tensor3::zeros(d);
            let mut seen = vec![false; d * d];
            for e in entries {
                let idx = |name: &str| {
                    alg.index_of(name)
                        .ok_or_else(|| ConnectionError::UnknownSymbol(name.into()))
                };
                let (x, y) = (idx(&e.x)?, idx(&e.y)?);
                if seen[x * d + y] {
                    return Err(ConnectionError::DuplicateEntry(e.x.clone(), e.y.clone()));
                }
                seen[x * d + y] = true;
                for (name, q) in &e.result {
                    orig.add_to(x, y, idx(name)?, *q);
                }
            }
            let f = &model.frame.change_of_basis;
            let mut g = ConnectionTable::zeros(d);
            for i in 0..d {
                for j in 0..d {
                    let mut v = vec![Rational::ZERO; d];
                    for x in 0..d {
                        for y in 0..d {
                            let fxy = f[(x, i)] * f[(y, j)];
                            if fxy.is_zero() {
                                continue;
                            }
                            for (k, vk) in v.iter_mut().enumerate() {
                                *vk += fxy * orig.get(x, y, k);
                            }
                        }
                    }
                    g.set_entry(i, j, &model.frame.to_frame(&v));
                }
            }
            Ok((g, ledger))
        }
    }
}

fn resolve_foreign(model: &ContactModel, name: &str) -> Option<usize> {
    model.algebra.index_of(name)?;
    let suffix = numeric_suffix(name)?;
    model
        .frame
        .names
        .iter()
        .position(|f| numeric_suffix(f) == Some(suffix))
}

fn numeric_suffix(name: &str) -> Option<u32> {
    let digits: String = name
        .chars()
        .rev()
        .take_while(|c| c.is_ascii_digit())
        .collect();
    if digits.is_empty() || digits.len() == name.len() {
        return None;
    }
    digits.chars().rev().collect::<String>().parse().ok()
}

/// Renders a frame-coordinate vector as `c1·A1 + c2·A2`.
pub fn format_vector(names: &[String], v: &[Rational]) -> String {
    let terms: Vec<String> = v
        .iter()
        .zip(names)
        .filter(|(q, _)| !q.is_zero())
        .map(|(q, n)| format!("{q}·{n}"))
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::linalg::unit;

    fn q(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    fn vec5(pairs: &[(usize, Rational)]) -> Vec<Rational> {
        let mut v = vec![Rational::ZERO; 5];
        for &(i, x) in pairs {
            v[i - 1] = x;
        }
        v
    }

    #[test]
    fn example2_half_bracket_values() {
        for s in [q(1, 1), q(2, 1), q(-1, 2)] {
            let m = corpus::example2_model(s).unwrap();
            let gp = half_bracket_connection(&m);
            assert_eq!(gp.entry(0, 1), vec![Rational::ZERO; 5]);
            let wf = m.omega_full();
            assert_eq!(nabla_omega(&wf, &gp, 0, 1, 3), -s / q(2, 1));
        }
    }

    #[test]
    fn abelian_half_bracket_is_zero() {
        let m = corpus::heisenberg_model();
        let gp = half_bracket_connection(&m);
        assert!(gp.gamma.is_zero());
    }

    #[test]
    fn example2_vezzoni_values() {
        for s in [q(1, 1), q(2, 1), q(-1, 2)] {
            let m = corpus::example2_model(s).unwrap();
            let gp = half_bracket_connection(&m);
            let nt = vezzoni_tensor(&m, &gp).unwrap();
            let half_a3 = [q(0, 1), q(0, 1), q(1, 2), q(0, 1)];
            assert_eq!(nt.fiber(0, 1), half_a3);
            assert_eq!(nt.fiber(1, 0), half_a3);
            let gt = vezzoni_correction(&m, &gp).unwrap();
            assert_eq!(gt.entry(0, 1), vec5(&[(3, q(1, 3))]));
            assert!(verify_axioms(&m, &gt).all_pass());
        }
    }

    #[test]
    fn correction_leaves_contact_connections_unchanged() {
        let m = corpus::example2_model(q(1, 1)).unwrap();
        let flat = corpus::example2_flat_table(&m);
        assert_eq!(vezzoni_correction(&m, &flat).unwrap(), flat);
    }

    #[test]
    fn example2_flat_passes() {
        let m = corpus::example2_model(q(3, 1)).unwrap();
        let r = verify_axioms(&m, &corpus::example2_flat_table(&m));
        assert!(r.all_pass());
        assert!(r.passes(Axiom::NablaOmega));
        assert!(r.implication_holds);
    }

    #[test]
    fn example1_family_axioms() {
        let m = corpus::example1_model();
        let p = corpus::Example1Params::valid(q(1, 2), q(-3, 1), q(2, 3), q(5, 1));
        assert!(verify_axioms(&m, &corpus::example1_table(&m, &p)).all_pass());
        let bad = corpus::Example1Params {
            a1: q(1, 1),
            d1: q(1, 1),
            ..Default::default()
        };
        let r = verify_axioms(&m, &corpus::example1_table(&m, &bad));
        assert!(!r.passes(Axiom::OmegaParallel));
        assert!(r
            .violations
            .iter()
            .any(|v| v.axiom == Axiom::OmegaParallel && v.indices == vec![0, 0, 1]));
    }

    #[test]
    fn zero_deformation_is_identity() {
        let m = corpus::example2_model(q(1, 1)).unwrap();
        let g = corpus::example2_flat_table(&m);
        assert_eq!(
            deform(&m.omega, &g, &DeformationTensor::zeros(4)).unwrap(),
            g
        );
    }

    #[test]
    fn example2_printed_deformation_gives_flat_table() {
        for s in [q(1, 1), q(2, 1), q(-1, 2)] {
            let m = corpus::example2_model(s).unwrap();
            let gt = vezzoni_correction(&m, &half_bracket_connection(&m)).unwrap();
            let out = deform(&m.omega, &gt, &corpus::example2_deformation()).unwrap();
            assert_eq!(out, corpus::example2_flat_table(&m));
        }
    }

    #[test]
    fn asymmetric_deformation_rejected() {
        let m = corpus::example2_model(q(1, 1)).unwrap();
        let mut s = DeformationTensor::zeros(4);
        s.s3.set(0, 1, 2, q(1, 1));
        let g = corpus::example2_flat_table(&m);
        assert!(matches!(
            deform(&m.omega, &g, &s),
            Err(ConnectionError::InvalidDeformation(_))
        ));
    }

    #[test]
    fn valid_table_repairs_to_itself() {
        let m = corpus::example2_model(q(1, 1)).unwrap();
        let g = corpus::example2_flat_table(&m);
        let (r, ledger) = repair_connection(&m, &g);
        assert_eq!(r, g);
        assert!(ledger.is_empty());
    }

    #[test]
    fn perturbed_flat_entry_recovered() {
        let m = corpus::example2_model(q(1, 1)).unwrap();
        let g = corpus::example2_flat_table(&m);
        let mut raw = g.clone();
        raw.gamma.add_to(3, 0, 0, Rational::ONE);
        let (r, ledger) = repair_connection(&m, &raw);
        assert_eq!(r, g);
        assert_eq!(ledger.len(), 1);
        assert_eq!((ledger[0].x, ledger[0].y), (3, 0));
    }

    #[test]
    fn example3a_slot_repaired_at_s2() {
        let m = corpus::example3_model(q(2, 1)).unwrap();
        let raw = corpus::example3a_raw(&m).unwrap();
        let (g, ledger) = repair_connection(&m, &raw);
        assert_eq!(ledger.len(), 1);
        assert_eq!((ledger[0].x, ledger[0].y), (2, 0));
        assert_eq!(ledger[0].old, vec5(&[(1, q(1, 4))]));
        assert_eq!(ledger[0].new, vec5(&[(1, q(1, 2))]));
        assert!(verify_axioms(&m, &g).all_pass());
    }

    #[test]
    fn example2_tilde_symbols_resolved() {
        let m = corpus::example2_model(q(1, 1)).unwrap();
        let (g, ledger) =
            resolve_table(&m, TableFrame::Adapted, &corpus::example2_tilde_entries()).unwrap();
        let gt = vezzoni_correction(&m, &half_bracket_connection(&m)).unwrap();
        assert_eq!(g, gt);
        let syms: Vec<_> = ledger
            .iter()
            .map(|e| match &e.kind {
                LedgerKind::Symbol { symbol, resolved } => {
                    (e.x, e.y, symbol.clone(), resolved.clone())
                }
                _ => panic!("unexpected ledger kind"),
            })
            .collect();
        assert_eq!(
            syms,
            vec![
                (3, 0, "E1".into(), "A1".into()),
                (3, 1, "E2".into(), "A2".into())
            ]
        );
    }

    #[test]
    fn unknown_symbol_rejected() {
        let m = corpus::example2_model(q(1, 1)).unwrap();
        let e = RawEntry {
            x: "A1".into(),
            y: "Q7".into(),
            result: vec![],
        };
        assert_eq!(
            resolve_table(&m, TableFrame::Adapted, &[e]).unwrap_err(),
            ConnectionError::UnknownSymbol("Q7".into())
        );
    }

    #[test]
    fn original_frame_table_converts() {
        let m = corpus::example1_model();
        // ∇_{E3} = −∇_ξ, ∇_{E3}E1 = [E3,E1] = E2, ∇_{E3}E2 = [E3,E2] = −E1.
        let entries = vec![
            RawEntry {
                x: "E3".into(),
                y: "E1".into(),
                result: vec![("E2".into(), q(1, 1))],
            },
            RawEntry {
                x: "E3".into(),
                y: "E2".into(),
                result: vec![("E1".into(), q(-1, 1))],
            },
        ];
        let (g, ledger) = resolve_table(&m, TableFrame::Original, &entries).unwrap();
        assert!(ledger.is_empty());
        assert_eq!(
            g,
            corpus::example1_table(&m, &corpus::Example1Params::default())
        );
        assert_eq!(
            g.covariant(&unit(3, 2), &unit(3, 0)),
            m.bracket(&unit(3, 2), &unit(3, 0)).unwrap()
        );
    }

    #[test]
    fn symmetric_triple_count() {
        assert_eq!(symmetric_triples(2).len(), 4);
        assert_eq!(symmetric_triples(4).len(), 20);
        assert_eq!(symmetric_triples(6).len(), 56);
    }
}
