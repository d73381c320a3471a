//! Curvature of a contact connection, the symplectic Ricci decomposition of
//! its 𝒟-part, and the classification verdicts derived from them.
//!
//! Sign convention: `R(X,Y) = ∇_{[X,Y]} − [∇_X, ∇_Y]`, the negative of the
//! convention used in most references.

use crate::connection::{verify_axioms, ConnectionError, ConnectionTable};
use crate::lie_contact::ContactModel;
use crate::linalg::{Matrix, QMatrix, Tensor3, Tensor4};
use crate::rational::{Rational, Scalar};

/// `R[i][j][k][l]`: `R(A_i, A_j) A_k = Σ_l R[i][j][k][l] A_l` over the full
/// adapted frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureTensor<T: Scalar = Rational> {
    pub r: Tensor4<T>,
}

impl<T: Scalar> CurvatureTensor<T> {
    pub fn dim(&self) -> usize {
        self.r.dim()
    }

    /// `R(x, y) z` for frame-coordinate vectors.
    pub fn apply(&self, x: &[T], y: &[T], z: &[T]) -> Vec<T> {
        let d = self.dim();
        let mut out = vec![T::zero(); d];
        for i in 0..d {
            if x[i] == T::zero() {
                continue;
            }
            for j in 0..d {
                let xy = x[i] * y[j];
                if xy == T::zero() {
                    continue;
                }
                for k in 0..d {
                    let f = xy * z[k];
                    if f == T::zero() {
                        continue;
                    }
                    for (l, o) in out.iter_mut().enumerate() {
                        *o = *o + f * self.r.get(i, j, k, l);
                    }
                }
            }
        }
        out
    }

    /// Matrix of `R(x, y)` in the column convention.
    pub fn endomorphism(&self, x: &[T], y: &[T]) -> Matrix<T> {
        let d = self.dim();
        let mut m = Matrix::zeros(d, d);
        for i in 0..d {
            if x[i] == T::zero() {
                continue;
            }
            for j in 0..d {
                let xy = x[i] * y[j];
                if xy == T::zero() {
                    continue;
                }
                for k in 0..d {
                    for l in 0..d {
                        m[(l, k)] = m[(l, k)] + xy * self.r.get(i, j, k, l);
                    }
                }
            }
        }
        m
    }

    pub fn is_zero(&self) -> bool {
        self.r.is_zero()
    }
}

/// Curvature from frame structure constants `c` and a connection table.
pub fn curvature_from<T: Scalar>(c: &Tensor3<T>, gamma: &ConnectionTable<T>) -> CurvatureTensor<T> {
    let d = gamma.dim();
    let g = &gamma.gamma;
    let mut r = Tensor4::zeros(d);
    for i in 0..d {
        for j in i + 1..d {
            for k in 0..d {
                for l in 0..d {
                    let mut acc = T::zero();
                    for m in 0..d {
                        acc = acc + c.get(i, j, m) * g.get(m, k, l)
                            - g.get(j, k, m) * g.get(i, m, l)
                            + g.get(i, k, m) * g.get(j, m, l);
                    }
                    r.set(i, j, k, l, acc);
                    r.set(j, i, k, l, -acc);
                }
            }
        }
    }
    CurvatureTensor { r }
}

/// Derivative of [`curvature_from`] at `gamma` in the direction `dgamma`.
pub fn curvature_derivative<T: Scalar>(
    c: &Tensor3<T>,
    gamma: &ConnectionTable<T>,
    dgamma: &ConnectionTable<T>,
) -> CurvatureTensor<T> {
    let d = gamma.dim();
    let g = &gamma.gamma;
    let h = &dgamma.gamma;
    let mut r = Tensor4::zeros(d);
    for i in 0..d {
        for j in i + 1..d {
            for k in 0..d {
                for l in 0..d {
                    let mut acc = T::zero();
                    for m in 0..d {
                        acc = acc + c.get(i, j, m) * h.get(m, k, l)
                            - h.get(j, k, m) * g.get(i, m, l)
                            - g.get(j, k, m) * h.get(i, m, l)
                            + h.get(i, k, m) * g.get(j, m, l)
                            + g.get(i, k, m) * h.get(j, m, l);
                    }
                    r.set(i, j, k, l, acc);
                    r.set(j, i, k, l, -acc);
                }
            }
        }
    }
    CurvatureTensor { r }
}

/// Exact curvature of a connection on a model.
pub fn curvature(model: &ContactModel, gamma: &ConnectionTable) -> CurvatureTensor {
    curvature_from(model.frame_constants(), gamma)
}

/// `R_𝒟(X,Y,Z,U) = ω(R(X,Y)Z, U)` on 𝒟, in a chosen basis of 𝒟, carrying
/// the Gram matrix of ω in that basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FourTensorD<T: Scalar = Rational> {
    pub rd: Tensor4<T>,
    pub omega: Matrix<T>,
    pub omega_inv: Matrix<T>,
}

impl<T: Scalar> FourTensorD<T> {
    pub fn dim(&self) -> usize {
        self.rd.dim()
    }

    /// True when ω is the standard form `ω(e_i, e_{j+n}) = δ_ij`.
    pub fn in_symplectic_basis(&self) -> bool {
        let d = self.dim();
        let n = d / 2;
        (0..d).all(|i| {
            (0..d).all(|j| {
                let want = if j == i + n {
                    T::one()
                } else if i == j + n {
                    -T::one()
                } else {
                    T::zero()
                };
                (self.omega[(i, j)] - want).is_negligible()
            })
        })
    }
}

/// `R_𝒟` in the 𝒟-part of the adapted frame.
pub fn rd_tensor_frame<T: Scalar>(
    r: &CurvatureTensor<T>,
    omega: &Matrix<T>,
    omega_inv: &Matrix<T>,
) -> FourTensorD<T> {
    let m = omega.rows();
    let mut rd = Tensor4::zeros(m);
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                for e in 0..m {
                    let v = (0..m).fold(T::zero(), |acc, l| {
                        acc + r.r.get(a, b, c, l) * omega[(l, e)]
                    });
                    rd.set(a, b, c, e, v);
                }
            }
        }
    }
    FourTensorD {
        rd,
        omega: omega.clone(),
        omega_inv: omega_inv.clone(),
    }
}

/// `R_𝒟` in the basis whose vectors are the columns of `basis` (𝒟-frame
/// coordinates).
pub fn rd_tensor_in_basis(
    model: &ContactModel,
    r: &CurvatureTensor,
    basis: &QMatrix,
) -> FourTensorD {
    let w = &model.omega;
    let frame = rd_tensor_frame(r, w, &w.inverse().expect("model omega is nondegenerate"));
    let m = w.rows();
    let b = basis;
    let mut t1 = Tensor4::zeros(m);
    // Change basis one slot at a time.
    let mut cur = frame.rd.clone();
    for slot in 0..4 {
        for p in 0..m {
            for q in 0..m {
                for s in 0..m {
                    for u in 0..m {
                        let idx = [p, q, s, u];
                        let mut acc = Rational::ZERO;
                        for x in 0..m {
                            let coef = b[(x, idx[slot])];
                            if coef.is_zero() {
                                continue;
                            }
                            let mut src = idx;
                            src[slot] = x;
                            acc += coef * cur.get(src[0], src[1], src[2], src[3]);
                        }
                        t1.set(p, q, s, u, acc);
                    }
                }
            }
        }
        std::mem::swap(&mut cur, &mut t1);
    }
    let omega = b.transpose().mul(w).mul(b);
    let omega_inv = omega
        .inverse()
        .expect("basis of the distribution is invertible");
    FourTensorD {
        rd: cur,
        omega,
        omega_inv,
    }
}

/// `R_𝒟` in the model's fixed symplectic basis.
pub fn rd_tensor(model: &ContactModel, r: &CurvatureTensor) -> FourTensorD {
    rd_tensor_in_basis(model, r, &model.symplectic().transform)
}

/// Symmetric Ricci tensor `σ(X,Y) = Trace{Z ↦ R(X,Z)Y}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RicciTensor<T: Scalar = Rational> {
    pub sigma: Matrix<T>,
}

impl<T: Scalar> RicciTensor<T> {
    pub fn is_symmetric(&self) -> bool {
        let m = self.sigma.rows();
        (0..m).all(|i| (0..m).all(|j| (self.sigma[(i, j)] - self.sigma[(j, i)]).is_negligible()))
    }
}

/// Trace formula, valid in any basis of 𝒟.
pub fn ricci<T: Scalar>(rd: &FourTensorD<T>) -> RicciTensor<T> {
    let m = rd.dim();
    let mut sigma = Matrix::zeros(m, m);
    for a in 0..m {
        for c in 0..m {
            let mut acc = T::zero();
            for b in 0..m {
                for e in 0..m {
                    let w = rd.omega_inv[(e, b)];
                    if w != T::zero() {
                        acc = acc + rd.rd.get(a, b, c, e) * w;
                    }
                }
            }
            sigma[(a, c)] = acc;
        }
    }
    RicciTensor { sigma }
}

/// `σ(X,Y) = Σ_i [R(X,E_i,Y,E_{i+n}) − R(X,E_{i+n},Y,E_i)]`; `None` unless
/// the tensor is given in a symplectic basis.
pub fn ricci_symplectic<T: Scalar>(rd: &FourTensorD<T>) -> Option<RicciTensor<T>> {
    if !rd.in_symplectic_basis() {
        return None;
    }
    let m = rd.dim();
    let n = m / 2;
    let mut sigma = Matrix::zeros(m, m);
    for x in 0..m {
        for y in 0..m {
            let mut acc = T::zero();
            for i in 0..n {
                acc = acc + rd.rd.get(x, i, y, i + n) - rd.rd.get(x, i + n, y, i);
            }
            sigma[(x, y)] = acc;
        }
    }
    Some(RicciTensor { sigma })
}

/// The tensor of Ricci type built from a symmetric 2-tensor `P`:
/// `(1/(2n+2))[−ω(X,Z)P(Y,U) + ω(Y,U)P(X,Z) − ω(X,U)P(Y,Z) + ω(Y,Z)P(X,U) − 2ω(X,Y)P(Z,U)]`.
pub fn ricci_type_tensor<T: Scalar>(omega: &Matrix<T>, p: &Matrix<T>) -> Tensor4<T> {
    let m = omega.rows();
    let k = T::from_rational(Rational::new(1, m as i128 + 2));
    let two = T::one() + T::one();
    let mut out = Tensor4::zeros(m);
    for x in 0..m {
        for y in 0..m {
            for z in 0..m {
                for u in 0..m {
                    let v = -omega[(x, z)] * p[(y, u)] + omega[(y, u)] * p[(x, z)]
                        - omega[(x, u)] * p[(y, z)]
                        + omega[(y, z)] * p[(x, u)]
                        - two * omega[(x, y)] * p[(z, u)];
                    out.set(x, y, z, u, k * v);
                }
            }
        }
    }
    out
}

/// Projection onto the Ricci-type summand, with `P = σ`. The trace map sends
/// `ricci_type_tensor(ω, P)` back to exactly `P`, so no rescaling is needed.
pub fn ricci_type_projection<T: Scalar>(
    rd: &FourTensorD<T>,
    sigma: &RicciTensor<T>,
) -> FourTensorD<T> {
    FourTensorD {
        rd: ricci_type_tensor(&rd.omega, &sigma.sigma),
        omega: rd.omega.clone(),
        omega_inv: rd.omega_inv.clone(),
    }
}

/// `R_𝒟 − projection`, which has vanishing Ricci tensor.
pub fn ricci_type_residual<T: Scalar>(rd: &FourTensorD<T>) -> Tensor4<T> {
    let proj = ricci_type_projection(rd, &ricci(rd));
    rd.rd.zip_with(&proj.rd, |a, b| a - b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RicciTypeCheck<T: Scalar = Rational> {
    pub holds: bool,
    /// Max-absolute-component norm of the residual.
    pub residual_norm: T,
    /// First index tuple (in the basis of the input) with nonzero residual.
    pub witness: Option<[usize; 4]>,
}

pub fn is_ricci_type<T: Scalar>(rd: &FourTensorD<T>) -> RicciTypeCheck<T> {
    let res = ricci_type_residual(rd);
    let m = rd.dim();
    let mut norm = T::zero();
    let mut witness = None;
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                for e in 0..m {
                    let v = res.get(a, b, c, e);
                    if v.absolute() > norm {
                        norm = v.absolute();
                    }
                    if witness.is_none() && !v.is_negligible() {
                        witness = Some([a, b, c, e]);
                    }
                }
            }
        }
    }
    RicciTypeCheck {
        holds: witness.is_none(),
        residual_norm: norm,
        witness,
    }
}

/// Ricci-type residual as a (1,3) tensor on the 𝒟-frame:
/// `R(X,Y)Z − R^r(X,Y)Z` with `R^r` the projection with its index raised.
pub fn ricci_type_endomorphism_residual(
    model: &ContactModel,
    r: &CurvatureTensor,
) -> Tensor4<Rational> {
    let w = &model.omega;
    let rd = rd_tensor_frame(r, w, &w.inverse().expect("model omega is nondegenerate"));
    let res = ricci_type_residual(&rd);
    let m = w.rows();
    let mut out = Tensor4::zeros(m);
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                for l in 0..m {
                    let v = (0..m)
                        .map(|e| res.get(a, b, c, e) * rd.omega_inv[(e, l)])
                        .sum();
                    out.set(a, b, c, l, v);
                }
            }
        }
    }
    out
}

/// `R(A_i, ξ) A_j` for all frame indices, row-major in `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReebCurvature<T: Scalar = Rational> {
    pub vectors: Vec<Vec<T>>,
    pub vanishes: bool,
}

pub fn reeb_curvature<T: Scalar>(r: &CurvatureTensor<T>) -> ReebCurvature<T> {
    let d = r.dim();
    let xi = d - 1;
    let mut vectors = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            vectors.push((0..d).map(|l| r.r.get(i, xi, j, l)).collect::<Vec<T>>());
        }
    }
    let vanishes = vectors.iter().all(|v| v.iter().all(|x| x.is_negligible()));
    ReebCurvature { vectors, vanishes }
}

/// Normality and CR-integrability verdicts derived from the curvature.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationReport {
    pub is_flat: bool,
    pub reeb_flat: bool,
    pub ricci_type: bool,
    pub ricci_type_residual_norm: Rational,
    /// Frame indices `(X, Y, Z, U)` of the first nonzero covariant residual.
    pub ricci_type_witness: Option<[usize; 4]>,
    pub normal_phi1: bool,
    /// The structure built from `Φ₂` is never normal.
    pub normal_phi2: bool,
    pub cr1_integrable: bool,
    /// The CR structure built from `Φ₂` is never integrable.
    pub cr2_integrable: bool,
    pub xi_h_killing: bool,
}

impl ClassificationReport {
    pub fn from_parts(is_flat: bool, reeb_flat: bool, rt: &RicciTypeCheck<Rational>) -> Self {
        ClassificationReport {
            is_flat,
            reeb_flat,
            ricci_type: rt.holds,
            ricci_type_residual_norm: rt.residual_norm,
            ricci_type_witness: rt.witness,
            normal_phi1: reeb_flat && rt.holds,
            normal_phi2: false,
            cr1_integrable: rt.holds,
            cr2_integrable: false,
            xi_h_killing: reeb_flat,
        }
    }
}

pub fn classify(
    model: &ContactModel,
    gamma: &ConnectionTable,
) -> Result<ClassificationReport, ConnectionError> {
    let report = verify_axioms(model, gamma);
    if !report.all_pass() {
        let first = &report.violations[0];
        return Err(ConnectionError::InvalidConnection(format!(
            "{} fails at {:?} with residual {}",
            first.axiom, first.indices, first.residual
        )));
    }
    let r = curvature(model, gamma);
    let w = &model.omega;
    let rd = rd_tensor_frame(&r, w, &w.inverse().expect("model omega is nondegenerate"));
    let rt = is_ricci_type(&rd);
    let reeb = reeb_curvature(&r);
    Ok(ClassificationReport::from_parts(
        r.is_zero(),
        reeb.vanishes,
        &rt,
    ))
}

/// Which exhaustive identity failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvatureIdentity {
    Skew,
    ReebAnnihilated,
    PreservesDistribution,
    /// `ω(R(X,Y)Z, U) = ω(R(X,Y)U, Z)`.
    OmegaSymmetry,
    /// `R(X,Y)Z + R(Y,Z)X + R(Z,X)Y = 0`.
    Bianchi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityViolation<T: Scalar = Rational> {
    pub identity: CurvatureIdentity,
    pub indices: Vec<usize>,
    pub residual: T,
}

/// Exhaustive check of the algebraic curvature identities over the whole
/// frame, including slots filled by ξ.
pub fn check_identities<T: Scalar>(
    r: &CurvatureTensor<T>,
    omega_full: &Matrix<T>,
) -> Vec<IdentityViolation<T>> {
    let d = r.dim();
    let xi = d - 1;
    let mut out = Vec::new();
    let mut push = |identity, indices: Vec<usize>, residual: T| {
        if !residual.is_negligible() {
            out.push(IdentityViolation {
                identity,
                indices,
                residual,
            });
        }
    };
    let low = |i: usize, j: usize, k: usize, u: usize| {
        (0..d).fold(T::zero(), |acc, l| {
            acc + r.r.get(i, j, k, l) * omega_full[(l, u)]
        })
    };
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    push(
                        CurvatureIdentity::Skew,
                        vec![i, j, k, l],
                        r.r.get(i, j, k, l) + r.r.get(j, i, k, l),
                    );
                }
                push(
                    CurvatureIdentity::ReebAnnihilated,
                    vec![i, j, k],
                    if k == xi {
                        (0..d).fold(T::zero(), |acc, l| acc + r.r.get(i, j, xi, l).absolute())
                    } else {
                        T::zero()
                    },
                );
                if k < xi {
                    push(
                        CurvatureIdentity::PreservesDistribution,
                        vec![i, j, k],
                        r.r.get(i, j, k, xi),
                    );
                }
            }
        }
    }
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for u in 0..d {
                    push(
                        CurvatureIdentity::OmegaSymmetry,
                        vec![i, j, k, u],
                        low(i, j, k, u) - low(i, j, u, k),
                    );
                }
            }
        }
    }
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let v = r.r.get(i, j, k, l) + r.r.get(j, k, i, l) + r.r.get(k, i, j, l);
                    push(CurvatureIdentity::Bianchi, vec![i, j, k, l], v);
                }
            }
        }
    }
    out
}

/// Exhaustive check of the 𝒟-tensor symmetries: skew in the first pair,
/// symmetric in the last pair, cyclic sum over the first three slots.
pub fn check_rd_symmetries<T: Scalar>(rd: &FourTensorD<T>) -> bool {
    let m = rd.dim();
    let t = &rd.rd;
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                for e in 0..m {
                    let v = t.get(a, b, c, e);
                    if !(v + t.get(b, a, c, e)).is_negligible()
                        || !(v - t.get(a, b, e, c)).is_negligible()
                        || !(v + t.get(b, c, a, e) + t.get(c, a, b, e)).is_negligible()
                    {
                        return false;
                    }
                }
            }
        }
    }
    true
}
