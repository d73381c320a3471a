//! Pointwise tensors of the contact twistor space: the f-structures `Φₖ`,
//! the metric `G_t`, `dη_t`, the normality tensor `N⁽¹⁾ₖ`, the Levi form,
//! and sampled scans that cross-check the curvature classification.
//!
//! A point is a compatible `J` on the contact distribution at the identity,
//! written in the adapted frame. Horizontal vectors are frame coordinates of
//! length `2n + 1` with `ξ` last; vertical vectors are `2n × 2n`
//! endomorphisms of the distribution.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::connection::ConnectionTable;
use crate::curvature::{curvature, CurvatureTensor};
use crate::fiber::{
    fiber_metric, sample_fiber, standard_omega, tangent_projection, vertical_basis,
    vertical_defect, CompatibleJ, FiberError, RMatrix,
};
use crate::lie_contact::ContactModel;
use crate::linalg::Tensor4;
use crate::rational::{Rational, TAU_ALG};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TwistorError {
    #[error("vertical scale t must be positive, got {0}")]
    NonPositiveT(f64),
    #[error("horizontal part has ξ-component {0}, so the vector is not in ℰ")]
    NotInE(f64),
    #[error("k must be 1 or 2, got {0}")]
    BadIndex(u8),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Fiber(#[from] FiberError),
}

fn to_rmatrix(m: &crate::linalg::QMatrix) -> RMatrix {
    RMatrix::from_fn(m.rows(), m.cols(), |r, c| m[(r, c)].to_f64())
}

fn max_entry(m: &RMatrix) -> f64 {
    m.iter().fold(0.0, |a, &x| a.max(x.abs()))
}

/// A fibre point over the identity together with the curvature of the
/// connection it is evaluated against.
#[derive(Debug, Clone)]
pub struct TwistorPoint {
    /// `ω` on the 𝒟-part of the adapted frame.
    pub omega: RMatrix,
    /// Columns are the model's symplectic basis in 𝒟-frame coordinates.
    pub basis: RMatrix,
    basis_inv: RMatrix,
    /// `J` on 𝒟 in frame coordinates.
    pub j: CompatibleJ,
    pub curvature: CurvatureTensor<f64>,
}

/// Frame data shared by every point over one model.
#[derive(Debug, Clone)]
pub struct FrameData {
    pub omega: RMatrix,
    pub basis: RMatrix,
    basis_inv: RMatrix,
}

impl FrameData {
    pub fn new(model: &ContactModel) -> Self {
        let omega = to_rmatrix(&model.omega);
        let basis = to_rmatrix(&model.symplectic().transform);
        let basis_inv = basis
            .clone()
            .try_inverse()
            .expect("symplectic basis is invertible");
        FrameData {
            omega,
            basis,
            basis_inv,
        }
    }

    /// Conjugates an endomorphism written in the symplectic basis into frame
    /// coordinates.
    pub fn from_standard(&self, m: &RMatrix) -> RMatrix {
        &self.basis * m * &self.basis_inv
    }

    pub fn point(&self, j_standard: &CompatibleJ, r: &CurvatureTensor<f64>) -> TwistorPoint {
        TwistorPoint {
            omega: self.omega.clone(),
            basis: self.basis.clone(),
            basis_inv: self.basis_inv.clone(),
            j: CompatibleJ {
                matrix: self.from_standard(&j_standard.matrix),
            },
            curvature: r.clone(),
        }
    }
}

impl TwistorPoint {
    /// Transports `j_standard` (given in the symplectic basis with the
    /// standard form) to the adapted frame of `model`.
    pub fn new(
        model: &ContactModel,
        r: &CurvatureTensor<f64>,
        j_standard: &CompatibleJ,
    ) -> Result<Self, TwistorError> {
        j_standard.check(&standard_omega(model.n()))?;
        if r.dim() != model.dim() {
            return Err(TwistorError::DimensionMismatch {
                expected: model.dim(),
                got: r.dim(),
            });
        }
        Ok(FrameData::new(model).point(j_standard, r))
    }

    /// `2n + 1`.
    pub fn dim(&self) -> usize {
        self.omega.nrows() + 1
    }

    pub fn from_standard(&self, m: &RMatrix) -> RMatrix {
        &self.basis * m * &self.basis_inv
    }

    /// The `i`-th symplectic basis vector as a horizontal vector.
    pub fn symplectic_vector(&self, i: usize) -> Vec<f64> {
        let mut v: Vec<f64> = self.basis.column(i).iter().copied().collect();
        v.push(0.0);
        v
    }

    fn d_part(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(&x[..self.dim() - 1])
    }

    /// `JX` with `Jξ = 0`.
    pub fn apply_j(&self, x: &[f64]) -> Vec<f64> {
        let mut v: Vec<f64> = (&self.j.matrix * self.d_part(x)).iter().copied().collect();
        v.push(0.0);
        v
    }

    pub fn omega(&self, x: &[f64], y: &[f64]) -> f64 {
        (self.d_part(x).transpose() * &self.omega * self.d_part(y))[(0, 0)]
    }

    /// `R(X, Y)` restricted to 𝒟, in frame coordinates.
    pub fn curvature_endomorphism(&self, x: &[f64], y: &[f64]) -> RMatrix {
        let d = self.dim() - 1;
        let r = &self.curvature.r;
        let mut out = RMatrix::zeros(d, d);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (j, &yj) in y.iter().enumerate() {
                if yj == 0.0 || i == j {
                    continue;
                }
                let f = xi * yj;
                for k in 0..d {
                    for l in 0..d {
                        out[(l, k)] += f * r.get(i, j, k, l);
                    }
                }
            }
        }
        out
    }
}

/// A tangent vector of the twistor space at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct TwistorTangent {
    pub horizontal: Vec<f64>,
    pub vertical: RMatrix,
}

impl TwistorTangent {
    pub fn horizontal(x: Vec<f64>) -> Self {
        let d = x.len() - 1;
        TwistorTangent {
            horizontal: x,
            vertical: RMatrix::zeros(d, d),
        }
    }

    /// Checks that the vertical part anticommutes with `J` and is ω-skew.
    pub fn vertical(point: &TwistorPoint, v: RMatrix) -> Result<Self, TwistorError> {
        let defect = vertical_defect(&point.j, &v, &point.omega);
        if defect > TAU_ALG * (1.0 + max_entry(&v)) {
            return Err(FiberError::NotCompatible(format!("vertical defect {defect}")).into());
        }
        Ok(TwistorTangent {
            horizontal: vec![0.0; point.dim()],
            vertical: v,
        })
    }

    pub fn new(point: &TwistorPoint, x: Vec<f64>, v: RMatrix) -> Result<Self, TwistorError> {
        if x.len() != point.dim() {
            return Err(TwistorError::DimensionMismatch {
                expected: point.dim(),
                got: x.len(),
            });
        }
        let mut t = Self::vertical(point, v)?;
        t.horizontal = x;
        Ok(t)
    }
}

fn sign(k: u8) -> Result<f64, TwistorError> {
    match k {
        1 => Ok(1.0),
        2 => Ok(-1.0),
        other => Err(TwistorError::BadIndex(other)),
    }
}

/// `Φₖ(X^h + V) = (JX)^h + (−1)^{k+1} JV`.
pub fn phi(
    point: &TwistorPoint,
    t: &TwistorTangent,
    k: u8,
) -> Result<TwistorTangent, TwistorError> {
    let s = sign(k)?;
    Ok(TwistorTangent {
        horizontal: point.apply_j(&t.horizontal),
        vertical: &point.j.matrix * &t.vertical * s,
    })
}

/// `G_t = ω(X, JY) + α(X)α(Y) + t·G_J(V, W)`.
pub fn metric_gt(
    point: &TwistorPoint,
    a: &TwistorTangent,
    b: &TwistorTangent,
    t: f64,
) -> Result<f64, TwistorError> {
    if t <= 0.0 {
        return Err(TwistorError::NonPositiveT(t));
    }
    let xi = point.dim() - 1;
    let h = point.omega(&a.horizontal, &point.apply_j(&b.horizontal))
        + a.horizontal[xi] * b.horizontal[xi];
    Ok(h + t * fiber_metric(&point.j, &a.vertical, &b.vertical, &point.omega))
}

/// `R(X,Y)∘A − A∘R(X,Y)`.
pub fn endo_curvature(rxy: &RMatrix, a: &RMatrix) -> RMatrix {
    rxy * a - a * rxy
}

/// `N⁽¹⁾ₖ(X^h, Y^h) = −R(X,Y)J + R(JX,JY)J − (−1)^{k+1} J(R(JX,Y)J + R(X,JY)J)`,
/// where `R(·,·)J` is the commutator action on endomorphisms.
pub fn n1_horizontal(
    point: &TwistorPoint,
    x: &[f64],
    y: &[f64],
    k: u8,
) -> Result<RMatrix, TwistorError> {
    let s = sign(k)?;
    let j = &point.j.matrix;
    let (jx, jy) = (point.apply_j(x), point.apply_j(y));
    let term = |a: &[f64], b: &[f64]| endo_curvature(&point.curvature_endomorphism(a, b), j);
    let inner = term(&jx, y) + term(x, &jy);
    Ok(-term(x, y) + term(&jx, &jy) - j * inner * s)
}

/// Value of the mixed normality tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedValue {
    pub horizontal: Vec<f64>,
    /// Whether the vertical input had to be projected onto `T_Jℤ`.
    pub projected: bool,
}

/// `N⁽¹⁾ₖ(X^h, V) = [1 + (−1)^k](JVX)^h`.
pub fn n1_mixed(
    point: &TwistorPoint,
    x: &[f64],
    v: &RMatrix,
    k: u8,
) -> Result<MixedValue, TwistorError> {
    let s = sign(k)?;
    let projected = vertical_defect(&point.j, v, &point.omega) > TAU_ALG * (1.0 + max_entry(v));
    let v = if projected {
        tangent_projection(&point.j, v, &point.omega)?
    } else {
        v.clone()
    };
    let factor = 1.0 - s;
    let mut h: Vec<f64> = (&point.j.matrix * v * point.d_part(x) * factor)
        .iter()
        .copied()
        .collect();
    h.push(0.0);
    Ok(MixedValue {
        horizontal: h,
        projected,
    })
}

/// `N⁽¹⁾ₖ(V, W) = 0`.
pub fn n1_vertical(point: &TwistorPoint) -> Vec<f64> {
    vec![0.0; point.dim()]
}

fn check_in_e(t: &TwistorTangent) -> Result<(), TwistorError> {
    let c = *t.horizontal.last().expect("nonempty horizontal part");
    if c.abs() > TAU_ALG {
        return Err(TwistorError::NotInE(c));
    }
    Ok(())
}

/// Levi form of the CR structure on `ℰ`: `−ω(X, Y)` on horizontal parts, zero
/// on any pair involving vertical parts.
pub fn levi_form(
    point: &TwistorPoint,
    a: &TwistorTangent,
    b: &TwistorTangent,
) -> Result<f64, TwistorError> {
    check_in_e(a)?;
    check_in_e(b)?;
    Ok(-point.omega(&a.horizontal, &b.horizontal))
}

/// `dη_t(X^h, Y^h) = ω(X, Y)`, zero on pairs involving vertical parts. The
/// exterior derivative follows the convention without the factor ½.
pub fn d_eta(
    point: &TwistorPoint,
    a: &TwistorTangent,
    b: &TwistorTangent,
    t: f64,
) -> Result<f64, TwistorError> {
    if t <= 0.0 {
        return Err(TwistorError::NonPositiveT(t));
    }
    Ok(point.omega(&a.horizontal, &b.horizontal))
}

/// Max of `|R_𝒟(J⁻a, J⁻b, J⁻c, J⁻e)|` over frame vectors of 𝒟, with
/// `J⁻ = ½(Id + iJ)`.
pub fn rd_minus_max(point: &TwistorPoint) -> f64 {
    let d = point.dim() - 1;
    let r = &point.curvature.r;
    let mut rd = Tensor4::<f64>::zeros(d);
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                for e in 0..d {
                    let v: f64 = (0..d)
                        .map(|l| r.get(a, b, c, l) * point.omega[(l, e)])
                        .sum();
                    rd.set(a, b, c, e, v);
                }
            }
        }
    }
    let jm: Vec<Vec<Complex64>> = (0..d)
        .map(|col| {
            (0..d)
                .map(|row| {
                    let id = if row == col { 0.5 } else { 0.0 };
                    Complex64::new(id, 0.5 * point.j.matrix[(row, col)])
                })
                .collect()
        })
        .collect();
    let mut best = 0.0f64;
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                for e in 0..d {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for p in 0..d {
                        let fp = jm[a][p];
                        if fp == Complex64::new(0.0, 0.0) {
                            continue;
                        }
                        for q in 0..d {
                            let fq = fp * jm[b][q];
                            if fq == Complex64::new(0.0, 0.0) {
                                continue;
                            }
                            for s in 0..d {
                                let fs = fq * jm[c][s];
                                if fs == Complex64::new(0.0, 0.0) {
                                    continue;
                                }
                                for u in 0..d {
                                    acc += fs * jm[e][u] * rd.get(p, q, s, u);
                                }
                            }
                        }
                    }
                    best = best.max(acc.norm());
                }
            }
        }
    }
    best
}

/// Frame indices of a maximum in a scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanWitness {
    pub sample: usize,
    pub x: usize,
    /// Second frame index, or the index of the vertical basis element for
    /// the mixed category.
    pub y: usize,
}

/// Per-category maxima of the normality tensor over sampled fibre points.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    pub k: u8,
    pub samples: usize,
    pub t: f64,
    /// Max `G_t`-norm of `N⁽¹⁾ₖ(X^h, Y^h)` over frame vectors `X, Y ∈ 𝒟`.
    pub max_dd: f64,
    /// Same with one argument equal to `ξ`.
    pub max_xi: f64,
    /// Max `G_t`-norm of `N⁽¹⁾ₖ(X^h, V)` over frame vectors and the
    /// orthonormal vertical basis.
    pub max_mixed: f64,
    pub witness_dd: Option<ScanWitness>,
    pub witness_xi: Option<ScanWitness>,
    pub witness_mixed: Option<ScanWitness>,
    /// All maxima below the algebraic tolerance.
    pub normal: bool,
    /// The `ℰ × ℰ` maxima (`𝒟 × 𝒟` and mixed) below tolerance.
    pub cr_integrable: bool,
}

#[derive(Debug, Clone, Copy, Default)]
struct Maxima {
    dd: (f64, Option<ScanWitness>),
    xi: (f64, Option<ScanWitness>),
    mixed: (f64, Option<ScanWitness>),
}

fn bump(slot: &mut (f64, Option<ScanWitness>), value: f64, w: ScanWitness) {
    if value > slot.0 {
        *slot = (value, Some(w));
    }
}

fn vertical_norm(point: &TwistorPoint, v: &RMatrix, t: f64) -> f64 {
    (t * fiber_metric(&point.j, v, v, &point.omega))
        .max(0.0)
        .sqrt()
}

fn horizontal_norm(point: &TwistorPoint, h: &[f64]) -> f64 {
    let xi = point.dim() - 1;
    (point.omega(h, &point.apply_j(h)) + h[xi] * h[xi])
        .max(0.0)
        .sqrt()
}

fn scan_point(point: &TwistorPoint, sample: usize, k: u8, t: f64) -> Maxima {
    let dim = point.dim();
    let xi = dim - 1;
    let e = |i: usize| {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        v
    };
    let mut m = Maxima::default();
    for x in 0..dim {
        for y in 0..dim {
            if x == y {
                continue;
            }
            let n = n1_horizontal(point, &e(x), &e(y), k).expect("k validated by caller");
            let value = vertical_norm(point, &n, t);
            let w = ScanWitness { sample, x, y };
            if x == xi || y == xi {
                bump(&mut m.xi, value, w);
            } else {
                bump(&mut m.dd, value, w);
            }
        }
    }
    let basis = vertical_basis(&point.j, &point.omega);
    for x in 0..xi {
        for (idx, v) in basis.elements.iter().enumerate() {
            let h = n1_mixed(point, &e(x), &v.matrix, k)
                .expect("k validated by caller")
                .horizontal;
            bump(
                &mut m.mixed,
                horizontal_norm(point, &h),
                ScanWitness { sample, x, y: idx },
            );
        }
    }
    m
}

/// Scan options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    pub k: u8,
    pub samples: usize,
    pub seed: u64,
    pub t: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            k: 1,
            samples: 25,
            seed: 0,
            t: 1.0,
        }
    }
}

/// Evaluates `N⁽¹⁾ₖ` at `J₀` and `samples − 1` further Siegel samples, for
/// all ordered frame pairs.
pub fn normality_scan_curvature(
    model: &ContactModel,
    r: &CurvatureTensor<f64>,
    options: &ScanOptions,
) -> Result<ScanReport, TwistorError> {
    sign(options.k)?;
    if options.t <= 0.0 {
        return Err(TwistorError::NonPositiveT(options.t));
    }
    let frame = FrameData::new(model);
    let js = sample_fiber(model.n(), options.samples, options.seed);
    let per_sample: Vec<Maxima> = js
        .par_iter()
        .enumerate()
        .map(|(s, j)| scan_point(&frame.point(j, r), s, options.k, options.t))
        .collect();
    let mut total = Maxima::default();
    for m in per_sample {
        for (slot, part) in [
            (&mut total.dd, m.dd),
            (&mut total.xi, m.xi),
            (&mut total.mixed, m.mixed),
        ] {
            if let Some(w) = part.1 {
                bump(slot, part.0, w);
            }
        }
    }
    let dd_ok = total.dd.0 < TAU_ALG;
    let mixed_ok = total.mixed.0 < TAU_ALG;
    Ok(ScanReport {
        k: options.k,
        samples: options.samples,
        t: options.t,
        max_dd: total.dd.0,
        max_xi: total.xi.0,
        max_mixed: total.mixed.0,
        witness_dd: total.dd.1,
        witness_xi: total.xi.1,
        witness_mixed: total.mixed.1,
        normal: dd_ok && mixed_ok && total.xi.0 < TAU_ALG,
        cr_integrable: dd_ok && mixed_ok,
    })
}

/// [`normality_scan_curvature`] for an exact connection table.
pub fn normality_scan(
    model: &ContactModel,
    gamma: &ConnectionTable<Rational>,
    options: &ScanOptions,
) -> Result<ScanReport, TwistorError> {
    let r = curvature(model, gamma);
    normality_scan_curvature(
        model,
        &CurvatureTensor {
            r: r.r.map(|q| q.to_f64()),
        },
        options,
    )
}
