//! Geometry of a single twistor fibre: compatible complex structures on a
//! symplectic vector space, the ω-adjoint split, the tangent projection, the
//! vertical basis and fibre metric, and the Siegel upper half-space model.
//!
//! Endomorphisms use the column convention: column `j` holds the image of
//! basis vector `j`. The standard form is `ω(e_i, e_{j+n}) = δ_ij`, and the
//! canonical structure `J₀` sends `e_i ↦ e_{i+n}`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::rational::{TAU_ALG, TAU_GEO};

pub type RMatrix = DMatrix<f64>;
pub type CMatrix = DMatrix<Complex64>;

/// Finite-difference step for pushforwards along the Siegel map.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FiberError {
    #[error("symplectic form is degenerate")]
    Degenerate,
    #[error("matrix is not symmetric positive definite (smallest eigenvalue {min_eigenvalue})")]
    NotSpd { min_eigenvalue: f64 },
    #[error("matrix is not symplectic (defect {defect})")]
    NotSymplectic { defect: f64 },
    #[error("CZ + D is singular")]
    SingularDenominator,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("not a compatible complex structure: {0}")]
    NotCompatible(String),
}

fn max_entry(m: &RMatrix) -> f64 {
    m.iter().fold(0.0, |a, &x| a.max(x.abs()))
}

/// `[[0, I], [−I, 0]]`, the Gram matrix of the standard symplectic form.
pub fn standard_omega(n: usize) -> RMatrix {
    let mut w = RMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        w[(i, i + n)] = 1.0;
        w[(i + n, i)] = -1.0;
    }
    w
}

/// `J₀ e_i = e_{i+n}`, `J₀ e_{i+n} = −e_i`.
pub fn standard_j(n: usize) -> RMatrix {
    let mut j = RMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i + n, i)] = 1.0;
        j[(i, i + n)] = -1.0;
    }
    j
}

/// A complex structure compatible with and tamed by ω.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatibleJ {
    pub matrix: RMatrix,
}

impl CompatibleJ {
    /// Validates `J² = −I`, `ω(J·,J·) = ω` and taming against `omega`.
    pub fn new(matrix: RMatrix, omega: &RMatrix) -> Result<Self, FiberError> {
        let j = CompatibleJ { matrix };
        j.check(omega)?;
        Ok(j)
    }

    pub fn standard(n: usize) -> Self {
        CompatibleJ {
            matrix: standard_j(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn check(&self, omega: &RMatrix) -> Result<(), FiberError> {
        let d = omega.nrows();
        let j = &self.matrix;
        if j.nrows() != d || j.ncols() != d {
            return Err(FiberError::DimensionMismatch {
                expected: d,
                got: j.nrows(),
            });
        }
        let scale = 1.0 + max_entry(j).powi(2);
        let sq = j * j + RMatrix::identity(d, d);
        if max_entry(&sq) > TAU_ALG * scale {
            return Err(FiberError::NotCompatible(format!(
                "J² + I has entry {}",
                max_entry(&sq)
            )));
        }
        let inv = j.transpose() * omega * j - omega;
        if max_entry(&inv) > TAU_ALG * scale * (1.0 + max_entry(omega)) {
            return Err(FiberError::NotCompatible(format!(
                "ω(J·,J·) − ω has entry {}",
                max_entry(&inv)
            )));
        }
        let g = g_matrix(omega, j);
        let g = (&g + g.transpose()) * 0.5;
        let min = SymmetricEigen::new(g).eigenvalues.min();
        if min <= 0.0 {
            return Err(FiberError::NotCompatible(format!(
                "ω(z, Jz) has eigenvalue {min}"
            )));
        }
        Ok(())
    }

    /// `J` extended to `TM = 𝒟 ⊕ ℝξ` by `Jξ = 0`.
    pub fn extended(&self) -> RMatrix {
        let d = self.dim();
        let mut m = RMatrix::zeros(d + 1, d + 1);
        m.view_mut((0, 0), (d, d)).copy_from(&self.matrix);
        m
    }
}

/// Gram matrix of `g_J(x, y) = ω(x, Jy)`.
pub fn g_matrix(omega: &RMatrix, j: &RMatrix) -> RMatrix {
    omega * j
}

/// `A*` with `ω(A*x, y) = ω(x, Ay)`.
pub fn omega_adjoint(a: &RMatrix, omega: &RMatrix) -> Result<RMatrix, FiberError> {
    let inv = omega.clone().try_inverse().ok_or(FiberError::Degenerate)?;
    Ok(inv * a.transpose() * omega)
}

/// `(Ǎ, Â)` with `Ǎ ∈ sp(ω)` and `Â` ω-symmetric.
pub fn omega_split(a: &RMatrix, omega: &RMatrix) -> Result<(RMatrix, RMatrix), FiberError> {
    let star = omega_adjoint(a, omega)?;
    Ok(((a - &star) * 0.5, (a + &star) * 0.5))
}

/// `pr_J(A) = ½(Ǎ + JǍJ)`, the projection onto `T_Jℤ`.
pub fn tangent_projection(
    j: &CompatibleJ,
    a: &RMatrix,
    omega: &RMatrix,
) -> Result<RMatrix, FiberError> {
    let (check, _) = omega_split(a, omega)?;
    let jm = &j.matrix;
    Ok((&check + jm * &check * jm) * 0.5)
}

/// Largest defect of `V` from the tangent space at `J`: the anticommutator
/// with `J` and the failure of ω-skewness.
pub fn vertical_defect(j: &CompatibleJ, v: &RMatrix, omega: &RMatrix) -> f64 {
    let anti = v * &j.matrix + &j.matrix * v;
    let skew = v.transpose() * omega + omega * v;
    max_entry(&anti).max(max_entry(&skew))
}

/// `G_J(A, B) = Trace{x ↦ g_J(Ax, Bx)}`.
pub fn fiber_metric(j: &CompatibleJ, a: &RMatrix, b: &RMatrix, omega: &RMatrix) -> f64 {
    let g = g_matrix(omega, &j.matrix);
    let ginv = g.clone().try_inverse().expect("g_J is positive definite");
    (a.transpose() * &g * b * ginv).trace()
}

/// `L_{ab}` in the basis `E`: `L_{ab} E_c = δ_ac E_b`.
fn elementary(d: usize, a: usize, b: usize) -> RMatrix {
    let mut m = RMatrix::zeros(d, d);
    m[(b, a)] = 1.0;
    m
}

/// One element of the vertical basis.
#[derive(Debug, Clone, PartialEq)]
pub struct VerticalElement {
    pub i: usize,
    pub j: usize,
    /// `true` for `𝒥V_ij = J ∘ V_ij`.
    pub rotated: bool,
    pub matrix: RMatrix,
}

/// The `G_J`-orthonormal basis `{V_ij, 𝒥V_ij : i ≤ j}` of `T_Jℤ` together
/// with the adapted basis it is built from.
#[derive(Debug, Clone, PartialEq)]
pub struct VerticalBasis {
    /// Columns `E_1, …, E_2n`: `g_J`-orthonormal, symplectic, `JE_i = E_{i+n}`.
    pub frame: RMatrix,
    pub elements: Vec<VerticalElement>,
}

/// A `g_J`-orthonormal symplectic basis with `JE_i = E_{i+n}`, by complex
/// Gram–Schmidt on the coordinate vectors.
pub fn adapted_basis(j: &CompatibleJ, omega: &RMatrix) -> RMatrix {
    let d = j.dim();
    let n = d / 2;
    let g = g_matrix(omega, &j.matrix);
    let g = (&g + g.transpose()) * 0.5;
    let ip =
        |x: &nalgebra::DVector<f64>, y: &nalgebra::DVector<f64>| (x.transpose() * &g * y)[(0, 0)];
    let mut es: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(n);
    let mut taken: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(d);
    for c in 0..d {
        if es.len() == n {
            break;
        }
        let mut v = nalgebra::DVector::from_fn(d, |r, _| if r == c { 1.0 } else { 0.0 });
        for _ in 0..2 {
            for u in &taken {
                let p = ip(u, &v);
                v -= u * p;
            }
        }
        let norm = ip(&v, &v).sqrt();
        if norm < 1e-8 {
            continue;
        }
        v /= norm;
        let jv = &j.matrix * &v;
        taken.push(v.clone());
        taken.push(jv);
        es.push(v);
    }
    let mut frame = RMatrix::zeros(d, d);
    for (i, e) in es.iter().enumerate() {
        frame.set_column(i, e);
        frame.set_column(i + n, &(&j.matrix * e));
    }
    frame
}

/// The orthonormal vertical basis: `V_ij = ½(L_{i+n,j} + L_{j+n,i} +
/// L_{i,j+n} + L_{j,i+n})` for `i < j`, `V_ii = (1/√2)(L_{i+n,i} + L_{i,i+n})`,
/// each followed by `J ∘ V_ij`.
pub fn vertical_basis(j: &CompatibleJ, omega: &RMatrix) -> VerticalBasis {
    let d = j.dim();
    let n = d / 2;
    let frame = adapted_basis(j, omega);
    let finv = frame
        .clone()
        .try_inverse()
        .expect("adapted basis is invertible");
    let j_local = standard_j(n);
    let mut elements = Vec::with_capacity(n * (n + 1));
    for a in 0..n {
        for b in a..n {
            let local = unnormalized_local(n, a, b)
                * if a == b {
                    std::f64::consts::FRAC_1_SQRT_2
                } else {
                    0.5
                };
            let rotated = &j_local * &local;
            for (is_rot, m) in [(false, local), (true, rotated)] {
                elements.push(VerticalElement {
                    i: a,
                    j: b,
                    rotated: is_rot,
                    matrix: &frame * m * &finv,
                });
            }
        }
    }
    VerticalBasis { frame, elements }
}

fn unnormalized_local(n: usize, a: usize, b: usize) -> RMatrix {
    let d = 2 * n;
    if a == b {
        elementary(d, a + n, a) + elementary(d, a, a + n)
    } else {
        elementary(d, a + n, b)
            + elementary(d, b + n, a)
            + elementary(d, a, b + n)
            + elementary(d, b, a + n)
    }
}

/// The unnormalized generator with `V_ij E_i = E_{j+n}` (`i ≠ j`) or
/// `V_ii E_i = E_{i+n}`, expressed in the coordinates of `omega`.
pub fn vertical_generator(j: &CompatibleJ, omega: &RMatrix, a: usize, b: usize) -> RMatrix {
    let frame = adapted_basis(j, omega);
    let finv = frame
        .clone()
        .try_inverse()
        .expect("adapted basis is invertible");
    &frame * unnormalized_local(j.dim() / 2, a.min(b), a.max(b)) * finv
}

/// Principal square root of a symmetric positive definite matrix.
pub fn principal_sqrt(y: &RMatrix) -> Result<RMatrix, FiberError> {
    let sym = (y + y.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let min = eig.eigenvalues.min();
    if min <= TAU_ALG {
        return Err(FiberError::NotSpd {
            min_eigenvalue: min,
        });
    }
    let roots = RMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let q = &eig.eigenvectors;
    let r = q * roots * q.transpose();
    Ok((&r + r.transpose()) * 0.5)
}

/// A point `Z = X + iY` of the Siegel upper half-space.
#[derive(Debug, Clone, PartialEq)]
pub struct SiegelPoint {
    pub x: RMatrix,
    pub y: RMatrix,
}

impl SiegelPoint {
    /// Symmetrizes both parts and checks that `Y` is positive definite.
    pub fn new(x: RMatrix, y: RMatrix) -> Result<Self, FiberError> {
        if x.nrows() != y.nrows() || !x.is_square() || !y.is_square() {
            return Err(FiberError::DimensionMismatch {
                expected: y.nrows(),
                got: x.nrows(),
            });
        }
        let x = (&x + x.transpose()) * 0.5;
        let y = (&y + y.transpose()) * 0.5;
        let min = SymmetricEigen::new(y.clone()).eigenvalues.min();
        if min <= 0.0 {
            return Err(FiberError::NotSpd {
                min_eigenvalue: min,
            });
        }
        Ok(SiegelPoint { x, y })
    }

    /// `iI`.
    pub fn base(n: usize) -> Self {
        SiegelPoint {
            x: RMatrix::zeros(n, n),
            y: RMatrix::identity(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn to_complex(&self) -> CMatrix {
        CMatrix::from_fn(self.n(), self.n(), |r, c| {
            Complex64::new(self.x[(r, c)], self.y[(r, c)])
        })
    }

    pub fn from_complex(z: &CMatrix) -> Result<Self, FiberError> {
        Self::new(z.map(|c| c.re), z.map(|c| c.im))
    }

    /// `Z + hW`.
    pub fn shifted(&self, w: &CMatrix, h: f64) -> Result<Self, FiberError> {
        Self::from_complex(&(self.to_complex() + w * Complex64::new(h, 0.0)))
    }
}

fn blocks(psi: &RMatrix) -> (RMatrix, RMatrix, RMatrix, RMatrix) {
    let n = psi.nrows() / 2;
    (
        psi.view((0, 0), (n, n)).into_owned(),
        psi.view((0, n), (n, n)).into_owned(),
        psi.view((n, 0), (n, n)).into_owned(),
        psi.view((n, n), (n, n)).into_owned(),
    )
}

fn complexify(m: &RMatrix) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// `max |ψᵀΩψ − Ω|`.
pub fn symplectic_defect(psi: &RMatrix) -> f64 {
    let w = standard_omega(psi.nrows() / 2);
    max_entry(&(psi.transpose() * &w * psi - w))
}

/// `ψ·Z = (AZ + B)(CZ + D)⁻¹`.
pub fn sp_action(psi: &RMatrix, z: &SiegelPoint) -> Result<SiegelPoint, FiberError> {
    let n = z.n();
    if psi.nrows() != 2 * n || psi.ncols() != 2 * n {
        return Err(FiberError::DimensionMismatch {
            expected: 2 * n,
            got: psi.nrows(),
        });
    }
    let defect = symplectic_defect(psi);
    if defect > TAU_ALG * (1.0 + max_entry(psi).powi(2)) {
        return Err(FiberError::NotSymplectic { defect });
    }
    let (a, b, c, d) = blocks(psi);
    let zc = z.to_complex();
    let num = complexify(&a) * &zc + complexify(&b);
    let den = complexify(&c) * &zc + complexify(&d);
    let inv = den.try_inverse().ok_or(FiberError::SingularDenominator)?;
    SiegelPoint::from_complex(&(num * inv))
}

/// `ψ = [[Y^{1/2}, XY^{-1/2}], [0, Y^{-1/2}]]`, which sends `iI` to `Z`.
pub fn psi_for(z: &SiegelPoint) -> Result<RMatrix, FiberError> {
    let n = z.n();
    let s = principal_sqrt(&z.y)?;
    let sinv = s.clone().try_inverse().ok_or(FiberError::NotSpd {
        min_eigenvalue: 0.0,
    })?;
    let mut psi = RMatrix::zeros(2 * n, 2 * n);
    psi.view_mut((0, 0), (n, n)).copy_from(&s);
    psi.view_mut((0, n), (n, n)).copy_from(&(&z.x * &sinv));
    psi.view_mut((n, n), (n, n)).copy_from(&sinv);
    Ok(psi)
}

/// The complex structure attached to a Siegel point.
#[derive(Debug, Clone, PartialEq)]
pub struct SiegelJ {
    pub j: CompatibleJ,
    /// Whether the block matrix `[[−XY⁻¹, Y + XY⁻¹X], [−Y⁻¹, Y⁻¹X]]` was
    /// negated so that the result tames ω.
    pub flipped: bool,
}

/// `J(Z)`, canonicalized in sign so that `ω(z, Jz) > 0`.
pub fn j_of_z(z: &SiegelPoint) -> Result<SiegelJ, FiberError> {
    let n = z.n();
    let yinv = z.y.clone().try_inverse().ok_or(FiberError::NotSpd {
        min_eigenvalue: 0.0,
    })?;
    let xyinv = &z.x * &yinv;
    let mut m = RMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(&(-&xyinv));
    m.view_mut((0, n), (n, n))
        .copy_from(&(&z.y + &xyinv * &z.x));
    m.view_mut((n, 0), (n, n)).copy_from(&(-&yinv));
    m.view_mut((n, n), (n, n)).copy_from(&(&yinv * &z.x));
    let omega = standard_omega(n);
    let probe = (g_matrix(&omega, &m))[(0, 0)];
    let flipped = probe < 0.0;
    if flipped {
        m = -m;
    }
    Ok(SiegelJ {
        j: CompatibleJ { matrix: m },
        flipped,
    })
}

/// Polarized `H(W₁, W₂) = Re Trace(Y⁻¹W₁Y⁻¹W̄₂)`, which on the diagonal is
/// `Trace(Y⁻¹UY⁻¹U + Y⁻¹VY⁻¹V)` for `W = U + iV`.
pub fn siegel_metric(z: &SiegelPoint, w1: &CMatrix, w2: &CMatrix) -> Result<f64, FiberError> {
    let yinv = z.y.clone().try_inverse().ok_or(FiberError::NotSpd {
        min_eigenvalue: 0.0,
    })?;
    let yc = complexify(&yinv);
    Ok((&yc * w1 * &yc * w2.conjugate()).trace().re)
}

/// Central finite difference of `J(Z)` along `W`.
pub fn j_pushforward(z: &SiegelPoint, w: &CMatrix, h: f64) -> Result<RMatrix, FiberError> {
    let plus = j_of_z(&z.shifted(w, h)?)?;
    let minus = j_of_z(&z.shifted(w, -h)?)?;
    Ok((plus.j.matrix - minus.j.matrix) / (2.0 * h))
}

/// Random point with `X` symmetrized uniform(−1, 1) and `Y = MᵀM + 0.1·I`.
pub fn random_siegel_point<R: Rng>(n: usize, rng: &mut R) -> SiegelPoint {
    let x = RMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let m = RMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let y = m.transpose() * m + RMatrix::identity(n, n) * 0.1;
    SiegelPoint::new(x, y).expect("MᵀM + 0.1 I is positive definite")
}

/// Random complex symmetric tangent vector with entries in the unit square.
pub fn random_tangent<R: Rng>(n: usize, rng: &mut R) -> CMatrix {
    let w = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    (&w + w.transpose()) * Complex64::new(0.5, 0.0)
}

/// Random element of `Sp(2n, ℝ)` as a product of a shear, a block-diagonal
/// factor and a lower shear.
pub fn random_symplectic<R: Rng>(n: usize, rng: &mut R) -> RMatrix {
    let sym = |rng: &mut R| {
        let b = RMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.5..0.5));
        (&b + b.transpose()) * 0.5
    };
    let mut upper = RMatrix::identity(2 * n, 2 * n);
    upper.view_mut((0, n), (n, n)).copy_from(&sym(rng));
    let mut lower = RMatrix::identity(2 * n, 2 * n);
    lower.view_mut((n, 0), (n, n)).copy_from(&sym(rng));
    let a = RMatrix::identity(n, n) + RMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.3..0.3));
    let a_inv_t = a
        .clone()
        .try_inverse()
        .expect("near-identity block is invertible")
        .transpose();
    let mut diag = RMatrix::zeros(2 * n, 2 * n);
    diag.view_mut((0, 0), (n, n)).copy_from(&a);
    diag.view_mut((n, n), (n, n)).copy_from(&a_inv_t);
    upper * diag * lower
}

/// `count` compatible structures for the standard form, `J₀` first, the rest
/// `J(Z)` for random Siegel points.
pub fn sample_fiber(n: usize, count: usize, seed: u64) -> Vec<CompatibleJ> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    out.push(CompatibleJ::standard(n));
    while out.len() < count {
        let z = random_siegel_point(n, &mut rng);
        out.push(j_of_z(&z).expect("sampled point is valid").j);
    }
    out
}

/// Outcome of the sampled checks of the Siegel model.
#[derive(Debug, Clone, PartialEq)]
pub struct SiegelReport {
    pub n: usize,
    pub samples: usize,
    /// Whether `J(iI)` needed the sign flip to equal `J₀`.
    pub base_flipped: bool,
    pub base_defect: f64,
    pub max_square_defect: f64,
    /// Largest defect of `dJ[W]` from `T_{J(Z)}ℤ`, relative to `|dJ[W]|`.
    pub max_tangent_defect: f64,
    /// Largest `|G(dJ[W₁], dJ[W₂]) − 2H(W₁, W₂)|`, relative.
    pub max_metric_error: f64,
    /// Largest `|dJ[iW] − ε·J∘dJ[W]|`, relative, with `ε = holomorphy_sign`.
    pub max_holomorphy_error: f64,
    /// `+1` without sign canonicalization, `−1` once `J(Z)` is negated.
    pub holomorphy_sign: f64,
    pub square_ok: bool,
    pub tangent_ok: bool,
    pub metric_ok: bool,
    pub holomorphy_ok: bool,
}

impl SiegelReport {
    pub fn passes(&self) -> bool {
        self.base_defect == 0.0
            && self.square_ok
            && self.tangent_ok
            && self.metric_ok
            && self.holomorphy_ok
    }
}

fn rel(err: f64, scale: f64) -> f64 {
    err / scale.max(1.0)
}

/// Samples `Z` and tangent directions and checks `J(Z)² = −I`, tangency of
/// the pushforward, `G = 2H`, and holomorphy.
pub fn verify_siegel_model(n: usize, samples: usize, seed: u64) -> SiegelReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = standard_omega(n);
    let base = j_of_z(&SiegelPoint::base(n)).expect("iI is a Siegel point");
    let base_defect = max_entry(&(&base.j.matrix - standard_j(n)));
    let holomorphy_sign = if base.flipped { -1.0 } else { 1.0 };
    let mut report = SiegelReport {
        n,
        samples,
        base_flipped: base.flipped,
        base_defect,
        max_square_defect: 0.0,
        max_tangent_defect: 0.0,
        max_metric_error: 0.0,
        max_holomorphy_error: 0.0,
        holomorphy_sign,
        square_ok: true,
        tangent_ok: true,
        metric_ok: true,
        holomorphy_ok: true,
    };
    let i = Complex64::new(0.0, 1.0);
    for _ in 0..samples {
        let z = random_siegel_point(n, &mut rng);
        let w1 = random_tangent(n, &mut rng);
        let w2 = random_tangent(n, &mut rng);
        let jz = j_of_z(&z).expect("sampled point is valid").j;
        let sq = max_entry(&(&jz.matrix * &jz.matrix + RMatrix::identity(2 * n, 2 * n)));
        report.max_square_defect = report.max_square_defect.max(sq);
        let d1 = j_pushforward(&z, &w1, FD_STEP).expect("shifted point stays in the half-space");
        let d2 = j_pushforward(&z, &w2, FD_STEP).expect("shifted point stays in the half-space");
        let tangent = rel(vertical_defect(&jz, &d1, &omega), max_entry(&d1));
        report.max_tangent_defect = report.max_tangent_defect.max(tangent);
        let g = fiber_metric(&jz, &d1, &d2, &omega);
        let h = siegel_metric(&z, &w1, &w2).expect("Y is positive definite");
        report.max_metric_error = report
            .max_metric_error
            .max(rel((g - 2.0 * h).abs(), h.abs()));
        let di =
            j_pushforward(&z, &(&w1 * i), FD_STEP).expect("shifted point stays in the half-space");
        let expect = &jz.matrix * &d1 * holomorphy_sign;
        report.max_holomorphy_error = report
            .max_holomorphy_error
            .max(rel(max_entry(&(di - &expect)), max_entry(&expect)));
    }
    report.square_ok = report.max_square_defect < TAU_ALG;
    report.tangent_ok = report.max_tangent_defect < TAU_GEO;
    report.metric_ok = report.max_metric_error < TAU_GEO;
    report.holomorphy_ok = report.max_holomorphy_error < TAU_GEO;
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: &RMatrix, b: &RMatrix, tol: f64) {
        let e = max_entry(&(a - b));
        assert!(e < tol, "matrices differ by {e}");
    }

    fn random_matrix(d: usize, rng: &mut ChaCha8Rng) -> RMatrix {
        RMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn split_of_symplectic_and_identity() {
        let w = standard_omega(2);
        let a = standard_j(2);
        let (c, s) = omega_split(&a, &w).unwrap();
        assert_close(&c, &a, 1e-14);
        assert_close(&s, &RMatrix::zeros(4, 4), 1e-14);
        let (c, s) = omega_split(&RMatrix::identity(4, 4), &w).unwrap();
        assert_close(&c, &RMatrix::zeros(4, 4), 1e-14);
        assert_close(&s, &RMatrix::identity(4, 4), 1e-14);
    }

    #[test]
    fn split_of_random_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = standard_omega(2);
        for _ in 0..20 {
            let a = random_matrix(4, &mut rng);
            let (c, s) = omega_split(&a, &w).unwrap();
            assert_close(&(&c + &s), &a, 1e-12);
            assert_close(&omega_adjoint(&c, &w).unwrap(), &(-&c), 1e-12);
            assert_close(&omega_adjoint(&s, &w).unwrap(), &s, 1e-12);
        }
    }

    #[test]
    fn degenerate_form_rejected() {
        assert_eq!(
            omega_adjoint(&RMatrix::identity(2, 2), &RMatrix::zeros(2, 2)),
            Err(FiberError::Degenerate)
        );
    }

    #[test]
    fn projection_fixes_tangent_and_kills_commuting() {
        let w = standard_omega(2);
        for j in sample_fiber(2, 5, 11) {
            for v in vertical_basis(&j, &w).elements {
                assert_close(
                    &tangent_projection(&j, &v.matrix, &w).unwrap(),
                    &v.matrix,
                    1e-10,
                );
            }
            assert_close(
                &tangent_projection(&j, &j.matrix, &w).unwrap(),
                &RMatrix::zeros(4, 4),
                1e-10,
            );
        }
    }

    #[test]
    fn projection_output_is_vertical() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = standard_omega(2);
        for j in sample_fiber(2, 10, 6) {
            let a = random_matrix(4, &mut rng);
            let p = tangent_projection(&j, &a, &w).unwrap();
            assert!(vertical_defect(&j, &p, &w) < 1e-10);
            let pp = tangent_projection(&j, &p, &w).unwrap();
            assert_close(&pp, &p, 1e-10);
        }
    }

    #[test]
    fn vertical_basis_is_orthonormal() {
        for n in [1usize, 2, 3] {
            let w = standard_omega(n);
            for j in sample_fiber(n, 6, 21) {
                let basis = vertical_basis(&j, &w);
                assert_eq!(basis.elements.len(), n * (n + 1));
                for a in &basis.elements {
                    assert!(vertical_defect(&j, &a.matrix, &w) < 1e-9);
                    for b in &basis.elements {
                        let g = fiber_metric(&j, &a.matrix, &b.matrix, &w);
                        let expect = if std::ptr::eq(a, b) { 1.0 } else { 0.0 };
                        assert!((g - expect).abs() < 1e-9, "gram entry {g}");
                    }
                }
            }
        }
    }

    #[test]
    fn adapted_basis_is_orthonormal_and_symplectic() {
        let w = standard_omega(2);
        for j in sample_fiber(2, 8, 2) {
            let e = adapted_basis(&j, &w);
            assert_close(&(e.transpose() * &w * &e), &w, 1e-10);
            let g = g_matrix(&w, &j.matrix);
            assert_close(&(e.transpose() * g * &e), &RMatrix::identity(4, 4), 1e-10);
        }
    }

    #[test]
    fn rotated_elements_are_j_compositions() {
        let w = standard_omega(2);
        let j = sample_fiber(2, 2, 8).pop().unwrap();
        let basis = vertical_basis(&j, &w);
        for pair in basis.elements.chunks(2) {
            assert_close(&pair[1].matrix, &(&j.matrix * &pair[0].matrix), 1e-10);
        }
    }

    #[test]
    fn v12_on_e1_is_half_of_e4() {
        let w = standard_omega(2);
        let j = CompatibleJ::standard(2);
        let basis = vertical_basis(&j, &w);
        let v12 = basis
            .elements
            .iter()
            .find(|e| e.i == 0 && e.j == 1 && !e.rotated)
            .unwrap();
        let img = &v12.matrix * nalgebra::DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(img.as_slice(), &[0.0, 0.0, 0.0, 0.5]);
        let gen = vertical_generator(&j, &w, 0, 1);
        let img = gen * nalgebra::DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(img.as_slice(), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn fiber_metric_basics() {
        let w = standard_omega(1);
        let j = CompatibleJ::standard(1);
        let b = vertical_basis(&j, &w);
        assert!(
            (fiber_metric(&j, &b.elements[0].matrix, &b.elements[0].matrix, &w) - 1.0).abs()
                < 1e-12
        );
        assert!(fiber_metric(&j, &b.elements[0].matrix, &b.elements[1].matrix, &w).abs() < 1e-12);
        assert_eq!(
            fiber_metric(&j, &RMatrix::zeros(2, 2), &b.elements[0].matrix, &w),
            0.0
        );
    }

    #[test]
    fn fiber_metric_is_j_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = standard_omega(2);
        for j in sample_fiber(2, 5, 10) {
            let a = tangent_projection(&j, &random_matrix(4, &mut rng), &w).unwrap();
            let b = tangent_projection(&j, &random_matrix(4, &mut rng), &w).unwrap();
            let lhs = fiber_metric(&j, &(&j.matrix * &a), &(&j.matrix * &b), &w);
            let rhs = fiber_metric(&j, &a, &b, &w);
            assert!((lhs - rhs).abs() < 1e-10);
            assert!((fiber_metric(&j, &a, &b, &w) - fiber_metric(&j, &b, &a, &w)).abs() < 1e-10);
            assert!(fiber_metric(&j, &a, &a, &w) > 0.0);
        }
    }

    #[test]
    fn principal_sqrt_cases() {
        assert_close(
            &principal_sqrt(&RMatrix::identity(3, 3)).unwrap(),
            &RMatrix::identity(3, 3),
            1e-14,
        );
        let d = RMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 9.0]));
        let r = principal_sqrt(&d).unwrap();
        assert_close(
            &r,
            &RMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 3.0])),
            1e-12,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let y = random_siegel_point(3, &mut rng).y;
            let r = principal_sqrt(&y).unwrap();
            assert_close(&(&r * &r), &y, 1e-10);
        }
        assert!(matches!(
            principal_sqrt(&(-RMatrix::identity(2, 2))),
            Err(FiberError::NotSpd { .. })
        ));
    }

    #[test]
    fn action_identity_and_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [1usize, 2] {
            for _ in 0..20 {
                let z = random_siegel_point(n, &mut rng);
                let same = sp_action(&RMatrix::identity(2 * n, 2 * n), &z).unwrap();
                assert_close(&same.x, &z.x, 1e-12);
                assert_close(&same.y, &z.y, 1e-12);
                let p1 = random_symplectic(n, &mut rng);
                let p2 = random_symplectic(n, &mut rng);
                let lhs = sp_action(&(&p1 * &p2), &z).unwrap();
                let rhs = sp_action(&p1, &sp_action(&p2, &z).unwrap()).unwrap();
                assert_close(&lhs.x, &rhs.x, 1e-9);
                assert_close(&lhs.y, &rhs.y, 1e-9);
            }
        }
    }

    #[test]
    fn action_rejects_non_symplectic() {
        let z = SiegelPoint::base(1);
        let psi = RMatrix::identity(2, 2) * 2.0;
        assert!(matches!(
            sp_action(&psi, &z),
            Err(FiberError::NotSymplectic { .. })
        ));
    }

    #[test]
    fn explicit_psi_maps_base_to_z() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in [1usize, 2] {
            for _ in 0..200 {
                let z = random_siegel_point(n, &mut rng);
                let psi = psi_for(&z).unwrap();
                let image = sp_action(&psi, &SiegelPoint::base(n)).unwrap();
                assert_close(&image.x, &z.x, 1e-9);
                assert_close(&image.y, &z.y, 1e-9);
            }
        }
    }

    #[test]
    fn j_of_base_is_standard() {
        for n in [1usize, 2, 3] {
            let out = j_of_z(&SiegelPoint::base(n)).unwrap();
            assert!(out.flipped);
            assert_eq!(out.j.matrix, standard_j(n));
        }
    }

    #[test]
    fn j_of_z_is_compatible() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let w = standard_omega(2);
        for _ in 0..50 {
            let z = random_siegel_point(2, &mut rng);
            let j = j_of_z(&z).unwrap().j;
            j.check(&w).unwrap();
        }
        let mut x = RMatrix::zeros(2, 2);
        x[(0, 0)] = 1.0;
        let z = SiegelPoint::new(x, RMatrix::identity(2, 2)).unwrap();
        let j = j_of_z(&z).unwrap().j;
        for _ in 0..100 {
            let v = nalgebra::DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
            let val = (v.transpose() * &w * &j.matrix * &v)[(0, 0)];
            assert!(val > 0.0);
        }
    }

    #[test]
    fn j_of_z_is_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for n in [1usize, 2] {
            for _ in 0..100 {
                let z = random_siegel_point(n, &mut rng);
                let psi = random_symplectic(n, &mut rng);
                let lhs = j_of_z(&sp_action(&psi, &z).unwrap()).unwrap().j.matrix;
                let rhs = &psi * j_of_z(&z).unwrap().j.matrix * psi.clone().try_inverse().unwrap();
                assert_close(&lhs, &rhs, 1e-8);
            }
        }
    }

    #[test]
    fn j_of_z_is_injective_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let pts: Vec<_> = (0..20).map(|_| random_siegel_point(2, &mut rng)).collect();
        for (a, za) in pts.iter().enumerate() {
            for zb in &pts[a + 1..] {
                let d = max_entry(&(j_of_z(za).unwrap().j.matrix - j_of_z(zb).unwrap().j.matrix));
                assert!(d > 1e-6);
            }
        }
    }

    #[test]
    fn siegel_metric_cases() {
        let z = SiegelPoint::base(2);
        let u = RMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, -1.0]);
        let uc = complexify(&u);
        assert!((siegel_metric(&z, &uc, &uc).unwrap() - (&u * &u).trace()).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..50 {
            let z = random_siegel_point(2, &mut rng);
            let w = random_tangent(2, &mut rng);
            assert!(siegel_metric(&z, &w, &w).unwrap() > 0.0);
        }
    }

    #[test]
    fn siegel_metric_is_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let z = random_siegel_point(2, &mut rng);
            let w = random_tangent(2, &mut rng);
            let psi = random_symplectic(2, &mut rng);
            let h = 1e-5;
            let plus = sp_action(&psi, &z.shifted(&w, h).unwrap())
                .unwrap()
                .to_complex();
            let minus = sp_action(&psi, &z.shifted(&w, -h).unwrap())
                .unwrap()
                .to_complex();
            let pushed = (plus - minus) / Complex64::new(2.0 * h, 0.0);
            let image = sp_action(&psi, &z).unwrap();
            let lhs = siegel_metric(&image, &pushed, &pushed).unwrap();
            let rhs = siegel_metric(&z, &w, &w).unwrap();
            assert!(rel((lhs - rhs).abs(), rhs) < 1e-6, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn zero_direction_has_zero_pushforward() {
        let z = random_siegel_point(2, &mut ChaCha8Rng::seed_from_u64(18));
        let d = j_pushforward(&z, &CMatrix::zeros(2, 2), FD_STEP).unwrap();
        assert_eq!(max_entry(&d), 0.0);
    }

    #[test]
    fn siegel_model_passes() {
        for n in [1usize, 2] {
            let report = verify_siegel_model(n, 100, 7);
            assert!(report.passes(), "{report:?}");
            assert_eq!(report.holomorphy_sign, -1.0);
        }
    }

    #[test]
    fn sample_fiber_properties() {
        assert_eq!(sample_fiber(2, 1, 99), vec![CompatibleJ::standard(2)]);
        let w = standard_omega(2);
        let js = sample_fiber(2, 50, 7);
        assert_eq!(js.len(), 50);
        for j in &js {
            j.check(&w).unwrap();
        }
        assert_eq!(js, sample_fiber(2, 50, 7));
        assert_ne!(sample_fiber(2, 2, 1)[1], sample_fiber(2, 2, 2)[1]);
    }
}
