#![allow(dead_code)]

use ctwist::connection::{
    deform, half_bracket_connection, omega_inverse_transpose, resolve_table, symmetric_triples,
    vezzoni_correction, ConnectionTable, DeformationTensor, TableFrame,
};
use ctwist::corpus;
use ctwist::lie_contact::ContactModel;
use ctwist::linalg::QMatrix;
use ctwist::rational::Rational;
use rand::Rng;

pub fn q(n: i128, d: i128) -> Rational {
    Rational::new(n, d)
}

pub fn random_rational<R: Rng>(rng: &mut R, max_num: i128, max_den: i128) -> Rational {
    q(
        rng.gen_range(-max_num..=max_num),
        rng.gen_range(1..=max_den),
    )
}

/// Example 2 with the corrected connection `∇̃` read from its printed table.
pub fn example2_tilde(s: Rational) -> (ContactModel, ConnectionTable) {
    let m = corpus::example2_model(s).unwrap();
    let g = resolve_table(&m, TableFrame::Adapted, &corpus::example2_tilde_entries())
        .unwrap()
        .0;
    (m, g)
}

/// Half-bracket connection corrected to be ω-parallel.
pub fn default_base(model: &ContactModel) -> ConnectionTable {
    vezzoni_correction(model, &half_bracket_connection(model)).unwrap()
}

pub fn example1_random<R: Rng>(rng: &mut R) -> (ContactModel, ConnectionTable) {
    let m = corpus::example1_model();
    let p = corpus::Example1Params::valid(
        random_rational(rng, 5, 4),
        random_rational(rng, 5, 4),
        random_rational(rng, 5, 4),
        random_rational(rng, 5, 4),
    );
    let g = corpus::example1_table(&m, &p);
    (m, g)
}

pub fn random_deformation<R: Rng>(rng: &mut R, model: &ContactModel) -> DeformationTensor {
    let d = model.omega.rows();
    let coeffs: Vec<Rational> = symmetric_triples(d)
        .iter()
        .map(|_| {
            if rng.gen_bool(0.5) {
                random_rational(rng, 3, 3)
            } else {
                Rational::ZERO
            }
        })
        .collect();
    DeformationTensor::from_symmetric_coefficients(
        &coeffs,
        &omega_inverse_transpose(model).unwrap(),
    )
}

pub fn randomly_deformed<R: Rng>(
    rng: &mut R,
    model: &ContactModel,
    base: &ConnectionTable,
) -> ConnectionTable {
    deform(&model.omega, base, &random_deformation(rng, model)).unwrap()
}

/// A random contact connection on one of the three example models, chosen
/// by `which % 3`.
pub fn random_contact_connection<R: Rng>(
    rng: &mut R,
    which: usize,
) -> (ContactModel, ConnectionTable) {
    match which % 3 {
        0 => example1_random(rng),
        1 => {
            let (m, g) = example2_tilde(q(rng.gen_range(1..=3), rng.gen_range(1..=2)));
            let g = randomly_deformed(rng, &m, &g);
            (m, g)
        }
        _ => {
            let m = corpus::example3_model(q(rng.gen_range(1..=3), rng.gen_range(1..=2))).unwrap();
            let base = default_base(&m);
            let g = randomly_deformed(rng, &m, &base);
            (m, g)
        }
    }
}

/// A random rational symplectic matrix for `ω(e_i, e_{i+n}) = 1`, as a
/// product of symmetric shears.
pub fn random_symplectic_rational<R: Rng>(rng: &mut R, n: usize) -> QMatrix {
    let mut shear = |upper: bool| {
        let mut m = QMatrix::identity(2 * n);
        for i in 0..n {
            for j in i..n {
                let v = random_rational(rng, 2, 2);
                let (r, c) = if upper { (i, j + n) } else { (i + n, j) };
                m[(r, c)] = v;
                let (r, c) = if upper { (j, i + n) } else { (j + n, i) };
                m[(r, c)] = v;
            }
        }
        m
    };
    let a = shear(true);
    let b = shear(false);
    a.mul(&b)
}
