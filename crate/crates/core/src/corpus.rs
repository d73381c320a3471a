//! Built-in example models and connection tables, with the parameter `s`
//! substituted by an exact rational.
//!
//! Raw tables are transcribed as printed, including symbols from the
//! algebra basis where frame vectors are meant; [`example3a`] and
//! [`example3b`] resolve and repair them and return the ledger.

use std::collections::BTreeMap;

use crate::connection::{
    repair_connection, resolve_table, ConnectionError, ConnectionTable, DeformationTensor, Ledger,
    RawEntry, TableFrame,
};
use crate::lie_contact::{build_model_with_frame, ContactForm, ContactModel, LieAlgebra, LieError};
use crate::rational::Rational;

fn q(n: i128, d: i128) -> Rational {
    Rational::new(n, d)
}

fn names(prefix: &str, range: std::ops::RangeInclusive<usize>) -> Vec<String> {
    range.map(|i| format!("{prefix}{i}")).collect()
}

fn vector(basis: &[String], terms: &[(&str, Rational)]) -> Vec<Rational> {
    let mut v = vec![Rational::ZERO; basis.len()];
    for (name, c) in terms {
        let i = basis
            .iter()
            .position(|b| b == name)
            .expect("corpus basis name");
        v[i] += *c;
    }
    v
}

fn brackets(
    basis: &[String],
    list: &[(&str, &str, &[(&str, Rational)])],
) -> Vec<(usize, usize, Vec<Rational>)> {
    list.iter()
        .map(|(x, y, r)| {
            let ix = basis
                .iter()
                .position(|b| b == x)
                .expect("corpus basis name");
            let iy = basis
                .iter()
                .position(|b| b == y)
                .expect("corpus basis name");
            (ix, iy, vector(basis, r))
        })
        .collect()
}

fn entry(x: &str, y: &str, terms: &[(&str, Rational)]) -> RawEntry {
    RawEntry {
        x: x.into(),
        y: y.into(),
        result: terms.iter().map(|(n, c)| (n.to_string(), *c)).collect(),
    }
}

fn params_s(s: Rational) -> BTreeMap<String, Rational> {
    BTreeMap::from([("s".to_string(), s)])
}

/// `SO(3)` with `[E1,E2]=E3, [E2,E3]=E1, [E3,E1]=E2`, `α = −E3*`, frame
/// `(E1, E2, ξ = −E3)`.
pub fn example1_model() -> ContactModel {
    let basis = names("E", 1..=3);
    let alg = LieAlgebra::new(
        basis.clone(),
        &brackets(
            &basis,
            &[
                ("E1", "E2", &[("E3", q(1, 1))]),
                ("E2", "E3", &[("E1", q(1, 1))]),
                ("E3", "E1", &[("E2", q(1, 1))]),
            ],
        ),
    )
    .expect("example 1 brackets are consistent");
    let alpha = ContactForm::new(vector(&basis, &[("E3", q(-1, 1))]));
    let frame = (
        vec!["E1".into(), "E2".into(), "xi".into()],
        vec![
            vector(&basis, &[("E1", q(1, 1))]),
            vector(&basis, &[("E2", q(1, 1))]),
            vector(&basis, &[("E3", q(-1, 1))]),
        ],
    );
    build_model_with_frame(alg, alpha, BTreeMap::new(), Some(frame))
        .expect("example 1 is a contact model")
        .with_name("example1")
}

/// The eight coefficients of the first example's connection family.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Example1Params {
    pub a1: Rational,
    pub b1: Rational,
    pub c1: Rational,
    pub d1: Rational,
    pub a2: Rational,
    pub b2: Rational,
    pub c2: Rational,
    pub d2: Rational,
}

impl Example1Params {
    /// The family member with free parameters `b1, c2, d1, d2`, the others
    /// fixed by `a1 = −d1, a2 = −d2, c1 = a2, b2 = d1`.
    pub fn valid(b1: Rational, c2: Rational, d1: Rational, d2: Rational) -> Self {
        Example1Params {
            a1: -d1,
            b1,
            c1: -d2,
            d1,
            a2: -d2,
            b2: d1,
            c2,
            d2,
        }
    }

    pub fn as_map(&self) -> BTreeMap<String, Rational> {
        BTreeMap::from([
            ("a1".to_string(), self.a1),
            ("b1".to_string(), self.b1),
            ("c1".to_string(), self.c1),
            ("d1".to_string(), self.d1),
            ("a2".to_string(), self.a2),
            ("b2".to_string(), self.b2),
            ("c2".to_string(), self.c2),
            ("d2".to_string(), self.d2),
        ])
    }

    pub fn from_map(map: &BTreeMap<String, Rational>) -> Self {
        let g = |k: &str| map.get(k).copied().unwrap_or(Rational::ZERO);
        Example1Params {
            a1: g("a1"),
            b1: g("b1"),
            c1: g("c1"),
            d1: g("d1"),
            a2: g("a2"),
            b2: g("b2"),
            c2: g("c2"),
            d2: g("d2"),
        }
    }
}

/// `∇_{E_i}E_1 = a_iE1 + b_iE2`, `∇_{E_i}E_2 = c_iE1 + d_iE2`,
/// `∇_ξ E_i = [ξ, E_i]`, `∇ξ = 0`.
pub fn example1_entries(p: &Example1Params) -> Vec<RawEntry> {
    vec![
        entry("E1", "E1", &[("E1", p.a1), ("E2", p.b1)]),
        entry("E1", "E2", &[("E1", p.c1), ("E2", p.d1)]),
        entry("E2", "E1", &[("E1", p.a2), ("E2", p.b2)]),
        entry("E2", "E2", &[("E1", p.c2), ("E2", p.d2)]),
        entry("xi", "E1", &[("E2", q(-1, 1))]),
        entry("xi", "E2", &[("E1", q(1, 1))]),
    ]
}

pub fn example1_table(model: &ContactModel, p: &Example1Params) -> ConnectionTable {
    resolve_table(model, TableFrame::Adapted, &example1_entries(p))
        .expect("example 1 table uses frame names")
        .0
}

/// Five-dimensional algebra with `[E2,E3]=E1, [E2,E5]=E2, [E3,E5]=−E3,
/// [E4,E5]=E1`, `α = sE1* + E4*`, frame `A1=E2, A2=E3, A3=E4−E1/s, A4=E5,
/// A5=ξ=E1/s`.
pub fn example2_model(s: Rational) -> Result<ContactModel, LieError> {
    if s.is_zero() {
        return Err(LieError::BadParameter {
            name: "s".into(),
            reason: "must be nonzero".into(),
        });
    }
    let basis = names("E", 1..=5);
    let alg = LieAlgebra::new(
        basis.clone(),
        &brackets(
            &basis,
            &[
                ("E2", "E3", &[("E1", q(1, 1))]),
                ("E2", "E5", &[("E2", q(1, 1))]),
                ("E3", "E5", &[("E3", q(-1, 1))]),
                ("E4", "E5", &[("E1", q(1, 1))]),
            ],
        ),
    )
    .expect("example 2 brackets are consistent");
    let alpha = ContactForm::new(vector(&basis, &[("E1", s), ("E4", q(1, 1))]));
    let inv = Rational::ONE / s;
    let frame = (
        names("A", 1..=5),
        vec![
            vector(&basis, &[("E2", q(1, 1))]),
            vector(&basis, &[("E3", q(1, 1))]),
            vector(&basis, &[("E4", q(1, 1)), ("E1", -inv)]),
            vector(&basis, &[("E5", q(1, 1))]),
            vector(&basis, &[("E1", inv)]),
        ],
    );
    Ok(build_model_with_frame(alg, alpha, params_s(s), Some(frame))?.with_name("example2"))
}

/// The corrected connection `∇̃` as printed, with `E1`, `E2` in the last row.
pub fn example2_tilde_entries() -> Vec<RawEntry> {
    vec![
        entry("A1", "A2", &[("A3", q(1, 3))]),
        entry("A1", "A4", &[("A1", q(1, 3))]),
        entry("A2", "A1", &[("A3", q(1, 3))]),
        entry("A2", "A4", &[("A2", q(-1, 3))]),
        entry("A4", "E1", &[("A1", q(-2, 3))]),
        entry("A4", "E2", &[("A2", q(2, 3))]),
    ]
}

/// `S(A1,A2) = −⅓A3`, `S(A1,A4) = −⅓A1`, `S(A2,A4) = ⅓A2`, symmetric.
pub fn example2_deformation_entries() -> Vec<RawEntry> {
    vec![
        entry("A1", "A2", &[("A3", q(-1, 3))]),
        entry("A2", "A1", &[("A3", q(-1, 3))]),
        entry("A1", "A4", &[("A1", q(-1, 3))]),
        entry("A4", "A1", &[("A1", q(-1, 3))]),
        entry("A2", "A4", &[("A2", q(1, 3))]),
        entry("A4", "A2", &[("A2", q(1, 3))]),
    ]
}

pub fn example2_deformation() -> DeformationTensor {
    let mut s = DeformationTensor::zeros(4);
    for e in example2_deformation_entries() {
        let idx = |n: &str| n[1..].parse::<usize>().expect("frame name") - 1;
        for (name, c) in &e.result {
            s.s3.set(idx(&e.x), idx(&e.y), idx(name), *c);
        }
    }
    s
}

/// `∇_{A4}A1 = −A1`, `∇_{A4}A2 = A2`, all other entries zero.
pub fn example2_flat_entries() -> Vec<RawEntry> {
    vec![
        entry("A4", "A1", &[("A1", q(-1, 1))]),
        entry("A4", "A2", &[("A2", q(1, 1))]),
    ]
}

pub fn example2_flat_table(model: &ContactModel) -> ConnectionTable {
    resolve_table(model, TableFrame::Adapted, &example2_flat_entries())
        .expect("flat table uses frame names")
        .0
}

/// Five-dimensional algebra on `E0, …, E4` with `[E0,E1]=−E1, [E0,E2]=E2,
/// [E1,E2]=E3, [E1,E4]=−E1, [E3,E4]=−E3`, `α = E3* + sE0*`, frame
/// `A1=E1, A2=E2, A3=E4, A4=sE3−E0, A5=ξ=E0/s`.
pub fn example3_model(s: Rational) -> Result<ContactModel, LieError> {
    if s.is_zero() {
        return Err(LieError::BadParameter {
            name: "s".into(),
            reason: "must be nonzero".into(),
        });
    }
    let basis = names("E", 0..=4);
    let alg = LieAlgebra::new(
        basis.clone(),
        &brackets(
            &basis,
            &[
                ("E0", "E1", &[("E1", q(-1, 1))]),
                ("E0", "E2", &[("E2", q(1, 1))]),
                ("E1", "E2", &[("E3", q(1, 1))]),
                ("E1", "E4", &[("E1", q(-1, 1))]),
                ("E3", "E4", &[("E3", q(-1, 1))]),
            ],
        ),
    )
    .expect("example 3 brackets are consistent");
    let alpha = ContactForm::new(vector(&basis, &[("E3", q(1, 1)), ("E0", s)]));
    let frame = (
        names("A", 1..=5),
        vec![
            vector(&basis, &[("E1", q(1, 1))]),
            vector(&basis, &[("E2", q(1, 1))]),
            vector(&basis, &[("E4", q(1, 1))]),
            vector(&basis, &[("E3", s), ("E0", q(-1, 1))]),
            vector(&basis, &[("E0", Rational::ONE / s)]),
        ],
    );
    Ok(build_model_with_frame(alg, alpha, params_s(s), Some(frame))?.with_name("example3"))
}

fn model_s(model: &ContactModel) -> Rational {
    model.parameters.get("s").copied().unwrap_or(Rational::ONE)
}

/// Connection A as printed.
pub fn example3a_entries(s: Rational) -> Vec<RawEntry> {
    let h = Rational::ONE / (q(2, 1) * s);
    let inv = Rational::ONE / s;
    vec![
        entry("A1", "A2", &[("A4", h)]),
        entry("A1", "A3", &[("A1", q(-1, 2))]),
        entry("A2", "A1", &[("A4", -h)]),
        entry("A2", "A3", &[("A2", q(-1, 2))]),
        entry("A3", "A1", &[("A1", h)]),
        entry("A3", "A2", &[("A2", q(-1, 2))]),
        entry("A3", "A4", &[("A3", q(-2, 1))]),
        entry("A4", "A1", &[("A1", q(1, 1))]),
        entry("A4", "A2", &[("A2", q(-1, 1))]),
        entry("A4", "A3", &[("A3", q(-2, 1)), ("A4", q(-1, 1))]),
        entry("A4", "A4", &[("A3", q(8, 1)), ("A4", q(2, 1))]),
        entry("A5", "A1", &[("A1", -inv)]),
        entry("A5", "A2", &[("A2", inv)]),
    ]
}

/// Connection B as printed, including the `E4` and `E1` symbols.
pub fn example3b_entries(s: Rational) -> Vec<RawEntry> {
    let third = Rational::ONE / (q(3, 1) * s);
    let inv = Rational::ONE / s;
    vec![
        entry("A1", "A2", &[("A3", -third), ("E4", q(2, 1) * third)]),
        entry("A1", "A3", &[("A1", q(-2, 3))]),
        entry("A1", "A4", &[("E1", q(-1, 3))]),
        entry("A2", "A1", &[("A3", -third), ("A4", -third)]),
        entry("A2", "A3", &[("A2", q(-1, 2))]),
        entry("A2", "A4", &[("A2", q(1, 3))]),
        entry("A3", "A1", &[("A1", q(1, 3))]),
        entry("A3", "A2", &[("A2", q(-1, 3))]),
        entry("A3", "A3", &[("A3", q(-1, 3))]),
        entry("A3", "A4", &[("A3", q(1, 3))]),
        entry("A4", "A1", &[("A1", q(2, 3))]),
        entry("A4", "A2", &[("A2", q(-2, 3))]),
        entry("A4", "A3", &[("A4", q(-2, 3))]),
        entry("A5", "A1", &[("A1", -inv)]),
        entry("A5", "A2", &[("A2", inv)]),
    ]
}

pub fn example3a_raw(model: &ContactModel) -> Result<ConnectionTable, ConnectionError> {
    Ok(resolve_table(
        model,
        TableFrame::Adapted,
        &example3a_entries(model_s(model)),
    )?
    .0)
}

fn resolve_and_repair(
    model: &ContactModel,
    entries: &[RawEntry],
) -> Result<(ConnectionTable, Ledger), ConnectionError> {
    let (raw, mut ledger) = resolve_table(model, TableFrame::Adapted, entries)?;
    let (fixed, repairs) = repair_connection(model, &raw);
    ledger.extend(repairs);
    Ok((fixed, ledger))
}

/// Connection A, resolved and repaired, with its ledger.
pub fn example3a(model: &ContactModel) -> Result<(ConnectionTable, Ledger), ConnectionError> {
    resolve_and_repair(model, &example3a_entries(model_s(model)))
}

/// Connection B, resolved and repaired, with its ledger.
pub fn example3b(model: &ContactModel) -> Result<(ConnectionTable, Ledger), ConnectionError> {
    resolve_and_repair(model, &example3b_entries(model_s(model)))
}

/// Heisenberg algebra `[E1,E2] = E3` with `α = E3*`, a minimal `n = 1`
/// contact model.
pub fn heisenberg_model() -> ContactModel {
    let basis = names("E", 1..=3);
    let alg = LieAlgebra::new(
        basis.clone(),
        &brackets(&basis, &[("E1", "E2", &[("E3", q(1, 1))])]),
    )
    .expect("heisenberg brackets are consistent");
    let alpha = ContactForm::new(vector(&basis, &[("E3", q(1, 1))]));
    crate::lie_contact::build_model(alg, alpha, BTreeMap::new())
        .expect("heisenberg is contact")
        .with_name("heisenberg")
}
