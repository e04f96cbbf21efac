#![allow(dead_code)]

use num_complex::Complex64 as C64;
use opspace_core::funcspace::catalog;
use opspace_core::matcore::CMat;
use opspace_core::{ConcreteOpSpace, Element};
use proptest::prelude::*;

pub fn m2() -> ConcreteOpSpace {
    catalog("m2-full", 1).unwrap().to_opspace().unwrap()
}

pub fn space(name: &str, samples: usize) -> ConcreteOpSpace {
    catalog(name, samples).unwrap().to_opspace().unwrap()
}

/// Coefficients of a 2×2 matrix in the basis `I, E12, E21, E22`.
pub fn m2_coeffs(m: &CMat) -> Element {
    Element(vec![m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)] - m[(0, 0)]])
}

pub fn complex() -> impl Strategy<Value = C64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| C64::new(a, b))
}

pub fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = CMat> {
    prop::collection::vec(complex(), rows * cols).prop_map(move |v| CMat::from_fn(rows, cols, |i, j| v[i * cols + j]))
}

pub fn element(dim: usize) -> impl Strategy<Value = Element> {
    prop::collection::vec(complex(), dim).prop_map(Element)
}

/// A nonzero element scaled to norm `r` in `space`.
pub fn scaled(space: &ConcreteOpSpace, e: &Element, r: f64) -> Option<Element> {
    let n = space.norm(e);
    (n > 1e-3).then(|| e.scale_real(r / n))
}
