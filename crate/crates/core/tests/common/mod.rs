#![allow(dead_code)]

use jetmech::dynamics::FundamentalOneForm;
use jetmech::jet::{Jet1Point, ParameterGrid, SampledSection, Variation};
use nalgebra::{DMatrix, DVector};
use rand::{rngs::StdRng, Rng};

/// A random nonlinear, non-exact 1-form with a random section and a split variation.
pub struct Instance {
    pub phi: FundamentalOneForm<f64>,
    pub section: SampledSection<f64>,
    pub da: Vec<DVector<f64>>,
    pub dxbar: Vec<DVector<f64>>,
}

impl Instance {
    pub fn variation(&self) -> Variation<f64> {
        Variation::split(&self.section, self.da.clone(), self.dxbar.clone()).unwrap()
    }
}

fn coeffs(rng: &mut StdRng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn random_form(rng: &mut StdRng, m: usize, p: usize) -> FundamentalOneForm<f64> {
    let (fa, fb) = (coeffs(rng, m, 1), coeffs(rng, m, 1));
    let (pa, pb, pc) = (coeffs(rng, m, p), coeffs(rng, m, p), coeffs(rng, m, p));
    FundamentalOneForm::new(
        move |j: &Jet1Point<f64>| DVector::from_fn(j.m(), |mu, _| fa[mu] * j.x[mu].sin() + fb[mu] * j.a[0]),
        move |j: &Jet1Point<f64>| {
            DMatrix::from_fn(j.m(), j.p(), |mu, i| {
                let v = j.xdot[(mu, i)];
                pa[(mu, i)] * v + pb[(mu, i)] * v * v * v + pc[(mu, i)] * j.x[mu] * j.a[i]
            })
        },
    )
}

/// `x^μ(a) = c^μ + b^μ·a + d^μ sin(k^μ·a)`, with its exact Jacobian as contact coordinates.
pub fn random_section(rng: &mut StdRng, m: usize, p: usize) -> SampledSection<f64> {
    let lower: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..0.0)).collect();
    let upper: Vec<f64> = lower.iter().map(|l| l + rng.gen_range(0.5..1.5)).collect();
    let samples: Vec<usize> = (0..p).map(|_| rng.gen_range(4..8)).collect();
    let grid = ParameterGrid::new(lower, upper, samples).unwrap();
    let (c, b, d, k) = (coeffs(rng, m, 1), coeffs(rng, m, p), coeffs(rng, m, 1), coeffs(rng, m, p));
    let (b2, d2, k2) = (b.clone(), d.clone(), k.clone());
    SampledSection::from_fn(
        grid,
        move |a| DVector::from_fn(m, |mu, _| c[mu] + (b.row(mu) * a)[0] + d[mu] * (k.row(mu) * a)[0].sin()),
        move |a| {
            DMatrix::from_fn(m, a.len(), |mu, i| b2[(mu, i)] + d2[mu] * (k2.row(mu) * a)[0].cos() * k2[(mu, i)])
        },
    )
    .unwrap()
}

pub fn random_instance(rng: &mut StdRng, m: usize, p: usize) -> Instance {
    let phi = random_form(rng, m, p);
    let section = random_section(rng, m, p);
    let (ca, ba) = (coeffs(rng, p, 1), coeffs(rng, p, p));
    let (cx, bx) = (coeffs(rng, m, 1), coeffs(rng, m, p));
    let grid = section.grid().clone();
    let da = grid.sample(|a| DVector::from_fn(p, |i, _| ca[i] + (ba.row(i) * a)[0].cos()));
    let dxbar = grid.sample(|a| DVector::from_fn(m, |mu, _| cx[mu] * (bx.row(mu) * a)[0].exp()));
    Instance { phi, section, da, dxbar }
}

/// `x(t)` and `ẋ(t)` of a curve, sampled on `[t0, t1]`.
pub fn curve(
    t0: f64,
    t1: f64,
    n: usize,
    x: impl Fn(f64) -> Vec<f64>,
    v: impl Fn(f64) -> Vec<f64>,
) -> SampledSection<f64> {
    let grid = ParameterGrid::interval(t0, t1, n).unwrap();
    SampledSection::from_fn(
        grid,
        |a| DVector::from_vec(x(a[0])),
        |a| {
            let v = v(a[0]);
            DMatrix::from_vec(v.len(), 1, v)
        },
    )
    .unwrap()
}

pub fn time_translation(s: &SampledSection<f64>) -> Variation<f64> {
    let n = s.node_count();
    Variation::split(s, vec![DVector::from_element(1, 1.0); n], vec![DVector::zeros(s.m()); n]).unwrap()
}

/// Unit mass in a potential `½ k |x|²`: `F = −kx`, `Π = ẋ`, with kinetic energy and
/// Lagrangian attached.
pub fn oscillator(k: f64) -> FundamentalOneForm<f64> {
    FundamentalOneForm::new(move |j: &Jet1Point<f64>| &j.x * -k, |j: &Jet1Point<f64>| j.xdot.clone())
        .with_kinetic(|j| 0.5 * j.xdot.norm_squared())
        .with_lagrangian(move |j| 0.5 * j.xdot.norm_squared() - 0.5 * k * j.x.norm_squared())
}
