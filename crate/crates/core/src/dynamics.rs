//! The dynamical state `φ = F_μ dx^μ + Π^i_μ dx^μ_i`, the Euler operator, virtual work
//! and the exactness diagnostics for `φ = dℒ` and `Π = dT`.
//!
//! Matrices follow the layout of [`Jet1Point::xdot`]: `Π` is m×p with `Π[(μ, i)] = Π^i_μ`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::jet::{Jet1Point, JetCoord, SampledSection, Variation};
use crate::numeric::{grid_partial, max_abs, trapezoid, FieldValue};
use crate::{Error, Real, Result};

pub type VectorLaw<T> = Arc<dyn Fn(&Jet1Point<T>) -> DVector<T> + Send + Sync>;
pub type MatrixLaw<T> = Arc<dyn Fn(&Jet1Point<T>) -> DMatrix<T> + Send + Sync>;
pub type ScalarLaw<T> = Arc<dyn Fn(&Jet1Point<T>) -> T + Send + Sync>;

/// Force and momentum evaluators, plus optional claimed potentials: a Lagrangian
/// (`φ = dℒ`) and a kinetic energy (`Π = dT`). The claims are checked, never assumed.
#[derive(Clone)]
pub struct FundamentalOneForm<T: Real> {
    force: VectorLaw<T>,
    momentum: MatrixLaw<T>,
    lagrangian: Option<ScalarLaw<T>>,
    kinetic: Option<ScalarLaw<T>>,
}

impl<T: Real> fmt::Debug for FundamentalOneForm<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FundamentalOneForm")
            .field("lagrangian", &self.lagrangian.is_some())
            .field("kinetic", &self.kinetic.is_some())
            .finish_non_exhaustive()
    }
}

impl<T: Real> FundamentalOneForm<T> {
    pub fn new(
        force: impl Fn(&Jet1Point<T>) -> DVector<T> + Send + Sync + 'static,
        momentum: impl Fn(&Jet1Point<T>) -> DMatrix<T> + Send + Sync + 'static,
    ) -> Self {
        Self { force: Arc::new(force), momentum: Arc::new(momentum), lagrangian: None, kinetic: None }
    }

    pub fn with_lagrangian(mut self, l: impl Fn(&Jet1Point<T>) -> T + Send + Sync + 'static) -> Self {
        self.lagrangian = Some(Arc::new(l));
        self
    }

    pub fn with_kinetic(mut self, t: impl Fn(&Jet1Point<T>) -> T + Send + Sync + 'static) -> Self {
        self.kinetic = Some(Arc::new(t));
        self
    }

    pub fn has_lagrangian(&self) -> bool {
        self.lagrangian.is_some()
    }

    pub fn has_kinetic(&self) -> bool {
        self.kinetic.is_some()
    }

    /// `φ₁ + φ₂`. A potential survives only if both summands carry one.
    pub fn sum(&self, other: &Self) -> Self {
        let (f1, f2) = (self.force.clone(), other.force.clone());
        let (p1, p2) = (self.momentum.clone(), other.momentum.clone());
        let add = |a: &Option<ScalarLaw<T>>, b: &Option<ScalarLaw<T>>| -> Option<ScalarLaw<T>> {
            match (a.clone(), b.clone()) {
                (Some(a), Some(b)) => Some(Arc::new(move |j: &Jet1Point<T>| a(j) + b(j))),
                _ => None,
            }
        };
        Self {
            force: Arc::new(move |j| f1(j) + f2(j)),
            momentum: Arc::new(move |j| p1(j) + p2(j)),
            lagrangian: add(&self.lagrangian, &other.lagrangian),
            kinetic: add(&self.kinetic, &other.kinetic),
        }
    }

    pub fn force(&self, j: &Jet1Point<T>) -> Result<DVector<T>> {
        self.force_at(j, None)
    }

    pub fn momentum(&self, j: &Jet1Point<T>) -> Result<DMatrix<T>> {
        self.momentum_at(j, None)
    }

    pub fn lagrangian(&self, j: &Jet1Point<T>) -> Result<T> {
        let l = self
            .lagrangian
            .as_ref()
            .ok_or_else(|| Error::Contract("fundamental 1-form carries no Lagrangian".into()))?;
        scalar_checked("lagrangian", l(j), j, None)
    }

    pub fn kinetic(&self, j: &Jet1Point<T>) -> Result<T> {
        let t = self
            .kinetic
            .as_ref()
            .ok_or_else(|| Error::Contract("fundamental 1-form carries no kinetic energy".into()))?;
        scalar_checked("kinetic", t(j), j, None)
    }

    pub(crate) fn force_at(&self, j: &Jet1Point<T>, node: Option<usize>) -> Result<DVector<T>> {
        let f = (self.force)(j);
        if f.len() != j.m() {
            return Err(eval_error("force", j, node, format!("returned length {}, expected {}", f.len(), j.m())));
        }
        if !f.iter().all(|v| v.is_finite()) {
            return Err(eval_error("force", j, node, "non-finite value".into()));
        }
        Ok(f)
    }

    pub(crate) fn momentum_at(&self, j: &Jet1Point<T>, node: Option<usize>) -> Result<DMatrix<T>> {
        let pi = (self.momentum)(j);
        if pi.shape() != j.xdot.shape() {
            return Err(eval_error(
                "momentum",
                j,
                node,
                format!("returned {}x{}, expected {}x{}", pi.nrows(), pi.ncols(), j.m(), j.p()),
            ));
        }
        if !pi.iter().all(|v| v.is_finite()) {
            return Err(eval_error("momentum", j, node, "non-finite value".into()));
        }
        Ok(pi)
    }

    pub(crate) fn lagrangian_at(&self, j: &Jet1Point<T>, node: Option<usize>) -> Result<T> {
        self.lagrangian(j).map_err(|e| relocate(e, node))
    }

    pub(crate) fn kinetic_at(&self, j: &Jet1Point<T>, node: Option<usize>) -> Result<T> {
        self.kinetic(j).map_err(|e| relocate(e, node))
    }

    /// `a ↦ F(s(a))`.
    pub fn force_field(&self, s: &SampledSection<T>) -> Result<Vec<DVector<T>>> {
        (0..s.node_count()).map(|n| self.force_at(&s.point(n), Some(n))).collect()
    }

    /// `a ↦ Π(s(a))`.
    pub fn momentum_field(&self, s: &SampledSection<T>) -> Result<Vec<DMatrix<T>>> {
        (0..s.node_count()).map(|n| self.momentum_at(&s.point(n), Some(n))).collect()
    }
}

fn eval_error<T: Real>(what: &'static str, j: &Jet1Point<T>, node: Option<usize>, reason: String) -> Error {
    Error::Evaluation { what, node, location: j.a.iter().map(|v| v.as_f64()).collect(), reason }
}

fn scalar_checked<T: Real>(what: &'static str, v: T, j: &Jet1Point<T>, node: Option<usize>) -> Result<T> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(eval_error(what, j, node, "non-finite value".into()))
    }
}

fn relocate(e: Error, at: Option<usize>) -> Error {
    match e {
        Error::Evaluation { what, location, reason, .. } => Error::Evaluation { what, node: at, location, reason },
        other => other,
    }
}

/// Default central-difference step for evaluator derivatives at coordinate value `x`.
pub fn fd_step<T: Real>(x: T) -> T {
    T::machine_epsilon().cbrt() * T::one().max(x.abs())
}

/// Central difference of `f` along one jet coordinate.
pub(crate) fn jet_derivative<T: Real, V: FieldValue<T>>(
    f: impl Fn(&Jet1Point<T>) -> Result<V>,
    j: &Jet1Point<T>,
    c: JetCoord,
    step: Option<T>,
) -> Result<V> {
    let h = step.unwrap_or_else(|| fd_step(j.get(c)));
    let plus = f(&j.shifted(c, h))?;
    let minus = f(&j.shifted(c, -h))?;
    Ok((plus - minus) * (T::two() * h).recip())
}

/// Column `i` of every matrix in a field, as vectors.
pub(crate) fn column_field<T: Real>(field: &[DMatrix<T>], i: usize) -> Vec<DVector<T>> {
    field.iter().map(|m| m.column(i).into_owned()).collect()
}

/// `Σ_i ∂Π^i/∂a^i` for a grid field of m×p matrices.
pub(crate) fn momentum_divergence<T: Real>(
    pi: &[DMatrix<T>],
    s: &SampledSection<T>,
) -> Result<Vec<DVector<T>>> {
    let mut div = vec![DVector::zeros(s.m()); s.node_count()];
    for i in 0..s.p() {
        let d = grid_partial(&column_field(pi, i), i, s.grid())?;
        for (acc, di) in div.iter_mut().zip(d) {
            *acc += di;
        }
    }
    Ok(div)
}

/// Euler operator `(D*φ)_μ = F_μ − ∂Π^i_μ/∂a^i`, the divergence taken on the
/// pulled-back momentum field.
pub fn dstar<T: Real>(phi: &FundamentalOneForm<T>, s: &SampledSection<T>) -> Result<Vec<DVector<T>>> {
    let force = phi.force_field(s)?;
    let div = momentum_divergence(&phi.momentum_field(s)?, s)?;
    Ok(force.into_iter().zip(div).map(|(f, d)| f - d).collect())
}

/// `(s*φ)_i = F_μ x^μ_{,i} + Π^j_μ ∂x^μ_j/∂a^i`, both derivatives by grid differencing.
pub fn pulled_back_form<T: Real>(
    phi: &FundamentalOneForm<T>,
    s: &SampledSection<T>,
) -> Result<Vec<DVector<T>>> {
    let force = phi.force_field(s)?;
    let pi = phi.momentum_field(s)?;
    let xgrad = s.x_gradient()?;
    let xdot_grad = s.xdot_gradient()?;
    Ok((0..s.node_count())
        .map(|n| {
            DVector::from_fn(s.p(), |i, _| force[n].dot(&xgrad[n].column(i)) + pi[n].dot(&xdot_grad[i][n]))
        })
        .collect())
}

/// Trapezoidal quadrature of `F·δx + Π:δẋ − (s*φ)_i δa^i` over the grid.
pub fn virtual_work<T: Real>(
    phi: &FundamentalOneForm<T>,
    s: &SampledSection<T>,
    v: &Variation<T>,
) -> Result<T> {
    let dxdot = match (&v.dxdot_field, v.is_prolonged()) {
        (Some(d), true) => d,
        _ => return Err(Error::Contract("virtual work needs a prolonged variation".into())),
    };
    if v.node_count() != s.node_count() {
        return Err(Error::dimension("virtual work variation", s.node_count(), v.node_count()));
    }
    let force = phi.force_field(s)?;
    let pi = phi.momentum_field(s)?;
    let pulled = pulled_back_form(phi, s)?;
    let integrand: Vec<T> = (0..s.node_count())
        .map(|n| force[n].dot(&v.dx_field[n]) + pi[n].dot(&dxdot[n]) - pulled[n].dot(&v.da_field[n]))
        .collect();
    trapezoid(&integrand, s.grid())
}

/// `(F − ∂ℒ/∂x, Π − ∂ℒ/∂ẋ)` at a jet point, derivatives by central differences.
pub fn lagrangian_exactness_residual<T: Real>(
    phi: &FundamentalOneForm<T>,
    j: &Jet1Point<T>,
) -> Result<(DVector<T>, DMatrix<T>)> {
    let dl_dx = lagrangian_config_gradient(phi, j, None)?;
    let dl_dxdot = lagrangian_momentum(phi, j, None)?;
    Ok((phi.force(j)? - dl_dx, phi.momentum(j)? - dl_dxdot))
}

/// `∂ℒ/∂x^μ` by central differences.
pub(crate) fn lagrangian_config_gradient<T: Real>(
    phi: &FundamentalOneForm<T>,
    j: &Jet1Point<T>,
    node: Option<usize>,
) -> Result<DVector<T>> {
    let l = |q: &Jet1Point<T>| phi.lagrangian_at(q, node);
    let mut out = DVector::zeros(j.m());
    for mu in 0..j.m() {
        out[mu] = jet_derivative(l, j, JetCoord::Config(mu), None)?;
    }
    Ok(out)
}

/// `∂ℒ/∂x^μ_i` by central differences.
pub(crate) fn lagrangian_momentum<T: Real>(
    phi: &FundamentalOneForm<T>,
    j: &Jet1Point<T>,
    node: Option<usize>,
) -> Result<DMatrix<T>> {
    potential_momentum(|q| phi.lagrangian_at(q, node), j, None)
}

fn potential_momentum<T: Real>(
    f: impl Fn(&Jet1Point<T>) -> Result<T> + Copy,
    j: &Jet1Point<T>,
    step: Option<T>,
) -> Result<DMatrix<T>> {
    let mut out = DMatrix::zeros(j.m(), j.p());
    for mu in 0..j.m() {
        for i in 0..j.p() {
            out[(mu, i)] = jet_derivative(f, j, JetCoord::Contact { mu, i }, step)?;
        }
    }
    Ok(out)
}

/// `γ^{ij}_{μν} = ∂Π^i_μ/∂x^ν_j` at one jet point.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaTensor<T> {
    p: usize,
    m: usize,
    values: Vec<T>,
    /// `max |γ^{ij}_{μν} − γ^{ji}_{νμ}|`.
    pub symmetry_residual: T,
}

impl<T: Real> GammaTensor<T> {
    fn index(&self, i: usize, j: usize, mu: usize, nu: usize) -> usize {
        ((i * self.p + j) * self.m + mu) * self.m + nu
    }

    pub fn get(&self, i: usize, j: usize, mu: usize, nu: usize) -> T {
        self.values[self.index(i, j, mu, nu)]
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// `γ^{kl}_{μν} x^ν_l`, the right-hand side of Euler's identity for degree-1 `Π`.
    pub fn contract_velocity(&self, xdot: &DMatrix<T>) -> DMatrix<T> {
        DMatrix::from_fn(self.m, self.p, |mu, k| {
            let mut acc = T::zero();
            for l in 0..self.p {
                for nu in 0..self.m {
                    acc += self.get(k, l, mu, nu) * xdot[(nu, l)];
                }
            }
            acc
        })
    }

    /// Largest absolute difference to another tensor of the same shape.
    pub fn max_difference(&self, other: &Self) -> T {
        max_abs(self.values.iter().zip(&other.values).map(|(&a, &b)| a - b))
    }
}

/// Central-difference Jacobian of `Π` in the contact slots.
pub fn gamma_tensor<T: Real>(phi: &FundamentalOneForm<T>, j: &Jet1Point<T>, step: T) -> Result<GammaTensor<T>> {
    if !(step > T::zero()) {
        return Err(Error::Contract(format!("gamma step must be positive, got {step:e}")));
    }
    gamma_with(phi, j, Some(step))
}

fn gamma_with<T: Real>(phi: &FundamentalOneForm<T>, j: &Jet1Point<T>, step: Option<T>) -> Result<GammaTensor<T>> {
    let (p, m) = (j.p(), j.m());
    let mut g = GammaTensor { p, m, values: vec![T::zero(); p * p * m * m], symmetry_residual: T::zero() };
    for jj in 0..p {
        for nu in 0..m {
            let d = jet_derivative(|q| phi.momentum(q), j, JetCoord::Contact { mu: nu, i: jj }, step)?;
            for i in 0..p {
                for mu in 0..m {
                    let k = g.index(i, jj, mu, nu);
                    g.values[k] = d[(mu, i)];
                }
            }
        }
    }
    let mut residual = T::zero();
    for i in 0..p {
        for jj in 0..p {
            for mu in 0..m {
                for nu in 0..m {
                    residual = residual.max((g.get(i, jj, mu, nu) - g.get(jj, i, nu, mu)).abs());
                }
            }
        }
    }
    g.symmetry_residual = residual;
    Ok(g)
}

/// Residuals of the conditions implied by `Π = dT`.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticExactnessReport<T> {
    /// `max |∂Π/∂a^i|`.
    pub parameter_dependence: T,
    /// `max |∂Π/∂x^μ|`.
    pub configuration_dependence: T,
    /// Symmetry residual of `γ` (closedness of `Π`).
    pub gamma_symmetry: T,
    /// `max |Π^i_μ − ∂T/∂x^μ_i|` when a kinetic energy is attached.
    pub potential_residual: Option<T>,
}

impl<T: Real> KineticExactnessReport<T> {
    pub fn max_residual(&self) -> T {
        [self.parameter_dependence, self.configuration_dependence, self.gamma_symmetry]
            .into_iter()
            .chain(self.potential_residual)
            .fold(T::zero(), |a, b| a.max(b))
    }
}

pub fn kinetic_exactness_check<T: Real>(
    phi: &FundamentalOneForm<T>,
    j: &Jet1Point<T>,
    step: T,
) -> Result<KineticExactnessReport<T>> {
    let gamma = gamma_tensor(phi, j, step)?;
    let momentum = |q: &Jet1Point<T>| phi.momentum(q);
    let mut parameter_dependence = T::zero();
    for i in 0..j.p() {
        let d = jet_derivative(momentum, j, JetCoord::Param(i), Some(step))?;
        parameter_dependence = parameter_dependence.max(d.amax());
    }
    let mut configuration_dependence = T::zero();
    for mu in 0..j.m() {
        let d = jet_derivative(momentum, j, JetCoord::Config(mu), Some(step))?;
        configuration_dependence = configuration_dependence.max(d.amax());
    }
    let potential_residual = if phi.has_kinetic() {
        let dt = potential_momentum(|q| phi.kinetic(q), j, Some(step))?;
        Some((phi.momentum(j)? - dt).amax())
    } else {
        None
    };
    Ok(KineticExactnessReport {
        parameter_dependence,
        configuration_dependence,
        gamma_symmetry: gamma.symmetry_residual,
        potential_residual,
    })
}

/// Along-section compatibility conditions that exact kinetic work imposes.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticCompatibility<T: Real> {
    /// `Π^j_μ ∂x^μ_j/∂a^i − (∂Π^j_μ/∂a^i) x^μ_j` per node, a p-vector.
    pub momentum_symmetry: Vec<DVector<T>>,
    /// For p = 1 only: `Π_μ ẍ^μ − F_μ ẋ^μ` per node.
    pub on_shell: Option<Vec<T>>,
}

pub fn kinetic_compatibility<T: Real>(
    phi: &FundamentalOneForm<T>,
    s: &SampledSection<T>,
) -> Result<KineticCompatibility<T>> {
    let pi = phi.momentum_field(s)?;
    let xdot_grad = s.xdot_gradient()?;
    let pi_grad = (0..s.p()).map(|i| grid_partial(&pi, i, s.grid())).collect::<Result<Vec<_>>>()?;
    let xdot = s.xdot_field();
    let momentum_symmetry = (0..s.node_count())
        .map(|n| DVector::from_fn(s.p(), |i, _| pi[n].dot(&xdot_grad[i][n]) - pi_grad[i][n].dot(&xdot[n])))
        .collect();
    let on_shell = if s.p() == 1 {
        let force = phi.force_field(s)?;
        Some(
            (0..s.node_count())
                .map(|n| pi[n].dot(&xdot_grad[0][n]) - force[n].dot(&xdot[n].column(0)))
                .collect(),
        )
    } else {
        None
    };
    Ok(KineticCompatibility { momentum_symmetry, on_shell })
}

/// Lagrange bracket `[a^i, a^j]` of the pulled-back momentum form at every node.
/// Antisymmetric by construction.
pub fn lagrange_bracket<T: Real>(
    phi: &FundamentalOneForm<T>,
    s: &SampledSection<T>,
) -> Result<Vec<DMatrix<T>>> {
    let p = s.p();
    let pi = phi.momentum_field(s)?;
    let pi_grad = (0..p).map(|i| grid_partial(&pi, i, s.grid())).collect::<Result<Vec<_>>>()?;
    let xdot_grad = s.xdot_gradient()?;
    Ok((0..s.node_count())
        .map(|n| {
            let half = DMatrix::from_fn(p, p, |i, j| pi_grad[i][n].dot(&xdot_grad[j][n]));
            &half - half.transpose()
        })
        .collect())
}

/// Homogeneity residuals of the momentum law, and of the kinetic energy if attached.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneityReport<T> {
    /// `max_λ max |Π(λẋ) − λΠ(ẋ)|`.
    pub degree_one: T,
    /// `max |Π^k_μ − γ^{kl}_{μν} x^ν_l|`.
    pub euler_identity: T,
    /// `|T − ½ Π^i_μ x^μ_i|`.
    pub kinetic_identity: Option<T>,
    /// `max_λ |T(λẋ) − λ² T(ẋ)|`.
    pub degree_two: Option<T>,
}

pub fn euler_homogeneity_check<T: Real>(
    phi: &FundamentalOneForm<T>,
    j: &Jet1Point<T>,
    lambdas: &[T],
) -> Result<HomogeneityReport<T>> {
    if lambdas.is_empty() {
        return Err(Error::Contract("homogeneity check needs at least one scale factor".into()));
    }
    if let Some(bad) = lambdas.iter().find(|&&l| !(l > T::zero())) {
        return Err(Error::Contract(format!("scale factors must be positive, got {bad:e}")));
    }
    let pi = phi.momentum(j)?;
    let mut degree_one = T::zero();
    for &l in lambdas {
        let scaled = phi.momentum(&j.with_scaled_velocity(l))?;
        degree_one = degree_one.max((scaled - &pi * l).amax());
    }
    let gamma = gamma_with(phi, j, None)?;
    let euler_identity = (&pi - gamma.contract_velocity(&j.xdot)).amax();
    let (kinetic_identity, degree_two) = if phi.has_kinetic() {
        let t = phi.kinetic(j)?;
        let mut d2 = T::zero();
        for &l in lambdas {
            d2 = d2.max((phi.kinetic(&j.with_scaled_velocity(l))? - t * l * l).abs());
        }
        (Some((t - T::half() * pi.dot(&j.xdot)).abs()), Some(d2))
    } else {
        (None, None)
    };
    Ok(HomogeneityReport { degree_one, euler_identity, kinetic_identity, degree_two })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::{prolong_map, prolong_variation, ParameterGrid};
    use approx::assert_abs_diff_eq;

    fn jet1(a: f64, x: f64, v: f64) -> Jet1Point<f64> {
        Jet1Point::new(DVector::from_element(1, a), DVector::from_element(1, x), DMatrix::from_element(1, 1, v))
            .unwrap()
    }

    fn unit_momentum() -> impl Fn(&Jet1Point<f64>) -> DMatrix<f64> + Send + Sync + 'static {
        |j: &Jet1Point<f64>| j.xdot.clone()
    }

    fn section_1d(lo: f64, hi: f64, n: usize, x: impl Fn(f64) -> f64) -> SampledSection<f64> {
        let g = ParameterGrid::interval(lo, hi, n).unwrap();
        let xs = g.sample(|a| DVector::from_element(1, x(a[0])));
        prolong_map(xs, &g).unwrap()
    }

    #[test]
    fn free_particle_is_extremal() {
        let phi = FundamentalOneForm::new(|_| DVector::zeros(1), unit_momentum());
        let s = section_1d(0.0, 1.0, 11, |a| 2.5 * a);
        for r in dstar(&phi, &s).unwrap() {
            assert_abs_diff_eq!(r[0], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn oscillator_residual_is_second_order() {
        let k: f64 = 4.0;
        let phi = FundamentalOneForm::new(move |j| &j.x * -k, unit_momentum());
        let res = |n| {
            let s = section_1d(0.0, 2.0, n, |a| (k.sqrt() * a).cos());
            max_abs(dstar(&phi, &s).unwrap().iter().map(|r| r[0]))
        };
        let (coarse, fine) = (res(201), res(401));
        assert!(coarse < 5e-3, "{coarse}");
        let ratio = coarse / fine;
        assert!((3.2..4.8).contains(&ratio), "{ratio}");
    }

    #[test]
    fn unbalanced_force_shows_up() {
        let phi = FundamentalOneForm::new(|_| DVector::from_element(1, 1.0), unit_momentum());
        let s = section_1d(0.0, 1.0, 7, |a| a);
        for r in dstar(&phi, &s).unwrap() {
            assert_abs_diff_eq!(r[0], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn evaluation_failure_names_the_node() {
        let phi = FundamentalOneForm::new(
            |j: &Jet1Point<f64>| DVector::from_element(1, if j.a[0] > 0.45 { f64::NAN } else { 0.0 }),
            unit_momentum(),
        );
        let s = section_1d(0.0, 1.0, 11, |a| a);
        match dstar(&phi, &s) {
            Err(Error::Evaluation { what: "force", node: Some(5), location, .. }) => {
                assert_abs_diff_eq!(location[0], 0.5, epsilon = 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }
        let wrong_shape = FundamentalOneForm::new(|_: &Jet1Point<f64>| DVector::zeros(1), |_| DMatrix::zeros(2, 1));
        assert!(matches!(dstar(&wrong_shape, &s), Err(Error::Evaluation { what: "momentum", .. })));
    }

    #[test]
    fn virtual_work_of_zero_variation_vanishes() {
        let phi = FundamentalOneForm::new(|j: &Jet1Point<f64>| -&j.x, unit_momentum());
        let s = section_1d(0.0, 1.0, 21, f64::sin);
        let v = Variation::vertical(s.grid(), vec![DVector::zeros(1); 21]).unwrap();
        assert!(matches!(virtual_work(&phi, &s, &v), Err(Error::Contract(_))));
        let v = prolong_variation(&v, s.grid()).unwrap();
        assert_eq!(virtual_work(&phi, &s, &v).unwrap(), 0.0);
    }

    #[test]
    fn virtual_work_matches_quadrature_oracle() {
        let phi = FundamentalOneForm::new(|_| DVector::zeros(1), unit_momentum());
        let s = section_1d(0.0, 1.0, 201, |a| a);
        let dx = s.grid().sample(|a| DVector::from_element(1, (std::f64::consts::PI * a[0]).sin()));
        let v = prolong_variation(&Variation::vertical(s.grid(), dx).unwrap(), s.grid()).unwrap();
        assert_abs_diff_eq!(virtual_work(&phi, &s, &v).unwrap(), 0.0, epsilon = 1e-4);
    }

    #[test]
    fn virtual_work_on_extremal_is_small() {
        let phi = FundamentalOneForm::new(|j: &Jet1Point<f64>| -&j.x, unit_momentum());
        let w = |n| {
            let s = section_1d(0.0, 3.0, n, f64::cos);
            let dx = s.grid().sample(|a| DVector::from_element(1, (a[0] * (3.0 - a[0])).powi(2)));
            let v = prolong_variation(&Variation::vertical(s.grid(), dx).unwrap(), s.grid()).unwrap();
            virtual_work(&phi, &s, &v).unwrap().abs()
        };
        assert!(w(101) < 1e-3);
        assert!(w(201) < w(101) / 3.0);
    }

    #[test]
    fn pulled_back_form_examples() {
        let zero = FundamentalOneForm::new(|_| DVector::zeros(1), |_| DMatrix::zeros(1, 1));
        let s = section_1d(0.0, 1.0, 11, f64::exp);
        assert!(pulled_back_form(&zero, &s).unwrap().iter().all(|v| v[0] == 0.0));

        let free = FundamentalOneForm::new(|_| DVector::zeros(1), unit_momentum());
        let line = section_1d(0.0, 1.0, 11, |a| a);
        for v in pulled_back_form(&free, &line).unwrap() {
            assert_abs_diff_eq!(v[0], 0.0, epsilon = 1e-12);
        }

        // Oscillator, x = cos a: F ẋ + Π ẍ = (−cos)(−sin) + (−sin)(−cos) = sin 2a, which is
        // d/da of ½ẋ² − ½x² along the curve.
        let osc = FundamentalOneForm::new(|j: &Jet1Point<f64>| -&j.x, unit_momentum());
        let s = section_1d(0.0, 2.0, 2001, f64::cos);
        let pb = pulled_back_form(&osc, &s).unwrap();
        for n in 0..s.node_count() {
            let a = s.grid().coords(n)[0];
            assert_abs_diff_eq!(pb[n][0], (2.0 * a).sin(), epsilon = 1e-4);
        }
    }

    #[test]
    fn lagrangian_residual_examples() {
        let osc = FundamentalOneForm::new(|j: &Jet1Point<f64>| -&j.x, unit_momentum())
            .with_lagrangian(|j| 0.5 * j.xdot[(0, 0)].powi(2) - 0.5 * j.x[0].powi(2));
        let (rf, rp) = lagrangian_exactness_residual(&osc, &jet1(0.3, 0.7, -1.2)).unwrap();
        assert!(rf.amax() <= 1e-8 && rp.amax() <= 1e-8);

        let c = 0.4;
        let damped = FundamentalOneForm::new(move |j: &Jet1Point<f64>| j.xdot.column(0) * -c, unit_momentum())
            .with_lagrangian(|j| 0.5 * j.xdot[(0, 0)].powi(2));
        let (rf, _) = lagrangian_exactness_residual(&damped, &jet1(0.0, 1.0, 2.0)).unwrap();
        assert_abs_diff_eq!(rf[0], -c * 2.0, epsilon = 1e-8);

        let cubic = FundamentalOneForm::new(|_| DVector::zeros(1), |j: &Jet1Point<f64>| j.xdot.map(|v| v * v))
            .with_lagrangian(|j| j.xdot[(0, 0)].powi(3) / 3.0);
        let (_, rp) = lagrangian_exactness_residual(&cubic, &jet1(0.0, 0.0, 1.7)).unwrap();
        assert!(rp.amax() <= 1e-6);

        let bare = FundamentalOneForm::new(|_| DVector::zeros(1), unit_momentum());
        assert!(matches!(lagrangian_exactness_residual(&bare, &jet1(0.0, 0.0, 1.0)), Err(Error::Contract(_))));
    }

    #[test]
    fn gamma_examples() {
        let mass = 2.5;
        let pm = FundamentalOneForm::new(|j: &Jet1Point<f64>| DVector::zeros(j.m()), move |j| &j.xdot * mass);
        let j = Jet1Point::new(DVector::from_element(1, 0.0), DVector::zeros(3), DMatrix::from_column_slice(3, 1, &[1.0, -2.0, 0.5]))
            .unwrap();
        let g = gamma_tensor(&pm, &j, 1e-5).unwrap();
        for mu in 0..3 {
            for nu in 0..3 {
                assert_abs_diff_eq!(g.get(0, 0, mu, nu), if mu == nu { mass } else { 0.0 }, epsilon = 1e-9);
            }
        }
        assert!(g.symmetry_residual <= 1e-9);

        let sq = FundamentalOneForm::new(|_| DVector::zeros(1), |j: &Jet1Point<f64>| j.xdot.map(|v| v * v));
        assert_abs_diff_eq!(gamma_tensor(&sq, &jet1(0.0, 0.0, 2.0), 1e-4).unwrap().get(0, 0, 0, 0), 4.0, epsilon = 1e-6);

        let skew = FundamentalOneForm::new(
            |_: &Jet1Point<f64>| DVector::zeros(2),
            |j: &Jet1Point<f64>| {
                let v = j.xdot.column(0);
                DMatrix::from_column_slice(2, 1, &[2.0 * v[0] + 0.3 * v[1], 0.9 * v[0] + v[1]])
            },
        );
        let j = Jet1Point::new(DVector::zeros(1), DVector::zeros(2), DMatrix::from_element(2, 1, 1.0)).unwrap();
        let g = gamma_tensor(&skew, &j, 1e-4).unwrap();
        assert_abs_diff_eq!(g.symmetry_residual, 0.6, epsilon = 1e-9);
        assert!(gamma_tensor(&skew, &j, 0.0).is_err());
    }

    #[test]
    fn kinetic_exactness_examples() {
        let m = 1.5;
        let pm = FundamentalOneForm::new(|_: &Jet1Point<f64>| DVector::zeros(1), move |j| &j.xdot * m)
            .with_kinetic(move |j| 0.5 * m * j.xdot.norm_squared());
        let r = kinetic_exactness_check(&pm, &jet1(0.2, 0.4, 1.3), 1e-4).unwrap();
        assert!(r.max_residual() <= 1e-8, "{r:?}");

        let pos = FundamentalOneForm::new(|_: &Jet1Point<f64>| DVector::zeros(1), |j| &j.xdot * j.x[0]);
        let r = kinetic_exactness_check(&pos, &jet1(0.0, 0.8, -1.7), 1e-4).unwrap();
        assert_abs_diff_eq!(r.configuration_dependence, 1.7, epsilon = 1e-8);

        let ex = FundamentalOneForm::new(|_: &Jet1Point<f64>| DVector::zeros(1), |j| j.xdot.map(f64::exp))
            .with_kinetic(|j| j.xdot[(0, 0)].exp());
        let r = kinetic_exactness_check(&ex, &jet1(0.0, 0.0, 0.7), 1e-4).unwrap();
        assert!(r.potential_residual.unwrap() <= 1e-6);
    }

    #[test]
    fn kinetic_compatibility_holds_for_point_mass_on_shell() {
        let phi = FundamentalOneForm::new(|j: &Jet1Point<f64>| -&j.x, unit_momentum());
        let s = section_1d(0.0, 2.0, 401, f64::sin);
        let c = kinetic_compatibility(&phi, &s).unwrap();
        assert!(max_abs(c.momentum_symmetry.iter().map(|v| v[0])) < 1e-4);
        assert!(max_abs(c.on_shell.unwrap()) < 1e-4);
    }

    #[test]
    fn bracket_examples() {
        let phi = FundamentalOneForm::new(|_| DVector::zeros(1), |j: &Jet1Point<f64>| j.xdot.map(|v| v.powi(3)));
        let s = section_1d(0.0, 1.0, 9, f64::sin);
        assert!(lagrange_bracket(&phi, &s).unwrap().iter().all(|b| b[(0, 0)] == 0.0));

        // Π¹ = x_2, Π² = 0 along x = a¹a²: Π¹ pulls back to a¹, so [a¹, a²] = ∂_1(a¹)·∂_2(x_1) = 1.
        let g = ParameterGrid::new(vec![0.0, 0.0], vec![1.0, 2.0], vec![5, 6]).unwrap();
        let s = prolong_map(g.sample(|a| DVector::from_element(1, a[0] * a[1])), &g).unwrap();
        let skew = FundamentalOneForm::new(
            |_: &Jet1Point<f64>| DVector::zeros(1),
            |j: &Jet1Point<f64>| DMatrix::from_row_slice(1, 2, &[j.xdot[(0, 1)], 0.0]),
        );
        for b in lagrange_bracket(&skew, &s).unwrap() {
            assert_abs_diff_eq!(b[(0, 1)], 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(b[(1, 0)], -1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn homogeneity_examples() {
        let m = 3.0;
        let pm = FundamentalOneForm::new(|_: &Jet1Point<f64>| DVector::zeros(1), move |j| &j.xdot * m)
            .with_kinetic(move |j| 0.5 * m * j.xdot.norm_squared());
        let r = euler_homogeneity_check(&pm, &jet1(0.0, 1.0, -0.8), &[0.5, 2.0, 3.0]).unwrap();
        assert!(r.degree_one <= 1e-9 && r.euler_identity <= 1e-9);
        assert!(r.kinetic_identity.unwrap() <= 1e-9 && r.degree_two.unwrap() <= 1e-9);

        let sq = FundamentalOneForm::new(|_: &Jet1Point<f64>| DVector::zeros(1), |j| j.xdot.map(|v| v * v));
        let r = euler_homogeneity_check(&sq, &jet1(0.0, 0.0, 1.0), &[2.0]).unwrap();
        assert_abs_diff_eq!(r.degree_one, 2.0, epsilon = 1e-12);

        let abs = FundamentalOneForm::new(|_: &Jet1Point<f64>| DVector::zeros(1), |j| j.xdot.map(f64::abs));
        let r = euler_homogeneity_check(&abs, &jet1(0.0, 0.0, 1.0), &[0.3, 2.0, 7.0]).unwrap();
        assert!(r.degree_one <= 1e-12);
        // Inside the difference stencil the kink at 0 wrecks γ: the slope estimate is far from 1.
        let near = jet1(0.0, 0.0, 1e-7);
        let g = gamma_tensor(&abs, &near, fd_step(1e-7)).unwrap();
        assert!(g.get(0, 0, 0, 0) < 0.5);

        assert!(euler_homogeneity_check(&sq, &jet1(0.0, 0.0, 1.0), &[]).is_err());
        assert!(euler_homogeneity_check(&sq, &jet1(0.0, 0.0, 1.0), &[-1.0]).is_err());
    }

    #[test]
    fn sum_is_linear_in_dstar() {
        let a = FundamentalOneForm::new(|j: &Jet1Point<f64>| -&j.x, unit_momentum());
        let b = FundamentalOneForm::new(|j: &Jet1Point<f64>| j.xdot.column(0).into_owned(), |j| j.xdot.map(f64::sinh));
        let s = section_1d(0.0, 1.0, 17, |a| a * a);
        let lhs = dstar(&a.sum(&b), &s).unwrap();
        let (da, db) = (dstar(&a, &s).unwrap(), dstar(&b, &s).unwrap());
        for n in 0..lhs.len() {
            assert_abs_diff_eq!(lhs[n][0], da[n][0] + db[n][0], epsilon = 1e-12);
        }
    }
}
