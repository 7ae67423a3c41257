//! Point mechanics: p = 1, the parameter is time, the contact coordinates are the
//! velocity, and the momentum is `p_μ = m g_{μν} v^ν` for a constant Riemannian metric.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{dstar, FundamentalOneForm};
use crate::jet::{Jet1Point, ParameterGrid, SampledSection, Variation};
use crate::noether::{divergence_tolerance, BalanceReport};
use crate::numeric::{grid_partial, max_abs, rk4_step};
use crate::{Error, Real, Result};

pub type ForceLaw<T> = Arc<dyn Fn(T, &DVector<T>, &DVector<T>) -> DVector<T> + Send + Sync>;
pub type Potential<T> = Arc<dyn Fn(&DVector<T>) -> T + Send + Sync>;

/// A point mass in a flat space with constant metric `g`, driven by `F(t, x, v)`.
#[derive(Clone)]
pub struct PointMassSystem<T: Real> {
    mass: T,
    metric: DMatrix<T>,
    metric_inverse: DMatrix<T>,
    force: ForceLaw<T>,
    potential: Option<Potential<T>>,
}

impl<T: Real> fmt::Debug for PointMassSystem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PointMassSystem")
            .field("mass", &self.mass)
            .field("metric", &self.metric)
            .field("potential", &self.potential.is_some())
            .finish_non_exhaustive()
    }
}

/// Tolerance on `|g − gᵀ|` relative to `|g|`.
const SYMMETRY_TOLERANCE: f64 = 1e-12;

pub(crate) fn check_spd<T: Real>(what: &str, g: &DMatrix<T>) -> Result<DMatrix<T>> {
    if !g.is_square() || g.nrows() == 0 {
        return Err(Error::Invariant(format!("{what} must be a non-empty square matrix")));
    }
    if !g.iter().all(|v| v.is_finite()) {
        return Err(Error::Invariant(format!("{what} has non-finite entries")));
    }
    if (g - g.transpose()).amax() > T::lit(SYMMETRY_TOLERANCE) * T::one().max(g.amax()) {
        return Err(Error::Invariant(format!("{what} is not symmetric")));
    }
    let chol = g
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Invariant(format!("{what} is not positive-definite")))?;
    Ok(chol.inverse())
}

impl<T: Real> PointMassSystem<T> {
    pub fn new(
        mass: T,
        metric: DMatrix<T>,
        force: impl Fn(T, &DVector<T>, &DVector<T>) -> DVector<T> + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(mass > T::zero()) || !mass.is_finite() {
            return Err(Error::Invariant(format!("mass must be positive and finite, got {mass:e}")));
        }
        let metric_inverse = check_spd("metric", &metric)?;
        Ok(Self { mass, metric, metric_inverse, force: Arc::new(force), potential: None })
    }

    /// Euclidean metric in `dim` dimensions.
    pub fn euclidean(
        mass: T,
        dim: usize,
        force: impl Fn(T, &DVector<T>, &DVector<T>) -> DVector<T> + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::new(mass, DMatrix::identity(dim, dim), force)
    }

    /// Declares `F = −∂U/∂x` for the conservative part; used for energies and Lagrangians.
    pub fn with_potential(mut self, u: impl Fn(&DVector<T>) -> T + Send + Sync + 'static) -> Self {
        self.potential = Some(Arc::new(u));
        self
    }

    pub fn mass(&self) -> T {
        self.mass
    }

    pub fn dim(&self) -> usize {
        self.metric.nrows()
    }

    pub fn metric(&self) -> &DMatrix<T> {
        &self.metric
    }

    pub fn has_potential(&self) -> bool {
        self.potential.is_some()
    }

    /// `p_μ = m g_{μν} v^ν`.
    pub fn momentum(&self, v: &DVector<T>) -> DVector<T> {
        &self.metric * v * self.mass
    }

    pub fn force(&self, t: T, x: &DVector<T>, v: &DVector<T>) -> Result<DVector<T>> {
        let f = (self.force)(t, x, v);
        let reason = if f.len() != self.dim() {
            Some(format!("returned length {}, expected {}", f.len(), self.dim()))
        } else if !f.iter().all(|c| c.is_finite()) {
            Some("non-finite value".to_string())
        } else {
            None
        };
        match reason {
            Some(reason) => Err(Error::Evaluation { what: "force", node: None, location: vec![t.as_f64()], reason }),
            None => Ok(f),
        }
    }

    pub fn potential(&self, x: &DVector<T>) -> Option<T> {
        self.potential.as_ref().map(|u| u(x))
    }

    pub fn total_energy(&self, x: &DVector<T>, v: &DVector<T>) -> Option<T> {
        self.potential(x).map(|u| kinetic_energy(self, v) + u)
    }

    /// The fundamental 1-form `F_μ dx^μ + d(½ m g(v, v))` on `J¹([t₀, t₁]; ℝ^dim)`, with the
    /// Lagrangian `T − U` attached when a potential is known.
    pub fn one_form(&self) -> FundamentalOneForm<T> {
        let (force, mass, g) = (self.force.clone(), self.mass, self.metric.clone());
        let g2 = g.clone();
        let phi = FundamentalOneForm::new(
            move |j: &Jet1Point<T>| force(j.a[0], &j.x, &j.xdot.column(0).into_owned()),
            move |j: &Jet1Point<T>| &g * &j.xdot * mass,
        );
        let kinetic = move |j: &Jet1Point<T>| {
            let v = j.xdot.column(0);
            (v.transpose() * &g2 * v)[0] * mass * T::half()
        };
        match self.potential.clone() {
            Some(u) => {
                let k = kinetic.clone();
                phi.with_kinetic(kinetic).with_lagrangian(move |j| k(j) - u(&j.x))
            }
            None => phi.with_kinetic(kinetic),
        }
    }
}

/// `T = ½ m g(v, v)`.
pub fn kinetic_energy<T: Real>(sys: &PointMassSystem<T>, v: &DVector<T>) -> T {
    v.dot(&(&sys.metric * v)) * sys.mass * T::half()
}

/// Uniformly sampled states `(x, v)` of a curve in the tangent bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Real> {
    grid: ParameterGrid<T>,
    pub x: Vec<DVector<T>>,
    pub v: Vec<DVector<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn new(grid: ParameterGrid<T>, x: Vec<DVector<T>>, v: Vec<DVector<T>>) -> Result<Self> {
        if grid.dim() != 1 {
            return Err(Error::InvalidGrid("a trajectory is parameterized by time alone".into()));
        }
        if x.len() != grid.node_count() || v.len() != grid.node_count() {
            return Err(Error::dimension("trajectory samples", grid.node_count(), format!("{} x / {} v", x.len(), v.len())));
        }
        Ok(Self { grid, x, v })
    }

    pub fn grid(&self) -> &ParameterGrid<T> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn step(&self) -> T {
        self.grid.spacing()[0]
    }

    pub fn time(&self, k: usize) -> T {
        self.grid.coords(k)[0]
    }

    pub fn times(&self) -> Vec<T> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    /// The trajectory as a section of `J¹([t₀, t₁]; ℝ^dim)`, with the integrated velocities
    /// as contact coordinates.
    pub fn section(&self) -> Result<SampledSection<T>> {
        let xdot = self.v.iter().map(|v| DMatrix::from_column_slice(v.len(), 1, v.as_slice())).collect();
        SampledSection::new(self.grid.clone(), self.x.clone(), xdot)
    }
}

/// Number of uniform steps covering `[t0, t1]` at no more than `step`. A ratio within a
/// few ulps of an integer is taken as that integer.
pub(crate) fn step_count<T: Real>(t0: T, t1: T, step: T) -> Result<usize> {
    if !(step > T::zero()) || !step.is_finite() {
        return Err(Error::Contract(format!("step must be positive and finite, got {step:e}")));
    }
    if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::Contract(format!("time window [{t0:e}, {t1:e}] is empty")));
    }
    let ratio = ((t1 - t0) / step).as_f64();
    let nearest = ratio.round();
    let n = if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) { nearest } else { ratio.ceil() };
    Ok((n as usize).max(2))
}

/// Classical RK4 on `ẋ = v, v̇ = g⁻¹F/m`, recording every step.
pub fn integrate_newton<T: Real>(
    sys: &PointMassSystem<T>,
    x0: &DVector<T>,
    v0: &DVector<T>,
    t0: T,
    t1: T,
    step: T,
) -> Result<Trajectory<T>> {
    let d = sys.dim();
    if x0.len() != d || v0.len() != d {
        return Err(Error::dimension("initial state", d, format!("{} x / {} v", x0.len(), v0.len())));
    }
    let n = step_count(t0, t1, step)?;
    let grid = ParameterGrid::interval(t0, t1, n + 1)?;
    let h = grid.spacing()[0];
    let accel = &sys.metric_inverse / sys.mass;

    let mut state = DVector::zeros(2 * d);
    state.rows_mut(0, d).copy_from(x0);
    state.rows_mut(d, d).copy_from(v0);
    let (mut xs, mut vs) = (vec![x0.clone()], vec![v0.clone()]);
    for k in 0..n {
        let t = grid.coords(k)[0];
        let mut failure = None;
        let rhs = |t: T, y: &DVector<T>| {
            let x = y.rows(0, d).into_owned();
            let v = y.rows(d, d).into_owned();
            let mut out = DVector::zeros(2 * d);
            match sys.force(t, &x, &v) {
                Ok(f) => {
                    out.rows_mut(0, d).copy_from(&v);
                    out.rows_mut(d, d).copy_from(&(&accel * f));
                }
                Err(e) => {
                    failure.get_or_insert(e);
                }
            }
            out
        };
        let next = rk4_step(rhs, &state, t, h);
        if let Some(e) = failure {
            return Err(e);
        }
        state = next?;
        xs.push(state.rows(0, d).into_owned());
        vs.push(state.rows(d, d).into_owned());
    }
    Trajectory::new(grid, xs, vs)
}

/// `dT/dt` by grid differencing of the sampled kinetic energy, against the power `F·v`.
pub fn power_balance_report<T: Real>(sys: &PointMassSystem<T>, traj: &Trajectory<T>) -> Result<BalanceReport<T>> {
    if traj.len() < 3 {
        return Err(Error::TooFewNodes { axis: 0, nodes: traj.len() });
    }
    let energy: Vec<T> = traj.v.iter().map(|v| kinetic_energy(sys, v)).collect();
    let divergence = grid_partial(&energy, 0, traj.grid())?;
    let source = (0..traj.len())
        .map(|k| Ok(sys.force(traj.time(k), &traj.x[k], &traj.v[k])?.dot(&traj.v[k])))
        .collect::<Result<Vec<_>>>()?;
    let euler = dstar(&sys.one_form(), &traj.section()?)?;
    let newton = max_abs((1..traj.len() - 1).map(|k| euler[k].amax()));
    BalanceReport::new(traj.grid(), divergence, source, Some(newton))
}

/// `max_k |E(t_k) − E(t_0)|` for the total energy; `None` without a potential.
pub fn energy_drift<T: Real>(sys: &PointMassSystem<T>, traj: &Trajectory<T>) -> Option<T> {
    let e0 = sys.total_energy(&traj.x[0], &traj.v[0])?;
    let energies = (0..traj.len()).map(|k| sys.total_energy(&traj.x[k], &traj.v[k]).map(|e| e - e0));
    energies.collect::<Option<Vec<_>>>().map(max_abs)
}

/// Whether `δt` is a constant time translation: `max |d(δt)/dt|` within the
/// divergence-free tolerance.
pub fn check_constant_time_translation<T: Real>(v: &Variation<T>, grid: &ParameterGrid<T>) -> Result<bool> {
    if grid.dim() != 1 {
        return Err(Error::Contract(format!("time translations need p = 1, got p = {}", grid.dim())));
    }
    if v.node_count() != grid.node_count() {
        return Err(Error::dimension("time translation", grid.node_count(), v.node_count()));
    }
    let dt: Vec<T> = v.da_field.iter().map(|d| d[0]).collect();
    let rate = grid_partial(&dt, 0, grid)?;
    Ok(max_abs(rate) <= divergence_tolerance(grid, &v.da_field))
}
