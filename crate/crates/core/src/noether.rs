//! Noether currents of a possibly inexact fundamental 1-form and the balance identity
//! `∂_i J^i = Φ_i δa^i` they satisfy along extremals.
//!
//! The velocities `x^μ_{,j}` that enter `K = Π^j_μ x^μ_{,j}`, the currents and the source
//! are read from the section's contact coordinates. On a prolonged section these are
//! the grid derivatives of `x`; for sections sampled from closed forms they are exact.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{dstar, lagrangian_momentum, FundamentalOneForm};
use crate::jet::{ParameterGrid, SampledSection, Variation};
use crate::numeric::{grid_divergence, grid_partial, max_abs, pairwise_sum};
use crate::{Error, Real, Result};

/// How much of the kinetic trace `K = Π^j_μ x^μ_{,j}` is subtracted in `J^i` and `T^i_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceConvention {
    /// `J^i = Π^i_μ δx^μ − ½ K δa^i`; the trace of `T` is `(1 − p/2) K`.
    #[default]
    Half,
    /// `J^i = Π^i_μ δx^μ − K δa^i`.
    Full,
}

impl TraceConvention {
    pub fn factor<T: Real>(self) -> T {
        match self {
            TraceConvention::Half => T::half(),
            TraceConvention::Full => T::one(),
        }
    }
}

/// Linearized action of a Lie algebra of dimension `dim_g` on `O × M` along a section:
/// `δa^i = 𝔇^i_A 𝔞^A` and `δx̄^μ = 𝔇̄^μ_A 𝔞^A`, node by node.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupActionLinearization<T: Real> {
    dim_g: usize,
    d_param: Vec<DMatrix<T>>,
    d_config: Vec<DMatrix<T>>,
}

impl<T: Real> GroupActionLinearization<T> {
    pub fn new(dim_g: usize, d_param: Vec<DMatrix<T>>, d_config: Vec<DMatrix<T>>) -> Result<Self> {
        if d_param.len() != d_config.len() {
            return Err(Error::dimension("action node count", d_param.len(), d_config.len()));
        }
        let p = d_param.first().map_or(0, |d| d.nrows());
        let m = d_config.first().map_or(0, |d| d.nrows());
        if let Some(bad) = d_param.iter().find(|d| d.shape() != (p, dim_g)) {
            return Err(Error::dimension("action parameter part", format!("{p}x{dim_g}"), format!("{:?}", bad.shape())));
        }
        if let Some(bad) = d_config.iter().find(|d| d.shape() != (m, dim_g)) {
            return Err(Error::dimension("action configuration part", format!("{m}x{dim_g}"), format!("{:?}", bad.shape())));
        }
        Ok(Self { dim_g, d_param, d_config })
    }

    /// Samples both parts from functions of `(a, x)` along `s`.
    pub fn along(
        s: &SampledSection<T>,
        dim_g: usize,
        d_param: impl Fn(&DVector<T>, &DVector<T>) -> DMatrix<T>,
        d_config: impl Fn(&DVector<T>, &DVector<T>) -> DMatrix<T>,
    ) -> Result<Self> {
        let (mut dp, mut dc) = (Vec::with_capacity(s.node_count()), Vec::with_capacity(s.node_count()));
        for n in 0..s.node_count() {
            let a = s.grid().coords(n);
            dp.push(d_param(&a, &s.x_field()[n]));
            dc.push(d_config(&a, &s.x_field()[n]));
        }
        let out = Self::new(dim_g, dp, dc)?;
        out.check_against(s)?;
        Ok(out)
    }

    pub fn dim_g(&self) -> usize {
        self.dim_g
    }

    pub fn d_param(&self) -> &[DMatrix<T>] {
        &self.d_param
    }

    pub fn d_config(&self) -> &[DMatrix<T>] {
        &self.d_config
    }

    fn check_against(&self, s: &SampledSection<T>) -> Result<()> {
        if self.d_param.len() != s.node_count() {
            return Err(Error::dimension("action node count", s.node_count(), self.d_param.len()));
        }
        if self.d_param[0].nrows() != s.p() || self.d_config[0].nrows() != s.m() {
            return Err(Error::dimension(
                "action shape",
                format!("p={} m={}", s.p(), s.m()),
                format!("p={} m={}", self.d_param[0].nrows(), self.d_config[0].nrows()),
            ));
        }
        Ok(())
    }

    /// The variation induced by the algebra element `generator`, lifted along `s`:
    /// `δx = x_{,j} δa^j + δx̄`.
    pub fn variation(&self, s: &SampledSection<T>, generator: &DVector<T>) -> Result<Variation<T>> {
        self.check_against(s)?;
        if generator.len() != self.dim_g {
            return Err(Error::dimension("generator", self.dim_g, generator.len()));
        }
        let da = self.d_param.iter().map(|d| d * generator).collect();
        let dxbar = self.d_config.iter().map(|d| d * generator).collect();
        Variation::split(s, da, dxbar)
    }
}

/// Divergence against source along a section, with residuals over interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceReport<T> {
    pub divergence_field: Vec<T>,
    pub source_field: Vec<T>,
    /// `max |divergence − source|` over interior nodes.
    pub residual_maxnorm: T,
    /// `(Σ r² · cell measure)^{1/2}` over interior nodes.
    pub residual_l2: T,
    /// `max |D*φ|` over interior nodes, when the report came from a section.
    pub dstar_maxnorm: Option<T>,
}

impl<T: Real> BalanceReport<T> {
    pub fn new(
        grid: &ParameterGrid<T>,
        divergence_field: Vec<T>,
        source_field: Vec<T>,
        dstar_maxnorm: Option<T>,
    ) -> Result<Self> {
        let nodes = grid.node_count();
        if divergence_field.len() != nodes || source_field.len() != nodes {
            return Err(Error::dimension(
                "balance fields",
                nodes,
                format!("{} divergence / {} source", divergence_field.len(), source_field.len()),
            ));
        }
        let interior: Vec<T> = (0..nodes)
            .filter(|&n| grid.is_interior(n))
            .map(|n| divergence_field[n] - source_field[n])
            .collect();
        let residual_maxnorm = max_abs(interior.iter().copied());
        let squares: Vec<T> = interior.iter().map(|&r| r * r * grid.cell_measure()).collect();
        Ok(Self {
            divergence_field,
            source_field,
            residual_maxnorm,
            residual_l2: pairwise_sum(&squares).sqrt(),
            dstar_maxnorm,
        })
    }

    pub fn residual_field(&self) -> Vec<T> {
        self.divergence_field.iter().zip(&self.source_field).map(|(&d, &s)| d - s).collect()
    }
}

fn interior_maxnorm<T: Real>(grid: &ParameterGrid<T>, field: &[DVector<T>]) -> T {
    max_abs((0..field.len()).filter(|&n| grid.is_interior(n)).map(|n| field[n].amax()))
}

/// `K = Π^j_μ x^μ_{,j}` per node.
fn kinetic_trace<T: Real>(pi: &[DMatrix<T>], s: &SampledSection<T>) -> Vec<T> {
    pi.iter().zip(s.xdot_field()).map(|(p, xd)| p.dot(xd)).collect()
}

fn check_variation<T: Real>(s: &SampledSection<T>, v: &Variation<T>) -> Result<()> {
    if v.node_count() != s.node_count() {
        return Err(Error::dimension("variation node count", s.node_count(), v.node_count()));
    }
    if v.dx_field[0].len() != s.m() {
        return Err(Error::dimension("variation δx", s.m(), v.dx_field[0].len()));
    }
    if v.da_field[0].len() != s.p() {
        return Err(Error::dimension("variation δa", s.p(), v.da_field[0].len()));
    }
    Ok(())
}

/// Relative factor in the divergence-free tolerance `factor · h_max² · ‖δa‖∞`.
pub const DIVERGENCE_TOLERANCE_FACTOR: f64 = 10.0;

pub fn divergence_tolerance<T: Real>(grid: &ParameterGrid<T>, da_field: &[DVector<T>]) -> T {
    let h = grid.max_spacing();
    let norm = max_abs(da_field.iter().map(|d| d.amax()));
    T::lit(DIVERGENCE_TOLERANCE_FACTOR) * h * h * norm
}

/// Errors with the worst interior node unless `div δa` is within tolerance everywhere inside.
pub fn require_divergence_free<T: Real>(grid: &ParameterGrid<T>, da_field: &[DVector<T>]) -> Result<()> {
    let div = grid_divergence(da_field, grid)?;
    let tol = divergence_tolerance(grid, da_field);
    let worst = (0..div.len())
        .filter(|&n| grid.is_interior(n))
        .max_by(|&a, &b| div[a].abs().partial_cmp(&div[b].abs()).unwrap_or(std::cmp::Ordering::Equal));
    match worst {
        Some(n) if div[n].abs() > tol => Err(Error::NotDivergenceFree {
            node: n,
            location: grid.coords(n).iter().map(|v| v.as_f64()).collect(),
            divergence: div[n].abs().as_f64(),
            tolerance: tol.as_f64(),
        }),
        _ => Ok(()),
    }
}

/// `T^i_j = Π^i_μ x^μ_{,j} − c K δ^i_j`, stored as p×p with row i, column j.
pub fn stress_energy_tensor<T: Real>(
    phi: &FundamentalOneForm<T>,
    s: &SampledSection<T>,
    convention: TraceConvention,
) -> Result<Vec<DMatrix<T>>> {
    let pi = phi.momentum_field(s)?;
    let c = convention.factor::<T>();
    Ok(pi
        .iter()
        .zip(s.xdot_field())
        .map(|(p, xd)| {
            let k = p.dot(xd);
            p.transpose() * xd - DMatrix::identity(s.p(), s.p()) * (c * k)
        })
        .collect())
}

/// `S^i_A = Π^i_μ 𝔇̄^μ_A`.
pub fn spin_tensor<T: Real>(
    phi: &FundamentalOneForm<T>,
    s: &SampledSection<T>,
    act: &GroupActionLinearization<T>,
) -> Result<Vec<DMatrix<T>>> {
    act.check_against(s)?;
    let pi = phi.momentum_field(s)?;
    Ok(pi.iter().zip(&act.d_config).map(|(p, d)| p.transpose() * d).collect())
}

/// `J^i_A = T^i_j 𝔇^j_A + S^i_A`.
pub fn noether_map_matrix<T: Real>(
    phi: &FundamentalOneForm<T>,
    s: &SampledSection<T>,
    act: &GroupActionLinearization<T>,
    convention: TraceConvention,
) -> Result<Vec<DMatrix<T>>> {
    let stress = stress_energy_tensor(phi, s, convention)?;
    let spin = spin_tensor(phi, s, act)?;
    Ok(stress.iter().zip(&act.d_param).zip(spin).map(|((t, d), sp)| t * d + sp).collect())
}

/// `J^i = Π^i_μ δx^μ − c K δa^i` at every node.
pub fn noether_current<T: Real>(
    phi: &FundamentalOneForm<T>,
    s: &SampledSection<T>,
    v: &Variation<T>,
    convention: TraceConvention,
) -> Result<Vec<DVector<T>>> {
    check_variation(s, v)?;
    let pi = phi.momentum_field(s)?;
    let k = kinetic_trace(&pi, s);
    let c = convention.factor::<T>();
    Ok((0..s.node_count())
        .map(|n| pi[n].tr_mul(&v.dx_field[n]) - &v.da_field[n] * (c * k[n]))
        .collect())
}

/// The source covector `Φ_i` at every node.
pub fn balance_source<T: Real>(
    phi: &FundamentalOneForm<T>,
    s: &SampledSection<T>,
    convention: TraceConvention,
) -> Result<Vec<DVector<T>>> {
    let force = phi.force_field(s)?;
    let pi = phi.momentum_field(s)?;
    let pi_grad = (0..s.p()).map(|i| grid_partial(&pi, i, s.grid())).collect::<Result<Vec<_>>>()?;
    let xdot = s.xdot_field();
    let xdot_grad = s.xdot_gradient()?;
    let half = T::half();
    Ok((0..s.node_count())
        .map(|n| {
            DVector::from_fn(s.p(), |i, _| {
                let work = force[n].dot(&xdot[n].column(i));
                let pulled = pi_grad[i][n].dot(&xdot[n]);
                match convention {
                    TraceConvention::Half => work + half * (pi[n].dot(&xdot_grad[i][n]) - pulled),
                    TraceConvention::Full => work - pulled,
                }
            })
        })
        .collect())
}

/// Checks `∂_i J^i = Φ_i δa^i` along `s`. Extremality is not required; `max |D*φ|` is
/// reported so that off-shell residuals can be read in context.
pub fn balance_check<T: Real>(
    phi: &FundamentalOneForm<T>,
    s: &SampledSection<T>,
    v: &Variation<T>,
    convention: TraceConvention,
) -> Result<BalanceReport<T>> {
    check_variation(s, v)?;
    require_divergence_free(s.grid(), &v.da_field)?;
    let current = noether_current(phi, s, v, convention)?;
    let divergence = grid_divergence(&current, s.grid())?;
    let phi_src = balance_source(phi, s, convention)?;
    let source = phi_src.iter().zip(&v.da_field).map(|(f, da)| f.dot(da)).collect();
    let euler = dstar(phi, s)?;
    BalanceReport::new(s.grid(), divergence, source, Some(interior_maxnorm(s.grid(), &euler)))
}

/// `J^i = (∂ℒ/∂x^μ_i) δx^μ − ℒ δa^i`, with `∂ℒ/∂x^μ_i` by central differences.
pub fn lagrangian_current<T: Real>(
    phi: &FundamentalOneForm<T>,
    s: &SampledSection<T>,
    v: &Variation<T>,
) -> Result<Vec<DVector<T>>> {
    check_variation(s, v)?;
    (0..s.node_count())
        .map(|n| {
            let j = s.point(n);
            let dl = lagrangian_momentum(phi, &j, Some(n))?;
            let l = phi.lagrangian_at(&j, Some(n))?;
            Ok(dl.tr_mul(&v.dx_field[n]) - &v.da_field[n] * l)
        })
        .collect()
}

/// `T^i_j = (∂ℒ/∂x^μ_i) x^μ_{,j} − ℒ δ^i_j`.
pub fn lagrangian_stress_energy<T: Real>(
    phi: &FundamentalOneForm<T>,
    s: &SampledSection<T>,
) -> Result<Vec<DMatrix<T>>> {
    (0..s.node_count())
        .map(|n| {
            let j = s.point(n);
            let dl = lagrangian_momentum(phi, &j, Some(n))?;
            let l = phi.lagrangian_at(&j, Some(n))?;
            Ok(dl.transpose() * &j.xdot - DMatrix::identity(s.p(), s.p()) * l)
        })
        .collect()
}

/// Conservation report for the Lagrangian current: divergence against a zero source.
pub fn lagrangian_conservation<T: Real>(
    phi: &FundamentalOneForm<T>,
    s: &SampledSection<T>,
    v: &Variation<T>,
) -> Result<BalanceReport<T>> {
    require_divergence_free(s.grid(), &v.da_field)?;
    let current = lagrangian_current(phi, s, v)?;
    let divergence = grid_divergence(&current, s.grid())?;
    let euler = dstar(phi, s)?;
    BalanceReport::new(
        s.grid(),
        divergence,
        vec![T::zero(); s.node_count()],
        Some(interior_maxnorm(s.grid(), &euler)),
    )
}

/// `J^i = Π^i_μ δx^μ − T δa^i` with source `F_μ x^μ_{,i} δa^i`, for exact kinetic work.
pub fn kinetic_current<T: Real>(
    phi: &FundamentalOneForm<T>,
    s: &SampledSection<T>,
    v: &Variation<T>,
) -> Result<(Vec<DVector<T>>, BalanceReport<T>)> {
    check_variation(s, v)?;
    if !phi.has_kinetic() {
        return Err(Error::Contract("kinetic current needs a kinetic energy".into()));
    }
    require_divergence_free(s.grid(), &v.da_field)?;
    let pi = phi.momentum_field(s)?;
    let force = phi.force_field(s)?;
    let current = (0..s.node_count())
        .map(|n| {
            let t = phi.kinetic_at(&s.point(n), Some(n))?;
            Ok(pi[n].tr_mul(&v.dx_field[n]) - &v.da_field[n] * t)
        })
        .collect::<Result<Vec<_>>>()?;
    let divergence = grid_divergence(&current, s.grid())?;
    let source = (0..s.node_count())
        .map(|n| (s.xdot_field()[n].tr_mul(&force[n])).dot(&v.da_field[n]))
        .collect();
    let euler = dstar(phi, s)?;
    let report = BalanceReport::new(s.grid(), divergence, source, Some(interior_maxnorm(s.grid(), &euler)))?;
    Ok((current, report))
}

/// Step used to differentiate a group action at the identity.
pub const ACTION_STEP: f64 = 1e-5;

/// Fundamental vector field of a group action at `(a, x)`: the derivative at `t = 0` of
/// `t ↦ action(t·generator, a, x)`, by central differences.
pub fn fundamental_vector_field<T, A>(
    action: A,
    generator: &DVector<T>,
    a: &DVector<T>,
    x: &DVector<T>,
) -> Result<(DVector<T>, DVector<T>)>
where
    T: Real,
    A: Fn(&DVector<T>, &DVector<T>, &DVector<T>) -> (DVector<T>, DVector<T>),
{
    let h = T::lit(ACTION_STEP);
    let eval = |t: T| -> Result<(DVector<T>, DVector<T>)> {
        let (ta, tx) = action(&(generator * t), a, x);
        if ta.len() != a.len() || tx.len() != x.len() {
            return Err(Error::Evaluation {
                what: "group action",
                node: None,
                location: a.iter().map(|v| v.as_f64()).collect(),
                reason: format!("returned ({}, {}), expected ({}, {})", ta.len(), tx.len(), a.len(), x.len()),
            });
        }
        if !ta.iter().chain(tx.iter()).all(|v| v.is_finite()) {
            return Err(Error::Evaluation {
                what: "group action",
                node: None,
                location: a.iter().map(|v| v.as_f64()).collect(),
                reason: format!("non-finite value at t = {t:e}"),
            });
        }
        Ok((ta, tx))
    };
    let (ap, xp) = eval(h)?;
    let (am, xm) = eval(-h)?;
    let inv = (T::two() * h).recip();
    Ok(((ap - am) * inv, (xp - xm) * inv))
}
