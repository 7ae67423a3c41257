//! Discrete 1-jets: parameter grids, jet points, sampled sections, variations and their
//! prolongations, and the integrability / immersion diagnostics.
//!
//! Grid-indexed fields are stored as one value per node, with nodes numbered so that
//! axis 0 varies fastest.

use nalgebra::{DMatrix, DVector};

use crate::numeric::grid_partial;
use crate::{Error, Real, Result};

/// Regular tensor-product grid over a box in parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterGrid<T> {
    lower: Vec<T>,
    upper: Vec<T>,
    samples: Vec<usize>,
    spacing: Vec<T>,
    strides: Vec<usize>,
}

impl<T: Real> ParameterGrid<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>, samples: Vec<usize>) -> Result<Self> {
        let p = samples.len();
        if p == 0 {
            return Err(Error::InvalidGrid("parameter dimension must be positive".into()));
        }
        if lower.len() != p || upper.len() != p {
            return Err(Error::dimension(
                "grid bounds",
                p,
                format!("{} lower / {} upper", lower.len(), upper.len()),
            ));
        }
        let mut spacing = Vec::with_capacity(p);
        for axis in 0..p {
            if samples[axis] < 3 {
                return Err(Error::TooFewNodes { axis, nodes: samples[axis] });
            }
            if !(lower[axis].is_finite() && upper[axis].is_finite()) {
                return Err(Error::InvalidGrid(format!("axis {axis} has non-finite bounds")));
            }
            let h = (upper[axis] - lower[axis]) / T::count(samples[axis] - 1);
            if !(h > T::zero()) {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis}: upper bound must exceed lower bound"
                )));
            }
            spacing.push(h);
        }
        let mut strides = Vec::with_capacity(p);
        let mut s = 1;
        for &n in &samples {
            strides.push(s);
            s *= n;
        }
        Ok(Self { lower, upper, samples, spacing, strides })
    }

    /// One-dimensional grid, the usual time window `[t0, t1]`.
    pub fn interval(lower: T, upper: T, samples: usize) -> Result<Self> {
        Self::new(vec![lower], vec![upper], vec![samples])
    }

    /// Parameter dimension `p`.
    pub fn dim(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[usize] {
        &self.samples
    }

    pub fn spacing(&self) -> &[T] {
        &self.spacing
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn max_spacing(&self) -> T {
        self.spacing.iter().fold(T::zero(), |m, &h| m.max(h))
    }

    pub fn node_count(&self) -> usize {
        self.samples.iter().product()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        self.samples
            .iter()
            .zip(&self.strides)
            .map(|(&n, &s)| (node / s) % n)
            .collect()
    }

    pub fn node_at(&self, index: &[usize]) -> usize {
        index.iter().zip(&self.strides).map(|(k, s)| k * s).sum()
    }

    /// Parameter coordinates `a` of a node.
    pub fn coords(&self, node: usize) -> DVector<T> {
        DVector::from_iterator(
            self.dim(),
            self.multi_index(node)
                .into_iter()
                .enumerate()
                .map(|(axis, k)| self.lower[axis] + self.spacing[axis] * T::count(k)),
        )
    }

    pub fn is_interior(&self, node: usize) -> bool {
        self.multi_index(node)
            .iter()
            .zip(&self.samples)
            .all(|(&k, &n)| k > 0 && k + 1 < n)
    }

    pub fn interior_mask(&self) -> Vec<bool> {
        (0..self.node_count()).map(|n| self.is_interior(n)).collect()
    }

    /// Cell measure `∏ h_i`, the discrete stand-in for the volume element.
    pub fn cell_measure(&self) -> T {
        self.spacing.iter().fold(T::one(), |acc, &h| acc * h)
    }

    /// Tensor-product trapezoidal weight of a node.
    pub fn trapezoid_weight(&self, node: usize) -> T {
        self.multi_index(node)
            .into_iter()
            .enumerate()
            .fold(T::one(), |acc, (axis, k)| {
                let h = self.spacing[axis];
                let w = if k == 0 || k + 1 == self.samples[axis] { h * T::half() } else { h };
                acc * w
            })
    }

    /// The same box with every spacing halved.
    pub fn refined(&self) -> Self {
        let samples = self.samples.iter().map(|&n| 2 * (n - 1) + 1).collect();
        Self::new(self.lower.clone(), self.upper.clone(), samples)
            .expect("refining a valid grid stays valid")
    }

    pub fn sample<V>(&self, mut f: impl FnMut(&DVector<T>) -> V) -> Vec<V> {
        (0..self.node_count()).map(|n| f(&self.coords(n))).collect()
    }
}

/// A point `(a^i, x^μ, x^μ_i)` of `J¹(O; M)`. `xdot` is the m×p matrix of contact
/// coordinates, row μ and column i.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet1Point<T: Real> {
    pub a: DVector<T>,
    pub x: DVector<T>,
    pub xdot: DMatrix<T>,
}

/// A single coordinate of `J¹(O; M)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JetCoord {
    Param(usize),
    Config(usize),
    Contact { mu: usize, i: usize },
}

impl<T: Real> Jet1Point<T> {
    pub fn new(a: DVector<T>, x: DVector<T>, xdot: DMatrix<T>) -> Result<Self> {
        if xdot.nrows() != x.len() || xdot.ncols() != a.len() {
            return Err(Error::dimension(
                "jet contact coordinates",
                format!("{}x{}", x.len(), a.len()),
                format!("{}x{}", xdot.nrows(), xdot.ncols()),
            ));
        }
        Ok(Self { a, x, xdot })
    }

    pub fn p(&self) -> usize {
        self.a.len()
    }

    pub fn m(&self) -> usize {
        self.x.len()
    }

    pub fn get(&self, c: JetCoord) -> T {
        match c {
            JetCoord::Param(i) => self.a[i],
            JetCoord::Config(mu) => self.x[mu],
            JetCoord::Contact { mu, i } => self.xdot[(mu, i)],
        }
    }

    /// Copy of this point with one coordinate shifted by `delta`.
    pub fn shifted(&self, c: JetCoord, delta: T) -> Self {
        let mut out = self.clone();
        match c {
            JetCoord::Param(i) => out.a[i] += delta,
            JetCoord::Config(mu) => out.x[mu] += delta,
            JetCoord::Contact { mu, i } => out.xdot[(mu, i)] += delta,
        }
        out
    }

    /// Copy with the contact coordinates scaled by `lambda`.
    pub fn with_scaled_velocity(&self, lambda: T) -> Self {
        Self { a: self.a.clone(), x: self.x.clone(), xdot: &self.xdot * lambda }
    }
}

/// A section `a ↦ (a, x(a), ẋ(a))` of the source projection, sampled on a grid.
/// Nothing ties `xdot_field` to the derivative of `x_field` unless the section came
/// from [`prolong_map`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSection<T: Real> {
    grid: ParameterGrid<T>,
    x_field: Vec<DVector<T>>,
    xdot_field: Vec<DMatrix<T>>,
}

impl<T: Real> SampledSection<T> {
    pub fn new(
        grid: ParameterGrid<T>,
        x_field: Vec<DVector<T>>,
        xdot_field: Vec<DMatrix<T>>,
    ) -> Result<Self> {
        let nodes = grid.node_count();
        if x_field.len() != nodes || xdot_field.len() != nodes {
            return Err(Error::dimension(
                "section node count",
                nodes,
                format!("{} x / {} xdot", x_field.len(), xdot_field.len()),
            ));
        }
        let m = x_field[0].len();
        let p = grid.dim();
        if x_field.iter().any(|x| x.len() != m) {
            return Err(Error::Dimension {
                context: "section x_field".into(),
                expected: format!("uniform length {m}"),
                found: "ragged field".into(),
            });
        }
        if let Some(bad) = xdot_field.iter().find(|d| d.nrows() != m || d.ncols() != p) {
            return Err(Error::dimension(
                "section xdot_field",
                format!("{m}x{p}"),
                format!("{}x{}", bad.nrows(), bad.ncols()),
            ));
        }
        Ok(Self { grid, x_field, xdot_field })
    }

    /// Samples a closed-form map and its declared derivative.
    pub fn from_fn(
        grid: ParameterGrid<T>,
        x: impl Fn(&DVector<T>) -> DVector<T>,
        xdot: impl Fn(&DVector<T>) -> DMatrix<T>,
    ) -> Result<Self> {
        let xf = grid.sample(&x);
        let df = grid.sample(&xdot);
        Self::new(grid, xf, df)
    }

    pub fn grid(&self) -> &ParameterGrid<T> {
        &self.grid
    }

    pub fn x_field(&self) -> &[DVector<T>] {
        &self.x_field
    }

    pub fn xdot_field(&self) -> &[DMatrix<T>] {
        &self.xdot_field
    }

    pub fn m(&self) -> usize {
        self.x_field[0].len()
    }

    pub fn p(&self) -> usize {
        self.grid.dim()
    }

    pub fn node_count(&self) -> usize {
        self.grid.node_count()
    }

    /// The jet point `s(a)` at a node.
    pub fn point(&self, node: usize) -> Jet1Point<T> {
        Jet1Point {
            a: self.grid.coords(node),
            x: self.x_field[node].clone(),
            xdot: self.xdot_field[node].clone(),
        }
    }

    /// Grid derivatives `∂x^μ/∂a^i` of the configuration field, as m×p matrices.
    pub fn x_gradient(&self) -> Result<Vec<DMatrix<T>>> {
        field_jacobian(&self.x_field, &self.grid)
    }

    /// Grid derivatives `∂x^μ_j/∂a^i` of the contact field, one m×p matrix per axis i.
    pub fn xdot_gradient(&self) -> Result<Vec<Vec<DMatrix<T>>>> {
        (0..self.p())
            .map(|axis| grid_partial(&self.xdot_field, axis, &self.grid))
            .collect()
    }
}

/// Stacks the p grid partials of a vector field into m×p Jacobians per node.
pub(crate) fn field_jacobian<T: Real>(
    field: &[DVector<T>],
    grid: &ParameterGrid<T>,
) -> Result<Vec<DMatrix<T>>> {
    let p = grid.dim();
    let m = field.first().map_or(0, |v| v.len());
    let partials = (0..p)
        .map(|axis| grid_partial(field, axis, grid))
        .collect::<Result<Vec<_>>>()?;
    Ok((0..grid.node_count())
        .map(|n| DMatrix::from_fn(m, p, |mu, i| partials[i][n][mu]))
        .collect())
}

/// 1-jet prolongation: attach the grid derivative of `x` as the contact coordinates.
pub fn prolong_map<T: Real>(
    x_samples: Vec<DVector<T>>,
    grid: &ParameterGrid<T>,
) -> Result<SampledSection<T>> {
    if x_samples.len() != grid.node_count() {
        return Err(Error::dimension("prolong_map samples", grid.node_count(), x_samples.len()));
    }
    let xdot = field_jacobian(&x_samples, grid)?;
    SampledSection::new(grid.clone(), x_samples, xdot)
}

/// `D[s]^μ_i = ∂x^μ/∂a^i − x^μ_i` at every node; vanishes on integrable sections.
pub fn integrability_defect<T: Real>(s: &SampledSection<T>) -> Result<Vec<DMatrix<T>>> {
    let grad = s.x_gradient()?;
    Ok(grad.into_iter().zip(s.xdot_field()).map(|(g, d)| g - d).collect())
}

/// Variation `δa^i ∂_i + δx^μ ∂_μ` on `O × M` along a section, optionally carrying the
/// contact components `δx^μ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Variation<T: Real> {
    pub da_field: Vec<DVector<T>>,
    pub dx_field: Vec<DVector<T>>,
    pub dxdot_field: Option<Vec<DMatrix<T>>>,
    prolonged: bool,
}

impl<T: Real> Variation<T> {
    pub fn new(
        grid: &ParameterGrid<T>,
        da_field: Vec<DVector<T>>,
        dx_field: Vec<DVector<T>>,
    ) -> Result<Self> {
        let nodes = grid.node_count();
        if da_field.len() != nodes || dx_field.len() != nodes {
            return Err(Error::dimension(
                "variation node count",
                nodes,
                format!("{} δa / {} δx", da_field.len(), dx_field.len()),
            ));
        }
        if let Some(bad) = da_field.iter().find(|d| d.len() != grid.dim()) {
            return Err(Error::dimension("variation δa", grid.dim(), bad.len()));
        }
        let m = dx_field[0].len();
        if dx_field.iter().any(|d| d.len() != m) {
            return Err(Error::Dimension {
                context: "variation δx".into(),
                expected: format!("uniform length {m}"),
                found: "ragged field".into(),
            });
        }
        Ok(Self { da_field, dx_field, dxdot_field: None, prolonged: false })
    }

    /// Purely vertical variation (`δa ≡ 0`).
    pub fn vertical(grid: &ParameterGrid<T>, dx_field: Vec<DVector<T>>) -> Result<Self> {
        let da = vec![DVector::zeros(grid.dim()); grid.node_count()];
        Self::new(grid, da, dx_field)
    }

    /// Builds `δx^μ = x^μ_j δa^j + δx̄^μ` from a parameter field and a substantial part,
    /// reading `x^μ_j` from the section's contact coordinates.
    pub fn split(
        s: &SampledSection<T>,
        da_field: Vec<DVector<T>>,
        dxbar_field: Vec<DVector<T>>,
    ) -> Result<Self> {
        if dxbar_field.len() != s.node_count() || da_field.len() != s.node_count() {
            return Err(Error::dimension(
                "split variation node count",
                s.node_count(),
                format!("{} δa / {} δx̄", da_field.len(), dxbar_field.len()),
            ));
        }
        if let Some(bad) = dxbar_field.iter().find(|d| d.len() != s.m()) {
            return Err(Error::dimension("split variation δx̄", s.m(), bad.len()));
        }
        if let Some(bad) = da_field.iter().find(|d| d.len() != s.p()) {
            return Err(Error::dimension("split variation δa", s.p(), bad.len()));
        }
        let dx = s
            .xdot_field()
            .iter()
            .zip(&da_field)
            .zip(&dxbar_field)
            .map(|((xd, da), bar)| xd * da + bar)
            .collect();
        Self::new(s.grid(), da_field, dx)
    }

    pub fn is_prolonged(&self) -> bool {
        self.prolonged
    }

    pub fn node_count(&self) -> usize {
        self.dx_field.len()
    }

    /// Linear combination `α·self + β·other` of two variations on the same grid.
    pub fn combine(&self, alpha: T, other: &Self, beta: T) -> Result<Self> {
        if self.node_count() != other.node_count() {
            return Err(Error::dimension("variation combine", self.node_count(), other.node_count()));
        }
        let lin = |u: &[DVector<T>], v: &[DVector<T>]| -> Vec<DVector<T>> {
            u.iter().zip(v).map(|(a, b)| a * alpha + b * beta).collect()
        };
        let dxdot = match (&self.dxdot_field, &other.dxdot_field) {
            (Some(u), Some(v)) => Some(u.iter().zip(v).map(|(a, b)| a * alpha + b * beta).collect()),
            _ => None,
        };
        Ok(Self {
            da_field: lin(&self.da_field, &other.da_field),
            dx_field: lin(&self.dx_field, &other.dx_field),
            prolonged: dxdot.is_some() && self.prolonged && other.prolonged,
            dxdot_field: dxdot,
        })
    }
}

/// Prolongs a variation: `δx^μ_i = ∂(δx^μ)/∂a^i` by grid differencing.
pub fn prolong_variation<T: Real>(v: &Variation<T>, grid: &ParameterGrid<T>) -> Result<Variation<T>> {
    if v.node_count() != grid.node_count() {
        return Err(Error::dimension("prolong_variation", grid.node_count(), v.node_count()));
    }
    let dxdot = field_jacobian(&v.dx_field, grid)?;
    Ok(Variation {
        da_field: v.da_field.clone(),
        dx_field: v.dx_field.clone(),
        dxdot_field: Some(dxdot),
        prolonged: true,
    })
}

/// Relative threshold on singular values for numerical rank.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Numerical rank p of the m×p matrix `xdot` at every node.
pub fn immersion_rank_check<T: Real>(s: &SampledSection<T>) -> Result<Vec<bool>> {
    let (m, p) = (s.m(), s.p());
    if p > m {
        return Err(Error::ImmersionImpossible { p, m });
    }
    let tol = T::lit(RANK_TOLERANCE);
    Ok(s.xdot_field()
        .iter()
        .map(|d| {
            let sv = d.clone().svd(false, false).singular_values;
            let largest = sv.iter().fold(T::zero(), |a, &b| a.max(b));
            let smallest = sv.iter().fold(T::max_value().unwrap_or(largest), |a, &b| a.min(b));
            largest > T::zero() && smallest > tol * largest
        })
        .collect())
}
