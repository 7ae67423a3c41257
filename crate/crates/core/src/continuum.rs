//! Finite strain in a constant metric: the Green–Lagrange tensor of a displacement field,
//! and the comparison of two sections' pulled-back metrics on parameter space.

use nalgebra::{DMatrix, DVector};

use crate::jet::{field_jacobian, ParameterGrid, SampledSection};
use crate::{Error, Real, Result};

/// Relative tolerance on `g − gᵀ` for a metric to count as symmetric.
pub const METRIC_SYMMETRY_TOLERANCE: f64 = 1e-12;

/// `u(x) = y(x) − x` sampled on a grid over the reference body, so the grid dimension
/// equals the spatial dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField<T: Real> {
    grid: ParameterGrid<T>,
    u_field: Vec<DVector<T>>,
}

impl<T: Real> DisplacementField<T> {
    pub fn new(grid: ParameterGrid<T>, u_field: Vec<DVector<T>>) -> Result<Self> {
        if u_field.len() != grid.node_count() {
            return Err(Error::dimension("displacement node count", grid.node_count(), u_field.len()));
        }
        let m = grid.dim();
        if let Some(bad) = u_field.iter().find(|u| u.len() != m) {
            return Err(Error::dimension("displacement vector", m, bad.len()));
        }
        Ok(Self { grid, u_field })
    }

    pub fn from_fn(grid: ParameterGrid<T>, u: impl Fn(&DVector<T>) -> DVector<T>) -> Result<Self> {
        let field = grid.sample(u);
        Self::new(grid, field)
    }

    /// Displacement of a deformation `x ↦ y(x)`.
    pub fn from_deformation(grid: ParameterGrid<T>, y: impl Fn(&DVector<T>) -> DVector<T>) -> Result<Self> {
        Self::from_fn(grid, |x| y(x) - x)
    }

    pub fn grid(&self) -> &ParameterGrid<T> {
        &self.grid
    }

    pub fn u_field(&self) -> &[DVector<T>] {
        &self.u_field
    }

    /// `∂u^κ/∂x^ν` at every node.
    pub fn gradient(&self) -> Result<Vec<DMatrix<T>>> {
        field_jacobian(&self.u_field, &self.grid)
    }
}

fn check_metric<T: Real>(what: &'static str, g: &DMatrix<T>, m: usize) -> Result<()> {
    if g.nrows() != m || g.ncols() != m {
        return Err(Error::dimension(what, format!("{m}x{m}"), format!("{}x{}", g.nrows(), g.ncols())));
    }
    if !g.iter().all(|v| v.is_finite()) {
        return Err(Error::Contract(format!("{what} has non-finite entries")));
    }
    let asym = (g - g.transpose()).amax();
    if asym > T::lit(METRIC_SYMMETRY_TOLERANCE) * T::one().max(g.amax()) {
        return Err(Error::Contract(format!("{what} is not symmetric (residual {:e})", asym.as_f64())));
    }
    Ok(())
}

fn symmetrized<T: Real>(e: DMatrix<T>) -> DMatrix<T> {
    (&e + e.transpose()) * T::half()
}

/// `E = G̃ᵀg + gG̃ + G̃ᵀgG̃` with `G̃ = ∇u`, i.e. `y*g − g` for `y = x + u` and constant `g`.
/// No ½ is applied. The result is symmetrized at every node.
pub fn green_strain<T: Real>(u: &DisplacementField<T>, metric: &DMatrix<T>) -> Result<Vec<DMatrix<T>>> {
    check_metric("strain metric", metric, u.grid.dim())?;
    Ok(u
        .gradient()?
        .into_iter()
        .map(|du| {
            let gdu = metric * &du;
            let e = gdu.transpose() + &gdu + du.transpose() * &gdu;
            symmetrized(e)
        })
        .collect())
}

/// `E_ij = x̄^μ_i x̄^ν_j g_μν(x̄) − x^μ_i x^ν_j g_μν(x)` nodewise, using each section's
/// contact coordinates. Without the classical ½.
pub fn parameter_strain<T: Real>(
    x_sec: &SampledSection<T>,
    xbar_sec: &SampledSection<T>,
    metric_eval: impl Fn(&DVector<T>) -> DMatrix<T>,
) -> Result<Vec<DMatrix<T>>> {
    if x_sec.grid() != xbar_sec.grid() {
        return Err(Error::InvalidGrid("parameter_strain sections live on different grids".into()));
    }
    if x_sec.m() != xbar_sec.m() {
        return Err(Error::dimension("parameter_strain configuration dimension", x_sec.m(), xbar_sec.m()));
    }
    let m = x_sec.m();
    let pulled = |s: &SampledSection<T>, node: usize| -> Result<DMatrix<T>> {
        let x = &s.x_field()[node];
        let g = metric_eval(x);
        check_metric("parameter_strain metric", &g, m).map_err(|e| Error::Evaluation {
            what: "metric",
            node: Some(node),
            location: x.iter().map(|v| v.as_f64()).collect(),
            reason: e.to_string(),
        })?;
        let d = &s.xdot_field()[node];
        Ok(d.transpose() * g * d)
    };
    (0..x_sec.node_count())
        .map(|n| Ok(symmetrized(pulled(xbar_sec, n)? - pulled(x_sec, n)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::so3_exp;
    use nalgebra::{Matrix3, Vector3};

    fn cube() -> ParameterGrid<f64> {
        ParameterGrid::new(vec![-1.0; 3], vec![1.0; 3], vec![6, 5, 7]).unwrap()
    }

    fn linear(a: DMatrix<f64>) -> DisplacementField<f64> {
        DisplacementField::from_deformation(cube(), move |x| &a * x).unwrap()
    }

    #[test]
    fn zero_displacement_has_no_strain() {
        let u = DisplacementField::from_fn(cube(), |_| DVector::zeros(3)).unwrap();
        for e in green_strain(&u, &DMatrix::identity(3, 3)).unwrap() {
            assert_eq!(e, DMatrix::zeros(3, 3));
        }
    }

    #[test]
    fn linear_deformation_matches_pullback() {
        let a = DMatrix::from_row_slice(3, 3, &[1.1, 0.2, -0.1, 0.0, 0.9, 0.3, 0.05, -0.2, 1.2]);
        let g = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 1.5]);
        let u = linear(a.clone());
        let oracle = DMatrix::from_fn(3, 3, |mu, nu| {
            let mut s = 0.0;
            for k in 0..3 {
                for l in 0..3 {
                    s += a[(k, mu)] * a[(l, nu)] * g[(k, l)];
                }
            }
            s - g[(mu, nu)]
        });
        for e in green_strain(&u, &g).unwrap() {
            assert!((&e - &oracle).amax() <= 1e-12);
            assert_eq!(e, e.transpose());
        }
        let euclid = a.transpose() * &a - DMatrix::identity(3, 3);
        for e in green_strain(&u, &DMatrix::identity(3, 3)).unwrap() {
            assert!((e - &euclid).amax() <= 1e-12);
        }
    }

    #[test]
    fn rigid_motions_are_strain_free() {
        let r: Matrix3<f64> = so3_exp(&Vector3::new(0.4, -1.3, 0.8));
        let r = DMatrix::from_iterator(3, 3, r.iter().copied());
        let shift = DVector::from_vec(vec![0.5, -2.0, 1.0]);
        let u = DisplacementField::from_deformation(cube(), |x| &r * x + &shift).unwrap();
        for e in green_strain(&u, &DMatrix::identity(3, 3)).unwrap() {
            assert!(e.amax() <= 1e-10);
        }
    }

    #[test]
    fn nonlinear_displacement_converges() {
        let err = |n: usize| {
            let grid: ParameterGrid<f64> = ParameterGrid::new(vec![0.0; 2], vec![1.0; 2], vec![n, n]).unwrap();
            let u = DisplacementField::from_fn(grid.clone(), |x: &DVector<f64>| DVector::from_vec(vec![0.1 * x[1].sin(), 0.2 * x[0] * x[0]]))
                .unwrap();
            let e = green_strain(&u, &DMatrix::identity(2, 2)).unwrap();
            (0..grid.node_count())
                .map(|k| {
                    let x = grid.coords(k);
                    let f = DMatrix::from_row_slice(2, 2, &[1.0, 0.1 * x[1].cos(), 0.4 * x[0], 1.0]);
                    (&e[k] - (f.transpose() * &f - DMatrix::identity(2, 2))).amax()
                })
                .fold(0.0, f64::max)
        };
        let ratio = err(21) / err(41);
        assert!((3.0..=5.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn bad_metrics_are_rejected() {
        let u = linear(DMatrix::identity(3, 3));
        assert!(matches!(green_strain(&u, &DMatrix::identity(2, 2)), Err(Error::Dimension { .. })));
        let mut skew = DMatrix::identity(3, 3);
        skew[(0, 1)] = 0.5;
        assert!(matches!(green_strain(&u, &skew), Err(Error::Contract(_))));
        assert!(DisplacementField::new(cube(), vec![DVector::zeros(2); cube().node_count()]).is_err());
    }

    fn line(scale: f64) -> SampledSection<f64> {
        let grid = ParameterGrid::interval(0.0, 1.0, 11).unwrap();
        SampledSection::from_fn(grid, move |a| a * scale, move |_| DMatrix::from_element(1, 1, scale)).unwrap()
    }

    #[test]
    fn parameter_strain_examples() {
        let one = |_: &DVector<f64>| DMatrix::identity(1, 1);
        for e in parameter_strain(&line(1.0), &line(1.0), one).unwrap() {
            assert_eq!(e[(0, 0)], 0.0);
        }
        for e in parameter_strain(&line(1.0), &line(2.0), one).unwrap() {
            assert_eq!(e[(0, 0)], 3.0);
        }
    }

    #[test]
    fn parameter_strain_of_rigid_image_vanishes() {
        let grid = ParameterGrid::new(vec![0.0; 2], vec![1.0; 2], vec![5, 4]).unwrap();
        let x = |a: &DVector<f64>| DVector::from_vec(vec![a[0], a[1], a[0] * a[1]]);
        let dx = |a: &DVector<f64>| DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, a[1], a[0]]);
        let r: Matrix3<f64> = so3_exp(&Vector3::new(0.2, 0.7, -0.5));
        let r = DMatrix::from_iterator(3, 3, r.iter().copied());
        let base = SampledSection::from_fn(grid.clone(), x, dx).unwrap();
        let (rx, rd) = (r.clone(), r.clone());
        let moved = SampledSection::from_fn(grid, move |a| &rx * x(a) + DVector::repeat(3, 1.0), move |a| &rd * dx(a))
            .unwrap();
        for e in parameter_strain(&base, &moved, |_| DMatrix::identity(3, 3)).unwrap() {
            assert!(e.amax() <= 1e-10);
        }
    }

    #[test]
    fn parameter_strain_errors() {
        let other = SampledSection::from_fn(
            ParameterGrid::interval(0.0, 2.0, 11).unwrap(),
            |a| a.clone(),
            |_| DMatrix::identity(1, 1),
        )
        .unwrap();
        let one = |_: &DVector<f64>| DMatrix::identity(1, 1);
        assert!(matches!(parameter_strain(&line(1.0), &other, one), Err(Error::InvalidGrid(_))));
        let bad = |_: &DVector<f64>| DMatrix::from_element(1, 1, f64::NAN);
        assert!(matches!(
            parameter_strain(&line(1.0), &line(2.0), bad),
            Err(Error::Evaluation { what: "metric", node: Some(0), .. })
        ));
    }
}
