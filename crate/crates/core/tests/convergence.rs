//! Refinement studies: every discretized identity should converge at its designed order.

mod common;

use std::f64::consts::PI;

use common::{curve, oscillator, time_translation};
use jetmech::dynamics::{dstar, gamma_tensor, virtual_work, FundamentalOneForm};
use jetmech::jet::{integrability_defect, prolong_map, prolong_variation, Jet1Point, ParameterGrid, SampledSection, Variation};
use jetmech::noether::{balance_check, lagrangian_conservation, TraceConvention};
use jetmech::numeric::{max_abs, trapezoid};
use jetmech::pointmech::{energy_drift, integrate_newton, power_balance_report, PointMassSystem};
use jetmech::rigidbody::{
    hat, integrate_rigid_body, noninertial_state, rigid_power_balance, to_body_frame, DynamicalComponents,
    RigidBodyParams, RigidBodyState, Iso3Element,
};
use jetmech::numeric::grid_partial;
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

fn assert_ratio(coarse: f64, fine: f64, lo: f64, hi: f64) {
    let ratio = coarse / fine;
    assert!((lo..=hi).contains(&ratio), "ratio {ratio} ({coarse:e} / {fine:e}) outside [{lo}, {hi}]");
}

#[test]
fn sampled_derivative_defect_is_second_order() {
    let defect = |n: usize| {
        let grid: ParameterGrid<f64> = ParameterGrid::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![n, n]).unwrap();
        let s = SampledSection::from_fn(
            grid.clone(),
            |a| DVector::from_vec(vec![(2.0 * a[0]).sin() * a[1], (a[0] - a[1]).exp()]),
            |a| {
                let e = (a[0] - a[1]).exp();
                DMatrix::from_row_slice(2, 2, &[2.0 * (2.0 * a[0]).cos() * a[1], (2.0 * a[0]).sin(), e, -e])
            },
        )
        .unwrap();
        let d = integrability_defect(&s).unwrap();
        max_abs((0..d.len()).filter(|&k| grid.is_interior(k)).map(|k| d[k].amax()))
    };
    assert_ratio(defect(21), defect(41), 3.2, 4.8);

    let grid: ParameterGrid<f64> = ParameterGrid::interval(0.0, 1.0, 11).unwrap();
    let s = prolong_map(grid.sample(|a| DVector::from_element(1, a[0].cos())), &grid).unwrap();
    assert!(integrability_defect(&s).unwrap().iter().all(|d| d.amax() == 0.0));
}

#[test]
fn virtual_work_integrates_by_parts() {
    // δa = 0 and δx vanishing at both ends: ∫ φ(δx) = ∫ D*φ · δx up to O(h²).
    let phi = FundamentalOneForm::new(
        |j: &Jet1Point<f64>| j.x.map(|v| -v.sin()),
        |j: &Jet1Point<f64>| j.xdot.map(|v| v + 0.2 * v * v * v),
    );
    let gap = |n: usize| {
        let grid: ParameterGrid<f64> = ParameterGrid::interval(0.0, 1.0, n).unwrap();
        let s = prolong_map(grid.sample(|a| DVector::from_vec(vec![(3.0 * a[0]).cos(), a[0] * a[0]])), &grid).unwrap();
        let dx = grid.sample(|a| DVector::from_vec(vec![(PI * a[0]).sin(), a[0] * (1.0 - a[0])]));
        let v = prolong_variation(&Variation::vertical(&grid, dx.clone()).unwrap(), &grid).unwrap();
        let work = virtual_work(&phi, &s, &v).unwrap();
        let d = dstar(&phi, &s).unwrap();
        let integrand: Vec<f64> = d.iter().zip(&dx).map(|(d, x)| d.dot(x)).collect();
        (work - trapezoid(&integrand, &grid).unwrap()).abs()
    };
    let (coarse, fine) = (gap(41), gap(81));
    assert!(fine <= 1e-3);
    assert_ratio(coarse, fine, 3.2, 4.8);
}

#[test]
fn quadratic_kinetic_energy_has_constant_gamma() {
    let metric = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
    let g2 = metric.clone();
    let phi = FundamentalOneForm::new(|j: &Jet1Point<f64>| DVector::zeros(j.m()), move |j: &Jet1Point<f64>| &g2 * &j.xdot);
    let point = |a: f64, x: [f64; 2], v: [f64; 2]| {
        Jet1Point::new(DVector::from_element(1, a), DVector::from_row_slice(&x), DMatrix::from_row_slice(2, 1, &v)).unwrap()
    };
    let reference = gamma_tensor(&phi, &point(0.0, [0.0, 0.0], [0.0, 0.0]), 1e-5).unwrap();
    for (a, x, v) in [(0.3, [1.0, -2.0], [0.5, 3.0]), (-4.0, [0.1, 0.2], [-7.0, 1.0])] {
        let g = gamma_tensor(&phi, &point(a, x, v), 1e-5).unwrap();
        assert!(g.max_difference(&reference) <= 1e-8);
        assert!(g.symmetry_residual <= 1e-8);
    }
    for mu in 0..2 {
        for nu in 0..2 {
            assert!((reference.get(0, 0, mu, nu) - metric[(mu, nu)]).abs() <= 1e-8);
        }
    }
}

#[test]
fn exact_case_balance_matches_conservation() {
    // With a Lagrangian, the balance residual and the conserved-current divergence are
    // two discretizations of the same identity: they agree to O(h²).
    let phi = oscillator(1.0);
    let gap = |n: usize| {
        let s = curve(0.0, 2.0 * PI, n, |t| vec![(t + 0.4).cos(), 0.5 * t.sin()], |t| vec![-(t + 0.4).sin(), 0.5 * t.cos()]);
        let tt = time_translation(&s);
        let b = balance_check(&phi, &s, &tt, TraceConvention::Half).unwrap();
        let c = lagrangian_conservation(&phi, &s, &tt).unwrap();
        (b.residual_maxnorm - c.residual_maxnorm).abs()
    };
    let (coarse, fine) = (gap(201), gap(401));
    assert!(fine <= 1e-3);
    assert_ratio(coarse, fine, 3.2, 4.8);
}

#[test]
fn point_mass_orders() {
    let sys = PointMassSystem::euclidean(1.0, 1, |_, x: &DVector<f64>, v: &DVector<f64>| -x - v * 0.1).unwrap();
    let residual = |h| {
        let tr = integrate_newton(&sys, &DVector::from_element(1, 1.0), &DVector::zeros(1), 0.0, 5.0, h).unwrap();
        power_balance_report(&sys, &tr).unwrap().residual_maxnorm
    };
    assert_ratio(residual(1e-2), residual(5e-3), 3.2, 4.8);

    let conservative = PointMassSystem::euclidean(1.0, 1, |_, x: &DVector<f64>, _: &DVector<f64>| -x * x * x)
        .unwrap()
        .with_potential(|x| 0.25 * x[0].powi(4));
    let drift = |h| {
        let tr = integrate_newton(&conservative, &DVector::from_element(1, 1.5), &DVector::zeros(1), 0.0, 10.0, h).unwrap();
        energy_drift(&conservative, &tr).unwrap()
    };
    let (coarse, fine) = (drift(0.1), drift(0.05));
    // At least fourth order; the leading drift term of RK4 may cancel on some problems.
    assert!(coarse / fine >= 12.8, "{}", coarse / fine);
    assert!(drift(1e-3) <= 1e-9);
}

fn asymmetric_top(c: f64) -> RigidBodyParams<f64> {
    RigidBodyParams::new(
        2.0,
        Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 3.0)),
        |t: f64, _: &RigidBodyState<f64>| Vector3::new(t.cos(), 0.0, -1.0),
        move |t: f64, s: &RigidBodyState<f64>| s.w_body * -c + Vector3::new(0.0, 0.2 * t.sin(), 0.0),
    )
    .unwrap()
}

fn spinning() -> RigidBodyState<f64> {
    RigidBodyState {
        g: Iso3Element::identity(),
        v: Vector3::new(0.1, 0.0, 0.3),
        w_body: Vector3::new(1.0, 0.5, -0.3),
    }
}

#[test]
fn rigid_power_balance_is_second_order() {
    let params = asymmetric_top(0.1);
    let residual = |h| {
        let tr = integrate_rigid_body(&params, &spinning(), 0.0, 4.0, h).unwrap();
        rigid_power_balance(&params, &tr).unwrap().residual_maxnorm
    };
    assert_ratio(residual(1e-2), residual(5e-3), 3.2, 4.8);
}

#[test]
fn free_top_energy_drift_is_fourth_order() {
    let params = RigidBodyParams::free(1.0, Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 3.0))).unwrap();
    let drift = |h| {
        let tr = integrate_rigid_body(&params, &spinning(), 0.0, 10.0, h).unwrap();
        let t0 = params.kinetic_energy(&tr.states[0]);
        max_abs(tr.states.iter().map(|s| params.kinetic_energy(s) - t0))
    };
    let (d1, d2, d3) = (drift(0.1), drift(0.05), drift(0.025));
    assert_ratio(d1, d2, 12.8, 19.2);
    assert_ratio(d2, d3, 12.8, 19.2);
}

#[test]
fn body_frame_balance_cancels_the_fictitious_terms() {
    // Inertial data F, p = m v, τ = R τ₀, S = R L₀ are mapped into the moving frame; the
    // corrected rates ṗ₀ + ω×p₀ and Ṡ₀ + ω×S₀ must reproduce the body-frame loads.
    let params = asymmetric_top(0.1);
    let residual = |h| {
        let tr = integrate_rigid_body(&params, &spinning(), 0.0, 3.0, h).unwrap();
        let mut frames = Vec::with_capacity(tr.len());
        for (k, s) in tr.states.iter().enumerate() {
            let t = tr.time(k);
            let r = *s.g.rotation();
            let inertial = DynamicalComponents {
                force: params.force(t, s).unwrap(),
                momentum: s.v * params.mass(),
                torque: r * params.torque(t, s).unwrap(),
                spin: r * params.angular_momentum(s),
            };
            frames.push(noninertial_state(&to_body_frame(&inertial, &s.g, &(r * hat(&s.w_body))), &s.w_body));
        }
        let p0: Vec<DVector<f64>> = frames.iter().map(|f| DVector::from_column_slice(f.momentum.as_slice())).collect();
        let s0: Vec<DVector<f64>> = frames.iter().map(|f| DVector::from_column_slice(f.spin.as_slice())).collect();
        let (dp, ds) = (grid_partial(&p0, 0, tr.grid()).unwrap(), grid_partial(&s0, 0, tr.grid()).unwrap());
        let mut worst = 0.0f64;
        for k in 1..tr.len() - 1 {
            let w = tr.states[k].w_body;
            let f = &frames[k];
            let lin = Vector3::new(dp[k][0], dp[k][1], dp[k][2]) + w.cross(&f.momentum) - f.force;
            let ang = Vector3::new(ds[k][0], ds[k][1], ds[k][2]) + w.cross(&f.spin) - f.torque;
            worst = worst.max(lin.amax()).max(ang.amax());
        }
        worst
    };
    let (coarse, fine) = (residual(1e-2), residual(5e-3));
    assert!(fine <= 1e-4);
    assert_ratio(coarse, fine, 3.2, 4.8);
}
