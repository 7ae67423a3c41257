//! Builds the system a scenario describes, simulates it and evaluates its diagnostics.

use jetmech::continuum::{green_strain, DisplacementField};
use jetmech::dynamics::{dstar, euler_homogeneity_check, kinetic_exactness_check, lagrange_bracket, FundamentalOneForm};
use jetmech::jet::{Jet1Point, ParameterGrid, SampledSection};
use jetmech::noether::{
    balance_check, balance_source, lagrangian_conservation, noether_map_matrix, BalanceReport, GroupActionLinearization,
    TraceConvention,
};
use jetmech::numeric::{grid_divergence, max_abs, pairwise_sum, so3_exp, ConvergenceRatio};
use jetmech::pointmech::{energy_drift, integrate_newton, power_balance_report, PointMassSystem};
use jetmech::rigidbody::{integrate_rigid_body, rigid_power_balance, Iso3Element, RigidBodyParams, RigidBodyState};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use thiserror::Error;

use crate::catalog::Law;
use crate::report::{DiagnosticSummary, OrderCheck, RefineReport, RunReport, Table, FLOOR_FRACTION};
use crate::scenario::{Diagnostic, GridSpec, Scenario, SectionSpec, System};

/// Finite-difference step for the γ tensor and momentum derivatives.
const JET_FD_STEP: f64 = 1e-5;
const HOMOGENEITY_SCALES: [f64; 3] = [0.5, 2.0, 3.0];

#[derive(Debug, Error)]
#[error("scenario `{scenario}`: {stage}: {source}")]
pub struct RunError {
    pub scenario: String,
    pub stage: String,
    #[source]
    pub source: Box<jetmech::Error>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: RunReport,
    pub tables: Vec<Table>,
}

struct Measurement {
    maxnorm: f64,
    l2: Option<f64>,
    detail: String,
}

impl Measurement {
    fn nodewise(maxnorm: f64, detail: String) -> Self {
        Self { maxnorm, l2: None, detail }
    }
}

struct Ctx<'a> {
    scenario: &'a Scenario,
    tables: Vec<Table>,
}

impl Ctx<'_> {
    fn check<T>(&self, stage: &str, r: jetmech::Result<T>) -> Result<T, RunError> {
        r.map_err(|source| RunError { scenario: self.scenario.name.clone(), stage: stage.to_string(), source: Box::new(source) })
    }
}

pub fn run(scenario: &Scenario) -> Result<RunOutput, RunError> {
    let mut ctx = Ctx { scenario, tables: Vec::new() };
    let measurements = match &scenario.system {
        System::PointMass { .. } => point_mass(&mut ctx)?,
        System::RigidBody { .. } => rigid_body(&mut ctx)?,
        System::GeneralJet { .. } => general_jet(&mut ctx)?,
        System::Strain { .. } => strain(&mut ctx)?,
    };
    let diagnostics = scenario
        .diagnostics
        .iter()
        .zip(measurements)
        .map(|(&d, m)| {
            let tolerance = scenario.tolerance(d);
            DiagnosticSummary {
                diagnostic: d,
                maxnorm: m.maxnorm,
                l2: m.l2,
                tolerance,
                passed: m.maxnorm <= tolerance,
                ratio: None,
                detail: m.detail,
            }
        })
        .collect();
    let report = RunReport { scenario: scenario.name.clone(), kind: scenario.kind, resolution: scenario.resolution(), diagnostics };
    Ok(RunOutput { report, tables: ctx.tables })
}

/// Runs `levels` times, refining between runs, and judges the observed ratios.
pub fn refine(scenario: &Scenario, levels: usize) -> Result<RefineReport, RunError> {
    if levels < 2 {
        return Err(RunError {
            scenario: scenario.name.clone(),
            stage: "refine".into(),
            source: Box::new(jetmech::Error::Contract(format!("refinement needs at least 2 levels, got {levels}"))),
        });
    }
    let mut reports: Vec<RunReport> = Vec::with_capacity(levels);
    let mut current = scenario.clone();
    for _ in 0..levels {
        let mut report = run(&current)?.report;
        if let Some(prev) = reports.last() {
            for (d, p) in report.diagnostics.iter_mut().zip(&prev.diagnostics) {
                let floor = FLOOR_FRACTION * d.tolerance;
                d.ratio = Some(ConvergenceRatio::between(p.maxnorm, d.maxnorm, floor));
            }
        }
        reports.push(report);
        current = current.refined();
    }
    let checks = scenario
        .diagnostics
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let ratios = reports[1..].iter().filter_map(|r| r.diagnostics[i].ratio).collect();
            OrderCheck::new(d, FLOOR_FRACTION * scenario.tolerance(d), ratios)
        })
        .collect();
    Ok(RefineReport { scenario: scenario.name.clone(), levels: reports, checks })
}

fn sum_forces(laws: &[Law], mass: f64, t: f64, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    laws.iter().fold(DVector::zeros(x.len()), |acc, l| acc + l.force(mass, t, x, v))
}

fn sum_potentials(laws: &[Law], mass: f64, x: &DVector<f64>) -> f64 {
    laws.iter().filter_map(|l| l.potential(mass, x)).sum()
}

/// Drift of a conserved quantity relative to its initial value (absolute when that is zero).
fn relative_drift(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut values = values.into_iter();
    let Some(q0) = values.next() else { return 0.0 };
    let scale = if q0 != 0.0 { q0.abs() } else { 1.0 };
    max_abs(values.map(|q| q - q0)) / scale
}

fn point_mass(ctx: &mut Ctx) -> Result<Vec<Measurement>, RunError> {
    let s = ctx.scenario;
    let System::PointMass { mass, metric, x0, v0, forces, time } = &s.system else { unreachable!() };
    let (mass, laws) = (*mass, forces.clone());
    let mut sys = ctx.check("system", PointMassSystem::new(mass, metric.clone(), move |t, x, v| sum_forces(&laws, mass, t, x, v)))?;
    if s.is_conservative() {
        let laws = forces.clone();
        sys = sys.with_potential(move |x| sum_potentials(&laws, mass, x));
    }
    let tr = ctx.check("integration", integrate_newton(&sys, x0, v0, time.start, time.end, time.step))?;
    let power = ctx.check("power balance", power_balance_report(&sys, &tr))?;

    let d = x0.len();
    let mut header = vec!["t".to_string()];
    header.extend((0..d).map(|i| format!("x{i}")));
    header.extend((0..d).map(|i| format!("v{i}")));
    header.extend(["T", "power", "residual"].map(String::from));
    let residual = power.residual_field();
    let rows = (0..tr.len())
        .map(|k| {
            let mut row = vec![tr.time(k)];
            row.extend(tr.x[k].iter().chain(tr.v[k].iter()));
            row.extend([jetmech::pointmech::kinetic_energy(&sys, &tr.v[k]), power.source_field[k], residual[k]]);
            row
        })
        .collect();
    ctx.tables.push(Table { name: "trajectory".into(), header, rows });

    let section = ctx.check("section", tr.section())?;
    let phi = sys.one_form();
    s.diagnostics
        .iter()
        .map(|&diag| match diag {
            Diagnostic::Conservation => {
                let e = tr.x.iter().zip(&tr.v).map(|(x, v)| sys.total_energy(x, v).expect("conservative system"));
                let drift = relative_drift(e);
                let absolute = energy_drift(&sys, &tr).expect("conservative system");
                Ok(Measurement::nodewise(drift, format!("total energy drift {absolute:e} (absolute)")))
            }
            other => jet_diagnostic(ctx, other, &phi, &section),
        })
        .collect()
}

fn general_jet(ctx: &mut Ctx) -> Result<Vec<Measurement>, RunError> {
    let s = ctx.scenario;
    let System::GeneralJet { grid, section, momentum, forces } = &s.system else { unreachable!() };
    let grid = ctx.check("grid", build_grid(grid))?;
    let m = section.m();
    let mass = match momentum {
        Law::MassMomentum { m } => *m,
        _ => 1.0,
    };
    let inertia = momentum.momentum_matrix(m);
    let (laws, inertia2, inertia3) = (forces.clone(), inertia.clone(), inertia.clone());
    let kinetic = move |j: &Jet1Point<f64>| 0.5 * (j.xdot.transpose() * &inertia3 * &j.xdot).trace();
    let mut phi = FundamentalOneForm::new(
        move |j: &Jet1Point<f64>| sum_forces(&laws, mass, j.a[0], &j.x, &j.xdot.column(0).into_owned()),
        move |j: &Jet1Point<f64>| &inertia2 * &j.xdot,
    )
    .with_kinetic(kinetic.clone());
    if s.is_conservative() {
        let laws = forces.clone();
        phi = phi.with_lagrangian(move |j| kinetic(j) - sum_potentials(&laws, mass, &j.x));
    }
    let sampled = ctx.check("section", sample_section(grid, section))?;
    s.diagnostics.iter().map(|&d| jet_diagnostic(ctx, d, &phi, &sampled)).collect()
}

fn build_grid(g: &GridSpec) -> jetmech::Result<ParameterGrid<f64>> {
    ParameterGrid::new(g.lower.clone(), g.upper.clone(), g.samples.clone())
}

fn sample_section(grid: ParameterGrid<f64>, spec: &SectionSpec) -> jetmech::Result<SampledSection<f64>> {
    match spec {
        SectionSpec::Affine { offset, gradient } => SampledSection::from_fn(grid, |a| offset + gradient * a, |_| gradient.clone()),
        SectionSpec::PlaneWave { amplitude, wavevector, phase } => {
            let theta = |a: &DVector<f64>| wavevector.dot(a) + phase;
            SampledSection::from_fn(grid, |a| amplitude * theta(a).sin(), |a| amplitude * wavevector.transpose() * theta(a).cos())
        }
    }
}

fn grid_columns(grid: &ParameterGrid<f64>, n: usize) -> Vec<f64> {
    grid.coords(n).iter().copied().collect()
}

fn coordinate_header(p: usize) -> Vec<String> {
    (0..p).map(|i| format!("a{i}")).collect()
}

/// Interior max and grid `L²` norms of a nonnegative nodal magnitude.
fn interior_norms(grid: &ParameterGrid<f64>, magnitude: impl Fn(usize) -> f64) -> (f64, f64) {
    let interior: Vec<f64> = (0..grid.node_count()).filter(|&n| grid.is_interior(n)).map(magnitude).collect();
    let squares: Vec<f64> = interior.iter().map(|r| r * r * grid.cell_measure()).collect();
    (max_abs(interior.iter().copied()), pairwise_sum(&squares).sqrt())
}

fn action(s: &SampledSection<f64>, gens: &[crate::scenario::Generator]) -> jetmech::Result<GroupActionLinearization<f64>> {
    let (p, g) = (s.p(), gens.len());
    let columns = |x: &DVector<f64>, param: bool| {
        let cols: Vec<DVector<f64>> = gens.iter().map(|gen| {
            let (da, dx) = gen.at(p, x);
            if param { da } else { dx }
        }).collect();
        DMatrix::from_columns(&cols)
    };
    GroupActionLinearization::along(s, g, |_, x| columns(x, true), |_, x| columns(x, false))
}

/// Rows of a balance-style table: generator, node, coordinates, extra columns, divergence,
/// source, residual.
fn balance_rows(grid: &ParameterGrid<f64>, generator: usize, report: &BalanceReport<f64>, extra: impl Fn(usize) -> Vec<f64>) -> Vec<Vec<f64>> {
    let residual = report.residual_field();
    (0..grid.node_count())
        .map(|n| {
            let mut row = vec![generator as f64, n as f64];
            row.extend(grid_columns(grid, n));
            row.extend(extra(n));
            row.extend([report.divergence_field[n], report.source_field[n], residual[n]]);
            row
        })
        .collect()
}

fn balance_header(p: usize, extra: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut header = vec!["generator".to_string(), "node".to_string()];
    header.extend(coordinate_header(p));
    header.extend(extra);
    header.extend(["divergence", "source", "residual"].map(String::from));
    header
}

fn unit(len: usize, k: usize) -> DVector<f64> {
    let mut e = DVector::zeros(len);
    e[k] = 1.0;
    e
}

fn per_generator(ctx: &Ctx, reports: &[BalanceReport<f64>]) -> Measurement {
    let labels: Vec<String> = ctx
        .scenario
        .variation
        .iter()
        .zip(reports)
        .map(|(g, r)| format!("{} {:.3e}", g.label(), r.residual_maxnorm))
        .collect();
    Measurement {
        maxnorm: reports.iter().map(|r| r.residual_maxnorm).fold(0.0, f64::max),
        l2: Some(reports.iter().map(|r| r.residual_l2).fold(0.0, f64::max)),
        detail: labels.join(", "),
    }
}

fn jet_diagnostic(ctx: &mut Ctx, d: Diagnostic, phi: &FundamentalOneForm<f64>, s: &SampledSection<f64>) -> Result<Measurement, RunError> {
    let grid = s.grid();
    let gens = &ctx.scenario.variation;
    match d {
        Diagnostic::Balance | Diagnostic::LagrangianCurrent => {
            let act = ctx.check("group action", action(s, gens))?;
            let mut reports = Vec::with_capacity(gens.len());
            let mut rows = Vec::new();
            for k in 0..gens.len() {
                let v = ctx.check("variation", act.variation(s, &unit(gens.len(), k)))?;
                let r = if d == Diagnostic::Balance {
                    ctx.check(d.name(), balance_check(phi, s, &v, TraceConvention::Half))?
                } else {
                    ctx.check(d.name(), lagrangian_conservation(phi, s, &v))?
                };
                rows.extend(balance_rows(grid, k, &r, |_| Vec::new()));
                reports.push(r);
            }
            ctx.tables.push(Table { name: d.name().into(), header: balance_header(s.p(), []), rows });
            let mut m = per_generator(ctx, &reports);
            if let Some(e) = reports.first().and_then(|r| r.dstar_maxnorm) {
                m.detail.push_str(&format!("; max |D*φ| {e:.3e}"));
            }
            Ok(m)
        }
        Diagnostic::NoetherMap => {
            let act = ctx.check("group action", action(s, gens))?;
            let map = ctx.check(d.name(), noether_map_matrix(phi, s, &act, TraceConvention::Half))?;
            let src = ctx.check(d.name(), balance_source(phi, s, TraceConvention::Half))?;
            let (mut reports, mut rows) = (Vec::new(), Vec::new());
            for k in 0..gens.len() {
                let column: Vec<DVector<f64>> = map.iter().map(|j| j.column(k).into_owned()).collect();
                let div = ctx.check(d.name(), grid_divergence(&column, grid))?;
                let source = (0..grid.node_count()).map(|n| src[n].dot(&act.d_param()[n].column(k))).collect();
                let r = ctx.check(d.name(), BalanceReport::new(grid, div, source, None))?;
                rows.extend(balance_rows(grid, k, &r, |n| column[n].iter().copied().collect()));
                reports.push(r);
            }
            let header = balance_header(s.p(), (0..s.p()).map(|i| format!("J{i}")));
            ctx.tables.push(Table { name: d.name().into(), header, rows });
            Ok(per_generator(ctx, &reports))
        }
        Diagnostic::Dstar => {
            let e = ctx.check(d.name(), dstar(phi, s))?;
            let (maxnorm, l2) = interior_norms(grid, |n| e[n].amax());
            let mut header = vec!["node".to_string()];
            header.extend(coordinate_header(s.p()));
            header.extend((0..s.m()).map(|mu| format!("dstar{mu}")));
            let rows = (0..grid.node_count())
                .map(|n| {
                    let mut row = vec![n as f64];
                    row.extend(grid_columns(grid, n));
                    row.extend(e[n].iter());
                    row
                })
                .collect();
            ctx.tables.push(Table { name: d.name().into(), header, rows });
            Ok(Measurement { maxnorm, l2: Some(l2), detail: String::new() })
        }
        Diagnostic::Bracket => {
            let b = ctx.check(d.name(), lagrange_bracket(phi, s))?;
            let (maxnorm, l2) = interior_norms(grid, |n| b[n].amax());
            Ok(Measurement { maxnorm, l2: Some(l2), detail: String::new() })
        }
        Diagnostic::Exactness => {
            let (mut worst, mut parts) = (0.0f64, [0.0f64; 4]);
            for n in 0..s.node_count() {
                let r = ctx.check(d.name(), kinetic_exactness_check(phi, &s.point(n), JET_FD_STEP))?;
                worst = worst.max(r.max_residual());
                let values = [r.parameter_dependence, r.configuration_dependence, r.gamma_symmetry, r.potential_residual.unwrap_or(0.0)];
                parts.iter_mut().zip(values).for_each(|(p, v)| *p = p.max(v));
            }
            let detail = format!(
                "∂Π/∂a {:.3e}, ∂Π/∂x {:.3e}, γ symmetry {:.3e}, Π − ∂T/∂ẋ {:.3e}",
                parts[0], parts[1], parts[2], parts[3]
            );
            Ok(Measurement::nodewise(worst, detail))
        }
        Diagnostic::Homogeneity => {
            let mut parts = [0.0f64; 4];
            for n in 0..s.node_count() {
                let r = ctx.check(d.name(), euler_homogeneity_check(phi, &s.point(n), &HOMOGENEITY_SCALES))?;
                let values = [r.degree_one, r.euler_identity, r.degree_two.unwrap_or(0.0), r.kinetic_identity.unwrap_or(0.0)];
                parts.iter_mut().zip(values).for_each(|(p, v)| *p = p.max(v));
            }
            let detail = format!(
                "degree one {:.3e}, Euler identity {:.3e}, degree two {:.3e}, T − ½Π·ẋ {:.3e}",
                parts[0], parts[1], parts[2], parts[3]
            );
            Ok(Measurement::nodewise(parts.into_iter().fold(0.0, f64::max), detail))
        }
        Diagnostic::Conservation | Diagnostic::Strain => unreachable!("`{d}` is rejected for jet scenarios at validation"),
    }
}

fn rigid_body(ctx: &mut Ctx) -> Result<Vec<Measurement>, RunError> {
    let s = ctx.scenario;
    let System::RigidBody { mass, inertia, x0, v0, rotation0, omega0, forces, torques, time } = &s.system else { unreachable!() };
    let (mass, laws, torque_laws) = (*mass, forces.clone(), torques.clone());
    let params = ctx.check(
        "system",
        RigidBodyParams::new(
            mass,
            Matrix3::from_iterator(inertia.iter().copied()),
            move |t, st: &RigidBodyState<f64>| {
                let x = DVector::from_column_slice(st.g.translation().as_slice());
                let v = DVector::from_column_slice(st.v.as_slice());
                let f = sum_forces(&laws, mass, t, &x, &v);
                Vector3::new(f[0], f[1], f[2])
            },
            move |_, st: &RigidBodyState<f64>| torque_laws.iter().fold(Vector3::zeros(), |acc, l| acc + l.torque(&st.w_body)),
        ),
    )?;
    let s0 = RigidBodyState { g: Iso3Element::from_exp(rotation0, *x0), v: *v0, w_body: *omega0 };
    let tr = ctx.check("integration", integrate_rigid_body(&params, &s0, time.start, time.end, time.step))?;
    let balance = ctx.check("power balance", rigid_power_balance(&params, &tr))?;

    let mut header = vec!["t".to_string()];
    header.extend((0..3).map(|i| format!("u{i}")));
    header.extend((0..3).flat_map(|i| (0..3).map(move |j| format!("R{i}{j}"))));
    header.extend((0..3).map(|i| format!("v{i}")));
    header.extend((0..3).map(|i| format!("w{i}")));
    header.extend(["T", "P", "residual"].map(String::from));
    let residual = balance.residual_field();
    let rows = tr
        .states
        .iter()
        .enumerate()
        .map(|(k, st)| {
            let r = st.g.rotation();
            let mut row = vec![tr.time(k)];
            row.extend(st.g.translation().iter());
            row.extend((0..3).flat_map(|i| (0..3).map(move |j| r[(i, j)])));
            row.extend(st.v.iter().chain(st.w_body.iter()));
            row.extend([params.kinetic_energy(st), balance.source_field[k], residual[k]]);
            row
        })
        .collect();
    ctx.tables.push(Table { name: "trajectory".into(), header, rows });

    Ok(s.diagnostics
        .iter()
        .map(|&d| match d {
            Diagnostic::Balance => Measurement {
                maxnorm: balance.residual_maxnorm,
                l2: Some(balance.residual_l2),
                detail: String::new(),
            },
            Diagnostic::Conservation => {
                let t = relative_drift(tr.states.iter().map(|st| params.kinetic_energy(st)));
                let l = relative_drift(tr.states.iter().map(|st| params.angular_momentum(st).norm()));
                Measurement::nodewise(t.max(l), format!("relative drift: T {t:.3e}, |L| {l:.3e}"))
            }
            other => unreachable!("`{other}` is rejected for rigid bodies at validation"),
        })
        .collect())
}

fn strain(ctx: &mut Ctx) -> Result<Vec<Measurement>, RunError> {
    let s = ctx.scenario;
    let System::Strain { grid, metric, linear, rotation, offset } = &s.system else { unreachable!() };
    let grid = ctx.check("grid", build_grid(grid))?;
    let m = grid.dim();
    let deformation = match rotation {
        Some(w) => DMatrix::from_iterator(3, 3, so3_exp(w).iter().copied()) * linear,
        None => linear.clone(),
    };
    let u = ctx.check("displacement", DisplacementField::from_deformation(grid.clone(), |x| &deformation * x + offset))?;
    let e = ctx.check("strain", green_strain(&u, metric))?;
    let exact = deformation.transpose() * metric * &deformation - metric;
    let residual: Vec<f64> = e.iter().map(|en| (en - &exact).amax()).collect();

    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect();
    let mut header = vec!["node".to_string()];
    header.extend((0..m).map(|i| format!("x{i}")));
    header.extend(pairs.iter().map(|(i, j)| format!("E{i}{j}")));
    header.push("residual".into());
    let rows = (0..grid.node_count())
        .map(|n| {
            let mut row = vec![n as f64];
            row.extend(grid_columns(&grid, n));
            row.extend(pairs.iter().map(|&(i, j)| e[n][(i, j)]));
            row.push(residual[n]);
            row
        })
        .collect();
    ctx.tables.push(Table { name: "strain".into(), header, rows });
    let worst = max_abs(residual.iter().copied());
    Ok(s.diagnostics.iter().map(|_| Measurement::nodewise(worst, "against AᵀgA − g".into())).collect())
}
