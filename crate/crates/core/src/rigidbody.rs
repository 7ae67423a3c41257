//! Rigid bodies: the group ISO(3) of rigid motions, body-frame kinematics, the rigid-body
//! equations of motion under arbitrary forces and torques, and the power balance
//! `dT/dt = F·v + τ·ω`.
//!
//! Torques and angular momenta are axial 3-vectors. [`hat`] and [`vee`] bridge to the
//! antisymmetric matrix forms, with `hat(w)·x = w × x`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Matrix4, Vector3};

use crate::jet::ParameterGrid;
use crate::noether::BalanceReport;
use crate::numeric::{grid_partial, so3_exp};
use crate::pointmech::step_count;
use crate::{Error, Real, Result};

/// Axial form of an element of so(3).
pub type So3Vector<T> = Vector3<T>;

/// Tolerance on `RᵀR − I` and `det R − 1` for a valid rotation.
pub const ROTATION_TOLERANCE: f64 = 1e-10;
/// Tolerance on `W + Wᵀ` accepted by [`vee`].
pub const ANTISYMMETRY_TOLERANCE: f64 = 1e-10;
/// Tolerance on `RᵀṘ + (RᵀṘ)ᵀ` accepted by [`body_velocity`], relative to `max(1, |Ṙ|)`.
pub const KINEMATIC_TOLERANCE: f64 = 1e-8;

pub fn hat<T: Real>(w: &Vector3<T>) -> Matrix3<T> {
    let z = T::zero();
    Matrix3::new(z, -w.z, w.y, w.z, z, -w.x, -w.y, w.x, z)
}

pub fn vee<T: Real>(m: &Matrix3<T>) -> Result<So3Vector<T>> {
    let residual = (m + m.transpose()).amax();
    if residual > T::lit(ANTISYMMETRY_TOLERANCE) {
        return Err(Error::NotAntisymmetric { residual: residual.as_f64() });
    }
    Ok(vee_unchecked(m))
}

/// Axial vector of the antisymmetric part of `m`.
fn vee_unchecked<T: Real>(m: &Matrix3<T>) -> So3Vector<T> {
    Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * T::half()
}

/// `(hat(w), hat(L))`. For antisymmetric matrices the full contraction double counts:
/// `½ hat(a) : hat(b) = a·b`.
pub fn angular_tensor_bridge<T: Real>(w: &So3Vector<T>, l: &Vector3<T>) -> (Matrix3<T>, Matrix3<T>) {
    (hat(w), hat(l))
}

/// A rigid motion `x ↦ R x + u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Iso3Element<T: Real> {
    r: Matrix3<T>,
    u: Vector3<T>,
}

fn rotation_defect<T: Real>(r: &Matrix3<T>) -> T {
    (r.transpose() * r - Matrix3::identity()).amax().max((r.determinant() - T::one()).abs())
}

impl<T: Real> Iso3Element<T> {
    pub fn new(r: Matrix3<T>, u: Vector3<T>) -> Result<Self> {
        let defect = rotation_defect(&r);
        if !(defect <= T::lit(ROTATION_TOLERANCE)) {
            return Err(Error::Invariant(format!("not a rotation: orthonormality/determinant defect {defect:e}")));
        }
        if !u.iter().all(|v| v.is_finite()) {
            return Err(Error::Invariant("translation is not finite".into()));
        }
        Ok(Self { r, u })
    }

    pub fn identity() -> Self {
        Self { r: Matrix3::identity(), u: Vector3::zeros() }
    }

    pub fn from_exp(w: &So3Vector<T>, u: Vector3<T>) -> Self {
        Self { r: so3_exp(w), u }
    }

    pub fn rotation(&self) -> &Matrix3<T> {
        &self.r
    }

    pub fn translation(&self) -> &Vector3<T> {
        &self.u
    }

    /// `(R₁, u₁)(R₂, u₂) = (R₁R₂, u₁ + R₁u₂)`.
    pub fn compose(&self, other: &Self) -> Self {
        Self { r: self.r * other.r, u: self.u + self.r * other.u }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.r.transpose();
        Self { r: rt, u: -(rt * self.u) }
    }

    pub fn act(&self, x: &Vector3<T>) -> Vector3<T> {
        self.r * x + self.u
    }

    /// Block form `[[1, 0], [u, R]]` acting on `(1, x)`.
    pub fn homogeneous(&self) -> Matrix4<T> {
        let mut m = Matrix4::zeros();
        m[(0, 0)] = T::one();
        m.fixed_view_mut::<3, 1>(1, 0).copy_from(&self.u);
        m.fixed_view_mut::<3, 3>(1, 1).copy_from(&self.r);
        m
    }

    pub fn from_homogeneous(m: &Matrix4<T>) -> Result<Self> {
        let top = m.fixed_view::<1, 4>(0, 0);
        if top[0] != T::one() || top.columns(1, 3).amax() != T::zero() {
            return Err(Error::Invariant("first row of a homogeneous rigid motion must be (1, 0, 0, 0)".into()));
        }
        Self::new(m.fixed_view::<3, 3>(1, 1).into_owned(), m.fixed_view::<3, 1>(1, 0).into_owned())
    }

    /// Pose with the rotation re-orthonormalized by Gram–Schmidt on its columns.
    fn reorthonormalized(&self) -> Self {
        let c0 = self.r.column(0).normalize();
        let c1 = (self.r.column(1) - c0 * c0.dot(&self.r.column(1))).normalize();
        let c2 = c0.cross(&c1);
        Self { r: Matrix3::from_columns(&[c0, c1, c2]), u: self.u }
    }
}

/// `ω = vee(RᵀṘ)` and `Rᵀu̇` from a pose and its time derivative.
pub fn body_velocity<T: Real>(
    g: &Iso3Element<T>,
    rdot: &Matrix3<T>,
    udot: &Vector3<T>,
) -> Result<(So3Vector<T>, Vector3<T>)> {
    let w = g.r.transpose() * rdot;
    let residual = (w + w.transpose()).amax();
    if residual > T::lit(KINEMATIC_TOLERANCE) * T::one().max(rdot.amax()) {
        return Err(Error::KinematicInconsistency { residual: residual.as_f64() });
    }
    Ok((vee_unchecked(&w), g.r.transpose() * udot))
}

/// Pose, inertial linear velocity and body angular velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidBodyState<T: Real> {
    pub g: Iso3Element<T>,
    pub v: Vector3<T>,
    pub w_body: So3Vector<T>,
}

pub type RigidLaw<T> = Arc<dyn Fn(T, &RigidBodyState<T>) -> Vector3<T> + Send + Sync>;

/// Mass, inertia tensor (body axes) and the applied loads. The force is inertial; the
/// torque is given in body axes.
#[derive(Clone)]
pub struct RigidBodyParams<T: Real> {
    mass: T,
    inertia: Matrix3<T>,
    inertia_inverse: Matrix3<T>,
    force: RigidLaw<T>,
    torque: RigidLaw<T>,
}

impl<T: Real> fmt::Debug for RigidBodyParams<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RigidBodyParams")
            .field("mass", &self.mass)
            .field("inertia", &self.inertia)
            .finish_non_exhaustive()
    }
}

impl<T: Real> RigidBodyParams<T> {
    pub fn new(
        mass: T,
        inertia: Matrix3<T>,
        force: impl Fn(T, &RigidBodyState<T>) -> Vector3<T> + Send + Sync + 'static,
        torque: impl Fn(T, &RigidBodyState<T>) -> Vector3<T> + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(mass > T::zero()) || !mass.is_finite() {
            return Err(Error::Invariant(format!("mass must be positive and finite, got {mass:e}")));
        }
        let dynamic = nalgebra::DMatrix::from_iterator(3, 3, inertia.iter().copied());
        let inverse = crate::pointmech::check_spd("inertia", &dynamic)?;
        Ok(Self {
            mass,
            inertia,
            inertia_inverse: Matrix3::from_iterator(inverse.iter().copied()),
            force: Arc::new(force),
            torque: Arc::new(torque),
        })
    }

    /// No applied force or torque.
    pub fn free(mass: T, inertia: Matrix3<T>) -> Result<Self> {
        Self::new(mass, inertia, |_, _| Vector3::zeros(), |_, _| Vector3::zeros())
    }

    pub fn mass(&self) -> T {
        self.mass
    }

    pub fn inertia(&self) -> &Matrix3<T> {
        &self.inertia
    }

    pub fn force(&self, t: T, s: &RigidBodyState<T>) -> Result<Vector3<T>> {
        checked("force", t, (self.force)(t, s))
    }

    pub fn torque(&self, t: T, s: &RigidBodyState<T>) -> Result<Vector3<T>> {
        checked("torque", t, (self.torque)(t, s))
    }

    /// Body angular momentum `L = Iω`.
    pub fn angular_momentum(&self, s: &RigidBodyState<T>) -> Vector3<T> {
        self.inertia * s.w_body
    }

    /// `T = ½ m|v|² + ½ ω·Iω`.
    pub fn kinetic_energy(&self, s: &RigidBodyState<T>) -> T {
        (s.v.norm_squared() * self.mass + s.w_body.dot(&(self.inertia * s.w_body))) * T::half()
    }

    /// `P = F·v + τ·ω`.
    pub fn power(&self, t: T, s: &RigidBodyState<T>) -> Result<T> {
        Ok(self.force(t, s)?.dot(&s.v) + self.torque(t, s)?.dot(&s.w_body))
    }
}

fn checked<T: Real>(what: &'static str, t: T, v: Vector3<T>) -> Result<Vector3<T>> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(v)
    } else {
        Err(Error::Evaluation { what, node: None, location: vec![t.as_f64()], reason: "non-finite value".into() })
    }
}

/// Uniformly sampled rigid-body states.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidTrajectory<T: Real> {
    grid: ParameterGrid<T>,
    pub states: Vec<RigidBodyState<T>>,
}

impl<T: Real> RigidTrajectory<T> {
    pub fn grid(&self) -> &ParameterGrid<T> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn step(&self) -> T {
        self.grid.spacing()[0]
    }

    pub fn time(&self, k: usize) -> T {
        self.grid.coords(k)[0]
    }
}

/// `ω + ½ θ×ω + (1/12) θ×(θ×ω)`: the inverse differential of the exponential, truncated
/// where it stops mattering for a fourth-order method. It maps the body angular velocity
/// to `θ̇` for `R = R₀ exp(θ)`.
fn dexp_inv<T: Real>(theta: &Vector3<T>, w: &Vector3<T>) -> Vector3<T> {
    let tw = theta.cross(w);
    w + tw * T::half() + theta.cross(&tw) / T::lit(12.0)
}

/// Rate of the vector-space part `(u, v, L)` and the body angular velocity at a stage.
struct Rates<T: Real> {
    du: Vector3<T>,
    dv: Vector3<T>,
    dl: Vector3<T>,
    w: Vector3<T>,
}

/// Integrates `m v̇ = F`, `u̇ = v`, `L̇ = τ − ω × L` (body axes) and `Ṙ = R hat(ω)`.
///
/// The momenta advance by classical RK4; the rotation by the matching Runge–Kutta–Munthe-Kaas
/// scheme, `R ← R exp(θ)`, so the pose stays on SO(3) and the whole step is fourth order.
/// The rotation is re-orthonormalized after every step.
pub fn integrate_rigid_body<T: Real>(
    params: &RigidBodyParams<T>,
    s0: &RigidBodyState<T>,
    t0: T,
    t1: T,
    step: T,
) -> Result<RigidTrajectory<T>> {
    let n = step_count(t0, t1, step)?;
    let grid = ParameterGrid::interval(t0, t1, n + 1)?;
    let h = grid.spacing()[0];
    let (half, sixth, two) = (T::half(), T::lit(1.0 / 6.0), T::two());

    let rates = |t: T, r: &Matrix3<T>, u: &Vector3<T>, v: &Vector3<T>, l: &Vector3<T>| -> Result<Rates<T>> {
        let w = params.inertia_inverse * l;
        let state = RigidBodyState { g: Iso3Element { r: *r, u: *u }, v: *v, w_body: w };
        let f = params.force(t, &state)?;
        let tau = params.torque(t, &state)?;
        Ok(Rates { du: *v, dv: f / params.mass, dl: tau - w.cross(l), w })
    };

    let mut states = Vec::with_capacity(n + 1);
    states.push(*s0);
    let (mut r, mut u, mut v) = (s0.g.r, s0.g.u, s0.v);
    let mut l = params.inertia * s0.w_body;
    for k in 0..n {
        let t = grid.coords(k)[0];
        let k1 = rates(t, &r, &u, &v, &l)?;
        let th1 = k1.w;

        let theta2 = th1 * (h * half);
        let k2 = rates(t + h * half, &(r * so3_exp(&theta2)), &(u + k1.du * (h * half)), &(v + k1.dv * (h * half)), &(l + k1.dl * (h * half)))?;
        let th2 = dexp_inv(&theta2, &k2.w);

        let theta3 = th2 * (h * half);
        let k3 = rates(t + h * half, &(r * so3_exp(&theta3)), &(u + k2.du * (h * half)), &(v + k2.dv * (h * half)), &(l + k2.dl * (h * half)))?;
        let th3 = dexp_inv(&theta3, &k3.w);

        let theta4 = th3 * h;
        let k4 = rates(t + h, &(r * so3_exp(&theta4)), &(u + k3.du * h), &(v + k3.dv * h), &(l + k3.dl * h))?;
        let th4 = dexp_inv(&theta4, &k4.w);

        let combine = |a: Vector3<T>, b: Vector3<T>, c: Vector3<T>, d: Vector3<T>| (a + (b + c) * two + d) * (h * sixth);
        let theta = combine(th1, th2, th3, th4);
        u += combine(k1.du, k2.du, k3.du, k4.du);
        v += combine(k1.dv, k2.dv, k3.dv, k4.dv);
        l += combine(k1.dl, k2.dl, k3.dl, k4.dl);
        let pose = Iso3Element { r: r * so3_exp(&theta), u }.reorthonormalized();
        r = pose.r;

        let w = params.inertia_inverse * l;
        let finite = r.iter().chain(u.iter()).chain(v.iter()).chain(w.iter()).all(|c| c.is_finite());
        if !finite {
            return Err(Error::NonFinite { time: (t + h).as_f64() });
        }
        states.push(RigidBodyState { g: pose, v, w_body: w });
    }
    Ok(RigidTrajectory { grid, states })
}

/// `dT/dt` by grid differencing of the sampled kinetic energy, against `P = F·v + τ·ω`.
pub fn rigid_power_balance<T: Real>(params: &RigidBodyParams<T>, traj: &RigidTrajectory<T>) -> Result<BalanceReport<T>> {
    if traj.len() < 3 {
        return Err(Error::TooFewNodes { axis: 0, nodes: traj.len() });
    }
    let energy: Vec<T> = traj.states.iter().map(|s| params.kinetic_energy(s)).collect();
    let divergence = grid_partial(&energy, 0, traj.grid())?;
    let source = (0..traj.len())
        .map(|k| params.power(traj.time(k), &traj.states[k]))
        .collect::<Result<Vec<_>>>()?;
    BalanceReport::new(traj.grid(), divergence, source, None)
}

/// Force, linear momentum, torque and angular momentum; the last two as axial vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicalComponents<T: Real> {
    pub force: Vector3<T>,
    pub momentum: Vector3<T>,
    pub torque: Vector3<T>,
    pub spin: Vector3<T>,
}

/// Pulls inertial components back along the moving frame:
/// `F₀ = RᵀF + Ṙᵀp`, `p₀ = Rᵀp`, `τ₀ = Rᵀτ + ṘᵀS`, `S₀ = RᵀS`.
///
/// The `Ṙᵀ` terms are the frame-velocity contributions; with `Ṙ = R hat(ω)` they equal
/// `−ω × p₀` and `−ω × S₀`.
pub fn to_body_frame<T: Real>(
    inertial: &DynamicalComponents<T>,
    g: &Iso3Element<T>,
    rdot: &Matrix3<T>,
) -> DynamicalComponents<T> {
    let rt = g.r.transpose();
    let rdot_t = rdot.transpose();
    DynamicalComponents {
        force: rt * inertial.force + rdot_t * inertial.momentum,
        momentum: rt * inertial.momentum,
        torque: rt * inertial.torque + rdot_t * inertial.spin,
        spin: rt * inertial.spin,
    }
}

/// Components relative to the frame rotating with body angular velocity `w`:
/// `F̄₀ = F₀ + hat(w) p₀`, `p̄₀ = p₀`, `τ̄₀ = τ₀ + hat(w) S₀`, `S̄₀ = S₀`.
///
/// The corrections cancel the frame-velocity terms of [`to_body_frame`], so `F̄₀ = RᵀF`
/// and `τ̄₀ = Rᵀτ`; the body-frame balance then reads `F̄₀ = ṗ₀ + ω × p₀`.
pub fn noninertial_state<T: Real>(body: &DynamicalComponents<T>, w: &So3Vector<T>) -> DynamicalComponents<T> {
    let wh = hat(w);
    DynamicalComponents {
        force: body.force + wh * body.momentum,
        momentum: body.momentum,
        torque: body.torque + wh * body.spin,
        spin: body.spin,
    }
}

/// Report-only assembly of the frame-bundle quantities `M`, `L`, their body-frame forms
/// and the antisymmetrized barred forms.
///
/// Inputs are the body-frame point `x₀`, velocity `v₀`, frame `e₀` and frame rate `ė₀`
/// (columns are frame vectors). The barred `M̄₀` keeps the `S ė` bracket term exactly as
/// the formula reads; it has not been cross-checked against an independent derivation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameDiagnostics<T: Real> {
    pub m: Matrix3<T>,
    pub l: Matrix3<T>,
    pub m_body: Matrix3<T>,
    pub l_body: Matrix3<T>,
    pub m_bar: Matrix3<T>,
    pub l_bar: Matrix3<T>,
}

pub fn frame_diagnostics<T: Real>(
    inertial: &DynamicalComponents<T>,
    body: &DynamicalComponents<T>,
    x0: &Vector3<T>,
    v0: &Vector3<T>,
    e0: &Matrix3<T>,
    edot0: &Matrix3<T>,
    w: &So3Vector<T>,
) -> FrameDiagnostics<T> {
    let (tau, spin) = (hat(&inertial.torque), hat(&inertial.spin));
    let m = inertial.force * x0.transpose() + inertial.momentum * v0.transpose() + tau * e0 + spin * edot0;
    let l = inertial.momentum * x0.transpose() + spin * e0;
    let m_body = m + l * hat(w);
    let l_body = l;
    let antisym = |a: Matrix3<T>| (a - a.transpose()) * T::half();
    let (tau0, spin0) = (hat(&body.torque), hat(&body.spin));
    let m_bar = antisym(
        m_body + body.force * x0.transpose() + body.momentum * v0.transpose() + tau0 + spin0 * edot0,
    );
    let l_bar = antisym(l_body + body.momentum * x0.transpose() + spin0);
    FrameDiagnostics { m, l, m_body, l_body, m_bar, l_bar }
}
