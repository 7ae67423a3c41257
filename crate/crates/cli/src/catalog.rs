//! The force, torque and momentum laws a scenario may name.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, Vector3};

/// Where a law can be attached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Force,
    Torque,
    Momentum,
}

impl Role {
    pub fn section(self) -> &'static str {
        match self {
            Role::Force => "force",
            Role::Torque => "torque",
            Role::Momentum => "momentum",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamShape {
    Scalar,
    /// Length fixed by the system's configuration dimension.
    Vector,
    /// Square, configuration dimension.
    Matrix,
}

pub struct LawInfo {
    pub name: &'static str,
    pub role: Role,
    pub params: &'static [(&'static str, ParamShape)],
    pub summary: &'static str,
}

pub const CATALOG: &[LawInfo] = &[
    LawInfo { name: "constant_force", role: Role::Force, params: &[("vector", ParamShape::Vector)], summary: "F = vector" },
    LawInfo { name: "linear_spring", role: Role::Force, params: &[("k", ParamShape::Scalar)], summary: "F = −k x" },
    LawInfo {
        name: "linear_drag",
        role: Role::Force,
        params: &[("c", ParamShape::Scalar)],
        summary: "F = −c v (general jets: −c ∂x/∂a⁰)",
    },
    LawInfo {
        name: "driven",
        role: Role::Force,
        params: &[("k", ParamShape::Scalar), ("amplitude", ParamShape::Scalar), ("frequency", ParamShape::Scalar)],
        summary: "F = −k x + amplitude·cos(frequency·t) on every component",
    },
    LawInfo { name: "gravity", role: Role::Force, params: &[("g", ParamShape::Vector)], summary: "F = m g" },
    LawInfo { name: "viscous_torque", role: Role::Torque, params: &[("c", ParamShape::Scalar)], summary: "τ = −c ω (body axes)" },
    LawInfo {
        name: "constant_torque",
        role: Role::Torque,
        params: &[("vector", ParamShape::Vector)],
        summary: "τ = vector (body axes)",
    },
    LawInfo { name: "mass_momentum", role: Role::Momentum, params: &[("m", ParamShape::Scalar)], summary: "Π = m ẋ" },
    LawInfo {
        name: "inertia_momentum",
        role: Role::Momentum,
        params: &[("inertia", ParamShape::Matrix)],
        summary: "Π = I ẋ, I symmetric positive definite",
    },
];

pub fn lookup(name: &str) -> Option<&'static LawInfo> {
    CATALOG.iter().find(|l| l.name == name)
}

pub fn names(role: Role) -> Vec<&'static str> {
    CATALOG.iter().filter(|l| l.role == role).map(|l| l.name).collect()
}

/// Human-readable listing for the `catalog` verb.
pub fn describe() -> String {
    let mut out = String::new();
    for role in [Role::Force, Role::Torque, Role::Momentum] {
        let _ = writeln!(out, "[{}]", role.section());
        for law in CATALOG.iter().filter(|l| l.role == role) {
            let params: Vec<String> = law
                .params
                .iter()
                .map(|(p, shape)| match shape {
                    ParamShape::Scalar => p.to_string(),
                    ParamShape::Vector => format!("{p}: vector"),
                    ParamShape::Matrix => format!("{p}: matrix"),
                })
                .collect();
            let _ = writeln!(out, "  {}({})  {}", law.name, params.join(", "), law.summary);
        }
    }
    out
}

/// A law with its parameters resolved.
#[derive(Debug, Clone, PartialEq)]
pub enum Law {
    ConstantForce(DVector<f64>),
    LinearSpring { k: f64 },
    LinearDrag { c: f64 },
    Driven { k: f64, amplitude: f64, frequency: f64 },
    Gravity(DVector<f64>),
    ViscousTorque { c: f64 },
    ConstantTorque(DVector<f64>),
    MassMomentum { m: f64 },
    InertiaMomentum(DMatrix<f64>),
}

impl Law {
    /// `F(t, x, v)` contributed by a force law, for a body of mass `mass`.
    pub fn force(&self, mass: f64, t: f64, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Law::ConstantForce(f) => f.clone(),
            Law::LinearSpring { k } => x * -*k,
            Law::LinearDrag { c } => v * -*c,
            Law::Driven { k, amplitude, frequency } => (x * -*k).add_scalar(amplitude * (frequency * t).cos()),
            Law::Gravity(g) => g * mass,
            _ => DVector::zeros(x.len()),
        }
    }

    /// Potential whose negative gradient is the force, if the law has one.
    pub fn potential(&self, mass: f64, x: &DVector<f64>) -> Option<f64> {
        match self {
            Law::ConstantForce(f) => Some(-f.dot(x)),
            Law::LinearSpring { k } => Some(0.5 * k * x.norm_squared()),
            Law::Gravity(g) => Some(-mass * g.dot(x)),
            _ => None,
        }
    }

    pub fn is_conservative(&self) -> bool {
        matches!(self, Law::ConstantForce(_) | Law::LinearSpring { .. } | Law::Gravity(_))
    }

    /// Body-axes torque contributed by a torque law.
    pub fn torque(&self, w_body: &Vector3<f64>) -> Vector3<f64> {
        match self {
            Law::ViscousTorque { c } => w_body * -*c,
            Law::ConstantTorque(t) => Vector3::new(t[0], t[1], t[2]),
            _ => Vector3::zeros(),
        }
    }

    /// Constant symmetric matrix `M` of a momentum law `Π = M ẋ`.
    pub fn momentum_matrix(&self, m: usize) -> DMatrix<f64> {
        match self {
            Law::MassMomentum { m: mass } => DMatrix::identity(m, m) * *mass,
            Law::InertiaMomentum(i) => i.clone(),
            _ => DMatrix::zeros(m, m),
        }
    }
}
