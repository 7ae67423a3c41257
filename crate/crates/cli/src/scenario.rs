//! Scenario files: a small TOML grammar, validated in one pass that collects every error
//! together with its line and column.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector, Vector3};
use toml::de::{DeTable, DeValue};
use toml::Spanned;

use crate::catalog::{self, Law, ParamShape, Role};

type Value<'i> = Spanned<DeValue<'i>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Kind {
    PointMass,
    RigidBody,
    GeneralJet,
    Strain,
}

impl Kind {
    pub const ALL: [Kind; 4] = [Kind::PointMass, Kind::RigidBody, Kind::GeneralJet, Kind::Strain];

    pub fn name(self) -> &'static str {
        match self {
            Kind::PointMass => "point_mass",
            Kind::RigidBody => "rigid_body",
            Kind::GeneralJet => "general_jet",
            Kind::Strain => "strain",
        }
    }

    fn sections(self) -> &'static [&'static str] {
        match self {
            Kind::PointMass => &["system", "time", "force", "variation"],
            Kind::RigidBody => &["system", "time", "force", "torque"],
            Kind::GeneralJet => &["grid", "force", "momentum", "section", "variation"],
            Kind::Strain => &["system", "grid", "deformation"],
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Diagnostic {
    Balance,
    LagrangianCurrent,
    Conservation,
    Exactness,
    Bracket,
    Homogeneity,
    NoetherMap,
    Dstar,
    Strain,
}

/// Asymptotic behaviour a diagnostic's residual should show under refinement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    /// Ratio 3.2–4.8 per halving.
    Second,
    /// Ratio at least 12.8 per halving.
    Fourth,
    /// Exact up to roundoff; ratios are reported but not judged.
    Exact,
}

impl Diagnostic {
    pub const ALL: [Diagnostic; 9] = [
        Diagnostic::Balance,
        Diagnostic::LagrangianCurrent,
        Diagnostic::Conservation,
        Diagnostic::Exactness,
        Diagnostic::Bracket,
        Diagnostic::Homogeneity,
        Diagnostic::NoetherMap,
        Diagnostic::Dstar,
        Diagnostic::Strain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Diagnostic::Balance => "balance",
            Diagnostic::LagrangianCurrent => "lagrangian_current",
            Diagnostic::Conservation => "conservation",
            Diagnostic::Exactness => "exactness",
            Diagnostic::Bracket => "bracket",
            Diagnostic::Homogeneity => "homogeneity",
            Diagnostic::NoetherMap => "noether_map",
            Diagnostic::Dstar => "dstar",
            Diagnostic::Strain => "strain",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.name() == name)
    }

    pub fn default_tolerance(self) -> f64 {
        match self {
            Diagnostic::Balance | Diagnostic::LagrangianCurrent | Diagnostic::NoetherMap => 1e-4,
            Diagnostic::Bracket | Diagnostic::Dstar => 1e-4,
            Diagnostic::Conservation | Diagnostic::Exactness => 1e-8,
            Diagnostic::Homogeneity => 1e-9,
            Diagnostic::Strain => 1e-10,
        }
    }

    pub fn order(self) -> Order {
        match self {
            Diagnostic::Conservation => Order::Fourth,
            Diagnostic::Exactness | Diagnostic::Homogeneity | Diagnostic::Strain => Order::Exact,
            _ => Order::Second,
        }
    }

    pub fn supports(self, kind: Kind) -> bool {
        use Diagnostic::*;
        match kind {
            Kind::PointMass => !matches!(self, Strain),
            Kind::RigidBody => matches!(self, Balance | Conservation),
            Kind::GeneralJet => !matches!(self, Strain | Conservation),
            Kind::Strain => matches!(self, Strain),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One generator of the symmetry variation, as `(δa, δx̄)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    /// `δa = e₀`, `δx̄ = 0`.
    TimeTranslation,
    /// `δx̄ = e_axis`.
    SpaceTranslation(usize),
    /// `δx̄ = e_axis × x` in three dimensions; `(−x₁, x₀)` in the plane (axis 2).
    Rotation(usize),
    Custom { da: DVector<f64>, dx: DVector<f64> },
}

impl Generator {
    pub fn label(&self) -> String {
        match self {
            Generator::TimeTranslation => "time_translation".into(),
            Generator::SpaceTranslation(a) => format!("space_translation({a})"),
            Generator::Rotation(a) => format!("rotation({a})"),
            Generator::Custom { .. } => "custom".into(),
        }
    }

    pub fn at(&self, p: usize, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let m = x.len();
        match self {
            Generator::TimeTranslation => {
                let mut da = DVector::zeros(p);
                da[0] = 1.0;
                (da, DVector::zeros(m))
            }
            Generator::SpaceTranslation(axis) => {
                let mut dx = DVector::zeros(m);
                dx[*axis] = 1.0;
                (DVector::zeros(p), dx)
            }
            Generator::Rotation(axis) => {
                let dx = if m == 2 {
                    DVector::from_vec(vec![-x[1], x[0]])
                } else {
                    let mut e = Vector3::zeros();
                    e[*axis] = 1.0;
                    DVector::from_column_slice(e.cross(&Vector3::new(x[0], x[1], x[2])).as_slice())
                };
                (DVector::zeros(p), dx)
            }
            Generator::Custom { da, dx } => (da.clone(), dx.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeWindow {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub samples: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SectionSpec {
    /// `x(a) = offset + gradient·a`.
    Affine { offset: DVector<f64>, gradient: DMatrix<f64> },
    /// `x(a) = amplitude·sin(k·a + phase)`.
    PlaneWave { amplitude: DVector<f64>, wavevector: DVector<f64>, phase: f64 },
}

impl SectionSpec {
    pub fn m(&self) -> usize {
        match self {
            SectionSpec::Affine { offset, .. } => offset.len(),
            SectionSpec::PlaneWave { amplitude, .. } => amplitude.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum System {
    PointMass {
        mass: f64,
        metric: DMatrix<f64>,
        x0: DVector<f64>,
        v0: DVector<f64>,
        forces: Vec<Law>,
        time: TimeWindow,
    },
    RigidBody {
        mass: f64,
        inertia: DMatrix<f64>,
        x0: Vector3<f64>,
        v0: Vector3<f64>,
        rotation0: Vector3<f64>,
        omega0: Vector3<f64>,
        forces: Vec<Law>,
        torques: Vec<Law>,
        time: TimeWindow,
    },
    GeneralJet {
        grid: GridSpec,
        section: SectionSpec,
        momentum: Law,
        forces: Vec<Law>,
    },
    Strain {
        grid: GridSpec,
        metric: DMatrix<f64>,
        linear: DMatrix<f64>,
        rotation: Option<Vector3<f64>>,
        offset: DVector<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub kind: Kind,
    pub system: System,
    pub variation: Vec<Generator>,
    pub diagnostics: Vec<Diagnostic>,
    /// Tolerance of every requested diagnostic.
    pub tolerances: BTreeMap<Diagnostic, f64>,
    pub output_dir: Option<PathBuf>,
}

impl Scenario {
    pub fn tolerance(&self, d: Diagnostic) -> f64 {
        self.tolerances.get(&d).copied().unwrap_or_else(|| d.default_tolerance())
    }

    /// Time step, or the largest grid spacing.
    pub fn resolution(&self) -> f64 {
        let spacing = |g: &GridSpec| {
            (0..g.lower.len())
                .map(|i| (g.upper[i] - g.lower[i]) / (g.samples[i] - 1) as f64)
                .fold(0.0, f64::max)
        };
        match &self.system {
            System::PointMass { time, .. } | System::RigidBody { time, .. } => time.step,
            System::GeneralJet { grid, .. } | System::Strain { grid, .. } => spacing(grid),
        }
    }

    /// The same scenario with the step halved, or every axis going from `n` to `2n − 1` nodes.
    pub fn refined(&self) -> Scenario {
        let mut out = self.clone();
        let refine_grid = |g: &mut GridSpec| g.samples.iter_mut().for_each(|n| *n = 2 * *n - 1);
        match &mut out.system {
            System::PointMass { time, .. } | System::RigidBody { time, .. } => time.step /= 2.0,
            System::GeneralJet { grid, .. } | System::Strain { grid, .. } => refine_grid(grid),
        }
        out
    }

    /// Whether every force law derives from a potential.
    pub fn is_conservative(&self) -> bool {
        match &self.system {
            System::PointMass { forces, .. } | System::GeneralJet { forces, .. } => forces.iter().all(Law::is_conservative),
            System::RigidBody { forces, torques, .. } => forces.is_empty() && torques.is_empty(),
            System::Strain { .. } => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationError {
    /// 1-based line and column, when the error can be pinned to a place in the text.
    pub location: Option<(usize, usize)>,
    /// Dotted key path, e.g. `force[0].law`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some((line, col)) = self.location {
            write!(f, "{line}:{col}: ")?;
        }
        if !self.path.is_empty() {
            write!(f, "{}: ", self.path)?;
        }
        f.write_str(&self.message)
    }
}

/// Every problem found in a scenario, in text order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationErrors(pub Vec<ValidationError>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.0.len();
        writeln!(f, "{n} validation error{}:", if n == 1 { "" } else { "s" })?;
        for e in &self.0 {
            writeln!(f, "  {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationErrors {}

pub fn parse_scenario(text: &str) -> Result<Scenario, ValidationErrors> {
    let root = match DeTable::parse(text) {
        Ok(root) => root,
        Err(e) => {
            let location = e.span().map(|s| location(text, s.start));
            return Err(ValidationErrors(vec![ValidationError {
                location,
                path: String::new(),
                message: format!("malformed TOML: {}", e.message().trim_end()),
            }]));
        }
    };
    let mut p = Parser { src: text, errors: Vec::new() };
    let scenario = p.scenario(root.get_ref(), root.span());
    if p.errors.is_empty() {
        Ok(scenario.expect("a scenario without validation errors is complete"))
    } else {
        p.errors.sort_by_key(|(offset, _)| *offset);
        Err(ValidationErrors(p.errors.into_iter().map(|(_, e)| e).collect()))
    }
}

fn location(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

/// Symmetric to roundoff and positive definite.
fn spd_problem(m: &DMatrix<f64>) -> Option<String> {
    let asym = (m - m.transpose()).amax();
    if asym > 1e-12 * m.amax().max(1.0) {
        return Some(format!("matrix is not symmetric (max |M − Mᵀ| = {asym:e})"));
    }
    if m.clone().cholesky().is_none() {
        return Some("matrix is not positive definite".into());
    }
    None
}

const COMMON_KEYS: [&str; 5] = ["kind", "name", "diagnostics", "tolerances", "output"];

struct Parser<'s> {
    src: &'s str,
    errors: Vec<(usize, ValidationError)>,
}

impl Parser<'_> {
    fn error(&mut self, span: Range<usize>, path: impl Into<String>, message: impl Into<String>) {
        let e = ValidationError { location: Some(location(self.src, span.start)), path: path.into(), message: message.into() };
        self.errors.push((span.start, e));
    }

    fn check_keys(&mut self, t: &DeTable<'_>, allowed: &[&str], path: &str, what: &str) {
        for key in t.keys() {
            if !allowed.contains(&key.get_ref().as_ref()) {
                let msg = format!("unknown key `{}` in {what}; expected one of: {}", key.get_ref(), allowed.join(", "));
                self.error(key.span(), join(path, key.get_ref()), msg);
            }
        }
    }

    fn required<'t, 'i>(&mut self, t: &'t DeTable<'i>, span: &Range<usize>, key: &str, path: &str) -> Option<&'t Value<'i>> {
        let v = t.get(key);
        if v.is_none() {
            self.error(span.clone(), join(path, key), format!("missing required key `{key}`"));
        }
        v
    }

    fn table<'t, 'i>(&mut self, v: &'t Value<'i>, path: &str) -> Option<&'t DeTable<'i>> {
        let t = v.get_ref().as_table();
        if t.is_none() {
            self.error(v.span(), path, format!("expected a table, found {}", v.get_ref().type_str()));
        }
        t
    }

    fn string<'t>(&mut self, v: &'t Value<'_>, path: &str) -> Option<&'t str> {
        let s = v.get_ref().as_str();
        if s.is_none() {
            self.error(v.span(), path, format!("expected a string, found {}", v.get_ref().type_str()));
        }
        s
    }

    fn number(&mut self, v: &Value<'_>, path: &str) -> Option<f64> {
        let parsed = match v.get_ref() {
            DeValue::Integer(i) => i64::from_str_radix(i.as_str(), i.radix()).ok().map(|n| n as f64),
            DeValue::Float(f) => f.as_str().parse::<f64>().ok(),
            other => {
                self.error(v.span(), path, format!("expected a number, found {}", other.type_str()));
                return None;
            }
        };
        match parsed {
            Some(x) if x.is_finite() => Some(x),
            Some(x) => {
                self.error(v.span(), path, format!("non-finite parameter ({x})"));
                None
            }
            None => {
                self.error(v.span(), path, "malformed number");
                None
            }
        }
    }

    fn positive(&mut self, v: &Value<'_>, path: &str) -> Option<f64> {
        let x = self.number(v, path)?;
        if x > 0.0 {
            Some(x)
        } else {
            self.error(v.span(), path, format!("must be positive, got {x}"));
            None
        }
    }

    fn count(&mut self, v: &Value<'_>, path: &str) -> Option<usize> {
        if let DeValue::Integer(i) = v.get_ref() {
            if let Ok(n) = usize::from_str_radix(i.as_str(), i.radix()) {
                return Some(n);
            }
        }
        self.error(v.span(), path, "expected a non-negative integer");
        None
    }

    fn array<'t, 'i>(&mut self, v: &'t Value<'i>, path: &str) -> Option<&'t [Value<'i>]> {
        match v.get_ref().as_array() {
            Some(a) => Some(a),
            None => {
                self.error(v.span(), path, format!("expected an array, found {}", v.get_ref().type_str()));
                None
            }
        }
    }

    fn vector(&mut self, v: &Value<'_>, path: &str, len: Option<usize>) -> Option<DVector<f64>> {
        let items = self.array(v, path)?;
        let values: Vec<Option<f64>> = items.iter().enumerate().map(|(k, x)| self.number(x, &format!("{path}[{k}]"))).collect();
        let values: Vec<f64> = values.into_iter().collect::<Option<_>>()?;
        match len {
            Some(n) if values.len() != n => {
                self.error(v.span(), path, format!("expected {n} components, found {}", values.len()));
                None
            }
            _ if values.is_empty() => {
                self.error(v.span(), path, "vector must not be empty");
                None
            }
            _ => Some(DVector::from_vec(values)),
        }
    }

    /// Array of rows.
    fn matrix(&mut self, v: &Value<'_>, path: &str, shape: Option<(usize, usize)>) -> Option<DMatrix<f64>> {
        let rows = self.array(v, path)?;
        let parsed: Vec<Option<DVector<f64>>> =
            rows.iter().enumerate().map(|(k, r)| self.vector(r, &format!("{path}[{k}]"), shape.map(|s| s.1))).collect();
        let parsed: Vec<DVector<f64>> = parsed.into_iter().collect::<Option<_>>()?;
        let cols = parsed.first().map_or(0, |r| r.len());
        if parsed.is_empty() || parsed.iter().any(|r| r.len() != cols) {
            self.error(v.span(), path, "matrix rows must be non-empty and of equal length");
            return None;
        }
        if let Some((r, _)) = shape {
            if parsed.len() != r {
                self.error(v.span(), path, format!("expected {r} rows, found {}", parsed.len()));
                return None;
            }
        }
        Some(DMatrix::from_fn(parsed.len(), cols, |i, j| parsed[i][j]))
    }

    fn spd(&mut self, v: &Value<'_>, path: &str, dim: Option<usize>) -> Option<DMatrix<f64>> {
        let m = self.matrix(v, path, dim.map(|d| (d, d)))?;
        if m.nrows() != m.ncols() {
            self.error(v.span(), path, format!("expected a square matrix, found {}x{}", m.nrows(), m.ncols()));
            return None;
        }
        if let Some(problem) = spd_problem(&m) {
            self.error(v.span(), path, problem);
            return None;
        }
        Some(m)
    }

    /// `[name]` or `[[name]]`: one table or an array of tables.
    fn entries<'t, 'i>(&mut self, v: &'t Value<'i>, path: &str) -> Vec<(&'t DeTable<'i>, Range<usize>, String)> {
        if let Some(t) = v.get_ref().as_table() {
            return vec![(t, v.span(), path.to_string())];
        }
        let Some(items) = self.array(v, path) else { return Vec::new() };
        let mut out = Vec::new();
        for (k, item) in items.iter().enumerate() {
            let p = format!("{path}[{k}]");
            if let Some(t) = self.table(item, &p) {
                out.push((t, item.span(), p));
            }
        }
        out
    }

    fn scenario(&mut self, root: &DeTable<'_>, span: Range<usize>) -> Option<Scenario> {
        let kind = match self.required(root, &span, "kind", "") {
            Some(v) => match self.string(v, "kind") {
                Some(s) => {
                    let kind = Kind::ALL.into_iter().find(|k| k.name() == s);
                    if kind.is_none() {
                        let names: Vec<_> = Kind::ALL.iter().map(|k| k.name()).collect();
                        self.error(v.span(), "kind", format!("unknown kind `{s}`; expected one of: {}", names.join(", ")));
                    }
                    kind
                }
                None => None,
            },
            None => None,
        };
        let name = match root.get("name") {
            Some(v) => self.string(v, "name").map(str::to_string),
            None => kind.map(|k| k.name().to_string()),
        };
        let output_dir = self.output(root);
        let Some(kind) = kind else {
            self.check_keys(root, &COMMON_KEYS, "", "the scenario");
            return None;
        };
        let allowed: Vec<&str> = COMMON_KEYS.iter().chain(kind.sections()).copied().collect();
        self.check_keys(root, &allowed, "", &format!("a {kind} scenario"));

        let system = match kind {
            Kind::PointMass => self.point_mass(root, &span),
            Kind::RigidBody => self.rigid_body(root, &span),
            Kind::GeneralJet => self.general_jet(root, &span),
            Kind::Strain => self.strain(root, &span),
        };
        let variation = match (&system, kind) {
            (Some(System::PointMass { x0, .. }), _) => self.variation(root, 1, x0.len()),
            (Some(System::GeneralJet { grid, section, .. }), _) => self.variation(root, grid.lower.len(), section.m()),
            _ => Vec::new(),
        };
        let diagnostics = self.diagnostics(root, &span, kind, system.as_ref());
        let tolerances = self.tolerances(root, &diagnostics);
        Some(Scenario { name: name?, kind, system: system?, variation, diagnostics, tolerances, output_dir })
    }

    fn output(&mut self, root: &DeTable<'_>) -> Option<PathBuf> {
        let t = self.table(root.get("output")?, "output")?;
        self.check_keys(t, &["dir"], "output", "[output]");
        let dir = t.get("dir")?;
        self.string(dir, "output.dir").map(PathBuf::from)
    }

    fn system_table<'t, 'i>(&mut self, root: &'t DeTable<'i>, span: &Range<usize>) -> Option<(&'t DeTable<'i>, Range<usize>)> {
        let v = self.required(root, span, "system", "")?;
        let t = self.table(v, "system")?;
        Some((t, v.span()))
    }

    fn time(&mut self, root: &DeTable<'_>, span: &Range<usize>) -> Option<TimeWindow> {
        let v = self.required(root, span, "time", "")?;
        let t = self.table(v, "time")?;
        self.check_keys(t, &["start", "end", "step"], "time", "[time]");
        let start = match t.get("start") {
            Some(s) => self.number(s, "time.start"),
            None => Some(0.0),
        };
        let end = self.required(t, &v.span(), "end", "time").and_then(|e| self.number(e, "time.end"));
        let step = self.required(t, &v.span(), "step", "time").and_then(|s| self.positive(s, "time.step"));
        let (start, end, step) = (start?, end?, step?);
        if end <= start {
            self.error(v.span(), "time", format!("empty window: end {end} must exceed start {start}"));
            return None;
        }
        Some(TimeWindow { start, end, step })
    }

    fn grid(&mut self, root: &DeTable<'_>, span: &Range<usize>) -> Option<GridSpec> {
        let v = self.required(root, span, "grid", "")?;
        let t = self.table(v, "grid")?;
        self.check_keys(t, &["lower", "upper", "samples"], "grid", "[grid]");
        let lower = self.required(t, &v.span(), "lower", "grid").and_then(|x| self.vector(x, "grid.lower", None));
        let p = lower.as_ref().map(|l| l.len());
        let upper = self.required(t, &v.span(), "upper", "grid").and_then(|x| self.vector(x, "grid.upper", p));
        let samples = self.required(t, &v.span(), "samples", "grid").and_then(|x| {
            let items = self.array(x, "grid.samples")?;
            let counts: Vec<Option<usize>> =
                items.iter().enumerate().map(|(k, n)| self.count(n, &format!("grid.samples[{k}]"))).collect();
            let counts: Vec<usize> = counts.into_iter().collect::<Option<_>>()?;
            if p.is_some_and(|p| p != counts.len()) {
                self.error(x.span(), "grid.samples", format!("expected {} entries, found {}", p.unwrap(), counts.len()));
                return None;
            }
            if let Some(n) = counts.iter().find(|&&n| n < 3) {
                self.error(x.span(), "grid.samples", format!("every axis needs at least 3 nodes, found {n}"));
                return None;
            }
            Some(counts)
        });
        let (lower, upper, samples) = (lower?, upper?, samples?);
        if (0..lower.len()).any(|i| upper[i] <= lower[i]) {
            self.error(v.span(), "grid", "upper bounds must exceed lower bounds");
            return None;
        }
        Some(GridSpec { lower: lower.as_slice().to_vec(), upper: upper.as_slice().to_vec(), samples })
    }

    fn laws(&mut self, root: &DeTable<'_>, role: Role, dim: Option<usize>) -> Vec<Law> {
        let key = role.section();
        let Some(v) = root.get(key) else { return Vec::new() };
        self.entries(v, key).into_iter().filter_map(|(t, span, path)| self.law(t, &span, &path, role, dim)).collect()
    }

    fn law(&mut self, t: &DeTable<'_>, span: &Range<usize>, path: &str, role: Role, dim: Option<usize>) -> Option<Law> {
        let v = self.required(t, span, "law", path)?;
        let law_path = join(path, "law");
        let name = self.string(v, &law_path)?;
        let Some(info) = catalog::lookup(name).filter(|i| i.role == role) else {
            let listing: Vec<String> = catalog::CATALOG
                .iter()
                .filter(|l| l.role == role)
                .map(|l| format!("{}({})", l.name, l.params.iter().map(|p| p.0).collect::<Vec<_>>().join(", ")))
                .collect();
            let msg = match catalog::lookup(name) {
                Some(other) => format!("`{name}` is a {} law, not a {} law", other.role.section(), role.section()),
                None => format!("unknown {} law `{name}`", role.section()),
            };
            self.error(v.span(), law_path, format!("{msg}; catalog: {}", listing.join(", ")));
            return None;
        };
        let mut allowed = vec!["law"];
        allowed.extend(info.params.iter().map(|p| p.0));
        self.check_keys(t, &allowed, path, &format!("law `{name}`"));

        let mut scalars = BTreeMap::new();
        let (mut vector, mut matrix) = (None, None);
        let mut complete = true;
        for &(param, shape) in info.params {
            let p = join(path, param);
            let Some(x) = self.required(t, span, param, path) else {
                complete = false;
                continue;
            };
            let ok = match shape {
                ParamShape::Scalar => self.number(x, &p).map(|s| scalars.insert(param, s)).is_some(),
                ParamShape::Vector => {
                    vector = self.vector(x, &p, dim);
                    vector.is_some()
                }
                ParamShape::Matrix => {
                    matrix = self.spd(x, &p, dim);
                    matrix.is_some()
                }
            };
            complete &= ok;
        }
        if !complete {
            return None;
        }
        let s = |k: &str| scalars[k];
        let law = match info.name {
            "constant_force" => Law::ConstantForce(vector?),
            "linear_spring" => Law::LinearSpring { k: s("k") },
            "linear_drag" => Law::LinearDrag { c: s("c") },
            "driven" => Law::Driven { k: s("k"), amplitude: s("amplitude"), frequency: s("frequency") },
            "gravity" => Law::Gravity(vector?),
            "viscous_torque" => Law::ViscousTorque { c: s("c") },
            "constant_torque" => Law::ConstantTorque(vector?),
            "mass_momentum" => {
                if s("m") <= 0.0 {
                    self.error(t.get("m").unwrap().span(), join(path, "m"), format!("must be positive, got {}", s("m")));
                    return None;
                }
                Law::MassMomentum { m: s("m") }
            }
            "inertia_momentum" => Law::InertiaMomentum(matrix?),
            other => unreachable!("catalog law `{other}` has no builder"),
        };
        Some(law)
    }

    fn point_mass(&mut self, root: &DeTable<'_>, span: &Range<usize>) -> Option<System> {
        let system = self.system_table(root, span);
        let time = self.time(root, span);
        let Some((t, tspan)) = system else {
            self.laws(root, Role::Force, None);
            return None;
        };
        self.check_keys(t, &["mass", "metric", "x0", "v0"], "system", "[system] of a point_mass");
        let mass = self.required(t, &tspan, "mass", "system").and_then(|v| self.positive(v, "system.mass"));
        let x0 = self.required(t, &tspan, "x0", "system").and_then(|v| self.vector(v, "system.x0", None));
        let dim = x0.as_ref().map(|x| x.len());
        let v0 = self.required(t, &tspan, "v0", "system").and_then(|v| self.vector(v, "system.v0", dim));
        let metric = match t.get("metric") {
            Some(v) => self.spd(v, "system.metric", dim),
            None => dim.map(|d| DMatrix::identity(d, d)),
        };
        let forces = self.laws(root, Role::Force, dim);
        Some(System::PointMass { mass: mass?, metric: metric?, x0: x0?, v0: v0?, forces, time: time? })
    }

    fn rigid_body(&mut self, root: &DeTable<'_>, span: &Range<usize>) -> Option<System> {
        let system = self.system_table(root, span);
        let time = self.time(root, span);
        let forces = self.laws(root, Role::Force, Some(3));
        let torques = self.laws(root, Role::Torque, Some(3));
        let (t, tspan) = system?;
        self.check_keys(t, &["mass", "inertia", "x0", "v0", "rotation0", "omega0"], "system", "[system] of a rigid_body");
        let mass = self.required(t, &tspan, "mass", "system").and_then(|v| self.positive(v, "system.mass"));
        let inertia = self.required(t, &tspan, "inertia", "system").and_then(|v| self.spd(v, "system.inertia", Some(3)));
        let mut vec3 = |key: &str, required: bool| -> Option<Vector3<f64>> {
            let path = join("system", key);
            let v = if required { self.required(t, &tspan, key, "system")? } else {
                match t.get(key) {
                    Some(v) => v,
                    None => return Some(Vector3::zeros()),
                }
            };
            self.vector(v, &path, Some(3)).map(|x| Vector3::new(x[0], x[1], x[2]))
        };
        let (x0, v0, rotation0) = (vec3("x0", false), vec3("v0", false), vec3("rotation0", false));
        let omega0 = vec3("omega0", true);
        Some(System::RigidBody {
            mass: mass?,
            inertia: inertia?,
            x0: x0?,
            v0: v0?,
            rotation0: rotation0?,
            omega0: omega0?,
            forces,
            torques,
            time: time?,
        })
    }

    fn general_jet(&mut self, root: &DeTable<'_>, span: &Range<usize>) -> Option<System> {
        let grid = self.grid(root, span);
        let p = grid.as_ref().map(|g| g.lower.len());
        let section = self.section(root, span, p);
        let m = section.as_ref().map(SectionSpec::m);
        let momentum = self.required(root, span, "momentum", "").and_then(|v| {
            let t = self.table(v, "momentum")?;
            self.law(t, &v.span(), "momentum", Role::Momentum, m)
        });
        let forces = self.laws(root, Role::Force, m);
        if forces.iter().any(|f| matches!(f, Law::Gravity(_))) && !matches!(momentum, Some(Law::MassMomentum { .. })) {
            if let Some(v) = root.get("force") {
                self.error(v.span(), "force", "gravity needs a mass: use the mass_momentum law");
            }
        }
        Some(System::GeneralJet { grid: grid?, section: section?, momentum: momentum?, forces })
    }

    fn section(&mut self, root: &DeTable<'_>, span: &Range<usize>, p: Option<usize>) -> Option<SectionSpec> {
        let v = self.required(root, span, "section", "")?;
        let t = self.table(v, "section")?;
        let shape_v = self.required(t, &v.span(), "shape", "section")?;
        let shape = self.string(shape_v, "section.shape")?;
        match shape {
            "affine" => {
                self.check_keys(t, &["shape", "offset", "gradient"], "section", "an affine section");
                let offset = self.required(t, &v.span(), "offset", "section").and_then(|x| self.vector(x, "section.offset", None));
                let m = offset.as_ref().map(|o| o.len());
                let gradient = self.required(t, &v.span(), "gradient", "section").and_then(|x| {
                    let shape = m.zip(p);
                    self.matrix(x, "section.gradient", shape)
                });
                Some(SectionSpec::Affine { offset: offset?, gradient: gradient? })
            }
            "plane_wave" => {
                self.check_keys(t, &["shape", "amplitude", "wavevector", "phase"], "section", "a plane_wave section");
                let amplitude =
                    self.required(t, &v.span(), "amplitude", "section").and_then(|x| self.vector(x, "section.amplitude", None));
                let wavevector =
                    self.required(t, &v.span(), "wavevector", "section").and_then(|x| self.vector(x, "section.wavevector", p));
                let phase = match t.get("phase") {
                    Some(x) => self.number(x, "section.phase"),
                    None => Some(0.0),
                };
                Some(SectionSpec::PlaneWave { amplitude: amplitude?, wavevector: wavevector?, phase: phase? })
            }
            other => {
                self.error(shape_v.span(), "section.shape", format!("unknown shape `{other}`; expected affine or plane_wave"));
                None
            }
        }
    }

    fn strain(&mut self, root: &DeTable<'_>, span: &Range<usize>) -> Option<System> {
        let grid = self.grid(root, span);
        let m = grid.as_ref().map(|g| g.lower.len());
        let metric = match root.get("system") {
            Some(v) => {
                let t = self.table(v, "system")?;
                self.check_keys(t, &["metric"], "system", "[system] of a strain scenario");
                match t.get("metric") {
                    Some(g) => self.spd(g, "system.metric", m),
                    None => m.map(|m| DMatrix::identity(m, m)),
                }
            }
            None => m.map(|m| DMatrix::identity(m, m)),
        };
        let (mut linear, mut rotation, mut offset) = (m.map(|m| DMatrix::identity(m, m)), Some(None), m.map(DVector::zeros));
        if let Some(v) = root.get("deformation") {
            if let Some(t) = self.table(v, "deformation") {
                self.check_keys(t, &["linear", "rotation", "offset"], "deformation", "[deformation]");
                if let Some(x) = t.get("linear") {
                    linear = self.matrix(x, "deformation.linear", m.map(|m| (m, m)));
                }
                if let Some(x) = t.get("offset") {
                    offset = self.vector(x, "deformation.offset", m);
                }
                if let Some(x) = t.get("rotation") {
                    rotation = if m.is_some_and(|m| m != 3) {
                        self.error(x.span(), "deformation.rotation", "rotation needs a three-dimensional grid");
                        None
                    } else {
                        self.vector(x, "deformation.rotation", Some(3)).map(|w| Some(Vector3::new(w[0], w[1], w[2])))
                    };
                }
            }
        }
        Some(System::Strain { grid: grid?, metric: metric?, linear: linear?, rotation: rotation?, offset: offset? })
    }

    fn variation(&mut self, root: &DeTable<'_>, p: usize, m: usize) -> Vec<Generator> {
        let Some(v) = root.get("variation") else { return vec![Generator::TimeTranslation] };
        let mut out = Vec::new();
        let entries = self.entries(v, "variation");
        if entries.is_empty() {
            self.error(v.span(), "variation", "at least one generator is required");
        }
        for (t, span, path) in entries {
            let Some(g) = self.required(t, &span, "generator", &path) else { continue };
            let gpath = join(&path, "generator");
            let Some(name) = self.string(g, &gpath) else { continue };
            let axis = |this: &mut Self, limit: usize| -> Option<usize> {
                let a = this.required(t, &span, "axis", &path)?;
                let axis = this.count(a, &join(&path, "axis"))?;
                if axis >= limit {
                    this.error(a.span(), join(&path, "axis"), format!("axis {axis} out of range for dimension {limit}"));
                    return None;
                }
                Some(axis)
            };
            let generator = match name {
                "time_translation" => {
                    self.check_keys(t, &["generator"], &path, "time_translation");
                    Some(Generator::TimeTranslation)
                }
                "space_translation" => {
                    self.check_keys(t, &["generator", "axis"], &path, "space_translation");
                    axis(self, m).map(Generator::SpaceTranslation)
                }
                "rotation" => {
                    self.check_keys(t, &["generator", "axis"], &path, "rotation");
                    match m {
                        3 => axis(self, 3).map(Generator::Rotation),
                        2 => match t.get("axis") {
                            None => Some(Generator::Rotation(2)),
                            Some(a) => match self.count(a, &join(&path, "axis")) {
                                Some(2) => Some(Generator::Rotation(2)),
                                Some(other) => {
                                    self.error(a.span(), join(&path, "axis"), format!("a planar rotation is about axis 2, got {other}"));
                                    None
                                }
                                None => None,
                            },
                        },
                        _ => {
                            self.error(g.span(), gpath.clone(), format!("rotation needs dimension 2 or 3, not {m}"));
                            None
                        }
                    }
                }
                "custom" => {
                    self.check_keys(t, &["generator", "da", "dx"], &path, "a custom generator");
                    let da = self.required(t, &span, "da", &path).and_then(|x| self.vector(x, &join(&path, "da"), Some(p)));
                    let dx = self.required(t, &span, "dx", &path).and_then(|x| self.vector(x, &join(&path, "dx"), Some(m)));
                    da.zip(dx).map(|(da, dx)| Generator::Custom { da, dx })
                }
                other => {
                    self.error(
                        g.span(),
                        gpath.clone(),
                        format!("unknown generator `{other}`; expected time_translation, space_translation, rotation or custom"),
                    );
                    None
                }
            };
            out.extend(generator);
        }
        out
    }

    fn diagnostics(&mut self, root: &DeTable<'_>, span: &Range<usize>, kind: Kind, system: Option<&System>) -> Vec<Diagnostic> {
        let Some(v) = self.required(root, span, "diagnostics", "") else { return Vec::new() };
        let Some(items) = self.array(v, "diagnostics") else { return Vec::new() };
        if items.is_empty() {
            self.error(v.span(), "diagnostics", "at least one diagnostic is required");
        }
        let mut out: Vec<Diagnostic> = Vec::new();
        for (k, item) in items.iter().enumerate() {
            let path = format!("diagnostics[{k}]");
            let Some(name) = self.string(item, &path) else { continue };
            let Some(d) = Diagnostic::parse(name) else {
                let names: Vec<_> = Diagnostic::ALL.iter().map(|d| d.name()).collect();
                self.error(item.span(), path, format!("unknown diagnostic `{name}`; expected one of: {}", names.join(", ")));
                continue;
            };
            if !d.supports(kind) {
                let names: Vec<_> = Diagnostic::ALL.iter().filter(|d| d.supports(kind)).map(|d| d.name()).collect();
                self.error(item.span(), path, format!("`{d}` does not apply to {kind}; available: {}", names.join(", ")));
                continue;
            }
            if out.contains(&d) {
                self.error(item.span(), path, format!("`{d}` is requested twice"));
                continue;
            }
            if let Some(problem) = system.and_then(|s| precondition(d, s)) {
                self.error(item.span(), path, problem);
                continue;
            }
            out.push(d);
        }
        out
    }

    fn tolerances(&mut self, root: &DeTable<'_>, requested: &[Diagnostic]) -> BTreeMap<Diagnostic, f64> {
        let mut out: BTreeMap<_, _> = requested.iter().map(|&d| (d, d.default_tolerance())).collect();
        let Some(v) = root.get("tolerances") else { return out };
        let Some(t) = self.table(v, "tolerances") else { return out };
        for (key, value) in t.iter() {
            let path = join("tolerances", key.get_ref());
            match Diagnostic::parse(key.get_ref()) {
                Some(d) => {
                    if let Some(tol) = self.positive(value, &path) {
                        if out.contains_key(&d) {
                            out.insert(d, tol);
                        }
                    }
                }
                None => self.error(key.span(), path, format!("unknown diagnostic `{}`", key.get_ref())),
            }
        }
        out
    }
}

/// Why a supported diagnostic still cannot run on this system, if it cannot.
fn precondition(d: Diagnostic, system: &System) -> Option<String> {
    let non_conservative = |forces: &[Law]| forces.iter().find(|f| !f.is_conservative()).map(law_name);
    match (d, system) {
        (Diagnostic::LagrangianCurrent | Diagnostic::Conservation, System::PointMass { forces, .. })
        | (Diagnostic::LagrangianCurrent, System::GeneralJet { forces, .. }) => non_conservative(forces)
            .map(|name| format!("`{d}` needs a Lagrangian, but force law `{name}` has no potential")),
        (Diagnostic::Conservation, System::RigidBody { forces, torques, .. }) => (!forces.is_empty() || !torques.is_empty())
            .then(|| format!("`{d}` checks the invariants of a free body; remove the force and torque laws")),
        _ => None,
    }
}

fn law_name(law: &Law) -> &'static str {
    match law {
        Law::ConstantForce(_) => "constant_force",
        Law::LinearSpring { .. } => "linear_spring",
        Law::LinearDrag { .. } => "linear_drag",
        Law::Driven { .. } => "driven",
        Law::Gravity(_) => "gravity",
        Law::ViscousTorque { .. } => "viscous_torque",
        Law::ConstantTorque(_) => "constant_torque",
        Law::MassMomentum { .. } => "mass_momentum",
        Law::InertiaMomentum(_) => "inertia_momentum",
    }
}
