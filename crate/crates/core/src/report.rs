//! Run configuration, the operations behind the command-line verbs, and the
//! artifact bundle they produce.
//!
//! Everything is computed in memory first; files are written only once a run
//! has finished, so a failed run leaves no partial output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{ArrayD, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::balance::{
    attach_orders, gauge_divergence_check, mpce_residual, mpeem_residual, mpqce_residual,
    tensor_divergence_cartesian, Residual, ResidualReport, Verdict,
};
use crate::configspace::{
    AxisSpec, PairPotentialSpec, PotentialKind, SortSpec, Statistics, SystemSpec, WaveField, DEFAULT_POINT_CAP,
};
use crate::cylindrical::{cyl_comparison, cyl_pressure_parts, rotation_matrix, CylComparison};
use crate::error::{Error, Result};
use crate::hydro::{
    mass_current, mass_density, max_curl, mean_velocity, momentum_expectation, osmotic_velocity, particle_velocity,
    relative_velocity, total_density, Reference, Scope, DEFAULT_EPS,
};
use crate::mask;
use crate::scenarios::{scenario, Packet, Scenario, StateRecipe, Tolerances, GAUSSIAN_K0, GAUSSIAN_SIGMA};
use crate::tensors::{advection_dyad, scalar_quantum_pressure, tensor_set, Family, Part, TensorField, Version};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CAP: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

/// Exit code for an error that stopped a run.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::CapExceeded { .. } => EXIT_CAP,
        Error::Io(_) | Error::Json(_) | Error::NonFinite | Error::SymmetryBroken { .. } => EXIT_RUNTIME,
        _ => EXIT_CONFIG,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    Fields,
    Tensors,
    Check,
    Cyl,
}

impl Operation {
    pub const ALL: [Operation; 4] = [Operation::Fields, Operation::Tensors, Operation::Check, Operation::Cyl];

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fields" => Ok(Operation::Fields),
            "tensors" => Ok(Operation::Tensors),
            "check" => Ok(Operation::Check),
            "cyl" => Ok(Operation::Cyl),
            _ => Err(Error::Config(format!("unknown operation `{s}` (fields, tensors, check, cyl)"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Operation::Fields => "fields",
            Operation::Tensors => "tensors",
            Operation::Check => "check",
            Operation::Cyl => "cyl",
        }
    }

    /// Grids used when no level count is given.
    pub fn default_levels(&self) -> u32 {
        match self {
            Operation::Fields | Operation::Tensors => 1,
            Operation::Check | Operation::Cyl => 3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub operations: Vec<Operation>,
    pub out: Option<PathBuf>,
    /// Number of grids for convergence operations; `None` picks per operation.
    pub levels: Option<u32>,
    pub eps: f64,
    pub cap: usize,
    pub seed: u64,
}

impl RunConfig {
    pub fn for_scenario(scenario: Scenario, operations: Vec<Operation>) -> Self {
        RunConfig { scenario, operations, out: None, levels: None, eps: DEFAULT_EPS, cap: DEFAULT_POINT_CAP, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.operations.is_empty() {
            return Err(Error::Config("no operations requested".into()));
        }
        if self.levels == Some(0) {
            return Err(Error::Config("levels must be at least 1".into()));
        }
        if !(self.eps >= 0.0 && self.eps < 1.0) {
            return Err(Error::Config(format!("eps must lie in [0, 1), got {}", self.eps)));
        }
        if self.cap == 0 {
            return Err(Error::Config("cap_override must be positive".into()));
        }
        self.scenario.spec.validate()?;
        if self.scenario.physical.len() != self.scenario.spec.spatial_dim
            || self.scenario.ladder.len() != self.scenario.spec.spatial_dim
        {
            return Err(Error::Config("grid needs one axis per spatial dimension".into()));
        }
        if self.operations.contains(&Operation::Cyl) && self.scenario.spec.spatial_dim != 3 {
            return Err(Error::Config("the cyl operation needs a 3D scenario".into()));
        }
        Ok(())
    }

    /// Stationary states are checked on their calibrated grid alone: their
    /// residuals sit at rounding level, which refinement only amplifies.
    fn levels_for(&self, op: Operation) -> u32 {
        if op == Operation::Check && self.scenario.stationary {
            return 1;
        }
        self.levels.unwrap_or(op.default_levels())
    }
}

// ---------------------------------------------------------------------------
// Config files: `[section]` headers, `key = value` lines, `#` or `;` comments.

type Section = (String, Vec<(usize, String, String)>);

fn parse_sections(text: &str) -> Result<Vec<Section>> {
    let mut out: Vec<Section> = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lineno = no + 1;
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::Config(format!("line {lineno}: unterminated section header")))?;
            out.push((name.split_whitespace().collect::<Vec<_>>().join(" "), Vec::new()));
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {lineno}: expected `key = value`")))?;
        let sec = out
            .last_mut()
            .ok_or_else(|| Error::Config(format!("line {lineno}: key outside of any section")))?;
        sec.1.push((lineno, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(lineno: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("line {lineno}: `{key}` has invalid value `{v}`")))
}

fn floats(lineno: usize, key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|x| num(lineno, key, x.trim())).collect()
}

fn axes(lineno: usize, key: &str, v: &str) -> Result<Vec<AxisSpec>> {
    v.split(';')
        .map(|a| {
            let f: Vec<&str> = a.split_whitespace().collect();
            if f.len() != 3 {
                return Err(Error::Config(format!("line {lineno}: `{key}` axis must be `min max n`")));
            }
            Ok(AxisSpec::new(num(lineno, key, f[0])?, num(lineno, key, f[1])?, num(lineno, key, f[2])?))
        })
        .collect()
}

fn potential(lineno: usize, v: &str, n_sorts: usize) -> Result<PairPotentialSpec> {
    let mut words = v.split_whitespace();
    let kind = words.next().unwrap_or("none");
    let mut params = BTreeMap::new();
    for w in words {
        let (k, x) = w
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {lineno}: potential parameter `{w}` is not `name=value`")))?;
        params.insert(k.to_string(), num::<f64>(lineno, k, x)?);
    }
    let mut take = |k: &str| {
        params.remove(k).ok_or_else(|| Error::Config(format!("line {lineno}: potential needs `{k}=`")))
    };
    let kind = match kind {
        "none" => return Ok(PairPotentialSpec::none(n_sorts)),
        "soft_coulomb" => PotentialKind::SoftCoulomb { strength: take("strength")?, softening: take("softening")? },
        "gaussian_well" => PotentialKind::GaussianWell { depth: take("depth")?, width: take("width")? },
        "harmonic_coupling" => PotentialKind::HarmonicCoupling { k: take("k")? },
        other => return Err(Error::Config(format!("line {lineno}: unknown potential `{other}`"))),
    };
    if let Some(k) = params.keys().next() {
        return Err(Error::Config(format!("line {lineno}: unknown potential parameter `{k}`")));
    }
    Ok(PairPotentialSpec::uniform(kind, n_sorts))
}

/// `c:x[,y,z] s:sigma k:kx[,ky,kz]` packets separated by `|`.
fn packets(lineno: usize, v: &str, dim: usize) -> Result<Vec<Packet>> {
    v.split('|')
        .map(|p| {
            let (mut c, mut s, mut k) = (None, None, None);
            for tok in p.split_whitespace() {
                let (key, x) = tok
                    .split_once(':')
                    .ok_or_else(|| Error::Config(format!("line {lineno}: orbital token `{tok}` is not `key:value`")))?;
                match key {
                    "c" => c = Some(floats(lineno, "c", x)?),
                    "s" => s = Some(num::<f64>(lineno, "s", x)?),
                    "k" => k = Some(floats(lineno, "k", x)?),
                    _ => return Err(Error::Config(format!("line {lineno}: unknown orbital key `{key}`"))),
                }
            }
            let c = c.unwrap_or_else(|| vec![0.0; dim]);
            let k = k.unwrap_or_else(|| vec![0.0; dim]);
            let s = s.ok_or_else(|| Error::Config(format!("line {lineno}: orbital needs `s:`")))?;
            if c.len() != dim || k.len() != dim || !(s > 0.0) {
                return Err(Error::Config(format!(
                    "line {lineno}: orbital needs {dim}-component c and k and a positive s"
                )));
            }
            Ok(Packet { center: c, sigma: s, k })
        })
        .collect()
}

fn unknown(lineno: usize, section: &str, key: &str) -> Error {
    Error::Config(format!("line {lineno}: unknown key `{key}` in [{section}]"))
}

struct InlineSystem {
    name: String,
    dim: usize,
    hbar: f64,
    trap: f64,
    stationary: bool,
    potential: (usize, String),
}

fn inline_scenario(
    system: InlineSystem,
    sorts: Vec<(SortSpec, Vec<Packet>)>,
    grid: Option<(Vec<AxisSpec>, Option<Vec<AxisSpec>>)>,
) -> Result<Scenario> {
    let (physical, ladder) = grid.ok_or_else(|| Error::Config("an inline [system] needs a [grid] section".into()))?;
    if sorts.is_empty() {
        return Err(Error::Config("an inline [system] needs at least one [sort NAME] section".into()));
    }
    let potential = potential(system.potential.0, &system.potential.1, sorts.len())?;
    let (specs, orbitals): (Vec<SortSpec>, Vec<Vec<Packet>>) = sorts.into_iter().unzip();
    let mut spec = SystemSpec::new(specs, system.dim, potential);
    spec.hbar = system.hbar;
    spec.trap = system.trap;
    spec.validate()?;
    for (s, o) in spec.sorts.iter().zip(&orbitals) {
        if o.len() != s.count {
            return Err(Error::Config(format!(
                "sort `{}` has count {} but {} orbitals",
                s.label,
                s.count,
                o.len()
            )));
        }
    }
    Ok(Scenario {
        name: system.name,
        description: "inline system".into(),
        spec,
        ladder: ladder.unwrap_or_else(|| physical.clone()),
        physical,
        state: StateRecipe::Packets { orbitals },
        stationary: system.stationary,
        tolerances: Tolerances { residual: 1e-2, min_order: 3.0 },
    })
}

/// Parses a config file. Keys: `[run]` scenario, operations, out, levels,
/// eps, cap_override, seed; optional inline `[system]`, `[grid]` and
/// `[sort NAME]` sections replace the bundled scenario.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let sections = parse_sections(text)?;
    let mut scenario_name: Option<String> = None;
    let mut operations = Vec::new();
    let mut out = None;
    let mut levels = None;
    let mut eps = DEFAULT_EPS;
    let mut cap = DEFAULT_POINT_CAP;
    let mut seed = 0u64;
    let mut system: Option<InlineSystem> = None;
    let mut grid = None;
    let mut sorts: Vec<(SortSpec, Vec<Packet>, usize, String)> = Vec::new();
    let mut seen_run = false;

    for (name, entries) in &sections {
        let mut words = name.split_whitespace();
        match (words.next(), words.next()) {
            (Some("run"), None) => {
                seen_run = true;
                for (l, k, v) in entries {
                    match k.as_str() {
                        "scenario" => scenario_name = Some(v.clone()),
                        "operations" => {
                            operations = v
                                .split(',')
                                .map(|s| s.trim())
                                .filter(|s| !s.is_empty())
                                .map(Operation::parse)
                                .collect::<Result<_>>()?
                        }
                        "out" => out = Some(PathBuf::from(v)),
                        "levels" => levels = Some(num(*l, k, v)?),
                        "eps" => eps = num(*l, k, v)?,
                        "cap_override" => cap = num(*l, k, v)?,
                        "seed" => seed = num(*l, k, v)?,
                        _ => return Err(unknown(*l, name, k)),
                    }
                }
            }
            (Some("system"), None) => {
                let mut s = InlineSystem {
                    name: "inline".into(),
                    dim: 1,
                    hbar: 1.0,
                    trap: 0.0,
                    stationary: false,
                    potential: (0, "none".into()),
                };
                for (l, k, v) in entries {
                    match k.as_str() {
                        "name" => s.name = v.clone(),
                        "spatial_dim" => s.dim = num(*l, k, v)?,
                        "hbar" => s.hbar = num(*l, k, v)?,
                        "trap" => s.trap = num(*l, k, v)?,
                        "stationary" => s.stationary = num(*l, k, v)?,
                        "potential" => s.potential = (*l, v.clone()),
                        _ => return Err(unknown(*l, name, k)),
                    }
                }
                system = Some(s);
            }
            (Some("grid"), None) => {
                let (mut phys, mut ladder) = (None, None);
                for (l, k, v) in entries {
                    match k.as_str() {
                        "axes" => phys = Some(axes(*l, k, v)?),
                        "ladder" => ladder = Some(axes(*l, k, v)?),
                        _ => return Err(unknown(*l, name, k)),
                    }
                }
                let phys = phys.ok_or_else(|| Error::Config("[grid] needs `axes`".into()))?;
                grid = Some((phys, ladder));
            }
            (Some("sort"), Some(label)) => {
                let mut spec = SortSpec::new(label, 1.0, 1, Statistics::Distinguishable);
                let mut orb = (0, String::new());
                for (l, k, v) in entries {
                    match k.as_str() {
                        "mass" => spec.mass = num(*l, k, v)?,
                        "charge" => spec.charge = num(*l, k, v)?,
                        "count" => spec.count = num(*l, k, v)?,
                        "statistics" => {
                            spec.statistics = match v.as_str() {
                                "boson" => Statistics::Boson,
                                "fermion" => Statistics::Fermion,
                                "distinguishable" => Statistics::Distinguishable,
                                _ => return Err(Error::Config(format!("line {l}: unknown statistics `{v}`"))),
                            }
                        }
                        "orbitals" => orb = (*l, v.clone()),
                        _ => return Err(unknown(*l, name, k)),
                    }
                }
                if orb.1.is_empty() {
                    return Err(Error::Config(format!("[{name}] needs `orbitals`")));
                }
                sorts.push((spec, Vec::new(), orb.0, orb.1));
            }
            _ => return Err(Error::Config(format!("unknown section [{name}]"))),
        }
    }
    if !seen_run {
        return Err(Error::Config("missing [run] section".into()));
    }
    let scenario = match (scenario_name, system) {
        (Some(_), Some(_)) => {
            return Err(Error::Config("give either `scenario` in [run] or an inline [system], not both".into()))
        }
        (Some(n), None) => {
            if grid.is_some() || !sorts.is_empty() {
                return Err(Error::Config("[grid] and [sort] sections need an inline [system]".into()));
            }
            scenario(&n)?
        }
        (None, Some(sys)) => {
            let dim = sys.dim;
            let sorts = sorts
                .into_iter()
                .map(|(s, _, l, text)| Ok((s, packets(l, &text, dim)?)))
                .collect::<Result<Vec<_>>>()?;
            inline_scenario(sys, sorts, grid)?
        }
        (None, None) => return Err(Error::Config("no scenario: set `scenario` in [run] or add [system]".into())),
    };
    if operations.is_empty() {
        operations = Operation::ALL
            .into_iter()
            .filter(|op| *op != Operation::Cyl || scenario.spec.spatial_dim == 3)
            .collect();
    }
    let cfg = RunConfig { scenario, operations, out, levels, eps, cap, seed };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

// ---------------------------------------------------------------------------
// Checks and summaries.

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    /// `<=` or `>=`.
    pub relation: &'static str,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, limit, relation: "<=", passed: value <= limit }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, limit, relation: ">=", passed: value >= limit }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OpSummary {
    pub operation: Operation,
    pub levels: u32,
    pub verdict: Verdict,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub tool: &'static str,
    pub version: &'static str,
    pub scenario: String,
    pub spec_hash: String,
    pub eps: f64,
    pub cap: usize,
    pub seed: u64,
    pub operations: Vec<OpSummary>,
    pub artifacts: Vec<String>,
    pub verdict: Verdict,
}

/// Summary plus every artifact, keyed by file name, not yet written.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub summary: Summary,
    pub files: BTreeMap<String, String>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.summary.verdict == Verdict::Pass
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            EXIT_PASS
        } else {
            EXIT_FAIL
        }
    }
}

fn ratio(v: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        v / scale
    } else {
        v
    }
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

/// CSV over a physical grid: coordinates then the named columns, rows in
/// row-major node order.
pub fn physical_csv(axes: &[AxisSpec], columns: &[(String, &ArrayD<f64>)]) -> String {
    let names = ["x", "y", "z"];
    let mut out = String::new();
    let mut header: Vec<String> = names[..axes.len()].iter().map(|s| s.to_string()).collect();
    header.extend(columns.iter().map(|(n, _)| n.clone()));
    writeln!(out, "{}", header.join(",")).unwrap();
    let coords: Vec<Vec<f64>> = axes.iter().map(|a| a.coords()).collect();
    if let Some((_, first)) = columns.first() {
        for (idx, _) in first.indexed_iter() {
            let mut row: Vec<String> = (0..axes.len()).map(|k| format!("{:e}", coords[k][idx[k]])).collect();
            row.extend(columns.iter().map(|(_, c)| format!("{:e}", c[&idx])));
            writeln!(out, "{}", row.join(",")).unwrap();
        }
    }
    out
}

fn scopes(spec: &SystemSpec) -> Vec<Scope> {
    let mut v: Vec<Scope> = (0..spec.sorts.len()).map(Scope::Sort).collect();
    if spec.sorts.len() > 1 {
        v.push(Scope::Total);
    }
    v
}

const AXIS: [&str; 3] = ["x", "y", "z"];

// ---------------------------------------------------------------------------
// fields

#[derive(Clone, Debug, Serialize)]
pub struct GaussianCheck {
    pub w_rel_error: f64,
    pub d_rel_error: f64,
    pub momentum: f64,
    pub momentum_error: f64,
}

/// Compares w, d and ⟨p̂⟩ of a free Gaussian packet with their closed forms
/// on the eps-mask of D.
pub fn gaussian_check(psi: &WaveField, sigma: f64, k0: f64, eps: f64) -> Result<GaussianCheck> {
    let m = psi.spec.sorts[0].mass;
    let hbar = psi.spec.hbar;
    let w = particle_velocity(psi, 0, 0, eps)?;
    let d = osmotic_velocity(psi, 0, 0, eps)?;
    let xs = psi.grid.axes[0].coords();
    let w_exact = hbar * k0 / m;
    let (mut ew, mut ed, mut dmax) = (0.0f64, 0.0f64, 0.0f64);
    for (i, &x) in xs.iter().enumerate() {
        if w.defined[[i].as_slice()] {
            let d_exact = hbar * x / (2.0 * m * sigma * sigma);
            ew = ew.max((w.comps[0][[i].as_slice()] - w_exact).abs());
            ed = ed.max((d.comps[0][[i].as_slice()] - d_exact).abs());
            dmax = dmax.max(d_exact.abs());
        }
    }
    let p = momentum_expectation(psi, 0, 0)?[0];
    Ok(GaussianCheck {
        w_rel_error: ew / w_exact.abs(),
        d_rel_error: ed / dmax,
        momentum: p,
        momentum_error: (p - hbar * k0).abs(),
    })
}

fn op_fields(cfg: &RunConfig, files: &mut BTreeMap<String, String>) -> Result<Vec<Check>> {
    let sc = &cfg.scenario;
    let psi = sc.wave(0, Some(cfg.cap))?;
    let spec = &psi.spec;
    let mut checks = vec![
        Check::at_most("norm_error", (psi.norm_sq() - 1.0).abs(), 1e-12),
        Check::at_most("boundary_ratio", psi.boundary_ratio(), crate::configspace::BOUNDARY_RATIO),
    ];
    for scope in scopes(spec) {
        let label = scope.label(spec);
        let rho = mass_density(&psi, scope)?;
        let j = mass_current(&psi, scope)?;
        let v = mean_velocity(&rho, &j, cfg.eps)?;
        let defined = v.defined_mask().mapv(|b| if b { 1.0 } else { 0.0 });
        let mut cols: Vec<(String, &ArrayD<f64>)> = vec![("rho".into(), &rho.values)];
        for (c, a) in j.comps.iter().enumerate() {
            cols.push((format!("j_{}", AXIS[c]), a));
        }
        for (c, a) in v.comps.iter().enumerate() {
            cols.push((format!("v_{}", AXIS[c]), a));
        }
        cols.push(("v_defined".into(), &defined));
        let qp;
        if let Scope::Sort(s) = scope {
            qp = scalar_quantum_pressure(&psi, s)?;
            cols.push(("quantum_pressure".into(), &qp.values));
        }
        files.insert(format!("fields_{label}.csv"), physical_csv(&rho.axes, &cols));
    }
    // The density-weighted average of each particle's relative velocity
    // vanishes wherever the sort's mean velocity is defined.
    let d = total_density(&psi);
    for (s, sort) in spec.sorts.iter().enumerate() {
        let u = relative_velocity(&psi, s, 0, Reference::PerSort, cfg.eps)?;
        let j = mass_current(&psi, Scope::Sort(s))?;
        let scale = sort.count as f64 * sort.mass;
        let v = mean_velocity(&mass_density(&psi, Scope::Sort(s))?, &j, cfg.eps)?;
        let vmask = v.defined_mask();
        let mut worst = 0.0f64;
        for c in u.comps.iter() {
            let integrand = c * &d;
            let avg = crate::configspace::marginalize(&integrand, &psi.grid, s, 0)?.mapv(|x| x * scale);
            worst = worst.max(mask::max_abs_on(&avg, &vmask));
        }
        checks.push(Check::at_most(format!("weighted_relative_velocity_{}", sort.label), ratio(worst, j.max_abs()), 1e-8));
    }
    if sc.name == "gaussian1d" {
        let g = gaussian_check(&psi, GAUSSIAN_SIGMA, GAUSSIAN_K0, cfg.eps)?;
        checks.push(Check::at_most("gaussian_w_rel_error", g.w_rel_error, 1e-6));
        checks.push(Check::at_most("gaussian_d_rel_error", g.d_rel_error, 1e-6));
        checks.push(Check::at_most("gaussian_momentum_error", g.momentum_error, 1e-8));
        files.insert("reference.json".into(), json(&(sc.expected(), g))?);
    }
    Ok(checks)
}

// ---------------------------------------------------------------------------
// tensors

fn max_abs(a: &ArrayD<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn tensor_gap(a: &TensorField, b: &TensorField, on: Option<&ArrayD<bool>>) -> f64 {
    a.max_abs_diff(b, on)
}

/// Identity checks on the momentum-flow and pressure tensors of one state.
pub fn tensor_checks(psi: &WaveField, eps: f64) -> Result<(Vec<Check>, BTreeMap<String, String>)> {
    let spec = &psi.spec;
    let mut checks = Vec::new();
    let mut files = BTreeMap::new();
    let d = spec.spatial_dim;
    for scope in scopes(spec) {
        let label = scope.label(spec);
        let pi_set = tensor_set(psi, scope, Family::MomentumFlow, eps)?;
        let p_set = tensor_set(psi, scope, Family::Pressure, eps)?;
        let vmask = p_set.defined.clone();
        let mut csv_cols: Vec<(String, ArrayD<f64>)> = Vec::new();
        for version in [Version::K, Version::W] {
            let tag = format!("{label}_{version:?}");
            let pi = pi_set.get(version, Part::Full);
            let p = p_set.get(version, Part::Full);
            let scale = pi.max_abs().max(p.max_abs());
            let dyad = advection_dyad(psi, scope, version, eps)?;
            let bridge = p.minus(&pi.minus(&dyad, Part::Full), Part::Full);
            checks.push(Check::at_most(
                format!("bridge_{tag}"),
                ratio(bridge.max_abs_diff(&zero_like(&bridge), Some(&vmask)), scale),
                1e-10,
            ));
            for (fam, set) in [("pi", &pi_set), ("p", &p_set)] {
                let full = set.get(version, Part::Full);
                let cl_qu = set.get(version, Part::Classical).plus(&set.get(version, Part::Quantum), Part::Full);
                let p12 = set.get(version, Part::Part1).plus(&set.get(version, Part::Part2), Part::Full);
                checks.push(Check::at_most(format!("split_cl_qu_{fam}_{tag}"), ratio(tensor_gap(&full, &cl_qu, None), scale), 1e-12));
                checks.push(Check::at_most(format!("split_1_2_{fam}_{tag}"), ratio(tensor_gap(&full, &p12, None), scale), 1e-12));
                checks.push(Check::at_most(format!("symmetry_{fam}_{tag}"), ratio(full.max_asymmetry(), scale), 1e-12));
            }
            // Quantum parts through subtraction of the classical parts.
            let p_qu = p.minus(&p_set.get(version, Part::Classical), Part::Quantum);
            let pi_qu = pi.minus(&pi_set.get(version, Part::Classical), Part::Quantum);
            checks.push(Check::at_most(format!("quantum_equality_{tag}"), ratio(tensor_gap(&p_qu, &pi_qu, None), scale), 1e-12));
            for (n, t) in [("pi", &pi), ("p", &p)] {
                for a in 0..d {
                    for b in a..d {
                        csv_cols.push((format!("{n}{version:?}_{}{}", AXIS[a], AXIS[b]), t.at(a, b).clone()));
                    }
                }
            }
        }
        let (pk, pw) = (p_set.get(Version::K, Part::Full), p_set.get(Version::W, Part::Full));
        if d >= 2 {
            let gap = ratio(tensor_gap(&pw, &pk, None), pk.max_abs().max(pw.max_abs()));
            checks.push(Check::at_least(format!("gauge_elementwise_gap_{label}"), gap, GAUGE_GAP_MIN));
        }
        if spec.n_particles() == 1 {
            let cl = p_set.get(Version::K, Part::Classical);
            let full = p_set.get(Version::K, Part::Full);
            checks.push(Check::at_most(
                format!("one_particle_classical_{label}"),
                ratio(cl.max_abs_diff(&zero_like(&cl), Some(&vmask)), full.max_abs()),
                1e-10,
            ));
        }
        if d >= 2 {
            checks.push(Check::at_most(format!("gauge_shift_divergence_{label}"), gauge_shift_change(&pk), 1e-12));
        }
        let cols: Vec<(String, &ArrayD<f64>)> = csv_cols.iter().map(|(n, a)| (n.clone(), a)).collect();
        files.insert(format!("tensors_{label}.csv"), physical_csv(&pi_set.axes, &cols));
    }
    if spec.sorts.len() > 1 {
        checks.extend(additivity_checks(psi, eps)?);
    }
    Ok((checks, files))
}

fn zero_like(t: &TensorField) -> TensorField {
    TensorField { comps: t.comps.iter().map(|c| ArrayD::zeros(c.raw_dim())).collect(), ..t.clone() }
}

/// Relative change of ∇·p under p_xy += Cx, p_yx += Cx, p_yy −= Cy.
pub fn gauge_shift_change(p: &TensorField) -> f64 {
    let before = tensor_divergence_cartesian(p);
    let mut shifted = p.clone();
    let c = p.max_abs() / p.axes[0].max.abs().max(p.axes[0].min.abs());
    let xs = p.axes[0].coords();
    let ys = p.axes[1].coords();
    let sx = ArrayD::from_shape_fn(p.at(0, 1).raw_dim(), |i| c * xs[i[0]]);
    let sy = ArrayD::from_shape_fn(p.at(0, 1).raw_dim(), |i| c * ys[i[1]]);
    *shifted.at_mut(0, 1) += &sx;
    *shifted.at_mut(1, 0) += &sx;
    *shifted.at_mut(1, 1) -= &sy;
    let after = tensor_divergence_cartesian(&shifted);
    let scale = before.max_abs().max(c);
    let mut worst = 0.0f64;
    for (a, b) in before.comps.iter().zip(&after.comps) {
        worst = worst.max(max_abs(&(a - b)));
    }
    worst / scale
}

/// ρ, j and Π add over sorts; p does not.
pub fn additivity_checks(psi: &WaveField, eps: f64) -> Result<Vec<Check>> {
    let spec = &psi.spec;
    let n = spec.sorts.len();
    let mut checks = Vec::new();
    let rho_tot = mass_density(psi, Scope::Total)?.values;
    let mut rho_sum = ArrayD::<f64>::zeros(rho_tot.raw_dim());
    for s in 0..n {
        rho_sum += &mass_density(psi, Scope::Sort(s))?.values;
    }
    checks.push(Check::at_most("additivity_rho", ratio(max_abs(&(&rho_tot - &rho_sum)), max_abs(&rho_tot)), 1e-12));
    for (fam, name, additive) in [(Family::MomentumFlow, "pi", true), (Family::Pressure, "p", false)] {
        for version in [Version::K, Version::W] {
            let tot = tensor_set(psi, Scope::Total, fam, eps)?.get(version, Part::Full);
            let mut sum = zero_like(&tot);
            for s in 0..n {
                sum = sum.plus(&tensor_set(psi, Scope::Sort(s), fam, eps)?.get(version, Part::Full), Part::Full);
            }
            let gap = ratio(tensor_gap(&tot, &sum, None), tot.max_abs());
            let cname = format!("additivity_{name}_{version:?}");
            checks.push(if additive { Check::at_most(cname, gap, 1e-12) } else { Check::at_least(cname, gap, 1e-3) });
        }
    }
    Ok(checks)
}

fn op_tensors(cfg: &RunConfig, files: &mut BTreeMap<String, String>) -> Result<Vec<Check>> {
    let psi = cfg.scenario.wave(0, Some(cfg.cap))?;
    let (checks, f) = tensor_checks(&psi, cfg.eps)?;
    files.extend(f);
    files.insert("tensors.json".into(), json(&checks)?);
    Ok(checks)
}

// ---------------------------------------------------------------------------
// check

#[derive(Clone, Debug, Serialize)]
pub struct LevelResiduals {
    pub level: u32,
    pub h: f64,
    pub n_points: usize,
    pub reports: Vec<ResidualReport>,
    /// max |r_K − r_W| / scale per law and scope.
    pub version_gaps: BTreeMap<String, f64>,
    /// max curl of w and d per sort, with C = curl / h⁴.
    pub curls: BTreeMap<String, f64>,
}

/// Pointwise bound on |r_K − r_W| / scale.
pub const VERSION_GAP_LIMIT: f64 = 1e-10;
/// Smallest relative elementwise gap max|p^W − p^K| counted as a genuine
/// difference between the two tensors.
pub const GAUGE_GAP_MIN: f64 = 1e-4;

/// Residual reports of every law, scope and version on one state.
pub fn residual_suite(psi: &WaveField, eps: f64, tol: f64) -> Result<(Vec<ResidualReport>, BTreeMap<String, f64>)> {
    let mut reports = Vec::new();
    let mut gaps = BTreeMap::new();
    for scope in scopes(&psi.spec) {
        let label = scope.label(&psi.spec);
        reports.push(mpce_residual(psi, scope, eps)?.report.with_tolerance(tol));
        for (law, f) in [
            ("mpeem", mpeem_residual as fn(&WaveField, Scope, Version, f64) -> Result<Residual>),
            ("mpqce", mpqce_residual),
        ] {
            let rk = f(psi, scope, Version::K, eps)?;
            let rw = f(psi, scope, Version::W, eps)?;
            let mut worst = 0.0f64;
            for (a, b) in rk.comps.iter().zip(&rw.comps) {
                worst = worst.max(mask::max_abs_on(&(a - b), &rk.mask));
            }
            gaps.insert(format!("{law}_{label}"), ratio(worst, rk.report.scale.max(rw.report.scale)));
            reports.push(rk.report.with_tolerance(tol));
            reports.push(rw.report.with_tolerance(tol));
        }
        reports.push(gauge_divergence_check(psi, scope, eps)?.report.with_tolerance(tol));
    }
    Ok((reports, gaps))
}

/// Curl maxima of w and d for particle 1 of each sort (d ≥ 2).
pub fn curl_suite(psi: &WaveField, eps: f64) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    if psi.spec.spatial_dim < 2 {
        return Ok(out);
    }
    for (s, sort) in psi.spec.sorts.iter().enumerate() {
        let k = psi.grid.first_axis(s, 0)?;
        let h = psi.grid.axes[k].h();
        let w = particle_velocity(psi, s, 0, eps)?;
        let d = osmotic_velocity(psi, s, 0, eps)?;
        for (n, f) in [("w", &w), ("d", &d)] {
            let c = max_curl(f, &psi.grid)?;
            out.insert(format!("curl_{n}_{}", sort.label), c);
            out.insert(format!("curl_{n}_{}_per_h4", sort.label), c / h.powi(4));
        }
    }
    Ok(out)
}

fn op_check(cfg: &RunConfig, files: &mut BTreeMap<String, String>) -> Result<Vec<Check>> {
    let sc = &cfg.scenario;
    let levels = cfg.levels_for(Operation::Check);
    let mut per_level = Vec::new();
    for l in 0..levels {
        let psi = sc.ladder_wave(l, Some(cfg.cap))?;
        let (reports, version_gaps) = residual_suite(&psi, cfg.eps, sc.tolerances.residual)?;
        let curls = curl_suite(&psi, cfg.eps)?;
        per_level.push(LevelResiduals {
            level: l,
            h: psi.grid.axes[0].h(),
            n_points: psi.grid.n_points(),
            reports,
            version_gaps,
            curls,
        });
    }
    if levels >= 2 {
        let n = per_level[0].reports.len();
        for i in 0..n {
            let mut chain: Vec<ResidualReport> = per_level.iter().map(|l| l.reports[i].clone()).collect();
            attach_orders(&mut chain, sc.tolerances.min_order);
            for (lvl, r) in per_level.iter_mut().zip(chain) {
                lvl.reports[i] = r;
            }
        }
    }
    let mut checks = Vec::new();
    for lvl in &per_level {
        for r in &lvl.reports {
            let tag = format!("L{}_{}_{}{}", lvl.level, law_name(r), r.scope, r.version.map_or(String::new(), |v| format!("_{v:?}")));
            checks.push(Check::at_most(format!("{tag}_linf_rel"), ratio(r.linf, r.scale), r.tolerance));
            if let (Some(o), Some(m)) = (r.order, r.min_order) {
                checks.push(Check::at_least(format!("{tag}_order"), o, m));
            }
        }
        for (k, g) in &lvl.version_gaps {
            checks.push(Check::at_most(format!("L{}_version_gap_{k}", lvl.level), *g, VERSION_GAP_LIMIT));
        }
    }
    // Curl maxima must fall at least like h⁴ (fitted C not growing) or sit
    // at rounding level.
    if levels >= 2 {
        let keys: Vec<String> =
            per_level[0].curls.keys().filter(|k| k.ends_with("_per_h4")).cloned().collect();
        for k in keys {
            let c0 = per_level[0].curls[&k];
            let raw = k.trim_end_matches("_per_h4");
            for lvl in &per_level[1..] {
                let c = lvl.curls[&k];
                let at_roundoff = lvl.curls[raw] <= 1e-10;
                let growth = if at_roundoff { 0.0 } else { c / c0 };
                checks.push(Check::at_most(format!("L{}_{k}_growth", lvl.level), growth, 2.0));
            }
        }
    }
    files.insert("residuals.json".into(), json(&per_level)?);
    Ok(checks)
}

fn law_name(r: &ResidualReport) -> String {
    serde_json::to_value(r.law).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

// ---------------------------------------------------------------------------
// cyl

fn op_cyl(cfg: &RunConfig, files: &mut BTreeMap<String, String>) -> Result<Vec<Check>> {
    let sc = &cfg.scenario;
    let levels = cfg.levels_for(Operation::Cyl);
    let mut comps: Vec<Vec<CylComparison>> = Vec::new();
    let mut checks = Vec::new();
    for l in 0..levels {
        let psi = sc.ladder_wave(l, Some(cfg.cap))?;
        let mut per_sort = Vec::new();
        for s in 0..psi.spec.sorts.len() {
            let c = cyl_comparison(&psi, s, cfg.eps)?;
            let tag = format!("L{l}_{}", c.sort);
            checks.push(Check::at_most(format!("{tag}_symmetry"), c.symmetry.worst_ratio(), c.symmetry.limit));
            checks.push(Check::at_most(format!("{tag}_e_phi_k"), ratio(c.e_phi_k, c.scale), 1e-8));
            checks.push(Check::at_most(format!("{tag}_e_phi_w"), ratio(c.e_phi_w, c.scale), 1e-8));
            checks.push(Check::at_most(format!("{tag}_off_diagonal_phi"), c.off_diagonal_phi, 0.0));
            checks.push(Check::at_most(format!("{tag}_asymmetry"), ratio(c.asymmetry, c.scale), 1e-12));
            if l == 0 {
                files.insert(format!("cyl_elements_{}.csv", c.sort), cyl_elements_csv(&psi, s, cfg.eps)?);
            }
            per_sort.push(c);
        }
        comps.push(per_sort);
    }
    for l in 1..comps.len() {
        for (c0, c1) in comps[l - 1].iter().zip(&comps[l]) {
            let o = |a: f64, b: f64| (a / b).ln() / (c0.h / c1.h).ln();
            checks.push(Check::at_least(format!("L{l}_{}_cart_order_k", c1.sort), o(c0.cart_gap_k_l2, c1.cart_gap_k_l2), 2.0));
            checks.push(Check::at_least(format!("L{l}_{}_cart_order_w", c1.sort), o(c0.cart_gap_w_l2, c1.cart_gap_w_l2), 2.0));
            checks.push(Check::at_least(format!("L{l}_{}_gauge_gap_order", c1.sort), o(c0.gauge_gap_l2, c1.gauge_gap_l2), 2.0));
        }
    }
    // Seeded spot checks of the rotation matrix.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut orth = 0.0f64;
    let mut det = 0.0f64;
    for _ in 0..64 {
        let lam = rotation_matrix(rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI));
        let p = lam.times(&lam.transpose());
        for (i, row) in p.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                orth = orth.max((x - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        det = det.max((lam.det() - 1.0).abs());
    }
    checks.push(Check::at_most("rotation_orthogonality", orth, 1e-14));
    checks.push(Check::at_most("rotation_determinant", det, 1e-14));
    files.insert("cyl.json".into(), json(&comps)?);
    Ok(checks)
}

/// Half-plane elements of one sort: ρ, z, the second-order Kuzmenkov
/// elements, the scalar pressure and the full tensors' ρρ, φφ, zz, ρz.
pub fn cyl_elements_csv(psi: &WaveField, sort: usize, eps: f64) -> Result<String> {
    let parts = cyl_pressure_parts(psi, sort, eps)?;
    let g = &parts.half.grid;
    let rho = g.rho.coords();
    let z = g.z.map_or(vec![0.0], |a| a.coords());
    let (fk, fw) = (parts.full_k(), parts.full_w());
    let mut cols: Vec<(&str, &ArrayD<f64>)> = vec![
        ("k2_rr", parts.part2_k.at(0, 0)),
        ("k2_pp", parts.part2_k.at(1, 1)),
        ("k2_zz", parts.part2_k.at(2, 2)),
        ("k2_rz", parts.part2_k.at(0, 2)),
        ("k2_rp", parts.part2_k.at(0, 1)),
        ("k2_pz", parts.part2_k.at(1, 2)),
        ("pressure", &parts.pressure),
    ];
    let named = [("pk_rr", fk.at(0, 0)), ("pk_pp", fk.at(1, 1)), ("pk_zz", fk.at(2, 2)), ("pk_rz", fk.at(0, 2))];
    cols.extend(named);
    cols.extend([("pw_rr", fw.at(0, 0)), ("pw_pp", fw.at(1, 1)), ("pw_zz", fw.at(2, 2)), ("pw_rz", fw.at(0, 2))]);
    let mut out = String::new();
    let header: Vec<&str> = ["rho", "z", "in_mask"].into_iter().chain(cols.iter().map(|c| c.0)).collect();
    writeln!(out, "{}", header.join(",")).unwrap();
    let mut masked = ArrayD::<f64>::zeros(parts.mask.raw_dim());
    Zip::from(&mut masked).and(&parts.mask).for_each(|o, &m| *o = if m { 1.0 } else { 0.0 });
    for (idx, _) in masked.indexed_iter() {
        let mut row = vec![format!("{:e}", rho[idx[0]]), format!("{:e}", z[idx[2]]), format!("{}", masked[&idx])];
        row.extend(cols.iter().map(|(_, a)| format!("{:e}", a[&idx])));
        writeln!(out, "{}", row.join(",")).unwrap();
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// driver

/// Runs every requested operation in memory.
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut files = BTreeMap::new();
    let mut ops = Vec::new();
    let mut ordered = cfg.operations.clone();
    ordered.sort();
    ordered.dedup();
    for op in ordered {
        let checks = match op {
            Operation::Fields => op_fields(cfg, &mut files)?,
            Operation::Tensors => op_tensors(cfg, &mut files)?,
            Operation::Check => op_check(cfg, &mut files)?,
            Operation::Cyl => op_cyl(cfg, &mut files)?,
        };
        let ok = checks.iter().all(|c| c.passed);
        ops.push(OpSummary { operation: op, levels: cfg.levels_for(op), verdict: Verdict::from_bool(ok), checks });
    }
    files.insert("scenario.json".into(), json(&cfg.scenario)?);
    let mut artifacts: Vec<String> = files.keys().cloned().collect();
    artifacts.push("summary.json".into());
    artifacts.sort();
    let verdict = Verdict::from_bool(ops.iter().all(|o| o.verdict == Verdict::Pass));
    let summary = Summary {
        tool: "mpqhd",
        version: env!("CARGO_PKG_VERSION"),
        scenario: cfg.scenario.name.clone(),
        spec_hash: cfg.scenario.spec.hash(),
        eps: cfg.eps,
        cap: cfg.cap,
        seed: cfg.seed,
        operations: ops,
        artifacts,
        verdict,
    };
    files.insert("summary.json".into(), json(&summary)?);
    Ok(RunOutcome { summary, files })
}

/// Writes the bundle into `dir`, creating it if needed.
pub fn write_outcome(outcome: &RunOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (name, body) in &outcome.files {
        fs::write(dir.join(name), body)?;
    }
    Ok(())
}

/// Default output directory for a run.
pub fn default_out(cfg: &RunConfig) -> PathBuf {
    PathBuf::from("mpqhd-out").join(&cfg.scenario.name)
}
