//! Plain `key = value` run configuration, problem assembly and the
//! subcommands of the `trisolve` binary.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::discretization::{build_mesh, smallest_eigenpair, write_field_csv, Discretization, Eigenpair, Field, Mesh};
use crate::energy::{Equation, ProblemConfig};
use crate::error::{Error, Result};
use crate::explorer::{
    check_alternative, explore, AlphaFamily, BranchEnergies, EqualizeOptions, ExploreOptions, FamilyKind,
    SCHEMA_VERSION,
};
use crate::nonlinearity::{
    check_condition16, gamma_corollary2, scale_f_corollary2, Nonlinearity, ThresholdReport,
};
use crate::solvers::{hessian_flag, multistart_find, HessianFlag, SolutionSet, SolverOptions, Starts};

/// File name of the effective configuration written to the output directory.
pub const ECHO_FILE: &str = "effective.conf";

#[derive(Debug, Clone, PartialEq)]
pub enum GSpec {
    PlusPower { q: f64 },
    Table { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub enum HSpec {
    One,
    Table { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub enum FSpec {
    One,
    Table { path: PathBuf },
    /// `f = sqrt(λ/γ) h`
    Corollary2Scaled { h: HSpec },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaMode {
    Absolute,
    MultipleOfLambda1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaConfig {
    pub family: FamilyKind,
    pub bound: f64,
    pub segment: Option<(f64, f64)>,
    pub direction: Option<Vec<f64>>,
    /// Fixed coefficients for `solve`; zeros when absent.
    pub coefficients: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dim: usize,
    pub n: usize,
    pub lengths: Vec<f64>,
    pub g: GSpec,
    pub f: FSpec,
    pub lambda_mode: LambdaMode,
    pub lambda_value: f64,
    pub alpha: AlphaConfig,
    pub solver: SolverOptions,
    pub equalize: EqualizeOptions,
    pub radii: Vec<f64>,
    pub check_radius: f64,
    pub check_samples: usize,
    pub eigen_tol: f64,
    pub output_dir: PathBuf,
    pub seed: u64,
}

const KEYS: &[&str] = &[
    "domain.dim",
    "domain.n",
    "domain.lengths",
    "nonlinearity.g.kind",
    "nonlinearity.g.q",
    "nonlinearity.g.table_path",
    "nonlinearity.f.kind",
    "nonlinearity.f.table_path",
    "nonlinearity.f.h_kind",
    "lambda.mode",
    "lambda.value",
    "alpha.family",
    "alpha.k",
    "alpha.bound",
    "alpha.segment",
    "alpha.direction",
    "alpha.coefficients",
    "solver.newton_tol",
    "solver.max_newton",
    "solver.armijo_c",
    "solver.backtrack",
    "solver.max_halvings",
    "solver.deflation_power",
    "solver.deflation_shift",
    "solver.distinct_tol",
    "solver.max_starts",
    "solver.max_rounds",
    "explore.tol_gap",
    "explore.radii",
    "explore.grid_points",
    "explore.max_bisect",
    "check.radius",
    "check.samples",
    "eigen.tol",
    "output.dir",
    "seed",
];

/// Splits `text` into a key/value map. Blank lines and lines starting with
/// `#` are ignored.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| Error::ConfigParse { line: i + 1, message };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("expected `key = value`, got `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(bad(format!("unknown key `{key}`")));
        }
        if value.is_empty() {
            return Err(bad(format!("empty value for `{key}`")));
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(bad(format!("duplicate key `{key}`")));
        }
    }
    Ok(map)
}

fn invalid(key: &str, message: impl Into<String>) -> Error {
    Error::ConfigValue {
        key: key.into(),
        message: message.into(),
    }
}

struct Values<'a> {
    map: &'a BTreeMap<String, String>,
    base_dir: &'a Path,
}

impl Values<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| invalid(key, format!("cannot parse `{v}`: {e}"))),
        }
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<f64>()
                            .map_err(|e| invalid(key, format!("cannot parse `{}`: {e}", s.trim())))
                    })
                    .collect()
            })
            .transpose()
    }

    fn path(&self, key: &str) -> Result<PathBuf> {
        let p = self
            .raw(key)
            .ok_or_else(|| invalid(key, "required by the selected kind"))?;
        Ok(self.base_dir.join(p))
    }

    fn unused(&self, key: &str, reason: &str) -> Result<()> {
        match self.raw(key) {
            Some(_) => Err(invalid(key, format!("not used {reason}"))),
            None => Ok(()),
        }
    }
}

impl RunConfig {
    /// Parses and validates a configuration. Relative paths resolve
    /// against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let map = parse_pairs(text)?;
        let v = Values {
            map: &map,
            base_dir,
        };

        let dim: usize = v.get("domain.dim", 1)?;
        if !(1..=2).contains(&dim) {
            return Err(invalid("domain.dim", format!("must be 1 or 2, got {dim}")));
        }
        let n: usize = v.get("domain.n", 200)?;
        if n < 2 {
            return Err(invalid("domain.n", format!("must be >= 2, got {n}")));
        }
        let lengths = v.list("domain.lengths")?.unwrap_or_else(|| vec![1.0; dim]);
        if lengths.len() != dim {
            return Err(invalid(
                "domain.lengths",
                format!("expected {dim} entries, got {}", lengths.len()),
            ));
        }
        if lengths.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(invalid("domain.lengths", "entries must be > 0"));
        }

        let g = match v.raw("nonlinearity.g.kind").unwrap_or("plus_power") {
            "plus_power" => {
                v.unused("nonlinearity.g.table_path", "with g.kind = plus_power")?;
                let q: f64 = v.get("nonlinearity.g.q", 3.0)?;
                if !(q > 1.0 && q.is_finite()) {
                    return Err(invalid("nonlinearity.g.q", format!("must satisfy q > 1, got {q}")));
                }
                GSpec::PlusPower { q }
            }
            "table" => {
                v.unused("nonlinearity.g.q", "with g.kind = table")?;
                GSpec::Table {
                    path: v.path("nonlinearity.g.table_path")?,
                }
            }
            other => {
                return Err(invalid(
                    "nonlinearity.g.kind",
                    format!("expected plus_power or table, got `{other}`"),
                ))
            }
        };

        let f_kind = v.raw("nonlinearity.f.kind").unwrap_or("corollary2_scaled");
        if f_kind != "corollary2_scaled" {
            v.unused("nonlinearity.f.h_kind", "unless f.kind = corollary2_scaled")?;
        }
        let f = match f_kind {
            "one" => {
                v.unused("nonlinearity.f.table_path", "with f.kind = one")?;
                FSpec::One
            }
            "table" => FSpec::Table {
                path: v.path("nonlinearity.f.table_path")?,
            },
            "corollary2_scaled" => {
                let h = match v.raw("nonlinearity.f.h_kind").unwrap_or("one") {
                    "one" => {
                        v.unused("nonlinearity.f.table_path", "with f.h_kind = one")?;
                        HSpec::One
                    }
                    "table" => HSpec::Table {
                        path: v.path("nonlinearity.f.table_path")?,
                    },
                    other => {
                        return Err(invalid(
                            "nonlinearity.f.h_kind",
                            format!("expected one or table, got `{other}`"),
                        ))
                    }
                };
                FSpec::Corollary2Scaled { h }
            }
            other => {
                return Err(invalid(
                    "nonlinearity.f.kind",
                    format!("expected one, table or corollary2_scaled, got `{other}`"),
                ))
            }
        };

        let lambda_mode = match v.raw("lambda.mode").unwrap_or("multiple_of_lambda1") {
            "absolute" => LambdaMode::Absolute,
            "multiple_of_lambda1" => LambdaMode::MultipleOfLambda1,
            other => {
                return Err(invalid(
                    "lambda.mode",
                    format!("expected absolute or multiple_of_lambda1, got `{other}`"),
                ))
            }
        };
        let lambda_value: f64 = v.get("lambda.value", 2.0)?;
        if !(lambda_value >= 0.0 && lambda_value.is_finite()) {
            return Err(invalid("lambda.value", format!("must be >= 0, got {lambda_value}")));
        }

        let family = match v.raw("alpha.family").unwrap_or("constants") {
            "constants" => {
                v.unused("alpha.k", "with alpha.family = constants")?;
                FamilyKind::Constants
            }
            "piecewise_constant" => FamilyKind::PiecewiseConstant {
                k: v.get("alpha.k", 4)?,
            },
            "sine_series" => FamilyKind::SineSeries {
                k: v.get("alpha.k", 4)?,
            },
            other => {
                return Err(invalid(
                    "alpha.family",
                    format!("expected constants, piecewise_constant or sine_series, got `{other}`"),
                ))
            }
        };
        if let FamilyKind::PiecewiseConstant { k } | FamilyKind::SineSeries { k } = family {
            if k == 0 {
                return Err(invalid("alpha.k", "must be >= 1"));
            }
        }
        let bound: f64 = v.get("alpha.bound", 50.0)?;
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(invalid("alpha.bound", format!("must be > 0, got {bound}")));
        }
        let segment = match v.list("alpha.segment")? {
            None => None,
            Some(s) if s.len() == 2 && s[0] < s[1] => Some((s[0], s[1])),
            Some(_) => return Err(invalid("alpha.segment", "expected `lo, hi` with lo < hi")),
        };
        let alpha = AlphaConfig {
            family,
            bound,
            segment,
            direction: v.list("alpha.direction")?,
            coefficients: v.list("alpha.coefficients")?,
        };

        let d = SolverOptions::default();
        let seed: u64 = v.get("seed", 0)?;
        let solver = SolverOptions {
            newton_tol: v.get("solver.newton_tol", d.newton_tol)?,
            max_newton: v.get("solver.max_newton", d.max_newton)?,
            armijo_c: v.get("solver.armijo_c", d.armijo_c)?,
            backtrack: v.get("solver.backtrack", d.backtrack)?,
            max_halvings: v.get("solver.max_halvings", d.max_halvings)?,
            deflation_power: v.get("solver.deflation_power", d.deflation_power)?,
            deflation_shift: v.get("solver.deflation_shift", d.deflation_shift)?,
            distinct_tol: v
                .raw("solver.distinct_tol")
                .map(|_| v.get("solver.distinct_tol", 0.0))
                .transpose()?,
            max_starts: v.get("solver.max_starts", d.max_starts)?,
            max_rounds: v.get("solver.max_rounds", d.max_rounds)?,
            rng_seed: seed,
        };
        solver.validate()?;

        let e = EqualizeOptions::default();
        let equalize = EqualizeOptions {
            tol_gap: v.get("explore.tol_gap", e.tol_gap)?,
            grid_points: v.get("explore.grid_points", e.grid_points)?,
            max_bisect: v.get("explore.max_bisect", e.max_bisect)?,
        };
        if !(equalize.tol_gap > 0.0) {
            return Err(invalid("explore.tol_gap", "must be > 0"));
        }
        if equalize.grid_points < 2 {
            return Err(invalid("explore.grid_points", "must be >= 2"));
        }
        let x = ExploreOptions::default();
        let radii = v.list("explore.radii")?.unwrap_or(x.radii);
        if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) || radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("explore.radii", "expected positive, strictly increasing radii"));
        }
        let check_radius: f64 = v.get("check.radius", x.condition16_radius)?;
        if !(check_radius > 0.0 && check_radius.is_finite()) {
            return Err(invalid("check.radius", "must be > 0"));
        }
        let check_samples: usize = v.get("check.samples", x.condition16_samples)?;
        if check_samples < 1000 {
            return Err(invalid("check.samples", format!("must be >= 1000, got {check_samples}")));
        }
        let eigen_tol: f64 = v.get("eigen.tol", x.eigen_tol)?;
        if !(eigen_tol > 0.0) {
            return Err(invalid("eigen.tol", "must be > 0"));
        }
        let output_dir = base_dir.join(v.raw("output.dir").unwrap_or("out"));

        Ok(Self {
            dim,
            n,
            lengths,
            g,
            f,
            lambda_mode,
            lambda_value,
            alpha,
            solver,
            equalize,
            radii,
            check_radius,
            check_samples,
            eigen_tol,
            output_dir,
            seed,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.solver.rng_seed = seed;
        self
    }

    pub fn with_output_dir(mut self, dir: PathBuf) -> Self {
        self.output_dir = dir;
        self
    }

    /// Every key with its effective value. Paths are absolute when the
    /// configuration was loaded from a file.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let list = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ");
        let path = |p: &Path| p.display().to_string();
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("domain.dim", self.dim.to_string());
        put("domain.n", self.n.to_string());
        put("domain.lengths", list(&self.lengths));
        match &self.g {
            GSpec::PlusPower { q } => {
                put("nonlinearity.g.kind", "plus_power".into());
                put("nonlinearity.g.q", q.to_string());
            }
            GSpec::Table { path: p } => {
                put("nonlinearity.g.kind", "table".into());
                put("nonlinearity.g.table_path", path(p));
            }
        }
        match &self.f {
            FSpec::One => put("nonlinearity.f.kind", "one".into()),
            FSpec::Table { path: p } => {
                put("nonlinearity.f.kind", "table".into());
                put("nonlinearity.f.table_path", path(p));
            }
            FSpec::Corollary2Scaled { h } => {
                put("nonlinearity.f.kind", "corollary2_scaled".into());
                match h {
                    HSpec::One => put("nonlinearity.f.h_kind", "one".into()),
                    HSpec::Table { path: p } => {
                        put("nonlinearity.f.h_kind", "table".into());
                        put("nonlinearity.f.table_path", path(p));
                    }
                }
            }
        }
        put(
            "lambda.mode",
            match self.lambda_mode {
                LambdaMode::Absolute => "absolute",
                LambdaMode::MultipleOfLambda1 => "multiple_of_lambda1",
            }
            .into(),
        );
        put("lambda.value", self.lambda_value.to_string());
        match self.alpha.family {
            FamilyKind::Constants => put("alpha.family", "constants".into()),
            FamilyKind::PiecewiseConstant { k } => {
                put("alpha.family", "piecewise_constant".into());
                put("alpha.k", k.to_string());
            }
            FamilyKind::SineSeries { k } => {
                put("alpha.family", "sine_series".into());
                put("alpha.k", k.to_string());
            }
        }
        put("alpha.bound", self.alpha.bound.to_string());
        if let Some((lo, hi)) = self.alpha.segment {
            put("alpha.segment", list(&[lo, hi]));
        }
        if let Some(d) = &self.alpha.direction {
            put("alpha.direction", list(d));
        }
        if let Some(c) = &self.alpha.coefficients {
            put("alpha.coefficients", list(c));
        }
        let s = &self.solver;
        put("solver.newton_tol", s.newton_tol.to_string());
        put("solver.max_newton", s.max_newton.to_string());
        put("solver.armijo_c", s.armijo_c.to_string());
        put("solver.backtrack", s.backtrack.to_string());
        put("solver.max_halvings", s.max_halvings.to_string());
        put("solver.deflation_power", s.deflation_power.to_string());
        put("solver.deflation_shift", s.deflation_shift.to_string());
        if let Some(d) = s.distinct_tol {
            put("solver.distinct_tol", d.to_string());
        }
        put("solver.max_starts", s.max_starts.to_string());
        put("solver.max_rounds", s.max_rounds.to_string());
        put("explore.tol_gap", self.equalize.tol_gap.to_string());
        put("explore.grid_points", self.equalize.grid_points.to_string());
        put("explore.max_bisect", self.equalize.max_bisect.to_string());
        put("explore.radii", list(&self.radii));
        put("check.radius", self.check_radius.to_string());
        put("check.samples", self.check_samples.to_string());
        put("eigen.tol", self.eigen_tol.to_string());
        put("output.dir", path(&self.output_dir));
        put("seed", self.seed.to_string());
        m
    }

    /// [`Self::echo`] as a config file that parses back to `self`.
    pub fn echo_text(&self) -> String {
        self.echo().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    fn explore_options(&self) -> ExploreOptions {
        ExploreOptions {
            equalize: self.equalize,
            radii: self.radii.clone(),
            segment: self.alpha.segment,
            direction: self.alpha.direction.clone(),
            condition16_radius: self.check_radius,
            condition16_samples: self.check_samples,
            eigen_tol: self.eigen_tol,
        }
    }
}

/// Reads and validates the configuration at `path`. Relative paths inside
/// the file resolve against its directory.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let base = path
        .parent()
        .map(|p| if p.as_os_str().is_empty() { Path::new(".") } else { p })
        .unwrap_or(Path::new("."));
    let base = fs::canonicalize(base)?;
    RunConfig::parse(&text, &base)
}

/// Writes the effective configuration to `<output.dir>/effective.conf`.
pub fn write_echo(cfg: &RunConfig) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.output_dir)?;
    let path = cfg.output_dir.join(ECHO_FILE);
    fs::write(&path, cfg.echo_text())?;
    Ok(path)
}

/// `ξ,value` rows; a non-numeric first row is taken as a header.
pub fn read_table(path: &Path, key: &str) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path).map_err(|e| invalid(key, format!("{}: {e}", path.display())))?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed = line
            .split_once(',')
            .and_then(|(a, b)| Some((a.trim().parse::<f64>().ok()?, b.trim().parse::<f64>().ok()?)));
        match parsed {
            Some(p) => points.push(p),
            None if i == 0 => {}
            None => return Err(invalid(key, format!("{}: bad row {}", path.display(), i + 1))),
        }
    }
    Ok(points)
}

/// A configuration turned into numbers.
#[derive(Debug, Clone)]
pub struct Problem {
    pub problem: ProblemConfig,
    pub family: AlphaFamily,
    pub eigen: Eigenpair,
    pub gamma: Option<f64>,
}

fn table_nonlinearity(path: &Path, key: &str) -> Result<Nonlinearity> {
    Nonlinearity::table(&read_table(path, key)?).map_err(|e| invalid(key, e.to_string()))
}

/// Builds the mesh, the first eigenpair, `λ`, `f` and `g`. `α` is zero.
pub fn build_problem(cfg: &RunConfig) -> Result<Problem> {
    let mesh = build_mesh(cfg.dim, cfg.n, &cfg.lengths)?;
    let disc = Arc::new(Discretization::new(mesh));
    let eigen = smallest_eigenpair(&disc.stiffness, &disc.mass, cfg.eigen_tol)?;
    let lambda = match cfg.lambda_mode {
        LambdaMode::Absolute => cfg.lambda_value,
        LambdaMode::MultipleOfLambda1 => cfg.lambda_value * eigen.lambda,
    };
    let g = match &cfg.g {
        GSpec::PlusPower { q } => Nonlinearity::plus_power(*q)?,
        GSpec::Table { path } => table_nonlinearity(path, "nonlinearity.g.table_path")?,
    };
    let (f, gamma) = match &cfg.f {
        FSpec::One => (Nonlinearity::constant_one(), None),
        FSpec::Table { path } => (table_nonlinearity(path, "nonlinearity.f.table_path")?, None),
        FSpec::Corollary2Scaled { h } => {
            let h = match h {
                HSpec::One => Nonlinearity::constant_one(),
                HSpec::Table { path } => table_nonlinearity(path, "nonlinearity.f.table_path")?,
            };
            let gamma = gamma_corollary2(&h)?;
            (scale_f_corollary2(&h, lambda, gamma)?, Some(gamma))
        }
    };
    let family = AlphaFamily::new(cfg.alpha.family, cfg.alpha.bound, &disc.mesh)?;
    let alpha = Field::zeros(&disc.mesh);
    let problem = ProblemConfig::new(disc, f, g, lambda, alpha)?;
    Ok(Problem {
        problem,
        family,
        eigen,
        gamma,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Eigen,
    Check,
    Solve,
    Alternative,
    Explore,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Eigen => "eigen",
            Command::Check => "check",
            Command::Solve => "solve",
            Command::Alternative => "alternative",
            Command::Explore => "explore",
        }
    }
}

/// What a subcommand produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub report: PathBuf,
    pub summary: String,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn write_csv(path: &Path, mesh: &Mesh, values: &[f64]) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    write_field_csv(mesh, values, &mut out)?;
    out.flush()?;
    Ok(())
}

/// `t,J_pos,J_neg`; a lost branch is written as `NaN`.
pub fn write_branch_table(path: &Path, table: &[BranchEnergies]) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "t,J_pos,J_neg")?;
    for b in table {
        writeln!(
            out,
            "{},{},{}",
            b.t,
            b.j_pos.unwrap_or(f64::NAN),
            b.j_neg.unwrap_or(f64::NAN)
        )?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct EigenReport<'a> {
    schema_version: u32,
    config_echo: BTreeMap<String, String>,
    lambda1: f64,
    iterations: usize,
    residual: f64,
    eigenfunction_csv: &'a str,
    seed: u64,
}

#[derive(Serialize)]
struct CheckReport {
    schema_version: u32,
    config_echo: BTreeMap<String, String>,
    lambda1: f64,
    lambda: f64,
    lambda_in_interval: bool,
    thresholds: ThresholdReport,
    condition16: crate::nonlinearity::Condition16Report,
    seed: u64,
}

#[derive(Serialize)]
struct SolvedSolution {
    index: usize,
    #[serde(flatten)]
    solution: crate::solvers::Solution,
    hessian: HessianFlag,
    csv: String,
}

#[derive(Serialize)]
struct SolveReport {
    schema_version: u32,
    config_echo: BTreeMap<String, String>,
    lambda1: f64,
    lambda: f64,
    alpha_coefficients: Vec<f64>,
    solutions: Vec<SolvedSolution>,
    set: SolutionSet,
    seed: u64,
}

#[derive(Serialize)]
struct AlternativeReport {
    schema_version: u32,
    config_echo: BTreeMap<String, String>,
    lambda1: f64,
    lambda: f64,
    alternative: crate::explorer::AlternativeResult,
    witness_csv: Option<String>,
    seed: u64,
}

/// Runs `command`, writing the echo, a JSON report and CSV files to the
/// output directory. Hard errors are returned; search and hypothesis
/// outcomes of `explore` are reported through the exit code.
pub fn run(command: Command, cfg: &RunConfig) -> Result<RunOutcome> {
    write_echo(cfg)?;
    let dir = &cfg.output_dir;
    let echo = cfg.echo();
    let p = build_problem(cfg)?;
    let mesh = &p.problem.disc.mesh;
    let report = dir.join(format!("{}.json", command.name()));
    match command {
        Command::Eigen => {
            let csv = "eigenfunction.csv";
            write_csv(&dir.join(csv), mesh, &p.eigen.vector)?;
            write_json(
                &report,
                &EigenReport {
                    schema_version: SCHEMA_VERSION,
                    config_echo: echo,
                    lambda1: p.eigen.lambda,
                    iterations: p.eigen.iterations,
                    residual: p.eigen.residual,
                    eigenfunction_csv: csv,
                    seed: cfg.seed,
                },
            )?;
            Ok(RunOutcome {
                exit_code: 0,
                report,
                summary: format!("lambda1 = {}", p.eigen.lambda),
            })
        }
        Command::Check => {
            let cp = &p.problem;
            let thresholds = ThresholdReport::build(&cp.f, &cp.g, p.gamma, p.eigen.lambda)?;
            let condition16 = check_condition16(&cp.f, &cp.g, cp.lambda, cfg.check_radius, cfg.check_samples)?;
            let inside = thresholds.contains(cp.lambda);
            let summary = format!(
                "interval ({}, {}), lambda = {} {}, condition16 pass = {}",
                thresholds.lambda_lo,
                thresholds.lambda_hi,
                cp.lambda,
                if inside { "inside" } else { "outside" },
                condition16.pass
            );
            write_json(
                &report,
                &CheckReport {
                    schema_version: SCHEMA_VERSION,
                    config_echo: echo,
                    lambda1: p.eigen.lambda,
                    lambda: cp.lambda,
                    lambda_in_interval: inside,
                    thresholds,
                    condition16,
                    seed: cfg.seed,
                },
            )?;
            Ok(RunOutcome {
                exit_code: if inside { 0 } else { 2 },
                report,
                summary,
            })
        }
        Command::Solve => {
            let coeffs = cfg
                .alpha
                .coefficients
                .clone()
                .unwrap_or_else(|| vec![0.0; p.family.dim()]);
            if coeffs.len() != p.family.dim() || !p.family.contains(&coeffs) {
                return Err(invalid(
                    "alpha.coefficients",
                    format!(
                        "expected {} coefficients within the family bound {}",
                        p.family.dim(),
                        p.family.coefficient_bound()
                    ),
                ));
            }
            let cp = p.problem.with_alpha(p.family.field(&coeffs)?)?;
            let set = multistart_find(&cp, &cfg.solver, Equation::Main)?;
            let mut solutions = Vec::new();
            for (index, s) in set.members.iter().enumerate() {
                let csv = format!("solution_{index}.csv");
                write_csv(&dir.join(&csv), mesh, &s.u)?;
                solutions.push(SolvedSolution {
                    index,
                    solution: s.clone(),
                    hessian: hessian_flag(&cp, Equation::Main, &s.u)?,
                    csv,
                });
            }
            let summary = format!("{} distinct solutions", set.len());
            write_json(
                &report,
                &SolveReport {
                    schema_version: SCHEMA_VERSION,
                    config_echo: echo,
                    lambda1: p.eigen.lambda,
                    lambda: cp.lambda,
                    alpha_coefficients: coeffs,
                    solutions,
                    set,
                    seed: cfg.seed,
                },
            )?;
            Ok(RunOutcome {
                exit_code: 0,
                report,
                summary,
            })
        }
        Command::Alternative => {
            let starts = Starts::from_eigenpair(&p.problem.disc, &p.eigen, &cfg.solver);
            let alternative = check_alternative(&p.problem, &cfg.solver, &starts.list)?;
            let witness_csv = match alternative.witness_field() {
                Some(w) => {
                    let name = "witness.csv".to_string();
                    write_csv(&dir.join(&name), mesh, w)?;
                    Some(name)
                }
                None => None,
            };
            let summary = format!(
                "nontrivial_found = {}, {} solutions, max L2 norm {:e}",
                alternative.nontrivial_found,
                alternative.solutions.len(),
                alternative.max_l2_norm
            );
            write_json(
                &report,
                &AlternativeReport {
                    schema_version: SCHEMA_VERSION,
                    config_echo: echo,
                    lambda1: p.eigen.lambda,
                    lambda: p.problem.lambda,
                    alternative,
                    witness_csv,
                    seed: cfg.seed,
                },
            )?;
            Ok(RunOutcome {
                exit_code: 0,
                report,
                summary,
            })
        }
        Command::Explore => {
            let mut r = explore(&p.problem, &p.family, p.gamma, &cfg.solver, &cfg.explore_options());
            r.config_echo = echo;
            for s in &mut r.solutions {
                let name = format!("solution_{}.csv", s.index);
                write_csv(&dir.join(&name), mesh, &s.u)?;
                s.csv = Some(name);
            }
            if let Some(a) = &r.alpha {
                write_csv(&dir.join("alpha.csv"), mesh, a.field.values())?;
            }
            write_branch_table(&dir.join("branch_table.csv"), &r.branch_table)?;
            let summary = match &r.outcome.message {
                Some(m) => m.clone(),
                None => format!("{} solutions", r.solutions.len()),
            };
            write_json(&report, &r)?;
            Ok(RunOutcome {
                exit_code: r.exit_code(),
                report,
                summary,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::parse(text, Path::new("/tmp"))
    }

    #[test]
    fn defaults_fill_in() {
        let c = parse("").unwrap();
        assert_eq!(c.n, 200);
        assert_eq!(c.g, GSpec::PlusPower { q: 3.0 });
        assert_eq!(c.f, FSpec::Corollary2Scaled { h: HSpec::One });
        assert_eq!(c.lambda_mode, LambdaMode::MultipleOfLambda1);
        assert_eq!(c.lambda_value, 2.0);
        assert_eq!(c.solver, SolverOptions::default());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let e = parse("domain.n = 10\n\nfoo.bar = 1\n").unwrap_err();
        assert!(matches!(e, Error::ConfigParse { line: 3, .. }), "{e}");
        let e = parse("# c\ndomain.n 10\n").unwrap_err();
        assert!(matches!(e, Error::ConfigParse { line: 2, .. }));
        let e = parse("seed = 1\nseed = 2\n").unwrap_err();
        assert!(matches!(e, Error::ConfigParse { line: 2, .. }));
    }

    #[test]
    fn small_q_names_the_key() {
        let e = parse("nonlinearity.g.q = 0.5").unwrap_err();
        match e {
            Error::ConfigValue { key, message } => {
                assert_eq!(key, "nonlinearity.g.q");
                assert!(message.contains("q > 1"));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn range_checks() {
        for (text, key) in [
            ("domain.n = 1", "domain.n"),
            ("domain.dim = 3", "domain.dim"),
            ("domain.lengths = 1, 2", "domain.lengths"),
            ("alpha.bound = 0", "alpha.bound"),
            ("alpha.segment = 1, 0", "alpha.segment"),
            ("solver.backtrack = 2", "solver.backtrack"),
            ("explore.radii = 10, 1", "explore.radii"),
            ("nonlinearity.g.kind = table", "nonlinearity.g.table_path"),
            ("nonlinearity.f.kind = one\nnonlinearity.f.h_kind = one", "nonlinearity.f.h_kind"),
            ("domain.n = ten", "domain.n"),
        ] {
            match parse(text) {
                Err(Error::ConfigValue { key: k, .. }) => assert_eq!(k, key, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn echo_round_trips() {
        let c = parse(
            "domain.dim = 2\ndomain.n = 8\ndomain.lengths = 1, 0.5\nalpha.family = sine_series\nalpha.k = 3\n\
             alpha.segment = -3, 0.25\nsolver.distinct_tol = 1e-4\nexplore.radii = 0.5, 7\nseed = 42\n",
        )
        .unwrap();
        let again = parse(&c.echo_text()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.solver.rng_seed, 42);
    }

    #[test]
    fn missing_file_is_io_error() {
        let e = load_config(Path::new("/nonexistent/trisolve.conf")).unwrap_err();
        assert!(matches!(e, Error::Io(_)));
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn table_reader_skips_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        fs::write(&p, "xi,value\n-1,-1\n0,0\n1,1\n").unwrap();
        assert_eq!(read_table(&p, "k").unwrap(), vec![(-1.0, -1.0), (0.0, 0.0), (1.0, 1.0)]);
        fs::write(&p, "0,0\nx,1\n").unwrap();
        assert!(read_table(&p, "k").is_err());
    }

    #[test]
    fn reference_scaling_of_f() {
        let c = parse("domain.n = 50\nlambda.value = 3").unwrap();
        let p = build_problem(&c).unwrap();
        assert_eq!(p.gamma, Some(1.0));
        let lambda = p.problem.lambda;
        assert!((lambda - 3.0 * p.eigen.lambda).abs() < 1e-12);
        assert!((p.problem.f.value(0.3) - lambda.sqrt()).abs() < 1e-12);
    }
}
