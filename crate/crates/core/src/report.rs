//! Experiment configuration files, the runner behind `roefield`, and the
//! CSV/JSON reports each command leaves in its output directory.
//!
//! A run produces a [`Report`]: named checks with a measured value, a bound
//! and a status, a JSON summary, and CSV tables. Exit codes follow the
//! checks: 0 when every check passes, 1 on a failed check, 2 when a check
//! was asked for a tolerance below what `f64` can resolve. Errors map to
//! codes through [`exit_code`].

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::compression::{frame_norm, gamma_norm, gamma_quadratic_forms, roundtrip, PsiFrame};
use crate::error::{Error, Result};
use crate::field::{csv_writer, FieldElement, FieldLab, MatrixPath, WindowRule};
use crate::lattice::{hat_inner, hat_inner_quadrature, refine, refinement_residual, HatIndex, LatticeScale};
use crate::line_ops::{norm_oracle, ConvKernelOp, GeneratorSum};
use crate::piecewise::PiecewisePolynomial;
use crate::toeplitz::{dense_inv_sqrt_oracle, gram_coeffs, inv_sqrt_coeffs, toeplitz_norm, CoeffSequence};
use crate::window::{format_float, WindowMatrix, WindowSpec};

/// Smallest tolerance a check may be asked for; anything tighter is
/// reported as infeasible rather than failed.
pub const TOLERANCE_FLOOR: f64 = 16.0 * f64::EPSILON;

/// Seed for the random band matrices of `verify`. Fixed so runs repeat.
const VERIFY_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Coeffs,
    Verify,
    Beta,
    Scan,
    Limit,
    Field,
}

impl Command {
    pub const ALL: [Command; 6] =
        [Command::Coeffs, Command::Verify, Command::Beta, Command::Scan, Command::Limit, Command::Field];

    pub fn name(self) -> &'static str {
        match self {
            Command::Coeffs => "coeffs",
            Command::Verify => "verify",
            Command::Beta => "beta",
            Command::Scan => "scan",
            Command::Limit => "limit",
            Command::Field => "field",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Precondition(format!("unknown command {s:?}")))
    }
}

/// Which refinement coefficients `verify` checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Refinement {
    /// `√2/2` and `√2/4`, forced by pointwise evaluation.
    #[default]
    Forced,
    /// `√2` and `√2/2`, twice the forced values. A negative control.
    Doubled,
}

impl Refinement {
    pub fn coeffs(self, n: HatIndex) -> Vec<(HatIndex, f64)> {
        let scale = match self {
            Refinement::Forced => 1.0,
            Refinement::Doubled => 2.0,
        };
        refine(n).iter().map(|(k, c)| (*k, scale * c)).collect()
    }
}

/// One term `coeff · S_{f,g}` of the operator under study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    #[serde(default = "one")]
    pub coeff: f64,
    pub f: PiecewisePolynomial,
    pub g: PiecewisePolynomial,
}

fn one() -> f64 {
    1.0
}

impl Default for TermConfig {
    fn default() -> Self {
        let r = ConvKernelOp::reference();
        Self { coeff: 1.0, f: r.f, g: r.g }
    }
}

/// The band path `h(t) · (d·I + s·shift)` on `[-half_width, half_width]`,
/// with `h` piecewise linear through `nodes` and `h(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathConfig {
    pub half_width: i64,
    pub diagonal: f64,
    pub shift: f64,
    pub nodes: Vec<[f64; 2]>,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self { half_width: 3, diagonal: 0.4, shift: 0.2, nodes: vec![[1.0, 1.0]] }
    }
}

impl PathConfig {
    pub fn matrix(&self) -> WindowMatrix {
        let spec = WindowSpec { lo: -self.half_width, hi: self.half_width, pad: 0 };
        WindowMatrix::identity(spec).scale(self.diagonal).add_scaled(&WindowMatrix::shift(spec), self.shift)
    }

    pub fn build(&self) -> Result<MatrixPath> {
        let h: Vec<(f64, f64)> = self.nodes.iter().map(|n| (n[0], n[1])).collect();
        MatrixPath::scaled(&h, &self.matrix())
    }
}

/// A run's configuration. Every field has a default reproducing the
/// reference setup, so an empty file is a valid config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// When present, must agree with the command being run.
    pub command: Option<Command>,
    pub operator: Vec<TermConfig>,
    /// Transition order `K`.
    pub order: usize,
    pub quad_points: usize,
    /// Half-width `N` of the dense `G^{-1/2}` oracle.
    pub oracle_window: usize,
    pub window_cap: usize,
    /// Coarse spacing of the grid oracle for `‖S‖`.
    pub oracle_h: f64,
    /// Lattice spacing for `beta` and for the frames in `verify`.
    pub t: f64,
    pub t_grid: Vec<f64>,
    pub t0: f64,
    pub deltas: Vec<f64>,
    /// Replaces the default bound of every tolerance-type check.
    pub tolerance: Option<f64>,
    pub refinement: Refinement,
    pub random_matrices: usize,
    pub path: PathConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            command: None,
            operator: vec![TermConfig::default()],
            order: 64,
            quad_points: 4096,
            oracle_window: 256,
            window_cap: crate::field::WINDOW_CAP,
            oracle_h: 1.0 / 256.0,
            t: 0.5,
            t_grid: (0..=6).map(|k| 0.5f64.powi(k)).collect(),
            t0: 0.5,
            deltas: (3..=9).map(|k| 0.5 * 0.5f64.powi(k)).collect(),
            tolerance: None,
            refinement: Refinement::Forced,
            random_matrices: 50,
            path: PathConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Precondition(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Precondition(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Precondition(m));
        if self.operator.is_empty() {
            return bad("operator needs at least one term".into());
        }
        if self.quad_points < 4 * self.order.max(1) || !self.quad_points.is_power_of_two() {
            return Err(Error::Aliasing { order: self.order, quad_points: self.quad_points });
        }
        if self.oracle_window < 8 {
            return bad(format!("oracle_window = {} must be at least 8", self.oracle_window));
        }
        if self.window_cap < 3 {
            return bad(format!("window_cap = {} is too small", self.window_cap));
        }
        if !(self.oracle_h > 0.0 && self.oracle_h <= 0.25) {
            return bad(format!("oracle_h = {} must lie in (0, 1/4]", self.oracle_h));
        }
        LatticeScale::new(self.t)?;
        if self.t_grid.is_empty() {
            return bad("t_grid is empty".into());
        }
        for t in &self.t_grid {
            LatticeScale::new(*t)?;
        }
        if self.deltas.is_empty() {
            return bad("deltas is empty".into());
        }
        if let Some(tol) = self.tolerance {
            if !(tol > 0.0 && tol.is_finite()) {
                return bad(format!("tolerance = {tol} must be positive"));
            }
        }
        if self.path.half_width < 0 {
            return bad("path.half_width must be nonnegative".into());
        }
        Ok(())
    }

    pub fn generator(&self) -> GeneratorSum {
        GeneratorSum {
            terms: self.operator.iter().map(|t| (t.coeff, ConvKernelOp::new(t.f.clone(), t.g.clone()))).collect(),
        }
    }

    pub fn lab(&self) -> Result<FieldLab> {
        Ok(FieldLab { transition: self.transition()?, rule: WindowRule { cap: self.window_cap } })
    }

    fn transition(&self) -> Result<CoeffSequence> {
        if self.order == crate::compression::STANDARD_ORDER && self.quad_points == crate::compression::STANDARD_QUAD_POINTS
        {
            return Ok(crate::compression::standard_transition().clone());
        }
        inv_sqrt_coeffs(self.order, self.quad_points)
    }

    fn bound(&self, default: f64) -> f64 {
        self.tolerance.unwrap_or(default)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Infeasible,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Infeasible => "INFEASIBLE",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
    Below,
}

/// A measured value against a bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub status: Status,
}

impl Check {
    pub fn new(name: &str, value: f64, relation: Relation, bound: f64) -> Self {
        let ok = match relation {
            Relation::AtMost => value <= bound,
            Relation::AtLeast => value >= bound,
            Relation::Below => value < bound,
        };
        let status = if ok { Status::Pass } else { Status::Fail };
        Self { name: name.to_string(), value, relation, bound, status }
    }

    /// `value ≤ tol`, or infeasible when `tol` is below [`TOLERANCE_FLOOR`].
    pub fn within(name: &str, value: f64, tol: f64) -> Self {
        let mut c = Self::new(name, value, Relation::AtMost, tol);
        if tol < TOLERANCE_FLOOR {
            c.status = Status::Infeasible;
        }
        c
    }

    pub fn flag(name: &str, ok: bool) -> Self {
        Self::new(name, if ok { 1.0 } else { 0.0 }, Relation::AtLeast, 1.0)
    }

    pub fn line(&self) -> String {
        let rel = match self.relation {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Below => "<",
        };
        format!("{:<28} {:>24} {rel} {:<24} {}", self.name, format_float(self.value), format_float(self.bound), self.status)
    }
}

/// Everything a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: Command,
    pub checks: Vec<Check>,
    pub details: Value,
    /// `(file name, contents)` of the CSV tables.
    pub tables: Vec<(String, String)>,
}

impl Report {
    pub fn status(&self) -> Status {
        if self.checks.iter().any(|c| c.status == Status::Fail) {
            Status::Fail
        } else if self.checks.iter().any(|c| c.status == Status::Infeasible) {
            Status::Infeasible
        } else {
            Status::Pass
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.status() {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Infeasible => 2,
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn summary(&self) -> Value {
        json!({
            "command": self.command,
            "status": self.status(),
            "checks": self.checks,
            "details": self.details,
        })
    }

    pub fn lines(&self) -> Vec<String> {
        self.checks.iter().map(Check::line).collect()
    }

    /// Writes the tables and `<command>.json` into `dir`, creating it.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        for (name, body) in &self.tables {
            fs::write(dir.join(name), body)?;
        }
        let mut text = serde_json::to_string_pretty(&self.summary())?;
        text.push('\n');
        fs::write(dir.join(format!("{}.json", self.command)), text)
    }
}

/// Exit code for an error: 3 for resource caps, 2 for bad input, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::WindowCap { .. } | Error::PowerIterationCap { .. } => 3,
        Error::InvalidScale(_)
        | Error::InvalidPolynomial(_)
        | Error::InvalidLiteral(_)
        | Error::Aliasing { .. }
        | Error::Precondition(_)
        | Error::IntervalTooSmall { .. } => 2,
        _ => 1,
    }
}

/// Machine-readable record of a run that ended in an error.
pub fn failure_record(command: Option<Command>, e: &Error) -> Value {
    json!({ "command": command, "status": "error", "exit_code": exit_code(e), "error": e.to_string() })
}

/// Runs `command` under `config`.
pub fn run(command: Command, config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    if let Some(c) = config.command {
        if c != command {
            return Err(Error::Precondition(format!("config is for `{c}`, not `{command}`")));
        }
    }
    match command {
        Command::Coeffs => cmd_coeffs(config),
        Command::Verify => cmd_verify(config),
        Command::Beta => cmd_beta(config),
        Command::Scan => cmd_scan(config),
        Command::Limit => cmd_limit(config),
        Command::Field => cmd_field(config),
    }
}

fn table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

fn matrix_table(m: &WindowMatrix) -> String {
    let mut buf = Vec::new();
    m.write_csv(&mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("csv is utf-8")
}

/// `max_k |a_k - (G_N^{-1/2})_{0k}|` over the orders both sides resolve.
fn oracle_discrepancy(c: &CoeffSequence, n: usize) -> Result<(Vec<f64>, f64)> {
    let dense = dense_inv_sqrt_oracle(n)?;
    let reach = c.order().min(n / 2) as i64;
    let column: Vec<f64> = (0..=reach).map(|k| dense.get(0, k)).collect();
    let worst = column.iter().enumerate().map(|(k, d)| (c.at(k as i64) - d).abs()).fold(0.0, f64::max);
    Ok((column, worst))
}

/// Largest coefficient of `C ∘ C ∘ G - I`.
fn square_root_residual(c: &CoeffSequence) -> f64 {
    let r = c.compose(c).compose(&gram_coeffs()).shifted(1.0);
    (0..=r.order() as i64).map(|k| r.at(k).abs()).fold(0.0, f64::max)
}

fn cmd_coeffs(cfg: &ExperimentConfig) -> Result<Report> {
    let c = inv_sqrt_coeffs(cfg.order, cfg.quad_points)?;
    let (column, disc) = oracle_discrepancy(&c, cfg.oracle_window)?;
    let mut checks = vec![Check::within("oracle_discrepancy", disc, cfg.bound(1e-10))];
    let fit = c.decay_fit();
    if let Ok(fit) = &fit {
        checks.push(Check::new("decay_ratio", fit.ratio, Relation::Below, 1.0));
    }
    let rows = (0..=c.order()).map(|k| {
        let oracle = column.get(k).copied();
        vec![
            k.to_string(),
            format_float(c.at(k as i64)),
            oracle.map_or_else(String::new, format_float),
            oracle.map_or_else(String::new, |o| format_float((c.at(k as i64) - o).abs())),
        ]
    });
    let details = json!({
        "order": cfg.order,
        "quad_points": cfg.quad_points,
        "oracle_window": cfg.oracle_window,
        "coeffs": c.coeffs,
        "tail_bound": c.tail_bound,
        "fit": fit.as_ref().ok(),
        "fit_error": fit.as_ref().err().map(|e| e.to_string()),
        "square_root_residual": square_root_residual(&c),
    });
    Ok(Report {
        command: Command::Coeffs,
        checks,
        details,
        tables: vec![("coeffs.csv".into(), table(&["k", "coeff", "oracle", "discrepancy"], rows))],
    })
}

fn random_band(rng: &mut ChaCha8Rng, spec: WindowSpec, band: i64) -> WindowMatrix {
    WindowMatrix::from_fn(spec, |n, m| if (n - m).abs() <= band { rng.random_range(-1.0..1.0) } else { 0.0 })
}

fn cmd_verify(cfg: &ExperimentConfig) -> Result<Report> {
    let scales: Vec<LatticeScale> = [1.0, 0.5, 0.25, 0.125].into_iter().map(LatticeScale::new).collect::<Result<_>>()?;
    let mut checks = Vec::new();

    let mut gram = 0.0f64;
    for &t in &scales {
        for (n, m) in [(0, 0), (0, 1), (1, 0), (0, 2), (-3, -3), (4, 5), (2, 7)] {
            let (n, m) = (HatIndex(n), HatIndex(m));
            gram = gram.max((hat_inner_quadrature(n, m, t) - hat_inner(n, m)).abs());
        }
    }
    checks.push(Check::within("gram_quadrature", gram, cfg.bound(1e-12)));
    let (lo, hi) = toeplitz_norm(&gram_coeffs().shifted(2.0 / 3.0));
    // the symbol of 2/3·I - G is -cos(x)/3, so both ends of the bracket are exact
    checks.push(Check::new("gram_shift_norm", (lo - 1.0 / 3.0).abs().max((hi - 1.0 / 3.0).abs()), Relation::AtMost, 0.0));

    let c = cfg.transition()?;
    let (_, disc) = oracle_discrepancy(&c, cfg.oracle_window)?;
    checks.push(Check::within("oracle_discrepancy", disc, cfg.bound(1e-10)));
    if let Ok(fit) = c.decay_fit() {
        checks.push(Check::new("decay_ratio", fit.ratio, Relation::Below, 1.0));
    }
    checks.push(Check::within("square_root", square_root_residual(&c), cfg.bound(1e-8)));

    let mut ortho = 0.0f64;
    for &t in &scales {
        let frame = PsiFrame::new(t, c.clone(), WindowSpec::around(-6, 6, c.order()))?;
        let g = frame.psi_gram();
        ortho = ortho.max(g.add_scaled(&WindowMatrix::identity(frame.window()), -1.0).interior_matrix().amax());
    }
    checks.push(Check::within("orthonormality", ortho, cfg.bound(1e-8)));

    let mut rng = ChaCha8Rng::seed_from_u64(VERIFY_SEED);
    let spec = WindowSpec { lo: -8, hi: 8, pad: 0 };
    let t = LatticeScale::new(cfg.t)?;
    let (mut lower, mut upper, mut quad) = (f64::INFINITY, 0.0f64, 0.0f64);
    for i in 0..cfg.random_matrices {
        let a = random_band(&mut rng, spec, 1 + (i % 3) as i64);
        let ratio = gamma_norm(&a)? / a.op_norm();
        lower = lower.min(ratio);
        upper = upper.max(ratio);
        let x = crate::window::LatticeVector::new(-4, (0..9).map(|_| rng.random_range(-1.0..1.0)).collect());
        let (q, alg) = gamma_quadratic_forms(&a, &x, t)?;
        quad = quad.max((q - alg).abs() / alg.abs().max(1.0));
    }
    if cfg.random_matrices > 0 {
        checks.push(Check::new("frame_ratio_lower", lower, Relation::AtLeast, 1.0 / 3f64.sqrt() - 0.02));
        checks.push(Check::new("frame_ratio_upper", upper, Relation::AtMost, 3f64.sqrt() + 0.02));
        checks.push(Check::within("quadratic_form", quad, cfg.bound(1e-10)));
    }

    let tspec = WindowSpec { lo: -3, hi: 3, pad: 0 };
    let frame = PsiFrame::new(t, c.clone(), WindowSpec::around(-3, 3, c.order()))?;
    let mut rt = roundtrip(&WindowMatrix::identity(tspec), &frame)?.max(roundtrip(&WindowMatrix::shift(tspec), &frame)?);
    for _ in 0..cfg.random_matrices {
        rt = rt.max(roundtrip(&random_band(&mut rng, tspec, 3), &frame)?);
    }
    checks.push(Check::within("roundtrip", rt, cfg.bound(1e-8)));
    let id = WindowMatrix::identity(WindowSpec { lo: -40, hi: 40, pad: 0 });
    checks.push(Check::within("isometry", (frame_norm(&id)? - 1.0).abs(), cfg.bound(1e-10)));

    let mut refinement = 0.0f64;
    for &t in &scales[1..] {
        for n in [-1, 0, 3] {
            let coeffs = cfg.refinement.coeffs(HatIndex(n));
            refinement = refinement.max(refinement_residual(HatIndex(n), t, &coeffs, 2000));
        }
    }
    checks.push(Check::within("refinement", refinement, cfg.bound(1e-12)));

    let details = json!({
        "refinement_coefficients": cfg.refinement,
        "random_matrices": cfg.random_matrices,
        "seed": VERIFY_SEED,
        "t": cfg.t,
    });
    let rows = checks.iter().map(|c| {
        vec![c.name.clone(), format_float(c.value), format_float(c.bound), c.status.to_string().to_lowercase()]
    });
    let csv = table(&["check", "value", "bound", "status"], rows);
    Ok(Report { command: Command::Verify, checks, details, tables: vec![("verify.csv".into(), csv)] })
}

fn cmd_beta(cfg: &ExperimentConfig) -> Result<Report> {
    let op = cfg.generator();
    let lab = cfg.lab()?;
    let b = lab.compress(&op, LatticeScale::new(cfg.t)?)?;
    let oracle = norm_oracle(&op, cfg.oracle_h)?;
    let m = &b.matrix;
    let norm = m.op_norm();
    let asym = m.add_scaled(&m.transpose(), -1.0).matrix().amax();
    let checks = vec![
        Check::new("below_oracle", norm, Relation::AtMost, oracle.value + oracle.tolerance() + b.certificate),
        Check::new("certificate", b.certificate, Relation::AtMost, 1e-8 * norm.max(1.0)),
    ];
    let details = json!({
        "t": cfg.t,
        "window": m.spec(),
        "norm": norm,
        "certificate": b.certificate,
        "asymmetry": asym,
        "oracle": oracle,
    });
    Ok(Report { command: Command::Beta, checks, details, tables: vec![("beta.csv".into(), matrix_table(m))] })
}

fn cmd_scan(cfg: &ExperimentConfig) -> Result<Report> {
    let op = cfg.generator();
    let lab = cfg.lab()?;
    let r = lab.continuity_scan(&op, cfg.t0, &cfg.deltas)?;
    let oracle = norm_oracle(&op, cfg.oracle_h)?;
    let resolved = r.differences.iter().zip(&r.certificates).all(|(d, c)| d > c);
    let checks = vec![Check::flag("monotone", r.is_monotone()), Check::flag("resolved", resolved)];
    let details = json!({
        "t0": r.t0,
        "fitted_modulus": r.fitted_modulus.map(|(c, p)| json!({"constant": c, "exponent": p})),
        "final_difference": r.final_difference(),
        "final_relative": r.final_difference().map(|d| d / oracle.value),
        "oracle": oracle,
    });
    let mut buf = Vec::new();
    r.write_csv(&mut buf).expect("in-memory write");
    let csv = String::from_utf8(buf).expect("csv is utf-8");
    Ok(Report { command: Command::Scan, checks, details, tables: vec![("continuity.csv".into(), csv)] })
}

fn cmd_limit(cfg: &ExperimentConfig) -> Result<Report> {
    let op = cfg.generator();
    let lab = cfg.lab()?;
    let oracle = norm_oracle(&op, cfg.oracle_h)?;
    let p = lab.norm_profile(&op, &cfg.t_grid, oracle)?;
    let mut by_t = p.samples.clone();
    by_t.sort_by(|a, b| b.t.partial_cmp(&a.t).expect("finite t"));
    let gaps: Vec<f64> = by_t.iter().map(|s| oracle.value - s.value).collect();
    let gaps_decrease = gaps.windows(2).all(|w| w[1] < w[0]);
    let checks = vec![
        Check::within("monotone", p.max_decrease(), cfg.bound(1e-10)),
        Check::new("below_oracle", p.max_excess(), Relation::AtMost, oracle.tolerance()),
        Check::flag("gap_decreasing", gaps_decrease),
    ];
    let details = json!({ "oracle": oracle, "samples": p.samples });
    let mut buf = Vec::new();
    p.write_csv(&mut buf).expect("in-memory write");
    let csv = String::from_utf8(buf).expect("csv is utf-8");
    Ok(Report { command: Command::Limit, checks, details, tables: vec![("profile.csv".into(), csv)] })
}

/// Largest jumps of a profile sampled at decreasing `t`.
pub fn jumps(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| (w[1] - w[0]).abs()).collect()
}

fn cmd_field(cfg: &ExperimentConfig) -> Result<Report> {
    let op = cfg.generator();
    let lab = cfg.lab()?;
    let path = cfg.path.build()?;
    let mut grid = cfg.t_grid.clone();
    grid.sort_by(|a, b| b.partial_cmp(a).expect("finite t"));
    grid.dedup();
    let elements = [
        ("path", FieldElement::new(path.clone(), GeneratorSum::zero(), cfg.oracle_h)?),
        ("generator", FieldElement::new(MatrixPath::zero(), op.clone(), cfg.oracle_h)?),
        ("mixed", FieldElement::new(path, op, cfg.oracle_h)?),
    ];
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    let mut details = serde_json::Map::new();
    for (name, a) in &elements {
        let mut samples = grid.iter().map(|&t| lab.field_sample(a, t)).collect::<Result<Vec<_>>>()?;
        let zero = lab.field_sample(a, 0.0)?;
        let values: Vec<f64> = samples.iter().map(|s| s.value).collect();
        let j = jumps(&values);
        let last = values.last().map(|v| (v - zero.value).abs()).unwrap_or(0.0);
        let decreasing = j.windows(2).all(|w| w[1] < w[0]);
        let settles = j.last().is_none_or(|p| last <= *p);
        checks.push(Check::flag(&format!("{name}_jumps_decrease"), decreasing && settles));
        checks.push(Check::flag(&format!("{name}_faithful"), lab.faithfulness_check(a, &grid, 1e-12)?));
        if *name == "generator" {
            let rel = last / zero.value;
            checks.push(Check::new("generator_limit", rel, Relation::AtMost, 0.05));
            checks.push(Check::new("oracle_resolves_limit", a.oracle.increment / zero.value, Relation::AtMost, 0.05));
        }
        samples.push(zero);
        details.insert(
            (*name).into(),
            json!({ "jumps": j, "jump_to_zero": last, "oracle": a.oracle, "path_max_norm": a.path.max_norm() }),
        );
        for s in samples {
            rows.push(vec![(*name).to_string(), format_float(s.t), format_float(s.value), format_float(s.certificate)]);
        }
    }
    let csv = table(&["element", "t", "value", "certificate"], rows);
    Ok(Report { command: Command::Field, checks, details: Value::Object(details), tables: vec![("field.csv".into(), csv)] })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_reference_setup() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.t_grid.len(), 7);
        assert_eq!(cfg.deltas[0], 0.0625);
        assert_eq!(*cfg.deltas.last().unwrap(), 0.5 / 512.0);
    }

    #[test]
    fn operator_terms_parse_with_literals() {
        let text = r#"
            t = 0.25
            [[operator]]
            coeff = 2
            f = { breakpoints = ["-1", 0, "1/2"], pieces = [[1, 1], [1, -2]] }
            g = { breakpoints = [0, 1], pieces = [[1]] }
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.operator.len(), 1);
        assert_eq!(cfg.operator[0].coeff, 2.0);
        assert_eq!(cfg.operator[0].f.eval(0.25), 0.5);
    }

    #[test]
    fn bad_configs_are_usage_errors() {
        for text in ["bogus = 1", "t_grid = []", "t = 0", "tolerance = -1", "quad_points = 100", "order = \"x\""] {
            let e = ExperimentConfig::from_toml(text).unwrap_err();
            assert_eq!(exit_code(&e), 2, "{text}: {e}");
        }
    }

    #[test]
    fn command_mismatch_is_rejected() {
        let cfg = ExperimentConfig { command: Some(Command::Beta), ..Default::default() };
        assert!(matches!(run(Command::Coeffs, &cfg), Err(Error::Precondition(_))));
    }

    #[test]
    fn statuses_and_exit_codes() {
        let pass = Check::within("a", 1e-12, 1e-10);
        let fail = Check::within("b", 1e-9, 1e-10);
        let inf = Check::within("c", 0.0, 1e-17);
        assert_eq!((pass.status, fail.status, inf.status), (Status::Pass, Status::Fail, Status::Infeasible));
        let r = |checks| Report { command: Command::Verify, checks, details: Value::Null, tables: vec![] };
        assert_eq!(r(vec![pass.clone()]).exit_code(), 0);
        assert_eq!(r(vec![pass.clone(), inf.clone()]).exit_code(), 2);
        assert_eq!(r(vec![fail, inf]).exit_code(), 1);
        assert_eq!(exit_code(&Error::WindowCap { required: 2000, cap: 1025 }), 3);
    }

    #[test]
    fn coeffs_default_and_degenerate() {
        let r = run(Command::Coeffs, &ExperimentConfig::default()).unwrap();
        assert_eq!(r.exit_code(), 0, "{:?}", r.lines());
        assert!(r.check("oracle_discrepancy").unwrap().value < 1e-10);
        assert!(r.tables[0].1.starts_with("k,coeff,oracle,discrepancy\n"));
        let cfg = ExperimentConfig { order: 0, quad_points: 64, ..Default::default() };
        let r = run(Command::Coeffs, &cfg).unwrap();
        assert_eq!(r.tables[0].1.lines().count(), 2);
        assert!(r.check("decay_ratio").is_none());
        assert_eq!(r.exit_code(), 0);
    }

    #[test]
    fn doubled_refinement_fails_verify() {
        let cfg = ExperimentConfig { refinement: Refinement::Doubled, random_matrices: 2, ..Default::default() };
        let r = run(Command::Verify, &cfg).unwrap();
        let c = r.check("refinement").unwrap();
        assert_eq!(c.status, Status::Fail);
        // peak of φ_0^{2t} is (2t)^{-1/2}; doubling adds the same again
        assert!(c.value > 0.5, "{}", c.value);
        assert_eq!(r.exit_code(), 1);
    }

    #[test]
    fn window_cap_surfaces() {
        let cfg = ExperimentConfig { window_cap: 100, ..Default::default() };
        let e = run(Command::Beta, &cfg).unwrap_err();
        assert!(matches!(e, Error::WindowCap { .. }));
        assert_eq!(exit_code(&e), 3);
    }
}
