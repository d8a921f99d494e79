//! Command-line front end: a sectioned run configuration with flag
//! overrides, and the `solve`, `convergence`, `validate`, and `export`
//! subcommands.  Every subcommand writes a machine-readable `summary.json`
//! into the output directory alongside its terminal log.
//!
//! Exit codes: 0 success, 1 usage or configuration problem, 2 the nonlinear
//! iteration stopped without converging (a partial summary is still
//! written), 3 one or more validation checks failed.

use crate::analysis::{
    constraint_fields, curl_l2, error_norms, write_csv, write_obj, write_vtk,
    AnalysisError, ConvergenceTable,
};
use crate::cases::ode::{integrate_fixed, radial_rhs};
use crate::cases::{
    annulus_case, axisymmetric_case, custom_case, deformed_hyperboloid_case,
    hyperboloid_case, CaseError, CaseSpec, RotationAxis,
};
use crate::forms::{deterministic_samples, sample_test_state, BcMode, Linearization};
use crate::recovery::recover_surface;
use crate::solver::{initial_guess, newton_solve, SolverConfig, SolverError};
use crate::spaces::HypothesisReport;
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

/// Failures of the command layer, each mapped to a documented exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("could not read config {path}: {source}")]
    ConfigRead { path: PathBuf, source: io::Error },
    #[error("could not parse config {path}: {source}")]
    ConfigParse {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },
    #[error("{0}")]
    Config(String),
    #[error("case {0} has no closed-form reference; convergence studies need one")]
    NoExactSolution(&'static str),
    #[error("could not write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("stopped without converging after {iterations} iterations; partial summary written")]
    Unconverged { iterations: usize },
    #[error("{failed} of {total} validation checks failed")]
    ChecksFailed { failed: usize, total: usize },
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// Process exit code for an error.
pub fn exit_code(err: &CliError) -> i32 {
    match err {
        CliError::Unconverged { .. }
        | CliError::Solver(SolverError::NoConvergence { .. }) => 2,
        CliError::ChecksFailed { .. } => 3,
        _ => 1,
    }
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseName {
    Hyperboloid,
    Annulus,
    Axisymmetric,
    DeformedHyperboloid,
    Custom,
}

impl CaseName {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseName::Hyperboloid => "hyperboloid",
            CaseName::Annulus => "annulus",
            CaseName::Axisymmetric => "axisymmetric",
            CaseName::DeformedHyperboloid => "deformed-hyperboloid",
            CaseName::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BcModeName {
    Strong,
    Weak,
}

impl From<BcModeName> for BcMode {
    fn from(name: BcModeName) -> BcMode {
        match name {
            BcModeName::Strong => BcMode::Strong,
            BcModeName::Weak => BcMode::Weak,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinearizationName {
    Newton,
    Picard,
}

impl From<LinearizationName> for Linearization {
    fn from(name: LinearizationName) -> Linearization {
        match name {
            LinearizationName::Newton => Linearization::Newton,
            LinearizationName::Picard => Linearization::Picard,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RotationAxisName {
    Transverse,
    Symmetry,
}

impl From<RotationAxisName> for RotationAxis {
    fn from(name: RotationAxisName) -> RotationAxis {
        match name {
            RotationAxisName::Transverse => RotationAxis::Transverse,
            RotationAxisName::Symmetry => RotationAxis::Symmetry,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportFormat {
    Vtk,
    Obj,
    Csv,
}

/// Complete description of one run; every field has a default, a config
/// file supplies sections, and command-line flags override both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub case: CaseName,
    pub parameters: CaseParameters,
    pub mesh: MeshConfig,
    pub solver: SolverSettings,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            case: CaseName::Hyperboloid,
            parameters: CaseParameters::default(),
            mesh: MeshConfig::default(),
            solver: SolverSettings::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", default)]
pub struct CaseParameters {
    /// Opening angle of the hyperboloid family, radians in (0, 2 pi / 3).
    pub theta: f64,
    /// Radial slope of the annulus boundary data.
    pub a: f64,
    /// Rim rotation of the deformed family, radians.
    pub angle: f64,
    pub rotation_axis: RotationAxisName,
    /// Constant boundary columns of the custom case.
    pub custom_gx: [f64; 3],
    pub custom_gy: [f64; 3],
}

impl Default for CaseParameters {
    fn default() -> Self {
        let s2 = 2.0f64.sqrt();
        CaseParameters {
            theta: FRAC_PI_2,
            a: 0.675,
            angle: FRAC_PI_6,
            rotation_axis: RotationAxisName::Transverse,
            custom_gx: [s2, 0.0, 0.0],
            custom_gy: [0.0, s2, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub nx: usize,
    pub ny: usize,
    /// Number of nested meshes in a convergence study (each level doubles
    /// both subdivisions).
    pub refine: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            nx: 12,
            ny: 72,
            refine: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", default)]
pub struct SolverSettings {
    /// Cross-derivative penalty weight.
    pub eta: f64,
    /// Relative residual tolerance of the nonlinear iteration.
    pub tol: f64,
    pub max_iter: usize,
    /// Boundary treatment; the case's own default applies when omitted
    /// (the axisymmetric case prefers weak data, the others strong).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bc_mode: Option<BcModeName>,
    pub linearization: LinearizationName,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            eta: 1.0,
            tol: 1e-8,
            max_iter: 25,
            bc_mode: None,
            linearization: LinearizationName::Newton,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<ExportFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            formats: Vec::new(),
        }
    }
}

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

/// Finite-element solver for Miura-fold surface parametrizations.
#[derive(Debug, Parser)]
#[command(name = "miura", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one case and report constraint diagnostics.
    Solve(RunArgs),
    /// Solve a nested mesh family and tabulate the error decay.
    Convergence(RunArgs),
    /// Check boundary admissibility, the profile integrator, and the
    /// assembled derivative against finite differences.
    Validate(RunArgs),
    /// Solve one case and write the requested artifact files.
    Export(RunArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML run configuration; explicit flags override file values.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Benchmark case to run.
    #[arg(long, value_enum)]
    pub case: Option<CaseName>,
    /// Hyperboloid opening angle in radians.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Annulus radial slope.
    #[arg(long)]
    pub a: Option<f64>,
    /// Deformation angle in radians.
    #[arg(long)]
    pub angle: Option<f64>,
    /// Axis of the rim rotation in the deformed case.
    #[arg(long, value_enum)]
    pub rotation_axis: Option<RotationAxisName>,
    /// Cells along the first parameter direction.
    #[arg(long)]
    pub nx: Option<usize>,
    /// Cells along the second parameter direction.
    #[arg(long)]
    pub ny: Option<usize>,
    /// Number of nested meshes in a convergence study.
    #[arg(long)]
    pub refine: Option<usize>,
    /// Cross-derivative penalty weight.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Relative residual tolerance of the nonlinear iteration.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration cap of the nonlinear solve.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Boundary treatment (case default when omitted).
    #[arg(long, value_enum)]
    pub bc_mode: Option<BcModeName>,
    /// Output directory for summaries and artifacts.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Artifact formats to write, comma separated.
    #[arg(long, value_delimiter = ',', value_enum)]
    pub format: Vec<ExportFormat>,
}

impl RunConfig {
    /// Loads the file named by `--config` (when given) and applies flag
    /// overrides on top of it.
    pub fn resolve(args: &RunArgs) -> Result<RunConfig, CliError> {
        let mut cfg = match &args.config {
            Some(path) => {
                let text =
                    fs::read_to_string(path).map_err(|source| CliError::ConfigRead {
                        path: path.clone(),
                        source,
                    })?;
                toml::from_str(&text).map_err(|source| CliError::ConfigParse {
                    path: path.clone(),
                    source: Box::new(source),
                })?
            }
            None => RunConfig::default(),
        };
        if let Some(v) = args.case {
            cfg.case = v;
        }
        if let Some(v) = args.theta {
            cfg.parameters.theta = v;
        }
        if let Some(v) = args.a {
            cfg.parameters.a = v;
        }
        if let Some(v) = args.angle {
            cfg.parameters.angle = v;
        }
        if let Some(v) = args.rotation_axis {
            cfg.parameters.rotation_axis = v;
        }
        if let Some(v) = args.nx {
            cfg.mesh.nx = v;
        }
        if let Some(v) = args.ny {
            cfg.mesh.ny = v;
        }
        if let Some(v) = args.refine {
            cfg.mesh.refine = v;
        }
        if let Some(v) = args.eta {
            cfg.solver.eta = v;
        }
        if let Some(v) = args.tol {
            cfg.solver.tol = v;
        }
        if let Some(v) = args.max_iter {
            cfg.solver.max_iter = v;
        }
        if let Some(v) = args.bc_mode {
            cfg.solver.bc_mode = Some(v);
        }
        if let Some(v) = &args.out {
            cfg.output.dir = v.clone();
        }
        if !args.format.is_empty() {
            cfg.output.formats = args.format.clone();
        }
        Ok(cfg)
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

/// Instantiates the configured case at a given resolution, honoring a
/// boundary-mode override.
pub fn build_case(cfg: &RunConfig, nx: usize, ny: usize) -> Result<CaseSpec, CliError> {
    let p = &cfg.parameters;
    let mut case = match cfg.case {
        CaseName::Hyperboloid => hyperboloid_case(p.theta, nx, ny)?,
        CaseName::Annulus => annulus_case(p.a, nx, ny)?,
        CaseName::Axisymmetric => axisymmetric_case(nx, ny)?,
        CaseName::DeformedHyperboloid => deformed_hyperboloid_case(
            p.theta,
            p.angle,
            p.rotation_axis.into(),
            nx,
            ny,
        )?,
        CaseName::Custom => custom_case(
            Vector3::from(p.custom_gx),
            Vector3::from(p.custom_gy),
            nx,
            ny,
        )?,
    };
    if let Some(mode) = cfg.solver.bc_mode {
        case.bc_mode = mode.into();
    }
    Ok(case)
}

fn solver_config(cfg: &RunConfig, case: &CaseSpec) -> SolverConfig {
    SolverConfig {
        eta: cfg.solver.eta,
        tol_rel: cfg.solver.tol,
        max_iter: cfg.solver.max_iter,
        linearization: cfg.solver.linearization.into(),
        bc_mode: case.bc_mode,
        ..SolverConfig::default()
    }
}

fn bc_mode_str(mode: BcMode) -> &'static str {
    match mode {
        BcMode::Strong => "strong",
        BcMode::Weak => "weak",
    }
}

/// Longest edge of the structured mesh pattern.
fn mesh_h(case: &CaseSpec) -> f64 {
    (case.rect.width() / case.nx as f64).hypot(case.rect.height() / case.ny as f64)
}

fn ensure_out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    fs::create_dir_all(&cfg.output.dir).map_err(|source| CliError::Io {
        path: cfg.output.dir.clone(),
        source,
    })?;
    Ok(cfg.output.dir.clone())
}

fn write_file(path: PathBuf, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(&path, bytes).map_err(|source| CliError::Io { path, source })
}

fn write_summary(dir: &Path, summary: &serde_json::Value) -> Result<(), CliError> {
    let mut text =
        serde_json::to_string_pretty(summary).expect("summary is serializable");
    text.push('\n');
    write_file(dir.join("summary.json"), text.as_bytes())
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn run_solve(cfg: &RunConfig, command: &str) -> Result<serde_json::Value, CliError> {
    if cfg.output.formats.contains(&ExportFormat::Csv) {
        return Err(CliError::Config(
            "csv output tabulates a convergence study; use the convergence command"
                .into(),
        ));
    }
    let case = build_case(cfg, cfg.mesh.nx, cfg.mesh.ny)?;
    let disc = case.discretize(cfg.solver.eta)?;
    let config = solver_config(cfg, &case);
    let start = initial_guess(&disc)?;
    let (state, report, converged) = match newton_solve(&disc, start, &config) {
        Ok((state, report)) => (state, report, true),
        Err(SolverError::NoConvergence { state, report, .. }) => {
            (*state, report, false)
        }
        Err(err) => return Err(err.into()),
    };
    let fields = constraint_fields(&disc, &state);
    let surface = recover_surface(&disc, &state)?;
    let dir = ensure_out_dir(cfg)?;
    let mut artifacts = Vec::new();
    for format in &cfg.output.formats {
        match format {
            ExportFormat::Vtk => {
                let mut buf = Vec::new();
                write_vtk(&mut buf, &disc, &state, &fields)
                    .expect("in-memory write cannot fail");
                write_file(dir.join("diagnostics.vtk"), &buf)?;
                artifacts.push("diagnostics.vtk");
            }
            ExportFormat::Obj => {
                let mut buf = Vec::new();
                write_obj(&mut buf, &disc.spaces.mesh, &surface)
                    .expect("in-memory write cannot fail");
                write_file(dir.join("surface.obj"), &buf)?;
                artifacts.push("surface.obj");
            }
            ExportFormat::Csv => unreachable!("rejected above"),
        }
    }
    let errors = case.exact.as_ref().map(|e| error_norms(&disc, &state, e));
    let summary = serde_json::json!({
        "command": command,
        "case": case.name,
        "bc_mode": bc_mode_str(case.bc_mode),
        "nx": case.nx,
        "ny": case.ny,
        "cells": disc.spaces.mesh.n_triangles(),
        "dofs": disc.spaces.n_total(),
        "eta": cfg.solver.eta,
        "tol": cfg.solver.tol,
        "converged": converged,
        "newton_iterations": report.iterations,
        "residual_norms": report.residual_norms,
        "sup_u": fields.sup_u,
        "sup_v": fields.sup_v,
        "max_gx_sq": fields.max_gx_sq,
        "max_gy_sq": fields.max_gy_sq,
        "omega_prime_fraction": fields.omega_prime_fraction(),
        "folded_cells": fields.n_folded(),
        "curl_l2": curl_l2(&disc, &state),
        "surface_normal_residual": surface.normal_residual,
        "surface_bounds": surface.bounds(),
        "error_h1": errors.map(|e| e.h1),
        "error_l2": errors.map(|e| e.l2),
        "artifacts": artifacts,
    });
    write_summary(&dir, &summary)?;
    println!(
        "{}: {} dofs, {} iteration(s), final residual {:.3e}, unfolded fraction {:.3}",
        case.name,
        disc.spaces.n_total(),
        report.iterations,
        report.final_residual(),
        fields.omega_prime_fraction(),
    );
    if converged {
        Ok(summary)
    } else {
        Err(CliError::Unconverged {
            iterations: report.iterations,
        })
    }
}

/// Solves the configured case, writes diagnostics and any requested
/// artifacts, and reports the run in `summary.json`.
pub fn cmd_solve(cfg: &RunConfig) -> Result<serde_json::Value, CliError> {
    run_solve(cfg, "solve")
}

/// Like `solve`, but the point is the artifacts: at least one format is
/// required.
pub fn cmd_export(cfg: &RunConfig) -> Result<serde_json::Value, CliError> {
    if cfg.output.formats.is_empty() {
        return Err(CliError::Config(
            "export needs at least one --format (vtk, obj)".into(),
        ));
    }
    run_solve(cfg, "export")
}

/// Solves the configured case on `refine` nested meshes, tabulating errors
/// against the closed-form reference and estimating convergence rates.
pub fn cmd_convergence(cfg: &RunConfig) -> Result<serde_json::Value, CliError> {
    if cfg.case != CaseName::Hyperboloid {
        return Err(CliError::NoExactSolution(cfg.case.as_str()));
    }
    let levels = cfg.mesh.refine.max(1);
    let mut table = ConvergenceTable::new();
    for level in 0..levels {
        let nx = cfg.mesh.nx << level;
        let ny = cfg.mesh.ny << level;
        let case = build_case(cfg, nx, ny)?;
        let disc = case.discretize(cfg.solver.eta)?;
        let config = solver_config(cfg, &case);
        let (state, report) = newton_solve(&disc, initial_guess(&disc)?, &config)?;
        let exact = case.exact.as_ref().expect("hyperboloid has a reference");
        let norms = error_norms(&disc, &state, exact);
        table.add_row(
            mesh_h(&case),
            disc.spaces.n_total(),
            disc.spaces.mesh.n_triangles(),
            report.iterations,
            norms.h1,
            norms.l2,
        )?;
        println!(
            "level {level}: {nx} x {ny}, H1 {:.3e}, L2 {:.3e}, {} iteration(s)",
            norms.h1, norms.l2, report.iterations,
        );
    }
    let dir = ensure_out_dir(cfg)?;
    let mut buf = Vec::new();
    write_csv(&mut buf, &table).expect("in-memory write cannot fail");
    write_file(dir.join("convergence.csv"), &buf)?;
    let summary = serde_json::json!({
        "command": "convergence",
        "case": cfg.case.as_str(),
        "levels": levels,
        "rows": table.rows,
        "artifacts": ["convergence.csv"],
    });
    write_summary(&dir, &summary)?;
    Ok(summary)
}

/// Names the admissibility identity a report violates worst.
fn violated_identity(report: &HypothesisReport) -> (&'static str, f64) {
    let mut worst = ("orthogonality", report.max_orthogonality);
    for cand in [
        ("norm-identity", report.max_norm_identity),
        ("x-norm-bound", report.max_x_bound_violation),
        ("y-norm-bound", report.max_y_bound_violation),
    ] {
        if cand.1 > worst.1 {
            worst = cand;
        }
    }
    if report.min_x_norm_sq <= 0.0 && -report.min_x_norm_sq >= worst.1 {
        worst = ("x-norm-positivity", report.min_x_norm_sq);
    }
    worst
}

fn note_check(
    checks: &mut Vec<serde_json::Value>,
    failed: &mut usize,
    name: &str,
    pass: bool,
    measured: f64,
    threshold: f64,
    detail: &str,
) {
    if pass {
        println!("PASS {name}: {measured:.3e} (threshold {threshold:.1e})");
    } else {
        *failed += 1;
        println!("FAIL {name}: {measured:.3e} (threshold {threshold:.1e}) {detail}");
    }
    checks.push(serde_json::json!({
        "name": name,
        "pass": pass,
        "measured": measured,
        "threshold": threshold,
        "detail": detail,
    }));
}

/// Runs the boundary admissibility sweep, a profile-integrator
/// self-convergence study, and a finite-difference probe of the assembled
/// derivative, and reports pass/fail per check.
pub fn cmd_validate(cfg: &RunConfig) -> Result<serde_json::Value, CliError> {
    let case = build_case(cfg, cfg.mesh.nx, cfg.mesh.ny)?;
    let mut checks = Vec::new();
    let mut failed = 0usize;

    // Boundary data: the profile-integrated case is limited by integrator
    // accuracy, the closed forms must hold to round-off.
    let report = case.validate(1000)?;
    let tol = if cfg.case == CaseName::Axisymmetric {
        1e-8
    } else {
        1e-12
    };
    let pass = report.satisfied(tol);
    let detail = if pass {
        String::new()
    } else {
        let (name, value) = violated_identity(&report);
        format!("worst identity: {name} = {value:.3e}")
    };
    note_check(
        &mut checks,
        &mut failed,
        "boundary-admissibility",
        pass,
        report.max_violation(),
        tol,
        &detail,
    );

    // Profile integrator: fixed-step runs at doubling resolution must agree
    // at fifth order and the finest halving must sit below 1e-8.
    let mut ends = Vec::new();
    for n in [50usize, 100, 200, 400] {
        let run = integrate_fixed(radial_rhs, 0.0, 4.0, &[0.1, 0.0, 0.0], n)
            .map_err(CaseError::from)?;
        ends.push(run.y_end[0]);
    }
    let diffs: Vec<f64> = ends.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let aggregate_order = (diffs[0] / diffs[2]).log2() / 2.0;
    note_check(
        &mut checks,
        &mut failed,
        "profile-step-halving",
        diffs[2] <= 1e-8,
        diffs[2],
        1e-8,
        "",
    );
    note_check(
        &mut checks,
        &mut failed,
        "profile-order",
        aggregate_order >= 4.8,
        aggregate_order,
        4.8,
        "order across step halvings, expected at least 4.8",
    );

    // Assembled derivative vs central finite differences of the residual in
    // ten deterministic random directions on a small mesh of this case.
    let tiny = build_case(cfg, 4, 4)?;
    let disc = tiny.discretize(cfg.solver.eta)?;
    let n = disc.spaces.n_total();
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let state = sample_test_state(&disc.spaces, seed);
        let jac = disc.assemble_jacobian(&state, Linearization::Newton);
        let direction = deterministic_samples(1000 + seed, n);
        let jd = jac.matvec(&direction);
        let h = 1e-6;
        let mut plus = state.clone();
        plus.add_scaled(h, &direction);
        let mut minus = state;
        minus.add_scaled(-h, &direction);
        let rp = disc.assemble_residual(&plus);
        let rm = disc.assemble_residual(&minus);
        let mut diff_sq = 0.0;
        let mut scale_sq = 0.0;
        for i in 0..n {
            let fd = (rp[i] - rm[i]) / (2.0 * h);
            diff_sq += (jd[i] - fd).powi(2);
            scale_sq += jd[i] * jd[i];
        }
        worst = worst.max(diff_sq.sqrt() / scale_sq.sqrt().max(1.0));
    }
    note_check(
        &mut checks,
        &mut failed,
        "derivative-vs-finite-differences",
        worst <= 1e-6,
        worst,
        1e-6,
        "",
    );

    let dir = ensure_out_dir(cfg)?;
    let summary = serde_json::json!({
        "command": "validate",
        "case": case.name,
        "checks": checks,
        "failed": failed,
    });
    write_summary(&dir, &summary)?;
    if failed > 0 {
        Err(CliError::ChecksFailed {
            failed,
            total: checks.len(),
        })
    } else {
        Ok(summary)
    }
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

/// Parses arguments, dispatches, and maps the outcome to an exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Solve(args) => {
            RunConfig::resolve(args).and_then(|cfg| cmd_solve(&cfg))
        }
        Command::Convergence(args) => {
            RunConfig::resolve(args).and_then(|cfg| cmd_convergence(&cfg))
        }
        Command::Validate(args) => {
            RunConfig::resolve(args).and_then(|cfg| cmd_validate(&cfg))
        }
        Command::Export(args) => {
            RunConfig::resolve(args).and_then(|cfg| cmd_export(&cfg))
        }
    };
    match result {
        Ok(_) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}
