//! Command-line front end. Every subcommand resolves its configuration,
//! runs one experiment and emits a `report_v1` record whose payload (all
//! fields except `meta`) is a pure function of the configuration.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::{json, Map, Value};

use crate::closedform::{
    coadjoint_volume, hc_rhs, hciz, kirillov_character, weyl_character, weyl_dimension, CartanPoint, Weight,
};
use crate::error::{Error, Result};
use crate::groups::{mc_orbital_integral, CompactGroupSpec, GroupFamily};
use crate::heatflow::{
    averaged_kernel_closed, averaged_kernel_mc, boundary_delta_check, cm_pde_residual, grid_dump,
    heat_kernel_total_mass, radial_heat_residual, semigroup_check, v_function, v_weyl_sum, GaussianBump, GridSpec,
};
use crate::rootsys::{
    build_root_system, format_rational, normalization_constant, pi_pi_norm_exact, Family, RootSystem,
};
use crate::saddle::{
    closed_form_critical_values, find_critical_points, hessian_determinant_check, min_starts,
    stationary_phase_estimate, SaddleReport, HESSIAN_STEP,
};

pub const SCHEMA: &str = "report_v1";
pub const THREADS_ENV: &str = "ORBITAL_FORGE_THREADS";

/// Exit codes.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_TOLERANCE: i32 = 1;
pub const EXIT_USAGE: i32 = 64;

const SUM_WARN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Parser)]
#[command(
    name = "orbital-forge",
    version,
    about = "Orbital integrals on compact Lie groups: closed forms and numerical checks"
)]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value = "table", global = true)]
    pub format: Format,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Worker threads (falls back to ORBITAL_FORGE_THREADS, then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo Haar integral against the Weyl-sum closed form.
    VerifyHc(VerifyHcArgs),
    /// U(N) determinant formula for ∫ e^{tr(A U B U*)} dU.
    Hciz(HcizArgs),
    /// Weyl character, optionally against the orbit-integral route.
    Character(CharacterArgs),
    /// Liouville volume of a coadjoint orbit.
    Volume(VolumeArgs),
    /// Critical points on an adjoint orbit and their Hessians.
    Saddle(SaddleArgs),
    /// Heat-kernel and PDE residual checks.
    Heatflow(HeatflowArgs),
    /// Root data, Weyl group order and normalization constant.
    Roots(RootsArgs),
}

fn parse_count(s: &str) -> std::result::Result<usize, String> {
    let v: f64 = s.parse().map_err(|e| format!("'{s}': {e}"))?;
    if v < 0.0 || v.fract() != 0.0 || !v.is_finite() || v > 1e15 {
        return Err(format!("'{s}' is not a nonnegative integer"));
    }
    Ok(v as usize)
}

fn parse_family(s: &str) -> std::result::Result<Family, String> {
    s.parse::<Family>().map_err(|e| e.to_string())
}

fn parse_group(s: &str) -> std::result::Result<GroupFamily, String> {
    s.parse::<GroupFamily>().map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
pub struct GroupArgs {
    /// su, so or usp.
    #[arg(long, value_parser = parse_group)]
    pub group: GroupFamily,
    /// Matrix size N of SU(N), SO(N), USp(N).
    #[arg(long)]
    pub size: usize,
}

#[derive(Debug, Args)]
pub struct FamilyArgs {
    /// Root system family: a, b, c, d, g2.
    #[arg(long, value_parser = parse_family)]
    pub family: Family,
    #[arg(long)]
    pub rank: usize,
}

#[derive(Debug, Args)]
pub struct VerifyHcArgs {
    #[command(flatten)]
    pub group: GroupArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub h1: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub h2: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, value_parser = parse_count, default_value = "1000000")]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest accepted |z| = |mc − closed| / stderr.
    #[arg(long, default_value_t = 3.0)]
    pub z_tol: f64,
    /// Largest accepted relative gap |mc − closed| / |closed|.
    #[arg(long, default_value_t = 0.01)]
    pub rel_tol: f64,
}

#[derive(Debug, Args)]
pub struct HcizArgs {
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub a: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub b: Vec<f64>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Compare {
    None,
    Kirillov,
}

#[derive(Debug, Args)]
pub struct CharacterArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    /// Dynkin labels of the highest weight.
    #[arg(long, value_delimiter = ',')]
    pub weight: Vec<u32>,
    /// Evaluate at h = iθ·2ρ.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "h")]
    pub theta: Option<f64>,
    /// Real parts of h (ambient coordinates).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub h: Option<Vec<f64>>,
    /// Imaginary parts of h (ambient coordinates).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "h")]
    pub h_imag: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "none")]
    pub compare: Compare,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct VolumeArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub h1: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct SaddleArgs {
    #[command(flatten)]
    pub group: GroupArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub h1: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub h2: Vec<f64>,
    /// Random starts (default 20·|W|).
    #[arg(long, value_parser = parse_count)]
    pub starts: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Finite-difference step of the Hessian.
    #[arg(long, default_value_t = HESSIAN_STEP)]
    pub step: f64,
    /// Largest accepted Hessian relative error.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// Time parameter of the stationary-phase comparison.
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HeatCheck {
    /// Heat-equation residual of V on a grid, with the no-Π control.
    Radial,
    /// Scaled log-kernel PDE residual.
    Cm,
    /// V(h1, ·; t) → signed sum of deltas as t → 0.
    Boundary,
    /// Convolution of V with the Cartan heat kernel.
    Semigroup,
    /// Total mass of the heat kernel on the algebra.
    Mass,
    /// V against its Weyl-sum form at one point.
    Exact,
    /// Averaged kernel against Monte Carlo.
    Mc,
}

#[derive(Debug, Args)]
pub struct HeatflowArgs {
    #[arg(long, value_enum)]
    pub check: HeatCheck,
    #[command(flatten)]
    pub family: FamilyArgs,
    /// Base point (default ρ).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub h1: Option<Vec<f64>>,
    /// Second point for exact/semigroup/mc (default 0.8·ρ).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub h2: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Finite-difference steps, coarsest first.
    #[arg(long, value_delimiter = ',', default_value = "1e-2,5e-3")]
    pub steps: Vec<f64>,
    /// Grid center in ambient coordinates (default 0.8·h1).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub center: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.1)]
    pub half_width: f64,
    #[arg(long, default_value_t = 3)]
    pub points: usize,
    /// Scaling parameter of the log-kernel PDE.
    #[arg(long, default_value_t = 1)]
    pub n_scaling: usize,
    /// Decreasing times for the boundary check.
    #[arg(long, value_delimiter = ',', default_value = "1e-1,1e-2,1e-3")]
    pub t_seq: Vec<f64>,
    /// Width of the Gaussian test function.
    #[arg(long, default_value_t = 2.0)]
    pub sigma: f64,
    /// Earlier time of the semigroup check.
    #[arg(long, default_value_t = 0.5)]
    pub s: f64,
    #[arg(long, value_parser = parse_count, default_value = "1000000")]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write V on the grid as CSV.
    #[arg(long)]
    pub dump_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RootsArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
}

/// Outcome of one command before rendering.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub command: &'static str,
    pub config: Value,
    pub result: Value,
    pub pass: bool,
    pub warnings: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            EXIT_PASS
        } else {
            EXIT_TOLERANCE
        }
    }

    /// The deterministic part of the report.
    pub fn payload(&self) -> Value {
        json!({
            "schema": SCHEMA,
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "config": self.config,
            "result": self.result,
            "pass": self.pass,
            "exit_code": self.exit_code(),
            "warnings": self.warnings,
        })
    }
}

fn c64(v: Complex64) -> Value {
    json!([v.re, v.im])
}

/// Ambient Cartan point from CLI coordinates; A/G2 inputs are projected to
/// the sum-zero subspace.
fn cartan_from_cli(rs: &RootSystem, v: &[f64], name: &str, warnings: &mut Vec<String>) -> Result<CartanPoint> {
    let mut v = v.to_vec();
    if v.len() != rs.ambient_dim() {
        return Err(Error::Config(format!(
            "--{name} has {} coordinates; {}_{} expects {}",
            v.len(),
            rs.family(),
            rs.rank(),
            rs.ambient_dim()
        )));
    }
    let mean = rs.project_to_cartan(&mut v);
    let sum = mean * v.len() as f64;
    if sum.abs() > SUM_WARN {
        warnings.push(format!("--{name} projected to the sum-zero subspace (sum was {sum})"));
    }
    CartanPoint::real(rs, &v)
}

fn group_spec(g: &GroupArgs) -> Result<CompactGroupSpec> {
    CompactGroupSpec::new(g.group, g.size)
}

fn cmd_verify_hc(a: &VerifyHcArgs) -> Result<Outcome> {
    let spec = group_spec(&a.group)?;
    let rs = spec.root_system();
    let mut warnings = Vec::new();
    let h1 = cartan_from_cli(rs, &a.h1, "h1", &mut warnings)?;
    let h2 = cartan_from_cli(rs, &a.h2, "h2", &mut warnings)?;
    if !(a.t > 0.0) {
        return Err(Error::Config(format!("--t must be positive, got {}", a.t)));
    }
    let h2t = h2.scaled(Complex64::new(1.0 / a.t, 0.0));
    let closed = hc_rhs(rs, &h1, &h2t)?;
    let est = mc_orbital_integral(&spec, &h1, &h2, a.t, a.samples, a.seed)?;
    let diff = (est.mean - closed).norm();
    let z = if est.stderr > 0.0 {
        diff / est.stderr
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let rel_gap = diff / closed.norm();
    let pass = z <= a.z_tol && rel_gap <= a.rel_tol;
    Ok(Outcome {
        command: "verify-hc",
        config: json!({
            "group": spec.label(), "root_system": format!("{}_{}", rs.family(), rs.rank()),
            "h1": h1.real_parts(), "h2": h2.real_parts(), "t": a.t,
            "samples": a.samples, "seed": a.seed, "z_tol": a.z_tol, "rel_tol": a.rel_tol,
        }),
        result: json!({
            "closed_form": c64(closed),
            "monte_carlo": c64(est.mean),
            "stderr": est.stderr,
            "z": z,
            "rel_gap": rel_gap,
            "estimate": est.record(&spec, &h1, &h2, a.t),
        }),
        pass,
        warnings,
    })
}

fn cmd_hciz(a: &HcizArgs) -> Result<Outcome> {
    let value = hciz(&a.a, &a.b)?;
    // Same integral through the Weyl sum on A_{N−1}: shift both spectra to
    // trace zero, the traces contribute e^{N ā b̄}.
    let n = a.a.len();
    let mut check = Value::Null;
    let mut pass = true;
    if n >= 2 {
        let rs = build_root_system(Family::A, n - 1)?;
        let ma = a.a.iter().sum::<f64>() / n as f64;
        let mb = a.b.iter().sum::<f64>() / n as f64;
        let ca: Vec<f64> = a.a.iter().map(|x| x - ma).collect();
        let cb: Vec<f64> = a.b.iter().map(|x| x - mb).collect();
        let ws = hc_rhs(&rs, &CartanPoint::real(&rs, &ca)?, &CartanPoint::real(&rs, &cb)?)?;
        let via = ws.re * (n as f64 * ma * mb).exp();
        let rel = (via - value).abs() / value.abs();
        pass = rel <= a.tol;
        check = json!({ "weyl_sum_route": via, "rel_diff": rel, "tol": a.tol });
    }
    Ok(Outcome {
        command: "hciz",
        config: json!({ "a": a.a, "b": a.b, "tol": a.tol }),
        result: json!({ "value": value, "formula": "hciz_determinant", "cross_check": check }),
        pass,
        warnings: Vec::new(),
    })
}

fn cmd_character(a: &CharacterArgs) -> Result<Outcome> {
    let rs = build_root_system(a.family.family, a.family.rank)?;
    let lambda = Weight::from_dynkin_labels(&rs, &a.weight)?;
    let mut warnings = Vec::new();
    let h = match (&a.theta, &a.h) {
        (Some(theta), _) => {
            let two_rho: Vec<Complex64> = rs
                .weyl_vector()
                .iter()
                .map(|x| Complex64::new(0.0, 2.0 * theta * crate::rootsys::exact::to_f64(x)))
                .collect();
            CartanPoint::new(&rs, two_rho)?
        }
        (None, Some(re)) => {
            let re_pt = cartan_from_cli(&rs, re, "h", &mut warnings)?;
            let im_pt = match &a.h_imag {
                Some(im) => cartan_from_cli(&rs, im, "h-imag", &mut warnings)?.real_parts(),
                None => vec![0.0; rs.ambient_dim()],
            };
            let z = re_pt.real_parts().iter().zip(&im_pt).map(|(r, i)| Complex64::new(*r, *i)).collect();
            CartanPoint::new(&rs, z)?
        }
        (None, None) => return Err(Error::Config("give --theta or --h".into())),
    };
    let chi = weyl_character(&rs, &lambda, &h)?;
    let dim = weyl_dimension(&rs, &lambda)?;
    let mut result = json!({
        "weyl_character": c64(chi),
        "dimension": format_rational(&dim),
    });
    let mut pass = true;
    if a.compare == Compare::Kirillov {
        let k = kirillov_character(&rs, &lambda, &h)?;
        let rel = (k - chi).norm() / chi.norm().max(f64::MIN_POSITIVE);
        pass = rel <= a.tol;
        result["kirillov_character"] = c64(k);
        result["rel_diff"] = json!(rel);
    }
    Ok(Outcome {
        command: "character",
        config: json!({
            "family": rs.family().to_string(), "rank": rs.rank(), "weight": a.weight,
            "theta": a.theta, "h": h.coords().iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
            "compare": format!("{:?}", a.compare).to_lowercase(), "tol": a.tol,
        }),
        result,
        pass,
        warnings,
    })
}

fn cmd_volume(a: &VolumeArgs) -> Result<Outcome> {
    let rs = build_root_system(a.family.family, a.family.rank)?;
    let mut warnings = Vec::new();
    let h1 = cartan_from_cli(&rs, &a.h1, "h1", &mut warnings)?;
    let vol = coadjoint_volume(&rs, &h1)?;
    Ok(Outcome {
        command: "volume",
        config: json!({ "family": rs.family().to_string(), "rank": rs.rank(), "h1": h1.real_parts() }),
        result: json!({
            "volume": vol,
            "formula": "coadjoint_volume",
            "weyl_order": rs.weyl_group()?.len(),
            "pi_pi": format_rational(&pi_pi_norm_exact(&rs)),
            "discriminant": rs.discriminant_value(h1.coords()).re,
        }),
        pass: true,
        warnings,
    })
}

fn cmd_saddle(a: &SaddleArgs) -> Result<Outcome> {
    let spec = group_spec(&a.group)?;
    let rs = spec.root_system();
    let mut warnings = Vec::new();
    let h1 = cartan_from_cli(rs, &a.h1, "h1", &mut warnings)?;
    let h2 = cartan_from_cli(rs, &a.h2, "h2", &mut warnings)?;
    let starts = match a.starts {
        Some(s) => s,
        None => min_starts(rs)?,
    };
    let search = find_critical_points(&spec, &h1, &h2, starts, a.seed)?;
    let checks: Vec<_> = search
        .points
        .iter()
        .map(|p| match p.matched_weyl {
            Some(_) => hessian_determinant_check(&spec, p, &h1, &h2, a.step).map(Some),
            None => Ok(None),
        })
        .collect::<Result<_>>()?;
    let pi_sign = (rs.discriminant_value(h1.coords()) * rs.discriminant_value(h2.coords())).re.signum();
    let signs_ok = search.points.iter().zip(&checks).all(|(p, c)| match (p.weyl_sign, c) {
        (Some(s), Some(c)) => c.sqrt_det.signum() * pi_sign == f64::from(s),
        _ => false,
    });
    let hess_ok = checks.iter().all(|c| c.as_ref().is_some_and(|c| c.rel_error < a.tol));
    if search.unconverged > 0 {
        warnings.push(format!("{} starts did not converge", search.unconverged));
    }
    if search.incomplete_cover {
        warnings.push("fewer critical values than Weyl group elements".into());
    }
    let report = SaddleReport::new(&search, closed_form_critical_values(rs, &h1, &h2)?, &checks);
    let sp = stationary_phase_estimate(rs, &h1, &h2, a.t)?;
    let closed = hc_rhs(rs, &h1, &h2.scaled(Complex64::new(1.0 / a.t, 0.0)))?;
    let pass = !search.incomplete_cover && search.spurious == 0 && signs_ok && hess_ok;
    Ok(Outcome {
        command: "saddle",
        config: json!({
            "group": spec.label(), "h1": h1.real_parts(), "h2": h2.real_parts(),
            "starts": starts, "seed": a.seed, "step": a.step, "tol": a.tol, "t": a.t,
        }),
        result: json!({
            "report": report,
            "signs_match": signs_ok,
            "algebra_dim": spec.algebra_dim(),
            "stationary_phase": c64(sp),
            "closed_form": c64(closed),
            "stationary_phase_rel_diff": (sp - closed).norm() / closed.norm(),
        }),
        pass,
        warnings,
    })
}

fn default_point(rs: &RootSystem, scale: f64) -> Vec<f64> {
    rs.weyl_vector().iter().map(|x| scale * crate::rootsys::exact::to_f64(x)).collect()
}

fn cmd_heatflow(a: &HeatflowArgs) -> Result<Outcome> {
    let spec = CompactGroupSpec::for_root_system(a.family.family, a.family.rank)?;
    let rs = spec.root_system();
    let mut warnings = Vec::new();
    let h1v = a.h1.clone().unwrap_or_else(|| default_point(rs, 1.0));
    let h1 = cartan_from_cli(rs, &h1v, "h1", &mut warnings)?;
    let h2v = a.h2.clone().unwrap_or_else(|| default_point(rs, 0.8));
    let h2 = cartan_from_cli(rs, &h2v, "h2", &mut warnings)?;
    let center_v = a.center.clone().unwrap_or_else(|| h1.real_parts().iter().map(|x| 0.8 * x).collect());
    let center = cartan_from_cli(rs, &center_v, "center", &mut warnings)?;
    let grid = GridSpec::around(&rs.to_orthonormal_f64(&center.real_parts()), a.half_width, a.points);
    let in_window = |r: &[f64]| !r.is_empty() && r.iter().all(|x| (3.5..=4.5).contains(x));
    let (result, pass) = match a.check {
        HeatCheck::Radial => {
            let rep = radial_heat_residual(&spec, &h1, &grid, a.t, &a.steps)?;
            let pass = in_window(&rep.halving_ratio);
            (serde_json::to_value(&rep).map_err(json_err)?, pass)
        }
        HeatCheck::Cm => {
            let rep = cm_pde_residual(&spec, &h1, &grid, a.t, a.n_scaling, &a.steps)?;
            let disc_ok = rep.details["substitution_discrepancy"]
                .as_array()
                .is_some_and(|v| v.iter().all(|x| x.as_f64().is_some_and(|x| x < 1e-10)));
            let pass = in_window(&rep.halving_ratio) && disc_ok;
            (serde_json::to_value(&rep).map_err(json_err)?, pass)
        }
        HeatCheck::Boundary => {
            let bump = GaussianBump { center: h1.real_parts(), sigma: a.sigma, antisymmetrize: false }.bind(rs);
            let rep = boundary_delta_check(rs, &h1, &bump, &a.t_seq)?;
            let pass = rep.records.last().is_some_and(|r| r.rel_error <= 1e-3);
            (serde_json::to_value(&rep).map_err(json_err)?, pass)
        }
        HeatCheck::Semigroup => {
            let rep = semigroup_check(rs, &h1, &h2, a.s, a.t)?;
            let pass = rep.abs_error <= 1e-6;
            (serde_json::to_value(&rep).map_err(json_err)?, pass)
        }
        HeatCheck::Mass => {
            let m = heat_kernel_total_mass(&spec, a.t)?;
            (
                json!({ "op": "heat_kernel_total_mass", "mass": m, "algebra_dim": spec.algebra_dim() }),
                (m - 1.0).abs() <= 1e-3,
            )
        }
        HeatCheck::Exact => {
            let v = v_function(&spec, &h1, &h2, a.t)?;
            let w = v_weyl_sum(rs, &h1, &h2, a.t)?;
            let rel = (v - w).abs() / w.abs();
            (json!({ "op": "v_exact", "v_function": v, "weyl_sum_form": w, "rel_diff": rel }), rel <= 1e-12)
        }
        HeatCheck::Mc => {
            let closed = averaged_kernel_closed(&spec, &h1, &h2, a.t)?;
            let est = averaged_kernel_mc(&spec, &h1, &h2, a.t, a.samples, a.seed)?;
            let z = (est.mean.re - closed).abs() / est.stderr;
            (
                json!({ "op": "averaged_kernel_mc", "closed_form": closed, "monte_carlo": est.mean.re, "stderr": est.stderr, "z": z }),
                z <= 3.0,
            )
        }
    };
    if let Some(path) = &a.dump_csv {
        let csv = grid_dump(&spec, &h1, &grid, a.t)?;
        std::fs::write(path, csv).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(Outcome {
        command: "heatflow",
        config: json!({
            "check": format!("{:?}", a.check).to_lowercase(),
            "family": rs.family().to_string(), "rank": rs.rank(), "group": spec.label(),
            "h1": h1.real_parts(), "h2": h2.real_parts(), "t": a.t, "steps": a.steps,
            "grid": grid, "n_scaling": a.n_scaling, "t_seq": a.t_seq, "sigma": a.sigma, "s": a.s,
            "samples": a.samples, "seed": a.seed,
        }),
        result,
        pass,
        warnings,
    })
}

fn cmd_roots(a: &RootsArgs) -> Result<Outcome> {
    let rs = build_root_system(a.family.family, a.family.rank)?;
    let data = rs.root_data()?;
    let order = rs.weyl_group()?.len();
    let pass = order as u128 == rs.weyl_order_formula();
    Ok(Outcome {
        command: "roots",
        config: json!({ "family": rs.family().to_string(), "rank": rs.rank() }),
        result: json!({
            "root_data": data,
            "labels": (0..rs.num_positive_roots()).map(|i| rs.root_label(i)).collect::<Vec<_>>(),
            "weyl_order_formula": rs.weyl_order_formula().to_string(),
            "pi_pi": format_rational(&pi_pi_norm_exact(&rs)),
            "normalization_constant": normalization_constant(&rs)?,
            "algebra_dim": rs.algebra_dim(),
        }),
        pass,
        warnings: Vec::new(),
    })
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Numerical(format!("report serialization failed: {e}"))
}

/// Runs a parsed command.
pub fn execute(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::VerifyHc(a) => cmd_verify_hc(a),
        Command::Hciz(a) => cmd_hciz(a),
        Command::Character(a) => cmd_character(a),
        Command::Volume(a) => cmd_volume(a),
        Command::Saddle(a) => cmd_saddle(a),
        Command::Heatflow(a) => cmd_heatflow(a),
        Command::Roots(a) => cmd_roots(a),
    }
}

/// Flattens nested JSON into dotted keys.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        Value::Array(a) if a.iter().any(|x| x.is_object() || x.is_array()) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("{prefix}.{i}"), x, out);
            }
        }
        Value::Array(a) => {
            let parts: Vec<String> = a.iter().map(scalar).collect();
            out.push((prefix.to_string(), parts.join(";")));
        }
        _ => out.push((prefix.to_string(), scalar(v))),
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Renders a full report (payload plus `meta`).
pub fn render(report: &Value, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).unwrap_or_default();
            s.push('\n');
            s
        }
        Format::Csv | Format::Table => {
            let mut rows = Vec::new();
            flatten("", report, &mut rows);
            if format == Format::Csv {
                let mut s = String::from("key,value\n");
                for (k, v) in rows {
                    s.push_str(&format!("{},{}\n", csv_field(&k), csv_field(&v)));
                }
                s
            } else {
                let w = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
                rows.iter().map(|(k, v)| format!("{k:<w$}  {v}\n")).collect()
            }
        }
    }
}

fn with_meta(payload: Value, elapsed: f64) -> Value {
    let mut m = match payload {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("payload".into(), other);
            m
        }
    };
    let ts = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    m.insert("meta".into(), json!({ "timestamp": ts, "elapsed": elapsed }));
    Value::Object(m)
}

fn thread_count(cli: &Cli) -> std::result::Result<Option<usize>, String> {
    if let Some(n) = cli.threads {
        return if n == 0 { Err("--threads must be ≥ 1".into()) } else { Ok(Some(n)) };
    }
    match std::env::var(THREADS_ENV) {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!("{THREADS_ENV}='{s}' is not a positive integer")),
        },
        Err(_) => Ok(None),
    }
}

/// Parses arguments, runs the command, writes the report; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let threads = match thread_count(&cli) {
        Ok(t) => t,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_USAGE;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_USAGE;
        }
    };
    let start = Instant::now();
    let outcome = pool.install(|| execute(&cli));
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    let report = with_meta(outcome.payload(), start.elapsed().as_secs_f64());
    let text = render(&report, cli.format);
    let written = match &cli.output {
        Some(path) => {
            std::fs::write(path, text.as_bytes()).map_err(|e| format!("cannot write {}: {e}", path.display()))
        }
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string()),
    };
    if let Err(msg) = written {
        eprintln!("error: {msg}");
        return EXIT_USAGE;
    }
    outcome.exit_code()
}
