//! `rayleigh`: material validation, Rayleigh speeds, direction scans,
//! subprincipal symbols and the self-test suite.
//!
//! Exit codes: 0 success, 1 input error, 2 numerical failure, 3 no
//! Rayleigh root where one was demanded.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use rayleigh_core::isotropic::{subprincipal_p, CurvatureData, IsoSurfaceState};
use rayleigh_core::rayleigh::{holonomy_of_scan, impedance_at_speed, scan_directions, Scan, ScanRow};
use rayleigh_core::{
    impedance_diagnostics, parse_material, rayleigh_point, selftest, validate_stiffness, Error, Material, SurfaceFrame,
    Vec3,
};

/// Tolerance on the Riccati and kernel residuals of a reported root.
const ROOT_RESIDUAL_TOL: f64 = 1e-8;
const ROUTE_TOL: f64 = 1e-9;
/// Relative tolerance for recognising an isotropic stiffness.
const ISO_TOL: f64 = 1e-9;

#[derive(Parser)]
#[command(name = "rayleigh", version, about = "Surface impedance and Rayleigh waves in anisotropic elastic half-spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Symmetry, ellipticity and convexity report for a material file.
    Validate {
        #[arg(long)]
        material: PathBuf,
    },
    /// Rayleigh speed, polarisation and residuals along one direction.
    Rayleigh {
        #[arg(long)]
        material: PathBuf,
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
        normal: Vec3,
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
        tangent: Vec3,
        #[command(flatten)]
        format: Format,
    },
    /// Rayleigh speeds over equally spaced tangential directions.
    Scan {
        #[arg(long)]
        material: PathBuf,
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
        normal: Vec3,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        /// Fail with exit code 3 when some direction has no root.
        #[arg(long)]
        require_e1: bool,
    },
    /// Subprincipal symbol of the Rayleigh operator (isotropic media).
    Subprincipal {
        #[arg(long)]
        material: PathBuf,
        #[arg(long)]
        curvature: PathBuf,
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
        xi_dir: Vec3,
    },
    /// Identity suite on built-in materials.
    Selftest {
        #[arg(long, default_value_t = selftest::DEFAULT_SEED)]
        seed: u64,
        /// Divide every numeric tolerance by 100.
        #[arg(long)]
        strict: bool,
    },
}

#[derive(Args)]
#[group(multiple = false)]
struct Format {
    #[arg(long)]
    json: bool,
    #[arg(long)]
    csv: bool,
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got {s:?}"));
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.parse::<f64>().map_err(|e| format!("{p:?}: {e}"))?;
        if !slot.is_finite() {
            return Err(format!("{p:?} is not finite"));
        }
    }
    Ok(Vec3::from(v))
}

/// Exit status plus the payload for standard output.
struct Outcome {
    code: u8,
    payload: Option<String>,
}

impl Outcome {
    fn ok(payload: String) -> Self {
        Self {
            code: 0,
            payload: Some(payload),
        }
    }

    fn with_code(code: u8, payload: String) -> Self {
        Self {
            code,
            payload: Some(payload),
        }
    }
}

/// Failure with a message for standard error.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_input_error() {
            1
        } else if matches!(e, Error::NoRoot) {
            3
        } else {
            2
        };
        Self {
            code,
            message: format!("{} [{}]", e, e.code()),
        }
    }
}

fn input_failure(message: String) -> Failure {
    Failure { code: 1, message }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| input_failure(format!("{}: {e}", path.display())))
}

fn load_material(path: &Path) -> Result<Material, Failure> {
    Ok(parse_material(&read_text(path)?)?)
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values serialise")
}

fn cmd_validate(material: &Path) -> Result<Outcome, Failure> {
    let mat = load_material(material)?;
    let report = validate_stiffness(&mat.stiffness);
    Ok(Outcome::ok(pretty(&json!({
        "name": mat.name,
        "density_kg_m3": mat.density,
        "density_positive": mat.density > 0.0,
        "report": report,
    }))))
}

fn cmd_rayleigh(material: &Path, normal: Vec3, tangent: Vec3, csv: bool) -> Result<Outcome, Failure> {
    let mat = load_material(material)?;
    let (frame, defect) = SurfaceFrame::orthonormalize(normal, tangent)?;
    let point = rayleigh_point(&mat, &frame)?;
    let mut code = 0;
    let mut diagnostics = Value::Null;
    if let Some(c_r) = point.c_r {
        let (pencil, data) = impedance_at_speed(&mat, &frame, c_r)?;
        let diag = impedance_diagnostics(&data, &pencil);
        let res = point.res_riccati.unwrap_or(f64::INFINITY).max(point.res_kernel.unwrap_or(f64::INFINITY));
        if !(res <= ROOT_RESIDUAL_TOL) {
            eprintln!("root residual {res:.3e} exceeds {ROOT_RESIDUAL_TOL:.0e}");
            code = 2;
        }
        diagnostics = serde_json::to_value(diag).expect("diagnostics serialise");
    } else {
        eprintln!("no Rayleigh root along this direction");
        code = 3;
    }
    let payload = if csv {
        let scan = Scan {
            rows: vec![ScanRow {
                theta: 0.0,
                point: point.clone(),
            }],
            e1_satisfied: point.exists,
            c_r_min: point.c_r,
            c_r_max: point.c_r,
        };
        scan.to_csv()
    } else {
        let kernel = point.kernel_components().map(|k| json!({"re": [k[0], k[2], k[4]], "im": [k[1], k[3], k[5]]}));
        pretty(&json!({
            "material": mat.name,
            "normal": point.normal,
            "direction": point.direction,
            "frame_defect": defect,
            "c_lim_mps": point.c_lim,
            "exists": point.exists,
            "c_r_mps": point.c_r,
            "kernel": kernel,
            "slope": point.slope,
            "res_kernel": point.res_kernel,
            "res_riccati": point.res_riccati,
            "z_eigenvalues": point.z_eigenvalues,
            "diagnostics": diagnostics,
        }))
    };
    Ok(Outcome::with_code(code, payload))
}

fn cmd_scan(material: &Path, normal: Vec3, count: usize, out: &Path, require_e1: bool) -> Result<Outcome, Failure> {
    if count < 4 {
        return Err(input_failure(format!("--count must be at least 4, got {count}")));
    }
    let mat = load_material(material)?;
    let scan = scan_directions(&mat, &normal, count)?;
    std::fs::write(out, scan.to_csv()).map_err(|e| input_failure(format!("{}: {e}", out.display())))?;
    let mut code = 0;
    let holonomy = match holonomy_of_scan(&scan) {
        Ok(h) => Some(h),
        Err(Error::NoRoot) => None,
        Err(e) => {
            eprintln!("holonomy: {e}");
            code = 2;
            None
        }
    };
    if require_e1 && !scan.e1_satisfied {
        eprintln!("some directions have no Rayleigh root");
        code = 3;
    }
    Ok(Outcome::with_code(
        code,
        pretty(&json!({
            "count": count,
            "e1_satisfied": scan.e1_satisfied,
            "c_r_min": scan.c_r_min,
            "c_r_max": scan.c_r_max,
            "holonomy_phase": holonomy.as_ref().map(|h| h.total_phase),
            "holonomy": holonomy,
            "csv": out.display().to_string(),
        })),
    ))
}

fn cmd_subprincipal(material: &Path, curvature: &Path, xi_dir: Vec3) -> Result<Outcome, Failure> {
    let mat = load_material(material)?;
    let Some((lambda, mu)) = mat.stiffness.lame_parameters(ISO_TOL) else {
        return Err(input_failure("anisotropic subprincipal unsupported".into()));
    };
    let curv = CurvatureData::from_json(&read_text(curvature)?)?;
    let n = xi_dir.norm();
    if !(n > 0.0) {
        return Err(input_failure("--xi-dir must be nonzero".into()));
    }
    let st = IsoSurfaceState::on_sigma(lambda, mu, mat.density)?;
    let b = subprincipal_p(&st, &curv)?;
    let gap = (b.psub_direct - b.psub_assembled).abs() / (1.0 + b.psub_direct.abs());
    let code = if gap <= ROUTE_TOL {
        0
    } else {
        eprintln!("two-route disagreement {gap:.3e} exceeds {ROUTE_TOL:.0e}");
        2
    };
    let mut payload = b.to_json();
    payload["xi"] = json!((xi_dir / n * st.xi_mag).as_slice());
    payload["route_gap"] = json!(gap);
    Ok(Outcome::with_code(code, pretty(&payload)))
}

fn cmd_selftest(seed: u64, strict: bool) -> Outcome {
    let report = selftest::run(seed, strict);
    Outcome::with_code(if report.passed { 0 } else { 2 }, report.to_json())
}

fn run(cli: Cli) -> Result<Outcome, Failure> {
    match cli.command {
        Command::Validate { material } => cmd_validate(&material),
        Command::Rayleigh {
            material,
            normal,
            tangent,
            format,
        } => cmd_rayleigh(&material, normal, tangent, format.csv),
        Command::Scan {
            material,
            normal,
            count,
            out,
            require_e1,
        } => cmd_scan(&material, normal, count, &out, require_e1),
        Command::Subprincipal {
            material,
            curvature,
            xi_dir,
        } => cmd_subprincipal(&material, &curvature, xi_dir),
        Command::Selftest { seed, strict } => Ok(cmd_selftest(seed, strict)),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(out) => {
            if let Some(p) = out.payload {
                // a closed pipe downstream is not an error of ours
                let _ = writeln!(std::io::stdout().lock(), "{p}");
            }
            ExitCode::from(out.code)
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
