//! `ramsey-lab` experiment runner.
//!
//! Every subcommand writes its main artifact (CSV or JSON) to `--out`, or to
//! stdout without it. Flags can also come from a `--config` file of
//! `key = value` lines; keys are long flag names, repeated keys append to
//! list flags, and an optional `command` key names the subcommand. Flags
//! given on the command line win over the file.
//!
//! Exit status: 0 on success, 2 when a witness search finds nothing, 1 on
//! any other error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use ramsey_lab::convex_curves::{
    decay_profile, make_curve, measure_fourier, sample_measure, standard_directions, standard_radii,
    ConvexCurve, CurveKind,
};
use ramsey_lab::counting::{
    decompose, default_distance_tol, find_config_witness, find_distance_witness, ScaleLadder,
};
use ramsey_lab::density::{banach, joint_density, vc_density, TruncationParams};
use ramsey_lab::gowers::{gcs_check, gowers_norm, HypercubeAssignment, VertexFn};
use ramsey_lab::kernels::{check_heat, check_identity, narrow_gaussian, Identity};
use ramsey_lab::planar_fields::{generate, GridField, SetSpec, Window};
use ramsey_lab::sbl::{bound_probe, sbl_forms, smooth_random_field, telescoping_check, SBLInstance, SGrid};
use ramsey_lab::vc_family::{certificate_from_config, default_points, vc_dim, TraceFamily};
use ramsey_lab::{exec, Error, P2};

const SUBCOMMANDS: [&str; 7] = ["identities", "curves", "gowers", "density", "distances", "vcdim", "sbl"];

#[derive(Parser, Debug)]
#[command(name = "ramsey-lab", version, about = "Desk-scale experiments for density Ramsey problems in the plane", args_override_self = true)]
struct Cli {
    /// Run the analytic-oracle suite and print one PASS/FAIL line per check.
    #[arg(long, global = true)]
    selftest: bool,
    /// Worker threads (1 forces the sequential path). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Flat `key = value` file with flag values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file for the main artifact (stdout if absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Option<Cmd>,
}

#[derive(Args, Debug, Clone)]
struct WindowArgs {
    /// Window side length.
    #[arg(long, default_value_t = 64.0)]
    window: f64,
    /// Cells per side (power of two).
    #[arg(long, default_value_t = 256)]
    grid: usize,
    /// Window center as `x:y`.
    #[arg(long, default_value = "0:0", value_parser = parse_point, allow_hyphen_values = true)]
    center: P2,
}

impl WindowArgs {
    fn window(&self) -> Result<Window> {
        Ok(Window::centered(self.center, self.window, self.grid)?)
    }
}

#[derive(Args, Debug, Clone)]
struct SetArgs {
    /// Set A in the set grammar (ones, zeros, chessboard[:c], chessboard-white[:c], disk:x:y:r, rect:x0:y0:x1:y1, random:c:p:seed, balls+, balls-, union(..), inter(..), not(..)).
    #[arg(long, default_value = "ones")]
    set_a: String,
    /// Set B, same grammar.
    #[arg(long, default_value = "ones")]
    set_b: String,
    /// Read A from a `PFIELD v1` file instead (its own window is used).
    #[arg(long)]
    pfield_a: Option<PathBuf>,
    /// Read B from a `PFIELD v1` file instead.
    #[arg(long)]
    pfield_b: Option<PathBuf>,
    /// Write the A field used as `PFIELD v1`.
    #[arg(long)]
    write_a: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct CurveArgs {
    /// Curve: circle, ellipse:a:b, superellipse:p.
    #[arg(long, default_value = "circle")]
    curve: String,
    /// Read the curve from a `CURVE v1` file instead.
    #[arg(long)]
    curve_file: Option<PathBuf>,
    /// Polygon samples K (power of two, at least 64).
    #[arg(long, default_value_t = 1024)]
    samples: usize,
}

impl CurveArgs {
    fn curve(&self) -> Result<ConvexCurve> {
        if let Some(p) = &self.curve_file {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            return Ok(ConvexCurve::read_curve(BufReader::new(f))?);
        }
        let kind: CurveKind = self.curve.parse()?;
        Ok(make_curve(kind, self.samples)?)
    }
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Gaussian convolution identities and the heat equation (CSV: check,alpha,beta,max_err,tol,pass).
    ///
    /// Tolerance default: max error 1e-6 on the grid; heat finite-difference step 1e-4.
    Identities {
        #[arg(long, default_value_t = 3.0)]
        alpha: f64,
        #[arg(long, default_value_t = 4.0)]
        beta: f64,
        /// gg, hh, kg or all.
        #[arg(long, default_value = "all")]
        which: String,
        /// Heat-equation times checked at x = (0.3, 0.2).
        #[arg(long, value_delimiter = ',', default_value = "1,5")]
        heat_t: Vec<f64>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[command(flatten)]
        win: WindowArgs,
    },
    /// Fourier decay of the arclength measure (CSV: direction,radius,value, value = |ξ|^{1/2}|σ̂(ξ)|).
    ///
    /// Frequency guard: K_mu/(20 t). Default tolerances: curve distance 10·diam·t/K².
    Curves {
        #[command(flatten)]
        curve: CurveArgs,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Measure atoms.
        #[arg(long, default_value_t = 4096)]
        k_mu: usize,
        /// Directions kπ/count scanned.
        #[arg(long, default_value_t = 16)]
        directions: usize,
        /// Also write the curve as `CURVE v1`.
        #[arg(long)]
        write_curve: Option<PathBuf>,
    },
    /// Gowers U^n norm of A, plus a GCS check with four seeded random fields (JSON).
    ///
    /// GCS passes when lhs ≤ rhs·(1 + 1e-6). U³ uses shift stride 4.
    Gowers {
        /// Order n (2 or 3).
        #[arg(long, default_value_t = 2)]
        order: usize,
        #[command(flatten)]
        sets: SetArgs,
        #[command(flatten)]
        win: WindowArgs,
    },
    /// Truncated density estimators (JSON: value, stderr, M, R, r_values, z_values, seed).
    ///
    /// r ranges over M·2^k ≤ R/2^n. Monte Carlo needs at least 1e4 samples.
    Density {
        /// joint (deterministic), banach, or vc (Monte Carlo over the 14-dimensional form).
        #[arg(long, default_value = "joint")]
        kind: String,
        #[arg(long, default_value_t = 1.0)]
        m: f64,
        /// Side R of the evaluation squares z + [0, R]².
        #[arg(long, default_value_t = 32.0)]
        r_side: f64,
        /// Square corners z as `x:y` (repeatable, comma separated).
        #[arg(long, value_delimiter = ',', default_value = "-16:-16", value_parser = parse_point, allow_hyphen_values = true)]
        z: Vec<P2>,
        #[arg(long, default_value_t = 1_000_000)]
        mc_samples: usize,
        #[command(flatten)]
        sets: SetArgs,
        #[command(flatten)]
        win: WindowArgs,
    },
    /// Counting-form decomposition N⁰ = I_s + I_e + I_u over a lacunary ladder (CSV: scale,N0,N1,Neps,I_s,I_e,I_u).
    ///
    /// Ladder needs λ_{k+1} ≥ 2λ_k and λ ≤ R/2. Bookkeeping tolerance 8 ulp·max|N|.
    /// Witness tolerance default 2h + λ·sag.
    Distances {
        #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
        lambda_ladder: Vec<f64>,
        /// Mollifier width ε, relative to λ (ελ must be at least 2h).
        #[arg(long, default_value_t = 0.25)]
        eps: f64,
        #[arg(long, default_value_t = 4096)]
        k_mu: usize,
        /// Write a distance witness per scale as JSON to this file; exit 2 if one is missing.
        #[arg(long)]
        witness: Option<PathBuf>,
        #[command(flatten)]
        curve: CurveArgs,
        #[command(flatten)]
        sets: SetArgs,
        #[command(flatten)]
        win: WindowArgs,
    },
    /// VC dimension of {(b + tΓ) ∩ A : b ∈ B}; prints the dimension, certificate JSON to --out.
    ///
    /// Trace tolerance η default max(10·diam·t/K², chord sag·t). Sets are capped at size 4.
    Vcdim {
        #[arg(long, default_value_t = 8.0)]
        t: f64,
        /// Points taken on the translate at the window center.
        #[arg(long, default_value_t = 12)]
        on_curve: usize,
        /// Total candidate points (at most 200).
        #[arg(long, default_value_t = 60)]
        points: usize,
        /// Maximum number of shatter tests.
        #[arg(long, default_value_t = 1_000_000)]
        budget: usize,
        /// Build the certificate from a configuration witness instead (exit 2 if none is found).
        #[arg(long)]
        from_config: bool,
        /// Sample budget of the configuration search.
        #[arg(long, default_value_t = 1_000_000)]
        config_budget: usize,
        #[command(flatten)]
        curve: CurveArgs,
        #[command(flatten)]
        sets: SetArgs,
        #[arg(long, default_value_t = 64.0)]
        window: f64,
        #[arg(long, default_value_t = 128)]
        grid: usize,
    },
    /// Singular Brascamp-Lieb forms J_1..J_n and the telescoping check (JSON), or the bound probe (CSV).
    ///
    /// s grid [1e-3, 1e3], 200 log nodes; converged when widening it moves J by ≤ 1e-3 relative.
    /// Telescoping tolerance 2e-2 relative.
    Sbl {
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        alpha: Vec<f64>,
        /// gaussian (e^{-2π|x|²} at every vertex) or random (seeded smooth fields).
        #[arg(long, default_value = "gaussian")]
        field: String,
        #[arg(long, default_value_t = 32)]
        grid: usize,
        /// Run the bound probe with this many trials instead.
        #[arg(long)]
        probe_trials: Option<usize>,
    },
}

fn parse_point(s: &str) -> std::result::Result<P2, String> {
    let (x, y) = s.split_once(':').ok_or_else(|| format!("expected x:y, got `{s}`"))?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok(P2::new(p(x)?, p(y)?))
}

/// Splice `--config` file entries into the argument list right after the subcommand.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let strs: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut path = None;
    for (i, a) in strs.iter().enumerate() {
        if a == "--config" {
            path = strs.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else { return Ok(args) };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {path}"))?;
    let mut command = None;
    let mut extra = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').with_context(|| format!("{path}:{}: expected key = value", ln + 1))?;
        let (k, v) = (k.trim().replace('_', "-"), v.trim());
        match (k.as_str(), v) {
            ("command", _) => command = Some(v.to_string()),
            ("config", _) => bail!("{path}:{}: nested config", ln + 1),
            (_, "true") => extra.push(format!("--{k}")),
            (_, "false") => {}
            _ => extra.push(format!("--{k}={v}")),
        }
    }
    let pos = strs.iter().position(|a| SUBCOMMANDS.contains(&a.as_str()));
    let mut out: Vec<OsString> = Vec::with_capacity(args.len() + extra.len() + 1);
    match pos {
        Some(p) => {
            out.extend(args[..=p].iter().cloned());
            out.extend(extra.into_iter().map(OsString::from));
            out.extend(args[p + 1..].iter().cloned());
        }
        None => {
            out.extend(args);
            if let Some(c) = command {
                out.push(c.into());
            }
            out.extend(extra.into_iter().map(OsString::from));
        }
    }
    Ok(out)
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn write_json<T: Serialize>(out: &Option<PathBuf>, v: &T) -> Result<()> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, v)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn read_field(path: &Path) -> Result<GridField> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(GridField::read_pfield(BufReader::new(f))?)
}

fn fields(s: &SetArgs, w: Window) -> Result<(GridField, GridField)> {
    let a = match &s.pfield_a {
        Some(p) => read_field(p)?,
        None => generate(&s.set_a.parse::<SetSpec>()?, w)?,
    };
    let b = match &s.pfield_b {
        Some(p) => read_field(p)?,
        None => generate(&s.set_b.parse::<SetSpec>()?, a.window)?,
    };
    if let Some(p) = &s.write_a {
        a.write_pfield(BufWriter::new(File::create(p)?))?;
    }
    Ok((a, b))
}

#[derive(Serialize)]
struct IdentityRow {
    check: String,
    alpha: f64,
    beta: f64,
    max_err: f64,
    tol: f64,
    pass: bool,
}

fn csv_rows<T: Serialize>(out: &Option<PathBuf>, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink(out)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

const HEAT_STEP: f64 = 1e-4;

fn identities(alpha: f64, beta: f64, which: &str, heat_t: &[f64], tol: f64, w: Window, out: &Option<PathBuf>) -> Result<()> {
    let list: Vec<(&str, Identity)> = match which {
        "all" => vec![("gg", Identity::GG), ("hh", Identity::HH), ("kg", Identity::KG)],
        s => vec![(s, s.parse()?)],
    };
    let mut rows = Vec::new();
    for (name, id) in list {
        let e = check_identity(id, alpha, beta, w)?;
        rows.push(IdentityRow { check: name.into(), alpha, beta, max_err: e, tol, pass: e <= tol });
    }
    for &t in heat_t {
        let e = check_heat(t, HEAT_STEP, P2::new(0.3, 0.2))?;
        rows.push(IdentityRow { check: "heat".into(), alpha: t, beta: HEAT_STEP, max_err: e, tol, pass: e <= tol });
    }
    csv_rows(out, &rows)
}

fn random_grid_field(w: Window, seed: u64) -> Result<GridField> {
    Ok(generate(&SetSpec::Random { cell: w.side / 16.0, density: 0.5, seed }, w)?)
}

fn run(cli: Cli) -> Result<()> {
    let out = &cli.out;
    let Some(cmd) = cli.cmd else {
        bail!("no subcommand given (see --help)");
    };
    match cmd {
        Cmd::Identities { alpha, beta, which, heat_t, tol, win } => {
            identities(alpha, beta, &which, &heat_t, tol, win.window()?, out)?;
        }
        Cmd::Curves { curve, t, k_mu, directions, write_curve } => {
            let c = curve.curve()?;
            if let Some(p) = write_curve {
                let mut f = BufWriter::new(File::create(&p)?);
                c.write_curve(&mut f)?;
                f.flush()?;
            }
            let m = sample_measure(&c, t, k_mu)?;
            let guard = m.guard();
            let radii: Vec<f64> = standard_radii().into_iter().filter(|r| *r <= guard).collect();
            let prof = decay_profile(&m, &standard_directions(directions), &radii)?;
            eprintln!("sup {} at direction {} radius {}", prof.sup, prof.argmax.0, prof.argmax.1);
            csv_rows(out, &prof.table)?;
        }
        Cmd::Gowers { order, sets, win } => {
            let w = win.window()?;
            let (a, _) = fields(&sets, w)?;
            let norm = gowers_norm(a.grid(), order)?;
            let asg = HypercubeAssignment::new(
                2,
                (0..4u64)
                    .map(|r| random_grid_field(a.window, cli.seed.wrapping_mul(4).wrapping_add(r)).map(VertexFn::field))
                    .collect::<Result<Vec<_>>>()?,
            )?;
            let g = gcs_check(&asg)?;
            write_json(out, &json!({ "order": order, "norm": norm, "gcs": { "lhs": g.lhs, "rhs": g.rhs, "ok": g.ok }, "seed": cli.seed }))?;
        }
        Cmd::Density { kind, m, r_side, z, mc_samples, sets, win } => {
            let w = win.window()?;
            let (a, b) = fields(&sets, w)?;
            let n = match kind.as_str() {
                "joint" | "banach" => 1,
                "vc" => 6,
                k => bail!("unknown density kind `{k}` (joint, banach, vc)"),
            };
            let p = TruncationParams::geometric(m, r_side, n, z)?.with_mc(mc_samples, cli.seed);
            match kind.as_str() {
                "joint" => write_json(out, &joint_density(&a, &b, &p)?.record())?,
                "banach" => {
                    let v = banach(&a, &p);
                    write_json(out, &json!({ "value": v, "M": p.m, "R": p.r_side, "z_values": p.z_values }))?
                }
                _ => write_json(out, &vc_density(&a, &b, &p)?.record())?,
            }
        }
        Cmd::Distances { lambda_ladder, eps, k_mu, witness, curve, sets, win } => {
            let w = win.window()?;
            let c = curve.curve()?;
            let (a, b) = fields(&sets, w)?;
            let ladder = ScaleLadder::for_window(lambda_ladder, a.window.side)?;
            let rep = decompose(a.grid(), b.grid(), &ladder, eps, &c, k_mu)?;
            let mut s = sink(out)?;
            rep.write_csv(&mut s)?;
            s.flush()?;
            eprintln!("j* = {} pigeonhole {} bookkeeping_err {:e}", rep.j_star, rep.pigeonhole_ok, rep.bookkeeping_err);
            if let Some(p) = witness {
                let mut found = Vec::new();
                for &l in &ladder.scales {
                    let m = sample_measure(&c, l, k_mu)?;
                    let tol = default_distance_tol(&c, a.window.h(), l);
                    found.push(find_distance_witness(&a, &b, &m, tol));
                }
                let ok: Vec<_> = found.iter().filter_map(|r| r.as_ref().ok()).collect();
                write_json(&Some(p), &ok)?;
                if let Some(Err(e)) = found.into_iter().find(|r| r.is_err()) {
                    return Err(e.into());
                }
            }
        }
        Cmd::Vcdim { t, on_curve, points, budget, from_config, config_budget, curve, sets, window, grid } => {
            let w = Window::centered(P2::ZERO, window, grid)?;
            let c = curve.curve()?;
            let (a, b) = fields(&sets, w)?;
            let fam = TraceFamily::with_default_tol(c, t, a, b)?;
            if from_config {
                let cw = find_config_witness(&fam.a, &fam.b, &fam.curve, t, fam.eta, cli.seed, config_budget)?;
                let cert = certificate_from_config(&cw, &fam)?;
                println!("{}", if cert.complete { 3 } else { 2 });
                write_json(out, &cert)?;
                if !cert.complete {
                    return Err(Error::NotFound("no empty-set witness among B cells".into()).into());
                }
            } else {
                let pts = default_points(&fam, on_curve, points);
                let r = vc_dim(&fam, &pts, budget)?;
                println!("{}", r.dim);
                if out.is_some() {
                    write_json(out, &r)?;
                }
                if r.exhausted {
                    return Err(Error::NotFound(format!("budget exhausted, lower bound {}", r.dim)).into());
                }
            }
        }
        Cmd::Sbl { n, alpha, field, grid, probe_trials } => {
            let w = Window::centered(P2::ZERO, 4.0, grid)?;
            if let Some(trials) = probe_trials {
                let p = bound_probe(n, trials, cli.seed, w)?;
                let mut s = sink(out)?;
                p.write_csv(&mut s)?;
                s.flush()?;
                eprintln!("max ratio {} trend corr {} no_trend {}", p.max_ratio, p.trend_corr, p.no_trend);
                return Ok(());
            }
            let asg = match field.as_str() {
                "gaussian" => HypercubeAssignment::constant(n, GridField::from_fn(w, narrow_gaussian)?)?,
                "random" => HypercubeAssignment::new(
                    n,
                    (0..1u64 << n)
                        .map(|r| smooth_random_field(w, cli.seed.wrapping_add(r)).map(VertexFn::field))
                        .collect::<ramsey_lab::Result<Vec<_>>>()?,
                )?,
                f => bail!("unknown field `{f}` (gaussian, random)"),
            };
            let inst = SBLInstance::new(1, alpha.clone(), asg, SGrid::standard())?;
            let forms = sbl_forms(&inst)?;
            let tel = telescoping_check(&inst)?;
            let rows: Vec<_> = forms
                .iter()
                .map(|f| json!({ "j": f.j, "value": f.value, "extended_value": f.extended_value, "converged": f.converged }))
                .collect();
            write_json(out, &json!({ "n": n, "alpha": alpha, "forms": rows, "telescoping": tel }))?;
        }
    }
    Ok(())
}

fn selftest() -> bool {
    let mut all = true;
    let mut line = |name: &str, value: f64, ok: bool| {
        println!("{} {name} {value:e}", if ok { "PASS" } else { "FAIL" });
        all &= ok;
    };
    let w = Window::centered(P2::ZERO, 64.0, 256).unwrap();
    for (name, id) in [("identity-gg", Identity::GG), ("identity-hh", Identity::HH), ("identity-kg", Identity::KG)] {
        let e = check_identity(id, 3.0, 4.0, w).unwrap_or(f64::INFINITY);
        line(name, e, e <= 1e-6);
    }
    let e = check_heat(1.0, HEAT_STEP, P2::new(0.3, 0.2)).unwrap_or(f64::INFINITY);
    line("heat", e, e <= 1e-6);
    let circle = make_curve(CurveKind::Circle, 1024).unwrap();
    let m = sample_measure(&circle, 1.0, 4096).unwrap();
    let v = measure_fourier(&m, P2::new(0.38274, 0.0)).map(|z| z.norm()).unwrap_or(f64::INFINITY);
    line("bessel-zero", v, v <= 1e-3);
    let sw = Window::centered(P2::ZERO, 4.0, 32).unwrap();
    let tel = GridField::from_fn(sw, narrow_gaussian)
        .and_then(|f| HypercubeAssignment::constant(2, f))
        .and_then(|a| SBLInstance::new(1, vec![1.0, 3.0], a, SGrid::standard()))
        .and_then(|i| telescoping_check(&i))
        .map(|t| t.rel_err)
        .unwrap_or(f64::INFINITY);
    line("telescoping", tel, tel <= 2e-2);
    let uw = Window::centered(P2::new(0.5, 0.5), 4.0, 128).unwrap();
    let u2 = generate(&SetSpec::Rect { min: P2::ZERO, max: P2::new(1.0, 1.0) }, uw)
        .and_then(|f| gowers_norm(f.grid(), 2))
        .unwrap_or(f64::INFINITY);
    line("u2-unit-square", u2, (u2 - (2.0f64 / 3.0).sqrt()).abs() <= 2e-3);
    all
}

fn main() -> ExitCode {
    let args = match expand_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(k) = cli.workers {
        if k == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(1);
        }
        exec::set_sequential(k == 1);
        #[cfg(feature = "parallel")]
        {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
        }
    }
    if cli.selftest {
        return ExitCode::from(if selftest() { 0 } else { 1 });
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let not_found = matches!(e.downcast_ref::<Error>(), Some(Error::NotFound(_)));
            ExitCode::from(if not_found { 2 } else { 1 })
        }
    }
}
