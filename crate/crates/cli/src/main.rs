mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use darboux::curve::{self, CurveScene};
use darboux::envelope::{self, Axis};
use darboux::frame::{self, Gauge};
use darboux::mesh::Mesh;
use darboux::metricbundle;
use darboux::scene::{self, Scene, BUNDLED};
use darboux::singular;
use darboux::transon;
use darboux::Error;

#[derive(Parser)]
#[command(name = "darboux", version, about = "Darboux directions, envelopes and affine normal planes of submanifolds in hypersurfaces")]
struct Cli {
    /// Include wall-clock timing in the report.
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Darboux frame, structure coefficients and regression values at a point.
    Frame(PointArgs),
    /// Envelope of tangent spaces over a parameter grid.
    Envelope(GridArgs),
    /// Singularity class of the envelope germ at (t, u).
    Classify(ClassifyArgs),
    /// Adapted parameterization, invariants and regression verdict of a curve.
    Curve(CurveArgs),
    /// Affine metric, normal plane bundle and cubic forms at a point.
    Metric(PointArgs),
    /// Hyperplane sections and the Transon plane at a point.
    Transon(TransonArgs),
    /// Decide whether a parallel Darboux field exists over a grid.
    ParallelTest(GridArgs),
    /// List or write the bundled scenes.
    Examples(ExamplesArgs),
}

#[derive(Args)]
struct SceneArg {
    /// Scene file; bundled scene names are accepted as a fallback.
    #[arg(long)]
    scene: String,
}

#[derive(Args)]
struct PointArgs {
    #[command(flatten)]
    scene: SceneArg,
    /// Comma-separated parameter point.
    #[arg(long, allow_hyphen_values = true)]
    t: String,
    /// graph | blaschke | curve-adapted | scale:EXPR | conormal:a,b,.. | center:a,b,..
    #[arg(long, default_value = "graph")]
    gauge: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Obj,
    Ply,
    Json,
    Csv,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    scene: SceneArg,
    /// `lo:hi:count`, once per axis (for `envelope` the last axis is `u`).
    #[arg(long, required = true, allow_hyphen_values = true)]
    grid: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    scene: SceneArg,
    #[arg(long, allow_hyphen_values = true)]
    t: String,
    #[arg(long, allow_hyphen_values = true)]
    u: f64,
    /// Starting jet order.
    #[arg(long, default_value_t = 4)]
    order: usize,
}

#[derive(Args)]
struct CurveArgs {
    #[command(flatten)]
    scene: SceneArg,
    /// Base parameter of the adapted parameterization.
    #[arg(long, allow_hyphen_values = true, default_value = "0")]
    t: String,
    /// Parameter range `lo:hi:count`; a second `--grid` sets the `u` range
    /// of the tangent developable.
    #[arg(long, allow_hyphen_values = true)]
    grid: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct TransonArgs {
    #[command(flatten)]
    point: PointArgs,
    /// Comma-separated section parameters.
    #[arg(long, allow_hyphen_values = true, default_value = "-0.2,-0.1,0,0.1,0.2")]
    lambdas: String,
}

#[derive(Args)]
struct ExamplesArgs {
    #[arg(long)]
    list: bool,
    /// Directory to write every bundled scene file into.
    #[arg(long)]
    write: Option<PathBuf>,
}

/// Failure of a command: usage problems exit 2, geometry exits 3.
enum Failure {
    Usage(String),
    Math(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_degeneracy() {
            Failure::Math(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

type Outcome = Result<Value, Failure>;

struct Loaded {
    scene: Scene,
    digest: String,
}

fn load_scene(arg: &SceneArg) -> Result<Loaded, Failure> {
    let path = Path::new(&arg.scene);
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
            match scene::bundled(stem) {
                Some(b) if path.parent().map_or(true, |p| p.as_os_str().is_empty()) => b.source.to_string(),
                _ => return Err(Failure::Usage(format!("cannot read {}: {e}", arg.scene))),
            }
        }
    };
    let scene = Scene::parse_file(&text)?;
    Ok(Loaded {
        scene,
        digest: hex::encode(Sha256::digest(text.as_bytes())),
    })
}

fn parse_list(text: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Failure::Usage(format!("expected comma-separated numbers, got `{text}`")))
        })
        .collect()
}

fn parse_gauge(text: &str, scene: &Scene) -> Result<Gauge, Failure> {
    let (kind, rest) = text.split_once(':').unwrap_or((text, ""));
    Ok(match kind {
        "graph" => Gauge::Graph,
        "blaschke" => Gauge::Blaschke,
        "curve-adapted" => Gauge::CurveAdapted,
        "scale" => {
            let names: Vec<&str> = scene.names()[..scene.n()].iter().map(|s| s.as_str()).collect();
            Gauge::Scale(darboux::parse_expression(rest, &names)?)
        }
        "conormal" => Gauge::Conormal(parse_list(rest)?),
        "center" => Gauge::Center(parse_list(rest)?),
        _ => return Err(Failure::Usage(format!("unknown gauge `{text}`"))),
    })
}

fn axes(grid: &[String]) -> Result<Vec<Axis>, Failure> {
    grid.iter().map(|g| Axis::parse(g).map_err(Failure::from)).collect()
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn write_out(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn emit_mesh(mesh: &Mesh, out: Option<&Path>, format: Format) -> Result<Value, Failure> {
    let text = match format {
        Format::Obj => mesh.to_obj(),
        Format::Ply => mesh.to_ply(),
        Format::Csv => mesh.to_csv(),
        Format::Json => report::to_string(&to_value(mesh)),
    };
    let summary = json!({
        "vertices": mesh.vertices.len(),
        "faces": mesh.faces.len(),
        "singular_vertices": mesh.singular.iter().filter(|s| **s).count(),
        "diagnostics": mesh.diagnostics,
    });
    match out {
        Some(p) => {
            write_out(p, &text)?;
            Ok(json!({"mesh": summary, "out": p.display().to_string()}))
        }
        None if matches!(format, Format::Json) => Ok(json!({"mesh": summary, "data": to_value(mesh)})),
        None => Err(Failure::Usage("--out is required for obj, ply and csv output".into())),
    }
}

fn frame_cmd(a: &PointArgs, l: &Loaded) -> Outcome {
    let s = &l.scene;
    let t = parse_list(&a.t)?;
    let gauge = parse_gauge(&a.gauge, s)?;
    let det = frame::nondegeneracy(s, &t)?;
    let (point, coeffs) = frame::structure_coefficients(s, &t, &gauge)?;
    Ok(json!({
        "nondegeneracy": det,
        "frame": to_value(&point),
        "structure": to_value(&coeffs),
        "shape_operator": envelope::shape_operator(s, &t)?,
        "regression_values": envelope::regression_values(s, &t)?,
    }))
}

fn envelope_cmd(a: &GridArgs, l: &Loaded) -> Outcome {
    let mut ax = axes(&a.grid)?;
    if ax.len() != l.scene.n() + 1 {
        return Err(Failure::Usage(format!(
            "envelope needs {} grid axes (t then u), got {}",
            l.scene.n() + 1,
            ax.len()
        )));
    }
    let u = ax.pop().expect("checked length");
    let mesh = envelope::envelope_mesh(&l.scene, &ax, u)?;
    emit_mesh(&mesh, a.out.as_deref(), a.format)
}

fn classify_cmd(a: &ClassifyArgs, l: &Loaded) -> Outcome {
    let t = parse_list(&a.t)?;
    let r = singular::classify_envelope_point_from(&l.scene, &t, a.u, a.order)?;
    Ok(to_value(&r))
}

fn curve_cmd(a: &CurveArgs, l: &Loaded) -> Outcome {
    let t = parse_list(&a.t)?;
    if t.len() != 1 {
        return Err(Failure::Usage("curve takes a single --t".into()));
    }
    let c = CurveScene::new(l.scene.clone(), t[0])?;
    let ax = axes(&a.grid)?;
    let range = ax.first().copied().unwrap_or(Axis::new(t[0] - 0.2, t[0] + 0.2, 41));
    let adapted = curve::adapt_parameterization(&c, range.lo, range.hi, range.count)?;
    let table = curve::invariants_table(&c, &adapted)?;
    let verdict = curve::curve_singularity_report(&c, t[0])?;
    let mut out = json!({
        "adapted": to_value(&adapted),
        "invariants": to_value(&table),
        "regression": to_value(&verdict),
    });
    match (a.format, &a.out) {
        (Format::Csv, Some(p)) => {
            write_out(p, &curve::invariants_csv(&table))?;
            out["out"] = json!(p.display().to_string());
        }
        (Format::Obj | Format::Ply, Some(p)) => {
            let u = ax.get(1).copied().unwrap_or(Axis::new(-1.0, 1.0, 21));
            let mesh = curve::tangent_developable(&c, range, u)?;
            out["developable"] = emit_mesh(&mesh, Some(p), a.format)?;
        }
        (Format::Json, Some(p)) => {
            write_out(p, &report::to_string(&out))?;
        }
        (Format::Csv | Format::Obj | Format::Ply, None) => {
            return Err(Failure::Usage("--out is required for obj, ply and csv output".into()));
        }
        (Format::Json, None) => {}
    }
    Ok(out)
}

fn metric_cmd(a: &PointArgs, l: &Loaded) -> Outcome {
    let s = &l.scene;
    let t = parse_list(&a.t)?;
    let gauge = parse_gauge(&a.gauge, s)?;
    let b = metricbundle::metric_bundle(s, &t, &gauge)?;
    let dtau = metricbundle::normal_curvature(s, &t, &gauge)?;
    let mut diagnostics = b.warnings.clone();
    let compat = match metricbundle::blaschke_compatibility(s, &t, &gauge) {
        Ok(c) => to_value(&c),
        Err(e) => {
            diagnostics.push(format!("compatibility items unavailable: {e}"));
            Value::Null
        }
    };
    let small = |v: &[f64]| v.iter().all(|x| x.abs() < 1e-7);
    let verdicts = json!({
        "parallel": small(&b.tau),
        "equiaffine": small(&b.equiaffine_defect),
        "apolar": small(&b.apolarity_defect),
        "flat": dtau.iter().flatten().all(|x| x.abs() < 1e-7),
    });
    let mut v = to_value(&b);
    v["dtau"] = to_value(&dtau);
    v["verdicts"] = verdicts;
    v["compatibility"] = compat;
    v["warnings"] = to_value(&diagnostics);
    Ok(v)
}

fn transon_cmd(a: &TransonArgs, l: &Loaded) -> Outcome {
    let s = &l.scene;
    let t = parse_list(&a.point.t)?;
    let gauge = parse_gauge(&a.point.gauge, s)?;
    let lambdas = parse_list(&a.lambdas)?;
    Ok(to_value(&transon::transon_report(s, &t, &lambdas, &gauge)?))
}

fn parallel_cmd(a: &GridArgs, l: &Loaded) -> Outcome {
    let r = metricbundle::parallel_field_exists(&l.scene, &axes(&a.grid)?)?;
    let v = to_value(&r);
    if let Some(p) = &a.out {
        write_out(p, &report::to_string(&v))?;
    }
    Ok(v)
}

fn examples_cmd(a: &ExamplesArgs) -> Outcome {
    if !a.list && a.write.is_none() {
        return Err(Failure::Usage("examples needs --list or --write DIR".into()));
    }
    let list: Vec<Value> = BUNDLED
        .iter()
        .map(|b| {
            let comment = b.source.lines().next().unwrap_or("").trim_start_matches('#').trim();
            json!({"name": b.name, "u": b.u, "class": b.class, "description": comment})
        })
        .collect();
    let mut out = json!({"scenes": list});
    if let Some(dir) = &a.write {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", dir.display())))?;
        let mut written = Vec::new();
        for b in BUNDLED {
            let p = dir.join(format!("{}.scene", b.name));
            write_out(&p, b.source)?;
            written.push(p.display().to_string());
        }
        out["written"] = json!(written);
    }
    Ok(out)
}

fn scene_of(c: &Command) -> Option<&SceneArg> {
    match c {
        Command::Frame(a) | Command::Metric(a) => Some(&a.scene),
        Command::Envelope(a) | Command::ParallelTest(a) => Some(&a.scene),
        Command::Classify(a) => Some(&a.scene),
        Command::Curve(a) => Some(&a.scene),
        Command::Transon(a) => Some(&a.point.scene),
        Command::Examples(_) => None,
    }
}

fn name_of(c: &Command) -> &'static str {
    match c {
        Command::Frame(_) => "frame",
        Command::Envelope(_) => "envelope",
        Command::Classify(_) => "classify",
        Command::Curve(_) => "curve",
        Command::Metric(_) => "metric",
        Command::Transon(_) => "transon",
        Command::ParallelTest(_) => "parallel-test",
        Command::Examples(_) => "examples",
    }
}

fn run(cli: &Cli, params: Value) -> (Value, u8) {
    let start = Instant::now();
    let mut report = json!({
        "command": name_of(&cli.command),
        "parameters": params,
        "diagnostics": [],
        "results": null,
        "scene_digest": null,
    });
    let outcome = (|| -> Outcome {
        let loaded = match scene_of(&cli.command) {
            Some(arg) => {
                let l = load_scene(arg)?;
                report["scene_digest"] = json!(l.digest);
                Some(l)
            }
            None => None,
        };
        let l = loaded.as_ref();
        match &cli.command {
            Command::Frame(a) => frame_cmd(a, l.expect("scene loaded")),
            Command::Envelope(a) => envelope_cmd(a, l.expect("scene loaded")),
            Command::Classify(a) => classify_cmd(a, l.expect("scene loaded")),
            Command::Curve(a) => curve_cmd(a, l.expect("scene loaded")),
            Command::Metric(a) => metric_cmd(a, l.expect("scene loaded")),
            Command::Transon(a) => transon_cmd(a, l.expect("scene loaded")),
            Command::ParallelTest(a) => parallel_cmd(a, l.expect("scene loaded")),
            Command::Examples(a) => examples_cmd(a),
        }
    })();
    let code = match outcome {
        Ok(v) => {
            if let Some(d) = v.get("diagnostics").or_else(|| v.get("warnings")).and_then(|d| d.as_array()) {
                report["diagnostics"] = json!(d);
            }
            report["results"] = v;
            0
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            report["diagnostics"] = json!([m]);
            2
        }
        Err(Failure::Math(m)) => {
            eprintln!("degenerate: {m}");
            report["diagnostics"] = json!([m]);
            3
        }
    };
    if cli.timing {
        report["timing"] = json!({"elapsed_ms": start.elapsed().as_secs_f64() * 1e3});
    }
    (report, code)
}

/// Command-line arguments after the subcommand, for the report.
fn parameters() -> Value {
    let args: Vec<String> = std::env::args().skip(1).filter(|a| a != "--timing").collect();
    json!(args)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (report, code) = run(&cli, parameters());
    print!("{}", report::to_string(&report));
    ExitCode::from(code)
}
