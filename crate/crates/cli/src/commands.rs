//! Command-line surface: `gen`, `estimate`, `select`, `eval` and `serve`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crossel_core::field::{load_cloud, load_field, save_cloud, save_field, CloudFormat, KdeParams};
use crossel_core::pipeline::{estimate_field, EstimateOptions, SelectOptions, Workspace, DEFAULT_PADDING};
use crossel_core::selection::SelectionJson;
use crossel_core::synth::{
    gen_clusters, gen_filaments, gen_scripted_trace, gen_shell, load_labels, place_under_surface, score_labels,
    LabeledCloud, Placement, TraceKind,
};
use crossel_core::traces::{parse_trace, DEFAULT_SURFACE_EPS};
use crossel_core::{Scene, SelectionResult, Technique};

use crate::config::{pick, require, RunConfig};
use crate::error::{CliError, CliResult};
use crate::service::{self, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "crossel", version, about = "Density-aware selection across a touch surface and the space above it")]
pub struct Cli {
    /// JSON file supplying defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labelled synthetic point cloud.
    Gen(GenArgs),
    /// Estimate the density field of a cloud.
    Estimate(EstimateArgs),
    /// Run a selection technique on a recorded trace.
    Select(SelectArgs),
    /// Score a selection against ground-truth labels.
    Eval(EvalArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// clusters, filaments or shell.
    #[arg(long)]
    pub kind: Option<String>,
    /// Number of clusters or filaments.
    #[arg(long)]
    pub k: Option<usize>,
    /// Points per cluster or filament, or shell points.
    #[arg(long)]
    pub n: Option<usize>,
    /// Plummer scale radius, or shell radius.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Minimum distance between cluster centers.
    #[arg(long)]
    pub separation: Option<f64>,
    /// Filament or shell thickness.
    #[arg(long)]
    pub thickness: Option<f64>,
    /// Shell interferer count.
    #[arg(long)]
    pub noise: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Place the data under this scene's surface.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Fraction of the shorter surface side spanned by the data.
    #[arg(long)]
    pub fill: Option<f64>,
    /// Height of the data's top above the surface, negative below.
    #[arg(long, allow_hyphen_values = true)]
    pub top: Option<f64>,
    /// Also write a scripted trace: lasso_around_cluster,
    /// brush_along_filament or mixed_cross_space.
    #[arg(long)]
    pub trace_kind: Option<String>,
    /// Label the scripted trace aims at.
    #[arg(long)]
    pub target: Option<u32>,
    #[arg(long)]
    pub trace_seed: Option<u64>,
    /// Output directory.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub cloud: Option<PathBuf>,
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Nodes per axis.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Box padding as a fraction of the data diagonal.
    #[arg(long)]
    pub padding: Option<f64>,
    /// Bandwidth sensitivity exponent.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Pilot bandwidth; defaults to twice the mean nearest-neighbour distance.
    #[arg(long)]
    pub pilot_bandwidth: Option<f64>,
    /// Field file to write.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub field: Option<PathBuf>,
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Cloud the field was estimated from; needed for point indices.
    #[arg(long)]
    pub cloud: Option<PathBuf>,
    #[arg(long, value_parser = parse_technique)]
    pub technique: Option<Technique>,
    /// Brush radius in meters.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Surface contact tolerance in meters.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Selection JSON to write.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Mesh OBJ to write; defaults to the output path with `.obj`.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub selection: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Ground-truth label; defaults to 1.
    #[arg(long)]
    pub label: Option<u32>,
    /// Metrics JSON to write.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub host: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
    /// Idle seconds before a session is dropped.
    #[arg(long)]
    pub ttl_secs: Option<u64>,
    /// Density fields kept in the cache.
    #[arg(long)]
    pub cache_entries: Option<usize>,
    /// Origin allowed by CORS; any origin when absent.
    #[arg(long)]
    pub ui_origin: Option<String>,
}

fn parse_technique(s: &str) -> Result<Technique, String> {
    Technique::parse(s).ok_or_else(|| format!("unknown technique `{s}`; expected brush, brush-wyp, brush-lasso or cloud-lasso"))
}

fn parse_trace_kind(s: &str) -> CliResult<TraceKind> {
    match s {
        "lasso_around_cluster" => Ok(TraceKind::LassoAroundCluster),
        "brush_along_filament" => Ok(TraceKind::BrushAlongFilament),
        "mixed_cross_space" => Ok(TraceKind::MixedCrossSpace),
        other => Err(CliError::usage(format!("unknown trace kind `{other}`"))),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.status.code()
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Gen(a) => cmd_gen(&a, &cfg),
        Command::Estimate(a) => cmd_estimate(&a, &cfg),
        Command::Select(a) => cmd_select(&a, &cfg),
        Command::Eval(a) => cmd_eval(&a, &cfg),
        Command::Serve(a) => cmd_serve(&a, &cfg),
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::write(path, e))
}

pub fn load_scene(path: &Path) -> CliResult<Scene> {
    let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(Scene::from_json(&text)?)
}

pub fn cmd_gen(a: &GenArgs, cfg: &RunConfig) -> CliResult<()> {
    let kind = pick(&a.kind, &cfg.kind).unwrap_or_else(|| "clusters".into());
    let seed = pick(&a.seed, &cfg.seed).unwrap_or(0);
    let out = require(&a.output, &cfg.output, "output")?;
    let k = pick(&a.k, &cfg.k);
    let n = pick(&a.n, &cfg.n).unwrap_or(5000);
    let thickness = pick(&a.thickness, &cfg.thickness);
    let mut data: LabeledCloud = match kind.as_str() {
        "clusters" => {
            let scale = pick(&a.scale, &cfg.scale).unwrap_or(1.0);
            let sep = pick(&a.separation, &cfg.separation).unwrap_or(6.0 * scale);
            gen_clusters(k.unwrap_or(2), n, scale, sep, seed)?
        }
        "filaments" => gen_filaments(k.unwrap_or(1), n, thickness.unwrap_or(0.01), seed)?,
        "shell" => {
            let radius = pick(&a.scale, &cfg.scale).unwrap_or(1.0);
            let noise = pick(&a.noise, &cfg.noise).unwrap_or(0);
            gen_shell(n, radius, thickness.unwrap_or(0.1 * radius), noise, seed)?
        }
        other => return Err(CliError::usage(format!("unknown kind `{other}`; expected clusters, filaments or shell"))),
    };

    let scene = pick(&a.scene, &cfg.scene).map(|p| load_scene(&p)).transpose()?;
    if let Some(scene) = &scene {
        let defaults = Placement::default();
        let placement = Placement {
            fill: pick(&a.fill, &cfg.fill).unwrap_or(defaults.fill),
            top: pick(&a.top, &cfg.top).unwrap_or(defaults.top),
        };
        data = place_under_surface(&data, &scene.surface, placement)?;
    }
    let trace = match pick(&a.trace_kind, &cfg.trace_kind) {
        Some(name) => {
            let scene = scene.as_ref().ok_or_else(|| CliError::usage("--trace-kind needs --scene"))?;
            let target = pick(&a.target, &cfg.target).unwrap_or(1);
            let trace_seed = pick(&a.trace_seed, &cfg.trace_seed).unwrap_or(seed);
            Some(gen_scripted_trace(parse_trace_kind(&name)?, &data, &scene.surface, &scene.head, target, trace_seed)?)
        }
        None => None,
    };

    fs::create_dir_all(&out).map_err(|e| CliError::write(&out, e))?;
    let cloud_path = out.join("cloud.csv");
    save_cloud(&cloud_path, &data.cloud, Some(CloudFormat::Csv)).map_err(|e| CliError::write(&cloud_path, e))?;
    write(&out.join("labels.csv"), data.labels_csv())?;
    if !data.spines.is_empty() {
        write(&out.join("spines.json"), data.spines_json() + "\n")?;
    }
    if let Some(trace) = &trace {
        write(&out.join("trace.json"), trace.to_json() + "\n")?;
    }

    println!("{}: {} points, seed {seed}", data.description, data.cloud.len());
    for label in data.label_set() {
        let count = data.labels.iter().filter(|&&l| l == label).count();
        println!("  label {label}: {count}");
    }
    if let Some(trace) = &trace {
        println!("  trace: {} samples", trace.samples.len());
    }
    Ok(())
}

pub fn estimate_options(a: &EstimateArgs, cfg: &RunConfig) -> EstimateOptions {
    let defaults = EstimateOptions::default();
    EstimateOptions {
        resolution: pick(&a.grid, &cfg.grid).unwrap_or(defaults.resolution),
        padding: pick(&a.padding, &cfg.padding).unwrap_or(DEFAULT_PADDING),
        kde: KdeParams {
            alpha: pick(&a.alpha, &cfg.alpha).unwrap_or(defaults.kde.alpha),
            pilot_bandwidth: pick(&a.pilot_bandwidth, &cfg.pilot_bandwidth),
        },
    }
}

pub fn cmd_estimate(a: &EstimateArgs, cfg: &RunConfig) -> CliResult<()> {
    let cloud = load_cloud(require(&a.cloud, &cfg.cloud, "cloud")?, None)?;
    let scene = load_scene(&require(&a.scene, &cfg.scene, "scene")?)?;
    let out = require(&a.output, &cfg.output, "output")?;
    let options = estimate_options(a, cfg);
    let field = estimate_field(&cloud, &scene, &options)?;
    save_field(&out, &field).map_err(|e| CliError::write(&out, e))?;
    let r = field.grid.resolution;
    println!("grid {}x{}x{}, {} points", r[0], r[1], r[2], cloud.len());
    println!("mass {:.6}", field.integrate_mass());
    println!("density min {:.6e} max {:.6e}", field.min_value(), field.max_value());
    Ok(())
}

/// Pretty selection JSON, as written by `select` and echoed by the service.
pub fn selection_document(json: &SelectionJson) -> String {
    serde_json::to_string_pretty(json).expect("selection serializes") + "\n"
}

pub fn cmd_select(a: &SelectArgs, cfg: &RunConfig) -> CliResult<()> {
    let field = load_field(require(&a.field, &cfg.field, "field")?)?;
    let scene = load_scene(&require(&a.scene, &cfg.scene, "scene")?)?;
    let trace_path = require(&a.trace, &cfg.trace, "trace")?;
    let text = fs::read_to_string(&trace_path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", trace_path.display())))?;
    let trace = parse_trace(&text)?;
    let cloud = pick(&a.cloud, &cfg.cloud).map(|p| load_cloud(p, None)).transpose()?;
    let technique = require(&a.technique, &cfg.technique, "technique")?;
    let out = require(&a.output, &cfg.output, "output")?;
    let mesh_path = pick(&a.mesh, &cfg.mesh).unwrap_or_else(|| out.with_extension("obj"));

    let ws = Workspace::new(scene, field, cloud.as_ref())?;
    let options = SelectOptions {
        technique,
        radius: pick(&a.radius, &cfg.radius),
        eps: pick(&a.eps, &cfg.eps).unwrap_or(DEFAULT_SURFACE_EPS),
    };
    let result: SelectionResult = ws.select(&trace, &options)?;
    write(&out, selection_document(&result.to_json()))?;
    write(&mesh_path, ws.world_mesh(&result.mesh).to_obj())?;

    match result.rho0 {
        Some(rho0) => println!("rho0 {rho0:.6e}"),
        None => println!("rho0 none"),
    }
    println!("N_VCR {} nodes, V {} nodes", result.region_count(), result.node_count());
    println!("{} points, {} triangles", result.points.len(), result.mesh.triangles.len());
    Ok(())
}

pub fn cmd_eval(a: &EvalArgs, cfg: &RunConfig) -> CliResult<()> {
    let sel_path = require(&a.selection, &cfg.selection, "selection")?;
    let text = fs::read_to_string(&sel_path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", sel_path.display())))?;
    let selection: SelectionJson =
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("bad selection {}: {e}", sel_path.display())))?;
    let labels = load_labels(require(&a.labels, &cfg.labels, "labels")?)?;
    let label = pick(&a.label, &cfg.label).unwrap_or(1);
    let metrics = score_labels(&selection.selected_points, label, &labels)?;
    let doc = serde_json::to_string_pretty(&metrics).expect("metrics serialize") + "\n";
    if let Some(out) = pick(&a.output, &cfg.output) {
        write(&out, &doc)?;
    }
    print!("{doc}");
    Ok(())
}

pub fn cmd_serve(a: &ServeArgs, cfg: &RunConfig) -> CliResult<()> {
    let defaults = ServiceConfig::default();
    let config = ServiceConfig {
        ttl: pick(&a.ttl_secs, &cfg.ttl_secs).map(Duration::from_secs).unwrap_or(defaults.ttl),
        cache_entries: pick(&a.cache_entries, &cfg.cache_entries).unwrap_or(defaults.cache_entries),
        ui_origin: pick(&a.ui_origin, &cfg.ui_origin),
    };
    let host = pick(&a.host, &cfg.host).unwrap_or_else(|| "127.0.0.1".into());
    let port = pick(&a.port, &cfg.port).unwrap_or(8080);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::environment(format!("runtime: {e}")))?;
    runtime.block_on(service::serve(&host, port, config))
}
