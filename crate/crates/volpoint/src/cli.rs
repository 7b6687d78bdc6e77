//! The `volpoint` command line: one subcommand per pipeline stage.
//!
//! Every generative subcommand takes an explicit seed and produces
//! byte-identical outputs when re-run with the same configuration.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::datagen::{
    generate_dataset, DatasetEntry, DatasetManifest, GenerationConfig, TfSpec, VolumeSpec,
};
use crate::error::{Error, Result};
use crate::eval::{
    error_map, estimate_viewpoint, tolerance_accuracy, EstimatedViewpoint, DEFAULT_TOLERANCES,
};
use crate::imgio;
use crate::model::{
    self, category_training_set, class_targets, load_training_set, train, LossKind, NetworkSpec,
    Parameters, TrainConfig,
};
use crate::render::{
    render, Camera, LightingConfig, LightingMode, Projection, RenderedImage,
};
use crate::select::{
    select_viewpoint, viewing_map, DEFAULT_VOTING_RENDERS,
};
use crate::transfer::{self, ColorTF, OpacityTF};
use crate::viewsphere::{SphericalDirection, SpherePixelization, ViewpointLabel};
use crate::volume::{synth_volume, PhantomKind, VolumeGrid};

#[derive(Parser)]
#[command(
    name = "volpoint",
    version,
    about = "Viewpoint estimation for volume-rendered images: sphere pixelization, \
             raycasting, dataset generation, classifier training, evaluation and \
             viewpoint selection"
)]
struct Cli {
    /// Cap the worker-thread count (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Export the viewing-sphere pixel centers as CSV.
    Pixelize {
        #[arg(long)]
        nside: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a single image of a volume.
    Render(RenderArgs),
    /// Generate an annotated training dataset.
    GenDataset {
        /// JSON or key=value configuration file.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Root seed; overrides the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// key=value overrides applied after the config file.
        #[arg(long = "set")]
        overrides: Vec<String>,
    },
    /// Train the viewpoint classifier on a generated dataset.
    Train(TrainArgs),
    /// Train the category classifier from per-category manifests.
    TrainCategory(TrainCategoryArgs),
    /// Tolerance-accuracy report and error map for a trained model.
    Eval(EvalArgs),
    /// Accumulate predicted distributions of an image collection.
    ViewingMap(ViewingMapArgs),
    /// Similarity-voting viewpoint selection.
    Select(SelectArgs),
}

#[derive(Args)]
struct RenderArgs {
    /// `phantom:<kind>[:<dim>[:<seed>]]` or a header-format volume file.
    #[arg(long)]
    volume: String,
    /// `designed:<kind>` or a transfer-function file.
    #[arg(long)]
    tf: String,
    #[arg(long, default_value_t = 0.0)]
    az: f64,
    #[arg(long, default_value_t = 0.0)]
    el: f64,
    #[arg(long, default_value_t = 0.0)]
    tilt: f64,
    #[arg(long, default_value = "parallel")]
    projection: String,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value = "256x256")]
    size: String,
    #[arg(long, default_value_t = 45.0)]
    fov: f64,
    /// 1 = env only, 2 = env+headlight, 3 = env+headlight+scene.
    #[arg(long, default_value_t = 2)]
    light_mode: u8,
    #[arg(long, default_value_t = 0.9)]
    headlight: f64,
    #[arg(long, default_value_t = 0.4)]
    scene_intensity: f64,
    /// black, white or r,g,b in [0,1].
    #[arg(long, default_value = "black")]
    background: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    nside: u32,
    /// `gs` (geodesic soft labels) or `softmax`.
    #[arg(long, default_value = "gs")]
    loss: String,
    #[arg(long, default_value_t = 1)]
    gs_order: usize,
    /// Soft-target unit in degrees; by default the value that puts weight
    /// 0.36 on first-order neighbors of this pixelization.
    #[arg(long)]
    gs_unit: Option<f64>,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long)]
    seed: u64,
    /// Manifest evaluated for the per-epoch held-out accuracy.
    #[arg(long)]
    heldout_manifest: Option<PathBuf>,
    /// Training-log CSV path.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainCategoryArgs {
    /// Repeatable `name=manifest.jsonl` pairs, in label order.
    #[arg(long = "part", required = true)]
    parts: Vec<String>,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    log: Option<PathBuf>,
    /// Checkpoint output; category names go to `<out>.categories.txt`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    nside: u32,
    /// Compare predictions against the jittered `direction` (default) or
    /// the ground-truth label `center`.
    #[arg(long, default_value = "direction")]
    against: String,
    /// Report CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Optional error-map heatmap (PPM/PNG by extension).
    #[arg(long)]
    error_map: Option<PathBuf>,
    /// Optional error-map CSV.
    #[arg(long)]
    error_map_csv: Option<PathBuf>,
    #[arg(long, default_value_t = 5.0)]
    error_map_tolerance: f64,
}

#[derive(Args)]
struct ViewingMapArgs {
    /// Manifest whose images form the collection.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    nside: u32,
    /// Accumulated-probability CSV.
    #[arg(long)]
    out: PathBuf,
    /// Optional heatmap image.
    #[arg(long)]
    heatmap: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    volume: String,
    #[arg(long)]
    tf: String,
    /// Manifest whose images act as the collected set.
    #[arg(long)]
    collected: PathBuf,
    #[arg(long)]
    viewpoint_checkpoint: PathBuf,
    /// Feature extractor; defaults to the viewpoint network itself.
    #[arg(long)]
    extractor_checkpoint: Option<PathBuf>,
    #[arg(long)]
    nside: u32,
    #[arg(long, default_value_t = DEFAULT_VOTING_RENDERS)]
    renders_per_voter: usize,
    #[arg(long)]
    seed: u64,
    /// Diagnostics JSON; a CSV summary lands next to it.
    #[arg(long)]
    out: PathBuf,
}

/// Parse argv and run; returns the process exit status. Errors print to
/// standard error.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version as "errors" with exit code 0.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        // Ignore failure: the global pool can only be set once per process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Pixelize { nside, out } => {
            let p = SpherePixelization::new(nside)?;
            ensure_parent(&out)?;
            let mut buf = Vec::new();
            p.export_centers_csv(&mut buf)
                .map_err(|e| Error::io(out.display().to_string(), e))?;
            std::fs::write(&out, buf).map_err(|e| Error::io(out.display().to_string(), e))?;
            println!("wrote {} labels to {}", p.n_pixels(), out.display());
            Ok(())
        }
        Command::Render(args) => cmd_render(args),
        Command::GenDataset {
            config,
            out,
            seed,
            overrides,
        } => {
            let mut cfg = load_generation_config(&config)?;
            for kv in &overrides {
                apply_override(&mut cfg, kv)?;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let manifest = generate_dataset(&cfg, &out)?;
            println!(
                "generated {} samples into {}",
                manifest.samples.len(),
                out.display()
            );
            Ok(())
        }
        Command::Train(args) => cmd_train(args),
        Command::TrainCategory(args) => cmd_train_category(args),
        Command::Eval(args) => cmd_eval(args),
        Command::ViewingMap(args) => cmd_viewing_map(args),
        Command::Select(args) => cmd_select(args),
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
    }
    Ok(())
}

fn parse_volume_spec(s: &str) -> Result<VolumeGrid> {
    if let Some(rest) = s.strip_prefix("phantom:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let kind = PhantomKind::from_str(parts[0])?;
        let dim: usize = parts
            .get(1)
            .map(|d| d.parse().map_err(|_| bad_arg("phantom dim", d)))
            .transpose()?
            .unwrap_or(64);
        let seed: u64 = parts
            .get(2)
            .map(|d| d.parse().map_err(|_| bad_arg("phantom seed", d)))
            .transpose()?
            .unwrap_or(1);
        synth_volume(kind, (dim, dim, dim), seed)
    } else {
        VolumeGrid::load_with_header(Path::new(s))
    }
}

fn parse_tf_spec(s: &str) -> Result<(OpacityTF, ColorTF)> {
    if let Some(kind) = s.strip_prefix("designed:") {
        Ok(transfer::designed_tf(PhantomKind::from_str(kind)?))
    } else {
        transfer::load_tf_file(Path::new(s))
    }
}

fn bad_arg(what: &str, value: &str) -> Error {
    Error::InvalidArgument(format!("cannot parse {what}: {value}"))
}

fn parse_size(s: &str) -> Result<(usize, usize)> {
    let (w, h) = s
        .split_once('x')
        .ok_or_else(|| bad_arg("size (expected WxH)", s))?;
    Ok((
        w.parse().map_err(|_| bad_arg("width", w))?,
        h.parse().map_err(|_| bad_arg("height", h))?,
    ))
}

fn parse_background(s: &str) -> Result<[f64; 3]> {
    match s {
        "black" => Ok([0.0; 3]),
        "white" => Ok([1.0; 3]),
        other => {
            let vals: Vec<f64> = other
                .split(',')
                .map(|t| t.parse().map_err(|_| bad_arg("background", other)))
                .collect::<Result<_>>()?;
            if vals.len() != 3 {
                return Err(bad_arg("background", other));
            }
            Ok([vals[0], vals[1], vals[2]])
        }
    }
}

fn cmd_render(args: RenderArgs) -> Result<()> {
    let volume = parse_volume_spec(&args.volume)?;
    let (otf, ctf) = parse_tf_spec(&args.tf)?;
    let projection = match args.projection.as_str() {
        "parallel" => Projection::Parallel,
        "perspective" => Projection::Perspective,
        other => return Err(bad_arg("projection", other)),
    };
    let radius = volume.viewing_sphere_radius();
    let camera = Camera {
        direction: SphericalDirection::new(args.az, args.el)?,
        tilt_deg: args.tilt.rem_euclid(360.0),
        projection,
        scale: args.scale,
        image_size: parse_size(&args.size)?,
        fov_deg: args.fov,
        viewing_radius: radius,
    };
    let lighting = match args.light_mode {
        1 => LightingConfig::env_only(),
        2 => LightingConfig::headlight(args.headlight),
        3 => {
            let dir = SphericalDirection::new(45.0, 45.0)?.to_unit();
            let d = 4.0 * radius;
            LightingConfig {
                mode: LightingMode::EnvHeadlightScene,
                headlight_intensity: args.headlight,
                scene_intensity: args.scene_intensity,
                scene_position: [dir[0] * d, dir[1] * d, dir[2] * d],
                ..LightingConfig::env_only()
            }
        }
        other => return Err(bad_arg("light mode", &other.to_string())),
    };
    let background = parse_background(&args.background)?;
    let img = render(&volume, &otf, &ctf, &camera, &lighting, background)?;
    ensure_parent(&args.out)?;
    imgio::write_image(&args.out, &img)?;
    println!(
        "rendered {}x{} image to {}",
        img.width(),
        img.height(),
        args.out.display()
    );
    Ok(())
}

fn load_set(manifest_path: &Path, n_classes: usize) -> Result<(DatasetManifest, model::TrainingSet)> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let dir = manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let set = load_training_set(&manifest, &dir, n_classes)?;
    Ok((manifest, set))
}

fn spec_for_images(images: &[RenderedImage], n_outputs: usize) -> Result<NetworkSpec> {
    let first = images
        .first()
        .ok_or_else(|| Error::InvalidArgument("no images".into()))?;
    Ok(NetworkSpec::desk_scale(
        (first.height(), first.width()),
        n_outputs,
    ))
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let p = SpherePixelization::new(args.nside)?;
    let n = p.n_pixels();
    let (_, set) = load_set(&args.manifest, n)?;
    let heldout = args
        .heldout_manifest
        .as_deref()
        .map(|path| load_set(path, n).map(|(_, s)| s))
        .transpose()?;
    let loss = match args.loss.as_str() {
        "softmax" => LossKind::Softmax,
        "gs" => LossKind::Geodesic {
            order: args.gs_order,
            unit_deg: match args.gs_unit {
                Some(u) => u,
                None => p.unit_for_neighbor_weight(0.36)?,
            },
        },
        other => return Err(bad_arg("loss", other)),
    };
    let targets = class_targets(&loss, n, Some(&p))?;
    let spec = spec_for_images(&set.images, n)?;
    let cfg = TrainConfig {
        learning_rate: args.lr,
        momentum: args.momentum,
        batch_size: args.batch,
        epochs: args.epochs,
        loss,
        seed: args.seed,
    };
    let (params, log) = train(&set, &targets, &spec, &cfg, heldout.as_ref())?;
    ensure_parent(&args.out)?;
    params.save(&args.out)?;
    if let Some(log_path) = &args.log {
        ensure_parent(log_path)?;
        log.save_csv(log_path)?;
    }
    let last = log.epochs.last().expect("at least one epoch");
    println!(
        "trained {} epochs, final loss {:.4}{} -> {}",
        log.epochs.len(),
        last.mean_loss,
        match last.heldout_accuracy {
            Some(a) => format!(", held-out accuracy {a:.4}"),
            None => String::new(),
        },
        args.out.display()
    );
    Ok(())
}

fn cmd_train_category(args: TrainCategoryArgs) -> Result<()> {
    let mut loaded = Vec::new();
    for part in &args.parts {
        let (name, path) = part
            .split_once('=')
            .ok_or_else(|| bad_arg("part (expected name=manifest)", part))?;
        let manifest = DatasetManifest::load(Path::new(path))?;
        let dir = Path::new(path)
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        loaded.push((name.to_string(), manifest, dir));
    }
    let parts: Vec<(String, &DatasetManifest, &Path)> = loaded
        .iter()
        .map(|(n, m, d)| (n.clone(), m, d.as_path()))
        .collect();
    let (set, names) = category_training_set(&parts)?;
    let spec = spec_for_images(&set.images, names.len())?;
    let targets = class_targets(&LossKind::Softmax, names.len(), None)?;
    let cfg = TrainConfig {
        learning_rate: args.lr,
        momentum: 0.9,
        batch_size: args.batch,
        epochs: args.epochs,
        loss: LossKind::Softmax,
        seed: args.seed,
    };
    let (params, log) = train(&set, &targets, &spec, &cfg, None)?;
    ensure_parent(&args.out)?;
    params.save(&args.out)?;
    let names_path = args.out.with_extension("categories.txt");
    std::fs::write(&names_path, names.join("\n") + "\n")
        .map_err(|e| Error::io(names_path.display().to_string(), e))?;
    if let Some(log_path) = &args.log {
        log.save_csv(log_path)?;
    }
    println!(
        "trained category classifier over {:?} -> {}",
        names,
        args.out.display()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let p = SpherePixelization::new(args.nside)?;
    let params = Parameters::load(&args.checkpoint)?;
    if params.spec.n_outputs != p.n_pixels() {
        return Err(Error::ShapeMismatch(format!(
            "checkpoint has {} outputs, pixelization {} labels",
            params.spec.n_outputs,
            p.n_pixels()
        )));
    }
    let (manifest, set) = load_set(&args.manifest, p.n_pixels())?;
    let dists = model::predict_batch(&params, &set.images)?;
    let preds: Vec<EstimatedViewpoint> = dists
        .iter()
        .map(|d| estimate_viewpoint(d, &p))
        .collect::<Result<_>>()?;
    let gts: Vec<SphericalDirection> = match args.against.as_str() {
        "direction" => manifest.samples.iter().map(|s| s.true_direction).collect(),
        "center" => manifest
            .samples
            .iter()
            .map(|s| p.center_of(ViewpointLabel(s.label)))
            .collect::<Result<_>>()?,
        other => return Err(bad_arg("against", other)),
    };
    let report = tolerance_accuracy(&preds, &gts, &p, &DEFAULT_TOLERANCES)?;
    ensure_parent(&args.out)?;
    std::fs::write(&args.out, report.to_csv())
        .map_err(|e| Error::io(args.out.display().to_string(), e))?;
    for (t, a) in report.tolerances_deg.iter().zip(&report.accuracies) {
        println!("Acc-{t:.0}deg: {a:.4}");
    }
    if args.error_map.is_some() || args.error_map_csv.is_some() {
        let map = error_map(&preds, &gts, &p, args.error_map_tolerance)?;
        if let Some(path) = &args.error_map {
            ensure_parent(path)?;
            imgio::write_image(path, &map.to_heatmap(&p, 360, 180)?)?;
        }
        if let Some(path) = &args.error_map_csv {
            ensure_parent(path)?;
            std::fs::write(path, map.to_csv())
                .map_err(|e| Error::io(path.display().to_string(), e))?;
        }
    }
    Ok(())
}

fn cmd_viewing_map(args: ViewingMapArgs) -> Result<()> {
    let p = SpherePixelization::new(args.nside)?;
    let params = Parameters::load(&args.checkpoint)?;
    let (_, set) = load_set(&args.manifest, p.n_pixels())?;
    let dists = model::predict_batch(&params, &set.images)?;
    let map = viewing_map(&dists)?;
    ensure_parent(&args.out)?;
    std::fs::write(&args.out, map.to_csv())
        .map_err(|e| Error::io(args.out.display().to_string(), e))?;
    if let Some(path) = &args.heatmap {
        ensure_parent(path)?;
        imgio::write_image(path, &map.to_heatmap(&p, 360, 180)?)?;
    }
    println!(
        "viewing map over {} images -> {}",
        map.source_count,
        args.out.display()
    );
    Ok(())
}

fn cmd_select(args: SelectArgs) -> Result<()> {
    let p = SpherePixelization::new(args.nside)?;
    let volume = parse_volume_spec(&args.volume)?;
    let (otf, ctf) = parse_tf_spec(&args.tf)?;
    let viewpoint_net = Parameters::load(&args.viewpoint_checkpoint)?;
    let extractor = match &args.extractor_checkpoint {
        Some(path) => Parameters::load(path)?,
        None => viewpoint_net.clone(),
    };
    let (_, set) = load_set(&args.collected, p.n_pixels())?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let result = select_viewpoint(
        &volume,
        &otf,
        &ctf,
        &set.images,
        &viewpoint_net,
        &extractor,
        &p,
        args.renders_per_voter,
        &mut rng,
    )?;
    ensure_parent(&args.out)?;
    std::fs::write(&args.out, result.to_json())
        .map_err(|e| Error::io(args.out.display().to_string(), e))?;
    let csv_path = args.out.with_extension("summary.csv");
    std::fs::write(&csv_path, result.summary_csv())
        .map_err(|e| Error::io(csv_path.display().to_string(), e))?;
    let center = p.center_of(ViewpointLabel(result.optimal_label))?;
    println!(
        "optimal viewpoint: label {} (azimuth {:.2}, elevation {:.2})",
        result.optimal_label,
        center.azimuth_deg(),
        center.elevation_deg()
    );
    Ok(())
}

/// Load a generation config: JSON when the file starts with '{',
/// otherwise key=value lines.
pub fn load_generation_config(path: &Path) -> Result<GenerationConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    if text.trim_start().starts_with('{') {
        let cfg: GenerationConfig = serde_json::from_str(&text)
            .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
        cfg.validate()?;
        return Ok(cfg);
    }
    let mut cfg = GenerationConfig::desk_scale(Vec::new(), 0);
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::parse(
                format!("{} line {}", path.display(), lineno + 1),
                "expected key=value",
            )
        })?;
        apply_override(&mut cfg, &format!("{}={}", key.trim(), value.trim()))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Apply one `key=value` override to a generation config.
pub fn apply_override(cfg: &mut GenerationConfig, kv: &str) -> Result<()> {
    let (key, value) = kv
        .split_once('=')
        .ok_or_else(|| bad_arg("override (expected key=value)", kv))?;
    match key {
        "nside" => cfg.nside = value.parse().map_err(|_| bad_arg(key, value))?,
        "images_per_tf" => cfg.images_per_tf = value.parse().map_err(|_| bad_arg(key, value))?,
        "image_size" => cfg.image_size = parse_size(value)?,
        "tf_jitter_sigma" => {
            cfg.tf_jitter_sigma = value.parse().map_err(|_| bad_arg(key, value))?
        }
        "tf_variants" => cfg.tf_variants = value.parse().map_err(|_| bad_arg(key, value))?,
        "image_format" => cfg.image_format = value.to_string(),
        "seed" => cfg.seed = value.parse().map_err(|_| bad_arg(key, value))?,
        "label_subset" => {
            let labels: Vec<usize> = value
                .split(',')
                .map(|t| t.trim().parse().map_err(|_| bad_arg(key, value)))
                .collect::<Result<_>>()?;
            cfg.label_subset = Some(labels);
        }
        "lighting_modes" => {
            cfg.lighting_modes = value
                .split(',')
                .map(|t| t.trim().parse().map_err(|_| bad_arg(key, value)))
                .collect::<Result<_>>()?;
        }
        "projections" => {
            cfg.projections = value
                .split(',')
                .map(|t| match t.trim() {
                    "parallel" => Ok(Projection::Parallel),
                    "perspective" => Ok(Projection::Perspective),
                    other => Err(bad_arg(key, other)),
                })
                .collect::<Result<_>>()?;
        }
        "phantom" => {
            // phantom=<kind>[:<dim>[:<seed>]], entry with its designed TF.
            let parts: Vec<&str> = value.split(':').collect();
            let kind = PhantomKind::from_str(parts[0])?;
            let dim: usize = parts
                .get(1)
                .map(|d| d.parse().map_err(|_| bad_arg("phantom dim", d)))
                .transpose()?
                .unwrap_or(64);
            let seed: u64 = parts
                .get(2)
                .map(|d| d.parse().map_err(|_| bad_arg("phantom seed", d)))
                .transpose()?
                .unwrap_or(1);
            cfg.entries.push(DatasetEntry {
                volume: VolumeSpec::Phantom {
                    kind,
                    dims: (dim, dim, dim),
                    seed,
                },
                tf: TfSpec::Designed { kind },
                category: kind.name().to_string(),
            });
        }
        other => return Err(bad_arg("config key", other)),
    }
    Ok(())
}
