use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use floorloc::error::{EvalError, FilterError, LogError, MapError, SemanticsError, SensorError, SimError};
use floorloc::eval::{
    aggregate, estimates_from_ndjson, estimates_to_ndjson, evaluate, render_frame, replay_into, LabeledRun,
    RunConfig,
};
use floorloc::mcl::{Filter, FilterMaps, Mode, ParticleSet};
use floorloc::semantics::{stability_scores, RoomClassifier, TrainingRow};
use floorloc::sensorlog::SensorLog;
use floorloc::simulate::{generate_training_rows, simulate_run, SimWorld};
use floorloc::worldmap::{
    compute_distance_field, load_occupancy_grid, load_semantic_map, GridMetadata, OccupancyGrid,
    SemanticWorldMap, VisibilityIndex,
};
use serde_json::json;

#[derive(Parser)]
#[command(name = "floorloc", version, about = "Semantic particle-filter localization on floor plans")]
struct Cli {
    /// Run configuration (JSON). Every section is optional.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured world and trajectory into a sensor log.
    Simulate {
        /// Output sensor log (NDJSON).
        log: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write grid.png, grid.json, map.json and training.json here.
        #[arg(long)]
        map_dir: Option<PathBuf>,
    },
    /// Build the semantic visibility index and write it as a cache file.
    BuildIndex {
        #[command(flatten)]
        maps: MapArgs,
        output: PathBuf,
    },
    /// Replay a sensor log through the filter.
    Localize {
        log: PathBuf,
        #[command(flatten)]
        maps: MapArgs,
        /// Output pose estimates (NDJSON).
        output: PathBuf,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        particles: Option<usize>,
        /// Filter seed; defaults to the seed in the log header.
        #[arg(long)]
        seed: Option<u64>,
        /// Visibility index cache, built on first use.
        #[arg(long)]
        index: Option<PathBuf>,
        /// Labeled feature vectors for the room classifier (JSON array).
        #[arg(long)]
        training: Option<PathBuf>,
        /// Write a rendered frame per filter update into this directory.
        #[arg(long)]
        frames: Option<PathBuf>,
        /// Render every n-th update only.
        #[arg(long, default_value_t = 1)]
        frame_every: usize,
    },
    /// Score estimate files against the ground truth in their logs.
    Eval {
        /// Alternating estimates and log paths: EST LOG [EST LOG ...].
        #[arg(required = true, num_args = 2..)]
        runs: Vec<PathBuf>,
        /// Write the report JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also print the fixed-width table to stderr.
        #[arg(long)]
        table: bool,
    },
    /// Per-class consistency of detections with the semantic map.
    Stability {
        log: PathBuf,
        #[command(flatten)]
        maps: MapArgs,
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        table: bool,
    },
    /// Check a semantic map and optionally render it over a grid.
    ValidateMap {
        map: PathBuf,
        /// Grid metadata; objects are checked against its extent.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Preview image path (needs --grid).
        #[arg(long, requires = "grid")]
        preview: Option<PathBuf>,
    },
}

#[derive(Args)]
struct MapArgs {
    /// Grid metadata JSON; its `image` field names the grid image.
    grid: PathBuf,
    /// Semantic map JSON.
    map: PathBuf,
}

impl MapArgs {
    fn load(&self) -> anyhow::Result<(OccupancyGrid, SemanticWorldMap)> {
        Ok((load_grid(&self.grid)?, load_semantic_map(&self.map)?))
    }
}

fn load_grid(metadata: &Path) -> anyhow::Result<OccupancyGrid> {
    let text = std::fs::read_to_string(metadata).with_context(|| format!("reading {}", metadata.display()))?;
    let meta: GridMetadata = serde_json::from_str(&text).map_err(MapError::from)?;
    let image = meta
        .image
        .as_deref()
        .with_context(|| format!("{} names no image", metadata.display()))?;
    let dir = metadata.parent().unwrap_or(Path::new("."));
    Ok(load_occupancy_grid(&dir.join(image), metadata)?)
}

fn load_index(
    grid: &OccupancyGrid,
    map: &SemanticWorldMap,
    config: &RunConfig,
    cache: Option<&Path>,
) -> anyhow::Result<VisibilityIndex> {
    Ok(match cache {
        Some(path) => VisibilityIndex::load_or_build(grid, map, config.angular_resolution, path)?.0,
        None => VisibilityIndex::build(grid, map, config.angular_resolution)?,
    })
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn print_json(value: &serde_json::Value) {
    emit(&(serde_json::to_string_pretty(value).expect("json value") + "\n"));
}

fn simulate(config: &RunConfig, log_path: &Path, seed: Option<u64>, map_dir: Option<&Path>) -> anyhow::Result<()> {
    let world = SimWorld::new(config.world.clone())?;
    let seed = seed.or(config.seeds.first().copied()).unwrap_or(0);
    let log = simulate_run(&world, &config.trajectory, &config.noise, &config.rig, &config.agents, seed)?;
    log.save(log_path)?;
    if let Some(dir) = map_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        world.grid().save(&dir.join("grid.png"), &dir.join("grid.json"))?;
        write(&dir.join("map.json"), &world.map().to_json())?;
        let t = &config.training;
        let rows = generate_training_rows(
            &world,
            &config.rig,
            &config.noise,
            t.samples_per_room,
            t.window,
            config.filter.tau_conf,
            t.seed,
        )?;
        write(&dir.join("training.json"), &serde_json::to_string_pretty(&rows)?)?;
    }
    print_json(&json!({
        "log": log_path,
        "seed": seed,
        "records": log.records.len(),
        "duration": log.records.last().map_or(0.0, |r| r.timestamp()),
    }));
    Ok(())
}

struct LocalizeArgs<'a> {
    log: &'a Path,
    maps: &'a MapArgs,
    output: &'a Path,
    mode: Option<Mode>,
    particles: Option<usize>,
    seed: Option<u64>,
    index: Option<&'a Path>,
    training: Option<&'a Path>,
    frames: Option<&'a Path>,
    frame_every: usize,
}

fn localize(config: &RunConfig, a: LocalizeArgs<'_>) -> anyhow::Result<()> {
    let mut filter_config = config.filter.clone();
    if let Some(mode) = a.mode {
        filter_config.mode = mode;
    }
    if let Some(n) = a.particles {
        filter_config.particles = n;
    }
    let log = SensorLog::load(a.log)?;
    let (grid, map) = a.maps.load()?;
    let field = compute_distance_field(&grid, filter_config.r_max)?;
    let index = load_index(&grid, &map, config, a.index)?;
    let classifier = match a.training {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let rows: Vec<TrainingRow> = serde_json::from_str(&text)?;
            Some(RoomClassifier::from_rows(&rows, map.class_vocabulary(), filter_config.knn_k)?)
        }
        None => None,
    };
    let maps = FilterMaps {
        grid: &grid,
        field: &field,
        map: &map,
        index: &index,
        classifier: classifier.as_ref(),
    };
    floorloc::eval::check_hashes(&log, &maps)?;
    let seed = a.seed.unwrap_or(log.header.seed);
    let mut filter = Filter::new(filter_config, maps, seed)?;
    if let Some(dir) = a.frames {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let truth = log.ground_truth();
    let every = a.frame_every.max(1);
    let mut updates = 0usize;
    let mut frame_error = None;
    let estimates = replay_into(&mut filter, &log, |f, est| {
        let Some(dir) = a.frames else { return };
        if frame_error.is_some() || updates % every != 0 {
            updates += 1;
            return;
        }
        let path = dir.join(format!("{updates:06}.png"));
        let img = render_frame(&grid, &map, f.particles(), Some(&est.pose), truth.interpolate(est.timestamp).as_ref());
        if let Err(e) = img.save(&path) {
            frame_error = Some(anyhow::anyhow!("writing {}: {e}", path.display()));
        }
        updates += 1;
    })?;
    if let Some(e) = frame_error {
        return Err(e);
    }
    write(a.output, &estimates_to_ndjson(&estimates))?;
    print_json(&json!({
        "estimates": estimates.len(),
        "seed": seed,
        "stats": filter.stats(),
    }));
    Ok(())
}

fn eval(config: &RunConfig, runs: &[PathBuf], out: Option<&Path>, table: bool) -> anyhow::Result<()> {
    if runs.len() % 2 != 0 {
        bail!(floorloc::Error::Config("eval takes estimate/log path pairs".into()));
    }
    let mut labeled = Vec::new();
    for pair in runs.chunks(2) {
        let text = std::fs::read_to_string(&pair[0]).with_context(|| format!("reading {}", pair[0].display()))?;
        let estimates = estimates_from_ndjson(&text)?;
        let log = SensorLog::load(&pair[1])?;
        let result = evaluate(&estimates, &log.ground_truth(), &config.criteria)?;
        let label = pair[0]
            .file_stem()
            .map_or_else(|| pair[0].display().to_string(), |s| s.to_string_lossy().into_owned());
        labeled.push(LabeledRun {
            label,
            seed: log.header.seed,
            result,
        });
    }
    let report = aggregate(labeled);
    let text = serde_json::to_string_pretty(&report)? + "\n";
    match out {
        Some(path) => write(path, &text)?,
        None => emit(&text),
    }
    if table {
        eprint!("{}", report.to_table());
    }
    Ok(())
}

fn stability(config: &RunConfig, log: &Path, maps: &MapArgs, index: Option<&Path>, table: bool) -> anyhow::Result<()> {
    let log = SensorLog::load(log)?;
    let (grid, map) = maps.load()?;
    let index = load_index(&grid, &map, config, index)?;
    let report = stability_scores(&log, &index, config.filter.tau_s, config.filter.tau_conf)?;
    emit(&(serde_json::to_string_pretty(&report)? + "\n"));
    if table {
        eprint!("{}", report.to_table());
    }
    Ok(())
}

fn validate_map(map_path: &Path, grid: Option<&Path>, preview: Option<&Path>) -> anyhow::Result<()> {
    let map = load_semantic_map(map_path)?;
    let mut outside = Vec::new();
    if let Some(meta) = grid {
        let grid = load_grid(meta)?;
        let (x0, y0, x1, y1) = grid.bounds();
        for o in map.objects() {
            let r = o.rect;
            if r.max_x() < x0 || r.min_x() > x1 || r.max_y() < y0 || r.min_y() > y1 {
                outside.push(o.class_label.clone());
            }
        }
        if let Some(path) = preview {
            let img = render_frame(&grid, &map, &ParticleSet::default(), None, None);
            img.save(path).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    if !outside.is_empty() {
        bail!(MapError::ObjectsOutsideGrid(outside.join(", ")));
    }
    print_json(&json!({
        "valid": true,
        "objects": map.objects().len(),
        "rooms": map.rooms().len(),
        "classes": map.class_vocabulary(),
    }));
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match &cli.command {
        Command::Simulate { log, seed, map_dir } => simulate(&config, log, *seed, map_dir.as_deref()),
        Command::BuildIndex { maps, output } => {
            let (grid, map) = maps.load()?;
            let key = VisibilityIndex::cache_key(&grid, &map, config.angular_resolution);
            let index = VisibilityIndex::build(&grid, &map, config.angular_resolution)?;
            index.save(output, &key)?;
            print_json(&json!({
                "index": output,
                "key": key,
                "entries": index.entry_count(),
                "bins": index.n_bins(),
            }));
            Ok(())
        }
        Command::Localize {
            log,
            maps,
            output,
            mode,
            particles,
            seed,
            index,
            training,
            frames,
            frame_every,
        } => localize(
            &config,
            LocalizeArgs {
                log,
                maps,
                output,
                mode: *mode,
                particles: *particles,
                seed: *seed,
                index: index.as_deref(),
                training: training.as_deref(),
                frames: frames.as_deref(),
                frame_every: *frame_every,
            },
        ),
        Command::Eval { runs, out, table } => eval(&config, runs, out.as_deref(), *table),
        Command::Stability { log, maps, index, table } => stability(&config, log, maps, index.as_deref(), *table),
        Command::ValidateMap { map, grid, preview } => validate_map(map, grid.as_deref(), preview.as_deref()),
    }
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    for cause in e.chain() {
        if let Some(e) = cause.downcast_ref::<floorloc::Error>() {
            return match e {
                floorloc::Error::Map(_) => "map",
                floorloc::Error::Sensor(_) => "sensor",
                floorloc::Error::Filter(_) => "filter",
                floorloc::Error::Semantics(_) => "semantics",
                floorloc::Error::Sim(_) => "simulation",
                floorloc::Error::Log(_) => "log",
                floorloc::Error::Eval(_) => "eval",
                floorloc::Error::Config(_) | floorloc::Error::Json(_) => "config",
                floorloc::Error::Io { .. } => "io",
            };
        }
        let kind = if cause.is::<MapError>() {
            "map"
        } else if cause.is::<SensorError>() {
            "sensor"
        } else if cause.is::<FilterError>() {
            "filter"
        } else if cause.is::<SemanticsError>() {
            "semantics"
        } else if cause.is::<SimError>() {
            "simulation"
        } else if cause.is::<LogError>() {
            "log"
        } else if cause.is::<EvalError>() {
            "eval"
        } else if cause.is::<serde_json::Error>() {
            "config"
        } else if cause.is::<std::io::Error>() {
            "io"
        } else {
            continue;
        };
        return kind;
    }
    "other"
}

fn report_error(kind: &str, message: String) {
    eprintln!("{}", json!({ "error": { "kind": kind, "message": message } }));
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report_error("usage", e.to_string().trim_end().to_string());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(error_kind(&e), format!("{e:#}"));
            ExitCode::FAILURE
        }
    }
}
