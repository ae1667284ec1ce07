use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use facefuse::meshkit::{load_mesh, save_mesh};
use facefuse::parallel;
use facefuse::patchwork::{segment, Segmentation, DEFAULT_PATCHES, DEFAULT_SIGMA};
use facefuse::photometrics::Camera;
use facefuse::pipeline::{self, stages, NormalSource, PipelineConfig, SceneKind};
use facefuse::poissonstitch::{DEFAULT_FRESNEL_THRESHOLD_DEG, DEFAULT_LAMBDA, DEFAULT_REFINE_ROUNDS};
use facefuse::synthstage::{LightMode, DEFAULT_HEAD_RESOLUTION};
use facefuse::{Error, Result};

#[derive(Parser)]
#[command(name = "facefuse", version, about = "Multi-pose photometric capture stitched onto a base mesh")]
struct Cli {
    /// Cap on worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic capture with ground truth and a ready config.
    Synth {
        #[arg(long, default_value = "head")]
        scene: SceneKind,
        #[arg(long, default_value = "continuous")]
        mode: LightMode,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_HEAD_RESOLUTION)]
        resolution: usize,
    },
    /// Align one view's gradient images and write them to a new view directory.
    Align {
        #[arg(long)]
        view: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        iterations: usize,
    },
    /// Estimate diffuse and specular normals and albedo inside a view directory.
    Normals {
        #[arg(long)]
        view: PathBuf,
    },
    /// Remove low-frequency bias against the base mesh and write world-space normals.
    Biascorrect {
        #[arg(long)]
        view: PathBuf,
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        sigma_low: Option<f64>,
    },
    /// Split the base mesh into overlapping patches.
    Segment {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PATCHES)]
        patches: usize,
        #[arg(long, default_value_t = DEFAULT_SIGMA)]
        overlap: f64,
        #[arg(long, default_value_t = 0)]
        seed: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stitch albedo and normals of bias-corrected views and refine the mesh.
    Stitch {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        segmentation: PathBuf,
        /// Bias-corrected view directory; repeat per view.
        #[arg(long = "view", required = true)]
        views: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_LAMBDA)]
        lambda: f64,
        #[arg(long, default_value = "specular")]
        normals: NormalSource,
        /// Screening weight of the refinement (default scales with the mesh).
        #[arg(long)]
        screen: Option<f64>,
        /// Cotangent-weight re-linearizations of the refinement.
        #[arg(long, default_value_t = DEFAULT_REFINE_ROUNDS)]
        rounds: usize,
        #[arg(long, default_value_t = DEFAULT_FRESNEL_THRESHOLD_DEG)]
        fresnel_threshold: f64,
        /// Also keep the textured mesh before refinement.
        #[arg(long)]
        textured: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Refine a stitched mesh towards its stored photometric normals.
    Refine {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long, default_value = "specular")]
        normals: NormalSource,
        #[arg(long)]
        screen: Option<f64>,
        /// Cotangent-weight re-linearizations of the refinement.
        #[arg(long, default_value_t = DEFAULT_REFINE_ROUNDS)]
        rounds: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a preview of a mesh seen from a camera file.
    Render {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        camera: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn print_json(value: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("summary serializes"));
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!("--{name} must be positive, got {v}")))
    }
}

#[derive(Serialize)]
struct StitchSummary<'a> {
    stitch: &'a stages::StitchOutcome,
    refine: &'a stages::RefineOutcome,
}

fn load_views(dirs: &[PathBuf]) -> Result<Vec<stages::ViewMaps>> {
    dirs.iter().map(|d| stages::ViewMaps::load(d)).collect()
}

fn check_refine(screen: Option<f64>, rounds: usize) -> Result<()> {
    if let Some(s) = screen {
        positive("screen", s)?;
    }
    if rounds < 1 {
        return Err(Error::Argument("--rounds must be at least 1".into()));
    }
    Ok(())
}

fn save_refined(mesh: &Path, normals: NormalSource, screen: Option<f64>, rounds: usize, out: &Path) -> Result<stages::RefineOutcome> {
    let textured = load_mesh(mesh)?;
    let targets = stages::targets_from_mesh(&textured, normals)?;
    let (refined, outcome) = stages::refine_views(&textured, &targets, screen, rounds)?;
    save_mesh(&refined, out)?;
    Ok(outcome)
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth {
            scene,
            mode,
            out,
            resolution,
        } => {
            if resolution < 16 {
                return Err(Error::Argument(format!("--resolution must be at least 16, got {resolution}")));
            }
            print_json(&pipeline::write_dataset(scene, mode, resolution, &out)?);
        }
        Command::Align { view, out, iterations } => {
            print_json(&stages::align_view(&view, &out, iterations)?);
        }
        Command::Normals { view } => {
            print_json(&stages::estimate_view_normals(&view)?);
        }
        Command::Biascorrect { view, mesh, sigma_low } => {
            if let Some(s) = sigma_low {
                positive("sigma-low", s)?;
            }
            let mesh = load_mesh(&mesh)?;
            print_json(&stages::bias_correct_view(&view, &mesh, sigma_low)?);
        }
        Command::Segment {
            mesh,
            patches,
            overlap,
            seed,
            out,
        } => {
            let mesh = load_mesh(&mesh)?;
            let seg = segment(&mesh, patches, overlap, seed)?;
            seg.save(&out)?;
            log::info!("{} patches over {} vertices", seg.num_patches(), seg.num_vertices());
        }
        Command::Stitch {
            mesh,
            segmentation,
            views,
            lambda,
            normals,
            screen,
            rounds,
            fresnel_threshold,
            textured,
            out,
        } => {
            positive("lambda", lambda)?;
            check_refine(screen, rounds)?;
            let base = load_mesh(&mesh)?;
            let seg = Segmentation::load(&segmentation)?;
            let stitched = stages::stitch_views(&base, &seg, &load_views(&views)?, lambda, fresnel_threshold)?;
            if let Some(t) = &textured {
                save_mesh(&stitched.mesh, t)?;
            }
            let targets = stages::targets_from_mesh(&stitched.mesh, normals)?;
            let (refined, refine) = stages::refine_views(&stitched.mesh, &targets, screen, rounds)?;
            save_mesh(&refined, &out)?;
            print_json(&StitchSummary {
                stitch: &stitched,
                refine: &refine,
            });
        }
        Command::Refine {
            mesh,
            normals,
            screen,
            rounds,
            out,
        } => {
            check_refine(screen, rounds)?;
            print_json(&save_refined(&mesh, normals, screen, rounds, &out)?);
        }
        Command::Render { mesh, camera, out } => {
            let mesh = load_mesh(&mesh)?;
            let cam = Camera::load(&camera)?;
            stages::render_view(&mesh, &cam, &out)?;
        }
        Command::Run { config } => {
            let cfg = PipelineConfig::load(&config).map_err(|e| match e {
                Error::Io { path, source } => Error::Config(format!("{}: {source}", path.display())),
                other => other,
            })?;
            let summary = pipeline::run_pipeline(&cfg)?;
            for (stage, secs) in &summary.timings {
                log::info!("{stage}: {secs:.3} s");
            }
            println!("{}", cfg.output.join(pipeline::REPORT_FILE).display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match parallel::with_threads(cli.threads, || execute(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
