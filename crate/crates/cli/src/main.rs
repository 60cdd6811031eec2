//! `gsgi`: renders scene files, runs the tracer verification suite and
//! launches the HTTP service.

mod assets;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use gsgi_core::io::{frame_path, load_scene, AssetCache, write_images, write_pfm, write_ppm, SceneDescription};
use gsgi_core::pipeline::to_ldr;
use gsgi_core::session::Session;
use gsgi_core::verify::{run_oracle_suite, OracleOptions};

/// Environment variable that caps the number of worker threads.
const THREADS_ENV: &str = "GSGI_THREADS";

#[derive(Debug, Parser)]
#[command(name = "gsgi", version, about = "Global illumination renderer for Gaussian and mesh scenes")]
#[command(args_conflicts_with_subcommands = true, subcommand_negates_reqs = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// Scene description file (TOML).
    #[arg(required = true)]
    scene: Option<PathBuf>,

    /// Output path prefix; files are named `{prefix}_{frame:04}.pfm/.ppm`.
    #[arg(short, long, value_name = "PREFIX")]
    output: Option<String>,

    /// Number of frames to render.
    #[arg(short = 'n', long)]
    frames: Option<usize>,

    /// Master random seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Resolution override, e.g. `320x240`.
    #[arg(long, value_name = "WxH", value_parser = parse_resolution)]
    resolution: Option<[usize; 2]>,

    #[arg(long)]
    no_direct: bool,
    #[arg(long)]
    no_indirect: bool,
    #[arg(long)]
    no_glossy: bool,
    #[arg(long)]
    no_emission: bool,

    /// Disable reuse of the previous frame's film at visible hits.
    #[arg(long)]
    no_film_reuse: bool,

    /// Bias scale in (0, 1] applied to stochastic acceptance draws.
    #[arg(long, value_name = "S")]
    bias_scale: Option<f64>,

    /// Also write the emission, direct, indirect and glossy layers.
    #[arg(long)]
    decompose: bool,

    /// Write every frame instead of only the last.
    #[arg(long)]
    all_frames: bool,

    /// Run the tracer verification suite on the scene instead of rendering.
    #[arg(long)]
    oracle: bool,

    /// Stochastic traces per ray in oracle mode.
    #[arg(long, value_name = "N", requires = "oracle")]
    oracle_trials: Option<usize>,

    /// Serve the HTTP API on this address instead of rendering.
    #[arg(long, value_name = "ADDR")]
    serve: Option<SocketAddr>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the bundled scenes and golden image.
    MakeAssets {
        /// Target directory.
        #[arg(default_value = "assets")]
        dir: PathBuf,
    },
}

fn parse_resolution(s: &str) -> Result<[usize; 2], String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WxH, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|_| format!("bad dimension `{v}`"));
    let (w, h) = (parse(w)?, parse(h)?);
    if w == 0 || h == 0 {
        return Err("dimensions must be positive".into());
    }
    Ok([w, h])
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v.trim().parse().ok().filter(|n| *n > 0).with_context(|| format!("{THREADS_ENV}=`{v}` is not a positive integer"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring worker threads")
}

/// Applies command-line overrides to the loaded description.
fn apply_overrides(cli: &Cli, desc: &mut SceneDescription) -> Result<()> {
    let r = &mut desc.render;
    if let Some(v) = &cli.output {
        r.output = v.clone();
    }
    if let Some(v) = cli.frames {
        r.frames = v;
    }
    if let Some(v) = cli.seed {
        r.seed = v;
    }
    if let Some(v) = cli.bias_scale {
        r.bias_scale = v;
    }
    r.film_reuse &= !cli.no_film_reuse;
    r.passes.direct &= !cli.no_direct;
    r.passes.indirect &= !cli.no_indirect;
    r.passes.glossy &= !cli.no_glossy;
    r.passes.emission &= !cli.no_emission;
    if let Some(res) = cli.resolution {
        desc.camera.resolution = res;
    }
    desc.validate()?;
    Ok(())
}

fn render(desc: SceneDescription, cli: &Cli) -> Result<()> {
    let frames = desc.render.frames;
    let prefix = desc.render.output.clone();
    let mut session = Session::new(desc)?;
    for i in 0..frames {
        let out = session.render()?;
        if !(cli.all_frames || i + 1 == frames) {
            continue;
        }
        let (pfm, ppm) = write_images(&out.hdr, &out.ldr, &prefix, out.frame)?;
        println!("{}", pfm.display());
        println!("{}", ppm.display());
        if cli.decompose {
            for (name, layer) in out.layers.iter() {
                let suffix = format!("_{name}");
                let p = frame_path(&prefix, out.frame, &suffix, "pfm");
                let q = frame_path(&prefix, out.frame, &suffix, "ppm");
                write_pfm(&p, layer)?;
                write_ppm(&q, &to_ldr(layer))?;
                println!("{}", p.display());
                println!("{}", q.display());
            }
        }
    }
    Ok(())
}

fn oracle(desc: &SceneDescription, cli: &Cli) -> Result<bool> {
    let scene = desc.build(&mut AssetCache::new())?;
    let camera = desc.camera()?;
    let mut opts = OracleOptions { seed: desc.render.seed, ..Default::default() };
    if let Some(n) = cli.oracle_trials {
        if n == 0 {
            bail!("--oracle-trials must be at least 1");
        }
        opts.trials = n;
    }
    let report = run_oracle_suite(&scene, &camera, &opts);
    println!("{report}");
    Ok(report.passed())
}

fn run(cli: Cli) -> Result<ExitCode> {
    configure_threads()?;
    if let Some(Command::MakeAssets { dir }) = &cli.command {
        for p in assets::make_assets(dir)? {
            println!("{}", p.display());
        }
        return Ok(ExitCode::SUCCESS);
    }
    let path = cli.scene.as_ref().expect("clap enforces the scene argument");
    let mut desc = load_scene(path)?;
    apply_overrides(&cli, &mut desc)?;
    if cli.oracle {
        return Ok(if oracle(&desc, &cli)? { ExitCode::SUCCESS } else { ExitCode::FAILURE });
    }
    if let Some(addr) = cli.serve {
        let session = Session::new(desc)?;
        eprintln!("listening on http://{addr}");
        gsgi_service::serve_blocking(session, addr).with_context(|| format!("serving on {addr}"))?;
        return Ok(ExitCode::SUCCESS);
    }
    render(desc, &cli)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
