//! Command-line frontend: single-frame calibration, objective sweeps,
//! multi-frame evaluation, intermediate dumps, and synthetic data
//! generation.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};

use multifeat::error::Error;
use multifeat::geometry::ExtrinsicParams;
use multifeat::io::{
    load_calib, load_config, load_gray_image, load_velodyne_bin, write_calib, write_config,
    write_gray_image, write_grid, write_panorama, write_result, write_velodyne_bin, FramePair,
    PipelineConfig,
};
use multifeat::objective::{evaluate_cost, Termination};
use multifeat::pipeline::{calibrate_frame, prepare_frame};
use multifeat::synth::{perturb, render_camera, render_lidar, SceneSpec};

const EXIT_NO_PLANE: u8 = 10;
const EXIT_NO_EDGES: u8 = 11;
const EXIT_NO_CONVERGENCE: u8 = 12;

const LONG_ABOUT: &str = "\
Targetless camera-LiDAR extrinsic calibration by multi-feature edge alignment.

Exit codes:
  0   success (calibrate: optimizer converged)
  1   input or processing error
  2   bad command line
  10  no ground plane found in the point cloud
  11  no LiDAR edge points selected for this frame
  12  calibration finished without converging (result file still written)

All tunables can be set in the --config file; command-line flags win.";

#[derive(Parser)]
#[command(name = "multifeat", version, about = "Camera-LiDAR extrinsic calibration", long_about = LONG_ABOUT)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Calibrate a single frame pair and write a result file.
    Calibrate(CalibrateArgs),
    /// Evaluate the objective along 1-D parameter slices around a center.
    Sweep(SweepArgs),
    /// Calibrate many frames against a shared ground truth and report
    /// error statistics.
    EvalMultiframe(EvalArgs),
    /// Write intermediate pipeline artifacts as 16-bit graymaps.
    Dump(DumpArgs),
    /// Render synthetic frame pairs with exact ground truth.
    Synth(SynthArgs),
}

#[derive(Args)]
struct FrameInputs {
    /// Pipeline config file (flat key = value text).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Point cloud (binary x,y,z,reflectance f32 quadruples).
    #[arg(long)]
    cloud: PathBuf,
    /// Camera image (P5 graymap or P6 pixmap).
    #[arg(long)]
    image: PathBuf,
    /// Calibration file: intrinsics plus optional ground truth.
    #[arg(long)]
    calib: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl FrameInputs {
    fn config(&self) -> Result<PipelineConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => load_config(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }

    fn load(
        &self,
        cfg: &PipelineConfig,
    ) -> Result<(FramePair, multifeat::geometry::CameraIntrinsics), Error> {
        let _ = cfg;
        let cloud = load_velodyne_bin(&self.cloud)?;
        let image = load_gray_image(&self.image)?;
        let (k, gt) = load_calib(&self.calib)?;
        let id = self
            .cloud
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "frame".to_string());
        let frame = FramePair::new(cloud, image, &k, id, gt)?;
        Ok((frame, k))
    }
}

fn parse_theta(text: &str) -> Result<ExtrinsicParams, Error> {
    let vals: Result<Vec<f64>, _> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect();
    let vals = vals.map_err(|e| Error::invalid(format!("bad theta component: {e}")))?;
    if vals.len() != 6 {
        return Err(Error::invalid("theta needs 6 comma-separated values: rx,ry,rz,tx,ty,tz"));
    }
    Ok(ExtrinsicParams::new(vals[0], vals[1], vals[2], vals[3], vals[4], vals[5]))
}

fn parse_perturb(text: &str) -> Result<[f64; 6], Error> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::invalid("perturbation needs two values: rot_magnitude,trans_magnitude"));
    }
    let r: f64 = parts[0].trim().parse().map_err(|e| Error::invalid(format!("bad magnitude: {e}")))?;
    let t: f64 = parts[1].trim().parse().map_err(|e| Error::invalid(format!("bad magnitude: {e}")))?;
    Ok([r, r, r, t, t, t])
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    inputs: FrameInputs,
    /// Result file to write.
    #[arg(long)]
    out: PathBuf,
    /// Initial estimate rx,ry,rz,tx,ty,tz; defaults to the calib ground
    /// truth when present.
    #[arg(long)]
    theta0: Option<String>,
    /// Perturb the initial estimate by seeded uniform noise,
    /// rot_magnitude,trans_magnitude.
    #[arg(long)]
    perturb: Option<String>,
}

fn cmd_calibrate(args: &CalibrateArgs) -> Result<u8, Error> {
    let cfg = args.inputs.config()?;
    let (frame, k) = args.inputs.load(&cfg)?;
    let mut theta0 = match &args.theta0 {
        Some(t) => parse_theta(t)?,
        None => frame.ground_truth.ok_or_else(|| {
            Error::invalid("no --theta0 given and the calib file has no ground truth")
        })?,
    };
    if let Some(p) = &args.perturb {
        theta0 = perturb(&theta0, &parse_perturb(p)?, cfg.seed);
    }
    let result = calibrate_frame(&frame.cloud, &frame.image, &k, &cfg, &theta0)?;
    write_result(&result, &args.out)?;
    Ok(if result.trace.termination == Termination::Converged {
        0
    } else {
        EXIT_NO_CONVERGENCE
    })
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SweepParam {
    Rx,
    Ry,
    Rz,
    Tx,
    Ty,
    Tz,
    All,
}

impl SweepParam {
    fn indices(self) -> Vec<usize> {
        match self {
            SweepParam::Rx => vec![0],
            SweepParam::Ry => vec![1],
            SweepParam::Rz => vec![2],
            SweepParam::Tx => vec![3],
            SweepParam::Ty => vec![4],
            SweepParam::Tz => vec![5],
            SweepParam::All => (0..6).collect(),
        }
    }
}

const PARAM_NAMES: [&str; 6] = ["rx", "ry", "rz", "tx", "ty", "tz"];

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    inputs: FrameInputs,
    /// Directory for the per-parameter tables.
    #[arg(long)]
    out: PathBuf,
    /// Which parameter to sweep.
    #[arg(long, value_enum, default_value = "all")]
    param: SweepParam,
    /// Half-width of the symmetric offset range.
    #[arg(long, default_value_t = 0.3)]
    range: f64,
    /// Number of samples over the range.
    #[arg(long, default_value_t = 61)]
    samples: usize,
    /// Rescale each slice affinely to [0, 1].
    #[arg(long)]
    normalize: bool,
    /// Sweep center rx,ry,rz,tx,ty,tz; defaults to the calib ground truth.
    #[arg(long)]
    center: Option<String>,
}

fn cmd_sweep(args: &SweepArgs) -> Result<u8, Error> {
    if args.samples < 3 {
        return Err(Error::invalid("sweep needs at least 3 samples"));
    }
    if !(args.range > 0.0) {
        return Err(Error::invalid("sweep range must be positive"));
    }
    let cfg = args.inputs.config()?;
    let (frame, k) = args.inputs.load(&cfg)?;
    let center = match &args.center {
        Some(t) => parse_theta(t)?,
        None => frame.ground_truth.ok_or_else(|| {
            Error::invalid("no --center given and the calib file has no ground truth")
        })?,
    };
    let art = prepare_frame(&frame.cloud, &frame.image, &cfg)?;
    if art.edge_points.edge_count() == 0 {
        return Err(Error::NoEdges);
    }
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    for idx in args.param.indices() {
        let mut rows: Vec<(f64, f64)> = Vec::with_capacity(args.samples);
        for s in 0..args.samples {
            let offset = -args.range + 2.0 * args.range * s as f64 / (args.samples - 1) as f64;
            let mut theta = center.to_array();
            theta[idx] += offset;
            let j = evaluate_cost(
                &ExtrinsicParams::from_array(theta),
                &art.edge_points,
                &art.camera_edges,
                &k,
                cfg.match_threshold,
            )?
            .j;
            rows.push((offset, j));
        }
        if args.normalize {
            let min = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
            let max = rows.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
            for r in &mut rows {
                r.1 = if max > min { (r.1 - min) / (max - min) } else { 0.0 };
            }
        }
        let mut text = String::from("offset\tobjective\n");
        for (offset, j) in rows {
            text.push_str(&format!("{offset}\t{j}\n"));
        }
        let path = args.out.join(format!("sweep_{}.tsv", PARAM_NAMES[idx]));
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(0)
}

#[derive(Args)]
struct EvalArgs {
    /// Pipeline config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding cloud_NNNN.bin / image_NNNN.pgm pairs and a shared
    /// calib.txt with ground truth.
    #[arg(long)]
    dir: PathBuf,
    /// Report file to write.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Per-frame initial perturbation, rot_magnitude,trans_magnitude.
    #[arg(long, default_value = "0.05,0.10")]
    perturb: String,
}

struct FrameOutcome {
    id: String,
    theta: [f64; 6],
    residual: [f64; 6],
}

fn quartiles(sorted: &[f64]) -> (f64, f64, f64) {
    let q = |p: f64| {
        let x = p * (sorted.len() - 1) as f64;
        let lo = x.floor() as usize;
        let hi = x.ceil() as usize;
        sorted[lo] + (sorted[hi] - sorted[lo]) * (x - lo as f64)
    };
    (q(0.25), q(0.5), q(0.75))
}

fn cmd_eval_multiframe(args: &EvalArgs) -> Result<u8, Error> {
    let mut cfg = match &args.config {
        Some(p) => load_config(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let magnitudes = parse_perturb(&args.perturb)?;
    let (k, gt) = load_calib(&args.dir.join("calib.txt"))?;
    let gt = gt.ok_or_else(|| Error::invalid("multi-frame evaluation needs ground truth in calib.txt"))?;

    let mut stems: Vec<String> = std::fs::read_dir(&args.dir)
        .map_err(|e| Error::io(&args.dir, e))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            name.strip_prefix("cloud_")
                .and_then(|s| s.strip_suffix(".bin"))
                .map(|s| s.to_string())
        })
        .collect();
    stems.sort();
    if stems.is_empty() {
        return Err(Error::invalid("no cloud_*.bin files found in the frame directory"));
    }

    let jobs = args.jobs.max(1);
    let next = AtomicUsize::new(0);
    let outcomes: Mutex<Vec<Option<Result<FrameOutcome, Error>>>> =
        Mutex::new((0..stems.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(stems.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= stems.len() {
                    break;
                }
                let outcome = (|| {
                    let cloud = load_velodyne_bin(&args.dir.join(format!("cloud_{}.bin", stems[i])))?;
                    let image = load_gray_image(&args.dir.join(format!("image_{}.pgm", stems[i])))?;
                    let theta0 = perturb(&gt, &magnitudes, cfg.seed.wrapping_add(i as u64));
                    let result = calibrate_frame(&cloud, &image, &k, &cfg, &theta0)?;
                    let est = result.theta.to_array();
                    let truth = gt.to_array();
                    Ok(FrameOutcome {
                        id: stems[i].clone(),
                        theta: est,
                        residual: std::array::from_fn(|c| est[c] - truth[c]),
                    })
                })();
                outcomes.lock().unwrap()[i] = Some(outcome);
            });
        }
    });

    let outcomes: Vec<FrameOutcome> = outcomes
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|o| o.expect("worker pool covered every frame"))
        .collect::<Result<_, _>>()?;

    let n = outcomes.len() as f64;
    let mut text = String::from("frame\trx\try\trz\ttx\tty\ttz\n");
    for o in &outcomes {
        text.push_str(&o.id);
        for v in o.theta {
            text.push_str(&format!("\t{v}"));
        }
        text.push('\n');
    }
    let mean: [f64; 6] =
        std::array::from_fn(|c| outcomes.iter().map(|o| o.theta[c]).sum::<f64>() / n);
    let signed: [f64; 6] =
        std::array::from_fn(|c| outcomes.iter().map(|o| o.residual[c]).sum::<f64>() / n);
    let mae: [f64; 6] =
        std::array::from_fn(|c| outcomes.iter().map(|o| o.residual[c].abs()).sum::<f64>() / n);
    for (label, row) in [
        ("mean_estimate", &mean),
        ("signed_mean_error", &signed),
        ("mae", &mae),
    ] {
        text.push_str(label);
        for v in row {
            text.push_str(&format!("\t{v}"));
        }
        text.push('\n');
    }
    for c in 0..6 {
        let mut rs: Vec<f64> = outcomes.iter().map(|o| o.residual[c]).collect();
        rs.sort_by(f64::total_cmp);
        let (q1, q2, q3) = quartiles(&rs);
        text.push_str(&format!("residual_quartiles_{}\t{q1}\t{q2}\t{q3}\n", PARAM_NAMES[c]));
    }
    std::fs::write(&args.out, text).map_err(|e| Error::io(&args.out, e))?;
    Ok(0)
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum DumpStage {
    All,
    CameraEdges,
    Panoramas,
    Mixed,
}

#[derive(Args)]
struct DumpArgs {
    #[command(flatten)]
    inputs: FrameInputs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    stage: DumpStage,
}

fn cmd_dump(args: &DumpArgs) -> Result<u8, Error> {
    let cfg = args.inputs.config()?;
    let (frame, _k) = args.inputs.load(&cfg)?;
    let art = prepare_frame(&frame.cloud, &frame.image, &cfg)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let want = |s: DumpStage| args.stage == DumpStage::All || args.stage == s;
    if want(DumpStage::CameraEdges) {
        let e = &art.camera_edges;
        write_grid(&e.data, e.height, e.width, &args.out.join("camera_edges.pgm"))?;
    }
    if want(DumpStage::Panoramas) {
        for dm in &art.dense {
            write_panorama(dm, &args.out.join(format!("panorama_{}.pgm", dm.feature.name())))?;
        }
    }
    if want(DumpStage::Mixed) {
        let m = &art.mixed;
        write_grid(&m.data, m.height, m.width, &args.out.join("mixed_edges.pgm"))?;
    }
    Ok(0)
}

#[derive(Args)]
struct SynthArgs {
    /// Scene preset: urban, cluttered, or sparse_shadow.
    #[arg(long, default_value = "urban")]
    preset: String,
    /// Base seed; frame i uses seed + i for its layout.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of frames to render.
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn cmd_synth(args: &SynthArgs) -> Result<u8, Error> {
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let mut calib_written = false;
    for i in 0..args.count {
        let spec = SceneSpec::preset(&args.preset, args.seed + i as u64)?;
        let cloud = render_lidar(&spec, 1000 + args.seed + i as u64);
        let image = render_camera(&spec)?;
        write_velodyne_bin(&cloud, &args.out.join(format!("cloud_{i:04}.bin")))?;
        write_gray_image(&image, &args.out.join(format!("image_{i:04}.pgm")))?;
        if !calib_written {
            write_calib(&spec.intrinsics()?, Some(&spec.theta_true), &args.out.join("calib.txt"))?;
            // A ready-to-use config tuned for the synthetic presets.
            write_config(
                &PipelineConfig::tuned_synthetic(args.seed),
                &args.out.join("config.txt"),
            )?;
            calib_written = true;
        }
    }
    Ok(0)
}

fn run(cli: &Cli) -> Result<u8, Error> {
    match &cli.cmd {
        Cmd::Calibrate(a) => cmd_calibrate(a),
        Cmd::Sweep(a) => cmd_sweep(a),
        Cmd::EvalMultiframe(a) => cmd_eval_multiframe(a),
        Cmd::Dump(a) => cmd_dump(a),
        Cmd::Synth(a) => cmd_synth(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Error::NoPlane) => {
            eprintln!("error: no ground plane found in the point cloud");
            ExitCode::from(EXIT_NO_PLANE)
        }
        Err(Error::NoEdges) => {
            eprintln!("error: no LiDAR edge points selected for this frame");
            ExitCode::from(EXIT_NO_EDGES)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
