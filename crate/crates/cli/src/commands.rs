//! Subcommand definitions and handlers.

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::service::{self, ServiceOptions};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qposer_core::data::{
    generate_manifold, load_poses, save_poses, split, ManifoldSpec, PoseDataset, PoseFormat,
};
use qposer_core::eval::{
    eval_escalated, eval_interpolation, eval_local_modification, eval_reconstruction, eval_sampling,
    render_pose_svg, run_ablation, sample_pairs, AblationVariant, EvalReport, MetricSummary,
};
use qposer_core::geometry::{Pose, Skeleton};
use qposer_core::model::{LatentCode, QPoserModel};
use qposer_core::rng::SplitMix64;
use qposer_core::training::{history_csv, load_checkpoint, save_checkpoint, TrainState};
use qposer_core::wire::{self, LatentJson, PoseJson};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "qposer", version, about = "Quantized part-disentangled pose prior")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample poses from the synthetic pose manifold.
    GenData(GenDataArgs),
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint and write a report.
    Eval(EvalArgs),
    /// Encode a pose into a latent code.
    Encode(EncodeArgs),
    /// Decode a latent code into a pose.
    Decode(DecodeArgs),
    /// Replace one part's codes in a latent with another latent's.
    Modify(ModifyArgs),
    /// Interpolate between two poses through the latent space.
    Interpolate(InterpolateArgs),
    /// Draw uniformly random latent codes and decode them.
    Sample(SampleArgs),
    /// Serve the model over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Manifold seed; fixes both the manifold and the samples drawn from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of poses.
    #[arg(long, default_value_t = 20_000)]
    pub count: usize,
    /// Dimension of the manifold's latent coordinates.
    #[arg(long, default_value_t = 6)]
    pub intrinsic_dim: usize,
    /// Output file; `.jsonl` writes JSON lines, anything else the binary pose format.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Pose file; split into train/val/test by the config's split table.
    #[arg(long)]
    pub data: PathBuf,
    /// TOML run config (defaults to the desk configuration).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Checkpoint to write (QPCK).
    #[arg(long)]
    pub out_checkpoint: PathBuf,
    /// Continue the run stored in this checkpoint, with its own training config.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Override the model and training seeds.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the step budget.
    #[arg(long)]
    pub steps: Option<u64>,
    /// Stop after this many completed steps (of the unchanged budget) and
    /// checkpoint; continue later with --resume.
    #[arg(long)]
    pub stop_at: Option<u64>,
    /// Write the per-step history as CSV.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Recon,
    Escalated,
    Interp,
    Sample,
    Localmod,
    Ablation,
    All,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model checkpoint (QPCK).
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// The pose file the checkpoint was trained on; the held-out split is scored.
    #[arg(long)]
    pub data: PathBuf,
    /// Metric block to run.
    #[arg(long, value_enum, default_value_t = Suite::All)]
    pub suite: Suite,
    /// Round-trips for the escalated error.
    #[arg(long, default_value_t = 50)]
    pub iterations: usize,
    /// JSON report path, or `-` for standard output.
    #[arg(long)]
    pub report: PathBuf,
    /// TOML run config (split, eval sizes, ablation budget).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the evaluation seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write sample and interpolation SVGs under `<dir>/<fingerprint>-<dataset hash>/`.
    #[arg(long)]
    pub render_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Model checkpoint (QPCK).
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Pose JSON; joints are normalized and sign-canonicalized on read.
    #[arg(long)]
    pub pose_file: PathBuf,
    /// Latent JSON path, or `-` for standard output.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// Model checkpoint (QPCK).
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Latent JSON.
    #[arg(long)]
    pub latent: PathBuf,
    /// Pose JSON path, or `-` for standard output.
    #[arg(long)]
    pub out: PathBuf,
    /// Also render the pose as an SVG stick figure.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModifyArgs {
    /// Model checkpoint (QPCK).
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Latent JSON to edit.
    #[arg(long)]
    pub base: PathBuf,
    /// Latent JSON supplying the part's codes.
    #[arg(long)]
    pub source: PathBuf,
    /// Part name, e.g. LeftArm.
    #[arg(long)]
    pub part: String,
    /// Latent JSON path, or `-` for standard output.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InterpolateArgs {
    /// Model checkpoint (QPCK).
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Start pose JSON.
    #[arg(long)]
    pub from: PathBuf,
    /// End pose JSON.
    #[arg(long)]
    pub to: PathBuf,
    /// Frames including both endpoints.
    #[arg(long, default_value_t = 11)]
    pub steps: usize,
    /// Frames are written as `frame_000.json`, `frame_001.json`, ...
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Model checkpoint (QPCK).
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Number of samples.
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    /// Sampling seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Writes `sample_000.json` (pose) and `sample_000.latent.json` per sample.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Model checkpoint (QPCK).
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Address to listen on, `host:port`.
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub listen: String,
    /// Directory of static assets (the browser editor) served at `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    /// Include the continuous encoder outputs in /encode responses.
    #[arg(long)]
    pub expose_continuous: bool,
}

pub fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Encode(a) => encode(a),
        Command::Decode(a) => decode(a),
        Command::Modify(a) => modify(a),
        Command::Interpolate(a) => interpolate(a),
        Command::Sample(a) => sample(a),
        Command::Serve(a) => serve(a),
    }
}

fn write_output(path: &Path, text: &str) -> CliResult<()> {
    if path == Path::new("-") {
        let mut out = std::io::stdout().lock();
        out.write_all(text.as_bytes())
            .and_then(|_| out.write_all(b"\n"))
            .map_err(|e| CliError::io("<stdout>", e))
    } else {
        std::fs::write(path, format!("{text}\n")).map_err(|e| CliError::io(path, e))
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn load_model(path: &Path) -> CliResult<QPoserModel> {
    Ok(load_checkpoint(path)?.model)
}

fn read_pose(path: &Path, skeleton: &Skeleton) -> CliResult<Pose> {
    let json: PoseJson = serde_json::from_str(&read_text(path)?)
        .map_err(|e| qposer_core::Error::Format(format!("{}: pose JSON: {e}", path.display())))?;
    Ok(json.into_pose_canonicalized(skeleton)?)
}

fn read_latent(path: &Path, model: &QPoserModel) -> CliResult<LatentCode> {
    let json: LatentJson = serde_json::from_str(&read_text(path)?)
        .map_err(|e| qposer_core::Error::Format(format!("{}: latent JSON: {e}", path.display())))?;
    Ok(json.into_code(model.layout())?)
}

fn load_dataset(path: &Path, skeleton: &Skeleton) -> CliResult<PoseDataset> {
    Ok(load_poses(path, skeleton, PoseFormat::from_path(path))?)
}

fn gen_data(a: GenDataArgs) -> CliResult<()> {
    let sk = Skeleton::body21();
    let spec = ManifoldSpec::default_for(&sk, a.seed, a.intrinsic_dim);
    let ds = generate_manifold(&spec, a.count, &sk)?;
    save_poses(&a.out, &ds, PoseFormat::from_path(&a.out))?;
    log::info!("wrote {} poses to {} (content hash {:016x})", ds.len(), a.out.display(), ds.content_hash());
    Ok(())
}

fn train(a: TrainArgs) -> CliResult<()> {
    let mut cfg = RunConfig::load_or_default(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        cfg.model.seed = seed;
        cfg.train.seed = seed;
    }
    if let Some(steps) = a.steps {
        cfg.train.steps = steps;
    }
    let sk = Skeleton::body21();
    let ds = load_dataset(&a.data, &sk)?;
    let (train_set, val_set, _) = split(&ds, &cfg.split)?;
    let mut state = match &a.resume {
        Some(path) => {
            let mut state = load_checkpoint(path)?;
            if let Some(steps) = a.steps {
                state.config.steps = steps;
            }
            state
        }
        None => TrainState::new(cfg.model.build(&sk)?, cfg.train.clone())?,
    };
    let total = state.config.steps;
    let every = state.config.eval_every;
    let target = a.stop_at.unwrap_or(total);
    state.run_until(&train_set, &val_set, target, |r| {
        if r.step % every == 0 || r.step == total {
            log::info!(
                "step {}/{}: loss {:.5} (recon {:.5}, commit {:.5}) val mpjae {}",
                r.step,
                total,
                r.loss_total,
                r.loss_recon,
                r.loss_commit,
                r.val_mpjae.map_or("-".into(), |v| format!("{v:.3} deg"))
            );
        }
    })?;
    save_checkpoint(&a.out_checkpoint, &state)?;
    if let Some(path) = &a.history {
        let ids: Vec<&str> = state.model.codebooks().iter().map(|b| b.id()).collect();
        std::fs::write(path, history_csv(&state.history, &ids)).map_err(|e| CliError::io(path, e))?;
    }
    log::info!(
        "wrote {} (fingerprint {:016x})",
        a.out_checkpoint.display(),
        state.model.fingerprint()
    );
    Ok(())
}

fn eval(a: EvalArgs) -> CliResult<()> {
    if a.iterations < 2 {
        return Err(CliError::Usage(format!("--iterations must be >= 2, got {}", a.iterations)));
    }
    let mut cfg = RunConfig::load_or_default(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        cfg.eval.seed = seed;
    }
    let state = load_checkpoint(&a.checkpoint)?;
    let model = &state.model;
    let sk = model.skeleton().clone();
    let ds = load_dataset(&a.data, &sk)?;
    let (train_set, val_set, test_set) = split(&ds, &cfg.split)?;
    let reference = train_set.head(cfg.eval.reference_size);
    let test = &test_set.poses;
    let ev = &cfg.eval;
    let run = |s: Suite| a.suite == s || a.suite == Suite::All;

    let mut report = EvalReport::new(model.fingerprint(), ds.content_hash());
    let render_dir = a
        .render_dir
        .as_ref()
        .map(|d| d.join(format!("{:016x}-{:016x}", model.fingerprint(), ds.content_hash())));
    if let Some(dir) = &render_dir {
        create_dir(dir)?;
    }

    if run(Suite::Recon) {
        log::info!("eval: reconstruction on {} poses", test.len());
        let (s, _) = eval_reconstruction(model, test)?;
        report.insert("recon", "mpjae_deg", s)?;
    }
    if run(Suite::Escalated) {
        log::info!("eval: escalated error, k = {}", a.iterations);
        let (s, _) = eval_escalated(model, test, a.iterations)?;
        report.insert("escalated", &format!("k{}_deg", a.iterations), s)?;
    }
    if run(Suite::Interp) {
        log::info!("eval: interpolation over {} pairs", ev.interp_pairs);
        let mut rng = SplitMix64::new(ev.seed);
        let pairs: Vec<(Pose, Pose)> = sample_pairs(test.len(), ev.interp_pairs, &mut rng)?
            .into_iter()
            .map(|(i, j)| (test[i].clone(), test[j].clone()))
            .collect();
        let r = eval_interpolation(model, &pairs, ev.interp_steps, &reference)?;
        report.insert("interp", "latent_max_step_deg", r.latent_max_step)?;
        report.insert("interp", "latent_max_manifold_distance_deg", r.latent_max_manifold_distance)?;
        report.insert("interp", "baseline_max_step_deg", r.baseline_max_step)?;
        report.insert("interp", "baseline_max_manifold_distance_deg", r.baseline_max_manifold_distance)?;
        report.insert("interp", "latent_smooth_rate", MetricSummary::single(r.latent_smooth_rate))?;
        report.insert("interp", "latent_plausible_rate", MetricSummary::single(r.latent_plausible_rate))?;
        report.insert("interp", "baseline_plausible_rate", MetricSummary::single(r.baseline_plausible_rate))?;
        if let (Some(dir), Some((from, to))) = (&render_dir, pairs.first()) {
            for (k, f) in model.interpolate(from, to, ev.interp_steps)?.iter().enumerate() {
                render_pose_svg(f, &sk, &dir.join(format!("interp_{k:03}.svg")))?;
            }
        }
        report.insert_details("interp", &r)?;
    }
    if run(Suite::Sample) {
        log::info!("eval: sampling {} poses", ev.sample_count);
        let mut rng = SplitMix64::new(ev.seed ^ 0x5a4d_504c);
        let (r, samples) = eval_sampling(model, ev.sample_count, &reference, &mut rng)?;
        report.insert("sample", "validity_rate", MetricSummary::single(r.validity_rate))?;
        report.insert("sample", "diversity_deg", MetricSummary::single(r.diversity))?;
        report.insert("sample", "manifold_distance_deg", r.plausibility)?;
        report.insert("sample", "baseline_validity_rate", MetricSummary::single(r.baseline_validity_rate))?;
        report.insert("sample", "baseline_diversity_deg", MetricSummary::single(r.baseline_diversity))?;
        report.insert("sample", "baseline_manifold_distance_deg", r.baseline_plausibility)?;
        report
            .notes
            .push("sampling diversity (mean pairwise MPJAE) is this tool's own quantification".into());
        if let Some(dir) = &render_dir {
            for (k, s) in samples.iter().take(8).enumerate() {
                render_pose_svg(s, &sk, &dir.join(format!("sample_{k:03}.svg")))?;
            }
        }
    }
    if run(Suite::Localmod) {
        log::info!("eval: local modification, {} trials", ev.localmod_trials);
        let mut rng = SplitMix64::new(ev.seed ^ 0x4c4f_4341);
        let r = eval_local_modification(model, test, ev.localmod_trials, &mut rng)?;
        report.insert("localmod", "locality_rate", MetricSummary::single(r.locality_rate))?;
        report.insert("localmod", "embodied_shift_deg", MetricSummary::single(r.embodied_shift))?;
    }
    if run(Suite::Ablation) {
        let mut variants: Vec<AblationVariant> =
            ev.ablation_heads.iter().map(|&h| AblationVariant::HeadsPerPart(h)).collect();
        variants.push(AblationVariant::GlifOff);
        log::info!("eval: ablation, training {} variants", variants.len());
        let rows = run_ablation(
            &sk,
            &cfg.model,
            &cfg.train,
            &train_set,
            &val_set,
            test,
            &variants,
            a.iterations,
            ev.localmod_trials,
        )?;
        for r in &rows {
            report.insert("ablation", &format!("{} recon_deg", r.label), r.recon)?;
            report.insert("ablation", &format!("{} escalated_deg", r.label), r.escalated)?;
            report.insert(
                "ablation",
                &format!("{} embodied_shift_deg", r.label),
                MetricSummary::single(r.embodied_shift),
            )?;
        }
        report.insert_details("ablation", &rows)?;
    }
    report.attach_references();
    log::info!("\n{}", report.to_text());
    write_output(&a.report, &report.to_json()?)
}

fn encode(a: EncodeArgs) -> CliResult<()> {
    let model = load_model(&a.checkpoint)?;
    let pose = read_pose(&a.pose_file, model.skeleton())?;
    let (_, code) = model.encode(&pose)?;
    write_output(&a.out, &wire::latent_to_string(&code, model.layout()))
}

fn decode(a: DecodeArgs) -> CliResult<()> {
    let model = load_model(&a.checkpoint)?;
    let code = read_latent(&a.latent, &model)?;
    let pose = model.decode_quantized(&code)?;
    if let Some(svg) = &a.svg {
        render_pose_svg(&pose, model.skeleton(), svg)?;
    }
    write_output(&a.out, &wire::pose_to_string(&pose))
}

fn modify(a: ModifyArgs) -> CliResult<()> {
    let model = load_model(&a.checkpoint)?;
    let base = read_latent(&a.base, &model)?;
    let source = read_latent(&a.source, &model)?;
    let edited = model.modify_part(&base, &a.part, &source)?;
    write_output(&a.out, &wire::latent_to_string(&edited, model.layout()))
}

fn interpolate(a: InterpolateArgs) -> CliResult<()> {
    let model = load_model(&a.checkpoint)?;
    let from = read_pose(&a.from, model.skeleton())?;
    let to = read_pose(&a.to, model.skeleton())?;
    let frames = model.interpolate(&from, &to, a.steps)?;
    create_dir(&a.out_dir)?;
    for (k, f) in frames.iter().enumerate() {
        write_output(&a.out_dir.join(format!("frame_{k:03}.json")), &wire::pose_to_string(f))?;
    }
    Ok(())
}

fn sample(a: SampleArgs) -> CliResult<()> {
    let model = load_model(&a.checkpoint)?;
    let mut rng = SplitMix64::new(a.seed);
    create_dir(&a.out_dir)?;
    for k in 0..a.count {
        let (code, pose) = model.sample(&mut rng)?;
        write_output(&a.out_dir.join(format!("sample_{k:03}.json")), &wire::pose_to_string(&pose))?;
        write_output(
            &a.out_dir.join(format!("sample_{k:03}.latent.json")),
            &wire::latent_to_string(&code, model.layout()),
        )?;
    }
    Ok(())
}

fn serve(a: ServeArgs) -> CliResult<()> {
    let model = load_model(&a.checkpoint)?;
    let options = ServiceOptions {
        static_dir: a.static_dir,
        expose_continuous: a.expose_continuous,
    };
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Server(e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&a.listen)
            .await
            .map_err(|e| CliError::Server(format!("bind {}: {e}", a.listen)))?;
        log::info!("serving model {:016x} on http://{}", model.fingerprint(), a.listen);
        axum::serve(listener, service::router(model, options))
            .await
            .map_err(|e| CliError::Server(e.to_string()))
    })
}
