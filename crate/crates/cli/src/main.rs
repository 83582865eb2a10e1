//! `reflect`: generate synthetic data, train and evaluate the BRDF regressors.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use reflectance::brdf::Metric;
use reflectance::diagnostics::gradient_suite;
use reflectance::eval::{
    ablate_ec, coverage_sweep, evaluate, model_report, prepare_scenes, render_comparison, EvalReport, Predictor,
};
use reflectance::synth::{generate_dataset, generate_perturbed_split, Dataset, SceneRecord, Split};
use reflectance::training::{
    compute_norm_stats, train, LossConfig, ModelKind, Precision, TrainConfig, TrainedModel,
};
use reflectance::{Error, Result};
use serde_json::{json, Value};

use config::FileConfig;

#[derive(Parser, Debug)]
#[command(name = "reflect", version, about = "Ward BRDF estimation from synthetic multi-view observations")]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON file with dataset/train/loss/render/sweep/ablation sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic dataset (or an illumination-perturbed copy of one's validation split).
    GenData(GenData),
    /// Train a network on a dataset.
    Train(TrainArgs),
    /// Normalized RMSE of a checkpoint or a baseline predictor.
    Eval(EvalArgs),
    /// RMSE against view count and voxel count.
    Sweep(SweepArgs),
    /// Render truth and prediction side by side under a novel environment.
    Render(RenderArgs),
    /// Parameter count, size and timing of a checkpoint.
    Report(ReportArgs),
    /// Compare scale error with and without the image-statistics term.
    AblateEc(AblateArgs),
    /// Gradient checks of every layer, both networks and the losses.
    Gradcheck,
}

#[derive(Args, Debug)]
struct GenData {
    #[arg(long)]
    scenes: Option<usize>,
    #[arg(long)]
    views: Option<usize>,
    #[arg(long)]
    voxels: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Also write each rendered frame as PPM.
    #[arg(long)]
    dump_frames: bool,
    /// Re-render this dataset's validation split with scaled illumination instead.
    #[arg(long)]
    perturb_from: Option<PathBuf>,
    /// Illumination factor range for --perturb-from, as MIN,MAX.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    scale_range: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MetricArg {
    Rmse1,
    Rmse2,
    Cuberoot,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Metric {
        match m {
            MetricArg::Rmse1 => Metric::Rmse1,
            MetricArg::Rmse2 => Metric::Rmse2,
            MetricArg::Cuberoot => Metric::CubeRoot,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelArg {
    Hemicnn,
    GroupletFast,
    GroupletSlow,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> ModelKind {
        match m {
            ModelArg::Hemicnn => ModelKind::HemiCnn,
            ModelArg::GroupletFast => ModelKind::GroupletFast,
            ModelArg::GroupletSlow => ModelKind::GroupletSlow,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PrecisionArg {
    F32,
    F64,
}

#[derive(Args, Debug, Clone)]
struct TrainOpts {
    /// Dataset directory.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    #[arg(long, value_enum)]
    metric: Option<MetricArg>,
    /// Weight of the image-statistics term.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    minibatches: Option<usize>,
    /// Use the full-scale budget (100K HemiCNN, 13K Grouplet).
    #[arg(long = "paper-budget", conflicts_with = "minibatches")]
    full_budget: bool,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, value_enum)]
    precision: Option<PrecisionArg>,
    #[arg(long)]
    eval_every: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    opts: TrainOpts,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PredictorArg {
    Model,
    Mean,
    Oracle,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SplitArg {
    Train,
    Validation,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    /// Required for --predictor model.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "model")]
    predictor: PredictorArg,
    #[arg(long, value_enum, default_value = "validation")]
    split: SplitArg,
    /// Images or nodes per prediction (defaults to the checkpoint's preset).
    #[arg(long)]
    nodes: Option<usize>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// View counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    views: Option<Vec<usize>>,
    /// Voxel (node or image) counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    voxels: Option<Vec<usize>>,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Validation scene id (default: the first one).
    #[arg(long)]
    scene: Option<String>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long)]
    checkpoint: PathBuf,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[command(flatten)]
    opts: TrainOpts,
    /// Checkpoint trained with the image-statistics term (skips training it).
    #[arg(long, requires = "without")]
    with: Option<PathBuf>,
    /// Checkpoint trained without it.
    #[arg(long, requires = "with")]
    without: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', num_args = 2)]
    scale_range: Option<Vec<f64>>,
}

struct Ctx {
    seed: Option<u64>,
    out: Option<PathBuf>,
    file: FileConfig,
}

impl Ctx {
    fn out_or(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> Result<()> {
    if let Some(p) = path.parent() {
        std::fs::create_dir_all(p)?;
    }
    std::fs::write(path, serde_json::to_vec_pretty(v)?)?;
    Ok(())
}

fn scale_range(arg: &Option<Vec<f64>>, ctx: &Ctx) -> [f64; 2] {
    match arg {
        Some(v) => [v[0], v[1]],
        None => ctx.file.ablation.scale_range,
    }
}

fn gen_data(a: &GenData, ctx: &Ctx) -> Result<Value> {
    let root = ctx.out_or("data");
    if let Some(src) = &a.perturb_from {
        let src = Dataset::open(src)?;
        let range = scale_range(&a.scale_range, ctx);
        let m = generate_perturbed_split(&src, &root, range, ctx.seed())?;
        return Ok(json!({"dataset": root, "validation_scenes": m.n_validation, "scale_range": range}));
    }
    let mut cfg = ctx.file.dataset.clone();
    macro_rules! set {
        ($($f:ident),*) => { $(if let Some(v) = a.$f { cfg.$f = v; })* };
    }
    set!(scenes, views, voxels, width, height, train_fraction);
    cfg.dump_frames |= a.dump_frames;
    if let Some(s) = ctx.seed {
        cfg.seed = s;
    }
    let m = generate_dataset(&cfg, &root)?;
    let dropped: usize = m.scenes.len();
    Ok(json!({"dataset": root, "scenes": dropped, "train": m.n_train, "validation": m.n_validation, "seed": m.seed}))
}

fn train_setup(o: &TrainOpts, ctx: &Ctx) -> Result<(Dataset, TrainConfig, LossConfig)> {
    let ds = Dataset::open(&o.data)?;
    let mut cfg = ctx.file.train.clone();
    if let Some(m) = o.model {
        cfg.model = m.into();
        if ctx.file.train.architecture.is_some() && cfg.model != ctx.file.train.model {
            cfg.architecture = None;
        }
    }
    if let Some(s) = ctx.seed {
        cfg.seed = s;
    }
    if let Some(n) = o.minibatches {
        cfg.minibatches = n;
    }
    if o.full_budget {
        cfg.minibatches = TrainConfig::full_budget(cfg.model);
    }
    if let Some(b) = o.batch_size {
        cfg.batch_size = b;
    }
    if let Some(e) = o.eval_every {
        cfg.eval_every = e;
    }
    if let Some(p) = o.precision {
        cfg.precision = match p {
            PrecisionArg::F32 => Precision::F32,
            PrecisionArg::F64 => Precision::F64,
        };
    }
    if let Some(lr) = o.lr {
        cfg.optimizer = Some(match cfg.optimizer() {
            reflectance::nn::OptimizerConfig::Rmsprop { beta, eps, .. } => {
                reflectance::nn::OptimizerConfig::Rmsprop { lr, beta, eps }
            }
            reflectance::nn::OptimizerConfig::Sgd { momentum, .. } => reflectance::nn::OptimizerConfig::Sgd { lr, momentum },
        });
    }
    let mut loss = ctx.file.loss.unwrap_or_default();
    if let Some(m) = o.metric {
        loss = LossConfig { lambda: loss.lambda, lambda_g: loss.lambda_g, lab_scale: loss.lab_scale, ..LossConfig::new(m.into(), loss.lambda) };
    }
    if let Some(l) = o.lambda {
        loss.lambda = l;
    }
    Ok((ds, cfg, loss))
}

fn run_train(a: &TrainArgs, ctx: &Ctx) -> Result<Value> {
    let (ds, cfg, loss) = train_setup(&a.opts, ctx)?;
    let out = ctx.out_or(&format!("runs/{}-{}", cfg.model, loss.metric));
    let r = train(&ds, &cfg, &loss, &out)?;
    Ok(serde_json::to_value(r)?)
}

fn summary(r: &EvalReport) -> Value {
    json!({
        "predictor": r.predictor,
        "scenes": r.scenes,
        "rmse": r.rmse,
        "rmse_per_dim": r.dims.iter().zip(r.rmse_per_dim).map(|(d, v)| (d.clone(), json!(v))).collect::<serde_json::Map<_, _>>(),
        "mean_scene_rmse": r.mean_scene_rmse,
        "mean_scale_error": r.mean_scale_error,
        "inference_size": r.inference_size,
        "seed": r.seed,
    })
}

fn load_model(path: &Path, nodes: Option<usize>) -> Result<TrainedModel<f64>> {
    let mut m = TrainedModel::<f64>::load(path)?;
    if let Some(n) = nodes {
        m.network.set_inference_size(n)?;
    }
    Ok(m)
}

fn run_eval(a: &EvalArgs, ctx: &Ctx) -> Result<Value> {
    let ds = Dataset::open(&a.data)?;
    let split = match a.split {
        SplitArg::Train => Split::Train,
        SplitArg::Validation => Split::Validation,
    };
    let model = a.checkpoint.as_deref().map(|p| load_model(p, a.nodes)).transpose()?;
    let norm = match &model {
        Some(m) => m.meta.norm,
        None => {
            let loss = ctx.file.loss.unwrap_or_default();
            let train = ds.load_split(Split::Train)?;
            compute_norm_stats(train.iter().map(|r| r.material()), loss.parameterization)?
        }
    };
    let predictor = match (a.predictor, &model) {
        (PredictorArg::Model, Some(m)) => Predictor::Model(m),
        (PredictorArg::Model, None) => return Err(Error::Config("--predictor model needs --checkpoint".into())),
        (PredictorArg::Mean, _) => Predictor::Mean(&norm),
        (PredictorArg::Oracle, _) => Predictor::Oracle(&norm),
    };
    let arch = model.as_ref().map(|m| m.network.architecture());
    let scenes = prepare_scenes(&ds, split, arch.as_ref())?;
    let report = evaluate(predictor, &scenes, ctx.seed())?;
    let path = ctx.out_or("reports").join("eval.json");
    write_json(&path, &report)?;
    let mut s = summary(&report);
    s["report"] = json!(path);
    Ok(s)
}

fn split_items(ds: &Dataset, split: Split) -> Result<Vec<(String, usize, SceneRecord)>> {
    let entries: Vec<_> = ds.entries(split).cloned().collect();
    let records = ds.load_split(split)?;
    Ok(entries.into_iter().zip(records).map(|(e, r)| (e.id, e.index, r)).collect())
}

fn run_sweep(a: &SweepArgs, ctx: &Ctx) -> Result<Value> {
    let ds = Dataset::open(&a.data)?;
    let model = load_model(&a.checkpoint, None)?;
    let items = split_items(&ds, Split::Validation)?;
    let views = a.views.clone().unwrap_or_else(|| ctx.file.sweep.views.clone());
    let voxels = a.voxels.clone().unwrap_or_else(|| ctx.file.sweep.voxels.clone());
    let r = coverage_sweep(&model, &items, &views, &voxels, ctx.seed())?;
    let out = ctx.out_or("reports");
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("coverage.csv"), r.to_csv())?;
    write_json(&out.join("coverage.json"), &r)?;
    Ok(serde_json::to_value(r)?)
}

fn run_render(a: &RenderArgs, ctx: &Ctx) -> Result<Value> {
    let ds = Dataset::open(&a.data)?;
    let model = load_model(&a.checkpoint, None)?;
    let entry = match &a.scene {
        Some(id) => ds
            .entries(Split::Validation)
            .find(|e| &e.id == id)
            .ok_or_else(|| Error::Config(format!("no validation scene '{id}'")))?,
        None => ds.entries(Split::Validation).next().ok_or_else(|| Error::Dataset("no validation scenes".into()))?,
    }
    .clone();
    let record = ds.load_scene(&entry)?;
    let shape = record.meta.spec.scene.shape;
    let scenes = vec![reflectance::training::PreparedScene::new(&entry.id, entry.index, record, &model.network.architecture())?];
    let report = evaluate(Predictor::Model(&model), &scenes, ctx.seed())?;
    let param = model.meta.norm.parameterization;
    let prediction = param.decode(&report.per_scene[0].prediction).0;
    let path = ctx.out_or("reports").join(format!("render_{}.ppm", entry.id));
    let r = render_comparison(scenes[0].target(), &prediction, &shape, &ctx.file.render, &path)?;
    let mut v = serde_json::to_value(r)?;
    v["parameter_rmse"] = json!(report.per_scene[0].rmse);
    Ok(v)
}

fn run_report(a: &ReportArgs, ctx: &Ctx) -> Result<Value> {
    let r = model_report(&a.checkpoint)?;
    if let Some(out) = &ctx.out {
        write_json(&out.join("report.json"), &r)?;
    }
    Ok(serde_json::to_value(r)?)
}

fn run_ablate(a: &AblateArgs, ctx: &Ctx) -> Result<Value> {
    let out = ctx.out_or("runs/ablate-ec");
    let (with, without) = match (&a.with, &a.without) {
        (Some(w), Some(wo)) => (w.clone(), wo.clone()),
        _ => {
            let mut opts = a.opts.clone();
            opts.model = opts.model.or(Some(ModelArg::GroupletSlow));
            let (ds, cfg, loss) = train_setup(&opts, ctx)?;
            let lambda = a.opts.lambda.unwrap_or(ctx.file.ablation.lambda);
            if lambda <= 0.0 {
                return Err(Error::Config("the regularized arm needs lambda > 0".into()));
            }
            let w = train(&ds, &cfg, &LossConfig { lambda, ..loss }, &out.join("with_ec"))?;
            let wo = train(&ds, &cfg, &LossConfig { lambda: 0.0, ..loss }, &out.join("without_ec"))?;
            (w.final_checkpoint, wo.final_checkpoint)
        }
    };
    let src = Dataset::open(&a.opts.data)?;
    let perturbed = out.join("perturbed");
    let range = scale_range(&a.scale_range, ctx);
    generate_perturbed_split(&src, &perturbed, range, ctx.seed())?;
    let pd = Dataset::open(&perturbed)?;
    let items = split_items(&pd, Split::Validation)?;
    let r = ablate_ec(&load_model(&with, None)?, &load_model(&without, None)?, &items, ctx.seed())?;
    let mut v = serde_json::to_value(&r)?;
    v["scale_range"] = json!(range);
    v["with_checkpoint"] = json!(with);
    v["without_checkpoint"] = json!(without);
    write_json(&out.join("ablation.json"), &v)?;
    Ok(v)
}

fn run_gradcheck(ctx: &Ctx) -> Result<Value> {
    let checks = gradient_suite(ctx.seed());
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if !failed.is_empty() {
        return Err(Error::NonFinite(format!("gradient checks failed: {}", failed.join(", "))));
    }
    Ok(json!({"checks": checks, "all_passed": true}))
}

fn run(cli: Cli) -> Result<Value> {
    let ctx = Ctx { seed: cli.seed, out: cli.out, file: FileConfig::load(cli.config.as_deref())? };
    match &cli.command {
        Command::GenData(a) => gen_data(a, &ctx),
        Command::Train(a) => run_train(a, &ctx),
        Command::Eval(a) => run_eval(a, &ctx),
        Command::Sweep(a) => run_sweep(a, &ctx),
        Command::Render(a) => run_render(a, &ctx),
        Command::Report(a) => run_report(a, &ctx),
        Command::AblateEc(a) => run_ablate(a, &ctx),
        Command::Gradcheck => run_gradcheck(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", json!({"error": {"kind": e.kind(), "message": e.to_string()}}));
            ExitCode::FAILURE
        }
    }
}
