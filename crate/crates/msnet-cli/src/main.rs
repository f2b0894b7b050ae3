//! `msnet`: synthesize data, train, predict, evaluate and benchmark the
//! multi-slice aggregation network from the command line.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use msnet::data::{
    generate_synthetic, load_manifest, read_volume, write_manifest, write_volume, LabeledVolume,
    Manifest, ManifestEntry, SplitTag, SynthConfig,
};
use msnet::gradcheck::{check_model_gradients, random_volume, DEFAULT_STEP, DEFAULT_TOLERANCE};
use msnet::model::{
    doubling_dilations, load_checkpoint, save_checkpoint, MsNetArch, MsNetModel,
    REFERENCE_PARAM_COUNT,
};
use msnet::train::{benchmark, evaluate, train_with_split, ClassWeighting, TrainConfig};
use msnet::{ClassWeights, DiagnosisLabel};

#[derive(Parser)]
#[command(name = "msnet", version, about = "Multi-slice aggregation network for patient-level CT diagnosis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic feature volumes and a manifest
    Synth(SynthArgs),
    /// Train on a manifest and save the best-validation checkpoint
    Train(TrainArgs),
    /// Diagnose a single volume file
    Predict(PredictArgs),
    /// Confusion matrix, sensitivity and accuracy over a manifest
    Evaluate(EvaluateArgs),
    /// Time 32-bit inference on synthetic volumes
    Bench(BenchArgs),
    /// Check full-model gradients against finite differences
    Gradcheck(GradcheckArgs),
    /// Print the closed-form and instantiated parameter counts
    Paramcount(ArchArgs),
}

#[derive(clap::Args)]
struct ArchArgs {
    /// Kernel size of the input projection (odd)
    #[arg(long, default_value_t = 1)]
    init_kernel: usize,
    /// Number of dilated residual blocks (dilations 1, 2, 4, ...)
    #[arg(long, default_value_t = 4)]
    blocks: usize,
}

impl ArchArgs {
    fn arch(&self) -> MsNetArch {
        MsNetArch {
            initial_conv_kernel: self.init_kernel,
            ..MsNetArch::with_blocks(self.blocks)
        }
    }
}

#[derive(clap::Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    /// Patients per class as COVID,CAP,NORMAL
    #[arg(long, default_value = "171,60,76", value_parser = parse_triple::<usize>)]
    per_class: [usize; 3],
    #[arg(long, default_value_t = 100)]
    min_slices: usize,
    #[arg(long, default_value_t = 200)]
    max_slices: usize,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 2.0)]
    signal: f64,
    /// Infected band fraction per class as COVID,CAP,NORMAL
    #[arg(long, default_value = "0.3,0.15,0", value_parser = parse_triple::<f64>)]
    band: [f64; 3],
    #[arg(long, default_value_t = 2048)]
    feature_dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightMode {
    Balanced,
    None,
}

#[derive(clap::Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    epochs: u64,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Used only when the manifest has no `val` rows
    #[arg(long, default_value_t = 0.3)]
    val_fraction: f64,
    #[arg(long, value_enum, default_value = "balanced")]
    class_weights: WeightMode,
    #[arg(long, default_value = "model.msnt")]
    out: PathBuf,
    /// Training log path (default: the checkpoint path with a .json extension)
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    arch: ArchArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Precision {
    F64,
    F32,
}

#[derive(clap::Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    volume: PathBuf,
    #[arg(long, value_enum, default_value = "f64")]
    precision: Precision,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitSel {
    All,
    Train,
    Val,
    Test,
}

#[derive(clap::Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    split: SplitSel,
    /// Write the JSON report here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct BenchArgs {
    /// Checkpoint to time; a freshly initialized default network otherwise
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 268)]
    volumes: usize,
    #[arg(long, default_value_t = 100)]
    min_slices: usize,
    #[arg(long, default_value_t = 200)]
    max_slices: usize,
    #[arg(long, default_value_t = 1)]
    repetitions: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 40)]
    slices: usize,
    #[arg(long, default_value_t = 8)]
    input_channels: usize,
    #[arg(long, default_value_t = 4)]
    block_channels: usize,
    /// Finite-difference step (shrunk automatically near ReLU/max-pool kinks)
    #[arg(long, default_value_t = DEFAULT_STEP)]
    step: f64,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
}

fn parse_triple<T: std::str::FromStr>(s: &str) -> Result<[T; 3], String>
where
    T::Err: std::fmt::Display,
{
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated values, got {s:?}"));
    }
    let mut out = Vec::with_capacity(3);
    for p in parts {
        out.push(p.trim().parse::<T>().map_err(|e| format!("{p:?}: {e}"))?);
    }
    out.try_into().map_err(|_| unreachable!())
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let is_usage = matches!(
            e.downcast_ref::<msnet::Error>(),
            Some(msnet::Error::InvalidConfig(_) | msnet::Error::InvalidArch(_))
        );
        if is_usage {
            Failure::Usage(format!("{e:#}"))
        } else {
            Failure::Runtime(e)
        }
    }
}

impl From<msnet::Error> for Failure {
    fn from(e: msnet::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

type CmdResult = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train_cmd(a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Bench(a) => bench(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Paramcount(a) => paramcount(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn synth(a: SynthArgs) -> CmdResult {
    let config = SynthConfig {
        patients_per_class: a.per_class,
        slice_range: (a.min_slices, a.max_slices),
        noise_sigma: a.noise,
        signal_strength: a.signal,
        infected_band_fraction: a.band,
        feature_dim: a.feature_dim,
        seed: a.seed,
    };
    config.validate()?;
    fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("creating {}", a.out_dir.display()))?;
    let data = generate_synthetic(&config)?;
    let mut manifest = Manifest::default();
    for d in &data {
        let path = a.out_dir.join(format!("{}.fvol", d.volume.patient_id));
        write_volume(&d.volume, &path).with_context(|| format!("writing {}", path.display()))?;
        manifest.entries.push(ManifestEntry {
            patient_id: d.volume.patient_id.clone(),
            path,
            label: d.label,
            split: SplitTag::Train,
        });
    }
    let manifest_path = a.out_dir.join("manifest.csv");
    write_manifest(&manifest, &manifest_path)?;
    println!(
        "wrote {} volumes (COVID {}, CAP {}, NORMAL {}) and {}",
        data.len(),
        a.per_class[0],
        a.per_class[1],
        a.per_class[2],
        manifest_path.display()
    );
    Ok(())
}

fn load_entries<'a>(entries: impl IntoIterator<Item = &'a ManifestEntry>) -> anyhow::Result<Vec<LabeledVolume>> {
    Ok(Manifest::load_volumes(entries)?)
}

fn train_cmd(a: TrainArgs) -> CmdResult {
    let config = TrainConfig {
        lr: a.lr,
        epochs: a.epochs as usize,
        seed: a.seed,
        class_weighting: match a.class_weights {
            WeightMode::Balanced => ClassWeighting::Balanced,
            WeightMode::None => ClassWeighting::None,
        },
        val_fraction: a.val_fraction,
        shuffle_each_epoch: true,
        arch: a.arch.arch(),
    };
    config.validate()?;
    let manifest = load_manifest(&a.manifest)
        .with_context(|| format!("loading manifest {}", a.manifest.display()))?;

    let (train_set, val_set) = if manifest.with_split(SplitTag::Val).next().is_some() {
        (
            load_entries(manifest.with_split(SplitTag::Train))?,
            load_entries(manifest.with_split(SplitTag::Val))?,
        )
    } else {
        let all = load_entries(manifest.with_split(SplitTag::Train))?;
        msnet::data::split_dataset(all, |d| d.label, config.val_fraction, config.seed)?
    };
    if train_set.is_empty() || val_set.is_empty() {
        return Err(usage(format!(
            "need non-empty train and validation sets, got {} / {}",
            train_set.len(),
            val_set.len()
        )));
    }
    println!("training on {} volumes, validating on {}", train_set.len(), val_set.len());

    let train_refs: Vec<_> = train_set.iter().collect();
    let val_refs: Vec<_> = val_set.iter().collect();
    let outcome = match train_with_split(&train_refs, &val_refs, &config) {
        Ok(o) => o,
        Err(msnet::Error::Diverged {
            epoch,
            step,
            loss,
            last_finite,
        }) => {
            let path = a.out.with_extension("last_finite.msnt");
            save_checkpoint(&last_finite, &path)?;
            return Err(Failure::Runtime(anyhow::anyhow!(
                "training diverged at epoch {epoch}, step {step} (loss {loss}); last finite parameters saved to {}",
                path.display()
            )));
        }
        Err(e) => return Err(e.into()),
    };

    save_checkpoint(&outcome.best, &a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    let log_path = a.log.unwrap_or_else(|| a.out.with_extension("json"));
    fs::write(&log_path, serde_json::to_string_pretty(&outcome.log).map_err(anyhow::Error::from)?)
        .with_context(|| format!("writing {}", log_path.display()))?;
    for e in &outcome.log.epochs {
        println!("epoch {:>4}  train loss {:.6}  val accuracy {:.4}", e.epoch, e.train_loss, e.val_accuracy);
    }
    println!(
        "best epoch {} with val accuracy {:.4}; checkpoint {}, log {}",
        outcome.log.best_epoch,
        outcome.log.best_val_accuracy,
        a.out.display(),
        log_path.display()
    );
    Ok(())
}

fn predict(a: PredictArgs) -> CmdResult {
    let model = load_checkpoint(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let volume = read_volume(&a.volume).with_context(|| format!("reading {}", a.volume.display()))?;
    let (label, probs): (DiagnosisLabel, Vec<f64>) = match a.precision {
        Precision::F64 => model.predict(&volume)?,
        Precision::F32 => {
            let (l, p) = model.inference::<f32>().predict(&volume)?;
            (l, p.into_iter().map(f64::from).collect())
        }
    };
    let out = serde_json::json!({
        "patient_id": volume.patient_id,
        "slices": volume.len(),
        "label": label,
        "probs": probs,
    });
    println!("{}", serde_json::to_string_pretty(&out).map_err(anyhow::Error::from)?);
    Ok(())
}

fn evaluate_cmd(a: EvaluateArgs) -> CmdResult {
    let model = load_checkpoint(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let manifest = load_manifest(&a.manifest)
        .with_context(|| format!("loading manifest {}", a.manifest.display()))?;
    let tag = match a.split {
        SplitSel::All => None,
        SplitSel::Train => Some(SplitTag::Train),
        SplitSel::Val => Some(SplitTag::Val),
        SplitSel::Test => Some(SplitTag::Test),
    };
    let data = load_entries(manifest.entries.iter().filter(|e| tag.map_or(true, |t| e.split == t)))?;
    if data.is_empty() {
        return Err(usage("no manifest rows match the selected split"));
    }
    let report = evaluate(&model, &data)?;
    print!("{}", report.summary());
    if let Some(out) = a.out {
        write_json(&out, &report)?;
    }
    Ok(())
}

fn bench(a: BenchArgs) -> CmdResult {
    if a.volumes == 0 || a.repetitions == 0 {
        return Err(usage("--volumes and --repetitions must be at least 1"));
    }
    let model = match &a.model {
        Some(p) => load_checkpoint(p).with_context(|| format!("loading {}", p.display()))?,
        None => MsNetModel::init(MsNetArch::default(), a.seed)?,
    };
    let per = a.volumes / 3;
    let per_class = [a.volumes - 2 * per, per, per];
    let config = SynthConfig {
        patients_per_class: per_class,
        slice_range: (a.min_slices, a.max_slices),
        feature_dim: model.arch().input_channels,
        seed: a.seed,
        ..SynthConfig::default()
    };
    config.validate()?;
    let volumes: Vec<_> = generate_synthetic(&config)?.into_iter().map(|d| d.volume).collect();
    let report = benchmark(&model, &volumes, a.repetitions)?;
    let t = &report.timing;
    println!(
        "{} volumes x {} repetition(s), slices {}..={}",
        volumes.len(),
        a.repetitions,
        a.min_slices,
        a.max_slices
    );
    println!(
        "total {:.4} s  mean {:.3} ms  p50 {:.3} ms  p95 {:.3} ms  deterministic {}",
        t.total_seconds,
        1e3 * t.mean_seconds,
        1e3 * t.p50_seconds,
        1e3 * t.p95_seconds,
        report.deterministic
    );
    if let Some(out) = a.out {
        write_json(&out, &report)?;
    }
    Ok(())
}

fn gradcheck(a: GradcheckArgs) -> CmdResult {
    if a.slices == 0 {
        return Err(usage("--slices must be at least 1"));
    }
    if !(a.step > 0.0 && a.step.is_finite()) {
        return Err(usage("--step must be positive"));
    }
    let arch = MsNetArch {
        dilations: doubling_dilations(4),
        ..MsNetArch::tiny(a.input_channels, a.block_channels)
    };
    let model = MsNetModel::init(arch, a.seed)?;
    let volume = random_volume(a.slices, a.input_channels, a.seed.wrapping_add(1))?;
    let weights = ClassWeights([0.8, 1.4, 1.1]);
    let mut worst = 0.0f64;
    let mut ok = true;
    for label in DiagnosisLabel::ALL {
        let r = check_model_gradients(&model, &volume, label, &weights, a.step)?;
        println!(
            "{label:<7} {} params  max relative error {:.3e} (param {}: analytic {:.6e}, numeric {:.6e})  \
             smaller step {}, skipped {}",
            r.n_params,
            r.max_relative_error,
            r.worst_index,
            r.analytic_at_worst,
            r.numeric_at_worst,
            r.reduced_steps,
            r.skipped
        );
        worst = worst.max(r.max_relative_error);
        ok &= r.passes(a.tolerance);
    }
    if !ok {
        return Err(Failure::Runtime(anyhow::anyhow!(
            "gradient check failed: max relative error {worst:.3e} (tolerance {:.1e}) or unchecked parameters",
            a.tolerance
        )));
    }
    println!("ok: max relative error {worst:.3e} < {:.1e}", a.tolerance);
    Ok(())
}

fn paramcount(a: ArchArgs) -> CmdResult {
    let arch = a.arch();
    arch.validate()?;
    let formula = arch.param_count();
    let instantiated = MsNetModel::init(arch.clone(), 0)?.param_count();
    println!("closed form:   {}", thousands(formula));
    println!("instantiated:  {}", thousands(instantiated));
    let delta = REFERENCE_PARAM_COUNT.abs_diff(formula);
    let relation = if formula <= REFERENCE_PARAM_COUNT { "above" } else { "below" };
    println!(
        "published:     {} ({} {relation} the closed form)",
        thousands(REFERENCE_PARAM_COUNT),
        thousands(delta)
    );
    println!("receptive field: {} slices", arch.receptive_field());
    if formula != instantiated {
        return Err(Failure::Runtime(anyhow::anyhow!(
            "closed form {formula} != instantiated {instantiated}"
        )));
    }
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)
        .with_context(|| format!("writing {}", path.display()))
}

fn thousands(n: usize) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, ch) in s.chars().enumerate() {
        if i > 0 && (s.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}
