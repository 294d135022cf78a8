//! Subcommand handlers. Each resolves its configuration, does the work through
//! `blm_core`, writes its outputs and then a manifest beside the primary one.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use blm_core::ablate::apply_structure;
use blm_core::embed::{load_table, pseudo_table, save_table, SLOTS};
use blm_core::lexicon::{
    audit_instance, generate_dataset, read_jsonl, split_dataset, write_jsonl, DataType, GenerateOptions, Instance,
    Lexicon, Phenomenon, Structure, Uniqueness,
};
use blm_core::llm::{build_prompts, resolve_responses, score_llm_run, PromptSpec, ResponseRecord};
use blm_core::nn::{grad_check, loss_grad_check, LossTarget, ModelKind, Network};
use blm_core::seed::rng_from;
use blm_core::train::{
    evaluate, prepare_all, sweep as run_sweep, train as run_train, write_reports_csv, ReportMeta, SweepCell,
    SweepConfig, TrainConfig, TrainError, DEFAULT_SIZES,
};
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{load_file, resolve};
use crate::manifest::RunManifest;
use crate::{
    AblateArgs, CliError, ConfigArg, EmbedImportArgs, EmbedPseudoArgs, EvalArgs, GenerateArgs, LlmPromptsArgs,
    LlmScoreArgs, SelftestArgs, SplitArgs, SweepArgs, TrainArgs,
};

type Result<T> = std::result::Result<T, CliError>;

fn load<F: Serialize, C: DeserializeOwned>(cfg: &ConfigArg, subcommand: &str, flags: &F) -> Result<C> {
    let file = cfg.config.as_deref().map(|p| load_file(p, subcommand)).transpose()?;
    resolve(file, flags)
}

fn train_error(e: TrainError) -> CliError {
    match e {
        TrainError::Numeric(_) | TrainError::NonFinite(_) => CliError::Numeric(e.to_string()),
        TrainError::InvalidConfig(msg) => CliError::Config(msg),
        other => CliError::Data(other.into()),
    }
}

fn data<E: std::error::Error + Send + Sync + 'static>(e: E) -> CliError {
    CliError::Data(e.into())
}

fn read_instances(path: &Path) -> Result<Vec<Instance>> {
    read_jsonl(path).with_context(|| format!("reading {}", path.display())).map_err(CliError::Data)
}

fn write_instances(path: &Path, items: &[Instance]) -> Result<()> {
    write_jsonl(path, items).with_context(|| format!("writing {}", path.display())).map_err(CliError::Data)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(data)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn finish(manifest: &mut RunManifest, inputs: &[&Path], outputs: &[&Path]) -> Result<()> {
    for p in inputs {
        manifest.input(p)?;
    }
    for p in outputs {
        manifest.output(p)?;
    }
    manifest.write_beside(outputs[0])?;
    Ok(())
}

/// Bring an instance into `target` form. Base instances are restructured;
/// instances already in `target` form pass through.
fn restructure(instances: &[Instance], target: Structure, seed: u64) -> Result<Vec<Instance>> {
    instances
        .iter()
        .map(|i| if i.structure == target { Ok(i.clone()) } else { apply_structure(i, target, seed).map_err(data) })
        .collect()
}

fn common_data_type(instances: &[Instance]) -> Option<DataType> {
    let first = instances.first()?.data_type;
    instances.iter().all(|i| i.data_type == first).then_some(first)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerateConfig {
    phenomenon: Phenomenon,
    data_type: DataType,
    count: usize,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default = "relaxed")]
    uniqueness: Uniqueness,
    #[serde(default)]
    lexicon: Option<PathBuf>,
    #[serde(default = "one")]
    jobs: usize,
    out: PathBuf,
}

fn default_seed() -> u64 {
    42
}

fn one() -> usize {
    1
}

fn relaxed() -> Uniqueness {
    Uniqueness::Relaxed
}

pub fn generate(args: GenerateArgs) -> Result<()> {
    let cfg: GenerateConfig = load(&args.cfg, "generate", &args)?;
    let lexicon = match &cfg.lexicon {
        Some(p) => Lexicon::load(p).map_err(data)?,
        None => Lexicon::builtin(),
    };
    let opts = GenerateOptions {
        phenomenon: cfg.phenomenon,
        data_type: cfg.data_type,
        count: cfg.count,
        seed: cfg.seed,
        uniqueness: cfg.uniqueness,
        jobs: cfg.jobs.max(1),
    };
    let instances = generate_dataset(&lexicon, &opts).map_err(data)?;
    write_instances(&cfg.out, &instances)?;
    let mut m = RunManifest::new("generate", &cfg)?;
    m.seed("generate", cfg.seed);
    let inputs: Vec<&Path> = cfg.lexicon.as_deref().into_iter().collect();
    finish(&mut m, &inputs, &[&cfg.out])
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitConfig {
    input: PathBuf,
    #[serde(default = "default_ratios")]
    ratios: Vec<f64>,
    #[serde(default = "default_seed")]
    seed: u64,
    out_dir: PathBuf,
}

fn default_ratios() -> Vec<f64> {
    vec![0.8, 0.1, 0.1]
}

pub fn split(args: SplitArgs) -> Result<()> {
    let cfg: SplitConfig = load(&args.cfg, "split", &args)?;
    let &[rt, rv, rs] = cfg.ratios.as_slice() else {
        return Err(CliError::Config(format!("ratios needs three values, got {}", cfg.ratios.len())));
    };
    let instances = read_instances(&cfg.input)?;
    let parts = split_dataset(instances, (rt, rv, rs), cfg.seed).map_err(data)?;
    std::fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let paths = ["train", "val", "test"].map(|n| cfg.out_dir.join(format!("{n}.jsonl")));
    write_instances(&paths[0], &parts.train)?;
    write_instances(&paths[1], &parts.val)?;
    write_instances(&paths[2], &parts.test)?;
    let mut m = RunManifest::new("split", &cfg)?;
    m.seed("split", cfg.seed);
    for p in &paths {
        m.output(p)?;
    }
    m.input(&cfg.input)?;
    m.write_beside(&cfg.out_dir.join("split"))?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AblateConfig {
    input: PathBuf,
    structure: Structure,
    #[serde(default = "default_seed")]
    seed: u64,
    out: PathBuf,
}

pub fn ablate(args: AblateArgs) -> Result<()> {
    let cfg: AblateConfig = load(&args.cfg, "ablate", &args)?;
    let instances = read_instances(&cfg.input)?;
    let out: Vec<Instance> = instances
        .iter()
        .map(|i| apply_structure(i, cfg.structure, cfg.seed))
        .collect::<std::result::Result<_, _>>()
        .map_err(data)?;
    write_instances(&cfg.out, &out)?;
    let mut m = RunManifest::new("ablate", &cfg)?;
    m.seed("structure", cfg.seed);
    finish(&mut m, &[&cfg.input], &[&cfg.out])
}

fn dataset_sentences(paths: &[PathBuf]) -> Result<BTreeSet<String>> {
    let mut texts = BTreeSet::new();
    for p in paths {
        for inst in read_instances(p)? {
            texts.extend(inst.sentences().map(str::to_string));
        }
    }
    Ok(texts)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbedPseudoConfig {
    datasets: Vec<PathBuf>,
    #[serde(default = "default_dim")]
    dim: usize,
    #[serde(default = "default_seed")]
    seed: u64,
    out: PathBuf,
}

fn default_dim() -> usize {
    768
}

pub fn embed_pseudo(args: EmbedPseudoArgs) -> Result<()> {
    let cfg: EmbedPseudoConfig = load(&args.cfg, "embed-pseudo", &args)?;
    let texts = dataset_sentences(&cfg.datasets)?;
    let table = pseudo_table(texts.iter().map(String::as_str), cfg.dim, cfg.seed).map_err(data)?;
    save_table(&table, &cfg.out).map_err(data)?;
    let mut m = RunManifest::new("embed-pseudo", &cfg)?;
    m.seed("embed", cfg.seed);
    let inputs: Vec<&Path> = cfg.datasets.iter().map(PathBuf::as_path).collect();
    finish(&mut m, &inputs, &[&cfg.out])
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbedImportConfig {
    input: PathBuf,
    #[serde(default)]
    datasets: Vec<PathBuf>,
    #[serde(default)]
    dim: Option<usize>,
    out: PathBuf,
}

pub fn embed_import(args: EmbedImportArgs) -> Result<()> {
    let cfg: EmbedImportConfig = load(&args.cfg, "embed-import", &args)?;
    let table = load_table(&cfg.input).map_err(data)?;
    if let Some(dim) = cfg.dim {
        if dim != table.dim() {
            return Err(CliError::Data(anyhow!(
                "{} holds {}-dim vectors, expected {dim}",
                cfg.input.display(),
                table.dim()
            )));
        }
    }
    let texts = dataset_sentences(&cfg.datasets)?;
    let missing: Vec<&String> = texts.iter().filter(|t| !table.contains(t)).collect();
    if let Some(first) = missing.first() {
        return Err(CliError::Data(anyhow!(
            "{} sentences have no embedding in {}, e.g. `{first}`",
            missing.len(),
            cfg.input.display()
        )));
    }
    save_table(&table, &cfg.out).map_err(data)?;
    let mut m = RunManifest::new("embed-import", &cfg)?;
    let mut inputs: Vec<&Path> = vec![&cfg.input];
    inputs.extend(cfg.datasets.iter().map(PathBuf::as_path));
    finish(&mut m, &inputs, &[&cfg.out])
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainCmdConfig {
    train: PathBuf,
    val: PathBuf,
    embeddings: PathBuf,
    #[serde(default = "base")]
    structure: Structure,
    #[serde(default = "default_seed")]
    structure_seed: u64,
    #[serde(default)]
    run: usize,
    #[serde(flatten)]
    training: TrainingConfig,
    out: PathBuf,
}

/// Hyperparameters shared by `train` and `sweep`; defaults follow [`TrainConfig`].
#[derive(Debug, Serialize, Deserialize)]
struct TrainingConfig {
    #[serde(default = "d_epochs")]
    epochs: usize,
    #[serde(default = "d_lr")]
    lr: f64,
    #[serde(default = "d_batch")]
    batch_size: usize,
    #[serde(default = "d_patience")]
    patience: usize,
    #[serde(default = "default_seed")]
    base_seed: u64,
    #[serde(default = "d_model")]
    model: ModelKind,
}

fn d_epochs() -> usize {
    TrainConfig::default().epochs
}
fn d_lr() -> f64 {
    TrainConfig::default().lr
}
fn d_batch() -> usize {
    TrainConfig::default().batch_size
}
fn d_patience() -> usize {
    TrainConfig::default().patience
}
fn d_model() -> ModelKind {
    ModelKind::Cnn
}
fn base() -> Structure {
    Structure::Base
}

impl TrainingConfig {
    fn to_train_config(&self, dim: usize, runs: usize) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            lr: self.lr,
            batch_size: self.batch_size,
            patience: self.patience,
            runs,
            base_seed: self.base_seed,
            model: self.model,
            dim,
        }
    }
}

/// `serde(flatten)` and `deny_unknown_fields` do not combine, so unknown keys
/// are caught here instead.
fn reject_unknown<T: Serialize>(
    cfg: &T,
    flags: &impl Serialize,
    file: &Option<PathBuf>,
    subcommand: &str,
) -> Result<()> {
    let known: BTreeSet<String> = match serde_json::to_value(cfg).map_err(data)? {
        serde_json::Value::Object(m) => m.keys().cloned().collect(),
        _ => BTreeSet::new(),
    };
    let mut given: BTreeSet<String> = match serde_json::to_value(flags).map_err(data)? {
        serde_json::Value::Object(m) => m.into_iter().filter(|(_, v)| !v.is_null()).map(|(k, _)| k).collect(),
        _ => BTreeSet::new(),
    };
    if let Some(p) = file {
        given.extend(load_file(p, subcommand)?.keys().cloned());
    }
    match given.iter().find(|k| !known.contains(*k)) {
        Some(k) => Err(CliError::Config(format!("unknown field `{k}`"))),
        None => Ok(()),
    }
}

pub fn train(args: TrainArgs) -> Result<()> {
    let cfg: TrainCmdConfig = load(&args.cfg, "train", &args)?;
    reject_unknown(&cfg, &args, &args.cfg.config, "train")?;
    let table = load_table(&cfg.embeddings).map_err(data)?;
    let train_inst = restructure(&read_instances(&cfg.train)?, cfg.structure, cfg.structure_seed)?;
    let val_inst = restructure(&read_instances(&cfg.val)?, cfg.structure, cfg.structure_seed)?;
    let train_set = prepare_all(&train_inst, &table).map_err(train_error)?;
    let val_set = prepare_all(&val_inst, &table).map_err(train_error)?;
    let tc = cfg.training.to_train_config(table.dim(), cfg.run + 1);
    let seed = tc.run_seed(cfg.run);
    let (net, history) = run_train(&tc, seed, &train_set, &val_set).map_err(train_error)?;
    net.save(&cfg.out).map_err(|e| CliError::Data(e.into()))?;
    let history_path = cfg.out.with_extension("history.csv");
    history.save_csv(&history_path).map_err(train_error)?;
    log::info!("best epoch {} of {}", history.best_epoch, history.epochs.len());
    let mut m = RunManifest::new("train", &cfg)?;
    m.seed("train", seed).seed("structure", cfg.structure_seed);
    finish(&mut m, &[&cfg.train, &cfg.val, &cfg.embeddings], &[&cfg.out, &history_path])
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalConfig {
    model: PathBuf,
    dataset: PathBuf,
    embeddings: PathBuf,
    #[serde(default = "base")]
    structure: Structure,
    #[serde(default = "default_seed")]
    structure_seed: u64,
    out: PathBuf,
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let cfg: EvalConfig = load(&args.cfg, "eval", &args)?;
    let net = Network::<f32>::load(&cfg.model).map_err(|e| CliError::Data(e.into()))?;
    let table = load_table(&cfg.embeddings).map_err(data)?;
    if table.dim() != net.dim() {
        return Err(CliError::Data(anyhow!("model dim {} does not match embedding dim {}", net.dim(), table.dim())));
    }
    let instances = restructure(&read_instances(&cfg.dataset)?, cfg.structure, cfg.structure_seed)?;
    let examples = prepare_all(&instances, &table).map_err(train_error)?;
    let meta = ReportMeta {
        model: Some(net.kind().to_string()),
        structure: Some(cfg.structure),
        data_type: common_data_type(&instances),
        ..ReportMeta::default()
    };
    let report = evaluate(&net, &examples, meta).map_err(train_error)?;
    write_json(&cfg.out, &report)?;
    let csv_path = cfg.out.with_extension("csv");
    write_csv(&csv_path, std::slice::from_ref(&report))?;
    let mut m = RunManifest::new("eval", &cfg)?;
    m.seed("structure", cfg.structure_seed);
    finish(&mut m, &[&cfg.model, &cfg.dataset, &cfg.embeddings], &[&cfg.out, &csv_path])
}

fn write_csv(path: &Path, reports: &[blm_core::train::EvalReport]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("writing {}", path.display()))?;
    write_reports_csv(reports, BufWriter::new(file)).map_err(train_error)
}

#[derive(Debug, Serialize, Deserialize)]
struct SweepCmdConfig {
    train: PathBuf,
    val: PathBuf,
    test: PathBuf,
    embeddings: PathBuf,
    #[serde(default = "default_sizes")]
    sizes: Vec<usize>,
    #[serde(default = "default_structures")]
    structures: Vec<Structure>,
    #[serde(default = "default_seed")]
    structure_seed: u64,
    #[serde(default = "d_runs")]
    runs: usize,
    #[serde(flatten)]
    training: TrainingConfig,
    #[serde(default = "one")]
    jobs: usize,
    out: PathBuf,
}

fn default_sizes() -> Vec<usize> {
    DEFAULT_SIZES.to_vec()
}
fn default_structures() -> Vec<Structure> {
    vec![Structure::Base]
}
fn d_runs() -> usize {
    TrainConfig::default().runs
}

pub fn sweep(args: SweepArgs) -> Result<()> {
    let cfg: SweepCmdConfig = load(&args.cfg, "sweep", &args)?;
    reject_unknown(&cfg, &args, &args.cfg.config, "sweep")?;
    let table = load_table(&cfg.embeddings).map_err(data)?;
    let raw = [&cfg.train, &cfg.val, &cfg.test].map(|p| read_instances(p));
    let [train_raw, val_raw, test_raw] = raw;
    let (train_raw, val_raw, test_raw) = (train_raw?, val_raw?, test_raw?);
    let mut cells = BTreeMap::new();
    for &s in &cfg.structures {
        let prep = |inst: &[Instance]| -> Result<_> {
            prepare_all(&restructure(inst, s, cfg.structure_seed)?, &table).map_err(train_error)
        };
        cells.insert(s, SweepCell { train: prep(&train_raw)?, val: prep(&val_raw)?, test: prep(&test_raw)? });
    }
    let sc = SweepConfig {
        sizes: cfg.sizes.clone(),
        structures: cfg.structures.clone(),
        train: cfg.training.to_train_config(table.dim(), cfg.runs),
        jobs: cfg.jobs.max(1),
    };
    let result = run_sweep(&sc, &cells, common_data_type(&test_raw)).map_err(train_error)?;
    write_json(&cfg.out, &result)?;
    let csv_path = cfg.out.with_extension("csv");
    let reports: Vec<_> = result.reports().cloned().collect();
    write_csv(&csv_path, &reports)?;
    let mut m = RunManifest::new("sweep", &cfg)?;
    m.seed("base", sc.train.base_seed).seed("structure", cfg.structure_seed);
    finish(&mut m, &[&cfg.train, &cfg.val, &cfg.test, &cfg.embeddings], &[&cfg.out, &csv_path])
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LlmPromptsConfig {
    input: PathBuf,
    #[serde(default)]
    shots: usize,
    #[serde(default)]
    cot: bool,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default)]
    shot_pool: Option<PathBuf>,
    out: PathBuf,
}

pub fn llm_prompts(args: LlmPromptsArgs) -> Result<()> {
    let cfg: LlmPromptsConfig = load(&args.cfg, "llm-prompts", &args)?;
    let instances = read_instances(&cfg.input)?;
    let shot_pool = match &cfg.shot_pool {
        Some(p) => read_instances(p)?,
        None => Vec::new(),
    };
    let spec = PromptSpec { shots: cfg.shots, cot: cfg.cot, seed: cfg.seed, shot_pool };
    let prompts = build_prompts(&instances, &spec).map_err(data)?;
    write_jsonl(&cfg.out, &prompts).map_err(data)?;
    let mut m = RunManifest::new("llm-prompts", &cfg)?;
    m.seed("shots", cfg.seed);
    let mut inputs: Vec<&Path> = vec![&cfg.input];
    inputs.extend(cfg.shot_pool.as_deref());
    finish(&mut m, &inputs, &[&cfg.out])
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LlmScoreConfig {
    responses: PathBuf,
    dataset: PathBuf,
    #[serde(default)]
    model_name: Option<String>,
    out: PathBuf,
}

pub fn llm_score(args: LlmScoreArgs) -> Result<()> {
    let cfg: LlmScoreConfig = load(&args.cfg, "llm-score", &args)?;
    let instances = read_instances(&cfg.dataset)?;
    let responses: Vec<ResponseRecord> = read_jsonl(&cfg.responses).map_err(data)?;
    let outcomes = resolve_responses(&responses, &instances).map_err(data)?;
    let meta = ReportMeta {
        model: cfg.model_name.clone(),
        structure: instances.first().map(|i| i.structure),
        data_type: common_data_type(&instances),
        ..ReportMeta::default()
    };
    let report = score_llm_run(&outcomes, &instances, meta).map_err(data)?;
    write_json(&cfg.out, &report)?;
    let csv_path = cfg.out.with_extension("csv");
    write_csv(&csv_path, std::slice::from_ref(&report))?;
    let outcomes_path = cfg.out.with_extension("outcomes.jsonl");
    write_jsonl(&outcomes_path, &outcomes).map_err(data)?;
    let mut m = RunManifest::new("llm-score", &cfg)?;
    finish(&mut m, &[&cfg.responses, &cfg.dataset], &[&cfg.out, &csv_path, &outcomes_path])
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SelftestConfig {
    #[serde(default = "d_selftest_count")]
    count: usize,
}

fn d_selftest_count() -> usize {
    200
}

const GRAD_TOLERANCE: f64 = 1e-4;

pub fn selftest(args: SelftestArgs) -> Result<()> {
    let cfg: SelftestConfig = load(&args.cfg, "selftest", &args)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut failures = Vec::new();

    let dim = 32;
    let mut rng = rng_from(2);
    let input: Vec<f64> = (0..SLOTS * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let target = LossTarget::random(dim, 3);
    for kind in [ModelKind::Cnn, ModelKind::Ffnn] {
        let net = Network::<f64>::new(kind, dim, 1).map_err(|e| CliError::Numeric(e.to_string()))?;
        let r = grad_check(&net, &input, &target, 1e-5, 300, 4).map_err(|e| CliError::Numeric(e.to_string()))?;
        let ok = r.max_rel_error < GRAD_TOLERANCE;
        writeln!(
            out,
            "{} gradcheck {kind}: max rel error {:.3e} over {} coordinates",
            tag(ok),
            r.max_rel_error,
            r.checked
        )
        .map_err(data)?;
        if !ok {
            failures.push(format!("{kind} gradient"));
        }
    }
    let r = loss_grad_check(&LossTarget::random(dim, 9).correct, &LossTarget::random(dim, 10), 1e-5)
        .map_err(|e| CliError::Numeric(e.to_string()))?;
    let ok = r.max_rel_error < GRAD_TOLERANCE;
    writeln!(out, "{} gradcheck loss: max rel error {:.3e}", tag(ok), r.max_rel_error).map_err(data)?;
    if !ok {
        failures.push("loss gradient".into());
    }

    let lexicon = Lexicon::builtin();
    for phenomenon in [Phenomenon::RollClass, Phenomenon::BakeClass] {
        for data_type in [DataType::TypeI, DataType::TypeII] {
            let opts = GenerateOptions::new(phenomenon, data_type, cfg.count, 42);
            let instances = generate_dataset(&lexicon, &opts).map_err(data)?;
            let bad: Vec<String> = instances.iter().filter_map(|i| audit_instance(&lexicon, i).err()).collect();
            let ok = bad.is_empty();
            writeln!(
                out,
                "{} taxonomy {phenomenon} type {data_type}: {} of {} instances conform",
                tag(ok),
                instances.len() - bad.len(),
                instances.len()
            )
            .map_err(data)?;
            if let Some(first) = bad.first() {
                writeln!(out, "  first violation: {first}").map_err(data)?;
                failures.push(format!("taxonomy {phenomenon} {data_type}"));
            }
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numeric(format!("selftest failed: {}", failures.join(", "))))
    }
}

fn tag(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}
