use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use gpstack::dataset::{
    hidden_latent_csv, labeled_csv, predictions_csv, read_arch_csv, read_predictions_csv,
    ArchRecord,
};
use gpstack::encoding::{RawArchitecture, SearchSpaceSchema};
use gpstack::metrics::{per_task_report, ScorePair, TauVariant};
use gpstack::pipeline::{predict_task, train_task, TrainReport};
use gpstack::rank_transform::BackTransform;
use gpstack::synthetic::{derive_seed, gen_task, CHALLENGE_N_TEST};
use gpstack::Ensemble;

use crate::config::PipelineConfig;
use crate::error::CliError;

pub const TRAIN_FILE: &str = "train.csv";
pub const TEST_FILE: &str = "test.csv";
pub const HIDDEN_FILE: &str = "hidden_latent.csv";
pub const ENSEMBLE_FILE: &str = "ensemble.json";
pub const REPORT_FILE: &str = "train_report.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Options shared by every command.
#[derive(Debug, Clone, Default)]
pub struct Common {
    pub config: Option<PathBuf>,
    pub tasks: Vec<u32>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
}

pub struct Context {
    pub cfg: PipelineConfig,
    pub tasks: Vec<u32>,
    pub seed: u64,
    pool: rayon::ThreadPool,
}

impl Context {
    pub fn new(common: &Common) -> Result<Self, CliError> {
        let cfg = PipelineConfig::load(common.config.as_deref())?;
        if let Some(&bad) = common.tasks.iter().find(|&&t| t == 0) {
            return Err(CliError::Config(format!(
                "--task {bad}: task ids start at 1"
            )));
        }
        let mut tasks = common.tasks.clone();
        tasks.sort_unstable();
        tasks.dedup();
        let jobs = common.jobs.or(cfg.global.jobs).unwrap_or(0);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
        Ok(Context {
            seed: common.seed.unwrap_or(cfg.global.seed),
            cfg,
            tasks,
            pool,
        })
    }

    /// Runs `f` for each task on the bounded pool. Results come back in task order, and the
    /// error of the lowest failing task wins.
    fn for_each_task<R, F>(&self, ids: &[u32], f: F) -> Result<Vec<R>, CliError>
    where
        R: Send,
        F: Fn(u32) -> Result<R, CliError> + Sync,
    {
        self.pool.install(|| {
            ids.par_iter()
                .map(|&id| f(id).map_err(|e| e.in_task(id)))
                .collect::<Vec<_>>()
                .into_iter()
                .collect()
        })
    }

    fn data_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.cfg.global.data_dir.clone())
            .unwrap_or_else(|| PathBuf::from("data"))
    }

    fn model_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.cfg.global.model_dir.clone())
            .unwrap_or_else(|| PathBuf::from("models"))
    }

    /// Explicit `--task` ids, or every `task<N>` directory under `root` holding `file`.
    fn tasks_in(&self, root: &Path, file: &str) -> Result<Vec<u32>, CliError> {
        if !self.tasks.is_empty() {
            return Ok(self.tasks.clone());
        }
        let entries = fs::read_dir(root).map_err(|e| CliError::io(root, e))?;
        let mut ids = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|e| CliError::io(root, e))?;
            let name = entry.file_name();
            let Some(id) = name
                .to_str()
                .and_then(|n| n.strip_prefix("task"))
                .and_then(|n| n.parse::<u32>().ok())
            else {
                continue;
            };
            if id > 0 && entry.path().join(file).is_file() {
                ids.push(id);
            }
        }
        ids.sort_unstable();
        if ids.is_empty() {
            return Err(CliError::Data(format!(
                "no task directories with {file} under {}",
                root.display()
            )));
        }
        Ok(ids)
    }
}

pub fn task_dir(root: &Path, id: u32) -> PathBuf {
    root.join(format!("task{id}"))
}

/// Writes through a temporary file in the target directory, then renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| CliError::io(path, e))?;
    tmp.as_file()
        .sync_all()
        .map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn read_records(
    path: &Path,
    schema: &SearchSpaceSchema,
    require_rank: bool,
) -> Result<Vec<ArchRecord>, CliError> {
    let text = read_file(path)?;
    read_arch_csv(text.as_bytes(), schema, require_rank)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(gpstack::Error::from)?;
    s.push('\n');
    Ok(s)
}

// synth-gen

#[derive(Debug, Serialize)]
struct ManifestEntry {
    task: u32,
    data_seed: u64,
    noise_sd: f64,
    n_train: usize,
    n_test: usize,
    dir: String,
}

#[derive(Debug, Serialize)]
struct Manifest {
    seed: u64,
    tasks: Vec<ManifestEntry>,
}

pub struct SynthGenArgs {
    pub out: Option<PathBuf>,
    pub n_test: Option<usize>,
    pub challenge_scale: bool,
}

pub fn synth_gen(ctx: &Context, args: &SynthGenArgs) -> Result<String, CliError> {
    let out = ctx.data_dir(args.out.as_deref());
    let ids = if ctx.tasks.is_empty() {
        (1..=ctx.cfg.synth.tasks).collect()
    } else {
        ctx.tasks.clone()
    };
    let n_test = match (args.n_test, args.challenge_scale) {
        (Some(_), true) => {
            return Err(CliError::Config(
                "--n-test and --challenge-scale are exclusive".into(),
            ));
        }
        (Some(n), false) => Some(n),
        (None, true) => Some(CHALLENGE_N_TEST),
        (None, false) => None,
    };
    let entries = ctx.for_each_task(&ids, |id| {
        let mut gen = ctx.cfg.generator(id, ctx.seed);
        if let Some(n) = n_test {
            gen.n_test = n;
        }
        let task = gen_task(&gen, id)?;
        let dir = task_dir(&out, id);
        write_atomic(
            &dir.join(TRAIN_FILE),
            labeled_csv(task.train.iter().map(|l| (&l.arch, l.rank))).as_bytes(),
        )?;
        write_atomic(
            &dir.join(TEST_FILE),
            labeled_csv(task.test.iter().map(|l| (&l.arch, l.rank))).as_bytes(),
        )?;
        write_atomic(&dir.join(HIDDEN_FILE), hidden_latent_csv(&task).as_bytes())?;
        Ok(ManifestEntry {
            task: id,
            data_seed: derive_seed(ctx.seed, u64::from(id)),
            noise_sd: gen.noise_sd,
            n_train: gen.n_train,
            n_test: gen.n_test,
            dir: format!("task{id}"),
        })
    })?;
    let manifest = Manifest {
        seed: ctx.seed,
        tasks: entries,
    };
    write_atomic(&out.join(MANIFEST_FILE), to_json(&manifest)?.as_bytes())?;

    let mut text = format!("seed {}\n", manifest.seed);
    for e in &manifest.tasks {
        text.push_str(&format!(
            "task {} data_seed {} noise_sd {} n_train {} n_test {} -> {}\n",
            e.task,
            e.data_seed,
            e.noise_sd,
            e.n_train,
            e.n_test,
            out.join(&e.dir).display()
        ));
    }
    Ok(text)
}

// train

pub struct TrainArgs {
    pub data: Option<PathBuf>,
    pub models: Option<PathBuf>,
    pub back_transform: Option<BackTransform>,
    pub tau: Option<TauVariant>,
}

#[derive(Debug, Serialize)]
struct TrainSummary<'a> {
    training_seed: u64,
    back_transform: BackTransform,
    tau: TauVariant,
    #[serde(flatten)]
    report: &'a TrainReport,
}

pub fn train(ctx: &Context, args: &TrainArgs) -> Result<String, CliError> {
    let data = ctx.data_dir(args.data.as_deref());
    let models = ctx.model_dir(args.models.as_deref());
    let ids = ctx.tasks_in(&data, TRAIN_FILE)?;
    let lines = ctx.for_each_task(&ids, |id| {
        let mut task = ctx.cfg.resolve(id, ctx.seed)?;
        if let Some(b) = args.back_transform {
            task.settings.stack.back_transform = b;
        }
        if let Some(t) = args.tau {
            task.settings.tau = t;
        }
        let records = read_records(&task_dir(&data, id).join(TRAIN_FILE), &ctx.cfg.schema, true)?;
        if records.is_empty() {
            return Err(CliError::Data(format!("{TRAIN_FILE} has no rows")));
        }
        let rows: Vec<(RawArchitecture, usize)> = records
            .into_iter()
            .map(|r| (r.arch, r.rank.expect("rank column required")))
            .collect();
        let (ensemble, report) = train_task::<f64>(id, &rows, &ctx.cfg.schema, &task.settings)?;

        let dir = task_dir(&models, id);
        write_atomic(&dir.join(ENSEMBLE_FILE), ensemble.to_json()?.as_bytes())?;
        let summary = TrainSummary {
            training_seed: task.training_seed,
            back_transform: task.settings.stack.back_transform,
            tau: task.settings.tau,
            report: &report,
        };
        write_atomic(&dir.join(REPORT_FILE), to_json(&summary)?.as_bytes())?;

        let mut text = format!(
            "task {id}: n_train {} folds {} seed {} dropped {:?}\n",
            report.n_train, report.folds, task.training_seed, report.dropped_columns
        );
        for s in &report.submodels {
            text.push_str(&format!(
                "  {:<12} oof_tau {:>8.4}  meta_weight {:>8.4}\n",
                s.name, s.oof_tau, s.meta_weight
            ));
        }
        text.push_str(&format!(
            "  {:<12} {:>25.4}\n",
            "intercept", report.meta_intercept
        ));
        Ok(text)
    })?;
    Ok(lines.concat())
}

// predict

pub struct PredictArgs {
    pub data: Option<PathBuf>,
    pub models: Option<PathBuf>,
    pub n_test: Option<usize>,
    pub back_transform: Option<BackTransform>,
}

pub fn load_ensemble(path: &Path) -> Result<Ensemble, CliError> {
    let text = read_file(path)?;
    Ensemble::from_json(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn predict(ctx: &Context, args: &PredictArgs) -> Result<String, CliError> {
    let data = ctx.data_dir(args.data.as_deref());
    let models = ctx.model_dir(args.models.as_deref());
    let ids = ctx.tasks_in(&models, ENSEMBLE_FILE)?;
    let lines = ctx.for_each_task(&ids, |id| {
        let mut ensemble = load_ensemble(&task_dir(&models, id).join(ENSEMBLE_FILE))?;
        if let Some(b) = args.back_transform {
            ensemble.transform.back_transform = b;
        }
        let schema = ensemble
            .features
            .as_ref()
            .map(|f| f.schema.clone())
            .ok_or_else(|| CliError::Data("ensemble has no feature specification".into()))?;
        // a rank column, if present, is ignored
        let records = read_records(&task_dir(&data, id).join(TEST_FILE), &schema, false)?;
        let n_test = args.n_test.unwrap_or(records.len());
        if n_test < records.len() {
            return Err(CliError::Config(format!(
                "--n-test {n_test} is smaller than the {} rows to rank",
                records.len()
            )));
        }
        let archs: Vec<RawArchitecture> = records.iter().map(|r| r.arch.clone()).collect();
        let ranks = predict_task(&ensemble, &archs, n_test)?;
        let csv = predictions_csv(records.iter().map(|r| r.text.as_str()).zip(ranks));
        let out = task_dir(&models, id).join(PREDICTIONS_FILE);
        write_atomic(&out, csv.as_bytes())?;
        Ok(format!(
            "task {id}: {} rows ranked among n_test {n_test} ({} back-transform) -> {}\n",
            records.len(),
            ensemble.transform.back_transform,
            out.display()
        ))
    })?;
    Ok(lines.concat())
}

// evaluate

pub struct EvaluateArgs {
    pub data: Option<PathBuf>,
    pub models: Option<PathBuf>,
    pub tau: Option<TauVariant>,
    pub report: Option<PathBuf>,
}

fn list_offenders(keys: &[&str]) -> String {
    const SHOWN: usize = 10;
    let mut s = keys
        .iter()
        .take(SHOWN)
        .copied()
        .collect::<Vec<_>>()
        .join(", ");
    if keys.len() > SHOWN {
        s.push_str(&format!(" and {} more", keys.len() - SHOWN));
    }
    s
}

fn duplicates<'a>(keys: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for k in keys {
        *seen.entry(k).or_default() += 1;
    }
    seen.into_iter()
        .filter(|&(_, c)| c > 1)
        .map(|(k, _)| k)
        .collect()
}

/// Pairs predicted and true ranks by architecture string.
pub fn join_on_arch(
    predicted: &[(String, usize)],
    truth: &[(String, usize)],
) -> Result<ScorePair<f64>, CliError> {
    let dup_p = duplicates(predicted.iter().map(|(a, _)| a.as_str()));
    if !dup_p.is_empty() {
        return Err(CliError::Data(format!(
            "duplicate arch in predictions: {}",
            list_offenders(&dup_p)
        )));
    }
    let dup_t = duplicates(truth.iter().map(|(a, _)| a.as_str()));
    if !dup_t.is_empty() {
        return Err(CliError::Data(format!(
            "duplicate arch in truth: {}",
            list_offenders(&dup_t)
        )));
    }
    let pred: HashMap<&str, usize> = predicted.iter().map(|(a, r)| (a.as_str(), *r)).collect();
    let known: HashMap<&str, usize> = truth.iter().map(|(a, r)| (a.as_str(), *r)).collect();
    let missing: Vec<&str> = truth
        .iter()
        .map(|(a, _)| a.as_str())
        .filter(|a| !pred.contains_key(a))
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Data(format!(
            "arch missing from predictions: {}",
            list_offenders(&missing)
        )));
    }
    let extra: Vec<&str> = predicted
        .iter()
        .map(|(a, _)| a.as_str())
        .filter(|a| !known.contains_key(a))
        .collect();
    if !extra.is_empty() {
        return Err(CliError::Data(format!(
            "arch not in truth: {}",
            list_offenders(&extra)
        )));
    }
    Ok(ScorePair {
        predicted: truth.iter().map(|(a, _)| pred[a.as_str()] as f64).collect(),
        actual: truth.iter().map(|(_, r)| *r as f64).collect(),
    })
}

pub fn evaluate(ctx: &Context, args: &EvaluateArgs) -> Result<String, CliError> {
    let data = ctx.data_dir(args.data.as_deref());
    let models = ctx.model_dir(args.models.as_deref());
    let ids = ctx.tasks_in(&models, PREDICTIONS_FILE)?;
    let pairs = ctx.for_each_task(&ids, |id| {
        let pred_path = task_dir(&models, id).join(PREDICTIONS_FILE);
        let predicted = read_predictions_csv(read_file(&pred_path)?.as_bytes())
            .map_err(|e| CliError::Data(format!("{}: {e}", pred_path.display())))?;
        let truth_path = task_dir(&data, id).join(TEST_FILE);
        let truth: Vec<(String, usize)> = read_records(&truth_path, &ctx.cfg.schema, true)?
            .into_iter()
            .map(|r| (r.text, r.rank.expect("rank column required")))
            .collect();
        Ok((id, join_on_arch(&predicted, &truth)?))
    })?;
    let variant = args.tau.unwrap_or_else(|| {
        // a tau variant shared by every evaluated task's config, else tau-b
        let chosen: Vec<TauVariant> = ids
            .iter()
            .filter_map(|&id| ctx.cfg.resolve(id, ctx.seed).ok().map(|t| t.settings.tau))
            .collect();
        match chosen.first() {
            Some(&v) if chosen.iter().all(|&c| c == v) => v,
            _ => TauVariant::B,
        }
    });
    let report = per_task_report(&pairs, variant)?;
    if let Some(path) = &args.report {
        write_atomic(path, to_json(&report)?.as_bytes())?;
    }
    Ok(report.to_text())
}
