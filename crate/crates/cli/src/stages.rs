//! Pipeline stages behind the subcommands.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use sewerbench::errgen::{fence_stats, perturb, write_masks_csv, ErrorKind, ErrorSpec};
use sewerbench::evaluate::{
    perturbable_features, read_records_jsonl, robustness_sweep, tradeoff_indices,
    write_records_jsonl, EvalRecord, ModelIndices, ModelKey, SweepConfig, TradeoffIndices,
    TrialSet,
};
use sewerbench::forecast::{build_windows, fit, measure_complexity, ForecasterHandle, Mode};
use sewerbench::io::{load_frame, read_csv, save_frame, write_csv, Schema};
use sewerbench::plugin::PluginForecaster;
use sewerbench::preprocess::{interpolate_missing, make_placeholder_future, split, Segments};
use sewerbench::synth::generate;
use sewerbench::{Error, Result, Role, TimeSeriesFrame};

use crate::config::{FenceSource, RunConfig};
use crate::report::{write_reports, Stamp};

pub const DATA_CSV: &str = "data.csv";
pub const DATA_SCHEMA: &str = "data.schema.toml";
pub const MODELS_DIR: &str = "models";
pub const MANIFEST: &str = "manifest.json";
pub const RECORDS: &str = "records.jsonl";
pub const COMPLEXITY: &str = "complexity.json";
pub const INDICES: &str = "indices.json";
pub const REPORT_DIR: &str = "report";

/// A loaded configuration and where its artifacts go.
pub struct Run {
    pub cfg: RunConfig,
    pub hash: String,
    /// Directory of the config file; relative paths resolve against it.
    pub base: PathBuf,
    pub out: PathBuf,
}

impl Run {
    pub fn new(cfg: RunConfig, base: PathBuf, out: PathBuf) -> Self {
        Self {
            hash: cfg.hash(),
            cfg,
            base,
            out,
        }
    }

    fn stamp(&self) -> Stamp {
        Stamp {
            config_hash: self.hash.clone(),
            seed_base: self.cfg.seed_base,
        }
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    /// The raw dataset, before interpolation.
    pub fn dataset(&self) -> Result<TimeSeriesFrame> {
        let ds = &self.cfg.dataset;
        if let Some(s) = &ds.synth {
            return generate(s);
        }
        let csv = self.resolve(ds.csv.as_deref().expect("validated"));
        let schema = match &ds.schema {
            Some(s) => Some(self.resolve(s)),
            None => {
                let guess = csv.with_extension("schema.toml");
                guess.exists().then_some(guess)
            }
        };
        load_frame(&csv, schema.as_deref())
    }

    /// Dataset with gaps interpolated (when enabled).
    pub fn prepared(&self) -> Result<TimeSeriesFrame> {
        let frame = self.dataset()?;
        if !self.cfg.interpolate {
            return Ok(frame);
        }
        let gappy: Vec<String> = frame
            .channels()
            .iter()
            .enumerate()
            .filter(|(i, c)| c.role != Role::ImputationIndicator && frame.missing_count(*i) > 0)
            .map(|(_, c)| c.name.clone())
            .collect();
        if gappy.is_empty() {
            return Ok(frame);
        }
        let names: Vec<&str> = gappy.iter().map(String::as_str).collect();
        interpolate_missing(&frame, &names)
    }

    /// Train / validation / test segments for one mode. Local mode adds the
    /// placeholder covariate before splitting so no segment loses its head.
    pub fn segments(&self, frame: &TimeSeriesFrame, mode: Mode) -> Result<Segments> {
        let frame = match mode {
            Mode::Global => frame.clone(),
            Mode::Local => make_placeholder_future(frame, self.cfg.task.horizon)?,
        };
        let at = self.cfg.split.resolve(&frame)?;
        split(&frame, &at)
    }
}

/// `synth`: write the generated dataset and its schema.
pub fn synth(run: &Run) -> Result<Vec<PathBuf>> {
    let s = run.cfg.dataset.synth.as_ref().ok_or_else(|| {
        Error::InvalidArgument("dataset is not synthetic; nothing to generate".into())
    })?;
    fs::create_dir_all(&run.out)?;
    let frame = generate(s)?;
    let mut schema = Schema::of(&frame);
    schema.meta.insert("config_hash".into(), run.hash.clone());
    schema.meta.insert("seed".into(), s.seed.to_string());
    let csv = run.out.join(DATA_CSV);
    let sidecar = run.out.join(DATA_SCHEMA);
    write_csv(&frame, BufWriter::new(File::create(&csv)?))?;
    schema.save(&sidecar)?;
    Ok(vec![csv, sidecar])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub model_type: String,
    pub mode: Mode,
    pub seed: u64,
    pub file: String,
    pub param_count: usize,
    pub size_bytes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_epoch: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed_base: u64,
    pub models: Vec<ManifestEntry>,
}

/// `train`: fit every (family, mode, seed) and store the models.
pub fn train(run: &Run) -> Result<Vec<PathBuf>> {
    let frame = run.prepared()?;
    let dir = run.out.join(MODELS_DIR);
    fs::create_dir_all(&dir)?;
    let families = run.cfg.families();
    let seeds = run.cfg.seeds();
    let mut jobs = Vec::new();
    for &mode in &run.cfg.modes {
        let seg = run.segments(&frame, mode)?;
        let task = run.cfg.task.with_mode(mode);
        let train_w = Arc::new(build_windows(&seg.train, &task)?);
        let val_w = Arc::new(build_windows(&seg.val, &task)?);
        for &family in &families {
            for &seed in &seeds {
                jobs.push((family, mode, seed, train_w.clone(), val_w.clone()));
            }
        }
    }
    let fitted: Vec<Result<(ManifestEntry, Vec<u8>)>> = jobs
        .par_iter()
        .map(|(family, mode, seed, tr, va)| {
            let handle = fit(*family, tr, va, &run.cfg.model.with_seed(*seed))?;
            let bytes = handle.to_bytes()?;
            let entry = ManifestEntry {
                model_type: family.name().into(),
                mode: *mode,
                seed: *seed,
                file: format!("{}__{}__{}.swbm", family.name(), mode.label(), seed),
                param_count: handle.param_count(),
                size_bytes: bytes.len(),
                best_epoch: handle.history.as_ref().map(|h| h.best_epoch),
            };
            Ok((entry, bytes))
        })
        .collect();
    let mut manifest = Manifest {
        config_hash: run.hash.clone(),
        seed_base: run.cfg.seed_base,
        models: Vec::new(),
    };
    let mut written = Vec::new();
    let mut first_error = None;
    for f in fitted {
        match f {
            Ok((entry, bytes)) => {
                let path = dir.join(&entry.file);
                fs::write(&path, bytes)?;
                written.push(path);
                manifest.models.push(entry);
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    // the manifest lists whatever was trained, even when a fit failed
    let path = dir.join(MANIFEST);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    written.push(path);
    match first_error {
        Some(e) => Err(e),
        None => Ok(written),
    }
}

fn load_manifest(run: &Run) -> Result<Manifest> {
    let path = run.out.join(MODELS_DIR).join(MANIFEST);
    let file = File::open(&path).map_err(|e| {
        Error::InvalidArgument(format!("{}: {e}; run `train` first", path.display()))
    })?;
    let manifest: Manifest = serde_json::from_reader(BufReader::new(file))?;
    if manifest.config_hash != run.hash {
        return Err(Error::InvalidArgument(format!(
            "models were trained under config {}, current config is {}",
            manifest.config_hash, run.hash
        )));
    }
    Ok(manifest)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplexityEntry {
    pub model_type: String,
    pub mode: Mode,
    pub inference_seconds: f64,
    pub size_bytes: usize,
    pub param_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplexityFile {
    #[serde(default)]
    pub config_hash: String,
    #[serde(default)]
    pub seed_base: u64,
    pub models: Vec<ComplexityEntry>,
}

/// `evaluate`: run the robustness sweep and time every model.
pub fn evaluate(run: &Run) -> Result<Vec<PathBuf>> {
    let manifest = load_manifest(run)?;
    let frame = run.prepared()?;
    let mut records = Vec::new();
    let mut complexity = Vec::new();
    for &mode in &run.cfg.modes {
        let seg = run.segments(&frame, mode)?;
        let task = run.cfg.task.with_mode(mode);
        let mut sets: BTreeMap<String, TrialSet> = BTreeMap::new();
        for e in manifest.models.iter().filter(|e| e.mode == mode) {
            let bytes = fs::read(run.out.join(MODELS_DIR).join(&e.file))?;
            let handle = ForecasterHandle::from_bytes(&bytes)?;
            sets.entry(e.model_type.clone())
                .or_insert_with(|| TrialSet {
                    model_type: e.model_type.clone(),
                    mode,
                    trials: Vec::new(),
                })
                .trials
                .push(handle);
        }
        let test_w = build_windows(&seg.test, &task)?;
        for p in run.cfg.plugins.iter().filter(|p| p.mode == mode) {
            let mut trials = Vec::new();
            for seed in run.cfg.seeds() {
                let plugin = PluginForecaster::launch(&p.endpoint(seed, &run.base))?;
                let mut handle =
                    ForecasterHandle::from_plugin(test_w.layout.clone(), Arc::new(plugin));
                handle.seed = seed;
                trials.push(handle);
            }
            sets.insert(
                p.name.clone(),
                TrialSet {
                    model_type: p.name.clone(),
                    mode,
                    trials,
                },
            );
        }
        let sets: Vec<TrialSet> = sets.into_values().collect();

        // Local models have no exogenous inputs, so only clean scores are
        // recorded for them.
        let features = match mode {
            Mode::Local => Vec::new(),
            Mode::Global => run
                .cfg
                .errors
                .features
                .clone()
                .unwrap_or_else(|| perturbable_features(&seg.test)),
        };
        let sweep = SweepConfig {
            features,
            kinds: run.cfg.errors.kinds.clone(),
            rates: run.cfg.errors.rates.clone(),
            seed_base: run.cfg.seed_base,
            cluster_mean_len: run.cfg.errors.cluster_mean_len,
            peaks: run.cfg.peaks,
        };
        let reference = match run.cfg.errors.fences {
            FenceSource::Test => None,
            FenceSource::Train => Some(&seg.train),
        };
        records.extend(robustness_sweep(
            &sets, &seg.test, &task, &sweep, reference,
        )?);

        for set in &sets {
            if let Some(h) = set.trials.first() {
                let c = measure_complexity(h, &test_w, run.cfg.complexity_repeats)?;
                complexity.push(ComplexityEntry {
                    model_type: set.model_type.clone(),
                    mode,
                    inference_seconds: c.inference_seconds,
                    size_bytes: c.size_bytes,
                    param_count: c.param_count,
                });
            }
        }
    }
    for r in &mut records {
        r.config_hash = Some(run.hash.clone());
    }
    fs::create_dir_all(&run.out)?;
    let rec_path = run.out.join(RECORDS);
    write_records_jsonl(&records, BufWriter::new(File::create(&rec_path)?))?;
    let cx_path = run.out.join(COMPLEXITY);
    let cx = ComplexityFile {
        config_hash: run.hash.clone(),
        seed_base: run.cfg.seed_base,
        models: complexity,
    };
    fs::write(&cx_path, serde_json::to_string_pretty(&cx)?)?;
    Ok(vec![rec_path, cx_path])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndicesFile {
    pub config_hash: String,
    pub seed_base: u64,
    pub models: Vec<ModelIndices>,
}

pub fn read_records(path: &Path) -> Result<Vec<EvalRecord>> {
    let file =
        File::open(path).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    read_records_jsonl(BufReader::new(file))
}

pub fn read_complexity(path: &Path) -> Result<ComplexityFile> {
    let file =
        File::open(path).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

/// `indices`: consistency, CCI and RI from a record file.
pub fn indices(
    records_path: &Path,
    complexity_path: Option<&Path>,
    out: &Path,
    stamp: Option<Stamp>,
) -> Result<Vec<PathBuf>> {
    let records = read_records(records_path)?;
    let complexity = match complexity_path {
        Some(p) => Some(read_complexity(p)?),
        None => None,
    };
    let measured: BTreeMap<ModelKey, (f64, f64)> = complexity
        .iter()
        .flat_map(|c| &c.models)
        .map(|m| {
            (
                ModelKey::new(&m.model_type, m.mode),
                (m.inference_seconds, m.size_bytes as f64),
            )
        })
        .collect();
    let t = tradeoff_indices(&records, &measured)?;
    let stamp = stamp.unwrap_or_else(|| Stamp {
        config_hash: records
            .iter()
            .find_map(|r| r.config_hash.clone())
            .unwrap_or_default(),
        seed_base: complexity.as_ref().map_or(0, |c| c.seed_base),
    });
    let file = IndicesFile {
        config_hash: stamp.config_hash,
        seed_base: stamp.seed_base,
        models: t.models,
    };
    fs::create_dir_all(out)?;
    let path = out.join(INDICES);
    fs::write(&path, serde_json::to_string_pretty(&file)?)?;
    Ok(vec![path])
}

/// `report`: figures and tables from records and indices.
pub fn report(records_path: &Path, indices_path: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let records = read_records(records_path)?;
    let file = File::open(indices_path)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", indices_path.display())))?;
    let idx: IndicesFile = serde_json::from_reader(BufReader::new(file))?;
    let stamp = Stamp {
        config_hash: idx.config_hash.clone(),
        seed_base: idx.seed_base,
    };
    write_reports(
        &out.join(REPORT_DIR),
        &records,
        &TradeoffIndices { models: idx.models },
        &stamp,
    )
}

/// `run`: every stage in order.
pub fn run_all(run: &Run) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if run.cfg.dataset.synth.is_some() {
        written.extend(synth(run)?);
    }
    written.extend(train(run)?);
    written.extend(evaluate(run)?);
    written.extend(indices(
        &run.out.join(RECORDS),
        Some(&run.out.join(COMPLEXITY)),
        &run.out,
        Some(run.stamp()),
    )?);
    written.extend(report(
        &run.out.join(RECORDS),
        &run.out.join(INDICES),
        &run.out,
    )?);
    Ok(written)
}

pub struct PerturbArgs {
    pub data: PathBuf,
    pub schema: Option<PathBuf>,
    pub channel: String,
    pub spec: ErrorSpec,
    pub out: PathBuf,
}

/// `perturb`: corrupt one channel of a CSV frame.
pub fn perturb_file(args: &PerturbArgs) -> Result<Vec<PathBuf>> {
    let schema_path = args.schema.clone().or_else(|| {
        let guess = args.data.with_extension("schema.toml");
        guess.exists().then_some(guess)
    });
    let schema = schema_path.as_deref().map(Schema::load).transpose()?;
    let file = File::open(&args.data)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", args.data.display())))?;
    let frame = read_csv(BufReader::new(file), schema.as_ref())?;
    let (corrupted, mask) = perturb(&frame, &args.channel, &args.spec)?;
    fs::create_dir_all(&args.out)?;
    let csv = args.out.join("perturbed.csv");
    let mask_path = args.out.join("mask.csv");
    let mut written = Vec::new();
    match schema {
        Some(mut s) => {
            let sidecar = args.out.join("perturbed.schema.toml");
            s.meta
                .insert("perturbed_channel".into(), args.channel.clone());
            s.meta
                .insert("error_spec".into(), serde_json::to_string(&args.spec)?);
            if let ErrorKind::Outlier { .. } = args.spec.kind {
                let fences = fence_stats(&frame, &args.channel)?;
                let idx = corrupted.require(&args.channel)?;
                let share = mask.out_of_fence_fraction(corrupted.column(idx), &fences);
                if share.is_finite() {
                    s.meta
                        .insert("out_of_fence_fraction".into(), share.to_string());
                }
            }
            save_frame(&corrupted, &csv, &sidecar)?;
            // keep the original roles, only provenance changes
            s.save(&sidecar)?;
            written.extend([csv, sidecar]);
        }
        None => {
            write_csv(&corrupted, BufWriter::new(File::create(&csv)?))?;
            written.push(csv);
        }
    }
    write_masks_csv(&[mask], BufWriter::new(File::create(&mask_path)?))?;
    written.push(mask_path);
    Ok(written)
}
