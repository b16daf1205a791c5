//! Experiment orchestration: single runs for both models, the seeded sweep
//! grid with resumable CSV output, per-run JSON-lines telemetry, early
//! stopping, and the summary table.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{DatasetKind, ExperimentConfig, ModelKind};
use crate::datasets::{
    balanced_split, balanced_subset, dataset_paths, generate_geometric, load_idx, LabeledImageSet,
    SplitPlan,
};
use crate::encoding::{poisson_encode, resize_image};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::network::StdpNetwork;
use crate::readout::{accuracy, aggregate_rates, fit_readout, FittedReadout};
use crate::rng::stream;
use crate::sg::{
    adam_step, sg_backward, sg_forward, sg_loss, sg_sleep_phase, spike_count_decode, SgGrads,
    SgParams,
};
use crate::sleep::{SleepTelemetry, WakeReason};

pub const CSV_HEADER: &str =
    "model,dataset,seed,sleep_ratio,batch,val_accuracy,test_accuracy,wall_time_s,wake_threshold_count,wake_budget_count";

/// Identity of one run within a sweep grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RunKey {
    pub model: String,
    pub dataset: String,
    pub seed: u64,
    /// Canonical `{}`-formatted ratio, e.g. "0.1".
    pub sleep_ratio: String,
}

impl RunKey {
    pub fn new(model: ModelKind, dataset: DatasetKind, seed: u64, ratio: f64) -> Self {
        RunKey {
            model: model.as_str().to_string(),
            dataset: dataset.as_str().to_string(),
            seed,
            sleep_ratio: format!("{ratio}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Completed,
    /// The weight-explosion safety ceiling (or a numeric abort) ended
    /// training early; evaluation still ran on the surviving state.
    Aborted(String),
}

/// One experiment outcome. The fixed CSV schema carries the first ten
/// fields; the rest are in-process/telemetry payload.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: String,
    pub dataset: String,
    pub seed: u64,
    pub sleep_ratio: f64,
    /// Batches actually trained.
    pub batch: usize,
    /// Validation accuracy at the last checkpoint.
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    pub wall_time_s: f64,
    pub wake_threshold_count: u64,
    pub wake_budget_count: u64,

    pub status: RunStatus,
    pub val_curve: Vec<f64>,
    pub initial_mean_abs_weight: f64,
    pub max_abs_weight: f64,
    pub sleep_phases: u64,
    pub spontaneous_spikes: u64,
}

impl RunRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.3},{},{}",
            self.model,
            self.dataset,
            self.seed,
            self.sleep_ratio,
            self.batch,
            self.val_accuracy,
            self.test_accuracy,
            self.wall_time_s,
            self.wake_threshold_count,
            self.wake_budget_count
        )
    }

    pub fn key(&self) -> RunKey {
        RunKey {
            model: self.model.clone(),
            dataset: self.dataset.clone(),
            seed: self.seed,
            sleep_ratio: format!("{}", self.sleep_ratio),
        }
    }
}

/// Minimal parsed view of a results row, enough for resume and summaries.
#[derive(Debug, Clone)]
pub struct CsvRow {
    pub model: String,
    pub dataset: String,
    pub seed: u64,
    pub sleep_ratio: f64,
    pub batch: usize,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
}

impl CsvRow {
    pub fn key(&self) -> RunKey {
        RunKey {
            model: self.model.clone(),
            dataset: self.dataset.clone(),
            seed: self.seed,
            sleep_ratio: format!("{}", self.sleep_ratio),
        }
    }
}

pub fn parse_results_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        Some(other) => {
            return Err(Error::Data(format!("unexpected results header: {other}")));
        }
        None => return Ok(Vec::new()),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(Error::Data(format!("row {}: expected 10 fields", i + 2)));
        }
        let parse_f64 = |s: &str, what: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Data(format!("row {}: bad {what} '{s}'", i + 2)))
        };
        rows.push(CsvRow {
            model: f[0].to_string(),
            dataset: f[1].to_string(),
            seed: f[2]
                .parse()
                .map_err(|_| Error::Data(format!("row {}: bad seed '{}'", i + 2, f[2])))?,
            sleep_ratio: parse_f64(f[3], "sleep_ratio")?,
            batch: f[4]
                .parse()
                .map_err(|_| Error::Data(format!("row {}: bad batch '{}'", i + 2, f[4])))?,
            val_accuracy: parse_f64(f[5], "val_accuracy")?,
            test_accuracy: parse_f64(f[6], "test_accuracy")?,
        });
    }
    Ok(rows)
}

/// Early stopping on validation accuracy: stop after `patience` consecutive
/// checkpoints without an improvement above `min_improvement`.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    patience: usize,
    min_improvement: f64,
    best: f64,
    stale: usize,
}

impl EarlyStopper {
    pub fn new(patience_fraction: f64, n_batches: usize, min_improvement: f64) -> Self {
        let patience = ((patience_fraction * n_batches as f64).ceil() as usize).max(1);
        EarlyStopper { patience, min_improvement, best: f64::NEG_INFINITY, stale: 0 }
    }

    pub fn patience(&self) -> usize {
        self.patience
    }

    /// Returns true when training should stop.
    pub fn observe(&mut self, val_accuracy: f64) -> bool {
        if val_accuracy > self.best + self.min_improvement {
            self.best = val_accuracy;
            self.stale = 0;
            false
        } else {
            self.stale += 1;
            self.stale >= self.patience
        }
    }
}

/// Per-run JSON-lines telemetry sink; inert when no directory is configured.
struct Telemetry {
    writer: Option<BufWriter<fs::File>>,
}

impl Telemetry {
    fn open(cfg: &ExperimentConfig) -> Result<Self> {
        let Some(dir) = &cfg.telemetry_dir else {
            return Ok(Telemetry { writer: None });
        };
        fs::create_dir_all(dir)?;
        let name = format!(
            "{}-{}-s{}-r{}.jsonl",
            cfg.model.as_str(),
            cfg.dataset.as_str(),
            cfg.seed,
            cfg.sleep_ratio
        );
        let file = fs::File::create(dir.join(name))?;
        Ok(Telemetry { writer: Some(BufWriter::new(file)) })
    }

    fn emit<T: Serialize>(&mut self, event: &str, payload: &T) -> Result<()> {
        if let Some(w) = &mut self.writer {
            let mut value = serde_json::to_value(payload)
                .map_err(|e| Error::Data(format!("telemetry encode: {e}")))?;
            if let Some(map) = value.as_object_mut() {
                map.insert("event".into(), serde_json::Value::String(event.into()));
            }
            serde_json::to_writer(&mut *w, &value)
                .map_err(|e| Error::Data(format!("telemetry write: {e}")))?;
            writeln!(w)?;
            w.flush()?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct BatchEvent {
    batch: usize,
    val_accuracy: f64,
    /// Sum of |w| over plastic groups at the checkpoint.
    weight_sum: f64,
    max_abs_weight: f64,
    /// Mean readout-population firing rate over the batch (Hz).
    mean_rate_hz: f64,
}

#[derive(Serialize)]
struct SgBatchEvent {
    batch: usize,
    val_accuracy: f64,
    /// Mean time-summed cross-entropy over the batch's samples.
    mean_train_loss: f64,
    weight_sum: f64,
    max_abs_weight: f64,
}

/// Resolved data for one run: the train/val pool, an optional separate test
/// pool, and the index structure over them.
pub struct PreparedData {
    pub pool: Arc<LabeledImageSet>,
    pub test_pool: Option<Arc<LabeledImageSet>>,
    pub batches: Vec<Vec<usize>>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub class_count: usize,
}

impl PreparedData {
    pub fn val_images(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.val.iter().map(|&i| &self.pool.images[i])
    }

    pub fn val_labels(&self) -> Vec<u8> {
        self.val.iter().map(|&i| self.pool.labels[i]).collect()
    }

    fn test_set(&self) -> &LabeledImageSet {
        self.test_pool.as_deref().unwrap_or(&self.pool)
    }

    pub fn test_images(&self) -> impl Iterator<Item = &Vec<f64>> {
        let set = self.test_set();
        self.test.iter().map(move |&i| &set.images[i])
    }

    pub fn test_labels(&self) -> Vec<u8> {
        let set = self.test_set();
        self.test.iter().map(|&i| set.labels[i]).collect()
    }
}

fn resize_set(set: LabeledImageSet, dims: (usize, usize)) -> Result<LabeledImageSet> {
    if set.dims == dims {
        return Ok(set);
    }
    let src_dims = set.dims;
    let images = set
        .images
        .into_iter()
        .map(|img| resize_image(&img, src_dims, dims))
        .collect::<Result<Vec<_>>>()?;
    Ok(LabeledImageSet { images, labels: set.labels, class_count: set.class_count, dims })
}

fn dataset_root(cfg: &ExperimentConfig) -> PathBuf {
    if let Some(root) = &cfg.dataset_root {
        return root.clone();
    }
    if let Ok(env_root) = std::env::var("SOMNET_DATA_ROOT") {
        if !env_root.is_empty() {
            return PathBuf::from(env_root);
        }
    }
    PathBuf::from("data")
}

type SetCache = Mutex<HashMap<(PathBuf, PathBuf, (usize, usize)), Arc<LabeledImageSet>>>;

/// IDX sets are immutable once loaded; share them across parallel runs.
fn load_idx_cached(
    images: &Path,
    labels: &Path,
    dims: (usize, usize),
    classes: usize,
) -> Result<Arc<LabeledImageSet>> {
    static CACHE: OnceLock<SetCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (images.to_path_buf(), labels.to_path_buf(), dims);
    if let Some(found) = cache.lock().unwrap().get(&key) {
        return Ok(Arc::clone(found));
    }
    let set = resize_set(load_idx(images, labels)?.expect_classes(classes)?, dims)?;
    let arc = Arc::new(set);
    cache.lock().unwrap().insert(key, Arc::clone(&arc));
    Ok(arc)
}

/// Load or synthesize the dataset named by the config and derive the
/// balanced batch/validation/test structure for one run.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let dims = cfg.encoder.image_dims;
    match cfg.dataset {
        DatasetKind::Geometric => {
            let total = cfg.split.n_train + cfg.split.n_val + cfg.split.n_test;
            let mut rng = stream(cfg.seed, "geometric");
            let set = resize_set(
                generate_geometric(total, cfg.geometric_noise_var.sqrt(), &mut rng)?,
                dims,
            )?;
            let split = balanced_split(&set, &cfg.split, cfg.seed)?;
            Ok(PreparedData {
                class_count: set.class_count,
                pool: Arc::new(set),
                test_pool: None,
                batches: split.batches,
                val: split.val,
                test: split.test,
            })
        }
        named => {
            let root = dataset_root(cfg);
            let (train_i, train_l, test_i, test_l) = dataset_paths(&root, named.as_str())?;
            let pool = load_idx_cached(&train_i, &train_l, dims, 10)?;
            let test_pool = load_idx_cached(&test_i, &test_l, dims, 10)?;
            let train_plan = SplitPlan { n_test: 0, ..cfg.split };
            let split = balanced_split(&pool, &train_plan, cfg.seed)?;
            let test = balanced_subset(&test_pool, cfg.split.n_test, cfg.seed)?;
            Ok(PreparedData {
                class_count: pool.class_count,
                pool,
                test_pool: Some(test_pool),
                batches: split.batches,
                val: split.val,
                test,
            })
        }
    }
}

/// Run one experiment with the model selected by the config.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunRecord> {
    match cfg.model {
        ModelKind::Stdp => run_stdp_experiment(cfg),
        ModelKind::Sg => run_sg_experiment(cfg),
    }
}

/// The recurrent STDP protocol: encode, step with plasticity and the sleep
/// scheduler, refit the readout at every batch checkpoint, early-stop on
/// validation accuracy, test at the end.
pub fn run_stdp_experiment(cfg: &ExperimentConfig) -> Result<RunRecord> {
    cfg.validate()?;
    if cfg.model != ModelKind::Stdp {
        return Err(Error::Contract("run_stdp_experiment needs model = stdp".into()));
    }
    let start = Instant::now();
    let data = prepare_data(cfg)?;
    let schedule = cfg.sleep_schedule();
    let mut wake_lif = cfg.lif;
    if !cfg.wake_noise {
        wake_lif.noise_std = 0.0;
    }
    let mut net = StdpNetwork::new(&cfg.arch, wake_lif, cfg.thr, cfg.stdp, cfg.seed)?;
    net.ceiling_factor = cfg.weight_ceiling_factor;
    net.set_trace_ceiling(cfg.trace_ceiling);
    let mut sim_rng = stream(cfg.seed, "stdp-sim");
    let mut enc_rng = stream(cfg.seed, "stdp-encoder");
    let mut telemetry = Telemetry::open(cfg)?;

    let initial_mean_abs = net.initial_mean_abs_weight();
    let mut max_abs_seen = net.max_abs_weight();
    let mut features: Vec<Vec<f64>> = Vec::with_capacity(cfg.split.n_train);
    let mut labels: Vec<u8> = Vec::with_capacity(cfg.split.n_train);
    let mut stopper = EarlyStopper::new(cfg.patience_fraction, cfg.split.n_batches, cfg.min_improvement);
    let mut sleep_log = SleepTelemetry::default();
    let mut phases_done: u64 = 0;
    let mut status = RunStatus::Completed;
    let mut val_curve: Vec<f64> = Vec::new();
    let mut batches_run = 0usize;
    let mut fitted: Option<FittedReadout> = None;
    let mut rows_at_fit = 0usize;

    'training: for (batch_index, batch) in data.batches.iter().enumerate() {
        for &sample in batch {
            let raster = poisson_encode(&data.pool.images[sample], &cfg.encoder, &mut enc_rng)?;
            let counts = net.present_sample(&raster, true, &mut sim_rng)?;
            features.push(aggregate_rates(&counts, cfg.encoder.t_image));
            labels.push(data.pool.labels[sample]);

            match net.check_weight_ceiling() {
                Ok(max) => max_abs_seen = max_abs_seen.max(max),
                Err(Error::RunFailed(msg)) => {
                    max_abs_seen = max_abs_seen.max(net.max_abs_weight());
                    status = RunStatus::Aborted(msg);
                    break 'training;
                }
                Err(other) => return Err(other),
            }

            if schedule.sleep_ratio > 0.0 {
                let due = net.global_step() / schedule.sleep_interval;
                while phases_done < due {
                    // sleep dynamics are noise-driven even when wake is quiet
                    net.lif.noise_std = cfg.lif.noise_std;
                    let record = net.sleep_phase(&schedule, true, phases_done, &mut sim_rng)?;
                    net.lif.noise_std = wake_lif.noise_std;
                    telemetry.emit("sleep_phase", &record)?;
                    sleep_log.record(record);
                    phases_done += 1;
                    max_abs_seen = max_abs_seen.max(net.max_abs_weight());
                }
            }
        }
        batches_run = batch_index + 1;

        let model = fit_readout(&Mat::from_rows(features.clone())?, &labels, &cfg.readout)?;
        let mut val_rng = stream(cfg.seed, &format!("stdp-val-{batch_index}"));
        let val_rates = net.evaluate_rates(data.val_images(), &cfg.encoder, &mut val_rng)?;
        let val_acc = accuracy(&model.predict(&val_rates)?, &data.val_labels())?;
        val_curve.push(val_acc);
        let batch_rows = &features[features.len() - batch.len().min(features.len())..];
        let mean_rate = batch_rows.iter().flatten().sum::<f64>()
            / batch_rows.iter().map(Vec::len).sum::<usize>().max(1) as f64;
        telemetry.emit(
            "batch",
            &BatchEvent {
                batch: batch_index,
                val_accuracy: val_acc,
                weight_sum: net.plastic_weight_sum(),
                max_abs_weight: net.max_abs_weight(),
                mean_rate_hz: mean_rate,
            },
        )?;
        fitted = Some(model);
        rows_at_fit = features.len();

        if stopper.observe(val_acc) {
            break;
        }
    }

    // an aborted run may hold features past the last checkpoint; refit on
    // everything seen so far when that is still possible
    if rows_at_fit < features.len() && features.len() >= 2 {
        if let Ok(model) = fit_readout(&Mat::from_rows(features.clone())?, &labels, &cfg.readout) {
            fitted = Some(model);
        }
    }

    let test_accuracy = match &fitted {
        Some(model) => {
            let mut test_rng = stream(cfg.seed, "stdp-test");
            let test_rates = net.evaluate_rates(data.test_images(), &cfg.encoder, &mut test_rng)?;
            accuracy(&model.predict(&test_rates)?, &data.test_labels())?
        }
        None => 0.0,
    };

    let record = RunRecord {
        model: cfg.model.as_str().to_string(),
        dataset: cfg.dataset.as_str().to_string(),
        seed: cfg.seed,
        sleep_ratio: cfg.sleep_ratio,
        batch: batches_run,
        val_accuracy: val_curve.last().copied().unwrap_or(0.0),
        test_accuracy,
        wall_time_s: start.elapsed().as_secs_f64(),
        wake_threshold_count: sleep_log.count_by_reason(WakeReason::Threshold),
        wake_budget_count: sleep_log.count_by_reason(WakeReason::BudgetExhausted),
        status,
        val_curve,
        initial_mean_abs_weight: initial_mean_abs,
        max_abs_weight: max_abs_seen,
        sleep_phases: phases_done,
        spontaneous_spikes: sleep_log.phases.iter().map(|p| p.spontaneous_spikes).sum(),
    };
    telemetry.emit("run_summary", &record)?;
    Ok(record)
}

/// The surrogate-gradient protocol: minibatch Adam over the batch stream,
/// the same sleep scheduler cadence, spike-count decoding for evaluation.
pub fn run_sg_experiment(cfg: &ExperimentConfig) -> Result<RunRecord> {
    cfg.validate()?;
    if cfg.model != ModelKind::Sg {
        return Err(Error::Contract("run_sg_experiment needs model = sg".into()));
    }
    let start = Instant::now();
    let data = prepare_data(cfg)?;
    // the output layer is sized by the dataset's label space
    let sg_cfg = crate::sg::SgConfig { n_out: data.class_count, ..cfg.sg };
    sg_cfg.validate()?;
    let schedule = cfg.sg_sleep_schedule();
    let mut params = SgParams::init(&sg_cfg, &mut stream(cfg.seed, "sg-init"))?;
    let mut sleep_rng = stream(cfg.seed, "sg-sleep");
    let mut telemetry = Telemetry::open(cfg)?;

    let initial_sum = params.weight_sum_abs();
    let initial_mean_abs =
        initial_sum / (params.w1.data.len() + params.w2.data.len()) as f64;
    let mut max_abs_seen = params.max_abs();
    let mut stopper = EarlyStopper::new(cfg.patience_fraction, cfg.split.n_batches, cfg.min_improvement);
    let mut sleep_log = SleepTelemetry::default();
    let mut phases_done: u64 = 0;
    let mut status = RunStatus::Completed;
    let mut val_curve: Vec<f64> = Vec::new();
    let mut batches_run = 0usize;
    let mut optimizer_steps: u64 = 0;

    let evaluate = |params: &SgParams, images: Vec<&Vec<f64>>, labels: &[u8]| -> Result<f64> {
        let mut hits = 0usize;
        for (image, &label) in images.iter().zip(labels) {
            let (counts, _) = sg_forward(image, params, &sg_cfg)?;
            hits += usize::from(spike_count_decode(&counts) == label as usize);
        }
        Ok(hits as f64 / labels.len().max(1) as f64)
    };

    'training: for (batch_index, batch) in data.batches.iter().enumerate() {
        let mut batch_loss = 0.0;
        for chunk in batch.chunks(cfg.sg_minibatch) {
            let mut grads = SgGrads::zeros(&sg_cfg);
            let scale = 1.0 / chunk.len() as f64;
            for &sample in chunk {
                let image = &data.pool.images[sample];
                let label = data.pool.labels[sample] as usize;
                let (_, trace) = sg_forward(image, &params, &sg_cfg)?;
                batch_loss += sg_loss(&trace, label, &sg_cfg)?;
                let g = sg_backward(&trace, label, &params, &sg_cfg)?;
                grads.add_scaled(&g, scale);
            }
            match adam_step(&mut params, &grads, &cfg.adam) {
                Ok(()) => {}
                Err(Error::Numeric(msg)) => {
                    status = RunStatus::Aborted(msg);
                    break 'training;
                }
                Err(other) => return Err(other),
            }
            optimizer_steps += 1;
            max_abs_seen = max_abs_seen.max(params.max_abs());

            if schedule.sleep_ratio > 0.0 {
                let due = optimizer_steps / schedule.sleep_interval;
                while phases_done < due {
                    let record = sg_sleep_phase(
                        &mut params,
                        &schedule,
                        &cfg.sg_sleep,
                        &sg_cfg,
                        initial_sum,
                        phases_done,
                        &mut sleep_rng,
                    )?;
                    telemetry.emit("sleep_phase", &record)?;
                    sleep_log.record(record);
                    phases_done += 1;
                }
            }
        }
        batches_run = batch_index + 1;

        let val_acc = evaluate(&params, data.val_images().collect(), &data.val_labels())?;
        val_curve.push(val_acc);
        telemetry.emit(
            "batch",
            &SgBatchEvent {
                batch: batch_index,
                val_accuracy: val_acc,
                mean_train_loss: batch_loss / batch.len().max(1) as f64,
                weight_sum: params.weight_sum_abs(),
                max_abs_weight: params.max_abs(),
            },
        )?;
        if stopper.observe(val_acc) {
            break;
        }
    }

    let test_accuracy = evaluate(&params, data.test_images().collect(), &data.test_labels())?;

    if let Some(dir) = &cfg.telemetry_dir {
        let name = format!(
            "{}-{}-s{}-r{}-params.bin",
            cfg.model.as_str(),
            cfg.dataset.as_str(),
            cfg.seed,
            cfg.sleep_ratio
        );
        crate::sg::save_checkpoint(&params, &sg_cfg, &dir.join(name))?;
    }

    let record = RunRecord {
        model: cfg.model.as_str().to_string(),
        dataset: cfg.dataset.as_str().to_string(),
        seed: cfg.seed,
        sleep_ratio: cfg.sleep_ratio,
        batch: batches_run,
        val_accuracy: val_curve.last().copied().unwrap_or(0.0),
        test_accuracy,
        wall_time_s: start.elapsed().as_secs_f64(),
        wake_threshold_count: sleep_log.count_by_reason(WakeReason::Threshold),
        wake_budget_count: sleep_log.count_by_reason(WakeReason::BudgetExhausted),
        status,
        val_curve,
        initial_mean_abs_weight: initial_mean_abs,
        max_abs_weight: max_abs_seen,
        sleep_phases: phases_done,
        spontaneous_spikes: sleep_log.phases.iter().map(|p| p.spontaneous_spikes).sum(),
    };
    telemetry.emit("run_summary", &record)?;
    Ok(record)
}

#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub models: Vec<ModelKind>,
    pub datasets: Vec<DatasetKind>,
    pub seeds: Vec<u64>,
    pub sleep_ratios: Vec<f64>,
}

impl SweepGrid {
    pub fn runs(&self) -> Vec<(ModelKind, DatasetKind, u64, f64)> {
        let mut out = Vec::new();
        for &model in &self.models {
            for &dataset in &self.datasets {
                for &seed in &self.seeds {
                    for &ratio in &self.sleep_ratios {
                        out.push((model, dataset, seed, ratio));
                    }
                }
            }
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.runs().is_empty()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutcome {
    pub completed: usize,
    pub skipped: usize,
    pub failures: Vec<String>,
}

/// Execute the grid onto an append-only CSV. With `resume`, runs whose keys
/// already appear in the file are skipped; without it the file starts fresh.
/// Individual run failures are recorded and the sweep continues.
pub fn sweep(
    base: &ExperimentConfig,
    grid: &SweepGrid,
    jobs: usize,
    out_path: &Path,
    resume: bool,
) -> Result<SweepOutcome> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("sweep grid is empty".into()));
    }
    let mut done: HashSet<RunKey> = HashSet::new();
    if resume && out_path.exists() {
        let rows = parse_results_csv(&fs::read_to_string(out_path)?)?;
        done.extend(rows.iter().map(CsvRow::key));
    }
    let fresh = !resume || !out_path.exists();
    if let Some(parent) = out_path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut file = if fresh {
        fs::File::create(out_path)?
    } else {
        fs::OpenOptions::new().append(true).open(out_path)?
    };
    if fresh {
        writeln!(file, "{CSV_HEADER}")?;
        file.flush()?;
    }
    let writer = Mutex::new(BufWriter::new(file));

    let pending: Vec<(ModelKind, DatasetKind, u64, f64)> = grid
        .runs()
        .into_iter()
        .filter(|&(m, d, s, r)| !done.contains(&RunKey::new(m, d, s, r)))
        .collect();
    let skipped = grid.runs().len() - pending.len();

    let run_one = |&(model, dataset, seed, ratio): &(ModelKind, DatasetKind, u64, f64)| -> std::result::Result<(), String> {
        let mut cfg = base.clone();
        cfg.model = model;
        cfg.dataset = dataset;
        cfg.seed = seed;
        cfg.sleep_ratio = ratio;
        match run_experiment(&cfg) {
            Ok(record) => {
                let mut w = writer.lock().unwrap();
                let _ = writeln!(w, "{}", record.csv_row());
                let _ = w.flush();
                Ok(())
            }
            Err(e) => Err(format!(
                "{}/{} seed {} ratio {}: {e}",
                model.as_str(),
                dataset.as_str(),
                seed,
                ratio
            )),
        }
    };

    let results: Vec<std::result::Result<(), String>> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::RunFailed(format!("thread pool: {e}")))?;
        pool.install(|| {
            use rayon::prelude::*;
            pending.par_iter().map(run_one).collect()
        })
    } else {
        pending.iter().map(run_one).collect()
    };

    writer.lock().unwrap().flush()?;
    let failures: Vec<String> = results.into_iter().filter_map(std::result::Result::err).collect();
    Ok(SweepOutcome { completed: pending.len() - failures.len(), skipped, failures })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub model: String,
    pub sleep_ratio: f64,
    pub runs: usize,
    pub mean_accuracy: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Per-(model, sleep-ratio) mean test accuracy with a 95%
/// normal-approximation confidence interval across seeds and datasets.
pub fn summarize(csv_text: &str) -> Result<Vec<SummaryRow>> {
    let rows = parse_results_csv(csv_text)?;
    if rows.is_empty() {
        return Err(Error::InvalidInput("no result rows to summarize".into()));
    }
    let mut groups: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for row in &rows {
        groups
            .entry((row.model.clone(), format!("{}", row.sleep_ratio)))
            .or_default()
            .push(row.test_accuracy);
    }
    let mut out = Vec::new();
    for ((model, ratio), accs) in groups {
        let n = accs.len();
        let mean = accs.iter().sum::<f64>() / n as f64;
        let half = if n > 1 {
            let var = accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            1.96 * (var / n as f64).sqrt()
        } else {
            0.0
        };
        out.push(SummaryRow {
            model,
            sleep_ratio: ratio.parse().unwrap_or(f64::NAN),
            runs: n,
            mean_accuracy: mean,
            ci_lo: mean - half,
            ci_hi: mean + half,
        });
    }
    out.sort_by(|a, b| {
        a.model.cmp(&b.model).then(a.sleep_ratio.partial_cmp(&b.sleep_ratio).unwrap())
    });
    Ok(out)
}

pub fn format_summary_table(rows: &[SummaryRow]) -> String {
    let mut s = String::new();
    s.push_str("model  sleep_ratio  runs  mean_accuracy  ci95_lo  ci95_hi\n");
    for r in rows {
        s.push_str(&format!(
            "{:<5}  {:<11}  {:<4}  {:<13.4}  {:<7.4}  {:<7.4}\n",
            r.model, r.sleep_ratio, r.runs, r.mean_accuracy, r.ci_lo, r.ci_hi
        ));
    }
    s
}

pub fn write_summary_csv(rows: &[SummaryRow], path: &Path) -> Result<()> {
    let mut out = String::from("model,sleep_ratio,runs,mean_accuracy,ci95_lo,ci95_hi\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.model, r.sleep_ratio, r.runs, r.mean_accuracy, r.ci_lo, r.ci_hi
        ));
    }
    fs::write(path, out)?;
    Ok(())
}
