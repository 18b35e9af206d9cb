//! Command implementations behind the CLI.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use embedlab_core::analysis::{centroid_profile, kmeans, sample_clusters, CentroidProfile, Ranked};
use embedlab_core::evaluation::{pdc_sweep, EmbeddingDistance, EvalReport, SweepEntry, UserDistance};
use embedlab_core::models::{init_model, EmbeddingTable, ModelKind, Shape};
use embedlab_core::numerics::{DenseMatrix, SeededRng};
use embedlab_core::training::{grid_search, train_with, GridPoint, HyperParams};
use embedlab_core::Rating;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::{dataset_hash, load_dataset, save_dataset};
use crate::config::ExperimentConfig;
use crate::dataio::{prepare_dataset, read_rating_file, write_link_report, Dataset, LinkReport};
use crate::error::{csv_error, read_text, write_file, LabError, Result};
use crate::modelio::{load_model, save_model, Provenance};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const TUNING_SPLIT: &str = "fold 1 training ratings, seeded shuffle, last `validation_fraction` held out";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactHeader {
    pub config_hash: String,
    pub dataset_hash: String,
    pub version: String,
}

impl ArtifactHeader {
    fn comment(&self) -> String {
        format!("# config={} dataset={} version={}\n", self.config_hash, self.dataset_hash, self.version)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrepareSummary {
    pub dataset_hash: String,
    pub users: usize,
    pub items: usize,
    pub tags: usize,
    pub matched: usize,
    pub dropped: usize,
    pub folds: Vec<(u32, usize, usize)>,
}

pub fn cmd_prepare(ml100k_dir: &Path, ml20m_dir: &Path, out_dir: &Path) -> Result<(PrepareSummary, LinkReport)> {
    let (dataset, report) = prepare_dataset(ml100k_dir, ml20m_dir)?;
    save_dataset(&dataset, out_dir)?;
    write_link_report(&out_dir.join("link_report.csv"), &report)?;
    let summary = PrepareSummary {
        dataset_hash: dataset_hash(out_dir)?,
        users: dataset.n_users(),
        items: dataset.items.len(),
        tags: dataset.n_tags(),
        matched: report.matched,
        dropped: report.dropped,
        folds: dataset.folds.iter().map(|f| (f.fold_id, f.train.len(), f.test.len())).collect(),
    };
    Ok((summary, report))
}

/// Contents of `runs/<kind>_<z>_fold<i>/report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub header: ArtifactHeader,
    pub kind: ModelKind,
    pub z: usize,
    pub fold: u32,
    pub init_seed: u64,
    pub hyper: HyperParams,
    pub train_ratings: usize,
    pub test_ratings: usize,
    pub final_loss: Option<f64>,
    pub eval: Option<EvalReport>,
    pub error: Option<String>,
}

pub fn run_dir_name(kind: ModelKind, z: usize, fold: u32) -> String {
    format!("{kind}_{z}_fold{fold}")
}

fn cell_seeds(seed: u64, kind: ModelKind, z: usize, fold: u32) -> (u64, u64) {
    let kind_ix = ModelKind::ALL.iter().position(|k| *k == kind).unwrap_or(0) as u64;
    let mut rng = SeededRng::for_stream(seed, (kind_ix << 40) | ((z as u64) << 8) | fold as u64);
    (rng.next_u64(), rng.next_u64())
}

fn embeddings_csv(table: &EmbeddingTable, user_ids: &[u32]) -> String {
    let mut s = String::from("user_id");
    for d in 0..table.dim() {
        let _ = write!(s, ",dim_{d}");
    }
    s.push('\n');
    for (u, id) in user_ids.iter().enumerate() {
        let _ = write!(s, "{id}");
        for v in table.get(u) {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

struct RunContext<'a> {
    cfg: &'a ExperimentConfig,
    dataset: &'a Dataset,
    features: &'a DenseMatrix,
    header: &'a ArtifactHeader,
    runs_dir: &'a Path,
}

fn run_cell(ctx: &RunContext<'_>, kind: ModelKind, z: usize, fold_id: u32) -> Result<RunReport> {
    let dir = ctx.runs_dir.join(run_dir_name(kind, z, fold_id));
    let fold = ctx
        .dataset
        .fold(fold_id)
        .ok_or_else(|| LabError::Config(format!("fold {fold_id} is not in the prepared dataset")))?;
    let (init_seed, shuffle_seed) = cell_seeds(ctx.cfg.seed, kind, z, fold_id);
    let mut hp = ctx.cfg.hyper_for(kind)?;
    hp.seed ^= shuffle_seed;
    let train_set = ctx.dataset.indexed(&fold.train);
    let test_set = ctx.dataset.indexed(&fold.test);
    let mut report = RunReport {
        header: ctx.header.clone(),
        kind,
        z,
        fold: fold_id,
        init_seed,
        hyper: hp,
        train_ratings: train_set.len(),
        test_ratings: test_set.len(),
        final_loss: None,
        eval: None,
        error: None,
    };

    let shape = Shape::new(ctx.dataset.n_users(), ctx.dataset.n_tags());
    let started = Instant::now();
    let mut epoch_seconds = Vec::new();
    let outcome = init_model(kind, z, shape, hp.activation, &mut SeededRng::new(init_seed)).and_then(|model| {
        train_with(model, &train_set, ctx.features, &hp, |_, _| epoch_seconds.push(started.elapsed().as_secs_f64()))
    });
    match outcome {
        Err(e) => report.error = Some(e.to_string()),
        Ok((model, trace)) => {
            report.final_loss = trace.epoch_losses.last().copied();
            let mut csv = ctx.header.comment();
            csv.push_str("epoch,loss,seconds\n");
            for (e, (loss, secs)) in trace.epoch_losses.iter().zip(&epoch_seconds).enumerate() {
                let _ = writeln!(csv, "{},{loss},{secs:.3}", e + 1);
            }
            write_file(&dir.join("trace.csv"), csv)?;
            let prov = Provenance {
                seed: init_seed,
                config_hash: ctx.header.config_hash.clone(),
                dataset_hash: ctx.header.dataset_hash.clone(),
                version: ctx.header.version.clone(),
            };
            save_model(&dir.join("model.txt"), &model, &prov)?;
            let table = model.embedding_table();
            write_file(&dir.join("embeddings.csv"), embeddings_csv(&table, &ctx.dataset.user_ids))?;
            match EvalReport::evaluate(
                &model,
                &test_set,
                ctx.features,
                &test_set,
                &ctx.cfg.thresholds,
                ctx.cfg.user_distance,
                ctx.cfg.clamp_predictions,
                fold_id,
                init_seed,
            ) {
                Ok(eval) => report.eval = Some(eval),
                Err(e) => report.error = Some(e.to_string()),
            }
        }
    }
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&dir.join("report.json"), json + "\n")?;
    Ok(report)
}

/// Trains and evaluates every (kind, z, fold) cell, then aggregates.
/// A failing cell is recorded in its report and the grid continues.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<ResultsTable> {
    cfg.validate()?;
    let dataset = load_dataset(&cfg.data)?;
    let header = ArtifactHeader {
        config_hash: cfg.hash(),
        dataset_hash: dataset_hash(&cfg.data)?,
        version: VERSION.to_string(),
    };
    let features = dataset.item_features();
    let runs_dir = cfg.out.join("runs");
    let ctx = RunContext { cfg, dataset: &dataset, features: &features, header: &header, runs_dir: &runs_dir };
    let cells: Vec<(ModelKind, usize, u32)> =
        cfg.grid().into_iter().flat_map(|(kind, z)| cfg.folds.iter().map(move |&f| (kind, z, f))).collect();
    let reports = cells.par_iter().map(|&(kind, z, fold)| run_cell(&ctx, kind, z, fold)).collect::<Result<Vec<_>>>()?;
    let config_text = toml::to_string(cfg).map_err(|e| LabError::Config(e.to_string()))?;
    write_file(&cfg.out.join("config.toml"), config_text)?;
    let table = aggregate(&reports, &cfg.thresholds)?;
    write_tables(&cfg.out, &table)?;
    Ok(table)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; `None` with fewer than two folds.
    pub std: Option<f64>,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = (n >= 2).then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
        Some(Stat { mean, std, n })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableRow {
    pub kind: ModelKind,
    pub z: usize,
    pub params: usize,
    pub folds: Vec<u32>,
    pub mae: Option<Stat>,
    pub rmse: Option<Stat>,
    pub pdc: BTreeMap<u32, Option<Stat>>,
    pub pairs: BTreeMap<u32, f64>,
    pub errors: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultsTable {
    pub header: ArtifactHeader,
    pub thresholds: Vec<u32>,
    pub rows: Vec<TableRow>,
}

impl ResultsTable {
    pub fn row(&self, kind: ModelKind, z: usize) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.kind == kind && r.z == z)
    }
}

pub fn aggregate(reports: &[RunReport], thresholds: &[u32]) -> Result<ResultsTable> {
    let first = reports.first().ok_or_else(|| LabError::Config("no completed runs to aggregate".into()))?;
    let mut header = first.header.clone();
    if reports.iter().any(|r| r.header.config_hash != header.config_hash) {
        header.config_hash = "mixed".into();
    }
    if reports.iter().any(|r| r.header.dataset_hash != header.dataset_hash) {
        header.dataset_hash = "mixed".into();
    }
    let order = |k: ModelKind| ModelKind::ALL.iter().position(|x| *x == k).unwrap_or(usize::MAX);
    let mut groups: BTreeMap<(usize, usize), Vec<&RunReport>> = BTreeMap::new();
    for r in reports {
        groups.entry((order(r.kind), r.z)).or_default().push(r);
    }
    let mut rows = Vec::new();
    for runs in groups.values() {
        let mut runs = runs.clone();
        runs.sort_by_key(|r| r.fold);
        let kind = runs[0].kind;
        let z = runs[0].z;
        let evals: Vec<&EvalReport> = runs.iter().filter_map(|r| r.eval.as_ref()).collect();
        let pick = |f: &dyn Fn(&EvalReport) -> Option<f64>| -> Vec<f64> { evals.iter().filter_map(|e| f(e)).collect() };
        let mut pdc = BTreeMap::new();
        let mut pairs = BTreeMap::new();
        for &t in thresholds {
            pdc.insert(t, Stat::of(&pick(&|e| e.pdc.get(&t).copied().flatten())));
            let counts = pick(&|e| e.pair_counts.get(&t).map(|c| *c as f64));
            pairs.insert(t, Stat::of(&counts).map_or(0.0, |s| s.mean));
        }
        rows.push(TableRow {
            kind,
            z,
            params: evals.first().map_or(0, |e| e.param_count),
            folds: evals.iter().map(|e| e.fold_id).collect(),
            mae: Stat::of(&pick(&|e| Some(e.mae))),
            rmse: Stat::of(&pick(&|e| Some(e.rmse))),
            pdc,
            pairs,
            errors: runs.iter().filter_map(|r| r.error.as_ref().map(|e| format!("fold {}: {e}", r.fold))).collect(),
        });
    }
    Ok(ResultsTable { header, thresholds: thresholds.to_vec(), rows })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v}"))
}

fn z_label(kind: ModelKind, z: usize) -> String {
    if kind.is_baseline() {
        "-".into()
    } else {
        z.to_string()
    }
}

/// Writes `table.csv`, `table.txt` and `sweep.csv` into `dir`.
pub fn write_tables(dir: &Path, table: &ResultsTable) -> Result<()> {
    let mut csv = table.header.comment();
    csv.push_str("kind,z,params,folds,mae_mean,mae_std,rmse_mean,rmse_std");
    for t in &table.thresholds {
        let _ = write!(csv, ",pdc{t}_mean,pdc{t}_std");
    }
    csv.push_str(",errors\n");
    for r in &table.rows {
        let _ = write!(csv, "{},{},{},{}", r.kind, z_label(r.kind, r.z), r.params, r.folds.len());
        for s in [&r.mae, &r.rmse].into_iter().chain(table.thresholds.iter().map(|t| &r.pdc[t])) {
            let _ = write!(csv, ",{},{}", fmt_opt(s.map(|s| s.mean)), fmt_opt(s.and_then(|s| s.std)));
        }
        let _ = writeln!(csv, ",{}", r.errors.len());
    }
    write_file(&dir.join("table.csv"), csv)?;

    let mut sweep = table.header.comment();
    sweep.push_str("kind,z,threshold,mean,std,pairs\n");
    for r in &table.rows {
        for t in &table.thresholds {
            let s = r.pdc[t];
            let _ = writeln!(
                sweep,
                "{},{},{t},{},{},{}",
                r.kind,
                z_label(r.kind, r.z),
                fmt_opt(s.map(|s| s.mean)),
                fmt_opt(s.and_then(|s| s.std)),
                r.pairs[t]
            );
        }
    }
    write_file(&dir.join("sweep.csv"), sweep)?;
    write_file(&dir.join("table.txt"), render_table(table))
}

/// Aligned text rendering; the best value of each column carries a `*`.
pub fn render_table(table: &ResultsTable) -> String {
    let mut columns: Vec<(String, bool, Vec<Option<Stat>>)> = vec![
        ("MAE".into(), false, table.rows.iter().map(|r| r.mae).collect()),
        ("RMSE".into(), false, table.rows.iter().map(|r| r.rmse).collect()),
    ];
    for t in &table.thresholds {
        columns.push((format!("PDC t={t}"), true, table.rows.iter().map(|r| r.pdc[t]).collect()));
    }
    let mut header = vec!["model".to_string(), "z".to_string(), "params".to_string()];
    header.extend(columns.iter().map(|c| c.0.clone()));
    let mut grid = vec![header];
    for (i, r) in table.rows.iter().enumerate() {
        let mut line = vec![r.kind.to_string(), z_label(r.kind, r.z), r.params.to_string()];
        for (_, higher, values) in &columns {
            let best = values.iter().flatten().map(|s| s.mean).fold(None, |acc: Option<f64>, v| match acc {
                Some(a) if (*higher && a >= v) || (!*higher && a <= v) => Some(a),
                _ => Some(v),
            });
            line.push(match values[i] {
                None => "n/a".into(),
                Some(s) => {
                    let std = s.std.map_or_else(|| "n/a".into(), |v| format!("{v:.3}"));
                    let mark = if Some(s.mean) == best { "*" } else { "" };
                    format!("{:.3}±{std}{mark}", s.mean)
                }
            });
        }
        grid.push(line);
    }
    let widths: Vec<usize> =
        (0..grid[0].len()).map(|c| grid.iter().map(|row| row[c].chars().count()).max().unwrap_or(0)).collect();
    let mut out = table.header.comment();
    for row in &grid {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell}{}", " ".repeat(w - cell.chars().count())))
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Reads every `runs/*/report.json` under `results_dir` and rewrites the
/// aggregate tables.
pub fn cmd_report(results_dir: &Path) -> Result<ResultsTable> {
    let runs_dir = results_dir.join("runs");
    let mut reports = Vec::new();
    if runs_dir.is_dir() {
        let mut dirs: Vec<PathBuf> = std::fs::read_dir(&runs_dir)
            .map_err(|e| LabError::io(&runs_dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        dirs.sort();
        for d in dirs {
            let path = d.join("report.json");
            if path.is_file() {
                let report: RunReport = serde_json::from_str(&read_text(&path)?)
                    .map_err(|e| LabError::parse(&path, e.line() as u64, e.to_string()))?;
                reports.push(report);
            }
        }
    }
    if reports.is_empty() {
        return Err(LabError::data(&runs_dir, "no run reports found"));
    }
    let mut thresholds: Vec<u32> =
        reports.iter().filter_map(|r| r.eval.as_ref()).flat_map(|e| e.pdc.keys().copied()).collect();
    thresholds.sort_unstable();
    thresholds.dedup();
    let table = aggregate(&reports, &thresholds)?;
    write_tables(results_dir, &table)?;
    Ok(table)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalyzeOptions {
    pub clusters: usize,
    pub sample: usize,
    pub seed: u64,
    /// Rank only the linked ML-100k movies instead of the whole genome catalog.
    pub ml100k_only: bool,
}

/// K-means over a tensor model's user embeddings and profiles of a seeded
/// sample of the clusters. Writes `profiles.csv` and `profiles.txt` into
/// `out_dir`.
pub fn cmd_analyze(
    model_path: &Path,
    data_dir: &Path,
    out_dir: &Path,
    opts: &AnalyzeOptions,
) -> Result<Vec<CentroidProfile>> {
    let (model, _) = load_model(model_path)?;
    if model.kind() != ModelKind::TensorFusion {
        return Err(LabError::Core(embedlab_core::Error::Usage(format!(
            "{} holds a `{}` model; cluster profiles need a tensor model, use the per-input sensitivity for other kinds",
            model_path.display(),
            model.kind()
        ))));
    }
    let dataset = load_dataset(data_dir)?;
    if model.shape().n_features != dataset.n_tags() {
        return Err(LabError::data(
            model_path,
            format!("model has {} features, dataset has {} tags", model.shape().n_features, dataset.n_tags()),
        ));
    }
    let (titles, features): (Vec<String>, DenseMatrix) = if opts.ml100k_only {
        (dataset.items.iter().map(|m| m.title.clone()).collect(), dataset.item_features())
    } else {
        (dataset.catalog.iter().map(|m| m.title.clone()).collect(), dataset.catalog_features.clone())
    };
    let mut rng = SeededRng::new(opts.seed);
    let clustering = kmeans(&model.embedding_table(), opts.clusters, &mut rng)?;
    let chosen = sample_clusters(&clustering, opts.sample, &mut rng)?;
    let profiles = chosen
        .iter()
        .map(|&c| centroid_profile(&model, c, clustering.centroids.row(c), &dataset.tag_names, &features, &titles))
        .collect::<embedlab_core::Result<Vec<_>>>()?;

    let mut csv = csv::Writer::from_writer(Vec::new());
    let path = out_dir.join("profiles.csv");
    csv.write_record(["cluster", "bias", "list", "rank", "name", "score"]).map_err(|e| csv_error(&path, e))?;
    for p in &profiles {
        let lists: [(&str, &Vec<Ranked>); 4] = [
            ("top_feature", &p.top_features),
            ("bottom_feature", &p.bottom_features),
            ("top_movie", &p.top_movies),
            ("bottom_movie", &p.bottom_movies),
        ];
        for (label, list) in lists {
            for (rank, r) in list.iter().enumerate() {
                csv.write_record([
                    p.cluster.to_string(),
                    p.bias.to_string(),
                    label.to_string(),
                    (rank + 1).to_string(),
                    r.name.clone(),
                    r.score.to_string(),
                ])
                .map_err(|e| csv_error(&path, e))?;
            }
        }
    }
    let bytes = csv.into_inner().map_err(|e| LabError::io(&path, e.into_error()))?;
    write_file(&path, bytes)?;
    write_file(&out_dir.join("profiles.txt"), render_profiles(&profiles))?;
    Ok(profiles)
}

pub fn render_profiles(profiles: &[CentroidProfile]) -> String {
    let names = |l: &[Ranked]| l.iter().map(|r| r.name.as_str()).collect::<Vec<_>>().join(", ");
    let mut out = String::from("cluster | bias | top features | top movies | bottom features | bottom movies\n");
    for p in profiles {
        let _ = writeln!(
            out,
            "{} | {:+.3} | {} | {} | {} | {}",
            p.cluster,
            p.bias,
            names(&p.top_features),
            names(&p.top_movies),
            names(&p.bottom_features),
            names(&p.bottom_movies)
        );
    }
    out
}

/// Reads an embeddings CSV with header `user_id,dim_0,..`.
pub fn read_embeddings(path: &Path) -> Result<(Vec<u32>, EmbeddingTable)> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let dims = headers.len().saturating_sub(1);
    let expected = (0..dims).map(|d| format!("dim_{d}"));
    if headers.get(0) != Some("user_id")
        || !headers.iter().skip(1).eq(expected.clone().collect::<Vec<_>>().iter().map(String::as_str))
    {
        return Err(LabError::parse(path, 1, "header must be user_id,dim_0,...,dim_{d-1}"));
    }
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map_or(0, |p| p.line());
        let id: u32 =
            row.get(0).and_then(|s| s.trim().parse().ok()).ok_or_else(|| LabError::parse(path, line, "bad user_id"))?;
        let values = row
            .iter()
            .skip(1)
            .map(|s| s.trim().parse::<f64>().map_err(|_| LabError::parse(path, line, format!("bad value `{s}`"))))
            .collect::<Result<Vec<f64>>>()?;
        ids.push(id);
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(LabError::data(path, "no embeddings"));
    }
    Ok((ids, EmbeddingTable::new(DenseMatrix::from_rows(&rows)?)))
}

/// PDC sweep of an embeddings CSV against a tab-separated ratings file.
pub fn cmd_pdc(
    embeddings_path: &Path,
    ratings_path: &Path,
    thresholds: &[u32],
    user_distance: UserDistance,
) -> Result<Vec<SweepEntry>> {
    let (ids, table) = read_embeddings(embeddings_path)?;
    let user_index: HashMap<u32, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let records = read_rating_file(ratings_path)?;
    let mut item_index: HashMap<u32, usize> = HashMap::new();
    let mut ratings = Vec::with_capacity(records.len());
    for r in &records {
        let Some(&u) = user_index.get(&r.user_id) else {
            return Err(LabError::data(
                ratings_path,
                format!("user {} has ratings but no row in {}", r.user_id, embeddings_path.display()),
            ));
        };
        let next = item_index.len();
        let i = *item_index.entry(r.item_id).or_insert(next);
        ratings.push(Rating::new(u, i, r.rating as f64));
    }
    Ok(pdc_sweep(&table, &ratings, thresholds, EmbeddingDistance::Euclidean, user_distance)?)
}

pub fn sweep_csv(entries: &[SweepEntry]) -> String {
    let mut s = String::from("threshold,pairs,pdc,note\n");
    for e in entries {
        match &e.outcome {
            Ok(v) => {
                let _ = writeln!(s, "{},{},{v},", e.threshold, e.pairs);
            }
            Err(err) => {
                let _ = writeln!(s, "{},{},n/a,\"{}\"", e.threshold, e.pairs, err.to_string().replace('"', "'"));
            }
        }
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuneResult {
    pub kind: ModelKind,
    pub z: usize,
    pub best: HyperParams,
    pub best_rmse: f64,
    pub points: Vec<GridPoint>,
}

/// Grid search over learning rate × epochs on a seeded split of fold 1's
/// training ratings. Writes `tuning/<kind>_<z>.csv` and `tuning/tuned.toml`.
pub fn cmd_tune(cfg: &ExperimentConfig) -> Result<Vec<TuneResult>> {
    cfg.validate()?;
    let t = &cfg.tuning;
    if !(t.validation_fraction > 0.0 && t.validation_fraction < 1.0) {
        return Err(LabError::Config("validation_fraction must lie in (0, 1)".into()));
    }
    let dataset = load_dataset(&cfg.data)?;
    let fold = dataset.fold(1).ok_or_else(|| LabError::Config("tuning uses fold 1, which is missing".into()))?;
    let mut ratings = dataset.indexed(&fold.train);
    SeededRng::for_stream(cfg.seed, u64::MAX).shuffle(&mut ratings);
    let n_val = ((ratings.len() as f64) * t.validation_fraction).round().max(1.0) as usize;
    let (train_set, validation) = ratings.split_at(ratings.len() - n_val);
    let features = dataset.item_features();
    let shape = Shape::new(dataset.n_users(), dataset.n_tags());

    let mut results = Vec::new();
    for (kind, z) in cfg.grid() {
        let base = cfg.hyper_for(kind)?;
        let grid: Vec<HyperParams> = t
            .learning_rates
            .iter()
            .flat_map(|&lr| t.epochs.iter().map(move |&epochs| HyperParams { learning_rate: lr, epochs, ..base }))
            .collect();
        let (init_seed, _) = cell_seeds(cfg.seed, kind, z, 0);
        let outcome = grid_search(kind, z, shape, &grid, train_set, validation, &features, init_seed)?;
        let mut csv = String::from("learning_rate,epochs,rmse\n");
        for p in &outcome.points {
            let _ = writeln!(csv, "{},{},{}", p.params.learning_rate, p.params.epochs, fmt_opt(p.rmse));
        }
        write_file(&cfg.out.join("tuning").join(format!("{kind}_{z}.csv")), csv)?;
        results.push(TuneResult { kind, z, best: outcome.best, best_rmse: outcome.best_rmse, points: outcome.points });
    }
    // Hyperparameters are per kind, so each kind takes its best z.
    let mut toml = format!("# tuning split: {TUNING_SPLIT}\n");
    for r in &results {
        let _ = writeln!(toml, "# {} z={} validation rmse {}", r.kind, r.z, r.best_rmse);
    }
    for kind in &cfg.kinds {
        let best = results.iter().filter(|r| r.kind == *kind).min_by(|a, b| a.best_rmse.total_cmp(&b.best_rmse));
        if let Some(r) = best {
            let _ = writeln!(
                toml,
                "\n[hyper.{kind}]\nlearning_rate = {:?}\nepochs = {}",
                r.best.learning_rate, r.best.epochs
            );
        }
    }
    write_file(&cfg.out.join("tuning").join("tuned.toml"), toml)?;
    Ok(results)
}
