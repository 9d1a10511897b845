use super::config::PipelineConfig;
use super::plot::{render_svg, PlotData, PlotKind};
use super::stages::{issue_counts, sha256_hex, ExplainResult, ModelResult, PipelineError, Stage, StageFailure, TrainArtifact};
use crate::cluster::{ClusterStats, ElbowCurve};
use crate::explain::{write_shap_long, ImportanceReport};
use crate::ingest::DroppedColumn;
use crate::learn::ModelKind;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const REPORT_SCHEMA: &str = "risklab.report/v1";
pub const MANIFEST_SCHEMA: &str = "risklab.manifest/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub input_file: String,
    pub input_sha256: String,
    pub rows_read: usize,
    pub rows_rejected: usize,
    pub rows_with_warnings: usize,
    pub n: usize,
    pub imputed_values: BTreeMap<String, usize>,
    pub dropped_constant: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenSummary {
    pub threshold: f64,
    pub kept: Vec<String>,
    pub dropped: Vec<DroppedColumn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringSummary {
    pub elbow: ElbowCurve,
    pub k: usize,
    pub k_from_override: bool,
    pub standardized: bool,
    pub clusters: Vec<ClusterStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub smote_before_split: bool,
    pub train_rows: usize,
    pub test_rows: usize,
    pub synthetic_per_class: BTreeMap<usize, usize>,
    pub models: Vec<ModelResult>,
    pub best_position: usize,
    pub best_kind: ModelKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapRanking {
    pub class: String,
    pub base_value: f64,
    /// Features by descending mean |SHAP|, with that mean.
    pub features: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationSummary {
    pub model_position: usize,
    pub importance: ImportanceReport,
    pub shap: Vec<ShapRanking>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    /// Configuration with the output directory removed and the input reduced to its file name.
    pub config: serde_json::Value,
    pub dataset: DatasetSummary,
    pub screen: ScreenSummary,
    pub clustering: ClusteringSummary,
    pub training: TrainingSummary,
    pub explanation: Option<ExplanationSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub role: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub files: Vec<ManifestEntry>,
}

fn config_echo(cfg: &PipelineConfig) -> serde_json::Value {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    if let Some(map) = v.as_object_mut() {
        map.remove("output_dir");
        let name = cfg.input_path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        map.insert("input_path".into(), serde_json::Value::String(name));
    }
    v
}

pub fn build_report(train: &TrainArtifact, explain: Option<&ExplainResult>) -> RunReport {
    let cluster = &train.cluster;
    let ingest = &cluster.ingest;
    let cfg = &ingest.config;
    let (rejected, warnings) = issue_counts(&ingest.issues);
    let class_names = cluster.labeling.class_names();
    let explanation = explain.map(|e| ExplanationSummary {
        model_position: e.position,
        importance: e.importance.clone(),
        shap: (0..e.shap.n_classes)
            .map(|c| ShapRanking {
                class: class_names[c].clone(),
                base_value: e.shap.base_values[c],
                features: e.summary.ranking[c]
                    .iter()
                    .map(|&j| (e.summary.feature_names[j].clone(), e.summary.mean_abs[c][j]))
                    .collect(),
            })
            .collect(),
    });
    RunReport {
        schema: REPORT_SCHEMA.into(),
        config: config_echo(cfg),
        dataset: DatasetSummary {
            input_file: config_echo(cfg)["input_path"].as_str().unwrap_or_default().to_string(),
            input_sha256: ingest.input_sha256.clone(),
            rows_read: ingest.rows_read,
            rows_rejected: rejected,
            rows_with_warnings: warnings,
            n: ingest.records.len(),
            imputed_values: ingest.imputation.counts(),
            dropped_constant: ingest.features.dropped_constant.clone(),
        },
        screen: ScreenSummary {
            threshold: cfg.correlation_threshold,
            kept: ingest.screen.kept.clone(),
            dropped: ingest.screen.dropped.clone(),
        },
        clustering: ClusteringSummary {
            elbow: cluster.elbow.clone(),
            k: cluster.k,
            k_from_override: cluster.k_from_override,
            standardized: cfg.standardize_cluster_features,
            clusters: cluster.labeling.clusters.clone(),
        },
        training: TrainingSummary {
            smote_before_split: train.smote_before_split,
            train_rows: train.y_train.len(),
            test_rows: train.y_test.len(),
            synthetic_per_class: train.synthetic_per_class.clone(),
            models: train.results.clone(),
            best_position: train.best,
            best_kind: train.results[train.best].kind,
        },
        explanation,
    }
}

/// Writes `bytes` to `path.partial`, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut partial = path.as_os_str().to_owned();
    partial.push(".partial");
    let partial = PathBuf::from(partial);
    {
        let mut f = std::fs::File::create(&partial)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&partial, path)
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

struct Files {
    dir: PathBuf,
    entries: Vec<ManifestEntry>,
    written: Vec<PathBuf>,
}

impl Files {
    fn put(&mut self, name: &str, role: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes).map_err(|source| PipelineError {
            stage: Stage::Report,
            failure: StageFailure::Write { path: path.clone(), source },
            written: self.written.clone(),
        })?;
        self.written.push(path);
        self.entries.push(ManifestEntry {
            path: name.into(),
            role: role.into(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }
}

/// Writes the report, its CSV sidecars, the plots and `manifest.json` into
/// `dir`. Plots are rendered from the CSV bytes just written.
pub fn write_report(
    report: &RunReport,
    train: &TrainArtifact,
    explain: Option<&ExplainResult>,
    dir: &Path,
) -> Result<Manifest, PipelineError> {
    std::fs::create_dir_all(dir).map_err(|source| {
        PipelineError::new(Stage::Report, StageFailure::Write { path: dir.to_path_buf(), source })
    })?;
    let mut files = Files { dir: dir.to_path_buf(), entries: Vec::new(), written: Vec::new() };
    let mut json = serde_json::to_string_pretty(report).expect("report serializes");
    json.push('\n');
    files.put("report.json", "data", json.as_bytes())?;

    let clusters = &report.clustering.clusters;
    let table2 = csv_bytes(
        &["rank", "label", "cluster", "count", "mean_positive_rate", "sd_positive_rate", "mean_death_rate", "sd_death_rate"],
        clusters.iter().map(|c| {
            vec![
                c.rank.to_string(),
                c.label.clone(),
                c.cluster.to_string(),
                c.count.to_string(),
                c.mean_positive_rate.to_string(),
                c.sd_positive_rate.to_string(),
                c.mean_death_rate.to_string(),
                c.sd_death_rate.to_string(),
            ]
        }),
    );
    files.put("table2_clusters.csv", "data", &table2)?;

    let t = &report.training;
    let table3 = csv_bytes(
        &["position", "model", "cv_mean", "cv_sd", "test_accuracy", "best"],
        t.models.iter().map(|m| {
            vec![
                m.position.to_string(),
                m.kind.name().to_string(),
                m.cv.mean.to_string(),
                m.cv.sd.to_string(),
                m.test.accuracy.to_string(),
                u8::from(m.position == t.best_position).to_string(),
            ]
        }),
    );
    files.put("table3_models.csv", "data", &table3)?;

    let ingest = &train.cluster.ingest;
    let class_names = train.cluster.labeling.class_names();
    let mut importance = Vec::new();
    let mut shap_long = Vec::new();
    match explain {
        Some(e) => {
            e.importance.write_csv(&mut importance).expect("in-memory write");
            write_shap_long(&mut shap_long, &e.shap, &e.raw, &ingest.features.row_keys, &ingest.features.column_names, &class_names)
                .expect("in-memory write");
        }
        None => {
            importance = csv_bytes(&["feature", "mda_mean", "mda_sd", "mdg", "mda_rank", "mdg_rank"], []);
            shap_long = csv_bytes(&["row", "feature", "class", "value", "shap"], []);
        }
    }
    files.put("importance.csv", "data", &importance)?;
    files.put("shap_long.csv", "data", &shap_long)?;

    let elbow = &report.clustering.elbow;
    let elbow_csv = csv_bytes(
        &["k", "sse", "chosen"],
        elbow.points.iter().map(|p| vec![p.k.to_string(), p.sse.to_string(), u8::from(p.k == report.clustering.k).to_string()]),
    );
    files.put("elbow.csv", "plot_input", &elbow_csv)?;

    let cl = &train.cluster;
    let mut order: Vec<usize> = (0..cl.classes.len()).collect();
    order.sort_by_key(|&i| (cl.classes[i], i));
    let points_csv = csv_bytes(
        &["fips", "positive_rate", "death_rate", "cluster", "rank", "label"],
        order.iter().map(|&i| {
            let cluster = cl.model.assignments[i];
            vec![
                ingest.records[i].fips.clone(),
                ingest.rates.get(i, 0).to_string(),
                ingest.rates.get(i, 1).to_string(),
                cluster.to_string(),
                cl.labeling.rank_of_cluster[cluster].to_string(),
                class_names[cl.classes[i]].clone(),
            ]
        }),
    );
    files.put("clusters.csv", "plot_input", &points_csv)?;

    let plot = |kind: PlotKind, bytes: &[u8]| -> Result<String, PipelineError> {
        let data = PlotData::from_csv(kind, bytes, None).map_err(|e| {
            PipelineError::new(
                Stage::Report,
                StageFailure::Write { path: dir.join(format!("{}.svg", kind.name())), source: std::io::Error::other(e.to_string()) },
            )
        })?;
        Ok(render_svg(&data))
    };
    let mut svgs = vec![(PlotKind::Elbow, plot(PlotKind::Elbow, &elbow_csv)?), (PlotKind::ClusterScatter, plot(PlotKind::ClusterScatter, &points_csv)?)];
    if explain.is_some() {
        svgs.push((PlotKind::ImportanceBars, plot(PlotKind::ImportanceBars, &importance)?));
        svgs.push((PlotKind::ShapRankDots, plot(PlotKind::ShapRankDots, &shap_long)?));
        svgs.push((PlotKind::ShapDependence, plot(PlotKind::ShapDependence, &shap_long)?));
    }
    for (kind, svg) in svgs {
        files.put(&format!("{}.svg", kind.name()), "plot", svg.as_bytes())?;
    }

    files.entries.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest { schema: MANIFEST_SCHEMA.into(), files: files.entries.clone() };
    let mut mj = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    mj.push('\n');
    files.put("manifest.json", "manifest", mj.as_bytes())?;
    Ok(manifest)
}
