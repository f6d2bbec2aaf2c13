//! Subcommand implementations. Every command writes plain CSV tables plus a
//! `report.json` that embeds the resolved configuration.

use std::fs;
use std::path::Path;

use dictmatch::bundle::{directory_digest, load_library, save_library};
use dictmatch::dictionary::{load_labels, read_matrix, write_matrix};
use dictmatch::glitch::{run_glitch_experiment, GlitchClass};
use dictmatch::group::relevance_by_theta;
use dictmatch::metrics::{
    accuracy, confusion_matrix, dissimilarity_index, precision_recall, relative_error_coeff,
    relative_error_data, spearman,
};
use dictmatch::pipeline::{
    build_library, identify_clusters, match_datum, CompressedLibrary, DssimClassifier, Relevance,
};
use dictmatch::synth::{generate_clustered_dictionary, generate_mixtures, ConeAnalog};
use dictmatch::{Dictionary, MatrixFormat};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{
    BuildLibraryConfig, ClassifyCmdConfig, GlitchBenchConfig, GsIdentifyCmdConfig, MatchCmdConfig,
    SynthConfig, SynthKind,
};
use crate::error::{CliError, CliResult};

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_json(path: &Path, value: &Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialise");
    text.push('\n');
    write_text(path, &text)
}

/// Writes a CSV table; fields containing separators are quoted.
fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
    fn field(s: &str) -> String {
        if s.contains([',', '"', '\n']) {
            format!("\"{}\"", s.replace('"', "\"\""))
        } else {
            s.to_string()
        }
    }
    let mut out = String::new();
    for row in std::iter::once(header).chain(rows.iter().map(|r| r.as_slice())) {
        let line: Vec<String> = row.iter().map(|s| field(s)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    write_text(path, &out)
}

fn strings<T: ToString>(items: &[T]) -> Vec<String> {
    items.iter().map(|v| v.to_string()).collect()
}

fn join_labels(labels: &[usize]) -> String {
    labels
        .iter()
        .map(|l| l.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn report<C: Serialize>(command: &str, config: &C, summary: Value, vectors: Vec<Value>) -> Value {
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "summary": summary,
        "vectors": vectors,
    })
}

/// Test data, one vector per column. An empty file yields `None`.
fn read_data(path: &Path) -> CliResult<Option<DMatrix<f64>>> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    if bytes.iter().all(|b| b.is_ascii_whitespace()) {
        log::warn!("{} holds no test vectors", path.display());
        return Ok(None);
    }
    let m = read_matrix(path, MatrixFormat::from_path(path))?;
    if m.ncols() == 0 {
        log::warn!("{} holds no test vectors", path.display());
        return Ok(None);
    }
    Ok(Some(m))
}

fn check_dim(lib: &CompressedLibrary, data: &DMatrix<f64>) -> CliResult<()> {
    if data.nrows() != lib.dim() {
        return Err(dictmatch::Error::Dimension(format!(
            "test vectors have length {}, library atoms {}",
            data.nrows(),
            lib.dim()
        ))
        .into());
    }
    Ok(())
}

fn labels_of(lib: &CompressedLibrary, clusters: &[usize]) -> Vec<usize> {
    clusters
        .iter()
        .map(|&j| lib.partition.block_labels()[j])
        .collect()
}

fn matrix_ext(format: MatrixFormat) -> &'static str {
    match format {
        MatrixFormat::Csv => "csv",
        MatrixFormat::RawBinary => "bin",
    }
}

/// Dictionary, test data, true cluster labels per vector and, for sparse
/// mixtures, the generating coefficients.
type SynthOutput = (
    Dictionary,
    DMatrix<f64>,
    Vec<Vec<usize>>,
    Option<DMatrix<f64>>,
);

pub fn synth(cfg: &SynthConfig) -> CliResult<Vec<String>> {
    let out = cfg.validate()?;
    create_dir(&out)?;
    let ext = matrix_ext(cfg.format);
    let (dict, data, truth_clusters, coefficients): SynthOutput = match cfg.kind {
        SynthKind::Clustered => {
            let dict = generate_clustered_dictionary(&cfg.clustered)?;
            let batch = generate_mixtures(&dict, &cfg.mixtures)?;
            let labels = dict.labels().unwrap();
            let truth = batch
                .coefficients
                .column_iter()
                .map(|x| {
                    let mut l: Vec<usize> = (0..x.len())
                        .filter(|&j| x[j] != 0.0)
                        .map(|j| labels[j])
                        .collect();
                    l.sort_unstable();
                    l.dedup();
                    l
                })
                .collect();
            (dict, batch.data, truth, Some(batch.coefficients))
        }
        SynthKind::Cone => {
            let cone = ConeAnalog::new(cfg.cone.clone())?;
            let dict = cone.dictionary()?;
            let batch =
                cone.test_batch(cfg.cone_tests, cfg.cone_max_classes, cfg.cone_test_seed)?;
            let truth = batch
                .classes
                .iter()
                .map(|c| c.iter().map(|j| j + 1).collect())
                .collect();
            (dict, batch.data, truth, None)
        }
    };
    let mut files = vec![
        format!("dictionary.{ext}"),
        "labels.csv".into(),
        format!("test_data.{ext}"),
    ];
    write_matrix(&out.join(&files[0]), dict.atoms(), cfg.format)?;
    let mut label_text = String::from("label\n");
    for l in dict.labels().unwrap() {
        label_text.push_str(&format!("{l}\n"));
    }
    write_text(&out.join("labels.csv"), &label_text)?;
    write_matrix(&out.join(&files[2]), &data, cfg.format)?;
    if let Some(x) = &coefficients {
        let name = format!("test_coefficients.{ext}");
        write_matrix(&out.join(&name), x, cfg.format)?;
        files.push(name);
    }
    let rows: Vec<Vec<String>> = truth_clusters
        .iter()
        .enumerate()
        .map(|(i, l)| vec![(i + 1).to_string(), join_labels(l)])
        .collect();
    write_csv(
        &out.join("truth_clusters.csv"),
        &strings(&["index", "labels"]),
        &rows,
    )?;
    files.push("truth_clusters.csv".into());
    let summary = json!({
        "n": dict.n_rows(),
        "p": dict.n_atoms(),
        "test_vectors": data.ncols(),
        "files": files,
    });
    write_json(
        &out.join("report.json"),
        &report("synth-dictionary", cfg, summary, Vec::new()),
    )?;
    Ok(vec![format!(
        "wrote {} atoms of length {} and {} test vectors to {}",
        dict.n_atoms(),
        dict.n_rows(),
        data.ncols(),
        out.display()
    )])
}

pub fn build(cfg: &BuildLibraryConfig) -> CliResult<Vec<String>> {
    let (dict_path, out) = cfg.validate()?;
    let atoms = read_matrix(&dict_path, MatrixFormat::from_path(&dict_path))?;
    let dict = match &cfg.labels {
        Some(p) => Dictionary::with_labels(atoms, load_labels(p)?)?,
        None => Dictionary::new(atoms)?,
    };
    let lib = build_library(&dict, &cfg.build)?;
    save_library(&lib, &out)?;
    let mut lines = Vec::new();
    for j in 0..lib.n_clusters() {
        lines.push(format!(
            "cluster {} (label {}): {} atoms, rank {}, DCE trace {:.6e}",
            j + 1,
            lib.partition.block_labels()[j],
            lib.partition.block(j).len(),
            lib.factors[j].rank(),
            lib.cluster_dce[j].trace()
        ));
    }
    lines.push(format!("bundle digest {}", directory_digest(&out)?));
    Ok(lines)
}

struct MatchOutcome {
    json: Value,
    row: Vec<String>,
    dissimilarity: Option<usize>,
    log_errors: Option<(f64, f64)>,
}

pub fn match_batch(cfg: &MatchCmdConfig) -> CliResult<Vec<String>> {
    let (lib_path, data_path, out) = cfg.validate()?;
    let lib = load_library(&lib_path)?;
    create_dir(&out)?;
    let header = strings(&[
        "index",
        "status",
        "selected_labels",
        "residual_norm",
        "r_b",
        "r_x",
        "dissimilarity",
        "nonzeros",
        "error",
    ]);
    let Some(data) = read_data(&data_path)? else {
        write_csv(&out.join("matches.csv"), &header, &[])?;
        write_csv(
            &out.join("dissimilarity_histogram.csv"),
            &strings(&["dissimilarity", "count"]),
            &[],
        )?;
        write_json(
            &out.join("report.json"),
            &report("match", cfg, json!({"vectors": 0}), Vec::new()),
        )?;
        return Ok(vec!["no test vectors; wrote empty reports".into()]);
    };
    check_dim(&lib, &data)?;
    let truth = match &cfg.truth_coefficients {
        Some(p) => {
            let t = read_matrix(p, MatrixFormat::from_path(p))?;
            if t.shape() != (lib.dictionary.n_atoms(), data.ncols()) {
                return Err(dictmatch::Error::Dimension(format!(
                    "truth coefficients are {}x{}, expected {}x{}",
                    t.nrows(),
                    t.ncols(),
                    lib.dictionary.n_atoms(),
                    data.ncols()
                ))
                .into());
            }
            Some(t)
        }
        None => None,
    };

    let outcomes: Vec<MatchOutcome> = (0..data.ncols())
        .into_par_iter()
        .map(|i| {
            let b = data.column(i).into_owned();
            let run = || -> dictmatch::Result<MatchOutcome> {
                let r = match_datum(&lib, &b, &cfg.matching)?;
                let r_b = relative_error_data(lib.dictionary.atoms(), &b, &r.coefficients)?;
                let mut json = r.to_json(&lib);
                json["index"] = json!(i + 1);
                json["status"] = json!("ok");
                json["r_b"] = json!(r_b);
                let (mut r_x, mut dis, mut log_errors) = (None, None, None);
                if let Some(t) = &truth {
                    let x = lib.to_stored_order(&t.column(i).into_owned());
                    let delta = cfg.delta_rel * x.max();
                    if delta > 0.0 {
                        let e = relative_error_coeff(&x, &r.coefficients)?;
                        let d = dissimilarity_index(&x, &r.coefficients, delta)?;
                        json["r_x"] = json!(e);
                        json["dissimilarity"] = json!(d);
                        r_x = Some(e);
                        dis = Some(d);
                        if e > 0.0 && r_b > 0.0 {
                            log_errors = Some((e.ln(), r_b.ln()));
                        }
                    }
                }
                let nonzeros = r.coefficients.iter().filter(|v| **v != 0.0).count();
                let row = vec![
                    (i + 1).to_string(),
                    "ok".into(),
                    join_labels(&labels_of(&lib, &r.selected)),
                    r.residual_norm.to_string(),
                    r_b.to_string(),
                    r_x.map(|v| v.to_string()).unwrap_or_default(),
                    dis.map(|v| v.to_string()).unwrap_or_default(),
                    nonzeros.to_string(),
                    String::new(),
                ];
                Ok(MatchOutcome {
                    json,
                    row,
                    dissimilarity: dis,
                    log_errors,
                })
            };
            run().unwrap_or_else(|e| failed_outcome(i, &e, 9))
        })
        .collect();

    let failed = outcomes
        .iter()
        .filter(|o| o.json["status"] == "error")
        .count();
    let mut histogram: Vec<usize> = Vec::new();
    for d in outcomes.iter().filter_map(|o| o.dissimilarity) {
        if histogram.len() <= d {
            histogram.resize(d + 1, 0);
        }
        histogram[d] += 1;
    }
    let hist_rows: Vec<Vec<String>> = histogram
        .iter()
        .enumerate()
        .map(|(d, c)| vec![d.to_string(), c.to_string()])
        .collect();
    let scored = histogram.iter().sum::<usize>();
    let (lx, lb): (Vec<f64>, Vec<f64>) = outcomes.iter().filter_map(|o| o.log_errors).unzip();
    let rho = spearman(&lx, &lb).ok();
    let exact = histogram.first().copied().unwrap_or(0);
    let summary = json!({
        "vectors": outcomes.len(),
        "failed": failed,
        "scored": scored,
        "exact_fraction": if scored > 0 { Some(exact as f64 / scored as f64) } else { None },
        "dissimilarity_histogram": histogram,
        "spearman_log_rx_log_rb": rho,
    });
    let rows: Vec<Vec<String>> = outcomes.iter().map(|o| o.row.clone()).collect();
    write_csv(&out.join("matches.csv"), &header, &rows)?;
    write_csv(
        &out.join("dissimilarity_histogram.csv"),
        &strings(&["dissimilarity", "count"]),
        &hist_rows,
    )?;
    let vectors = outcomes.into_iter().map(|o| o.json).collect();
    write_json(
        &out.join("report.json"),
        &report("match", cfg, summary, vectors),
    )?;
    let mut lines = vec![format!("matched {} vectors ({failed} failed)", rows.len())];
    if scored > 0 {
        lines.push(format!("I_delta = 0 in {exact}/{scored}"));
    }
    Ok(lines)
}

fn failed_outcome(i: usize, e: &dictmatch::Error, columns: usize) -> MatchOutcome {
    log::warn!("vector {}: {e}", i + 1);
    let mut row = vec![String::new(); columns];
    row[0] = (i + 1).to_string();
    row[1] = "error".into();
    row[columns - 1] = e.to_string();
    MatchOutcome {
        json: json!({"index": i + 1, "status": "error", "error": e.to_string()}),
        row,
        dissimilarity: None,
        log_errors: None,
    }
}

pub fn classify(cfg: &ClassifyCmdConfig) -> CliResult<Vec<String>> {
    let (lib_path, data_path, out) = cfg.validate()?;
    let lib = load_library(&lib_path)?;
    create_dir(&out)?;
    let class_labels = lib.partition.block_labels().to_vec();
    let mut header = strings(&["index", "status", "predicted_label"]);
    header.extend(class_labels.iter().map(|l| format!("dssim_{l}")));
    header.push("error".into());
    let Some(data) = read_data(&data_path)? else {
        write_csv(&out.join("classifications.csv"), &header, &[])?;
        write_json(
            &out.join("report.json"),
            &report("classify", cfg, json!({"vectors": 0}), Vec::new()),
        )?;
        return Ok(vec!["no test vectors; wrote empty reports".into()]);
    };
    check_dim(&lib, &data)?;
    let truth = cfg.truth_labels.as_ref().map(load_labels).transpose()?;
    if let Some(t) = &truth {
        if t.len() != data.ncols() {
            return Err(dictmatch::Error::Dimension(format!(
                "{} truth labels for {} vectors",
                t.len(),
                data.ncols()
            ))
            .into());
        }
    }
    let classifier = DssimClassifier::new(&lib, cfg.noise_std, &cfg.classify)?;
    let k = class_labels.len();
    let results: Vec<Result<(usize, Vec<f64>), String>> = (0..data.ncols())
        .into_par_iter()
        .map(|i| {
            classifier
                .classify(&data.column(i).into_owned())
                .map(|c| (c.label, c.dssim))
                .map_err(|e| {
                    log::warn!("vector {}: {e}", i + 1);
                    e.to_string()
                })
        })
        .collect();
    let mut rows = Vec::new();
    let mut vectors = Vec::new();
    for (i, r) in results.iter().enumerate() {
        match r {
            Ok((label, dssim)) => {
                let mut row = vec![(i + 1).to_string(), "ok".into(), label.to_string()];
                row.extend(dssim.iter().map(|d| d.to_string()));
                row.push(String::new());
                rows.push(row);
                vectors
                    .push(json!({"index": i + 1, "status": "ok", "label": label, "dssim": dssim}));
            }
            Err(e) => {
                let mut row = vec![(i + 1).to_string(), "error".into(), String::new()];
                row.extend(std::iter::repeat_n(String::new(), k));
                row.push(e.clone());
                rows.push(row);
                vectors.push(json!({"index": i + 1, "status": "error", "error": e}));
            }
        }
    }
    write_csv(&out.join("classifications.csv"), &header, &rows)?;
    let failed = results.iter().filter(|r| r.is_err()).count();
    let mut summary = json!({"vectors": results.len(), "failed": failed, "labels": class_labels});
    let mut lines = vec![format!(
        "classified {} vectors ({failed} failed)",
        results.len()
    )];
    if let Some(t) = &truth {
        let index_of = |l: usize| class_labels.iter().position(|&c| c == l);
        let mut truth_idx = Vec::new();
        let mut pred_idx = Vec::new();
        for (i, r) in results.iter().enumerate() {
            if let (Ok((p, _)), Some(ti)) = (r, index_of(t[i])) {
                truth_idx.push(ti + 1);
                pred_idx.push(index_of(*p).expect("predicted labels come from the library") + 1);
            }
        }
        if !truth_idx.is_empty() {
            let conf = confusion_matrix(&truth_idx, &pred_idx, k)?;
            let acc = accuracy(&conf);
            write_confusion(&out.join("confusion.csv"), &conf, &class_labels)?;
            summary["accuracy"] = json!(acc);
            summary["confusion"] = json!(conf
                .row_iter()
                .map(|r| r.iter().copied().collect::<Vec<_>>())
                .collect::<Vec<_>>());
            lines.push(format!("accuracy {acc:.4}"));
        }
    }
    write_json(
        &out.join("report.json"),
        &report("classify", cfg, summary, vectors),
    )?;
    Ok(lines)
}

/// Rows are predicted classes, columns true classes.
fn write_confusion(path: &Path, conf: &DMatrix<usize>, labels: &[usize]) -> CliResult<()> {
    let mut header = vec!["predicted\\true".to_string()];
    header.extend(labels.iter().map(|l| l.to_string()));
    let rows: Vec<Vec<String>> = conf
        .row_iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = vec![labels[i].to_string()];
            row.extend(r.iter().map(|c| c.to_string()));
            row
        })
        .collect();
    write_csv(path, &header, &rows)
}

/// Reads `index,labels` rows where labels are space separated.
fn read_truth_clusters(path: &Path) -> CliResult<Vec<Vec<usize>>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (row, line) in text.lines().enumerate() {
        if row == 0 && line.trim_start().starts_with("index") || line.trim().is_empty() {
            continue;
        }
        let field = line.split(',').nth(1).unwrap_or("");
        let labels = field
            .split_whitespace()
            .map(|s| {
                s.parse::<usize>().map_err(|e| dictmatch::Error::Parse {
                    row: row + 1,
                    col: 2,
                    msg: format!("{s:?}: {e}"),
                })
            })
            .collect::<dictmatch::Result<Vec<usize>>>()?;
        out.push(labels);
    }
    Ok(out)
}

/// Selected clusters and their theta values.
type Selection = (Vec<usize>, Vec<f64>);

pub fn gs_identify(cfg: &GsIdentifyCmdConfig) -> CliResult<Vec<String>> {
    let (lib_path, data_path, out) = cfg.validate()?;
    let lib = load_library(&lib_path)?;
    create_dir(&out)?;
    let class_labels = lib.partition.block_labels().to_vec();
    let mut header = strings(&["index", "status", "selected_labels"]);
    header.extend(class_labels.iter().map(|l| format!("theta_{l}")));
    header.push("error".into());
    let Some(data) = read_data(&data_path)? else {
        write_csv(&out.join("identify.csv"), &header, &[])?;
        write_json(
            &out.join("report.json"),
            &report("gs-identify", cfg, json!({"vectors": 0}), Vec::new()),
        )?;
        return Ok(vec!["no test vectors; wrote empty reports".into()]);
    };
    check_dim(&lib, &data)?;
    let truth = cfg
        .truth_clusters
        .as_deref()
        .map(read_truth_clusters)
        .transpose()?;
    if let Some(t) = &truth {
        if t.len() != data.ncols() {
            return Err(dictmatch::Error::Dimension(format!(
                "{} truth rows for {} vectors",
                t.len(),
                data.ncols()
            ))
            .into());
        }
    }
    let results: Vec<Result<Selection, String>> = (0..data.ncols())
        .into_par_iter()
        .map(|i| {
            identify_clusters(&lib, &data.column(i).into_owned(), &cfg.identify)
                .map(|id| (id.selected, id.theta))
                .map_err(|e| {
                    log::warn!("vector {}: {e}", i + 1);
                    e.to_string()
                })
        })
        .collect();
    let mut rows = Vec::new();
    let mut vectors = Vec::new();
    for (i, r) in results.iter().enumerate() {
        match r {
            Ok((sel, theta)) => {
                let labels = labels_of(&lib, sel);
                let mut row = vec![(i + 1).to_string(), "ok".into(), join_labels(&labels)];
                row.extend(theta.iter().map(|t| t.to_string()));
                row.push(String::new());
                rows.push(row);
                vectors.push(json!({"index": i + 1, "status": "ok", "selected_clusters": labels, "theta": theta}));
            }
            Err(e) => {
                let mut row = vec![(i + 1).to_string(), "error".into(), String::new()];
                row.extend(std::iter::repeat_n(String::new(), class_labels.len()));
                row.push(e.clone());
                rows.push(row);
                vectors.push(json!({"index": i + 1, "status": "error", "error": e}));
            }
        }
    }
    write_csv(&out.join("identify.csv"), &header, &rows)?;
    let failed = results.iter().filter(|r| r.is_err()).count();
    let mut summary = json!({"vectors": results.len(), "failed": failed});
    let mut lines = vec![format!(
        "identified clusters for {} vectors ({failed} failed)",
        results.len()
    )];
    if let Some(t) = &truth {
        let pr = |selected: &[usize], i: usize| -> Option<(f64, f64)> {
            if t[i].is_empty() {
                return None;
            }
            precision_recall(&labels_of(&lib, selected), &t[i]).ok()
        };
        let mean = |pairs: &[(f64, f64)]| -> (f64, f64) {
            let n = pairs.len().max(1) as f64;
            (
                pairs.iter().map(|p| p.0).sum::<f64>() / n,
                pairs.iter().map(|p| p.1).sum::<f64>() / n,
            )
        };
        let at_config: Vec<(f64, f64)> = results
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.as_ref().ok().and_then(|(sel, _)| pr(sel, i)))
            .collect();
        let (p, rc) = mean(&at_config);
        summary["mean_precision"] = json!(p);
        summary["mean_recall"] = json!(rc);
        lines.push(format!("mean precision {p:.4}, mean recall {rc:.4}"));
        if matches!(cfg.identify.relevance, Relevance::ThetaRatio { .. }) {
            let mut curve = Vec::new();
            for &ts in &cfg.theta_star_sweep {
                let pairs: Vec<(f64, f64)> = results
                    .iter()
                    .enumerate()
                    .filter_map(|(i, r)| {
                        let (_, theta) = r.as_ref().ok()?;
                        pr(&relevance_by_theta(theta, ts).ok()?, i)
                    })
                    .collect();
                let (p, rc) = mean(&pairs);
                curve.push(vec![
                    ts.to_string(),
                    p.to_string(),
                    rc.to_string(),
                    pairs.len().to_string(),
                ]);
            }
            write_csv(
                &out.join("precision_recall.csv"),
                &strings(&["theta_star", "mean_precision", "mean_recall", "vectors"]),
                &curve,
            )?;
        } else {
            log::warn!("theta_star sweep skipped: relevance rule is not theta-ratio");
        }
    }
    write_json(
        &out.join("report.json"),
        &report("gs-identify", cfg, summary, vectors),
    )?;
    Ok(lines)
}

pub fn glitch_bench(cfg: &GlitchBenchConfig) -> CliResult<Vec<String>> {
    let out = cfg.validate()?;
    create_dir(&out)?;
    let r = run_glitch_experiment(&cfg.experiment)?;
    let labels: Vec<usize> = GlitchClass::ALL.iter().map(|c| c.label()).collect();
    let conf = DMatrix::from_fn(3, 3, |i, j| r.confusion[i][j]);
    write_confusion(&out.join("confusion.csv"), &conf, &labels)?;
    let rows: Vec<Vec<String>> = r
        .truth
        .iter()
        .zip(&r.predicted)
        .enumerate()
        .map(|(i, (t, p))| vec![(i + 1).to_string(), t.to_string(), p.to_string()])
        .collect();
    write_csv(
        &out.join("predictions.csv"),
        &strings(&["index", "true_label", "predicted_label"]),
        &rows,
    )?;
    let summary = json!({
        "accuracy": r.accuracy,
        "per_class_rates": r.per_class_rates,
        "ranks": r.ranks,
        "confusion": r.confusion,
        "class_names": ["SG", "G", "RD"],
    });
    write_json(
        &out.join("report.json"),
        &report("glitch-bench", cfg, summary, Vec::new()),
    )?;
    Ok(vec![
        format!("accuracy {:.4}", r.accuracy),
        format!("ranks SG/G/RD {:?}", r.ranks),
    ])
}
