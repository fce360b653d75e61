use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use fusemetrics::consistency::ColumnKind;
use fusemetrics::dataset::Dataset;
use fusemetrics::decomposition::{decompose, save_components, ProbeParams};
use fusemetrics::environment::{adjusted_score, env_heuristic, normalize_labels, AdjustedScore, RawEnvLabel};
use fusemetrics::metrics::{eval_metric, pairwise, MetricId, MetricVector};
use fusemetrics::surrogate::{compose_adjusted, predict, SurrogateParams};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::CliError;
use crate::output::{fmt_f64, fmt_opt, sidecar_path, write_csv, write_json, Sidecar, SidecarEntry};
use crate::{pool, EnvSource, Report, RunConfig};

#[derive(Args, Debug, Clone, Default)]
pub struct ClassicalArgs {
    /// Trained probe; adds environment-adjusted classical scores
    #[arg(long)]
    pub probe: Option<PathBuf>,
    /// Write the probe's decomposed components as PGMs under <out>/components
    #[arg(long, requires = "probe")]
    pub dump_components: bool,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SurrogateArgs {
    #[arg(long)]
    pub probe: Option<PathBuf>,
    #[arg(long)]
    pub surrogate: Option<PathBuf>,
}

pub fn load_probe(path: Option<&Path>) -> Result<ProbeParams, CliError> {
    let path = path.ok_or_else(|| CliError::new("MissingArtifact", "no probe given (--probe)"))?;
    if !path.is_file() {
        return Err(CliError::new("MissingArtifact", format!("{} not found", path.display())));
    }
    Ok(ProbeParams::load(path)?)
}

pub fn load_surrogate(path: Option<&Path>) -> Result<SurrogateParams, CliError> {
    let path = path.ok_or_else(|| CliError::new("MissingArtifact", "no surrogate given (--surrogate)"))?;
    if !path.is_file() {
        return Err(CliError::new("MissingArtifact", format!("{} not found", path.display())));
    }
    Ok(SurrogateParams::load(path)?)
}

/// Normalized `env` per scene, from the label file or the image heuristic
/// (normalized over the whole dataset either way).
pub fn scene_env(ds: &Dataset, source: EnvSource, workers: usize) -> Result<BTreeMap<String, f64>, CliError> {
    match source {
        EnvSource::File => Ok(ds.env_labels()?.by_scene()),
        EnvSource::Heuristic => {
            let raw = pool(workers)?.install(|| {
                ds.scenes
                    .par_iter()
                    .map(|s| {
                        let (_, vis) = ds.load_sources(s)?;
                        let (s_ill, s_obs) = env_heuristic(&vis);
                        Ok(RawEnvLabel {
                            scene_id: s.clone(),
                            s_ill,
                            s_obs,
                        })
                    })
                    .collect::<Result<Vec<_>, CliError>>()
            })?;
            Ok(normalize_labels(&raw)?.by_scene())
        }
    }
}

pub const ADJUSTED_HEADER: [&str; 8] = ["scene", "method", "metric", "q_ir", "q_vis", "delta", "env", "q_star"];

fn adjusted_row(scene: &str, method: &str, a: &AdjustedScore) -> Vec<String> {
    vec![
        scene.to_string(),
        method.to_string(),
        a.metric.name().to_string(),
        fmt_f64(a.q_ir),
        fmt_f64(a.q_vis),
        fmt_f64(a.delta),
        fmt_f64(a.env),
        fmt_f64(a.q_star),
    ]
}

fn header(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Per-method mean of each column over scenes; absent cells are skipped and a
/// column with no values for a method stays empty.
fn method_means(
    methods: &[String],
    cols: &[MetricId],
    cells: impl Iterator<Item = (String, MetricId, f64)>,
) -> Vec<Vec<String>> {
    let mut acc: BTreeMap<(String, MetricId), (f64, usize)> = BTreeMap::new();
    for (method, m, v) in cells {
        let e = acc.entry((method, m)).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    methods
        .iter()
        .map(|method| {
            let mut row = vec![method.clone()];
            for &m in cols {
                row.push(fmt_opt(acc.get(&(method.clone(), m)).map(|(s, n)| s / *n as f64)));
            }
            row
        })
        .collect()
}

fn metric_sidecar(cols: &[MetricId]) -> Sidecar {
    cols.iter()
        .map(|m| {
            (
                m.name().to_string(),
                SidecarEntry {
                    kind: ColumnKind::Metric,
                    higher_is_better: true,
                },
            )
        })
        .collect()
}

fn write_means(out: &Path, stem: &str, methods: &[String], cols: &[MetricId], rows: Vec<Vec<String>>) -> Result<[PathBuf; 2], CliError> {
    let mut head = vec!["method".to_string()];
    head.extend(cols.iter().map(|m| m.name().to_string()));
    debug_assert_eq!(rows.len(), methods.len());
    let csv = write_csv(&out.join(format!("{stem}.csv")), &head, &rows)?;
    let side = write_json(&sidecar_path(&csv), &metric_sidecar(cols))?;
    Ok([csv, side])
}

#[derive(Serialize)]
struct MetricTiming {
    total_seconds: f64,
    mean_ms_per_triple: f64,
}

#[derive(Serialize)]
struct ClassicalTiming {
    triples: usize,
    workers: usize,
    wall_seconds: f64,
    per_metric: BTreeMap<String, MetricTiming>,
    /// Mean per-triple time summed over the full-reference metrics.
    full_reference_sum_ms_per_triple: f64,
}

struct ClassicalRow {
    scores: MetricVector,
    seconds: Vec<f64>,
    adjusted: Vec<Result<AdjustedScore, String>>,
}

pub fn run_classical(cfg: &RunConfig, a: &ClassicalArgs) -> Result<Report, CliError> {
    let ds = Dataset::scan(cfg.dataset_root()?)?;
    let probe = a.probe.as_deref().map(|p| load_probe(Some(p))).transpose()?;
    let env = match probe {
        Some(_) => scene_env(&ds, cfg.env_source, cfg.workers)?,
        None => BTreeMap::new(),
    };
    let out = cfg.ensure_output()?;
    let comp_dir = out.join("components");
    if a.dump_components {
        std::fs::create_dir_all(&comp_dir).map_err(|e| CliError::io(&comp_dir, e))?;
    }
    let adj_metrics: Vec<MetricId> = cfg.metrics.iter().copied().filter(|m| m.is_full_reference()).collect();
    let pairs = ds.pairs();
    let start = Instant::now();
    let rows = pool(cfg.workers)?.install(|| {
        pairs
            .par_iter()
            .map(|(scene, method)| {
                let t = ds.load_triple(scene, method)?;
                let mut scores = MetricVector::default();
                let mut seconds = Vec::with_capacity(cfg.metrics.len());
                for &m in &cfg.metrics {
                    let clock = Instant::now();
                    let r = eval_metric(&t, m, cfg.weights);
                    seconds.push(clock.elapsed().as_secs_f64());
                    match r {
                        Ok(s) => {
                            scores.scores.insert(m, s);
                        }
                        Err(e) => {
                            scores.failures.insert(m, e.to_string());
                        }
                    }
                }
                let mut adjusted = Vec::new();
                if let Some(p) = &probe {
                    let d = decompose(&t.fused, p)?;
                    if a.dump_components {
                        save_components(&comp_dir, scene, method, &d)?;
                    }
                    let e = env[scene];
                    for &m in &adj_metrics {
                        let r = pairwise(m, &t.ir, &d.ir_hat)
                            .and_then(|qi| pairwise(m, &t.vis, &d.vis_hat).map(|qv| (qi.value, qv.value)))
                            .and_then(|(qi, qv)| adjusted_score(m, qi, qv, e));
                        adjusted.push(r.map_err(|e| e.to_string()));
                    }
                }
                Ok(ClassicalRow {
                    scores,
                    seconds,
                    adjusted,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    let wall = start.elapsed().as_secs_f64();

    let mut files = Vec::new();
    let mut head = header(&["scene", "method"]);
    head.extend(cfg.metrics.iter().map(|m| m.name().to_string()));
    let mut score_rows = Vec::with_capacity(rows.len());
    let mut fail_rows = Vec::new();
    let mut adj_rows = Vec::new();
    for ((scene, method), r) in pairs.iter().zip(&rows) {
        let mut row = vec![scene.clone(), method.clone()];
        for &m in &cfg.metrics {
            row.push(fmt_opt(r.scores.get(m)));
            if let Some(msg) = r.scores.failures.get(&m) {
                fail_rows.push(vec![scene.clone(), method.clone(), m.name().into(), "vanilla".into(), "error".into(), msg.clone()]);
            } else if r.scores.scores[&m].degenerate {
                fail_rows.push(vec![scene.clone(), method.clone(), m.name().into(), "vanilla".into(), "degenerate".into(), String::new()]);
            }
        }
        score_rows.push(row);
        for (m, adj) in adj_metrics.iter().zip(&r.adjusted) {
            match adj {
                Ok(s) => adj_rows.push(adjusted_row(scene, method, s)),
                Err(msg) => {
                    fail_rows.push(vec![scene.clone(), method.clone(), m.name().into(), "adjusted".into(), "error".into(), msg.clone()])
                }
            }
        }
    }
    files.push(write_csv(&out.join("scores.csv"), &head, &score_rows)?);
    files.push(write_csv(
        &out.join("failures.csv"),
        &header(&["scene", "method", "metric", "stage", "status", "message"]),
        &fail_rows,
    )?);
    let cells = pairs.iter().zip(&rows).flat_map(|((_, method), r)| {
        r.scores.scores.iter().map(move |(m, s)| (method.clone(), *m, s.value))
    });
    files.extend(write_means(out, "method_means", &ds.methods, &cfg.metrics, method_means(&ds.methods, &cfg.metrics, cells))?);
    if probe.is_some() {
        files.push(write_csv(&out.join("adjusted_classical.csv"), &header(&ADJUSTED_HEADER), &adj_rows)?);
        let cells = pairs.iter().zip(&rows).flat_map(|((_, method), r)| {
            r.adjusted.iter().flatten().map(move |s| (method.clone(), s.metric, s.q_star))
        });
        files.extend(write_means(
            out,
            "adjusted_classical_means",
            &ds.methods,
            &adj_metrics,
            method_means(&ds.methods, &adj_metrics, cells),
        )?);
    }

    let n = rows.len();
    let per_metric: BTreeMap<String, MetricTiming> = cfg
        .metrics
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let total: f64 = rows.iter().map(|r| r.seconds[k]).sum();
            (
                m.name().to_string(),
                MetricTiming {
                    total_seconds: total,
                    mean_ms_per_triple: total / n as f64 * 1e3,
                },
            )
        })
        .collect();
    let fr_sum = cfg
        .metrics
        .iter()
        .filter(|m| m.is_full_reference())
        .map(|m| per_metric[m.name()].mean_ms_per_triple)
        .sum();
    let timing = ClassicalTiming {
        triples: n,
        workers: cfg.workers,
        wall_seconds: wall,
        per_metric,
        full_reference_sum_ms_per_triple: fr_sum,
    };
    files.push(write_json(&out.join("timing.json"), &timing)?);
    Ok(Report {
        summary: format!(
            "{} scenes x {} methods = {n} triples, {} metrics, {} failed cells, {wall:.2}s wall",
            ds.scenes.len(),
            ds.methods.len(),
            cfg.metrics.len(),
            fail_rows.iter().filter(|r| r[4] == "error").count()
        ),
        files,
    })
}

#[derive(Serialize)]
struct SurrogateTiming {
    triples: usize,
    workers: usize,
    wall_seconds: f64,
    /// Mean time of one forward pass (decomposition, branches, environment).
    mean_ms_per_triple: f64,
}

pub fn run_surrogate(cfg: &RunConfig, a: &SurrogateArgs) -> Result<Report, CliError> {
    let probe = load_probe(a.probe.as_deref())?;
    let params = load_surrogate(a.surrogate.as_deref())?;
    let ds = Dataset::scan(cfg.dataset_root()?)?;
    let metrics: Vec<MetricId> = params.metrics().iter().copied().filter(|m| cfg.metrics.contains(m)).collect();
    if metrics.is_empty() {
        return Err(CliError::new("Config", "none of the selected metrics is predicted by this surrogate"));
    }
    let out = cfg.ensure_output()?;
    let pairs = ds.pairs();
    let start = Instant::now();
    let rows = pool(cfg.workers)?.install(|| {
        pairs
            .par_iter()
            .map(|(scene, method)| {
                let t = ds.load_triple(scene, method)?;
                let clock = Instant::now();
                let pred = predict(&t, &probe, &params)?;
                let adjusted = compose_adjusted(params.metrics(), &pred)?;
                Ok((clock.elapsed().as_secs_f64(), adjusted))
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    let wall = start.elapsed().as_secs_f64();

    let mut adj_rows = Vec::with_capacity(rows.len() * metrics.len());
    for ((scene, method), (_, adj)) in pairs.iter().zip(&rows) {
        for m in &metrics {
            adj_rows.push(adjusted_row(scene, method, &adj[m]));
        }
    }
    let mut files = vec![write_csv(&out.join("adjusted_surrogate.csv"), &header(&ADJUSTED_HEADER), &adj_rows)?];
    let cells = pairs
        .iter()
        .zip(&rows)
        .flat_map(|((_, method), (_, adj))| metrics.iter().map(move |m| (method.clone(), *m, adj[m].q_star)));
    files.extend(write_means(
        out,
        "adjusted_surrogate_means",
        &ds.methods,
        &metrics,
        method_means(&ds.methods, &metrics, cells),
    )?);
    let n = rows.len();
    let timing = SurrogateTiming {
        triples: n,
        workers: cfg.workers,
        wall_seconds: wall,
        mean_ms_per_triple: rows.iter().map(|r| r.0).sum::<f64>() / n as f64 * 1e3,
    };
    files.push(write_json(&out.join("timing_surrogate.json"), &timing)?);
    Ok(Report {
        summary: format!(
            "{n} triples x {} metrics, {:.2} ms per triple, {wall:.2}s wall",
            metrics.len(),
            timing.mean_ms_per_triple
        ),
        files,
    })
}
