//! Metric-consistency reports from a score table (`method,<col>,...` CSV plus
//! a JSON sidecar declaring each column's kind and direction).

use std::path::{Path, PathBuf};

use clap::Args;
use fusemetrics::consistency::{
    mc_report, Column, ColumnKind, ConsistencyParams, McCell, McReport, McResult, McTerm, ScoreTable,
};

use crate::error::CliError;
use crate::output::{fmt_f64, pretty_table, sidecar_path, write_csv, write_json, Sidecar};
use crate::{Report, RunConfig};

#[derive(Args, Debug, Clone, Default)]
pub struct McArgs {
    /// Score table CSV
    #[arg(long, required_unless_present = "from_breakdown")]
    pub scores: Option<PathBuf>,
    /// Column sidecar JSON [default: the score CSV with a .json extension]
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    /// Comma-separated metric columns [default: every column of kind metric]
    #[arg(long)]
    pub metric_cols: Option<String>,
    /// Comma-separated reference columns [default: every column of kind reference]
    #[arg(long)]
    pub reference_cols: Option<String>,
    /// Rebuild the matrix from an existing mc_breakdown.csv instead
    #[arg(long, conflicts_with = "scores")]
    pub from_breakdown: Option<PathBuf>,
    /// Parameters of the breakdown [default: mc_params.json next to it]
    #[arg(long, requires = "from_breakdown")]
    pub params: Option<PathBuf>,
}

fn parse_err(path: &Path, line: u64, msg: impl std::fmt::Display) -> CliError {
    CliError::new("Parse", format!("{}:{line}: {msg}", path.display()))
}

fn line_of(r: &csv::StringRecord) -> u64 {
    r.position().map(|p| p.line()).unwrap_or(0)
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>, CliError> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))
}

fn record(path: &Path, r: Result<csv::StringRecord, csv::Error>) -> Result<csv::StringRecord, CliError> {
    r.map_err(|e| {
        let line = e.position().map(|p| p.line()).unwrap_or(0);
        parse_err(path, line, e)
    })
}

/// Reads a score table and its sidecar. Every CSV column needs a sidecar
/// entry and every sidecar entry a CSV column.
pub fn read_table(csv_path: &Path, sidecar: &Path) -> Result<(ScoreTable, Sidecar), CliError> {
    let mut rdr = csv_reader(csv_path)?;
    let head = rdr.headers().map_err(|e| parse_err(csv_path, 1, e))?.clone();
    if head.get(0) != Some("method") {
        return Err(parse_err(csv_path, 1, "first column must be \"method\""));
    }
    let cols: Vec<String> = head.iter().skip(1).map(str::to_owned).collect();
    if cols.is_empty() {
        return Err(parse_err(csv_path, 1, "no score columns"));
    }
    let text = std::fs::read_to_string(sidecar).map_err(|e| CliError::io(sidecar, e))?;
    let side: Sidecar = serde_json::from_str(&text).map_err(|e| {
        CliError::new("Parse", format!("{}:{}: {e}", sidecar.display(), e.line()))
    })?;
    if let Some(c) = cols.iter().find(|c| !side.contains_key(*c)) {
        return Err(CliError::new("Parse", format!("{}: no entry for column {c:?}", sidecar.display())));
    }
    if let Some(c) = side.keys().find(|c| !cols.contains(c)) {
        return Err(CliError::new("UnknownColumn", format!("sidecar column {c:?} is not in {}", csv_path.display())));
    }
    let mut methods = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); cols.len()];
    for r in rdr.records() {
        let r = record(csv_path, r)?;
        let line = line_of(&r);
        let method = r.get(0).unwrap_or_default();
        if method.is_empty() {
            return Err(parse_err(csv_path, line, "empty method id"));
        }
        if methods.iter().any(|m| m == method) {
            return Err(parse_err(csv_path, line, format!("duplicate method {method:?}")));
        }
        methods.push(method.to_owned());
        for (k, col) in cols.iter().enumerate() {
            let cell = r.get(k + 1).unwrap_or_default();
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(csv_path, line, format!("column {col:?}: {cell:?} is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(csv_path, line, format!("column {col:?}: non-finite score")));
            }
            values[k].push(v);
        }
    }
    let mut table = ScoreTable::new(methods)?;
    for (col, v) in cols.iter().zip(values) {
        let e = &side[col];
        table.add_column(
            col,
            Column {
                kind: e.kind,
                higher_is_better: e.higher_is_better,
                values: v,
            },
        )?;
    }
    Ok((table, side))
}

fn pick(list: &Option<String>, table: &ScoreTable, kind: ColumnKind) -> Vec<String> {
    match list {
        Some(l) => l.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
        None => table.column_names(kind),
    }
}

const BREAKDOWN_HEADER: [&str; 7] = ["metric", "reference", "method", "rank_metric", "rank_reference", "delta_rank", "weight"];

fn matrix_rows(report: &McReport) -> (Vec<String>, Vec<Vec<String>>) {
    let mut metrics: Vec<&str> = Vec::new();
    let mut refs: Vec<&str> = Vec::new();
    for c in &report.cells {
        if !metrics.contains(&c.metric.as_str()) {
            metrics.push(&c.metric);
        }
        if !refs.contains(&c.reference.as_str()) {
            refs.push(&c.reference);
        }
    }
    let mut head = vec!["metric".to_string()];
    head.extend(refs.iter().map(|r| r.to_string()));
    let rows = metrics
        .iter()
        .map(|m| {
            let mut row = vec![m.to_string()];
            for r in &refs {
                row.push(report.get(m, r).map(fmt_f64).unwrap_or_default());
            }
            row
        })
        .collect();
    (head, rows)
}

fn write_matrix(out: &Path, report: &McReport) -> Result<(PathBuf, String), CliError> {
    let (head, rows) = matrix_rows(report);
    let path = write_csv(&out.join("mc_matrix.csv"), &head, &rows)?;
    let short: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .map(|(i, c)| if i == 0 { c.clone() } else { format!("{:.4}", c.parse::<f64>().unwrap_or(f64::NAN)) })
                .collect()
        })
        .collect();
    Ok((path, pretty_table(&head, &short)))
}

fn write_breakdown(out: &Path, report: &McReport) -> Result<PathBuf, CliError> {
    let mut rows = Vec::new();
    for c in &report.cells {
        for (method, t) in report.methods.iter().zip(&c.result.terms) {
            rows.push(vec![
                c.metric.clone(),
                c.reference.clone(),
                method.clone(),
                t.rank_metric.to_string(),
                t.rank_reference.to_string(),
                t.delta_rank.to_string(),
                fmt_f64(t.weight),
            ]);
        }
    }
    write_csv(&out.join("mc_breakdown.csv"), &BREAKDOWN_HEADER.map(String::from), &rows)
}

/// Rebuilds a report from breakdown rows; MC is recomputed from the stored
/// ranks and weights in stored order.
pub fn read_breakdown(path: &Path, params: ConsistencyParams) -> Result<McReport, CliError> {
    let mut rdr = csv_reader(path)?;
    let head = rdr.headers().map_err(|e| parse_err(path, 1, e))?.clone();
    if head.iter().collect::<Vec<_>>() != BREAKDOWN_HEADER {
        return Err(parse_err(path, 1, format!("expected header {}", BREAKDOWN_HEADER.join(","))));
    }
    let mut methods: Vec<String> = Vec::new();
    let mut cells: Vec<(String, String, Vec<McTerm>)> = Vec::new();
    for r in rdr.records() {
        let r = record(path, r)?;
        let line = line_of(&r);
        let int = |k: usize| -> Result<usize, CliError> {
            r.get(k)
                .unwrap_or_default()
                .parse()
                .map_err(|_| parse_err(path, line, format!("{}: not a non-negative integer", BREAKDOWN_HEADER[k])))
        };
        let weight: f64 = r
            .get(6)
            .unwrap_or_default()
            .parse()
            .map_err(|_| parse_err(path, line, "weight: not a number"))?;
        let term = McTerm {
            rank_metric: int(3)?,
            rank_reference: int(4)?,
            delta_rank: int(5)?,
            weight,
        };
        if term.delta_rank != term.rank_metric.abs_diff(term.rank_reference) {
            return Err(parse_err(path, line, "delta_rank does not match the ranks"));
        }
        let (m, rf, method) = (r.get(0).unwrap_or_default(), r.get(1).unwrap_or_default(), r.get(2).unwrap_or_default());
        match cells.last_mut() {
            Some((cm, cr, terms)) if cm == m && cr == rf => terms.push(term),
            _ => cells.push((m.to_string(), rf.to_string(), vec![term])),
        }
        let k = cells.last().map(|c| c.2.len() - 1).unwrap_or(0);
        if cells.len() == 1 {
            methods.push(method.to_string());
        } else if methods.get(k).map(String::as_str) != Some(method) {
            return Err(parse_err(path, line, format!("method {method:?} out of order for this cell")));
        }
    }
    if let Some((m, r, t)) = cells.iter().find(|c| c.2.len() != methods.len()) {
        return Err(CliError::new(
            "Parse",
            format!("{}: cell {m}/{r} has {} methods, expected {}", path.display(), t.len(), methods.len()),
        ));
    }
    Ok(McReport {
        methods,
        params,
        cells: cells
            .into_iter()
            .map(|(metric, reference, terms)| McCell {
                metric,
                reference,
                result: McResult {
                    mc: McResult::recompute(&terms, params.s),
                    weighted_sum: terms.iter().map(|t| t.weight * t.delta_rank as f64).sum(),
                    terms,
                },
            })
            .collect(),
    })
}

pub fn run(cfg: &RunConfig, a: &McArgs) -> Result<Report, CliError> {
    let out = cfg.ensure_output()?.to_path_buf();
    if let Some(bd) = &a.from_breakdown {
        let params_path = a.params.clone().unwrap_or_else(|| bd.with_file_name("mc_params.json"));
        let text = std::fs::read_to_string(&params_path).map_err(|e| CliError::io(&params_path, e))?;
        let raw: ConsistencyParams = serde_json::from_str(&text)
            .map_err(|e| CliError::new("Parse", format!("{}:{}: {e}", params_path.display(), e.line())))?;
        let params = ConsistencyParams::new(raw.alpha, raw.beta, raw.s)?;
        let report = read_breakdown(bd, params)?;
        let (path, table) = write_matrix(&out, &report)?;
        return Ok(Report {
            summary: table,
            files: vec![path],
        });
    }
    let scores = a.scores.as_ref().expect("clap enforces --scores");
    let sidecar = a.sidecar.clone().unwrap_or_else(|| sidecar_path(scores));
    let (table, _) = read_table(scores, &sidecar)?;
    let metric_cols = pick(&a.metric_cols, &table, ColumnKind::Metric);
    let reference_cols = pick(&a.reference_cols, &table, ColumnKind::Reference);
    if metric_cols.is_empty() || reference_cols.is_empty() {
        return Err(CliError::new(
            "Config",
            "need at least one metric and one reference column (check the sidecar kinds or pass --metric-cols/--reference-cols)",
        ));
    }
    let report = mc_report(&table, &metric_cols, &reference_cols, &cfg.consistency)?;
    let (matrix, pretty) = write_matrix(&out, &report)?;
    let files = vec![
        matrix,
        write_breakdown(&out, &report)?,
        write_json(&out.join("mc_params.json"), &report.params)?,
    ];
    Ok(Report {
        summary: format!(
            "{} methods, alpha {} beta {} s {}\n{pretty}",
            report.methods.len(),
            report.params.alpha,
            report.params.beta,
            report.params.s
        ),
        files,
    })
}
