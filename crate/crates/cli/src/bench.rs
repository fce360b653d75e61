//! Sequential timing of each classical metric and of the surrogate forward
//! pass over the same triples. The first triple is run once as warmup and not
//! recorded.

use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use fusemetrics::dataset::Dataset;
use fusemetrics::decomposition::ProbeParams;
use fusemetrics::metrics::{eval_metric, FusionTriple, MetricId, VanillaWeights};
use fusemetrics::surrogate::{predict_adjusted, SurrogateParams, DEFAULT_HEADS};
use fusemetrics::Plane;
use serde::Serialize;

use crate::error::CliError;
use crate::eval::{load_probe, load_surrogate};
use crate::output::{pretty_table, write_json};
use crate::{Report, RunConfig};

#[derive(Args, Debug, Clone, Default)]
pub struct BenchArgs {
    /// Probe artifact; an untrained probe is timed when absent
    #[arg(long)]
    pub probe: Option<PathBuf>,
    /// Surrogate artifact; an untrained surrogate is timed when absent
    #[arg(long)]
    pub surrogate: Option<PathBuf>,
    /// Time at most this many triples
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Timing {
    pub name: String,
    pub n: usize,
    pub mean_ms: f64,
    /// Sample standard deviation.
    pub std_ms: f64,
}

impl Timing {
    pub fn from_seconds(name: &str, secs: &[f64]) -> Self {
        let n = secs.len();
        let mean = secs.iter().sum::<f64>() / n.max(1) as f64;
        let var = if n > 1 {
            secs.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Timing {
            name: name.to_string(),
            n,
            mean_ms: mean * 1e3,
            std_ms: var.sqrt() * 1e3,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub triples: usize,
    pub width: usize,
    pub height: usize,
    pub metrics: Vec<Timing>,
    /// Per-triple sum over the timed full-reference metrics.
    pub classical_sum: Timing,
    pub surrogate: Timing,
    pub surrogate_trained: bool,
    /// `classical_sum.mean_ms / surrogate.mean_ms`.
    pub speedup: f64,
}

impl BenchReport {
    pub fn table(&self) -> String {
        let head = ["path", "n", "mean_ms", "std_ms"].map(String::from);
        let row = |t: &Timing| vec![t.name.clone(), t.n.to_string(), format!("{:.3}", t.mean_ms), format!("{:.3}", t.std_ms)];
        let mut rows: Vec<Vec<String>> = self.metrics.iter().map(row).collect();
        rows.push(row(&self.classical_sum));
        rows.push(row(&self.surrogate));
        format!(
            "{}speedup (classical sum / surrogate): {:.1}x over {} triples at {}x{}\n",
            pretty_table(&head, &rows),
            self.speedup,
            self.triples,
            self.width,
            self.height
        )
    }

    pub fn metric(&self, m: MetricId) -> Option<&Timing> {
        self.metrics.iter().find(|t| t.name == m.name())
    }
}

/// Times `n` triples produced by `load` (called once per index, in order).
/// The loader runs outside the clocks.
pub fn bench_triples(
    n: usize,
    metrics: &[MetricId],
    w: VanillaWeights,
    probe: &ProbeParams,
    surrogate: &SurrogateParams,
    surrogate_trained: bool,
    mut load: impl FnMut(usize) -> Result<FusionTriple, CliError>,
) -> Result<BenchReport, CliError> {
    if n == 0 {
        return Err(CliError::new("Config", "nothing to benchmark"));
    }
    let mut per_metric = vec![Vec::with_capacity(n); metrics.len()];
    let mut sums = Vec::with_capacity(n);
    let mut surr = Vec::with_capacity(n);
    let (mut width, mut height) = (0, 0);
    let warm = load(0)?;
    for &m in metrics {
        let _ = eval_metric(&warm, m, w);
    }
    predict_adjusted(&warm, probe, surrogate)?;
    for i in 0..n {
        let t = load(i)?;
        (width, height) = (t.fused.width(), t.fused.height());
        let mut sum = 0.0;
        for (k, &m) in metrics.iter().enumerate() {
            let clock = Instant::now();
            // failures still cost time; the score itself is not needed
            let _ = std::hint::black_box(eval_metric(&t, m, w));
            let s = clock.elapsed().as_secs_f64();
            per_metric[k].push(s);
            if m.is_full_reference() {
                sum += s;
            }
        }
        sums.push(sum);
        let clock = Instant::now();
        std::hint::black_box(predict_adjusted(&t, probe, surrogate)?);
        surr.push(clock.elapsed().as_secs_f64());
    }
    let classical_sum = Timing::from_seconds("classical_sum", &sums);
    let surrogate = Timing::from_seconds("surrogate", &surr);
    Ok(BenchReport {
        triples: n,
        width,
        height,
        metrics: metrics.iter().zip(&per_metric).map(|(m, s)| Timing::from_seconds(m.name(), s)).collect(),
        speedup: classical_sum.mean_ms / surrogate.mean_ms,
        classical_sum,
        surrogate,
        surrogate_trained,
    })
}

pub fn run(cfg: &RunConfig, a: &BenchArgs) -> Result<Report, CliError> {
    let ds = Dataset::scan(cfg.dataset_root()?)?;
    let probe = match &a.probe {
        Some(p) => load_probe(Some(p))?,
        None => ProbeParams::init(cfg.seed),
    };
    let (surrogate, trained) = match &a.surrogate {
        Some(p) => (load_surrogate(Some(p))?, a.probe.is_some()),
        None => (SurrogateParams::init(DEFAULT_HEADS, cfg.seed)?, false),
    };
    let pairs = ds.pairs();
    let n = a.limit.map_or(pairs.len(), |l| l.min(pairs.len()));
    let report = bench_triples(n, &cfg.metrics, cfg.weights, &probe, &surrogate, trained, |i| {
        let (s, m) = &pairs[i];
        Ok(ds.load_triple(s, m)?)
    })?;
    let out = cfg.ensure_output()?;
    let path = write_json(&out.join("bench.json"), &report)?;
    Ok(Report {
        summary: report.table(),
        files: vec![path],
    })
}
