//! Operation logs, replay, evaluation against exact optima, dendrogram
//! dumps, validation and timing benchmarks. The binary is a thin layer
//! over these functions.

use std::collections::BTreeSet;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::backend::Backend;
use crate::baselines::{opt_center_profile, opt_diam_profile, CENTER_GUARD, DIAM_GUARD};
use crate::error::Error;
use crate::hierarchy::{self, clustering_at_k, validate_family, Family, GoodFamily};
use crate::model::{center_cost, diameter_cost, Config, CostValue, Mode, Point};

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("checkpoint after {ops} operations has {size} points, above the oracle guard of {guard}")]
    Guard { ops: usize, size: usize, guard: usize },
    #[error("line {line}: {message}")]
    Strict { line: usize, message: String },
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Io(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Parse { .. } => 2,
            HarnessError::Guard { .. } => 3,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for HarnessError {
    fn from(e: serde_json::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

pub type HarnessResult<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Op {
    Insert(Point),
    Delete(Point),
    Query(Point, usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub d: usize,
    pub delta: i64,
    pub mode: Mode,
    pub ell: usize,
    pub seed: u64,
}

impl Default for Header {
    fn default() -> Self {
        Header { d: 1, delta: 1, mode: Mode::LowDim, ell: 1, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpsLog {
    pub header: Header,
    /// Operations with their 1-based source line.
    pub ops: Vec<(usize, Op)>,
}

/// Command-line values that take precedence over the header.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub ell: Option<usize>,
    pub seed: Option<u64>,
}

impl OpsLog {
    pub fn config(&self, over: &Overrides) -> Config {
        let h = &self.header;
        let mut cfg = Config::low_dim(h.d, h.delta);
        cfg.mode = over.mode.unwrap_or(h.mode);
        cfg.ell = over.ell.unwrap_or(h.ell);
        cfg.seed = over.seed.unwrap_or(h.seed);
        cfg
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> HarnessError {
    HarnessError::Parse { line, message: message.into() }
}

fn parse_header(line: usize, fields: &[&str]) -> HarnessResult<Header> {
    let mut h = Header::default();
    let (mut got_d, mut got_delta) = (false, false);
    for f in fields {
        let (key, value) = f.split_once('=').ok_or_else(|| parse_err(line, format!("expected key=value, got `{f}`")))?;
        let bad = |_| parse_err(line, format!("bad value for {key}: `{value}`"));
        match key {
            "d" => {
                h.d = value.parse().map_err(bad)?;
                got_d = true;
            }
            "delta" => {
                h.delta = value.parse().map_err(bad)?;
                got_delta = true;
            }
            "mode" => h.mode = Mode::from_str(value).map_err(|e| parse_err(line, e.to_string()))?,
            "ell" => h.ell = value.parse().map_err(bad)?,
            "seed" => h.seed = value.parse().map_err(bad)?,
            other => return Err(parse_err(line, format!("unknown header key `{other}`"))),
        }
    }
    if !got_d || !got_delta {
        return Err(parse_err(line, "header needs d= and delta="));
    }
    let mut cfg = Config::low_dim(h.d, h.delta);
    cfg.ell = h.ell;
    cfg.validate().map_err(|e| parse_err(line, e.to_string()))?;
    Ok(h)
}

/// Parses the text operations format. Blank lines and `#` comments are
/// skipped; a log without operations may omit the header.
pub fn parse_ops(text: &str) -> HarnessResult<OpsLog> {
    let mut header: Option<Header> = None;
    let mut ops = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let fields: Vec<&str> = content.split_whitespace().collect();
        let Some((&tag, rest)) = fields.split_first() else { continue };
        if tag == "CFG" {
            if header.is_some() || !ops.is_empty() {
                return Err(parse_err(line, "header must come first and only once"));
            }
            header = Some(parse_header(line, rest)?);
            continue;
        }
        let h = header.as_ref().ok_or_else(|| parse_err(line, "operation before the CFG header"))?;
        let (coord_fields, k) = match tag {
            "I" | "D" => (rest, None),
            "Q" => {
                let (last, coords) = rest.split_last().ok_or_else(|| parse_err(line, "query needs k="))?;
                let k: usize = last
                    .strip_prefix("k=")
                    .and_then(|v| v.parse().ok())
                    .filter(|&k| k >= 1)
                    .ok_or_else(|| parse_err(line, format!("expected k=<positive>, got `{last}`")))?;
                (coords, Some(k))
            }
            other => return Err(parse_err(line, format!("unknown operation `{other}`"))),
        };
        let coords = coord_fields
            .iter()
            .map(|c| c.parse::<i64>().map_err(|_| parse_err(line, format!("bad coordinate `{c}`"))))
            .collect::<HarnessResult<Vec<i64>>>()?;
        let point = Point::new(coords);
        point.check_box(h.d, h.delta).map_err(|e| parse_err(line, e.to_string()))?;
        ops.push((
            line,
            match (tag, k) {
                ("I", _) => Op::Insert(point),
                ("D", _) => Op::Delete(point),
                (_, Some(k)) => Op::Query(point, k),
                _ => unreachable!("tag checked above"),
            },
        ));
    }
    Ok(OpsLog { header: header.unwrap_or_default(), ops })
}

/// Replays operations one at a time, collecting query answers and
/// diagnostics.
pub struct Replayer {
    pub backend: Backend,
    pub output: Vec<String>,
    pub diagnostics: Vec<String>,
    strict: bool,
    queries: usize,
}

impl Replayer {
    pub fn new(cfg: &Config, strict: bool) -> HarnessResult<Self> {
        Ok(Replayer { backend: Backend::new(cfg)?, output: Vec::new(), diagnostics: Vec::new(), strict, queries: 0 })
    }

    fn soft_failure(&mut self, line: usize, message: String) -> HarnessResult<()> {
        if self.strict {
            return Err(HarnessError::Strict { line, message });
        }
        self.diagnostics.push(format!("line {line}: {message}"));
        Ok(())
    }

    pub fn apply(&mut self, line: usize, op: &Op) -> HarnessResult<()> {
        match op {
            Op::Insert(p) => {
                self.backend.insert(p.clone())?;
            }
            Op::Delete(p) => match self.backend.delete(p) {
                Ok(()) => {}
                Err(Error::NotFound) => self.soft_failure(line, format!("delete of absent point {p}"))?,
                Err(e) => return Err(e.into()),
            },
            Op::Query(p, k) => {
                let index = self.queries;
                self.queries += 1;
                match self.backend.cluster(p, *k) {
                    Ok(rep) => self.output.push(format!("{index} {} {}", rep.id, rep.point)),
                    Err(e @ (Error::NotFound | Error::Empty | Error::Degenerate { .. })) => {
                        self.output.push(format!("{index} none"));
                        self.soft_failure(line, format!("query {index} at {p}: {e}"))?;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
        Ok(())
    }
}

pub fn replay(log: &OpsLog, cfg: &Config, strict: bool) -> HarnessResult<Replayer> {
    let mut r = Replayer::new(cfg, strict)?;
    for (line, op) in &log.ops {
        r.apply(*line, op)?;
    }
    Ok(r)
}

/// Query answers, one per line.
pub fn run(log: &OpsLog, cfg: &Config, strict: bool) -> HarnessResult<Replayer> {
    replay(log, cfg, strict)
}

pub fn dump(log: &OpsLog, cfg: &Config, strict: bool) -> HarnessResult<String> {
    let r = replay(log, cfg, strict)?;
    Ok(hierarchy::export_dendrogram(&r.backend)?.to_text())
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationOutcome {
    /// Number of operations applied before the first failing check, or all.
    pub ops_checked: usize,
    pub alpha: f64,
    pub violations: Vec<String>,
}

/// Replays `log` and validates the family after the last operation, or
/// after every operation with `each`. Stops at the first failing check.
pub fn validate(log: &OpsLog, cfg: &Config, strict: bool, each: bool) -> HarnessResult<ValidationOutcome> {
    let mut r = Replayer::new(cfg, strict)?;
    let alpha = r.backend.alpha();
    let check = |b: &Backend| validate_family(b, alpha).violations.iter().map(|v| v.to_string()).collect::<Vec<_>>();
    for (n, (line, op)) in log.ops.iter().enumerate() {
        r.apply(*line, op)?;
        if each {
            let violations = check(&r.backend);
            if !violations.is_empty() {
                return Ok(ValidationOutcome { ops_checked: n + 1, alpha, violations });
            }
        }
    }
    Ok(ValidationOutcome { ops_checked: log.ops.len(), alpha, violations: check(&r.backend) })
}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    /// Operation counts after which to evaluate; the full log if empty.
    pub checkpoints: Vec<usize>,
    pub no_oracle: bool,
    /// Corrupt each snapshot with a close pair before measuring.
    pub inject_fault: bool,
    pub strict: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct KRow {
    pub k: usize,
    pub clusters: usize,
    pub diam_cost: Option<f64>,
    pub center_cost: Option<f64>,
    pub opt_diam: Option<f64>,
    pub opt_center: Option<f64>,
    pub diam_ratio: Option<f64>,
    pub center_ratio: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Checkpoint {
    pub ops: usize,
    pub n_distinct: usize,
    pub n_total: u64,
    pub violation_count: usize,
    pub violations: Vec<String>,
    pub rows: Vec<KRow>,
    pub worst_diam_ratio: Option<f64>,
    pub worst_center_ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub schema: u32,
    pub mode: String,
    pub d: usize,
    pub delta: i64,
    pub ell: usize,
    pub seed: u64,
    pub alpha: f64,
    pub checkpoints: Vec<Checkpoint>,
    pub max_ratio: Option<f64>,
    pub total_violations: usize,
}

fn max_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

fn measure(fam: &GoodFamily, ops: usize, alpha: f64, no_oracle: bool) -> HarnessResult<Checkpoint> {
    let ids = fam.ids();
    let n = ids.len();
    let points: Vec<Point> = ids.iter().map(|&id| fam.record(id).expect("listed id").point.clone()).collect();
    let report = validate_family(fam, alpha);
    let (opt_diam, opt_center) = if n <= DIAM_GUARD {
        (Some(opt_diam_profile(&points, DIAM_GUARD)?), Some(opt_center_profile(&points, CENTER_GUARD)?))
    } else if no_oracle {
        (None, None)
    } else {
        return Err(HarnessError::Guard { ops, size: n, guard: DIAM_GUARD });
    };
    let mut rows = Vec::new();
    for k in 1..=n {
        let od = opt_diam.as_ref().map(|p| p[k - 1]);
        let oc = opt_center.as_ref().map(|p| p[k - 1]);
        let mut row = KRow {
            k,
            clusters: 0,
            diam_cost: None,
            center_cost: None,
            opt_diam: od.map(CostValue::value),
            opt_center: oc.map(CostValue::value),
            diam_ratio: None,
            center_ratio: None,
            error: None,
        };
        match clustering_at_k(fam, k) {
            Ok(c) => {
                let index = |id| ids.binary_search(&id).expect("member of P_0");
                let parts: Vec<Vec<usize>> =
                    c.clusters.iter().map(|cl| cl.members.iter().map(|&m| index(m)).collect()).collect();
                let centers: Vec<Point> = c.clusters.iter().map(|cl| points[index(cl.representative)].clone()).collect();
                let dc = diameter_cost(&points, &parts)?;
                let cc = center_cost(&points, &centers)?;
                row.clusters = c.clusters.len();
                row.diam_cost = Some(dc.value());
                row.center_cost = Some(cc.value());
                row.diam_ratio = od.map(|o| dc.ratio_to(o));
                row.center_ratio = oc.map(|o| cc.ratio_to(o));
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        rows.push(row);
    }
    let worst = |f: fn(&KRow) -> Option<f64>| rows.iter().filter_map(f).fold(None, |acc, r| max_opt(acc, Some(r)));
    Ok(Checkpoint {
        ops,
        n_distinct: n,
        n_total: fam.total_len(),
        violation_count: report.violations.len(),
        violations: report.violations.iter().map(|v| v.to_string()).collect(),
        worst_diam_ratio: worst(|r| r.diam_ratio),
        worst_center_ratio: worst(|r| r.center_ratio),
        rows,
    })
}

pub fn eval(log: &OpsLog, cfg: &Config, opts: &EvalOptions) -> HarnessResult<EvalReport> {
    let mut marks: BTreeSet<usize> = opts.checkpoints.iter().copied().collect();
    if marks.is_empty() {
        marks.insert(log.ops.len());
    }
    if let Some(&last) = marks.iter().next_back() {
        if last > log.ops.len() {
            return Err(Error::InvalidArgument(format!("checkpoint {last} beyond {} operations", log.ops.len())).into());
        }
    }
    let mut r = Replayer::new(cfg, opts.strict)?;
    let alpha = r.backend.alpha();
    let mut checkpoints = Vec::new();
    let mut applied = 0;
    for mark in marks {
        while applied < mark {
            let (line, op) = &log.ops[applied];
            r.apply(*line, op)?;
            applied += 1;
        }
        let mut fam = GoodFamily::snapshot(&r.backend)?;
        if opts.inject_fault {
            fam.inject_close_pair();
        }
        checkpoints.push(measure(&fam, mark, alpha, opts.no_oracle)?);
    }
    let max_ratio = checkpoints
        .iter()
        .map(|c| max_opt(c.worst_diam_ratio, c.worst_center_ratio))
        .fold(None, max_opt);
    let total_violations = checkpoints.iter().map(|c| c.violation_count).sum();
    Ok(EvalReport {
        schema: REPORT_SCHEMA,
        mode: cfg.mode.to_string(),
        d: cfg.d,
        delta: cfg.delta,
        ell: cfg.ell,
        seed: cfg.seed,
        alpha,
        checkpoints,
        max_ratio,
        total_violations,
    })
}

#[derive(Serialize)]
struct EvalCsvRow<'a> {
    ops: usize,
    n: usize,
    k: usize,
    clusters: usize,
    diam_cost: Option<f64>,
    opt_diam: Option<f64>,
    diam_ratio: Option<f64>,
    center_cost: Option<f64>,
    opt_center: Option<f64>,
    center_ratio: Option<f64>,
    violations: usize,
    error: Option<&'a str>,
}

pub fn write_eval_csv<W: Write>(report: &EvalReport, out: W) -> HarnessResult<()> {
    let mut w = csv::Writer::from_writer(out);
    for c in &report.checkpoints {
        for r in &c.rows {
            w.serialize(EvalCsvRow {
                ops: c.ops,
                n: c.n_distinct,
                k: r.k,
                clusters: r.clusters,
                diam_cost: r.diam_cost,
                opt_diam: r.opt_diam,
                diam_ratio: r.diam_ratio,
                center_cost: r.center_cost,
                opt_center: r.opt_center,
                center_ratio: r.center_ratio,
                violations: c.violation_count,
                error: r.error.as_deref(),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    Uniform,
    Clustered,
    /// Deletes the highest-level points first.
    AdversarialDelete,
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "uniform" => Ok(Generator::Uniform),
            "clustered" => Ok(Generator::Clustered),
            "adversarial-delete" => Ok(Generator::AdversarialDelete),
            other => Err(Error::InvalidArgument(format!("unknown generator `{other}`"))),
        }
    }
}

impl std::fmt::Display for Generator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Generator::Uniform => "uniform",
            Generator::Clustered => "clustered",
            Generator::AdversarialDelete => "adversarial-delete",
        })
    }
}

#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub generator: Generator,
    pub config: Config,
    pub sizes: Vec<usize>,
    /// Queries timed per size, capped at `n`.
    pub queries: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub generator: String,
    pub mode: String,
    pub d: usize,
    pub delta: i64,
    pub ell: usize,
    pub n: usize,
    pub insert_ns: f64,
    pub delete_ns: f64,
    pub query_ns: f64,
    pub insert_growth: Option<f64>,
    pub delete_growth: Option<f64>,
    pub query_growth: Option<f64>,
}

/// `n` distinct points drawn by `generator`.
pub fn generate_points(generator: Generator, n: usize, d: usize, delta: i64, seed: u64) -> HarnessResult<Vec<Point>> {
    let capacity = (delta as f64).powi(d.min(64) as i32);
    if (n as f64) > capacity {
        return Err(Error::InvalidArgument(format!("cannot place {n} distinct points in the box")).into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    let centers: Vec<Vec<f64>> = (0..((n as f64).sqrt().ceil() as usize).max(1))
        .map(|_| (0..d).map(|_| rng.random_range(1..=delta) as f64).collect())
        .collect();
    let spread = Normal::new(0.0, (delta as f64 / 64.0).max(1.0)).expect("positive deviation");
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        let coords: Vec<i64> = match generator {
            Generator::Clustered if attempts < 64 * n + 1024 => {
                let c = &centers[rng.random_range(0..centers.len())];
                c.iter().map(|&x| ((x + spread.sample(&mut rng)).round() as i64).clamp(1, delta)).collect()
            }
            _ => (0..d).map(|_| rng.random_range(1..=delta)).collect(),
        };
        if seen.insert(coords.clone()) {
            out.push(Point::new(coords));
        }
    }
    Ok(out)
}

fn per_op(elapsed: std::time::Duration, ops: usize) -> f64 {
    if ops == 0 {
        0.0
    } else {
        elapsed.as_nanos() as f64 / ops as f64
    }
}

/// Amortized wall-clock nanoseconds per insert, query and delete for each
/// nonzero size, with growth factors against the previous row.
pub fn bench(spec: &BenchSpec) -> HarnessResult<Vec<BenchRow>> {
    let cfg = &spec.config;
    let mut rows: Vec<BenchRow> = Vec::new();
    for (i, &n) in spec.sizes.iter().enumerate() {
        if n == 0 {
            continue;
        }
        let seed = cfg.seed.wrapping_add(i as u64);
        let points = generate_points(spec.generator, n, cfg.d, cfg.delta, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xbe7c);
        let mut backend = Backend::new(cfg)?;

        let start = Instant::now();
        for p in &points {
            backend.insert(p.clone())?;
        }
        let insert_ns = per_op(start.elapsed(), n);

        let q = spec.queries.min(n);
        let probes: Vec<(usize, usize)> = (0..q).map(|_| (rng.random_range(0..n), rng.random_range(1..=n))).collect();
        let start = Instant::now();
        for &(idx, k) in &probes {
            // Degenerate answers still cost a full query.
            let _ = backend.cluster(&points[idx], k);
        }
        let query_ns = per_op(start.elapsed(), q);

        let mut order: Vec<usize> = (0..n).collect();
        match spec.generator {
            Generator::AdversarialDelete => {
                let ids: Vec<_> = points.iter().map(|p| backend.lookup(p).expect("inserted")).collect();
                let top = |id| (0..=backend.max_level()).rev().find(|&l| backend.is_member(l, id)).unwrap_or(0);
                let tops: Vec<usize> = ids.iter().map(|&id| top(id)).collect();
                order.sort_by_key(|&j| (std::cmp::Reverse(tops[j]), ids[j]));
            }
            _ => order.shuffle(&mut rng),
        }
        let start = Instant::now();
        for &j in &order {
            backend.delete(&points[j])?;
        }
        let delete_ns = per_op(start.elapsed(), n);

        let growth = |now: f64, pick: fn(&BenchRow) -> f64| {
            rows.last().map(&pick).filter(|&p| p > 0.0).map(|p| now / p)
        };
        let row = BenchRow {
            generator: spec.generator.to_string(),
            mode: cfg.mode.to_string(),
            d: cfg.d,
            delta: cfg.delta,
            ell: cfg.ell,
            n,
            insert_growth: growth(insert_ns, |r| r.insert_ns),
            delete_growth: growth(delete_ns, |r| r.delete_ns),
            query_growth: growth(query_ns, |r| r.query_ns),
            insert_ns,
            delete_ns,
            query_ns,
        };
        rows.push(row);
    }
    Ok(rows)
}

const BENCH_COLUMNS: [&str; 12] = [
    "generator",
    "mode",
    "d",
    "delta",
    "ell",
    "n",
    "insert_ns",
    "delete_ns",
    "query_ns",
    "insert_growth",
    "delete_growth",
    "query_growth",
];

/// Writes the header even when there are no rows.
pub fn write_bench_csv<W: Write>(rows: &[BenchRow], out: W) -> HarnessResult<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(BENCH_COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
