//! Gridded-data study: per-site, pooled-pair and spatial-aggregate GPD fits
//! with stationary-bootstrap intervals, pairwise `η̂`, and the `1/η̂` scaled
//! aggregate shape for bounded tails.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::copulas::CopulaSpec;
use crate::dependence::{eta_from_scores, exponential_scores, DependenceEstimate, DEFAULT_ETA_Q};
use crate::error::{Error, Result};
use crate::fitting::{fit_gpd, fit_gpd_pooled, BootstrapCI, BootstrapConfig, GpdFit, PooledFit};
use crate::gpd::GpdParams;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Site {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coord: Option<(i64, i64)>,
}

/// Complete-case gridded series on a uniform time cadence.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDataset {
    pub times: Vec<NaiveDateTime>,
    pub sites: Vec<Site>,
    /// One series per site, aligned with `times`.
    pub series: Vec<Vec<f64>>,
    /// Timestamps removed because at least one site had no value.
    pub gaps_dropped: usize,
    pub cadence_seconds: i64,
}

impl GridDataset {
    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn site_index(&self, id: &str) -> Option<usize> {
        self.sites.iter().position(|s| s.id == id)
    }

    /// Pairs at Manhattan distance one when every site has grid
    /// coordinates, otherwise all pairs.
    pub fn default_adjacency(&self) -> Vec<(usize, usize)> {
        let coords: Option<Vec<(i64, i64)>> = self.sites.iter().map(|s| s.coord).collect();
        let d = self.n_sites();
        let mut out = Vec::new();
        for i in 0..d {
            for j in i + 1..d {
                let adjacent = match &coords {
                    Some(c) => (c[i].0 - c[j].0).abs() + (c[i].1 - c[j].1).abs() == 1,
                    None => true,
                };
                if adjacent {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Long-format CSV with columns `time,site,x,y,value`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "site", "x", "y", "value"])?;
        for (t, time) in self.times.iter().enumerate() {
            let ts = time.format("%Y-%m-%dT%H:%M:%S").to_string();
            for (s, site) in self.sites.iter().enumerate() {
                let (x, y) = site
                    .coord
                    .map_or((String::new(), String::new()), |(x, y)| (x.to_string(), y.to_string()));
                w.write_record([ts.as_str(), &site.id, &x, &y, &self.series[s][t].to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Column names for long-format input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub time_col: String,
    pub site_col: String,
    pub value_col: String,
    /// Optional integer grid coordinates; used when both columns exist.
    pub x_col: String,
    pub y_col: String,
    /// Keep only these calendar months (1–12).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub months: Option<Vec<u32>>,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            time_col: "time".into(),
            site_col: "site".into(),
            value_col: "value".into(),
            x_col: "x".into(),
            y_col: "y".into(),
            months: None,
        }
    }
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(t) = chrono::DateTime::parse_from_rfc3339(s) {
        return Some(t.naive_utc());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t);
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
}

fn is_missing(s: &str) -> bool {
    matches!(s.trim().to_ascii_lowercase().as_str(), "" | "na" | "nan" | "null")
}

pub fn ingest_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<GridDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    ingest_reader(file, schema, &path.display().to_string())
}

/// Parse long-format rows `(time, site, value)` into a complete-case grid.
/// `label` names the source in error messages.
pub fn ingest_reader<R: Read>(reader: R, schema: &Schema, label: &str) -> Result<GridDataset> {
    let data_err = |line: u64, message: String| Error::Data {
        path: label.to_string(),
        line,
        message,
    };
    if let Some(months) = &schema.months {
        if months.is_empty() || months.iter().any(|m| !(1..=12).contains(m)) {
            return Err(Error::invalid("months must be a non-empty subset of 1..=12"));
        }
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &str| col(name).ok_or_else(|| data_err(1, format!("unknown column '{name}'")));
    let (ti, si, vi) = (need(&schema.time_col)?, need(&schema.site_col)?, need(&schema.value_col)?);
    let coord_cols = col(&schema.x_col).zip(col(&schema.y_col));

    let mut sites: Vec<Site> = Vec::new();
    let mut site_ix: HashMap<String, usize> = HashMap::new();
    let mut cells: BTreeMap<NaiveDateTime, HashMap<usize, Option<f64>>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(i).unwrap_or("");
        let time = parse_timestamp(field(ti))
            .ok_or_else(|| data_err(line, format!("cannot parse timestamp '{}'", field(ti))))?;
        let id = field(si).to_string();
        if id.is_empty() {
            return Err(data_err(line, "empty site identifier".into()));
        }
        let coord = match coord_cols {
            Some((xc, yc)) if !field(xc).is_empty() && !field(yc).is_empty() => {
                let parse = |s: &str| {
                    s.parse::<i64>()
                        .map_err(|_| data_err(line, format!("grid coordinate '{s}' is not an integer")))
                };
                Some((parse(field(xc))?, parse(field(yc))?))
            }
            _ => None,
        };
        let s = match site_ix.get(&id) {
            Some(&s) => {
                if sites[s].coord != coord {
                    return Err(data_err(line, format!("inconsistent coordinates for site '{id}'")));
                }
                s
            }
            None => {
                sites.push(Site { id: id.clone(), coord });
                site_ix.insert(id.clone(), sites.len() - 1);
                sites.len() - 1
            }
        };
        let raw = field(vi);
        let value = if is_missing(raw) {
            None
        } else {
            let v: f64 = raw
                .parse()
                .map_err(|_| data_err(line, format!("value '{raw}' is not a number")))?;
            v.is_finite().then_some(v)
        };
        if cells.entry(time).or_default().insert(s, value).is_some() {
            return Err(data_err(line, format!("duplicate row for site '{id}' at {time}")));
        }
    }
    if cells.is_empty() {
        return Err(Error::InsufficientData(format!("{label}: no data rows")));
    }

    let stamps: Vec<NaiveDateTime> = cells.keys().copied().collect();
    let cadence = check_cadence(&stamps).map_err(|m| data_err(0, m))?;

    let d = sites.len();
    let mut times = Vec::new();
    let mut series = vec![Vec::new(); d];
    let mut gaps = 0usize;
    for (t, row) in &cells {
        if let Some(months) = &schema.months {
            if !months.contains(&t.month()) {
                continue;
            }
        }
        let full: Option<Vec<f64>> = (0..d).map(|s| row.get(&s).copied().flatten()).collect();
        match full {
            Some(vals) => {
                times.push(*t);
                for (s, v) in vals.into_iter().enumerate() {
                    series[s].push(v);
                }
            }
            None => gaps += 1,
        }
    }
    Ok(GridDataset {
        times,
        sites,
        series,
        gaps_dropped: gaps,
        cadence_seconds: cadence,
    })
}

/// Smallest positive spacing, provided every spacing is a multiple of it.
fn check_cadence(stamps: &[NaiveDateTime]) -> std::result::Result<i64, String> {
    let diffs: Vec<i64> = stamps.windows(2).map(|w| (w[1] - w[0]).num_seconds()).collect();
    let Some(step) = diffs.iter().copied().filter(|&d| d > 0).min() else {
        return Ok(0);
    };
    if let Some(bad) = diffs.iter().position(|d| d % step != 0) {
        return Err(format!(
            "non-uniform cadence: step {}s between {} and {} is not a multiple of {step}s",
            diffs[bad],
            stamps[bad],
            stamps[bad + 1]
        ));
    }
    Ok(step)
}

/// Per-time mean over a subset of sites.
pub fn spatial_aggregate(ds: &GridDataset, sites: &[usize]) -> Result<Vec<f64>> {
    if sites.is_empty() {
        return Err(Error::invalid("aggregate needs at least one site"));
    }
    if let Some(&bad) = sites.iter().find(|&&s| s >= ds.n_sites()) {
        return Err(Error::invalid(format!("site index {bad} out of range")));
    }
    Ok(mean_of(&ds.series, sites))
}

fn mean_of(series: &[Vec<f64>], sites: &[usize]) -> Vec<f64> {
    let k = sites.len() as f64;
    (0..series[sites[0]].len())
        .map(|t| sites.iter().map(|&s| series[s][t]).sum::<f64>() / k)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    /// Threshold probability for every GPD fit.
    pub p: f64,
    /// Site-index pairs for pooled fits and `η̂`; `None` uses the dataset default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjacency: Option<Vec<(usize, usize)>>,
    /// Sites averaged into the aggregate; `None` uses all sites.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregate_sites: Option<Vec<usize>>,
    pub mean_block: f64,
    pub n_boot: usize,
    pub level: f64,
    pub eta_q: f64,
    pub seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            p: 0.98,
            adjacency: None,
            aggregate_sites: None,
            mean_block: 7.0,
            n_boot: 1000,
            level: 0.95,
            eta_q: DEFAULT_ETA_Q,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteFit {
    pub site: String,
    pub fit: Option<GpdFit>,
    pub xi_ci: Option<BootstrapCI>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFit {
    pub sites: [String; 2],
    pub fit: Option<PooledFit>,
    pub xi_ci: Option<BootstrapCI>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateFit {
    pub sites: Vec<String>,
    pub fit: Option<GpdFit>,
    pub xi_ci: Option<BootstrapCI>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEta {
    pub sites: [String; 2],
    pub estimate: Option<DependenceEstimate>,
    pub ci: Option<BootstrapCI>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub config: StudyConfig,
    pub n_times: usize,
    pub gaps_dropped: usize,
    pub adjacency: Vec<[String; 2]>,
    pub marginal: Vec<SiteFit>,
    pub pooled: Vec<PairFit>,
    pub aggregate: AggregateFit,
    pub eta_pairwise: Vec<PairEta>,
    /// Interval for `ξ̂_R / η̄` where `η̄` is the mean pairwise `η̂` of the
    /// same replicate; only produced for a negative aggregate shape.
    pub scaled_aggregate_xi: Option<BootstrapCI>,
    pub flags: Vec<String>,
}

/// Layout of the statistic vector evaluated on every replicate.
struct Layout {
    d: usize,
    pairs: Vec<(usize, usize)>,
    agg: Vec<usize>,
    p: f64,
    eta_q: f64,
}

impl Layout {
    fn len(&self) -> usize {
        self.d + 2 * self.pairs.len() + 2
    }

    fn evaluate(&self, bundle: &[Vec<f64>]) -> Vec<f64> {
        let xi_of = |r: Result<GpdFit>| r.map_or(f64::NAN, |f| f.params.xi());
        let mut out = Vec::with_capacity(self.len());
        for series in &bundle[..self.d] {
            out.push(xi_of(fit_gpd(series, self.p)));
        }
        for &(i, j) in &self.pairs {
            out.push(fit_gpd_pooled(&bundle[i], &bundle[j], self.p).map_or(f64::NAN, |f| f.xi_common));
        }
        let agg_xi = xi_of(fit_gpd(&mean_of(bundle, &self.agg), self.p));
        out.push(agg_xi);
        let mut scores: Vec<Option<Vec<f64>>> = vec![None; self.d];
        for &(i, j) in &self.pairs {
            for s in [i, j] {
                if scores[s].is_none() {
                    scores[s] = Some(exponential_scores(&bundle[s]));
                }
            }
        }
        let mut eta_sum = 0.0;
        for &(i, j) in &self.pairs {
            let (a, b) = (scores[i].as_deref().unwrap_or_default(), scores[j].as_deref().unwrap_or_default());
            let e = eta_from_scores(a, b, self.eta_q).map_or(f64::NAN, |e| e.value);
            eta_sum += e;
            out.push(e);
        }
        out.push(if self.pairs.is_empty() {
            f64::NAN
        } else {
            agg_xi / (eta_sum / self.pairs.len() as f64)
        });
        out
    }
}

fn pair_eta(bundle: &[Vec<f64>], i: usize, j: usize, q: f64) -> Result<DependenceEstimate> {
    eta_from_scores(&exponential_scores(&bundle[i]), &exponential_scores(&bundle[j]), q)
}

/// Fit every marginal, pooled-pair and aggregate model and bootstrap all
/// shape estimates with shared resampling indices.
pub fn run_study(ds: &GridDataset, cfg: &StudyConfig) -> Result<FitReport> {
    let d = ds.n_sites();
    if d == 0 || ds.n_times() == 0 {
        return Err(Error::InsufficientData("dataset has no complete observations".into()));
    }
    let pairs = cfg.adjacency.clone().unwrap_or_else(|| ds.default_adjacency());
    for &(i, j) in &pairs {
        if i >= d || j >= d || i == j {
            return Err(Error::invalid(format!("invalid site pair ({i}, {j})")));
        }
    }
    let agg = cfg.aggregate_sites.clone().unwrap_or_else(|| (0..d).collect());
    let agg_series = spatial_aggregate(ds, &agg)?;
    let boot = BootstrapConfig {
        mean_block: cfg.mean_block,
        n_boot: cfg.n_boot,
        level: cfg.level,
        seed: cfg.seed,
    };
    let layout = Layout {
        d,
        pairs: pairs.clone(),
        agg: agg.clone(),
        p: cfg.p,
        eta_q: cfg.eta_q,
    };
    let cis = boot.run_many(&ds.series, |b| layout.evaluate(b))?;
    let mut flags = Vec::new();
    let id = |s: usize| ds.sites[s].id.clone();

    let mut marginal = Vec::with_capacity(d);
    #[allow(clippy::needless_range_loop)]
    for s in 0..d {
        let fit = fit_gpd(&ds.series[s], cfg.p);
        missing_ci(&mut flags, &format!("marginal {}", id(s)), &cis[s], fit.is_ok());
        marginal.push(SiteFit {
            site: id(s),
            error: fit.as_ref().err().map(ToString::to_string),
            fit: fit.ok(),
            xi_ci: cis[s],
        });
    }
    let mut pooled = Vec::with_capacity(pairs.len());
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let fit = fit_gpd_pooled(&ds.series[i], &ds.series[j], cfg.p);
        let ci = cis[d + k];
        missing_ci(&mut flags, &format!("pooled {}-{}", id(i), id(j)), &ci, fit.is_ok());
        pooled.push(PairFit {
            sites: [id(i), id(j)],
            error: fit.as_ref().err().map(ToString::to_string),
            fit: fit.ok(),
            xi_ci: ci,
        });
    }
    let a = d + pairs.len();
    let agg_fit = fit_gpd(&agg_series, cfg.p);
    missing_ci(&mut flags, "aggregate", &cis[a], agg_fit.is_ok());
    let aggregate = AggregateFit {
        sites: agg.iter().map(|&s| id(s)).collect(),
        error: agg_fit.as_ref().err().map(ToString::to_string),
        fit: agg_fit.as_ref().ok().copied(),
        xi_ci: cis[a],
    };
    let mut eta_pairwise = Vec::with_capacity(pairs.len());
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let est = pair_eta(&ds.series, i, j, cfg.eta_q);
        let ci = cis[a + 1 + k];
        missing_ci(&mut flags, &format!("eta {}-{}", id(i), id(j)), &ci, est.is_ok());
        if let Ok(e) = &est {
            if e.clamped {
                flags.push(format!("eta {}-{}: estimate clamped to (0, 1]", id(i), id(j)));
            }
        }
        eta_pairwise.push(PairEta {
            sites: [id(i), id(j)],
            error: est.as_ref().err().map(ToString::to_string),
            estimate: est.ok(),
            ci,
        });
    }
    let scaled_aggregate_xi = match &agg_fit {
        Ok(f) if f.params.xi() < 0.0 && !pairs.is_empty() => {
            flags.push("scaled aggregate shape uses the mean of the pairwise eta estimates".into());
            let ci = cis[a + 1 + pairs.len()];
            missing_ci(&mut flags, "scaled aggregate", &ci, true);
            ci
        }
        _ => None,
    };
    for (k, s) in marginal.iter().enumerate() {
        if let Some(f) = &s.fit {
            if !f.converged {
                flags.push(format!("marginal {}: optimizer did not converge", ds.sites[k].id));
            }
        }
    }
    let mut config = cfg.clone();
    config.adjacency = Some(pairs.clone());
    config.aggregate_sites = Some(agg);
    Ok(FitReport {
        config,
        n_times: ds.n_times(),
        gaps_dropped: ds.gaps_dropped,
        adjacency: pairs.iter().map(|&(i, j)| [id(i), id(j)]).collect(),
        marginal,
        pooled,
        aggregate,
        eta_pairwise,
        scaled_aggregate_xi,
        flags,
    })
}

fn missing_ci(flags: &mut Vec<String>, what: &str, ci: &Option<BootstrapCI>, has_point: bool) {
    if has_point && ci.is_none() {
        flags.push(format!("{what}: more than 10% of bootstrap replicates failed; no interval"));
    }
}

fn cell(ci: &Option<BootstrapCI>, point: Option<f64>) -> String {
    match (ci, point) {
        (Some(c), _) => format!("{:.3} ({:.3}, {:.3})", c.point, c.lower, c.upper),
        (None, Some(p)) => format!("{p:.3} (-, -)"),
        (None, None) => "failed".into(),
    }
}

impl FitReport {
    /// Aligned text summary: shape estimates with bootstrap intervals.
    pub fn to_table(&self) -> String {
        let mut rows: Vec<(String, String, String)> = Vec::new();
        for s in &self.marginal {
            rows.push(("marginal".into(), s.site.clone(), cell(&s.xi_ci, s.fit.map(|f| f.params.xi()))));
        }
        for p in &self.pooled {
            rows.push(("pooled".into(), p.sites.join("-"), cell(&p.xi_ci, p.fit.map(|f| f.xi_common))));
        }
        rows.push((
            "aggregate".into(),
            self.aggregate.sites.join("+"),
            cell(&self.aggregate.xi_ci, self.aggregate.fit.map(|f| f.params.xi())),
        ));
        if self.scaled_aggregate_xi.is_some() {
            rows.push(("scaled".into(), "xi_R/eta".into(), cell(&self.scaled_aggregate_xi, None)));
        }
        for e in &self.eta_pairwise {
            rows.push(("eta".into(), e.sites.join("-"), cell(&e.ci, e.estimate.map(|x| x.value))));
        }
        let w0 = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max(9);
        let w1 = rows.iter().map(|r| r.1.chars().count()).max().unwrap_or(0).max(5);
        let mut out = String::new();
        let _ = writeln!(out, "{:<w0$}  {:<w1$}  estimate (CI)", "variable", "sites");
        for (a, b, c) in rows {
            let _ = writeln!(out, "{a:<w0$}  {b:<w1$}  {c}");
        }
        for f in &self.flags {
            let _ = writeln!(out, "note: {f}");
        }
        out
    }
}

/// Parameters of a synthetic rectangular grid with GPD margins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub nx: usize,
    pub ny: usize,
    pub n_times: usize,
    pub margin: GpdParams,
    pub copula: CopulaSpec,
    pub cadence_hours: i64,
    pub seed: u64,
}

impl SynthConfig {
    /// Hourly heavy-tailed "precipitation"-like 2×2 grid.
    pub fn heavy_hourly(n_times: usize, seed: u64) -> Self {
        Self {
            nx: 2,
            ny: 2,
            n_times,
            margin: GpdParams::new(1.0, 0.2).expect("valid"),
            copula: CopulaSpec::Logistic { gamma: 0.3 },
            cadence_hours: 1,
            seed,
        }
    }

    /// Daily bounded-tail "temperature"-like 2×2 grid.
    pub fn bounded_daily(n_times: usize, seed: u64) -> Self {
        Self {
            nx: 2,
            ny: 2,
            n_times,
            margin: GpdParams::new(1.0, -0.2).expect("valid"),
            copula: CopulaSpec::InvertedLogistic { gamma: 0.5 },
            cadence_hours: 24,
            seed,
        }
    }
}

/// Serially independent draws: every time step is an independent draw from
/// the exchangeable multivariate version of `copula`, pushed through the
/// common GPD margin.
pub fn synthetic_grid(cfg: &SynthConfig) -> Result<GridDataset> {
    let d = cfg.nx * cfg.ny;
    if d == 0 || cfg.n_times == 0 {
        return Err(Error::invalid("synthetic grid needs at least one site and one time step"));
    }
    if cfg.cadence_hours <= 0 {
        return Err(Error::invalid("cadence must be positive"));
    }
    let copula = cfg.copula.validated()?;
    let rows = copula.sample_multivariate(d, cfg.n_times, &mut rng::seeded(cfg.seed))?;
    let mut series = vec![Vec::with_capacity(cfg.n_times); d];
    for row in &rows {
        for (s, &u) in row.iter().enumerate() {
            series[s].push(cfg.margin.quantile_from_tail((1.0 - u).max(f64::MIN_POSITIVE)));
        }
    }
    let start = NaiveDate::from_ymd_opt(2000, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid date");
    let times = (0..cfg.n_times)
        .map(|t| start + Duration::hours(cfg.cadence_hours * t as i64))
        .collect();
    let sites = (0..cfg.ny)
        .flat_map(|y| {
            (0..cfg.nx).map(move |x| Site {
                id: format!("s{x}{y}"),
                coord: Some((x as i64, y as i64)),
            })
        })
        .collect();
    Ok(GridDataset {
        times,
        sites,
        series,
        gaps_dropped: 0,
        cadence_seconds: cfg.cadence_hours * 3600,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ingest(s: &str, schema: &Schema) -> Result<GridDataset> {
        ingest_reader(s.as_bytes(), schema, "test.csv")
    }

    #[test]
    fn toy_file_shapes() {
        let wide_sites = "time,site,value\n2000-01-01,a,1\n2000-01-01,b,2\n2000-01-01,c,3\n";
        let ds = ingest(wide_sites, &Schema::default()).unwrap();
        assert_eq!((ds.n_times(), ds.n_sites()), (1, 3));
        let long_time = "time,site,value\n2000-01-01,a,1\n2000-01-02,a,2\n2000-01-03,a,3\n";
        let ds = ingest(long_time, &Schema::default()).unwrap();
        assert_eq!((ds.n_times(), ds.n_sites()), (3, 1));
        assert_eq!(ds.cadence_seconds, 86_400);
    }

    #[test]
    fn gap_row_drops_timestamp() {
        let s = "time,site,value\n2000-01-01,a,1\n2000-01-01,b,2\n2000-01-02,a,NA\n2000-01-02,b,3\n2000-01-03,a,4\n2000-01-03,b,5\n";
        let ds = ingest(s, &Schema::default()).unwrap();
        assert_eq!(ds.n_times(), 2);
        assert_eq!(ds.gaps_dropped, 1);
        assert_eq!(ds.series[1], vec![2.0, 5.0]);
    }

    #[test]
    fn missing_site_row_is_a_gap() {
        let s = "time,site,value\n2000-01-01,a,1\n2000-01-01,b,2\n2000-01-02,a,3\n";
        let ds = ingest(s, &Schema::default()).unwrap();
        assert_eq!((ds.n_times(), ds.gaps_dropped), (1, 1));
    }

    #[test]
    fn month_filter() {
        let mut s = String::from("time,site,value\n");
        for m in 1..=12 {
            s.push_str(&format!("2001-{m:02}-01,a,{m}\n"));
        }
        // monthly spacing is not a multiple of one fixed step
        assert!(ingest(&s, &Schema::default()).is_err());
        let mut s = String::from("date,station,obs\n");
        let start = NaiveDate::from_ymd_opt(2001, 1, 1).unwrap();
        for k in 0..365 {
            let d = start + Duration::days(k);
            s.push_str(&format!("{d},a,{}\n", d.month()));
        }
        let schema = Schema {
            time_col: "date".into(),
            site_col: "station".into(),
            value_col: "obs".into(),
            months: Some(vec![12, 1, 2]),
            ..Schema::default()
        };
        let ds = ingest(&s, &schema).unwrap();
        assert_eq!(ds.n_times(), 31 + 28 + 31);
        assert!(ds.times.iter().all(|t| [12, 1, 2].contains(&t.month())));
    }

    #[test]
    fn schema_errors() {
        let s = "time,site,value\n2000-01-01,a,1\n";
        let bad = Schema {
            value_col: "precip".into(),
            ..Schema::default()
        };
        assert!(matches!(ingest(s, &bad), Err(Error::Data { .. })));
        let dup = "time,site,value\n2000-01-01,a,1\n2000-01-01,a,2\n";
        match ingest(dup, &Schema::default()) {
            Err(Error::Data { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("duplicate"));
            }
            other => panic!("{other:?}"),
        }
        let uneven = "time,site,value\n2000-01-01T00:00:00,a,1\n2000-01-01T01:00:00,a,2\n2000-01-01T02:30:00,a,3\n";
        assert!(ingest(uneven, &Schema::default()).is_err());
        let bad_num = "time,site,value\n2000-01-01,a,abc\n";
        assert!(matches!(ingest(bad_num, &Schema::default()), Err(Error::Data { line: 2, .. })));
        let bad_time = "time,site,value\nyesterday,a,1\n";
        assert!(ingest(bad_time, &Schema::default()).is_err());
    }

    #[test]
    fn adjacency_from_coordinates() {
        let ds = synthetic_grid(&SynthConfig::heavy_hourly(10, 1)).unwrap();
        let adj = ds.default_adjacency();
        assert_eq!(adj.len(), 4);
        let s = "time,site,value\n2000-01-01,a,1\n2000-01-01,b,2\n2000-01-01,c,3\n";
        assert_eq!(ingest(s, &Schema::default()).unwrap().default_adjacency().len(), 3);
    }

    #[test]
    fn aggregate_examples() {
        let s = "time,site,value\n2000-01-01,a,1\n2000-01-01,b,3\n2000-01-02,a,1\n2000-01-02,b,3\n";
        let ds = ingest(s, &Schema::default()).unwrap();
        assert_eq!(spatial_aggregate(&ds, &[0]).unwrap(), ds.series[0]);
        assert_eq!(spatial_aggregate(&ds, &[0, 1]).unwrap(), vec![2.0, 2.0]);
        assert!(spatial_aggregate(&ds, &[]).is_err());
        let g = synthetic_grid(&SynthConfig::heavy_hourly(1000, 3)).unwrap();
        let agg = spatial_aggregate(&g, &[0, 1, 2, 3]).unwrap();
        let m = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let site_means = g.series.iter().map(|s| m(s)).sum::<f64>() / 4.0;
        assert!((m(&agg) - site_means).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let g = synthetic_grid(&SynthConfig::bounded_daily(50, 4)).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let back = ingest_reader(buf.as_slice(), &Schema::default(), "mem").unwrap();
        assert_eq!(back, g);
    }

    fn small_cfg(n_boot: usize) -> StudyConfig {
        StudyConfig {
            p: 0.95,
            n_boot,
            mean_block: 5.0,
            ..StudyConfig::default()
        }
    }

    #[test]
    fn study_is_deterministic_and_complete() {
        let g = synthetic_grid(&SynthConfig::bounded_daily(3000, 5)).unwrap();
        let a = run_study(&g, &small_cfg(40)).unwrap();
        let b = run_study(&g, &small_cfg(40)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.marginal.len(), 4);
        assert_eq!(a.pooled.len(), 4);
        assert_eq!(a.eta_pairwise.len(), 4);
        for ci in a.marginal.iter().filter_map(|s| s.xi_ci) {
            assert!(ci.lower <= ci.point && ci.point <= ci.upper);
        }
        assert!(a.to_table().contains("aggregate"));
    }

    #[test]
    fn single_site_study() {
        let g = synthetic_grid(&SynthConfig {
            nx: 1,
            ny: 1,
            ..SynthConfig::heavy_hourly(2000, 6)
        })
        .unwrap();
        let r = run_study(&g, &small_cfg(20)).unwrap();
        assert!(r.pooled.is_empty() && r.eta_pairwise.is_empty());
        assert_eq!(r.marginal[0].fit, r.aggregate.fit);
        assert!(r.scaled_aggregate_xi.is_none());
    }

    #[test]
    fn identical_sites_match_single_site() {
        let g = synthetic_grid(&SynthConfig::heavy_hourly(2000, 7)).unwrap();
        let twin = GridDataset {
            sites: vec![g.sites[0].clone(), Site { id: "twin".into(), coord: None }],
            series: vec![g.series[0].clone(), g.series[0].clone()],
            ..g.clone()
        };
        let agg = spatial_aggregate(&twin, &[0, 1]).unwrap();
        assert_eq!(fit_gpd(&agg, 0.95).unwrap(), fit_gpd(&g.series[0], 0.95).unwrap());
    }

    #[test]
    fn too_few_exceedances_are_flagged_not_fatal() {
        let g = synthetic_grid(&SynthConfig::heavy_hourly(200, 8)).unwrap();
        let cfg = StudyConfig {
            p: 0.99,
            ..small_cfg(10)
        };
        let r = run_study(&g, &cfg).unwrap();
        assert!(r.marginal.iter().all(|s| s.fit.is_none() && s.error.is_some()));
    }
}
