//! Config-driven experiment runner.
//!
//! A run validates everything it can (orbit, center, schedule feasibility)
//! before any trajectory is simulated, maps trajectories in parallel with one
//! random stream per trajectory id, reduces results in id order and writes
//! CSV reports plus a JSON manifest. Outputs depend only on the config.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::flow::{hits_upto, run_trajectory, DistanceLedger, RadiusSchedule, TargetFamily};
use crate::hyperbolic::{Center, CurveGeometry, HPoint};
use crate::orbit::{enumerate_orbit, OrbitGraph};
use crate::origami::Origami;
use crate::rng::stream;
use crate::stats::{
    birkhoff_on_grid, correlation_decay, dyadic_grid, ergodic_decay_from_averages, exceedance_fractions, hit_profile,
    loglaw_fit, mean_se, median, ols, quasi_independence, Indicator, LOGLAW_MIN_HORIZON,
};

/// Environment variable that overrides the configured thread count.
pub const THREADS_ENV: &str = "SHRINKING_TARGETS_THREADS";

/// Terms summed by the numeric convergence check in [`validate`] (`2^27 − 1`).
pub const NUMERIC_CHECK_LOG2_TERMS: u32 = 27;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Thm1Summable,
    Thm1Divergent,
    HitRatio,
    Emet,
    Qi,
    Correlation,
    Loglaw,
    OrbitInfo,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Thm1Summable => "thm1_summable",
            ExperimentKind::Thm1Divergent => "thm1_divergent",
            ExperimentKind::HitRatio => "hit_ratio",
            ExperimentKind::Emet => "emet",
            ExperimentKind::Qi => "qi",
            ExperimentKind::Correlation => "correlation",
            ExperimentKind::Loglaw => "loglaw",
            ExperimentKind::OrbitInfo => "orbit_info",
        }
    }

    fn needs_schedule(self) -> bool {
        matches!(self, Self::Thm1Summable | Self::Thm1Divergent | Self::HitRatio | Self::Qi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Auto {
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Threads {
    Count(usize),
    Keyword(Auto),
}

impl Default for Threads {
    fn default() -> Self {
        Threads::Keyword(Auto::Auto)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefaultCenter {
    Default,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitCenter {
    pub coset: usize,
    pub x: f64,
    pub y: f64,
}

/// `"default"` is `z = 2i` on coset 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CenterSpec {
    Keyword(DefaultCenter),
    Explicit(ExplicitCenter),
}

impl Default for CenterSpec {
    fn default() -> Self {
        CenterSpec::Keyword(DefaultCenter::Default)
    }
}

impl CenterSpec {
    pub fn resolve(&self) -> ExplicitCenter {
        match *self {
            CenterSpec::Keyword(_) => ExplicitCenter { coset: 0, x: 0.0, y: 2.0 },
            CenterSpec::Explicit(c) => c,
        }
    }
}

/// `μ(B_n) = c·n^{−κ}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub c: f64,
    pub kappa: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HitsSpec {
    /// Hits strictly after this time count as late hits.
    pub burn_in: usize,
    /// Accepted range of `hits(N) / (N·μ(B_N))`.
    pub band: [f64; 2],
    /// `κ` of the exceedance sets `Y^κ_n`.
    pub exceedance_kappa: f64,
}

impl Default for HitsSpec {
    fn default() -> Self {
        Self { burn_in: 100, band: [0.5, 2.0], exceedance_kappa: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BallSpec {
    /// Measure of the fixed target ball.
    pub measure: f64,
}

impl Default for BallSpec {
    fn default() -> Self {
        Self { measure: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QiSpec {
    pub m: usize,
    pub n_grid: Vec<usize>,
}

impl Default for QiSpec {
    fn default() -> Self {
        Self { m: 1, n_grid: vec![128, 256, 512] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    /// Parent of the timestamped run directories.
    pub dir: PathBuf,
    /// Also write every distance ledger.
    pub ledgers: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: PathBuf::from("runs"), ledgers: false }
    }
}

fn default_word_length() -> usize {
    crate::hyperbolic::DEFAULT_WORD_LENGTH
}

fn default_origami() -> String {
    "torus".into()
}

fn default_ball() -> BallSpec {
    BallSpec { measure: 0.1 }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// `torus`, `l3`, or cycle notation `h=(1 2) v=(1 3)`.
    #[serde(default = "default_origami")]
    pub origami: String,
    pub samples: usize,
    pub horizon: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub threads: Threads,
    #[serde(default = "default_word_length")]
    pub word_length: usize,
    #[serde(default)]
    pub center: CenterSpec,
    #[serde(default)]
    pub schedule: Option<ScheduleSpec>,
    #[serde(default)]
    pub hits: HitsSpec,
    #[serde(default)]
    pub emet: BallSpec,
    #[serde(default = "default_ball")]
    pub correlation: BallSpec,
    #[serde(default)]
    pub qi: QiSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    /// Worker threads after the environment override; 0 means all cores.
    pub fn resolved_threads(&self) -> Result<usize> {
        if let Ok(v) = std::env::var(THREADS_ENV) {
            let v = v.trim();
            if v != "auto" {
                return v.parse().map_err(|_| Error::Config(format!("{THREADS_ENV}={v:?} is not a thread count")));
            }
            return Ok(0);
        }
        Ok(match self.threads {
            Threads::Count(n) => n,
            Threads::Keyword(_) => 0,
        })
    }
}

/// Origami from a fixture name or cycle notation.
pub fn parse_origami(text: &str) -> Result<Origami> {
    match text.trim() {
        "torus" => Ok(Origami::torus()),
        "l3" | "L3" => Ok(Origami::l3()),
        other => Origami::from_str(other),
    }
}

/// Everything a run needs, checked before compute starts.
struct Prepared {
    origami: Origami,
    orbit: OrbitGraph,
    geom: CurveGeometry<f64>,
    center: Center<f64>,
    family: Option<TargetFamily>,
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    if cfg.samples == 0 || cfg.horizon == 0 {
        return Err(Error::Config("samples and horizon must be at least 1".into()));
    }
    let origami = parse_origami(&cfg.origami)?;
    let orbit = enumerate_orbit(&origami)?;
    let geom = CurveGeometry::<f64>::new(orbit.coset_action()?, cfg.word_length)?;
    let c = cfg.center.resolve();
    let center = geom.center(c.coset, HPoint::new(c.x, c.y)?)?;
    let family = match (cfg.experiment.needs_schedule(), cfg.schedule) {
        (true, None) => {
            return Err(Error::Config(format!("experiment {} needs a [schedule] section", cfg.experiment.as_str())))
        }
        (true, Some(s)) => Some(TargetFamily::new(
            center.clone(),
            RadiusSchedule::power_law(s.c, s.kappa, cfg.horizon),
            geom.measure(),
        )?),
        (false, _) => None,
    };
    let ball_check = |b: &BallSpec| -> Result<()> {
        let max = geom.measure().disk_fraction(center.r_emb());
        if !(b.measure > 0.0 && b.measure < 1.0) {
            return Err(Error::Config(format!("ball measure must lie in (0, 1), got {}", b.measure)));
        }
        if b.measure > max {
            return Err(Error::OutOfRange {
                radius: geom.measure().radius_for_measure(b.measure),
                bound: center.r_emb(),
            });
        }
        Ok(())
    };
    match cfg.experiment {
        ExperimentKind::Emet => {
            ball_check(&cfg.emet)?;
            if cfg.horizon < 4 {
                return Err(Error::Config("emet needs a horizon of at least 4".into()));
            }
        }
        ExperimentKind::Correlation => {
            ball_check(&cfg.correlation)?;
            if cfg.horizon > 30 {
                return Err(Error::Config("correlation horizon is limited to t ≤ 30".into()));
            }
        }
        ExperimentKind::Qi => {
            let q = &cfg.qi;
            if q.n_grid.is_empty() || q.n_grid.iter().any(|&n| n <= q.m || n > cfg.horizon) || q.m == 0 {
                return Err(Error::Config("qi grid needs 1 ≤ M < N ≤ horizon for every N".into()));
            }
        }
        ExperimentKind::Loglaw if cfg.horizon < LOGLAW_MIN_HORIZON => {
            return Err(Error::Config(format!("loglaw needs a horizon of at least {LOGLAW_MIN_HORIZON}")));
        }
        ExperimentKind::HitRatio | ExperimentKind::Thm1Summable | ExperimentKind::Thm1Divergent => {
            let [lo, hi] = cfg.hits.band;
            if !(lo > 0.0 && lo <= hi) || !(cfg.hits.exceedance_kappa >= 1.0) {
                return Err(Error::Config("hits band must satisfy 0 < lo ≤ hi and exceedance κ ≥ 1".into()));
            }
        }
        _ => {}
    }
    Ok(Prepared { origami, orbit, geom, center, family })
}

/// Convergence bookkeeping for a power-law schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleClassification {
    pub c: f64,
    pub kappa: f64,
    /// `Σ μ(B_n) < ∞`
    pub summable: bool,
    /// `{n μ(B_n)}` unbounded
    pub n_mu_unbounded: bool,
    /// `Σ_j 1 / (n_j μ(B_{n_j})) < ∞` with `n_j = 2^j`
    pub dyadic_sum_finite: bool,
    /// Least `λ` with `n_{j+1} μ(B_{n_j}) ≤ λ n_j μ(B_{n_{j+1}})` on the dyadic grid.
    pub lambda: f64,
    pub numeric: NumericClassification,
    /// Numeric and analytic classifications coincide.
    pub agrees: bool,
}

/// Direct summation over dyadic blocks with Richardson-extrapolated block ratios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericClassification {
    pub terms: u64,
    pub partial_sum: f64,
    /// Extrapolated ratio of consecutive dyadic block sums of `μ(B_n)`.
    pub block_ratio: f64,
    /// Tail estimate `B_K ρ / (1 − ρ)`; infinite when `ρ ≥ 1`.
    pub tail_estimate: f64,
    /// Extrapolated growth ratio of `2^k μ(B_{2^k})`.
    pub n_mu_ratio: f64,
    /// Extrapolated ratio of consecutive terms `1 / (2^j μ(B_{2^j}))`.
    pub dyadic_term_ratio: f64,
    pub summable: bool,
    pub n_mu_unbounded: bool,
    pub dyadic_sum_finite: bool,
}

const RATIO_TOL: f64 = 0.01;

fn richardson(r: &[f64]) -> f64 {
    let k = r.len();
    if k < 2 {
        return r[k - 1];
    }
    2.0 * r[k - 1] - r[k - 2]
}

/// Numeric counterpart of [`classify_schedule`], summing `2^log2_terms − 1` terms.
pub fn numeric_classification(c: f64, kappa: f64, log2_terms: u32) -> NumericClassification {
    let mu = |n: u64| c * (n as f64).powf(-kappa);
    let blocks: Vec<f64> =
        (0..log2_terms).into_par_iter().map(|k| ((1u64 << k)..(1u64 << (k + 1))).map(mu).sum::<f64>()).collect();
    let partial_sum: f64 = blocks.iter().sum();
    let ratios: Vec<f64> = blocks.windows(2).map(|w| w[1] / w[0]).collect();
    let tail = &ratios[ratios.len().saturating_sub(3)..];
    let block_ratio = richardson(tail);
    let last = *blocks.last().unwrap();
    let tail_estimate = if block_ratio < 1.0 { last * block_ratio / (1.0 - block_ratio) } else { f64::INFINITY };
    let nmu: Vec<f64> = (0..log2_terms).map(|k| (1u64 << k) as f64 * mu(1 << k)).collect();
    let nmu_ratios: Vec<f64> = nmu.windows(2).map(|w| w[1] / w[0]).collect();
    let n_mu_ratio = richardson(&nmu_ratios[nmu_ratios.len().saturating_sub(3)..]);
    let dyadic_term_ratio = 1.0 / n_mu_ratio;
    NumericClassification {
        terms: (1u64 << log2_terms) - 1,
        partial_sum,
        block_ratio,
        tail_estimate,
        n_mu_ratio,
        dyadic_term_ratio,
        summable: block_ratio < 1.0 - RATIO_TOL,
        n_mu_unbounded: n_mu_ratio > 1.0 + RATIO_TOL,
        dyadic_sum_finite: dyadic_term_ratio < 1.0 - RATIO_TOL,
    }
}

/// Classifies `μ(B_n) = c n^{−κ}` analytically and checks against direct summation.
pub fn classify_schedule(c: f64, kappa: f64, horizon: usize, log2_terms: u32) -> ScheduleClassification {
    let mu = |n: f64| c * n.powf(-kappa);
    let top = horizon.max(2).ilog2().max(1);
    let lambda = (0..top)
        .map(|j| {
            let (a, b) = ((1u64 << j) as f64, (1u64 << (j + 1)) as f64);
            b * mu(a) / (a * mu(b))
        })
        .fold(0.0, f64::max);
    let numeric = numeric_classification(c, kappa, log2_terms);
    let summable = kappa > 1.0;
    let n_mu_unbounded = kappa < 1.0;
    let dyadic_sum_finite = kappa < 1.0;
    let agrees = numeric.summable == summable
        && numeric.n_mu_unbounded == n_mu_unbounded
        && numeric.dyadic_sum_finite == dyadic_sum_finite;
    ScheduleClassification { c, kappa, summable, n_mu_unbounded, dyadic_sum_finite, lambda, numeric, agrees }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub ok: bool,
    pub errors: Vec<String>,
    pub origami: Option<String>,
    pub index: Option<usize>,
    pub projective_index: Option<usize>,
    pub stratum: Option<String>,
    pub genus: Option<u32>,
    pub r_emb: Option<f64>,
    /// Largest target measure whose ball is still embedded.
    pub max_target_measure: Option<f64>,
    pub r_1: Option<f64>,
    pub schedule: Option<ScheduleClassification>,
}

/// Checks a config without simulating; never fails.
pub fn validate(cfg: &ExperimentConfig) -> Diagnostics {
    let mut d = Diagnostics {
        ok: true,
        errors: Vec::new(),
        origami: None,
        index: None,
        projective_index: None,
        stratum: None,
        genus: None,
        r_emb: None,
        max_target_measure: None,
        r_1: None,
        schedule: None,
    };
    if let Ok(o) = parse_origami(&cfg.origami) {
        let s = o.stratum();
        d.origami = Some(o.to_string());
        d.stratum = Some(s.to_string());
        d.genus = Some(s.genus);
        if let Ok(orbit) = enumerate_orbit(&o) {
            d.index = Some(orbit.index());
            d.projective_index = Some(orbit.projective_index());
        }
    }
    match prepare(cfg) {
        Ok(p) => {
            d.r_emb = Some(p.center.r_emb());
            d.max_target_measure = Some(p.geom.measure().disk_fraction(p.center.r_emb()));
            d.r_1 = p.family.as_ref().map(|f| f.radius(1));
        }
        Err(e) => {
            d.ok = false;
            d.errors.push(e.to_string());
        }
    }
    if let Some(s) = cfg.schedule {
        d.schedule = Some(classify_schedule(s.c, s.kappa, cfg.horizon, NUMERIC_CHECK_LOG2_TERMS));
    }
    d
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub versions: BTreeMap<String, String>,
    pub wall_time_seconds: f64,
    pub threads: usize,
    pub output_dir: PathBuf,
    pub files: Vec<String>,
    pub summary: BTreeMap<String, Value>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Runs into a fresh timestamped directory under `output.dir`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
    let dir =
        cfg.output.dir.join(format!("{}-{}-{:09}", cfg.experiment.as_str(), stamp.as_secs(), stamp.subsec_nanos()));
    run_into(cfg, &dir)
}

/// Runs and writes all outputs into `dir`, creating it if needed.
pub fn run_into(cfg: &ExperimentConfig, dir: &Path) -> Result<RunManifest> {
    let started = Instant::now();
    let prepared = prepare(cfg)?;
    let threads = cfg.resolved_threads()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    fs::create_dir_all(dir)?;
    let mut out = Outputs { dir: dir.to_path_buf(), files: Vec::new(), summary: BTreeMap::new() };
    pool.install(|| dispatch(cfg, &prepared, &mut out))?;

    let mut versions = BTreeMap::new();
    versions.insert(env!("CARGO_PKG_NAME").to_string(), env!("CARGO_PKG_VERSION").to_string());
    let manifest = RunManifest {
        config: cfg.clone(),
        versions,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        threads: pool.current_num_threads(),
        output_dir: dir.to_path_buf(),
        files: out.files,
        summary: out.summary,
    };
    let tmp = dir.join(format!("{MANIFEST_FILE}.tmp"));
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        serde_json::to_writer_pretty(&mut w, &manifest).map_err(|e| Error::Config(e.to_string()))?;
        w.write_all(b"\n")?;
        w.flush()?;
    }
    fs::rename(&tmp, dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
    summary: BTreeMap<String, Value>,
}

impl Outputs {
    fn csv(&mut self, name: &str, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
        let mut w = BufWriter::new(File::create(self.dir.join(name))?);
        writeln!(w, "{header}")?;
        for r in rows {
            writeln!(w, "{r}")?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn put(&mut self, key: &str, v: impl Into<Value>) {
        self.summary.insert(key.to_string(), v.into());
    }

    fn ledgers(&mut self, ledgers: &[DistanceLedger]) -> Result<()> {
        let mut w = BufWriter::new(File::create(self.dir.join("ledgers.csv"))?);
        writeln!(w, "trajectory_id,i,d")?;
        for l in ledgers {
            l.write_csv(&mut w)?;
        }
        w.flush()?;
        self.files.push("ledgers.csv".into());
        Ok(())
    }
}

fn f(x: f64) -> String {
    format!("{x:.16e}")
}

/// Parallel map over trajectory ids; results come back in id order.
fn per_trajectory<R: Send>(samples: usize, job: impl Fn(u64) -> Result<R> + Sync + Send) -> Result<Vec<R>> {
    (0..samples as u64).into_par_iter().map(job).collect()
}

fn simulate(cfg: &ExperimentConfig, p: &Prepared, id: u64, n: usize) -> Result<DistanceLedger> {
    let mut rng = stream(cfg.master_seed, id);
    let start = p.geom.haar_sample(&mut rng);
    run_trajectory(&p.geom, &p.center, &start, n, id)
}

fn dispatch(cfg: &ExperimentConfig, p: &Prepared, out: &mut Outputs) -> Result<()> {
    out.put("origami", p.origami.to_string());
    out.put("index", p.orbit.index());
    out.put("projective_index", p.orbit.projective_index());
    out.put("r_emb", p.center.r_emb());
    match cfg.experiment {
        ExperimentKind::OrbitInfo => orbit_info(p, out),
        ExperimentKind::Thm1Summable | ExperimentKind::Thm1Divergent | ExperimentKind::HitRatio => hits(cfg, p, out),
        ExperimentKind::Emet => emet(cfg, p, out),
        ExperimentKind::Qi => qi(cfg, p, out),
        ExperimentKind::Correlation => correlation(cfg, p, out),
        ExperimentKind::Loglaw => loglaw(cfg, p, out),
    }
}

fn orbit_info(p: &Prepared, out: &mut Outputs) -> Result<()> {
    let s = p.origami.stratum();
    out.put("genus", s.genus);
    out.put("stratum", s.to_string());
    out.put("n_squares", p.origami.n_squares());
    out.put("cusp_widths", p.geom.action().cusp_widths());
    let mut buf = Vec::new();
    p.orbit.write_csv(&mut buf)?;
    fs::write(out.dir.join("orbit.csv"), buf)?;
    out.files.push("orbit.csv".into());
    Ok(())
}

struct HitRow {
    profile: crate::stats::HitProfile,
    hits_n: usize,
    late_hit: bool,
    ledger: Option<DistanceLedger>,
}

fn hits(cfg: &ExperimentConfig, p: &Prepared, out: &mut Outputs) -> Result<()> {
    let fam = p.family.as_ref().expect("schedule checked in prepare");
    let n = cfg.horizon;
    let radii = fam.radii();
    let burn = cfg.hits.burn_in;
    let rows = per_trajectory(cfg.samples, |id| {
        let ledger = simulate(cfg, p, id, n)?;
        let profile = hit_profile(&ledger, radii)?;
        let hits_n = hits_upto(&ledger, radii, n);
        let late_hit = profile.last_hit_time > burn;
        Ok(HitRow { profile, hits_n, late_hit, ledger: cfg.output.ledgers.then_some(ledger) })
    })?;
    let mu_n = fam.measure_of(n);
    let ratios: Vec<f64> = rows.iter().map(|r| r.hits_n as f64 / (n as f64 * mu_n)).collect();
    let [lo, hi] = cfg.hits.band;
    let s = rows.len() as f64;
    let frac = |pred: &dyn Fn(usize) -> bool| (0..rows.len()).filter(|&k| pred(k)).count() as f64 / s;

    out.put("horizon", n);
    out.put("samples", rows.len());
    out.put("mu_n", mu_n);
    out.put("r_1", fam.radius(1));
    out.put("r_n", fam.radius(n));
    out.put("fraction_late_hit", frac(&|k| rows[k].late_hit));
    out.put("fraction_last_hit_ge_half", frac(&|k| 2 * rows[k].profile.last_hit_time >= n));
    out.put("fraction_ratio_in_band", frac(&|k| ratios[k] >= lo && ratios[k] <= hi));
    out.put("median_ratio", median(&ratios));
    out.put("fraction_always_hit_le_quarter", frac(&|k| rows[k].profile.always_hit_from.is_some_and(|a| 4 * a <= n)));
    if let Some(s) = cfg.schedule {
        let c = classify_schedule(s.c, s.kappa, n, 20);
        out.put("summable", c.summable);
        out.put("n_mu_unbounded", c.n_mu_unbounded);
        out.put("dyadic_sum_finite", c.dyadic_sum_finite);
        out.put("lambda", c.lambda);
    }

    out.csv(
        "trajectories.csv",
        "trajectory_id,last_hit_time,always_hit_from,late_hit,hits_n,ratio",
        rows.iter().zip(&ratios).enumerate().map(|(id, (r, q))| {
            let a = r.profile.always_hit_from.map_or("inf".to_string(), |a| a.to_string());
            format!("{id},{},{a},{},{},{}", r.profile.last_hit_time, u8::from(r.late_hit), r.hits_n, f(*q))
        }),
    )?;
    out.csv(
        "hit_profiles.csv",
        "trajectory_id,n,hits",
        rows.iter().enumerate().flat_map(|(id, r)| {
            r.profile.grid.iter().zip(&r.profile.hits).map(move |(g, h)| format!("{id},{g},{h}")).collect::<Vec<_>>()
        }),
    )?;
    let measures: Vec<f64> = (1..=n).map(|k| fam.measure_of(k)).collect();
    let profiles: Vec<_> = rows.iter().map(|r| r.profile.clone()).collect();
    let exc = exceedance_fractions(&profiles, &measures, cfg.hits.exceedance_kappa);
    out.csv(
        "exceedance.csv",
        "n,mu,fraction",
        exc.iter().map(|(g, x)| format!("{g},{},{}", f(measures[g - 1]), f(*x))),
    )?;
    if cfg.output.ledgers {
        let ls: Vec<_> = rows.into_iter().filter_map(|r| r.ledger).collect();
        out.ledgers(&ls)?;
    }
    Ok(())
}

fn emet(cfg: &ExperimentConfig, p: &Prepared, out: &mut Outputs) -> Result<()> {
    let mu = cfg.emet.measure;
    let radius = p.geom.measure().radius_for_measure(mu);
    let ind = Indicator::Ball { radius };
    let grid = dyadic_grid(cfg.horizon);
    let per = per_trajectory(cfg.samples, |id| {
        let ledger = simulate(cfg, p, id, cfg.horizon)?;
        Ok(birkhoff_on_grid(&ledger, &ind, &grid))
    })?;
    let by_n: Vec<Vec<f64>> = (0..grid.len()).map(|k| per.iter().map(|row| row[k]).collect()).collect();
    let rep = ergodic_decay_from_averages(&grid, &by_n, mu)?;
    out.put("mu", mu);
    out.put("radius", radius);
    out.put("exponent", rep.exponent);
    out.put("residual", rep.residual);
    let (m_last, se_last) = mean_se(by_n.last().unwrap());
    out.put("mean_beta_last", m_last);
    out.put("mean_beta_last_se", se_last);
    out.csv(
        "emet.csv",
        "n,l2_error,l2_error_se,mean_beta,mean_beta_se",
        grid.iter().enumerate().map(|(k, n)| {
            let (m, se) = mean_se(&by_n[k]);
            format!("{n},{},{},{},{}", f(rep.l2_error[k]), f(rep.l2_error_se[k]), f(m), f(se))
        }),
    )
}

fn qi(cfg: &ExperimentConfig, p: &Prepared, out: &mut Outputs) -> Result<()> {
    let fam = p.family.as_ref().expect("schedule checked in prepare");
    let n_max = *cfg.qi.n_grid.iter().max().unwrap();
    let radii = fam.radii();
    let hits = per_trajectory(cfg.samples, |id| {
        let ledger = simulate(cfg, p, id, n_max)?;
        Ok(ledger.distances().iter().zip(radii).map(|(d, r)| d <= r).collect::<Vec<bool>>())
    })?;
    let measures: Vec<f64> = (1..=n_max).map(|k| fam.measure_of(k)).collect();
    let reports =
        cfg.qi.n_grid.iter().map(|&n| quasi_independence(&hits, &measures, cfg.qi.m, n)).collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = reports.iter().map(|r| (r.n as f64).ln()).collect();
    let y: Vec<f64> = reports.iter().map(|r| r.ratio).collect();
    if x.len() >= 2 {
        let fit = ols(&x, &y);
        let mx = x.iter().sum::<f64>() / x.len() as f64;
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let mc_se = reports.iter().zip(&x).map(|(r, a)| ((a - mx) / sxx * r.ratio_se).powi(2)).sum::<f64>().sqrt();
        out.put("ratio_slope", fit.slope);
        out.put("ratio_slope_mc_se", mc_se);
    }
    out.put("max_ratio", y.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    out.csv(
        "qi.csv",
        "m,n,lhs,lhs_se,rhs,ratio,ratio_se",
        reports.iter().map(|r| {
            format!("{},{},{},{},{},{},{}", r.m, r.n, f(r.lhs), f(r.lhs_se), f(r.rhs), f(r.ratio), f(r.ratio_se))
        }),
    )
}

fn correlation(cfg: &ExperimentConfig, p: &Prepared, out: &mut Outputs) -> Result<()> {
    let mu = cfg.correlation.measure;
    let radius = p.geom.measure().radius_for_measure(mu);
    let ind = Indicator::Ball { radius };
    let per = per_trajectory(cfg.samples, |id| {
        let mut rng = stream(cfg.master_seed, id);
        let start = p.geom.haar_sample(&mut rng);
        let d0 = p.center.distance(start.coset, start.z);
        Ok((d0, run_trajectory(&p.geom, &p.center, &start, cfg.horizon, id)?))
    })?;
    let (d0, ledgers): (Vec<f64>, Vec<DistanceLedger>) = per.into_iter().unzip();
    let t_grid: Vec<usize> = (0..=cfg.horizon).collect();
    let rep = correlation_decay(&d0, &ledgers, &ind, mu, &t_grid)?;
    out.put("mu", mu);
    out.put("radius", radius);
    out.put("fitted_sigma", rep.fitted_sigma);
    out.put("fitted_delta_proxy", rep.fitted_delta_proxy);
    out.put("corr0", rep.corr[0]);
    if cfg.horizon >= 20 {
        let tail = rep.corr[20..].iter().map(|c| c.abs() / rep.corr[0]).fold(0.0, f64::max);
        out.put("max_relative_corr_t_ge_20", tail);
    }
    out.csv(
        "correlation.csv",
        "t,corr,corr_se",
        t_grid.iter().map(|&t| format!("{t},{},{}", f(rep.corr[t]), f(rep.corr_se[t]))),
    )?;
    if cfg.output.ledgers {
        out.ledgers(&ledgers)?;
    }
    Ok(())
}

fn loglaw(cfg: &ExperimentConfig, p: &Prepared, out: &mut Outputs) -> Result<()> {
    let measure = p.geom.measure();
    let fits = per_trajectory(cfg.samples, |id| {
        let ledger = simulate(cfg, p, id, cfg.horizon)?;
        loglaw_fit(&ledger, &measure)
    })?;
    let col = |g: fn(&crate::stats::LogLawFit) -> f64| fits.iter().map(g).collect::<Vec<f64>>();
    out.put("median_slope_d", median(&col(|x| x.slope_d)));
    out.put("median_slope_tau", median(&col(|x| x.slope_tau)));
    out.put("median_residual_d", median(&col(|x| x.residual_d)));
    out.put("median_residual_tau", median(&col(|x| x.residual_tau)));
    out.put("duality_ok", fits.iter().all(|x| x.duality_ok));
    out.put("tau_fits_missing", fits.iter().filter(|x| x.slope_tau.is_nan()).count());
    out.put("tau_censored", fits.iter().map(|x| x.tau_censored).sum::<usize>());
    out.put("window", json!([LOGLAW_MIN_HORIZON, cfg.horizon]));
    out.csv(
        "loglaw.csv",
        "trajectory_id,slope_d,slope_tau,residual_d,residual_tau,r_lo,r_hi,tau_censored,duality_ok",
        fits.iter().enumerate().map(|(id, x)| {
            format!(
                "{id},{},{},{},{},{},{},{},{}",
                f(x.slope_d),
                f(x.slope_tau),
                f(x.residual_d),
                f(x.residual_tau),
                f(x.r_window.0),
                f(x.r_window.1),
                x.tau_censored,
                u8::from(x.duality_ok)
            )
        }),
    )
}
