//! Many-state studies: charts over two-parameter family planes, volumetry of
//! the magic simplex and the evolution of the decay estimate during a run.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{d_est, estimate, EstimateTriple, DEFAULT_RESTARTS};
use crate::gilbert::{run_gilbert, CorrectionTrace, GilbertConfig};
use crate::qmat::{DensityMatrix, RngSeed, RngStream};
use crate::simplex::{bell_diag, is_ppt, FamilyPoint, SimplexCoords, SimplexSampler, Slice};

/// Plane sampling gives up once this many candidates were drawn at an
/// acceptance rate below [`MIN_ACCEPTANCE`].
pub const MIN_DRAWS_BEFORE_ABORT: u64 = 10_000;
pub const MIN_ACCEPTANCE: f64 = 1e-4;
/// Grid nodes closer than this (in unit-square coordinates) to a sample take
/// its value.
pub const IDW_EXACT_RADIUS: f64 = 1e-12;

const SAMPLING_STREAM: u64 = u64::MAX;
const WITNESS_STREAM: u64 = u64::MAX - 1;

fn default_restarts() -> usize {
    DEFAULT_RESTARTS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    #[serde(flatten)]
    pub slice: Slice,
    /// Closed intervals for the two free parameters.
    pub ranges: [[f64; 2]; 2],
    pub n_states: usize,
    #[serde(default)]
    pub ppt_only: bool,
    #[serde(default)]
    pub cfg: GilbertConfig,
    /// Output resolution `(nx, ny)`.
    pub grid: [usize; 2],
    #[serde(default = "default_restarts")]
    pub witness_restarts: usize,
}

impl ChartSpec {
    pub fn validate(&self) -> Result<()> {
        for (k, [lo, hi]) in self.ranges.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidConfig(format!(
                    "range {} is degenerate: [{lo}, {hi}]",
                    k + 1
                )));
            }
        }
        if self.n_states < 3 {
            return Err(Error::InvalidConfig(format!(
                "n_states must be at least 3, got {}",
                self.n_states
            )));
        }
        if self.grid[0] < 2 || self.grid[1] < 2 {
            return Err(Error::InvalidConfig(format!(
                "grid must be at least 2x2, got {}x{}",
                self.grid[0], self.grid[1]
            )));
        }
        if self.witness_restarts < 1 {
            return Err(Error::InvalidConfig(
                "witness_restarts must be at least 1".into(),
            ));
        }
        self.cfg.validate()
    }
}

/// A sampled point with its free parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanePoint {
    pub p1: f64,
    pub p2: f64,
    pub point: FamilyPoint,
}

/// Uniform physical draws over the spec's rectangle, restricted to PPT states
/// when `ppt_only` is set.
pub fn sample_plane(spec: &ChartSpec, rng: &mut RngStream) -> Result<Vec<PlanePoint>> {
    spec.validate()?;
    let [[x0, x1], [y0, y1]] = spec.ranges;
    let mut out = Vec::with_capacity(spec.n_states);
    let mut draws = 0u64;
    while out.len() < spec.n_states {
        if draws >= MIN_DRAWS_BEFORE_ABORT && (out.len() as f64) < MIN_ACCEPTANCE * draws as f64 {
            return Err(Error::Degenerate(format!(
                "only {} of {draws} draws accepted on slice {:?} over {:?} (physical{})",
                out.len(),
                spec.slice,
                spec.ranges,
                if spec.ppt_only { " and PPT" } else { "" }
            )));
        }
        draws += 1;
        let p1 = rng.uniform_in(x0, x1);
        let p2 = rng.uniform_in(y0, y1);
        let point = spec.slice.point(p1, p2);
        let Ok(rho) = point.density() else { continue };
        if spec.ppt_only && !is_ppt(&rho)?.0 {
            continue;
        }
        out.push(PlanePoint { p1, p2, point });
    }
    Ok(out)
}

/// Seeds of the Gilbert run and of the witness search for point `index`.
pub fn point_seeds(master: RngSeed, index: usize) -> (RngSeed, RngSeed) {
    let run = master.derive(index as u64);
    (run, witness_seed(run))
}

/// Seed of the witness search that follows a run seeded with `run`.
pub fn witness_seed(run: RngSeed) -> RngSeed {
    run.derive(WITNESS_STREAM)
}

/// Everything recorded about one finished run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub estimates: EstimateTriple,
    pub trace: CorrectionTrace,
    pub ppt: bool,
    pub min_pt_eig: f64,
    pub elapsed: Duration,
}

pub type PointResult = std::result::Result<RunOutcome, String>;

fn run_one(
    rho0: &DensityMatrix,
    cfg: &GilbertConfig,
    witness_seed: RngSeed,
    restarts: usize,
) -> Result<RunOutcome> {
    let start = Instant::now();
    let (ppt, min_pt_eig) = is_ppt(rho0)?;
    let (state, trace) = run_gilbert(rho0, cfg, None)?;
    let mut rng = RngStream::new(witness_seed);
    let estimates = estimate(&state, &trace, restarts, &mut rng)?;
    Ok(RunOutcome {
        estimates,
        trace,
        ppt,
        min_pt_eig,
        elapsed: start.elapsed(),
    })
}

/// Runs Gilbert plus the estimators on each state with a pool of `workers`
/// threads. Point `i` uses the seeds of [`point_seeds`]`(cfg.seed, i)`, so the
/// results do not depend on the pool size; they come back in input order.
pub fn run_batch_states(
    states: &[std::result::Result<DensityMatrix, String>],
    cfg: &GilbertConfig,
    workers: usize,
    witness_restarts: usize,
) -> Result<Vec<PointResult>> {
    cfg.validate()?;
    if states.is_empty() {
        return Err(Error::InvalidConfig("batch has no points".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    Ok(pool.install(|| {
        states
            .par_iter()
            .enumerate()
            .map(|(i, rho)| {
                let rho = rho.as_ref().map_err(|e| e.clone())?;
                let (run_seed, wit_seed) = point_seeds(cfg.seed, i);
                let cfg_i = GilbertConfig {
                    seed: run_seed,
                    ..cfg.clone()
                };
                run_one(rho, &cfg_i, wit_seed, witness_restarts).map_err(|e| e.to_string())
            })
            .collect()
    }))
}

pub fn run_batch(
    points: &[FamilyPoint],
    cfg: &GilbertConfig,
    workers: usize,
    witness_restarts: usize,
) -> Result<Vec<PointResult>> {
    let states: Vec<_> = points
        .iter()
        .map(|p| p.density().map_err(|e| e.to_string()))
        .collect();
    run_batch_states(&states, cfg, workers, witness_restarts)
}

/// Interpolated values on a regular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridValues {
    /// Node coordinates along the first parameter.
    pub xs: Vec<f64>,
    /// Node coordinates along the second parameter.
    pub ys: Vec<f64>,
    /// `values[j][i]` at `(xs[i], ys[j])`; NaN outside the sample hull.
    pub values: Vec<Vec<f64>>,
    pub outside: Vec<Vec<bool>>,
}

/// Inverse-distance weighting with power 2 at `node`; exact within
/// [`IDW_EXACT_RADIUS`] of a sample.
pub fn idw(samples: &[(f64, f64, f64)], node: (f64, f64)) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &(x, y, v) in samples {
        lo = lo.min(v);
        hi = hi.max(v);
        let d2 = (x - node.0).powi(2) + (y - node.1).powi(2);
        if d2.sqrt() <= IDW_EXACT_RADIUS {
            return v;
        }
        num += v / d2;
        den += 1.0 / d2;
    }
    // A weighted mean; clamping only removes rounding past the extremes.
    (num / den).clamp(lo, hi)
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull, counter-clockwise, by the monotone chain.
fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn inside_hull(hull: &[(f64, f64)], p: (f64, f64)) -> bool {
    let n = hull.len();
    (0..n).all(|k| {
        let (a, b) = (hull[k], hull[(k + 1) % n]);
        let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
        cross(a, b, p) >= -IDW_EXACT_RADIUS * len
    })
}

fn collinear(points: &[(f64, f64)]) -> bool {
    let p0 = points[0];
    let far = points
        .iter()
        .copied()
        .max_by(|a, b| {
            let da = (a.0 - p0.0).hypot(a.1 - p0.1);
            let db = (b.0 - p0.0).hypot(b.1 - p0.1);
            da.total_cmp(&db)
        })
        .expect("non-empty");
    let len = (far.0 - p0.0).hypot(far.1 - p0.1);
    if len <= IDW_EXACT_RADIUS {
        return true;
    }
    points
        .iter()
        .all(|&p| (cross(p0, far, p) / len).abs() <= IDW_EXACT_RADIUS)
}

/// Interpolates scattered `(p1, p2, value)` samples onto an `nx x ny` grid
/// spanning `ranges`. Distances are measured after mapping `ranges` onto the
/// unit square. Nodes outside the convex hull of the samples are flagged and
/// set to NaN.
pub fn interpolate_grid(
    samples: &[(f64, f64, f64)],
    ranges: [[f64; 2]; 2],
    grid: [usize; 2],
) -> Result<GridValues> {
    let [nx, ny] = grid;
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidConfig(format!(
            "grid must be at least 2x2, got {nx}x{ny}"
        )));
    }
    if samples.len() < 3 {
        return Err(Error::Degenerate(format!(
            "interpolation needs at least 3 samples, got {}",
            samples.len()
        )));
    }
    let [[x0, x1], [y0, y1]] = ranges;
    let unit = |x: f64, y: f64| ((x - x0) / (x1 - x0), (y - y0) / (y1 - y0));
    let scaled: Vec<(f64, f64, f64)> = samples
        .iter()
        .map(|&(x, y, v)| {
            let (u, w) = unit(x, y);
            (u, w, v)
        })
        .collect();
    let coords: Vec<(f64, f64)> = scaled.iter().map(|&(u, w, _)| (u, w)).collect();
    if collinear(&coords) {
        return Err(Error::Degenerate(
            "interpolation samples are collinear".into(),
        ));
    }
    let hull = convex_hull(&coords);

    let xs: Vec<f64> = (0..nx)
        .map(|i| x0 + (x1 - x0) * i as f64 / (nx - 1) as f64)
        .collect();
    let ys: Vec<f64> = (0..ny)
        .map(|j| y0 + (y1 - y0) * j as f64 / (ny - 1) as f64)
        .collect();
    let mut values = vec![vec![f64::NAN; nx]; ny];
    let mut outside = vec![vec![true; nx]; ny];
    for (j, &y) in ys.iter().enumerate() {
        for (i, &x) in xs.iter().enumerate() {
            let node = unit(x, y);
            if inside_hull(&hull, node) {
                outside[j][i] = false;
                values[j][i] = idw(&scaled, node);
            }
        }
    }
    Ok(GridValues {
        xs,
        ys,
        values,
        outside,
    })
}

/// One sampled point of a chart with its run result.
#[derive(Debug, Clone)]
pub struct ChartPoint {
    pub p1: f64,
    pub p2: f64,
    pub point: FamilyPoint,
    pub result: PointResult,
}

#[derive(Debug, Clone)]
pub struct ChartResult {
    pub spec: ChartSpec,
    pub points: Vec<ChartPoint>,
    pub grid_d_last: Option<GridValues>,
    pub grid_d_est: Option<GridValues>,
    pub grid_d_wit: Option<GridValues>,
    pub elapsed: Duration,
}

impl ChartResult {
    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.result.is_err()).count()
    }

    pub fn n_ppt(&self) -> usize {
        self.count(|o| o.ppt)
    }

    pub fn n_dwit_positive(&self) -> usize {
        self.count(|o| o.estimates.dwit_positive())
    }

    pub fn n_dest_positive(&self) -> usize {
        self.count(|o| o.estimates.dest_positive())
    }

    fn count(&self, f: impl Fn(&RunOutcome) -> bool) -> usize {
        self.points
            .iter()
            .filter(|p| p.result.as_ref().is_ok_and(&f))
            .count()
    }
}

/// Samples the plane, runs every point and interpolates the three
/// indicators. Grids are `None` when fewer than three non-collinear points
/// have a value.
pub fn run_chart(spec: &ChartSpec, workers: usize) -> Result<ChartResult> {
    let start = Instant::now();
    spec.validate()?;
    let mut rng = RngStream::new(spec.cfg.seed.derive(SAMPLING_STREAM));
    let sampled = sample_plane(spec, &mut rng)?;
    let families: Vec<FamilyPoint> = sampled.iter().map(|p| p.point).collect();
    let results = run_batch(&families, &spec.cfg, workers, spec.witness_restarts)?;
    let points: Vec<ChartPoint> = sampled
        .into_iter()
        .zip(results)
        .map(|(p, result)| ChartPoint {
            p1: p.p1,
            p2: p.p2,
            point: p.point,
            result,
        })
        .collect();

    let grid_for = |f: &dyn Fn(&EstimateTriple) -> Option<f64>| -> Result<Option<GridValues>> {
        let samples: Vec<(f64, f64, f64)> = points
            .iter()
            .filter_map(|p| {
                let o = p.result.as_ref().ok()?;
                f(&o.estimates).map(|v| (p.p1, p.p2, v))
            })
            .collect();
        match interpolate_grid(&samples, spec.ranges, spec.grid) {
            Ok(g) => Ok(Some(g)),
            Err(Error::Degenerate(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let grid_d_last = grid_for(&|e| Some(e.d_last))?;
    let grid_d_est = grid_for(&|e| e.d_est)?;
    let grid_d_wit = grid_for(&|e| Some(e.d_wit))?;
    Ok(ChartResult {
        spec: spec.clone(),
        points,
        grid_d_last,
        grid_d_est,
        grid_d_wit,
        elapsed: start.elapsed(),
    })
}

/// Float with 17 significant digits; `NaN` for NaN.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub const POINTS_HEADER: [&str; 11] = [
    "p1",
    "p2",
    "ppt",
    "min_pt_eig",
    "d_last",
    "d_est",
    "d_wit",
    "r",
    "corrections",
    "trials",
    "halt",
];

/// Writes `points.csv`. Failed points keep their coordinates and carry
/// `error` in the `halt` column with the remaining fields empty.
pub fn write_points_csv(path: &Path, points: &[ChartPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    w.write_record(POINTS_HEADER).map_err(io_err)?;
    for p in points {
        let mut row = vec![fmt_f64(p.p1), fmt_f64(p.p2)];
        match &p.result {
            Ok(o) => row.extend([
                o.ppt.to_string(),
                fmt_f64(o.min_pt_eig),
                fmt_f64(o.estimates.d_last),
                fmt_opt(o.estimates.d_est),
                fmt_f64(o.estimates.d_wit),
                fmt_opt(o.estimates.r),
                o.trace.corrections_done.to_string(),
                o.trace.trials_used.to_string(),
                o.trace.halt_reason.to_string(),
            ]),
            Err(_) => {
                row.extend(std::iter::repeat_n(String::new(), 8));
                row.push("error".to_string());
            }
        }
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

/// Writes the grid as `ny` rows of `nx` values; row `j` is `p2 = ys[j]`.
pub fn write_grid_csv(path: &Path, grid: &GridValues) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    for row in &grid.values {
        w.write_record(row.iter().map(|&v| fmt_f64(v)))
            .map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

/// Reproducible summary of a chart.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChartMeta {
    pub tool_version: String,
    pub spec: ChartSpec,
    pub master_seed: RngSeed,
    pub point_seeds: Vec<RngSeed>,
    pub param_names: [String; 2],
    pub n_points: usize,
    pub n_ppt: usize,
    pub n_dest_positive: usize,
    pub n_dwit_positive: usize,
    pub failures: Vec<PointFailure>,
    pub partial: bool,
    pub grid_x: Vec<f64>,
    pub grid_y: Vec<f64>,
    /// Estimators for which no grid could be built.
    pub missing_grids: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointFailure {
    pub index: usize,
    pub error: String,
}

/// Wall-clock data, kept apart from the reproducible outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChartTimings {
    pub total_seconds: f64,
    pub point_seconds: Vec<Option<f64>>,
    pub trials_per_correction: Vec<Option<f64>>,
}

impl ChartResult {
    pub fn meta(&self) -> ChartMeta {
        let (n1, n2) = self.spec.slice.param_names();
        let failures: Vec<PointFailure> = self
            .points
            .iter()
            .enumerate()
            .filter_map(|(index, p)| {
                p.result.as_ref().err().map(|e| PointFailure {
                    index,
                    error: e.clone(),
                })
            })
            .collect();
        let grids = [
            ("d_last", &self.grid_d_last),
            ("d_est", &self.grid_d_est),
            ("d_wit", &self.grid_d_wit),
        ];
        let any = grids.iter().find_map(|(_, g)| g.as_ref());
        ChartMeta {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            spec: self.spec.clone(),
            master_seed: self.spec.cfg.seed,
            point_seeds: (0..self.points.len())
                .map(|i| point_seeds(self.spec.cfg.seed, i).0)
                .collect(),
            param_names: [n1.to_string(), n2.to_string()],
            n_points: self.points.len(),
            n_ppt: self.n_ppt(),
            n_dest_positive: self.n_dest_positive(),
            n_dwit_positive: self.n_dwit_positive(),
            partial: !failures.is_empty() || grids.iter().any(|(_, g)| g.is_none()),
            failures,
            grid_x: any.map(|g| g.xs.clone()).unwrap_or_default(),
            grid_y: any.map(|g| g.ys.clone()).unwrap_or_default(),
            missing_grids: grids
                .iter()
                .filter(|(_, g)| g.is_none())
                .map(|(n, _)| n.to_string())
                .collect(),
        }
    }

    pub fn timings(&self) -> ChartTimings {
        ChartTimings {
            total_seconds: self.elapsed.as_secs_f64(),
            point_seconds: self
                .points
                .iter()
                .map(|p| p.result.as_ref().ok().map(|o| o.elapsed.as_secs_f64()))
                .collect(),
            trials_per_correction: self
                .points
                .iter()
                .map(|p| {
                    p.result
                        .as_ref()
                        .ok()
                        .map(|o| o.trace.trials_per_correction())
                })
                .collect(),
        }
    }

    /// Writes `points.csv`, `grid_d_last.csv`, `grid_d_est.csv`,
    /// `grid_d_wit.csv` (those that exist), `meta.json` and `timings.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_points_csv(&dir.join("points.csv"), &self.points)?;
        for (name, grid) in [
            ("d_last", &self.grid_d_last),
            ("d_est", &self.grid_d_est),
            ("d_wit", &self.grid_d_wit),
        ] {
            if let Some(g) = grid {
                write_grid_csv(&dir.join(format!("grid_{name}.csv")), g)?;
            }
        }
        write_json(&dir.join("meta.json"), &self.meta())?;
        write_json(&dir.join("timings.json"), &self.timings())
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = fs::File::create(path).map_err(io_err)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n").map_err(io_err)?;
    Ok(())
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

/// Counts from drawing magic-simplex states until enough PPT states appear.
#[derive(Debug, Clone)]
pub struct PptSurvey {
    pub candidate_draws: u64,
    pub physical_draws: u64,
    pub ppt: Vec<SimplexCoords>,
}

impl PptSurvey {
    pub fn ratio(&self) -> f64 {
        self.ppt.len() as f64 / self.physical_draws as f64
    }
}

pub fn survey_ppt(
    sampler: SimplexSampler,
    n_ppt_target: usize,
    rng: &mut RngStream,
) -> Result<PptSurvey> {
    if n_ppt_target < 1 {
        return Err(Error::InvalidConfig(
            "n_ppt_target must be at least 1".into(),
        ));
    }
    let mut survey = PptSurvey {
        candidate_draws: 0,
        physical_draws: 0,
        ppt: Vec::with_capacity(n_ppt_target),
    };
    while survey.ppt.len() < n_ppt_target {
        let draw = sampler.sample(rng);
        survey.candidate_draws += draw.candidates;
        survey.physical_draws += 1;
        if is_ppt(&bell_diag(&draw.coords))?.0 {
            survey.ppt.push(draw.coords);
        }
    }
    Ok(survey)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumetryReport {
    pub sampler: SimplexSampler,
    pub n_ppt_target: usize,
    pub candidate_draws: u64,
    pub physical_draws: u64,
    pub ppt_draws: u64,
    pub ppt_ratio: f64,
    /// `None` when the PPT states were only counted, not run.
    pub n_dest_positive: Option<usize>,
    pub n_dwit_positive: Option<usize>,
    pub n_failed: Option<usize>,
    pub cfg: GilbertConfig,
    pub witness_restarts: usize,
}

/// Draws until `n_ppt_target` PPT states are found, then (unless
/// `count_only`) runs each through Gilbert and the estimators and tallies
/// positive decay estimates and witness bounds.
pub fn volumetry(
    sampler: SimplexSampler,
    n_ppt_target: usize,
    cfg: &GilbertConfig,
    workers: usize,
    witness_restarts: usize,
    count_only: bool,
) -> Result<VolumetryReport> {
    cfg.validate()?;
    let mut rng = RngStream::new(cfg.seed.derive(SAMPLING_STREAM));
    let survey = survey_ppt(sampler, n_ppt_target, &mut rng)?;
    let (mut dest, mut dwit, mut failed) = (None, None, None);
    if !count_only {
        let states: Vec<_> = survey.ppt.iter().map(|c| Ok(bell_diag(c))).collect();
        let results = run_batch_states(&states, cfg, workers, witness_restarts)?;
        let ok = || results.iter().filter_map(|r| r.as_ref().ok());
        dest = Some(ok().filter(|o| o.estimates.dest_positive()).count());
        dwit = Some(ok().filter(|o| o.estimates.dwit_positive()).count());
        failed = Some(results.iter().filter(|r| r.is_err()).count());
    }
    Ok(VolumetryReport {
        sampler,
        n_ppt_target,
        candidate_draws: survey.candidate_draws,
        physical_draws: survey.physical_draws,
        ppt_draws: survey.ppt.len() as u64,
        ppt_ratio: survey.ratio(),
        n_dest_positive: dest,
        n_dwit_positive: dwit,
        n_failed: failed,
        cfg: cfg.clone(),
        witness_restarts,
    })
}

/// One checkpoint of the decay-estimate series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsPoint {
    pub corrections: u64,
    pub d_est: f64,
    pub r: f64,
}

/// Decay estimate of the trace prefixes at every multiple of
/// `checkpoint_every` corrections; checkpoints whose prefix is still too
/// short for the fit are skipped.
pub fn dest_series(trace: &CorrectionTrace, checkpoint_every: u64) -> Result<Vec<DynamicsPoint>> {
    if checkpoint_every < 2 * trace.log_cadence {
        return Err(Error::InvalidConfig(format!(
            "checkpoint_every ({checkpoint_every}) must be at least twice the log cadence ({})",
            trace.log_cadence
        )));
    }
    let mut out = Vec::new();
    let mut c = checkpoint_every;
    while c <= trace.corrections_done {
        match d_est(&trace.prefix(c)) {
            Ok(e) => out.push(DynamicsPoint {
                corrections: c,
                d_est: e.d_est,
                r: e.r,
            }),
            Err(Error::Degenerate(_)) => {}
            Err(e) => return Err(e),
        }
        c += checkpoint_every;
    }
    Ok(out)
}

/// Runs Gilbert on `rho0` and returns the decay-estimate series.
pub fn dest_dynamics(
    rho0: &DensityMatrix,
    cfg: &GilbertConfig,
    checkpoint_every: u64,
) -> Result<(Vec<DynamicsPoint>, CorrectionTrace)> {
    cfg.validate()?;
    if checkpoint_every < 2 * cfg.log_cadence {
        return Err(Error::InvalidConfig(format!(
            "checkpoint_every ({checkpoint_every}) must be at least twice the log cadence ({})",
            cfg.log_cadence
        )));
    }
    let (_, trace) = run_gilbert(rho0, cfg, None)?;
    Ok((dest_series(&trace, checkpoint_every)?, trace))
}

/// Writes `corrections,d_est,r` rows.
pub fn write_dynamics_csv(path: &Path, series: &[DynamicsPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    w.write_record(["corrections", "d_est", "r"])
        .map_err(io_err)?;
    for p in series {
        w.write_record([p.corrections.to_string(), fmt_f64(p.d_est), fmt_f64(p.r)])
            .map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}
