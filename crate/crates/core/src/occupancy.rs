//! Log-odds voxel occupancy from synthetic sonar, and extraction of a
//! planning problem (critical waypoints, edge collision probabilities).

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{Edge, Obstacle, Scenario, Vec3};

/// Log-odds increments are rounded to multiples of this quantum. Sums of
/// quantized increments are exact in `f64`, so updates commute and a hit
/// cancels a complementary miss exactly.
const QUANTUM: f64 = 1.0 / (1u64 << 32) as f64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OccupancyError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid sensor model: need 0 < p_miss < 0.5 < p_hit < 1, got p_hit={p_hit}, p_miss={p_miss}")]
    InvalidSensorModel { p_hit: f64, p_miss: f64 },
    #[error("beam {beam}: {reason}")]
    InvalidBeam { beam: usize, reason: String },
    #[error("waypoint `{0}` lies outside the grid")]
    WaypointOutsideGrid(String),
    #[error("waypoint `{id}` lies in an occupied voxel (occupancy {occupancy:.3})")]
    WaypointInOccupiedVoxel { id: String, occupancy: f64 },
    #[error("unknown waypoint `{0}`")]
    UnknownWaypoint(String),
}

pub fn logistic(l: f64) -> f64 {
    1.0 / (1.0 + (-l).exp())
}

/// `ln(p / (1 - p))`, computed so that `logit(p) == -logit(1 - p)` and
/// rounded to the update quantum.
pub fn logit(p: f64) -> f64 {
    let raw = if p < 0.5 { -((1.0 - p) / p).ln() } else { (p / (1.0 - p)).ln() };
    (raw / QUANTUM).round() * QUANTUM
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub p_hit: f64,
    pub p_miss: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        SensorModel { p_hit: 0.7, p_miss: 0.4 }
    }
}

impl SensorModel {
    fn check(&self) -> Result<(), OccupancyError> {
        if 0.0 < self.p_miss && self.p_miss < 0.5 && 0.5 < self.p_hit && self.p_hit < 1.0 {
            Ok(())
        } else {
            Err(OccupancyError::InvalidSensorModel { p_hit: self.p_hit, p_miss: self.p_miss })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelGrid {
    pub origin: Vec3,
    pub resolution: f64,
    pub dims: [usize; 3],
    pub l_min: f64,
    pub l_max: f64,
    /// Log-odds, x fastest.
    pub cells: Vec<f64>,
}

pub type VoxelIndex = [usize; 3];

impl VoxelGrid {
    pub fn new(origin: Vec3, resolution: f64, dims: [usize; 3]) -> Result<Self, OccupancyError> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(OccupancyError::InvalidGrid(format!("resolution {resolution}")));
        }
        let n = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).filter(|&n| n > 0 && n <= 50_000_000);
        let Some(n) = n else {
            return Err(OccupancyError::InvalidGrid(format!("dimensions {dims:?}")));
        };
        Ok(VoxelGrid { origin, resolution, dims, l_min: -3.5, l_max: 3.5, cells: vec![0.0; n] })
    }

    /// Smallest grid at `resolution` covering the box `[lo, hi]`.
    pub fn covering(lo: Vec3, hi: Vec3, resolution: f64) -> Result<Self, OccupancyError> {
        let mut dims = [0; 3];
        for k in 0..3 {
            let span = hi[k] - lo[k];
            if !(span > 0.0) {
                return Err(OccupancyError::InvalidGrid(format!("empty extent on axis {k}")));
            }
            dims[k] = (span / resolution).ceil() as usize;
        }
        VoxelGrid::new(lo, resolution, dims)
    }

    fn flat(&self, v: VoxelIndex) -> usize {
        v[0] + self.dims[0] * (v[1] + self.dims[1] * v[2])
    }

    pub fn voxel_of(&self, p: Vec3) -> Option<VoxelIndex> {
        let mut v = [0; 3];
        for k in 0..3 {
            let f = ((p[k] - self.origin[k]) / self.resolution).floor();
            if !(f >= 0.0 && f < self.dims[k] as f64) {
                return None;
            }
            v[k] = f as usize;
        }
        Some(v)
    }

    pub fn center(&self, v: VoxelIndex) -> Vec3 {
        std::array::from_fn(|k| self.origin[k] + (v[k] as f64 + 0.5) * self.resolution)
    }

    pub fn log_odds(&self, v: VoxelIndex) -> f64 {
        self.cells[self.flat(v)]
    }

    pub fn occupancy(&self, v: VoxelIndex) -> f64 {
        logistic(self.log_odds(v))
    }

    /// Adds `delta` to a voxel's log-odds and clamps.
    pub fn update(&mut self, v: VoxelIndex, delta: f64) {
        let i = self.flat(v);
        self.cells[i] = (self.cells[i] + delta).clamp(self.l_min, self.l_max);
    }

    pub fn hit(&mut self, v: VoxelIndex, model: &SensorModel) {
        self.update(v, logit(model.p_hit));
    }

    pub fn miss(&mut self, v: VoxelIndex, model: &SensorModel) {
        self.update(v, logit(model.p_miss));
    }

    /// Voxels crossed by the segment `a -> b`, clipped to the grid, in
    /// order, each once.
    pub fn traverse(&self, a: Vec3, b: Vec3) -> Vec<VoxelIndex> {
        let d: Vec3 = std::array::from_fn(|k| b[k] - a[k]);
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for k in 0..3 {
            let lo = self.origin[k];
            let hi = lo + self.dims[k] as f64 * self.resolution;
            if d[k] == 0.0 {
                if a[k] < lo || a[k] >= hi {
                    return Vec::new();
                }
            } else {
                let (ta, tb) = ((lo - a[k]) / d[k], (hi - a[k]) / d[k]);
                t0 = t0.max(ta.min(tb));
                t1 = t1.min(ta.max(tb));
            }
        }
        if t0 > t1 {
            return Vec::new();
        }
        let entry: Vec3 = std::array::from_fn(|k| a[k] + t0 * d[k]);
        let mut v = [0usize; 3];
        let mut step = [0i64; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for k in 0..3 {
            let f = ((entry[k] - self.origin[k]) / self.resolution).floor();
            v[k] = (f.max(0.0) as usize).min(self.dims[k] - 1);
            if d[k] > 0.0 {
                step[k] = 1;
                let boundary = self.origin[k] + (v[k] + 1) as f64 * self.resolution;
                t_max[k] = (boundary - a[k]) / d[k];
                t_delta[k] = self.resolution / d[k];
            } else if d[k] < 0.0 {
                step[k] = -1;
                let boundary = self.origin[k] + v[k] as f64 * self.resolution;
                t_max[k] = (boundary - a[k]) / d[k];
                t_delta[k] = -self.resolution / d[k];
            }
        }
        let mut out = vec![v];
        loop {
            let k = (0..3).min_by(|&i, &j| t_max[i].total_cmp(&t_max[j])).unwrap();
            if t_max[k] > t1 {
                break;
            }
            let next = v[k] as i64 + step[k];
            if next < 0 || next >= self.dims[k] as i64 {
                break;
            }
            v[k] = next as usize;
            t_max[k] += t_delta[k];
            out.push(v);
        }
        out
    }

    /// Applies one scan: misses along each beam, a hit at the return voxel
    /// when the beam ended on something inside the grid.
    pub fn integrate_scan(&mut self, scan: &SonarScan, model: &SensorModel) -> Result<(), OccupancyError> {
        model.check()?;
        scan.check()?;
        for beam in &scan.beams {
            let end: Vec3 = std::array::from_fn(|k| scan.position[k] + beam.direction[k] * beam.range);
            let is_hit = beam.range < beam.max_range;
            let hit_voxel = if is_hit { self.voxel_of(end) } else { None };
            for v in self.traverse(scan.position, end) {
                if Some(v) != hit_voxel {
                    self.miss(v, model);
                }
            }
            if let Some(v) = hit_voxel {
                self.hit(v, model);
            }
        }
        Ok(())
    }

    /// `ix,iy,iz,occupancy` for every voxel whose log-odds differ from the
    /// prior by more than 0.01.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ix,iy,iz,occupancy\n");
        for iz in 0..self.dims[2] {
            for iy in 0..self.dims[1] {
                for ix in 0..self.dims[0] {
                    let l = self.log_odds([ix, iy, iz]);
                    if l.abs() > 0.01 {
                        out.push_str(&format!("{ix},{iy},{iz},{:.6}\n", logistic(l)));
                    }
                }
            }
        }
        out
    }

    /// Voxels whose center lies within `radius` of the segment `a -> b`.
    fn near_segment(&self, a: Vec3, b: Vec3, radius: f64) -> impl Iterator<Item = VoxelIndex> + '_ {
        let range = |k: usize| {
            let lo = a[k].min(b[k]) - radius - self.origin[k];
            let hi = a[k].max(b[k]) + radius - self.origin[k];
            let first = (lo / self.resolution - 0.5).ceil().max(0.0) as usize;
            let last = ((hi / self.resolution - 0.5).floor()).min(self.dims[k] as f64 - 1.0);
            if last < 0.0 { 1..0 } else { first..last as usize + 1 }
        };
        let (rx, ry, rz) = (range(0), range(1), range(2));
        rz.flat_map(move |iz| {
            let rx = rx.clone();
            ry.clone().flat_map(move |iy| rx.clone().map(move |ix| [ix, iy, iz]))
        })
        .filter(move |&v| segment_distance(self.center(v), a, b) <= radius)
    }

    fn max_occupancy_near(&self, a: Vec3, b: Vec3, radius: f64) -> f64 {
        self.near_segment(a, b, radius).map(|v| self.occupancy(v)).fold(0.0, f64::max)
    }
}

fn segment_distance(p: Vec3, a: Vec3, b: Vec3) -> f64 {
    let ab: Vec3 = std::array::from_fn(|k| b[k] - a[k]);
    let ap: Vec3 = std::array::from_fn(|k| p[k] - a[k]);
    let len2: f64 = ab.iter().map(|x| x * x).sum();
    let t = if len2 > 0.0 { (ap.iter().zip(&ab).map(|(x, y)| x * y).sum::<f64>() / len2).clamp(0.0, 1.0) } else { 0.0 };
    (0..3).map(|k| (ap[k] - t * ab[k]).powi(2)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Beam {
    pub direction: Vec3,
    pub range: f64,
    pub max_range: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SonarScan {
    pub position: Vec3,
    /// Sensor heading (yaw, radians); beam directions are in world frame.
    pub heading: f64,
    pub beams: Vec<Beam>,
}

impl SonarScan {
    fn check(&self) -> Result<(), OccupancyError> {
        for (i, b) in self.beams.iter().enumerate() {
            let norm = b.direction.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(OccupancyError::InvalidBeam { beam: i, reason: format!("direction norm {norm}") });
            }
            if !(b.range > 0.0 && b.range <= b.max_range && b.max_range.is_finite()) {
                return Err(OccupancyError::InvalidBeam { beam: i, reason: format!("range {} of {}", b.range, b.max_range) });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorPose {
    pub position: Vec3,
    pub heading: f64,
}

/// A forward-looking multibeam fan, angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamFan {
    pub horizontal_fov: f64,
    pub horizontal_beams: usize,
    pub vertical_fov: f64,
    pub vertical_beams: usize,
    pub max_range: f64,
}

impl Default for BeamFan {
    fn default() -> Self {
        BeamFan {
            horizontal_fov: 130f64.to_radians(),
            horizontal_beams: 33,
            vertical_fov: 20f64.to_radians(),
            vertical_beams: 5,
            max_range: 20.0,
        }
    }
}

impl BeamFan {
    pub fn directions(&self, heading: f64) -> Vec<Vec3> {
        let spread = |fov: f64, n: usize, i: usize| if n <= 1 { 0.0 } else { -fov / 2.0 + fov * i as f64 / (n - 1) as f64 };
        let mut out = Vec::with_capacity(self.horizontal_beams * self.vertical_beams);
        for j in 0..self.vertical_beams.max(1) {
            let pitch = spread(self.vertical_fov, self.vertical_beams, j);
            for i in 0..self.horizontal_beams.max(1) {
                let yaw = heading + spread(self.horizontal_fov, self.horizontal_beams, i);
                let d = [pitch.cos() * yaw.cos(), pitch.cos() * yaw.sin(), pitch.sin()];
                let n = d.iter().map(|x| x * x).sum::<f64>().sqrt();
                out.push(d.map(|x| x / n));
            }
        }
        out
    }
}

/// Distance along the ray `o + t d` to the box, if it is hit at `t >= 0`.
pub fn ray_box(o: Vec3, d: Vec3, b: &Obstacle) -> Option<f64> {
    let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
    for k in 0..3 {
        let lo = b.center[k] - b.half_extents[k];
        let hi = b.center[k] + b.half_extents[k];
        if d[k] == 0.0 {
            if o[k] < lo || o[k] > hi {
                return None;
            }
        } else {
            let (ta, tb) = ((lo - o[k]) / d[k], (hi - o[k]) / d[k]);
            t0 = t0.max(ta.min(tb));
            t1 = t1.min(ta.max(tb));
        }
    }
    (t0 <= t1).then_some(t0)
}

/// Exact ray/box ranges along each beam, plus zero-mean Gaussian noise of
/// standard deviation `sigma` on returns. Beams that hit nothing report the
/// maximum range.
pub fn synthesize_scans<R: Rng + ?Sized>(
    obstacles: &[Obstacle],
    path: &[SensorPose],
    fan: &BeamFan,
    rng: &mut R,
    sigma: f64,
) -> Vec<SonarScan> {
    let noise = Normal::new(0.0, sigma.max(0.0)).expect("sigma is finite and nonnegative");
    path.iter()
        .map(|pose| {
            let beams = fan
                .directions(pose.heading)
                .into_iter()
                .map(|direction| {
                    let exact = obstacles
                        .iter()
                        .filter_map(|o| ray_box(pose.position, direction, o))
                        .fold(f64::INFINITY, f64::min);
                    let range = if exact < fan.max_range {
                        let r = if sigma > 0.0 { exact + noise.sample(rng) } else { exact };
                        r.clamp(1e-6, fan.max_range)
                    } else {
                        fan.max_range
                    };
                    Beam { direction, range, max_range: fan.max_range }
                })
                .collect();
            SonarScan { position: pose.position, heading: pose.heading, beams }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MappingConfig {
    pub resolution: f64,
    /// Grid extends this far beyond the scene's bounding box.
    pub margin: f64,
    /// Headings scanned at every waypoint, evenly spaced.
    pub headings: usize,
    pub range_sigma: f64,
    pub fan: BeamFan,
    pub sensor: SensorModel,
}

impl Default for MappingConfig {
    fn default() -> Self {
        MappingConfig {
            resolution: 0.5,
            margin: 2.0,
            headings: 8,
            range_sigma: 0.05,
            fan: BeamFan::default(),
            sensor: SensorModel::default(),
        }
    }
}

/// Surveys a scenario: scans from every waypoint in `headings` directions
/// and integrates them into a fresh grid covering the scene.
pub fn map_scenario<R: Rng + ?Sized>(s: &Scenario, cfg: &MappingConfig, rng: &mut R) -> Result<VoxelGrid, OccupancyError> {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for o in &s.obstacles {
        for k in 0..3 {
            lo[k] = lo[k].min(o.center[k] - o.half_extents[k]);
            hi[k] = hi[k].max(o.center[k] + o.half_extents[k]);
        }
    }
    for w in &s.waypoints {
        for k in 0..3 {
            lo[k] = lo[k].min(w.position[k]);
            hi[k] = hi[k].max(w.position[k]);
        }
    }
    let lo = lo.map(|x| ((x - cfg.margin) / cfg.resolution).floor() * cfg.resolution);
    let hi = hi.map(|x| x + cfg.margin);
    let mut grid = VoxelGrid::covering(lo, hi, cfg.resolution)?;
    let poses: Vec<SensorPose> = s
        .waypoints
        .iter()
        .flat_map(|w| {
            (0..cfg.headings.max(1)).map(move |i| SensorPose {
                position: w.position,
                heading: std::f64::consts::TAU * i as f64 / cfg.headings.max(1) as f64,
            })
        })
        .collect();
    for scan in synthesize_scans(&s.obstacles, &poses, &cfg.fan, rng, cfg.range_sigma) {
        grid.integrate_scan(&scan, &cfg.sensor)?;
    }
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractConfig {
    pub tau_occ: f64,
    pub clearance: f64,
    /// Scales the largest nearby occupancy into a collision probability.
    pub kappa: f64,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig { tau_occ: 0.5, clearance: 1.5, kappa: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFragment {
    /// Waypoint id and whether it is critical.
    pub critical: Vec<(String, bool)>,
    pub edges: Vec<Edge>,
}

/// Marks waypoints near occupied voxels as critical and assigns every edge
/// a collision probability from the occupancy along it.
pub fn extract_problem(
    g: &VoxelGrid,
    waypoints: &[(String, Vec3)],
    edges: &[(String, String)],
    cfg: &ExtractConfig,
) -> Result<ProblemFragment, OccupancyError> {
    let mut critical = Vec::with_capacity(waypoints.len());
    for (id, p) in waypoints {
        let v = g.voxel_of(*p).ok_or_else(|| OccupancyError::WaypointOutsideGrid(id.clone()))?;
        let own = g.occupancy(v);
        if own > cfg.tau_occ {
            return Err(OccupancyError::WaypointInOccupiedVoxel { id: id.clone(), occupancy: own });
        }
        critical.push((id.clone(), g.max_occupancy_near(*p, *p, cfg.clearance) > cfg.tau_occ));
    }
    let position = |id: &str| {
        waypoints
            .iter()
            .find(|(w, _)| w == id)
            .map(|(_, p)| *p)
            .ok_or_else(|| OccupancyError::UnknownWaypoint(id.to_string()))
    };
    let mut out_edges = Vec::with_capacity(edges.len());
    for (a, b) in edges {
        let peak = g.max_occupancy_near(position(a)?, position(b)?, cfg.clearance);
        let p = if peak > cfg.tau_occ { (cfg.kappa * peak).clamp(0.0, 0.95) } else { 0.0 };
        out_edges.push(Edge { from: a.clone(), to: b.clone(), collision_probability: p, oneway: false });
    }
    Ok(ProblemFragment { critical, edges: out_edges })
}

impl ProblemFragment {
    /// Copies critical flags and edge probabilities into `s`.
    pub fn apply(&self, s: &Scenario) -> Scenario {
        let mut out = s.clone();
        for (id, c) in &self.critical {
            if let Some(w) = out.waypoints.iter_mut().find(|w| &w.id == id) {
                w.critical = *c;
            }
        }
        for e in &mut out.edges {
            if let Some(f) = self.edges.iter().find(|f| f.from == e.from && f.to == e.to) {
                e.collision_probability = f.collision_probability;
            }
        }
        out
    }
}

/// Extracts a fragment for all of a scenario's waypoints and edges.
pub fn extract_for_scenario(g: &VoxelGrid, s: &Scenario, cfg: &ExtractConfig) -> Result<ProblemFragment, OccupancyError> {
    let waypoints: Vec<(String, Vec3)> = s.waypoints.iter().map(|w| (w.id.clone(), w.position)).collect();
    let edges: Vec<(String, String)> = s.edges.iter().map(|e| (e.from.clone(), e.to.clone())).collect();
    extract_problem(g, &waypoints, &edges, cfg)
}
