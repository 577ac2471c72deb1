//! Synthetic LiDAR scenes for desk-scale testing.
//!
//! A spinning sensor sits at the origin above a ground plane that is tilted
//! by a small random slope in each scan. Each beam casts `points_per_beam`
//! rays around the azimuth and records the first hit against the ground, a
//! few boxes and vertical cylinders. Rays that escape past `max_range` give no
//! return. Dropout then removes points at a
//! distance-dependent rate, which is how the sparse preset differs from the
//! dense one.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::scan::{DistanceMode, Point, RadialPartition, Scan, SensorSpec};

pub const CLASS_CAR: u16 = 10;
pub const CLASS_ROAD: u16 = 40;
pub const CLASS_SIDEWALK: u16 = 48;
pub const CLASS_BUILDING: u16 = 50;
pub const CLASS_TERRAIN: u16 = 72;
pub const CLASS_POLE: u16 = 80;

const ROAD_HALF_WIDTH: f64 = 4.0;
const SIDEWALK_HALF_WIDTH: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSceneSpec {
    pub beam_count: u32,
    /// Beam elevation angles in radians, strictly increasing.
    pub inclinations: Vec<f64>,
    pub points_per_beam: u32,
    /// Standard deviation of per-ray azimuth noise, radians.
    pub azimuth_jitter: f64,
    /// Probability of dropping a return, per equal-width range bin over
    /// `[0, max_range)`.
    pub dropout_rate_by_area: Vec<f64>,
    /// Ground labels for the road, sidewalk and terrain bands, in that order.
    /// Shorter lists reuse the last entry.
    pub ground_classes: Vec<u16>,
    /// Labels handed out to objects in turn.
    pub object_classes: Vec<u16>,
    pub seed: u64,
    pub sensor_height: f64,
    /// Largest ground slope in radians; each scan draws its own slope and
    /// downhill direction.
    pub ground_tilt: f64,
    pub object_count: u32,
    /// Standard deviation of horizontal jitter added to each return, meters.
    pub xy_jitter: f64,
    pub max_range: f64,
}

/// `n` evenly spaced angles from `lo` to `hi` inclusive, both in degrees.
pub fn uniform_inclinations(n: u32, lo_deg: f64, hi_deg: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo_deg.to_radians()],
        _ => (0..n)
            .map(|i| (lo_deg + (hi_deg - lo_deg) * i as f64 / (n - 1) as f64).to_radians())
            .collect(),
    }
}

impl SyntheticSceneSpec {
    /// A minimal clean scene: ground only, no dropout, no jitter.
    pub fn plain(inclinations: Vec<f64>, points_per_beam: u32, seed: u64) -> Self {
        SyntheticSceneSpec {
            beam_count: inclinations.len() as u32,
            inclinations,
            points_per_beam,
            azimuth_jitter: 0.0,
            dropout_rate_by_area: vec![0.0; 10],
            ground_classes: vec![CLASS_ROAD, CLASS_SIDEWALK, CLASS_TERRAIN],
            object_classes: vec![CLASS_CAR, CLASS_POLE, CLASS_BUILDING],
            seed,
            sensor_height: 1.73,
            ground_tilt: 0.0,
            object_count: 0,
            xy_jitter: 0.0,
            max_range: 100.0,
        }
    }

    /// 64 clean beams with a small, slowly rising dropout.
    pub fn dense64(seed: u64) -> Self {
        SyntheticSceneSpec {
            azimuth_jitter: 1e-4,
            dropout_rate_by_area: (0..10).map(|i| 0.01 + 0.01 * i as f64).collect(),
            ground_tilt: 0.02,
            object_count: 12,
            ..Self::plain(uniform_inclinations(64, -24.8, -1.5), 1800, seed)
        }
    }

    /// 40 beams, heavy far-range dropout and horizontal jitter.
    pub fn sparse40(seed: u64) -> Self {
        SyntheticSceneSpec {
            azimuth_jitter: 5e-4,
            dropout_rate_by_area: (0..10).map(|i| (0.05 + 0.08 * i as f64).min(0.8)).collect(),
            ground_tilt: 0.02,
            object_count: 12,
            xy_jitter: 0.02,
            ..Self::plain(uniform_inclinations(40, -25.0, -1.0), 1200, seed)
        }
    }

    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        match name {
            "dense64" => Ok(Self::dense64(seed)),
            "sparse40" => Ok(Self::sparse40(seed)),
            other => Err(Error::InvalidParameter(format!(
                "unknown preset {other:?} (expected dense64 or sparse40)"
            ))),
        }
    }

    pub fn sensor(&self) -> SensorSpec {
        SensorSpec {
            beam_count: self.beam_count,
            max_range: self.max_range,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.inclinations.len() != self.beam_count as usize {
            return bad(format!(
                "{} inclinations for {} beams",
                self.inclinations.len(),
                self.beam_count
            ));
        }
        if self
            .inclinations
            .iter()
            .any(|a| a.is_nan() || a.abs() >= PI / 2.0)
        {
            return bad("inclinations must lie in (-pi/2, pi/2)".into());
        }
        if self.inclinations.windows(2).any(|w| w[0] >= w[1]) {
            return bad("inclinations must be strictly increasing".into());
        }
        if self.dropout_rate_by_area.is_empty()
            || self
                .dropout_rate_by_area
                .iter()
                .any(|r| !(0.0..=1.0).contains(r))
        {
            return bad("dropout rates must be a non-empty list in [0, 1]".into());
        }
        for (name, v) in [
            ("ground_tilt", self.ground_tilt),
            ("azimuth_jitter", self.azimuth_jitter),
            ("xy_jitter", self.xy_jitter),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0"));
            }
        }
        if !(self.sensor_height.is_finite() && self.sensor_height > 0.0) {
            return bad("sensor_height must be > 0".into());
        }
        if self.ground_tilt >= 0.5 {
            return bad("ground_tilt must be below 0.5 rad".into());
        }
        if self.ground_classes.is_empty() {
            return bad("ground_classes is empty".into());
        }
        if self.object_count > 0 && self.object_classes.is_empty() {
            return bad("object_classes is empty".into());
        }
        self.sensor().validate()
    }
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    Box { cx: f64, cy: f64, hx: f64, hy: f64 },
    Cylinder { cx: f64, cy: f64, radius: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Object {
    shape: Shape,
    z_lo: f64,
    z_hi: f64,
    class: u16,
    instance: u16,
}

impl Object {
    /// Smallest positive ray parameter at which `dir` from the origin enters
    /// the object.
    fn hit(&self, dir: [f64; 3]) -> Option<f64> {
        match self.shape {
            Shape::Box { cx, cy, hx, hy } => {
                let lo = [cx - hx, cy - hy, self.z_lo];
                let hi = [cx + hx, cy + hy, self.z_hi];
                let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
                for a in 0..3 {
                    if dir[a].abs() < 1e-15 {
                        if lo[a] > 0.0 || hi[a] < 0.0 {
                            return None;
                        }
                        continue;
                    }
                    let (mut ta, mut tb) = (lo[a] / dir[a], hi[a] / dir[a]);
                    if ta > tb {
                        std::mem::swap(&mut ta, &mut tb);
                    }
                    t0 = t0.max(ta);
                    t1 = t1.min(tb);
                    if t0 > t1 {
                        return None;
                    }
                }
                (t0 > 0.0).then_some(t0)
            }
            Shape::Cylinder { cx, cy, radius } => {
                let mut best: Option<f64> = None;
                // side wall
                let a = dir[0] * dir[0] + dir[1] * dir[1];
                if a > 1e-15 {
                    let b = -2.0 * (dir[0] * cx + dir[1] * cy);
                    let c = cx * cx + cy * cy - radius * radius;
                    let disc = b * b - 4.0 * a * c;
                    if disc >= 0.0 {
                        let t = (-b - disc.sqrt()) / (2.0 * a);
                        let z = t * dir[2];
                        if t > 0.0 && z >= self.z_lo && z <= self.z_hi {
                            best = Some(t);
                        }
                    }
                }
                // top cap, seen from above
                if dir[2] < 0.0 && self.z_hi < 0.0 {
                    let t = self.z_hi / dir[2];
                    let (x, y) = (t * dir[0] - cx, t * dir[1] - cy);
                    if x * x + y * y <= radius * radius {
                        best = Some(best.map_or(t, |b| b.min(t)));
                    }
                }
                best
            }
        }
    }
}

fn place_objects(spec: &SyntheticSceneSpec, rng: &mut rng::StreamRng) -> Vec<Object> {
    let ground = -spec.sensor_height;
    (0..spec.object_count)
        .map(|j| {
            let class = spec.object_classes[j as usize % spec.object_classes.len()];
            let dist = rng.random_range(6.0..40.0);
            let az = rng.random_range(0.0..TAU);
            let (cx, cy) = (dist * az.cos(), dist * az.sin());
            let (shape, height) = if j % 2 == 0 {
                let shape = Shape::Box {
                    cx,
                    cy,
                    hx: rng.random_range(0.8..2.5),
                    hy: rng.random_range(0.8..2.5),
                };
                (shape, rng.random_range(1.4..6.0))
            } else {
                let shape = Shape::Cylinder {
                    cx,
                    cy,
                    radius: rng.random_range(0.1..0.6),
                };
                (shape, rng.random_range(2.0..8.0))
            };
            // extends below the plane so a sloped ground never leaves a gap
            Object {
                shape,
                z_lo: ground - 3.0,
                z_hi: ground + height,
                class,
                instance: j as u16 + 1,
            }
        })
        .collect()
}

fn ground_class(spec: &SyntheticSceneSpec, y: f64) -> u16 {
    let band = if y.abs() < ROAD_HALF_WIDTH {
        0
    } else if y.abs() < SIDEWALK_HALF_WIDTH {
        1
    } else {
        2
    };
    spec.ground_classes[band.min(spec.ground_classes.len() - 1)]
}

/// One scan of the scene described by `spec`, seeded by `(spec.seed, scan_seed)`.
/// Labels and instance ids come from the primitive each ray hit.
pub fn generate_synthetic_scan(spec: &SyntheticSceneSpec, scan_seed: u64) -> Result<Scan> {
    generate_synthetic_scan_with_beams(spec, scan_seed).map(|(scan, _)| scan)
}

/// Like [`generate_synthetic_scan`], also returning the beam that produced
/// each point.
pub fn generate_synthetic_scan_with_beams(
    spec: &SyntheticSceneSpec,
    scan_seed: u64,
) -> Result<(Scan, Vec<u16>)> {
    spec.validate()?;
    let seed = rng::derive_seed(spec.seed, scan_seed);
    let mut scene_rng = rng::stream(seed, rng::purpose::SCENE);
    let mut jitter_rng = rng::stream(seed, rng::purpose::NOISE);
    let mut drop_rng = rng::stream(seed, rng::purpose::DROPOUT);
    let objects = place_objects(spec, &mut scene_rng);
    // ground: z = -h + slope · (x cos a + y sin a)
    let (slope, downhill) = if spec.ground_tilt > 0.0 {
        (
            scene_rng.random_range(0.0..spec.ground_tilt).tan(),
            scene_rng.random_range(0.0..TAU),
        )
    } else {
        (0.0, 0.0)
    };
    let (slope_x, slope_y) = (slope * downhill.cos(), slope * downhill.sin());
    let dropout = RadialPartition::new(
        spec.dropout_rate_by_area.len(),
        spec.max_range,
        DistanceMode::Range3d,
    )?;
    let az_noise = Normal::new(0.0, spec.azimuth_jitter)
        .map_err(|e| Error::InvalidParameter(format!("azimuth_jitter: {e}")))?;
    let xy_noise = Normal::new(0.0, spec.xy_jitter)
        .map_err(|e| Error::InvalidParameter(format!("xy_jitter: {e}")))?;
    let ground = -spec.sensor_height;

    let capacity = spec.beam_count as usize * spec.points_per_beam as usize;
    let mut points = Vec::with_capacity(capacity);
    let mut labels = Vec::with_capacity(capacity);
    let mut instances = Vec::with_capacity(capacity);
    let mut beams = Vec::with_capacity(capacity);

    for (b, &incl) in spec.inclinations.iter().enumerate() {
        let (sin_i, cos_i) = incl.sin_cos();
        for k in 0..spec.points_per_beam {
            let mut az = TAU * (k as f64 + 0.5) / spec.points_per_beam as f64;
            if spec.azimuth_jitter > 0.0 {
                az += az_noise.sample(&mut jitter_rng);
            }
            let dir = [cos_i * az.cos(), cos_i * az.sin(), sin_i];

            let descent = dir[2] - slope_x * dir[0] - slope_y * dir[1];
            let mut t_hit = if descent < 0.0 {
                ground / descent
            } else {
                f64::INFINITY
            };
            let mut hit_obj: Option<&Object> = None;
            for obj in &objects {
                if let Some(t) = obj.hit(dir) {
                    if t < t_hit {
                        t_hit = t;
                        hit_obj = Some(obj);
                    }
                }
            }
            if t_hit.is_nan() || t_hit > spec.max_range {
                continue;
            }
            let (mut x, mut y, z) = (t_hit * dir[0], t_hit * dir[1], t_hit * dir[2]);
            let (class, instance) = match hit_obj {
                Some(o) => (o.class, o.instance),
                None => (ground_class(spec, y), 0),
            };

            let rate = spec.dropout_rate_by_area[dropout.index_of_distance(t_hit)];
            if rate > 0.0 && drop_rng.random::<f64>() < rate {
                continue;
            }
            if spec.xy_jitter > 0.0 {
                x += xy_noise.sample(&mut jitter_rng);
                y += xy_noise.sample(&mut jitter_rng);
            }
            let intensity = 0.05 + 0.9 * (1.0 - t_hit / spec.max_range).clamp(0.0, 1.0);
            points.push(Point::with_intensity(
                x as f32,
                y as f32,
                z as f32,
                intensity as f32,
            ));
            labels.push(class);
            instances.push(instance);
            beams.push(b as u16);
        }
    }

    let scan = Scan::new(points, spec.sensor())?
        .with_labels(labels)?
        .with_instance_ids(instances)?;
    Ok((scan, beams))
}
