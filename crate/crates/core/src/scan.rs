//! Scans, sensor metadata and the two partitions every other module indexes by.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single LiDAR return. Coordinates are meters in the sensor frame.
///
/// `intensity` is carried through untouched; `0.0` stands for "not measured".
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    pub intensity: f32,
}

impl Point {
    pub const fn new(x: f32, y: f32, z: f32) -> Self {
        Point {
            x,
            y,
            z,
            intensity: 0.0,
        }
    }

    pub const fn with_intensity(x: f32, y: f32, z: f32, intensity: f32) -> Self {
        Point { x, y, z, intensity }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.intensity.is_finite()
    }

    pub fn range(&self) -> f64 {
        let (x, y, z) = (self.x as f64, self.y as f64, self.z as f64);
        (x * x + y * y + z * z).sqrt()
    }

    pub fn planar_range(&self) -> f64 {
        let (x, y) = (self.x as f64, self.y as f64);
        (x * x + y * y).sqrt()
    }

    /// Elevation of the ray through this point, `atan2(z, sqrt(x² + y²))`.
    pub fn inclination(&self) -> Result<f64> {
        if self.x == 0.0 && self.y == 0.0 && self.z == 0.0 {
            return Err(Error::DegeneratePoint);
        }
        Ok(self.raw_inclination())
    }

    /// Same as [`Point::inclination`] but maps the origin to `0.0`.
    pub(crate) fn raw_inclination(&self) -> f64 {
        (self.z as f64).atan2(self.planar_range())
    }

    /// Bitwise equality, distinguishing `-0.0` from `0.0`.
    pub fn bit_eq(&self, other: &Point) -> bool {
        self.x.to_bits() == other.x.to_bits()
            && self.y.to_bits() == other.y.to_bits()
            && self.z.to_bits() == other.z.to_bits()
            && self.intensity.to_bits() == other.intensity.to_bits()
    }
}

/// Free-function form of [`Point::inclination`].
pub fn inclination_of(p: &Point) -> Result<f64> {
    p.inclination()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub beam_count: u32,
    /// Working range in meters.
    pub max_range: f64,
}

impl SensorSpec {
    pub fn new(beam_count: u32, max_range: f64) -> Result<Self> {
        let s = SensorSpec {
            beam_count,
            max_range,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.beam_count == 0 {
            return Err(Error::InvalidParameter("beam_count must be >= 1".into()));
        }
        if !(self.max_range.is_finite() && self.max_range > 0.0) {
            return Err(Error::InvalidParameter("max_range must be > 0".into()));
        }
        Ok(())
    }
}

impl Default for SensorSpec {
    fn default() -> Self {
        SensorSpec {
            beam_count: 64,
            max_range: 100.0,
        }
    }
}

/// Points, semantic labels, instance ids and sensor of a [`Scan`].
pub type ScanParts = (Vec<Point>, Option<Vec<u16>>, Option<Vec<u16>>, SensorSpec);

/// An ordered point set with optional per-point semantic class and instance ids.
///
/// Class id `0` is reserved for "unlabeled".
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scan {
    points: Vec<Point>,
    labels: Option<Vec<u16>>,
    instance_ids: Option<Vec<u16>>,
    sensor: SensorSpec,
}

impl Scan {
    pub fn new(points: Vec<Point>, sensor: SensorSpec) -> Result<Self> {
        Self::from_parts(points, None, None, sensor)
    }

    pub fn from_parts(
        points: Vec<Point>,
        labels: Option<Vec<u16>>,
        instance_ids: Option<Vec<u16>>,
        sensor: SensorSpec,
    ) -> Result<Self> {
        if let Some(index) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinitePoint { index });
        }
        check_len("labels", points.len(), labels.as_deref())?;
        check_len("instance ids", points.len(), instance_ids.as_deref())?;
        sensor.validate()?;
        Ok(Scan {
            points,
            labels,
            instance_ids,
            sensor,
        })
    }

    /// Attach semantic labels; fails when the count differs from the point count.
    pub fn with_labels(mut self, labels: Vec<u16>) -> Result<Self> {
        check_len("labels", self.points.len(), Some(&labels))?;
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_instance_ids(mut self, ids: Vec<u16>) -> Result<Self> {
        check_len("instance ids", self.points.len(), Some(&ids))?;
        self.instance_ids = Some(ids);
        Ok(self)
    }

    pub fn with_sensor(mut self, sensor: SensorSpec) -> Result<Self> {
        sensor.validate()?;
        self.sensor = sensor;
        Ok(self)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn labels(&self) -> Option<&[u16]> {
        self.labels.as_deref()
    }

    pub fn instance_ids(&self) -> Option<&[u16]> {
        self.instance_ids.as_deref()
    }

    pub fn sensor(&self) -> SensorSpec {
        self.sensor
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// New scan holding the points at `indices`, in that order, with labels and
    /// instance ids gathered the same way.
    pub fn select(&self, indices: &[usize]) -> Scan {
        let gather = |v: &Vec<u16>| indices.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Scan {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            labels: self.labels.as_ref().map(gather),
            instance_ids: self.instance_ids.as_ref().map(gather),
            sensor: self.sensor,
        }
    }

    /// Mutable access to coordinates for in-place perturbation. Callers must keep
    /// every coordinate finite.
    pub(crate) fn points_mut(&mut self) -> &mut [Point] {
        &mut self.points
    }

    pub fn into_parts(self) -> ScanParts {
        (self.points, self.labels, self.instance_ids, self.sensor)
    }

    /// Bitwise equality of points plus exact equality of labels, ids and sensor.
    pub fn bit_eq(&self, other: &Scan) -> bool {
        self.points.len() == other.points.len()
            && self
                .points
                .iter()
                .zip(&other.points)
                .all(|(a, b)| a.bit_eq(b))
            && self.labels == other.labels
            && self.instance_ids == other.instance_ids
            && self.sensor == other.sensor
    }
}

fn check_len(what: &'static str, expected: usize, v: Option<&[u16]>) -> Result<()> {
    match v {
        Some(v) if v.len() != expected => Err(Error::LengthMismatch {
            what,
            expected,
            got: v.len(),
        }),
        _ => Ok(()),
    }
}

/// Which distance a radial partition bins on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    /// 3-D Euclidean range from the sensor center.
    #[default]
    Range3d,
    /// Horizontal range `sqrt(x² + y²)`.
    Planar,
}

impl DistanceMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            DistanceMode::Range3d => "range3d",
            DistanceMode::Planar => "planar",
        }
    }
}

impl std::str::FromStr for DistanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "range3d" => Ok(DistanceMode::Range3d),
            "planar" => Ok(DistanceMode::Planar),
            other => Err(Error::InvalidParameter(format!(
                "unknown distance mode {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for DistanceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `m` equal-width distance bins over `[0, r_max)`; anything farther lands in
/// the last bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialPartition {
    m: usize,
    r_max: f64,
    mode: DistanceMode,
}

impl RadialPartition {
    pub fn new(m: usize, r_max: f64, mode: DistanceMode) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("area count m must be >= 1".into()));
        }
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::InvalidParameter("r_max must be > 0".into()));
        }
        Ok(RadialPartition { m, r_max, mode })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn mode(&self) -> DistanceMode {
        self.mode
    }

    pub fn bin_width(&self) -> f64 {
        self.r_max / self.m as f64
    }

    /// `[lo, hi)` distance bounds of area `i` in meters.
    pub fn bounds(&self, i: usize) -> (f64, f64) {
        let w = self.bin_width();
        (i as f64 * w, (i + 1) as f64 * w)
    }

    pub fn distance(&self, p: &Point) -> f64 {
        match self.mode {
            DistanceMode::Range3d => p.range(),
            DistanceMode::Planar => p.planar_range(),
        }
    }

    pub fn area_index(&self, p: &Point) -> usize {
        self.index_of_distance(self.distance(p))
    }

    pub fn index_of_distance(&self, d: f64) -> usize {
        let idx = (d / self.bin_width()).floor();
        if idx >= (self.m - 1) as f64 {
            self.m - 1
        } else if idx > 0.0 {
            idx as usize
        } else {
            0
        }
    }

    /// Per-area point counts of a scan.
    pub fn histogram(&self, points: &[Point]) -> Vec<u64> {
        let mut counts = vec![0u64; self.m];
        for p in points {
            counts[self.area_index(p)] += 1;
        }
        counts
    }
}

impl Default for RadialPartition {
    fn default() -> Self {
        RadialPartition {
            m: 50,
            r_max: 100.0,
            mode: DistanceMode::Range3d,
        }
    }
}

pub fn radial_area_index(p: &Point, part: &RadialPartition) -> usize {
    part.area_index(p)
}

/// `n` equal-width inclination bins over `[phi_min, phi_max]`; angles outside
/// clamp to the nearest end bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InclinationPartition {
    n: usize,
    phi_min: f64,
    phi_max: f64,
}

impl InclinationPartition {
    pub fn new(n: usize, phi_min: f64, phi_max: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(
                "inclination area count n must be >= 2".into(),
            ));
        }
        if !(phi_min.is_finite() && phi_max.is_finite() && phi_min < phi_max) {
            return Err(Error::InvalidParameter(format!(
                "inclination bounds must satisfy phi_min < phi_max, got [{phi_min}, {phi_max}]"
            )));
        }
        Ok(InclinationPartition {
            n,
            phi_min,
            phi_max,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn phi_min(&self) -> f64 {
        self.phi_min
    }

    pub fn phi_max(&self) -> f64 {
        self.phi_max
    }

    pub fn index_of_angle(&self, phi: f64) -> usize {
        let idx = ((phi - self.phi_min) * self.n as f64 / (self.phi_max - self.phi_min)).floor();
        if idx >= (self.n - 1) as f64 {
            self.n - 1
        } else if idx > 0.0 {
            idx as usize
        } else {
            0
        }
    }

    /// Area of a point by its inclination. A point exactly at the sensor center
    /// is treated as horizontal.
    pub fn area_index(&self, p: &Point) -> usize {
        self.index_of_angle(p.raw_inclination())
    }
}

pub fn inclination_area_index(p: &Point, part: &InclinationPartition) -> usize {
    part.area_index(p)
}
