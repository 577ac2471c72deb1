//! Density-guided translation of LiDAR scans between sensor domains, intertwined
//! inclination-area scan mixing, and the closed-form losses used to self-train a
//! segmentor across domains.
//!
//! The crate is organised bottom-up:
//!
//! * [`scan`]: points, scans, sensor metadata and the radial / inclination partitions.
//! * [`io`]: `.bin` / `.label` / `.profile` / field files.
//! * [`synth`]: a deterministic two-domain synthetic scene generator.
//! * [`beams`]: 1-D K-means beam labelling and whole-beam discarding.
//! * [`density`]: dataset density profiles, translation ratios and the translator itself.
//! * [`lasermix`]: intertwined mixing and confidence-thresholded pseudo-labels.
//! * [`numerics`]: cross-entropy, self-information, LS-GAN terms, prototypes,
//!   alignment weights, EMA teacher updates and the consistency loss.

pub mod beams;
pub mod density;
pub mod error;
pub mod io;
pub mod lasermix;
pub mod numerics;
pub mod rng;
pub mod scan;
pub mod synth;

pub use error::{Error, Result};
pub use scan::{DistanceMode, InclinationPartition, Point, RadialPartition, Scan, SensorSpec};
