//! Rasterized hulls in the closed upper half-plane and the measurements the
//! experiments need: half-plane capacity, harmonic measure, hull filling,
//! bubbles with their inscribed disks, diameters and distortion checks.

mod bubbles;
mod diameter;
mod distortion;
mod edt;
mod raster;
mod walk;

pub use bubbles::{bubbles, bubbles_closed, closing_radius, fill_hull_closed, inscribed_radius, Bubble, BubbleReport};
pub use diameter::{convex_hull, segment_diameter};
pub use distortion::{check_distortion, sample_map, DistortionReport, DistortionSample};
pub use edt::{edt_squared, hausdorff_distance};
pub use raster::{fill_hull, fill_times, HullRaster, DEFAULT_RESOLUTION_DIVISOR};
pub use walk::{
    default_start_height, estimate_hcap, estimate_hcap_with, harmonic_measure, harmonic_measure_with,
    BoundaryTarget, WalkConfig,
};
