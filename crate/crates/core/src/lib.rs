//! Rock fragment analysis from body/boundary segmentation masks.
//!
//! The crate turns three-class semantic masks (background, fragment body,
//! fragment boundary) into measured fragments and size statistics:
//!
//! 1. [`raster`] – rescaling, sliding-window tiling and stitching, opening.
//! 2. [`fusion`] – body seeds grown into boundary bands to form instances.
//! 3. [`shape`] – equivalent-ellipse fitting, diameter and volume.
//! 4. [`graindist`] – count/volume distributions, d10/d50/d90, segregation.
//! 5. [`segeval`] – confusion-matrix metrics and segmentation losses.
//! 6. [`kernels`] – forward reference implementations of CARAFE upsampling,
//!    GhostConv and ECA attention.
//!
//! [`pipeline`], [`io`], [`synth`] and [`plot`] back the `fragscan` binary.

pub mod config;
pub mod error;
pub mod fusion;
pub mod graindist;
pub mod io;
pub mod kernels;
pub mod pipeline;
pub mod plot;
pub mod raster;
pub mod segeval;
pub mod shape;
pub mod synth;

pub use error::{Error, Result};
pub use fusion::{expand_regions, extract_seeds, filter_fine, Connectivity, ExpansionConfig, InstanceMap, SeedSet};
pub use graindist::{
    characteristic_diameters, count_summary, fit_line, pool_overall, psd, relative_diameters, section_report,
    CharacteristicDiameters, DistributionMode, SectionReport, SegregationReport, SizeDistribution,
};
pub use raster::{Calibration, ClassMask, GrayImage, Grid, Label, TileLayout};
pub use shape::{ellipsoid_volume, equivalent_diameter, fit_ellipse, measure, Fragment};
