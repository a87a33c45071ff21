//! Microphone-array acoustic imaging: conventional cross-spectral
//! beamforming and DAMAS deconvolution.
//!
//! The crate is `no_std` and only needs an allocator. File formats, time
//! series processing, rendering and the command line live in the `damas`
//! crate.
//!
//! A typical pipeline:
//!
//! ```
//! use damas_core::prelude::*;
//!
//! let array = default_array(1.0).unwrap();
//! let grid = make_scan_grid(Point3::new(0.0, 0.0, 3.0), 1.0, 1.0, 10).unwrap();
//! let medium = Medium::default();
//! let scene = SourceScene::new(vec![Source::new(grid.point(60), 2000.0, 1.0).unwrap()]);
//!
//! let steer = build_steering_set(&grid, &array, 2000.0, &medium, &NoShear).unwrap();
//! let csm = synthesize_csm(&scene, &array, 2000.0, &medium, &NoShear).unwrap();
//! let y = beamform_map(&csm, &steer).unwrap();
//! let a = build_propagator(&steer, &PropagatorFlags::from_csm(&csm)).unwrap();
//! let x = damas_solve(&a, &y, &SolverConfig::iterations(200)).unwrap();
//! assert_eq!(x.map.peak().0, 60);
//! ```
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bands;
pub mod beamform;
pub mod damas;
pub mod error;
pub mod geometry;
pub mod scenarios;
pub mod spectra;

pub mod prelude {
    pub use crate::bands::{third_octave_bands, ThirdOctaveBand};
    pub use crate::beamform::{
        beamform_map, integrate_region, mainlobe_region, mainlobe_width, to_spl, MapInfo, MapKind,
        SourceMap,
    };
    pub use crate::damas::{
        build_propagator, damas_solve, damas_solve_checkpoints, forward_map, solve_matrix_free,
        Init, MatrixFreePropagator, Propagator, PropagatorFlags, PropagatorMatrix, SolveResult,
        SolverConfig,
    };
    pub use crate::error::*;
    pub use crate::geometry::{
        default_array, make_ring_array, make_scan_grid, nearest_grid_index, Medium, MicArray,
        Point3, ScanGrid, Source, SourceScene,
    };
    pub use crate::spectra::{
        apply_weighting, build_steering_set, remove_diagonal, synthesize_csm,
        CrossSpectralMatrix, DelayModel, NoShear, SteeringSet,
    };
}
