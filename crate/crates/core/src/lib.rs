//! Numerical laboratory for suppressed Cauchy kernels, random dyadic lattices, adapted
//! martingale decompositions and Menger curvature on discrete planar measures.

pub mod badness;
pub mod bilinear;
pub mod error;
pub mod geometry;
pub mod io;
pub mod curvature;
pub mod kernel;
pub mod lp;
pub mod martingale;
pub mod measure;
pub mod numeric;
pub mod pipeline;
pub mod probability;
pub mod report;
pub mod suite;
pub mod transform;

pub use error::{Error, Result};
pub use geometry::{pt, DyadicLattice, DyadicSquare, Point, Rect, SquareKey};
pub use measure::{Atom, ComplexDensity, DiskSet, GlobalParams, PlanarMeasure};
pub use report::CheckReport;
