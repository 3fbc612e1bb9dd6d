//! Executable machinery for non-homogeneous Tb estimates on finite metric measure
//! spaces: dyadic cubes, randomized grids with good and bad cubes, adapted Haar
//! decompositions and Calderon-Zygmund estimators.

pub mod rng;
pub mod space;
pub mod stats;
pub mod dyadic;
pub mod randgrid;
pub mod martingale;
pub mod operator;
