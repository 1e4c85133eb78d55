//! Elastic string networks joined by spring-mass junctions: equilibria,
//! forward, backward and sidewise solvers, and constructive boundary control.

pub mod control;
pub mod equilibrium;
pub mod exec;
pub mod io;
pub mod material;
pub mod network;
pub mod numerics;
pub mod profile;
pub mod solver;

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
