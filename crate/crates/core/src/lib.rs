//! Simulation and second-order analytics for planar STIT tessellations.
pub mod analytics;
pub mod estimators;
pub mod functionals;
pub mod geometry;
pub mod io;
pub mod line_measure;
pub mod mnw;
pub mod quadrature;
pub mod render;
pub mod stats;
pub mod validation;
