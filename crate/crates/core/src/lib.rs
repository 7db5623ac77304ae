pub mod analytic;
pub mod asymptotics;
pub mod cli;
pub mod eigen;
pub mod fem;
pub mod geometry;
pub mod mesh;
pub mod nodal;
pub mod sturm;
