//! Toolpath compilation and physical analysis for robotic clay extrusion.
//!
//! The pipeline runs mesh or grammar or weave pattern → [`geom::Toolpath`] →
//! [`motion::MotionProgram`], with [`stability`] checking the toolpath's
//! physical viability and [`printsim`] executing programs on a virtual
//! printer.

pub mod geom;
pub mod lsys;
pub mod motion;
pub mod printsim;
pub mod stability;
pub mod weave;
