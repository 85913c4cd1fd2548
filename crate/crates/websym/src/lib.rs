//! Std companion: guided plans, scenario and trace files, replay, batch exploration and the
//! command line.

pub mod bundled;
pub mod cli;
pub mod director;
pub mod exec;
pub mod explore;
pub mod io;
pub mod plans;
