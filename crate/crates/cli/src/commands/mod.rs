pub mod depth_study;
pub mod estimate;
pub mod free_energy;
pub mod sweep;
pub mod target;
pub mod theory;
pub mod train;
pub mod tune;
pub mod volume;
