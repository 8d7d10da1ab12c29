pub mod ansatz;
pub mod conserve;
pub mod converge;
pub mod counting;
pub mod invariance;
pub mod picard;
pub mod strichartz;
pub mod threshold;
