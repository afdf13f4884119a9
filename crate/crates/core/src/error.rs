use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("exponential integral is undefined for x = {0} (requires x > 0)")]
    Domain(f64),
    #[error("degenerate link: serving gain must be positive")]
    DegenerateLink,
    #[error("cell {cell} is empty")]
    EmptyCell { cell: usize },
    #[error("steepest descent diverged in cell {cell}: objective {objective} did not decrease after {halvings} step halvings (last step {step} km)")]
    Divergence { cell: usize, objective: f64, halvings: u32, step: f64 },
}
