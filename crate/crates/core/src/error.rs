use thiserror::Error;

use crate::analysis::Maximum;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The generator has more than one closed communicating class, so the
    /// long-time limit depends on more than the initial non-dark mass.
    #[error("steady state is not unique; disconnected classes: {}", format_classes(.classes))]
    Degenerate { classes: Vec<Vec<String>> },

    #[error("optimizer did not converge within {evaluations} evaluations (best p_s1 = {:.6})", .best.split.p_s1)]
    Budget { best: Box<Maximum>, evaluations: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

fn format_classes(classes: &[Vec<String>]) -> String {
    classes.iter().map(|c| format!("{{{}}}", c.join(", "))).collect::<Vec<_>>().join(" ")
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
