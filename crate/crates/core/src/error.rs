use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate channel: successful-click probability is zero")]
    DegenerateChannel,

    #[error("pivot {pivot} needs context bits {needed_lo}..={needed_hi}, but only {len} were supplied")]
    OutOfWindow {
        pivot: usize,
        needed_lo: isize,
        needed_hi: usize,
        len: usize,
    },

    #[error("correlation range r1+r2 = {0} exceeds the exact-evaluation limit of {1}")]
    RangeTooLarge(usize, usize),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
