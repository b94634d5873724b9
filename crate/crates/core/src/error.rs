/// Coarse classification of failures, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad arguments or configuration.
    Argument,
    /// Filesystem or process failures.
    Io,
    /// Malformed or inconsistent input data.
    Data,
    /// Non-finite values during computation.
    Numeric,
}
