use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("0F1 argument |z| = {z:e} exceeds the series range {max:e}; refine the mesh")]
    KernelRange { z: f64, max: f64 },

    #[error("nonlinearity cannot supply {requested} Taylor coefficients (max {available})")]
    TaylorOrder { requested: usize, available: usize },

    #[error("Adomian partition sum limited to n <= {max}, got n = {n}")]
    PartitionOrder { n: usize, max: usize },

    #[error("point ({x}, {y}) lies outside the domain")]
    OutOfDomain { x: f64, y: f64 },

    #[error("trace mismatch at the cell corner: left {left:e}, bottom {bottom:e}, corner {corner:e}")]
    CornerMismatch { left: f64, bottom: f64, corner: f64 },

    #[error("Picard iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("incompatible boundary data: psi(0) = {psi0}, phi(0) = {phi0}")]
    Incompatible { psi0: f64, phi0: f64 },

    #[error("cell ({i}, {j}): {source}")]
    Cell {
        i: usize,
        j: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_cell(self, i: usize, j: usize) -> Self {
        match self {
            e @ Error::Cell { .. } => e,
            e => Error::Cell {
                i,
                j,
                source: Box::new(e),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
