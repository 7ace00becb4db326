//! Box-constrained optimizers used by the calibrator.

pub mod de;
pub mod lbfgsb;
