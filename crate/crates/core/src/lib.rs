//! Space-time (graph completion) embedding of control-affine optimal control
//! problems with unbounded controls, and numerical checks of first- and
//! higher-order (Lie bracket) necessary conditions on candidate extremals.

pub mod dynamics;
pub mod error;
pub mod lp;
pub mod model;
pub mod pmp;
pub mod symbolic;
pub mod trajectory;

pub use error::{Error, Result};
