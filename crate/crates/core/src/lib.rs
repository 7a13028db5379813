//! Parameterized monodromy of linear systems `dY/dx = A(x,t) Y` whose
//! coefficients are rational in `x` and depend on complex parameters `t`.

pub mod classify;
pub mod error;
pub mod expr;
pub mod fixtures;
pub mod halphen;
pub mod io;
pub mod linalg;
pub mod local;
pub mod monodromy;
pub mod ode;
pub mod sysmodel;

pub use error::{Error, Result};
