//! Successive convex approximation for problems of the form
//! `f(x) + g⁺(x) − g⁻(x)` with smooth `f` and convex `g⁺`, `g⁻`.

pub mod anomaly;
pub mod capped_l1;
pub mod distributed;
pub mod error;
pub mod io;
pub mod numerics;
pub mod oracles;
pub mod sca;

pub use error::{Error, Result};
