pub mod certify;
pub mod error;
pub mod io;
pub mod linalg;
pub mod modular;
pub mod popescu;
pub mod state;
pub mod transfer;

pub use error::{Error, Result};
pub use popescu::{CanonicalSystem, InvariantState, PopescuSystem, Tolerances, Word};
