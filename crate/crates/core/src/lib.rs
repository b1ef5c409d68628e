pub mod acceptance;
pub mod entropy;
pub mod error;
pub mod flags;
pub mod flow;
pub mod linalg;
pub mod oracle;
pub mod rep;
pub mod surface;

pub use error::{Error, Result};
pub use linalg::{EigenData, Flag, MatC};
pub use rep::{LinearRep, RepSpec};
pub use surface::{ClassCatalog, ConjClass, FuchsianRep, Letter, Mat2, Word};
