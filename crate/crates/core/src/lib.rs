//! Metric certificates for concrete operator spaces.
//!
//! A space is a finite-dimensional span of complex matrices with an optional
//! designated element `u`. The crate decides numerically whether `u` is a
//! unitary, whether `(X, u)` is an operator system or a C*-algebra, and
//! recovers the involution and the product from norms of small block
//! matrices alone. Ambient oracles computed from the generated TRO are
//! provided for cross-validation.

pub mod assembly;
pub mod certify;
pub mod cstar;
pub mod error;
pub mod funcspace;
pub mod hermit;
pub mod matcore;
pub mod opspace;
pub mod order;
pub mod report;
pub mod solver;
pub mod sysdetect;
pub mod tro;

pub use error::{Error, Result};
pub use matcore::{CMat, C64};
pub use opspace::{make_space, AmplifiedElement, ConcreteOpSpace, Element};
pub use report::{BoundSide, CertificateReport, Exactness, SolverDiagnostics, Verdict};
pub use solver::SolverConfig;
