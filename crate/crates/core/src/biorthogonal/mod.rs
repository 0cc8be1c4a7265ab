//! Biorthogonal family to `{e^{lambda_k^+- t}} U {t e^{lambda_{+-2} t}}` on `[-T/2, T/2]`.
//!
//! Built from interpolating entire functions `I = P m D / (...)` and a
//! band-limited inverse Fourier transform.

pub mod family;
pub mod interpolant;
pub mod multiplier;
pub mod products;

pub use family::{build_family, verify_family, BiorthogonalFamily, FamilyConfig, FamilyGrid, GramReport};
pub use interpolant::{InterpolantSet, Member};
pub use multiplier::{multiplier_estimates, multiplier_nodes, MultiplierParams};
pub use products::{sine_type_conditions, CanonicalProduct, LedgerZero, SineKind};
