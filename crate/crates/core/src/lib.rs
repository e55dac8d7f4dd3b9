//! Cournot-Nash equilibria for non-atomic games with separable costs.
//!
//! Agents of type `x ~ μ` pick an action `y` and pay
//!
//! ```text
//! c(x, y) + f(ν(y)) + ε ∫ φ(y, z) dν(z) + V₀(y)
//! ```
//!
//! where `ν` is the distribution of actions the population induces. An
//! equilibrium is a pure plan `γ = (id, T)#μ` whose second marginal `ν`
//! makes every `T(x)` a cost-minimizing action for type `x`.
//!
//! Three solvers are provided:
//!
//! - [`best_reply`]: the fixed-point iteration `ν ↦ (id + ∇V[ν])⁻¹#μ` for
//!   quadratic transport cost and smooth convex externalities, in one or
//!   two dimensions, with a Banach contraction certificate.
//! - [`ode1d`]: two fixed-point schemes on `[0, 1]` for logarithmic
//!   congestion (iterating on the transport map) and power congestion
//!   (iterating on the density with a mass-normalization level `λ`).
//!
//! Every result can be checked a posteriori with [`verification`]:
//! exploitability, duality gap, complementarity and purity. The
//! [`scenario`] module is the declarative config layer used by the CLI.

pub mod best_reply;
pub mod error;
pub mod game;
pub mod measures;
pub mod ode1d;
pub mod quadrature;
pub mod scenario;
pub mod transport;
pub mod verification;

pub use error::{Error, Result};
pub use game::{CongestionSpec, CostModel, ExternalityModel, InteractionKernel, KernelExpr};
pub use measures::{Cdf1D, DiscreteMeasure, GridMeasure1D, Point};
pub use transport::{PotentialPair, TransportMap1D};
pub use verification::EquilibriumResult;

/// Library version embedded into every result artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
