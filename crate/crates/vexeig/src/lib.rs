//! Numerical eigensolver for coupled gradient systems driven by the
//! p(x)/q(x)-Laplacian on variable-exponent Lebesgue–Sobolev spaces.
//!
//! The library discretizes a bounded interval or rectangle with a uniform
//! grid, evaluates the Dirichlet-type energy and the coupling energy of a
//! state pair `(z, w)`, and minimizes the energy over the constraint set
//! where the coupling energy equals a prescribed level `R`. Each solve
//! produces an eigenpair together with its eigenvalue `lambda_R`; sweeping
//! over `R` estimates the infimum eigenvalue of the family. A diagnostics
//! layer verifies the variational identities, inequality chains, positivity
//! and the iterated-norm boundedness ladder on computed eigenpairs.
//!
//! Modules follow the pipeline:
//!
//! * [`grid`] — uniform grids, grid functions with zero Dirichlet boundary,
//!   discrete gradients and midpoint quadrature;
//! * [`problem`] — exponent fields `p, q, alpha, beta` and the weight `c`,
//!   with hypothesis validation;
//! * [`modular`] — modulars, Luxemburg norms and norm/modular inequalities;
//! * [`energy`] — energy functionals, their discrete gradients and Rayleigh
//!   quotients;
//! * [`solver`] — projected gradient descent with retraction, eigenvalue
//!   sweeps and the scalar quotient minimizer;
//! * [`diagnostics`] — post-hoc verification of identities and bounds;
//! * [`cli`] — run configuration, command execution and CSV output.

pub mod cli;
pub mod diagnostics;
pub mod energy;
mod error;
pub mod grid;
mod guide;
pub mod modular;
pub mod problem;
pub mod solver;

pub use error::{Error, Result};
