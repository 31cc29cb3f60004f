//! Exact numerical laboratory for B-stable predictive state representations.
//!
//! Everything in this crate operates on small tabular models where every
//! probability can be enumerated exactly: trajectory distributions are dense
//! tables, planning is exact dynamic programming, and all operator norms are
//! evaluated by exhaustive recursion over the future tree. There is no
//! sampling error anywhere except where an algorithm itself draws episodes
//! from a seeded generator.
//!
//! Layout:
//!
//! - [`model`] — tabular POMDPs, policies, exact trajectory distributions,
//!   planning, sampling, and distribution distances.
//! - [`psr`] — core test sets, predictive states, B-representations and the
//!   constructors for revealing / decodable / future-sufficient / regular
//!   instances, plus latent-MDP casting.
//! - [`stability`] — the Π-norm and fused-norm machinery, stability
//!   certification, per-step error functionals and their Hellinger bounds.
//! - [`learners`] — OMLE, Explorative E2D, MOPS and All-Policy
//!   Model-Estimation E2D over finite model classes, with the shared
//!   exponentiated-gradient saddle solver.
//! - [`oracles`] — numerical falsification harnesses for the decorrelation
//!   lemmas (generalized ℓ₂-Eluder, elliptical potential, decoupling,
//!   barycentric spanner).
//! - [`fixtures`] — the named desk-scale instances and random model zoo.
//! - [`io`] — JSON file schemas and CSV emission.
//!
//! Heavy inner loops (seed fan-outs, per-step certifications, randomized
//! suites) go through [`exec`], which runs on rayon when the `parallel`
//! feature (default) is enabled and falls back to plain iterators otherwise.
//! Results are bit-identical either way: every work item derives its own
//! seed and items are collected in order.

pub mod error;
pub mod exec;
pub mod index;
pub mod la;
pub mod rng;

pub mod model;
pub mod psr;
pub mod stability;

pub mod learners;
pub mod oracles;

pub mod fixtures;
pub mod io;

pub use error::{Error, Result};

/// Enumeration budgets for the exact operations.
///
/// Inputs whose trajectory space exceeds the cap are rejected with
/// [`Error::Capacity`] rather than approximated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Caps {
    /// Maximum number of trajectories `(O*A)^h` any single enumeration may touch.
    pub max_trajectories: usize,
    /// Maximum number of column subsets scanned by the exhaustive core-matrix search.
    pub max_core_subsets: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_trajectories: 1_000_000,
            max_core_subsets: 100_000,
        }
    }
}

impl Caps {
    /// Cap with a custom trajectory budget, keeping the default subset budget.
    pub fn with_max_trajectories(n: usize) -> Self {
        Caps {
            max_trajectories: n,
            ..Caps::default()
        }
    }
}
