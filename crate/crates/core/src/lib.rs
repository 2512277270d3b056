//! Entropy gap of union distributions on the subset lattice `P([n])`.
//!
//! For i.i.d. random subsets `A, B` of `[n]` with law `p`, Gilmer's
//! conjecture claims `H(A ∪ B) + D(A ∪ B || A) > H(A)` whenever every
//! element lies in `A` with probability below `1/2` and `H(A) > 0`. This
//! crate evaluates that functional, rebuilds the explicit two-element
//! counterexample with its closed-form gap, searches numerically for further
//! violations, and checks the union-closed sets conjecture at small `n`.
//!
//! - [`setdist`]: distributions over `P([n])`, entropy, divergence, and the
//!   zeta/Möbius union convolution.
//! - [`gilmer`]: the gap functional, hypothesis checks, the counterexample family.
//! - [`search`]: seeded multistart coordinate-pair descent.
//! - [`frankl`]: union-closed families and frequency checks.
//! - [`cli`]: the `gilmer-gap` command line.

pub mod cli;
pub mod frankl;
pub mod gilmer;
pub mod search;
pub mod setdist;

pub use gilmer::{analyze, gilmer_gap, gilmer_lhs, GapReport};
pub use setdist::{make_distribution, union_convolve, ExtendedReal, SetDistribution, SubsetMask};
