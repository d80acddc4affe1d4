//! Explicit approximate k-designs over SO, SU, O and U on n qubits.
//!
//! A short seed is expanded by a derandomized-squaring cascade over expander
//! graphs into a circuit over a fixed four-qubit gate multiset. The crate also
//! carries a verification layer that numerically reproduces the quantitative
//! lemmas behind the construction.
//!
//! Module map:
//!
//! | module | contents |
//! |--------|----------|
//! | [`linalg`] | complex matrices, norms, Haar sampling, Lanczos |
//! | [`gates`] | base gate multisets, placement, circuits |
//! | [`schur_weyl`] | matchings, matching states, Haar projectors, permutation moments |
//! | [`moments`] | tensor-power representations, moment operators, gaps |
//! | [`expanders`] | regular graphs with rotation maps, certification |
//! | [`walks`] | monomial calculus of derandomized squaring |
//! | [`design`] | seed to circuit compilation, exhaustive evaluation |
//! | [`verify`] | one check per quantitative lemma |

pub mod caps;
pub mod design;
pub mod expanders;
pub mod error;
pub mod gates;
pub mod linalg;
pub mod moments;
pub mod schur_weyl;
pub mod verify;
pub mod walks;

pub use caps::Caps;
pub use error::{Error, Result};
