//! Perfect strategies of nonlocal games, decided algebraically.
//!
//! A game becomes a two-sided ideal (the universal relations) plus a left
//! ideal (its determining set) in a free algebra over a cyclotomic field.
//! [`gbase`] completes the pair with a right marker `xi`; if `xi` reduces to
//! zero there is no perfect commuting-operator strategy, otherwise [`gns`]
//! tries to read off finite matrices. [`soscert`] handles the synchronous
//! (coloring) case, where refutations need a sum of squares.
//!
//! Every certificate and witness can be written to plain text and checked
//! again later with exact arithmetic only.

// index loops read better in the dense matrix code
#![allow(clippy::needless_range_loop)]

pub mod artifact;
pub mod cyclo;
pub mod decide;
pub mod freealg;
pub mod gamealg;
pub mod gbase;
pub mod gns;
pub mod soscert;
