//! Tate algebras, Weyl algebras and truncated de Rham cohomology over a
//! discretely valued Laurent series field.

pub mod cli;
pub mod complex;
pub mod directimage;
pub mod dmodule;
pub mod expr;
pub mod groebner;
pub mod linalg;
pub mod monomial;
pub mod ratfunc;
pub mod scalars;
pub mod spencer;
pub mod tate;
pub mod verify;
pub mod weyl;
