//! Scherk-like translators for mean curvature flow.
//!
//! Translators moving with velocity `-e₃` are graphs solving
//! `-Div(∇u/W) = 1/W`, `W = sqrt(1 + |∇u|²)`. This crate solves that
//! equation on polygonal domains with (surrogate) infinite boundary values,
//! runs the limit constructions for Scherk translators, scherkenoids,
//! helicoid-like translators and pitchforks, checks their structural
//! properties numerically, and assembles periodic surfaces from the
//! fundamental pieces.

pub mod analytic;
pub mod geometry;
mod operator;
pub mod solver;
pub mod families;
pub mod diagnostics;
pub mod surface;
pub mod cli;
