//! Reflection and transmission symbols at a material interface, and the
//! reconstruction of material jets below the interface from reflection data.

pub mod acoustic;
pub mod cli_io;
pub mod elastic;
pub mod geometry;
pub mod inversion;
pub mod jetcalc;
pub mod medium;
