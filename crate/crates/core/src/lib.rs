pub mod additive;
pub mod distortion;
pub mod generators;
pub mod io;
pub mod moduli;
pub mod preservation;
pub mod quasisym;
pub mod report;
pub mod spaces;
pub mod tolerance;
