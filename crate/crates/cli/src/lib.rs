//! Command-line front end for the unistochasticity toolkit: JSON input
//! documents in, deterministic JSON reports out, CSV sidecars on
//! request. All numeric report fields are printed with 17 significant
//! digits so identical invocations yield byte-identical output.

pub mod commands;
pub mod io;
