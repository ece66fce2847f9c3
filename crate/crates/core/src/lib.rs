pub mod cli;
pub mod dispersion;
pub mod fit;
pub mod fock;
pub mod io;
pub mod model;
pub mod numerics;
