//! Generic numerical building blocks.

pub mod eigen;
pub mod golden;
pub mod pchip;
pub mod roots;
