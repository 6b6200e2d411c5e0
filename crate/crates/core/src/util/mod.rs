pub mod linalg;
pub mod matrix;
pub mod rng;
pub mod stats;
