pub mod eval;
pub mod gen;
pub mod mitigate;
pub mod model;
pub mod render;
pub mod train;
