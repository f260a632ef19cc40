pub mod bench;
pub mod eval;
pub mod gen;
pub mod loss;
pub mod synth;
