pub mod autodiff;
pub mod config;
pub mod eval;
pub mod inference;
pub mod nn;
pub mod optim;
pub mod panel;
pub mod rng;
pub mod skr;
pub mod surrogate;
pub mod synth;
pub mod trainer;
