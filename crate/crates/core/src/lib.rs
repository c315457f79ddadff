pub mod engine;
pub mod forecast;
pub mod harness;
pub mod model;
pub mod parse;
pub mod pctl;
pub mod predictor;
pub mod ratfunc;
