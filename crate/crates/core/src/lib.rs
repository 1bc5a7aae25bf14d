pub mod augment;
pub mod corpus;
pub mod dfg;
pub mod encode;
pub mod metrics;
pub mod model;
pub mod scalar;
pub mod synth;
pub mod syntax;

pub use scalar::Scalar;

pub type ModelParamsF32 = model::ModelParams<f32>;
pub type ModelParamsF64 = model::ModelParams<f64>;
