//! Minimal neural substrate: fixed-shape tanh MLPs over flat `f64`
//! parameter vectors, Gaussian and Dirichlet policy heads, a scalar value
//! head and a sigmoid discriminator head, all with analytic gradients.

pub mod adam;
pub mod checkpoint;
pub mod dist;
pub mod mlp;

pub use adam::{clip_grad_norm, Adam};
pub use mlp::{HeadKind, HeadOutput, MlpParams, Trace};
