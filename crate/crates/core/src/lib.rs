//! Guided-wave dispersion in composite laminates, polar group-velocity rasters
//! built from it, and the inference half of a latent generative model.

pub mod material;
pub mod smm;
pub mod dispersion;
pub mod polar;
pub mod dataset;
pub mod vae_infer;
pub mod cli;
