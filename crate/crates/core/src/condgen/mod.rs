//! Conditional denoising loop, a deterministic stand-in backend, and export
//! of conditioning bundles for external video models.
//!
//! The loop starts from Gaussian noise at step `steps` and applies the
//! backend for `t = steps, steps-1, ..., 1`; the output of the `t = 1` call
//! is the result.

pub mod bundle;

pub use bundle::{export_bundle, verify_bundle, BundleConfig, BundleError, Manifest, ManifestEntry};

use crate::render::Raster;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const DEFAULT_STEPS: u32 = 50;
pub const DEFAULT_STRENGTH: f32 = 0.8;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct BackendError(pub String);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CondgenError {
    #[error("latent dimensions must be positive, got {0}x{1}")]
    InvalidDims(usize, usize),
    #[error("steps must be at least 1")]
    InvalidSteps,
    #[error("strength must lie in [0, 1], got {0}")]
    InvalidStrength(f32),
    #[error("prompt must not be empty")]
    EmptyPrompt,
    #[error("denoiser failed at step {step}: {source}")]
    Backend { step: u32, source: BackendError },
}

/// One denoising step `z_{t-1} = D(z_t, C, t)`.
pub trait Denoiser: Send + Sync {
    fn denoise(&self, z: &Raster<f32>, c: &Raster<f32>, t: u32, prompt: &str, strength: f32)
        -> Result<Raster<f32>, BackendError>;
}

/// I.i.d. standard normal latent from `ChaCha8Rng::seed_from_u64(seed)`,
/// drawn in row-major order.
pub fn init_latent(width: usize, height: usize, seed: u64) -> Result<Raster<f32>, CondgenError> {
    if width == 0 || height == 0 {
        return Err(CondgenError::InvalidDims(width, height));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f32> = (0..width * height).map(|_| StandardNormal.sample(&mut rng)).collect();
    Ok(Raster::from_vec(width, height, data).expect("sized"))
}

/// Relaxation toward `strength * C` with rate `1/t`:
/// `z' = z + (strength * C - z) / t`, plus an optional constant offset in
/// `[-0.001, 0.001]` derived from the prompt's SHA-256.
#[derive(Debug, Clone, Default)]
pub struct MockDenoiser {
    pub prompt_perturbation: bool,
}

impl MockDenoiser {
    pub fn new(prompt_perturbation: bool) -> Self {
        MockDenoiser { prompt_perturbation }
    }

    pub fn perturbation(prompt: &str) -> f32 {
        let digest = Sha256::digest(prompt.as_bytes());
        let h = u64::from_le_bytes(digest[..8].try_into().unwrap());
        let unit = (h >> 11) as f64 / (1u64 << 53) as f64;
        ((unit * 2.0 - 1.0) * 0.001) as f32
    }
}

impl Denoiser for MockDenoiser {
    fn denoise(&self, z: &Raster<f32>, c: &Raster<f32>, t: u32, prompt: &str, strength: f32)
        -> Result<Raster<f32>, BackendError> {
        if z.dims() != c.dims() {
            return Err(BackendError(format!("DimensionMismatch: latent {:?} vs control {:?}", z.dims(), c.dims())));
        }
        if t == 0 {
            return Err(BackendError("step index must be at least 1".into()));
        }
        let beta = 1.0 / t as f32;
        let offset = if self.prompt_perturbation { Self::perturbation(prompt) } else { 0.0 };
        let data = z
            .data()
            .iter()
            .zip(c.data())
            .map(|(&zv, &cv)| zv + beta * (strength * cv - zv) + offset)
            .collect();
        Ok(Raster::from_vec(z.width(), z.height(), data).expect("same dims"))
    }
}

fn check_args(prompt: &str, steps: u32, strength: f32) -> Result<(), CondgenError> {
    if steps == 0 {
        return Err(CondgenError::InvalidSteps);
    }
    if !(0.0..=1.0).contains(&strength) {
        return Err(CondgenError::InvalidStrength(strength));
    }
    if prompt.trim().is_empty() {
        return Err(CondgenError::EmptyPrompt);
    }
    Ok(())
}

/// Run the loop from an explicit starting latent.
pub fn run_diffusion_from(
    backend: &dyn Denoiser,
    z0: Raster<f32>,
    c: &Raster<f32>,
    prompt: &str,
    steps: u32,
    strength: f32,
) -> Result<Raster<f32>, CondgenError> {
    check_args(prompt, steps, strength)?;
    let mut z = z0;
    for t in (1..=steps).rev() {
        z = backend.denoise(&z, c, t, prompt, strength).map_err(|source| CondgenError::Backend { step: t, source })?;
    }
    Ok(z)
}

pub fn run_diffusion(
    backend: &dyn Denoiser,
    c: &Raster<f32>,
    prompt: &str,
    steps: u32,
    strength: f32,
    seed: u64,
) -> Result<Raster<f32>, CondgenError> {
    check_args(prompt, steps, strength)?;
    let z0 = init_latent(c.width(), c.height(), seed)?;
    run_diffusion_from(backend, z0, c, prompt, steps, strength)
}

/// Diffuse each control raster independently; frame `k` uses seed
/// `seed + k` (wrapping).
pub fn diffuse_frames(
    backend: &dyn Denoiser,
    controls: &[&Raster<f32>],
    prompt: &str,
    steps: u32,
    strength: f32,
    seed: u64,
) -> Result<Vec<Raster<f32>>, CondgenError> {
    controls
        .par_iter()
        .enumerate()
        .map(|(k, c)| run_diffusion(backend, c, prompt, steps, strength, seed.wrapping_add(k as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_dims_rejected() {
        assert_eq!(init_latent(0, 0, 1), Err(CondgenError::InvalidDims(0, 0)));
        assert!(init_latent(3, 0, 1).is_err());
    }

    #[test]
    fn latent_is_deterministic() {
        assert_eq!(init_latent(16, 8, 7).unwrap(), init_latent(16, 8, 7).unwrap());
        assert_ne!(init_latent(16, 8, 7).unwrap(), init_latent(16, 8, 8).unwrap());
    }

    #[test]
    fn fixed_point() {
        let c = Raster::from_vec(3, 1, vec![0.2f32, 0.7, 1.0]).unwrap();
        let s = 0.8f32;
        let z = c.map(|v| s * v);
        let out = MockDenoiser::default().denoise(&z, &c, 17, "sunny day", s).unwrap();
        assert_eq!(out, z);
    }

    #[test]
    fn zero_strength_ignores_control() {
        let z = init_latent(4, 4, 3).unwrap();
        let c1 = Raster::filled(4, 4, 0.9f32);
        let c2 = Raster::filled(4, 4, 0.1f32);
        let m = MockDenoiser::default();
        assert_eq!(m.denoise(&z, &c1, 5, "p", 0.0).unwrap(), m.denoise(&z, &c2, 5, "p", 0.0).unwrap());
    }

    #[test]
    fn single_step_is_one_call() {
        let c = Raster::filled(2, 2, 0.5f32);
        let z0 = init_latent(2, 2, 9).unwrap();
        let m = MockDenoiser::default();
        let expect = m.denoise(&z0, &c, 1, "p", 0.8).unwrap();
        assert_eq!(run_diffusion(&m, &c, "p", 1, 0.8, 9).unwrap(), expect);
    }

    #[test]
    fn perturbation_is_small_and_prompt_dependent() {
        let a = MockDenoiser::perturbation("sunny day");
        let b = MockDenoiser::perturbation("rainy night");
        assert!(a.abs() <= 0.001 && b.abs() <= 0.001);
        assert_ne!(a, b);
    }

    struct Failing;
    impl Denoiser for Failing {
        fn denoise(&self, z: &Raster<f32>, _: &Raster<f32>, t: u32, _: &str, _: f32) -> Result<Raster<f32>, BackendError> {
            if t == 3 {
                Err(BackendError("boom".into()))
            } else {
                Ok(z.clone())
            }
        }
    }

    #[test]
    fn backend_error_names_step() {
        let c = Raster::filled(2, 2, 0.5f32);
        let err = run_diffusion(&Failing, &c, "p", 10, 0.5, 0).unwrap_err();
        assert_eq!(err, CondgenError::Backend { step: 3, source: BackendError("boom".into()) });
    }

    #[test]
    fn argument_checks() {
        let c = Raster::filled(1, 1, 0.0f32);
        let m = MockDenoiser::default();
        assert_eq!(run_diffusion(&m, &c, "p", 0, 0.5, 0), Err(CondgenError::InvalidSteps));
        assert_eq!(run_diffusion(&m, &c, "p", 1, 1.5, 0), Err(CondgenError::InvalidStrength(1.5)));
        assert_eq!(run_diffusion(&m, &c, " ", 1, 0.5, 0), Err(CondgenError::EmptyPrompt));
    }
}
