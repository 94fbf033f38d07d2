//! Differential-entropy reward over a squared-exponential kernel Gram matrix.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::scalar::Scalar;
use crate::scene::SpectralImage;
use crate::spectral::{squared_distance, Spectrum};

/// Pixels used when estimating the median pairwise distance.
const MEDIAN_SAMPLE: usize = 2048;

/// `k(a, b) = σ_f² exp(−‖a − b‖² / 2ℓ²) + σ_n² [a is b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquaredExponential<T> {
    pub sigma_f: T,
    pub lengthscale: T,
    pub noise: T,
}

impl<T: Scalar> SquaredExponential<T> {
    pub fn new(sigma_f: T, lengthscale: T, noise: T) -> Result<Self> {
        for (name, v) in [("kernel_sigma_f", sigma_f), ("kernel_lengthscale", lengthscale), ("kernel_noise", noise)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(SquaredExponential {
            sigma_f,
            lengthscale,
            noise,
        })
    }

    /// Off-diagonal covariance between two distinct entries.
    pub fn cross(&self, a: &[T], b: &[T]) -> T {
        let d2 = squared_distance(a, b);
        self.sigma_f * self.sigma_f
            * (-d2 / (T::of(2.0) * self.lengthscale * self.lengthscale)).exp()
    }

    /// Prior variance of one entry, noise included.
    pub fn diag(&self) -> T {
        self.sigma_f * self.sigma_f + self.noise * self.noise
    }

    /// Dense row-major Gram matrix `Σ_{S,S}`.
    pub fn gram(&self, spectra: &[&Spectrum<T>]) -> Vec<T> {
        let n = spectra.len();
        let mut k = vec![T::zero(); n * n];
        for i in 0..n {
            k[i * n + i] = self.diag();
            for j in 0..i {
                let v = self.cross(spectra[i].as_slice(), spectra[j].as_slice());
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        k
    }
}

/// `½ ln |2πe Σ| = ½ (N ln 2πe + ln |Σ|)` for an `N × N` covariance factor.
pub fn gaussian_entropy<T: Scalar>(factor: &Cholesky<T>) -> T {
    let n = T::of(factor.dim() as f64);
    T::of(0.5) * (n * T::of((2.0 * PI * E).ln()) + factor.ln_det())
}

/// Differential entropy of the spectra under the kernel, computed from scratch.
pub fn differential_entropy<T: Scalar>(
    spectra: &[&Spectrum<T>],
    kernel: &SquaredExponential<T>,
) -> Result<T> {
    if spectra.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    let gram = kernel.gram(spectra);
    let factor = Cholesky::factor_with_jitter(&gram, spectra.len())?;
    Ok(gaussian_entropy(&factor))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LengthscaleRepr", into = "LengthscaleRepr")]
pub enum Lengthscale {
    /// Median pairwise spectral distance of the orbital image.
    Median,
    Fixed(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LengthscaleRepr {
    Value(f64),
    Name(String),
}

impl TryFrom<LengthscaleRepr> for Lengthscale {
    type Error = String;

    fn try_from(r: LengthscaleRepr) -> std::result::Result<Self, String> {
        match r {
            LengthscaleRepr::Value(v) => Ok(Lengthscale::Fixed(v)),
            LengthscaleRepr::Name(s) if s == "median" => Ok(Lengthscale::Median),
            LengthscaleRepr::Name(s) => Err(format!("kernel_lengthscale must be a number or \"median\", got {s:?}")),
        }
    }
}

impl From<Lengthscale> for LengthscaleRepr {
    fn from(l: Lengthscale) -> Self {
        match l {
            Lengthscale::Median => LengthscaleRepr::Name("median".into()),
            Lengthscale::Fixed(v) => LengthscaleRepr::Value(v),
        }
    }
}

/// Reward configuration as it appears in experiment files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardParams {
    pub kernel_sigma_f: f64,
    pub kernel_lengthscale: Lengthscale,
    pub kernel_noise: f64,
    /// Revisit penalty weight.
    pub tau: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams {
            kernel_sigma_f: 1.0,
            kernel_lengthscale: Lengthscale::Median,
            kernel_noise: 0.1,
            tau: 1.0,
        }
    }
}

impl RewardParams {
    /// Resolves the lengthscale against a scene's orbital image. A constant
    /// image (zero median distance) falls back to a unit lengthscale.
    pub fn resolve<T: Scalar>(&self, orbital: &SpectralImage<T>) -> Result<RewardModel<T>> {
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return Err(Error::config("tau must be >= 0"));
        }
        let lengthscale = match self.kernel_lengthscale {
            Lengthscale::Fixed(v) => T::of(v),
            Lengthscale::Median => {
                let m = orbital.median_pairwise_distance(MEDIAN_SAMPLE);
                if m > T::zero() {
                    m
                } else {
                    T::one()
                }
            }
        };
        Ok(RewardModel {
            kernel: SquaredExponential::new(T::of(self.kernel_sigma_f), lengthscale, T::of(self.kernel_noise))?,
            tau: T::of(self.tau),
        })
    }
}

/// Kernel and revisit penalty with every parameter resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardModel<T> {
    pub kernel: SquaredExponential<T>,
    pub tau: T,
}

impl<T: Scalar> RewardModel<T> {
    pub fn new(kernel: SquaredExponential<T>, tau: T) -> Result<Self> {
        if !(tau >= T::zero()) {
            return Err(Error::config("tau must be >= 0"));
        }
        Ok(RewardModel { kernel, tau })
    }
}
