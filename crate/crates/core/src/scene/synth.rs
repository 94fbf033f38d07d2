//! Synthetic paired scenes.
//!
//! Endmembers are smooth reflectance curves (a sloped continuum with a few
//! Gaussian absorption bands). Abundances are Dirichlet draws on a coarse
//! patch lattice, box-blurred and renormalized to the simplex. The
//! high-resolution image follows the linear mixing model; the orbital image is
//! its block mean. All stored values are rounded to `f32` precision so that
//! scenes survive the raster format unchanged.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use super::{GridMap, InSituMode, InSituOracle, SceneMetadata, SceneryPair, SpectralImage};
use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::scalar::Scalar;
use crate::spectral::Spectrum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub name: String,
    /// Number of endmembers.
    #[serde(rename = "K", alias = "k")]
    pub k: usize,
    pub bands: usize,
    pub highres_w: usize,
    pub highres_h: usize,
    /// Block size of the orbital downsample.
    pub downsample: usize,
    /// In-situ sensor noise standard deviation.
    pub noise_sigma: f64,
    /// Per-band Gaussian noise added to the high-resolution image.
    pub image_noise: f64,
    /// Box filter radius (high-resolution pixels) applied to abundances.
    pub blur_radius: usize,
    pub dirichlet_alpha: f64,
    /// Side length (high-resolution pixels) of one Dirichlet draw.
    pub patch_size: usize,
    /// Orbital pixels between neighbouring grid cells.
    pub grid_stride: usize,
    pub step_cost: f64,
    pub insitu_mode: InSituMode,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            name: "synthetic".to_string(),
            k: 5,
            bands: 16,
            highres_w: 128,
            highres_h: 128,
            downsample: 4,
            noise_sigma: 0.01,
            image_noise: 0.0,
            blur_radius: 4,
            dirichlet_alpha: 0.2,
            patch_size: 16,
            grid_stride: 1,
            step_cost: 10.0,
            insitu_mode: InSituMode::BlockMean,
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.k < 1 {
            problems.push("K must be >= 1".to_string());
        }
        if self.bands < 2 {
            problems.push("bands must be >= 2".to_string());
        }
        if self.downsample == 0 {
            problems.push("downsample must be >= 1".to_string());
        } else if self.highres_w == 0
            || self.highres_h == 0
            || self.highres_w % self.downsample != 0
            || self.highres_h % self.downsample != 0
        {
            problems.push(format!(
                "downsample ({}) must divide highres_w ({}) and highres_h ({})",
                self.downsample, self.highres_w, self.highres_h
            ));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            problems.push("noise_sigma must be >= 0".to_string());
        }
        if !(self.image_noise >= 0.0) || !self.image_noise.is_finite() {
            problems.push("image_noise must be >= 0".to_string());
        }
        if !(self.dirichlet_alpha > 0.0) {
            problems.push("dirichlet_alpha must be > 0".to_string());
        }
        if self.patch_size == 0 {
            problems.push("patch_size must be >= 1".to_string());
        }
        if self.grid_stride == 0 {
            problems.push("grid_stride must be >= 1".to_string());
        }
        if !(self.step_cost > 0.0) {
            problems.push("step_cost must be > 0".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigInvalid(problems.join("; ")))
        }
    }
}

/// A generated scene with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene<T> {
    pub scene: SceneryPair<T>,
    pub endmembers: Vec<Spectrum<T>>,
    /// Per high-resolution pixel abundances, row-major, `K` entries each.
    pub abundances: Vec<Vec<f64>>,
}

fn quantize<T: Scalar>(v: f64) -> T {
    T::of(v as f32 as f64)
}

fn endmember(rng: &mut RandomStream, bands: usize) -> Vec<f64> {
    let level = rng.random_range(0.3..0.8);
    let slope = rng.random_range(-0.2..0.2);
    let n_features = rng.random_range(1..=3);
    let features: Vec<(f64, f64, f64)> = (0..n_features)
        .map(|_| {
            (
                rng.random_range(0.0..1.0),   // centre
                rng.random_range(0.03..0.15), // width
                rng.random_range(0.1..0.6),   // depth
            )
        })
        .collect();
    (0..bands)
        .map(|b| {
            let t = b as f64 / (bands - 1) as f64;
            let continuum = level + slope * (t - 0.5);
            let absorption: f64 = features
                .iter()
                .map(|(mu, w, depth)| depth * (-(t - mu).powi(2) / (2.0 * w * w)).exp())
                .sum();
            (continuum * (1.0 - absorption)).clamp(0.01, 1.0)
        })
        .collect()
}

fn dirichlet(rng: &mut RandomStream, k: usize, alpha: f64) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha validated > 0");
    let mut draw: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let s: f64 = draw.iter().sum();
    if s > 0.0 {
        draw.iter_mut().for_each(|v| *v /= s);
    } else {
        draw.iter_mut().for_each(|v| *v = 1.0 / k as f64);
    }
    draw
}

/// Clamp-to-edge box mean of radius `r` along one axis of a `w × h` field.
fn box_blur_axis(field: &[f64], w: usize, h: usize, r: usize, horizontal: bool) -> Vec<f64> {
    let mut out = vec![0.0; field.len()];
    let (outer, inner) = if horizontal { (h, w) } else { (w, h) };
    let at = |o: usize, i: usize| if horizontal { o * w + i } else { i * w + o };
    for o in 0..outer {
        for i in 0..inner {
            let lo = i.saturating_sub(r);
            let hi = (i + r).min(inner - 1);
            let mut s = 0.0;
            for j in lo..=hi {
                s += field[at(o, j)];
            }
            out[at(o, i)] = s / (hi - lo + 1) as f64;
        }
    }
    out
}

fn abundance_field(cfg: &SceneConfig, rng: &mut RandomStream) -> Vec<Vec<f64>> {
    let (w, h, k) = (cfg.highres_w, cfg.highres_h, cfg.k);
    let pw = w.div_ceil(cfg.patch_size);
    let ph = h.div_ceil(cfg.patch_size);
    let patches: Vec<Vec<f64>> = (0..pw * ph)
        .map(|_| dirichlet(rng, k, cfg.dirichlet_alpha))
        .collect();
    let mut channels: Vec<Vec<f64>> = (0..k)
        .map(|m| {
            (0..w * h)
                .map(|i| {
                    let (r, c) = (i / w, i % w);
                    patches[(r / cfg.patch_size) * pw + c / cfg.patch_size][m]
                })
                .collect()
        })
        .collect();
    if cfg.blur_radius > 0 {
        for ch in &mut channels {
            let horiz = box_blur_axis(ch, w, h, cfg.blur_radius, true);
            *ch = box_blur_axis(&horiz, w, h, cfg.blur_radius, false);
        }
    }
    (0..w * h)
        .map(|i| {
            let a: Vec<f64> = channels.iter().map(|ch| ch[i].max(0.0)).collect();
            let s: f64 = a.iter().sum();
            a.into_iter().map(|v| v / s).collect()
        })
        .collect()
}

/// Generates a scene together with its true endmembers and abundances.
/// Deterministic in `(cfg, seed)`.
pub fn synthesize<T: Scalar>(cfg: &SceneConfig, seed: u64) -> Result<SyntheticScene<T>> {
    cfg.validate()?;
    let root = RandomStream::from_seed(seed);
    let mut em_rng = root.child(1);
    let mut ab_rng = root.child(2);
    let mut noise_rng = root.child(3);

    let ems: Vec<Vec<f64>> = (0..cfg.k).map(|_| endmember(&mut em_rng, cfg.bands)).collect();
    let abundances = abundance_field(cfg, &mut ab_rng);
    let normal = Normal::new(0.0, cfg.image_noise.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::config(format!("image noise: {e}")))?;

    let pixels: Vec<Spectrum<T>> = abundances
        .iter()
        .map(|a| {
            let values = (0..cfg.bands)
                .map(|b| {
                    let mut v: f64 = a.iter().zip(&ems).map(|(ai, e)| ai * e[b]).sum();
                    if cfg.image_noise > 0.0 {
                        v = (v + normal.sample(&mut noise_rng)).max(0.0);
                    }
                    quantize::<T>(v)
                })
                .collect();
            Spectrum::from_vec_unchecked(values)
        })
        .collect();
    let highres = SpectralImage::new(cfg.highres_w, cfg.highres_h, pixels)?;
    let blocks = highres.block_mean(cfg.downsample)?;
    let orbital = SpectralImage::new(
        blocks.width(),
        blocks.height(),
        blocks
            .pixels()
            .iter()
            .map(|p| {
                Spectrum::from_vec_unchecked(
                    p.as_slice().iter().map(|v| quantize::<T>(v.as_f64())).collect(),
                )
            })
            .collect(),
    )?;
    let grid = GridMap::new(orbital.width(), orbital.height(), cfg.grid_stride, cfg.step_cost)?;
    let oracle = InSituOracle::new(
        highres,
        cfg.downsample,
        &grid,
        T::of(cfg.noise_sigma),
        cfg.insitu_mode,
    )?;
    let scene = SceneryPair::new(
        orbital,
        oracle,
        grid,
        SceneMetadata {
            name: cfg.name.clone(),
            seed: Some(seed),
            downsample: cfg.downsample,
        },
    )?;
    let endmembers = ems
        .into_iter()
        .map(|e| Spectrum::from_vec_unchecked(e.into_iter().map(quantize::<T>).collect()))
        .collect();
    Ok(SyntheticScene {
        scene,
        endmembers,
        abundances,
    })
}

pub fn generate_synthetic_scene<T: Scalar>(cfg: &SceneConfig, seed: u64) -> Result<SceneryPair<T>> {
    synthesize(cfg, seed).map(|s| s.scene)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{nnls_solve, scene_reconstruction_error, Provenance, SolverOptions, SpectralLibrary};

    fn cfg(k: usize, w: usize) -> SceneConfig {
        SceneConfig {
            k,
            bands: 8,
            highres_w: w,
            highres_h: w,
            noise_sigma: 0.0,
            ..SceneConfig::default()
        }
    }

    #[test]
    fn single_endmember_scene_is_exactly_explained() {
        let s = synthesize::<f64>(&cfg(1, 16), 3).unwrap();
        let lib = SpectralLibrary::from_spectra(s.endmembers.clone(), Provenance::InSitu).unwrap();
        let err =
            scene_reconstruction_error(&lib, s.scene.orbital.pixels(), &SolverOptions::default())
                .unwrap();
        assert!(err < 1e-9, "error {err}");
    }

    #[test]
    fn deterministic_in_seed() {
        let a = synthesize::<f64>(&cfg(4, 32), 9).unwrap();
        let b = synthesize::<f64>(&cfg(4, 32), 9).unwrap();
        assert_eq!(a, b);
        let c = synthesize::<f64>(&cfg(4, 32), 10).unwrap();
        assert_ne!(a.scene.orbital, c.scene.orbital);
    }

    #[test]
    fn abundances_on_simplex() {
        let s = synthesize::<f64>(&cfg(5, 32), 1).unwrap();
        for a in &s.abundances {
            let sum: f64 = a.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
            assert!(a.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn orbital_is_block_mean() {
        let s = synthesize::<f64>(&cfg(3, 32), 2).unwrap();
        let hr = s.scene.oracle.highres();
        let f = s.scene.metadata.downsample;
        for r in 0..s.scene.orbital.height() {
            for c in 0..s.scene.orbital.width() {
                for b in 0..hr.bands() {
                    let mut m = 0.0;
                    for rr in r * f..(r + 1) * f {
                        for cc in c * f..(c + 1) * f {
                            m += hr.pixel(rr, cc)[b];
                        }
                    }
                    m /= (f * f) as f64;
                    assert!((s.scene.orbital.pixel(r, c)[b] - m).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn orbital_pixels_lie_in_true_cone() {
        // 32x32 grid means a 128x128 high-resolution image at downsample 4.
        let c = SceneConfig {
            k: 5,
            noise_sigma: 0.0,
            ..SceneConfig::default()
        };
        let s = synthesize::<f64>(&c, 4).unwrap();
        assert_eq!((s.scene.grid.rows(), s.scene.grid.cols()), (32, 32));
        let lib = SpectralLibrary::from_spectra(s.endmembers.clone(), Provenance::InSitu).unwrap();
        // Only f32 rounding separates pixels from exact mixtures.
        let bound = 1e-6 * (s.scene.bands() as f64).sqrt();
        for px in s.scene.orbital.pixels() {
            let r = nnls_solve(&lib, px, &SolverOptions::default()).unwrap();
            assert!(r.residual < bound, "residual {}", r.residual);
        }
    }

    #[test]
    fn invalid_downsample_names_fields() {
        let mut c = cfg(3, 30);
        c.downsample = 4;
        let msg = synthesize::<f64>(&c, 0).unwrap_err().to_string();
        assert!(msg.contains("downsample") && msg.contains("highres_w"), "{msg}");
    }

    #[test]
    fn f32_scene_generates() {
        let s = synthesize::<f32>(&cfg(3, 16), 0).unwrap();
        assert_eq!(s.scene.bands(), 8);
    }
}
