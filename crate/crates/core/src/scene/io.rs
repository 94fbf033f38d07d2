use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::raster::{read_raster, write_raster};
use super::{GridMap, InSituMode, InSituOracle, SceneConfig, SceneMetadata, SceneryPair};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Scene parameters that are not stored in the rasters themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadConfig {
    pub name: String,
    pub seed: Option<u64>,
    pub noise_sigma: f64,
    pub grid_stride: usize,
    pub step_cost: f64,
    pub insitu_mode: InSituMode,
}

impl Default for LoadConfig {
    fn default() -> Self {
        LoadConfig::from(&SceneConfig::default())
    }
}

impl From<&SceneConfig> for LoadConfig {
    fn from(c: &SceneConfig) -> Self {
        LoadConfig {
            name: c.name.clone(),
            seed: None,
            noise_sigma: c.noise_sigma,
            grid_stride: c.grid_stride,
            step_cost: c.step_cost,
            insitu_mode: c.insitu_mode,
        }
    }
}

/// Paths written by [`save_scene`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFiles {
    pub orbital: PathBuf,
    pub insitu: PathBuf,
    pub metadata: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SceneManifest {
    orbital: String,
    insitu: String,
    downsample: usize,
    #[serde(flatten)]
    load: LoadConfig,
}

/// Loads a pre-registered orbital / in-situ raster pair. The downsample
/// factor is inferred from the image sizes and must be an integer in both
/// directions.
pub fn load_scene<T: Scalar>(
    path_orbital: &Path,
    path_insitu: &Path,
    cfg: &LoadConfig,
) -> Result<SceneryPair<T>> {
    let orbital = read_raster::<T>(path_orbital)?;
    let highres = read_raster::<T>(path_insitu)?;
    if orbital.bands() != highres.bands() {
        return Err(Error::DimensionMismatch {
            expected: orbital.bands(),
            found: highres.bands(),
        });
    }
    if highres.width() % orbital.width() != 0 {
        return Err(Error::DimensionMismatch {
            expected: orbital.width() * (highres.width() / orbital.width()).max(1),
            found: highres.width(),
        });
    }
    let factor = highres.width() / orbital.width();
    if factor == 0 || highres.height() != orbital.height() * factor {
        return Err(Error::DimensionMismatch {
            expected: orbital.height() * factor.max(1),
            found: highres.height(),
        });
    }
    let grid = GridMap::new(orbital.width(), orbital.height(), cfg.grid_stride, cfg.step_cost)?;
    let oracle = InSituOracle::new(highres, factor, &grid, T::of(cfg.noise_sigma), cfg.insitu_mode)?;
    SceneryPair::new(
        orbital,
        oracle,
        grid,
        SceneMetadata {
            name: cfg.name.clone(),
            seed: cfg.seed,
            downsample: factor,
        },
    )
}

/// Writes `orbital.<ext>`, `insitu.<ext>` and `scene.json` into `dir`, where
/// `<ext>` is `sser` or `csv`.
pub fn save_scene<T: Scalar>(dir: &Path, scene: &SceneryPair<T>, ext: &str) -> Result<SceneFiles> {
    if ext != "sser" && ext != "csv" {
        return Err(Error::config(format!("unknown raster format {ext:?}")));
    }
    fs::create_dir_all(dir)?;
    let orbital = dir.join(format!("orbital.{ext}"));
    let insitu = dir.join(format!("insitu.{ext}"));
    let metadata = dir.join("scene.json");
    write_raster(&orbital, &scene.orbital)?;
    write_raster(&insitu, scene.oracle.highres())?;
    let manifest = SceneManifest {
        orbital: format!("orbital.{ext}"),
        insitu: format!("insitu.{ext}"),
        downsample: scene.metadata.downsample,
        load: LoadConfig {
            name: scene.metadata.name.clone(),
            seed: scene.metadata.seed,
            noise_sigma: scene.oracle.noise_sigma().as_f64(),
            grid_stride: scene.grid.stride(),
            step_cost: scene.grid.step_cost(),
            insitu_mode: scene.oracle.mode(),
        },
    };
    fs::write(&metadata, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(SceneFiles {
        orbital,
        insitu,
        metadata,
    })
}

/// Loads a scene directory written by [`save_scene`].
pub fn load_scene_dir<T: Scalar>(dir: &Path) -> Result<SceneryPair<T>> {
    let meta_path = dir.join("scene.json");
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::Parse {
        path: meta_path.clone(),
        offset: 0,
        message: format!("cannot read file: {e}"),
    })?;
    let manifest: SceneManifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: meta_path.clone(),
        offset: 0,
        message: e.to_string(),
    })?;
    let scene = load_scene(&dir.join(&manifest.orbital), &dir.join(&manifest.insitu), &manifest.load)?;
    if scene.metadata.downsample != manifest.downsample {
        return Err(Error::DimensionMismatch {
            expected: manifest.downsample,
            found: scene.metadata.downsample,
        });
    }
    Ok(scene)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::raster::write_sser;
    use crate::scene::{generate_synthetic_scene, SpectralImage};

    fn scene() -> SceneryPair<f64> {
        let cfg = SceneConfig {
            k: 3,
            bands: 5,
            highres_w: 16,
            highres_h: 12,
            ..SceneConfig::default()
        };
        generate_synthetic_scene(&cfg, 21).unwrap()
    }

    #[test]
    fn save_then_load_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let s = scene();
        for ext in ["sser", "csv"] {
            let sub = dir.path().join(ext);
            let files = save_scene(&sub, &s, ext).unwrap();
            assert_eq!(load_scene_dir::<f64>(&sub).unwrap(), s);
            let mut cfg = LoadConfig::from(&SceneConfig::default());
            cfg.seed = s.metadata.seed;
            assert_eq!(load_scene::<f64>(&files.orbital, &files.insitu, &cfg).unwrap(), s);
        }
    }

    #[test]
    fn band_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let s = scene();
        let files = save_scene(dir.path(), &s, "sser").unwrap();
        let other = SpectralImage::<f64>::from_bip(16, 12, 2, &vec![0.5; 16 * 12 * 2]).unwrap();
        write_sser(&files.insitu, &other).unwrap();
        let err = load_scene::<f64>(&files.orbital, &files.insitu, &LoadConfig::default()).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 5, found: 2 }));
    }

    #[test]
    fn indivisible_sizes_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let s = scene();
        let files = save_scene(dir.path(), &s, "sser").unwrap();
        let other = SpectralImage::<f64>::from_bip(15, 12, 5, &vec![0.5; 15 * 12 * 5]).unwrap();
        write_sser(&files.insitu, &other).unwrap();
        let err = load_scene::<f64>(&files.orbital, &files.insitu, &LoadConfig::default()).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn missing_file_is_a_parse_error() {
        let err = load_scene::<f64>(
            Path::new("/nonexistent/o.sser"),
            Path::new("/nonexistent/i.sser"),
            &LoadConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }
}
