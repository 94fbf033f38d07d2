//! Scenes: paired orbital / in-situ images on a sampling grid, synthetic
//! scene generation, raster I/O and the in-situ sensor model.

mod io;
pub mod raster;
mod synth;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::scalar::Scalar;
use crate::spectral::Spectrum;

pub use io::{load_scene, load_scene_dir, save_scene, LoadConfig, SceneFiles};
pub use synth::{generate_synthetic_scene, synthesize, SceneConfig, SyntheticScene};

/// Row-major hyperspectral image.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralImage<T> {
    width: usize,
    height: usize,
    bands: usize,
    pixels: Vec<Spectrum<T>>,
}

/// The low-resolution overhead image the planner sees.
pub type OrbitalImage<T> = SpectralImage<T>;

impl<T: Scalar> SpectralImage<T> {
    pub fn new(width: usize, height: usize, pixels: Vec<Spectrum<T>>) -> Result<Self> {
        if width * height == 0 {
            return Err(Error::config("image must have at least one pixel"));
        }
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                found: pixels.len(),
            });
        }
        let bands = pixels[0].bands();
        for p in &pixels {
            if p.bands() != bands {
                return Err(Error::DimensionMismatch {
                    expected: bands,
                    found: p.bands(),
                });
            }
            if !p.is_finite() {
                return Err(Error::NonFinite("image pixel"));
            }
        }
        Ok(SpectralImage {
            width,
            height,
            bands,
            pixels,
        })
    }

    /// Image from band-interleaved-by-pixel row-major values.
    pub fn from_bip(width: usize, height: usize, bands: usize, data: &[T]) -> Result<Self> {
        if bands == 0 {
            return Err(Error::config("image must have at least one band"));
        }
        if data.len() != width * height * bands {
            return Err(Error::DimensionMismatch {
                expected: width * height * bands,
                found: data.len(),
            });
        }
        let pixels = data
            .chunks_exact(bands)
            .map(|c| Spectrum::new(c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        SpectralImage::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixels(&self) -> &[Spectrum<T>] {
        &self.pixels
    }

    pub fn pixel(&self, row: usize, col: usize) -> &Spectrum<T> {
        &self.pixels[row * self.width + col]
    }

    /// Mean spectrum of each `factor × factor` block.
    pub fn block_mean(&self, factor: usize) -> Result<SpectralImage<T>> {
        if factor == 0 || self.width % factor != 0 || self.height % factor != 0 {
            return Err(Error::config(format!(
                "downsample {factor} must divide image dims {}x{}",
                self.width, self.height
            )));
        }
        let (w, h) = (self.width / factor, self.height / factor);
        let norm = T::of((factor * factor) as f64);
        let mut pixels = Vec::with_capacity(w * h);
        for r in 0..h {
            for c in 0..w {
                let mut acc = vec![T::zero(); self.bands];
                for rr in r * factor..(r + 1) * factor {
                    for cc in c * factor..(c + 1) * factor {
                        for (a, v) in acc.iter_mut().zip(self.pixel(rr, cc).as_slice()) {
                            *a = *a + *v;
                        }
                    }
                }
                pixels.push(Spectrum::from_vec_unchecked(
                    acc.into_iter().map(|a| a / norm).collect(),
                ));
            }
        }
        SpectralImage::new(w, h, pixels)
    }

    /// Band-interleaved-by-pixel values.
    pub fn to_bip(&self) -> Vec<T> {
        self.pixels
            .iter()
            .flat_map(|p| p.as_slice().iter().copied())
            .collect()
    }

    /// Median pairwise Euclidean distance between pixel spectra. Images with
    /// more than `max_pixels` pixels are subsampled at a uniform stride.
    pub fn median_pairwise_distance(&self, max_pixels: usize) -> T {
        let stride = self.pixels.len().div_ceil(max_pixels.max(2)).max(1);
        let sample: Vec<&Spectrum<T>> = self.pixels.iter().step_by(stride).collect();
        let mut d = Vec::with_capacity(sample.len() * sample.len().saturating_sub(1) / 2);
        for i in 0..sample.len() {
            for j in i + 1..sample.len() {
                d.push(sample[i].squared_distance(sample[j]));
            }
        }
        if d.is_empty() {
            return T::zero();
        }
        let mid = d.len() / 2;
        let cmp = |a: &T, b: &T| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal);
        let (_, m, _) = d.select_nth_unstable_by(mid, cmp);
        let upper = *m;
        let med = if d.len() % 2 == 1 {
            upper
        } else {
            let lower = d[..mid].iter().copied().fold(T::neg_infinity(), T::max);
            (lower + upper) / T::of(2.0)
        };
        med.sqrt()
    }
}

/// A location on the sampling grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridCell {
    pub row: usize,
    pub col: usize,
}

impl GridCell {
    pub const fn new(row: usize, col: usize) -> Self {
        GridCell { row, col }
    }

    /// Number of eight-connected moves between two cells.
    pub fn chebyshev(&self, other: &GridCell) -> usize {
        self.row.abs_diff(other.row).max(self.col.abs_diff(other.col))
    }

    pub fn is_adjacent(&self, other: &GridCell) -> bool {
        self.chebyshev(other) == 1
    }
}

/// Sampling grid over the orbital image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMap {
    rows: usize,
    cols: usize,
    stride: usize,
    orbital_width: usize,
    step_cost: f64,
}

impl GridMap {
    /// Grid with one cell every `stride` orbital pixels in each direction.
    pub fn new(orbital_width: usize, orbital_height: usize, stride: usize, step_cost: f64) -> Result<Self> {
        if stride == 0 {
            return Err(Error::config("grid stride must be at least 1"));
        }
        if !(step_cost > 0.0) || !step_cost.is_finite() {
            return Err(Error::config("step_cost must be positive"));
        }
        if orbital_width == 0 || orbital_height == 0 {
            return Err(Error::config("orbital image is empty"));
        }
        Ok(GridMap {
            rows: (orbital_height - 1) / stride + 1,
            cols: (orbital_width - 1) / stride + 1,
            stride,
            orbital_width,
            step_cost,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn step_cost(&self) -> f64 {
        self.step_cost
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, cell: GridCell) -> bool {
        cell.row < self.rows && cell.col < self.cols
    }

    pub fn check(&self, cell: GridCell) -> Result<()> {
        if self.contains(cell) {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                row: cell.row,
                col: cell.col,
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    /// Row-major index of the orbital pixel under `cell`.
    pub fn pixel_index(&self, cell: GridCell) -> usize {
        cell.row * self.stride * self.orbital_width + cell.col * self.stride
    }

    /// Row-major index of the cell within the grid.
    pub fn cell_index(&self, cell: GridCell) -> usize {
        cell.row * self.cols + cell.col
    }

    pub fn cell_at(&self, index: usize) -> GridCell {
        GridCell::new(index / self.cols, index % self.cols)
    }

    pub fn cells(&self) -> impl Iterator<Item = GridCell> + '_ {
        (0..self.len()).map(|i| self.cell_at(i))
    }

    /// Eight-connected travel cost between two cells.
    pub fn travel_cost(&self, a: GridCell, b: GridCell) -> f64 {
        a.chebyshev(&b) as f64 * self.step_cost
    }
}

/// How the in-situ proxy spectrum under a cell is derived from the
/// high-resolution image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InSituMode {
    /// Mean of the high-resolution block under the cell.
    #[default]
    BlockMean,
    /// The high-resolution pixel at the block centre.
    Point,
}

/// Ground-truth in-situ spectra per grid cell plus the sensor noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct InSituOracle<T> {
    highres: SpectralImage<T>,
    truth: Vec<Spectrum<T>>,
    noise_sigma: T,
    mode: InSituMode,
}

impl<T: Scalar> InSituOracle<T> {
    pub fn new(
        highres: SpectralImage<T>,
        downsample: usize,
        grid: &GridMap,
        noise_sigma: T,
        mode: InSituMode,
    ) -> Result<Self> {
        if !(noise_sigma >= T::zero()) || !noise_sigma.is_finite() {
            return Err(Error::config("noise_sigma must be a finite value >= 0"));
        }
        let blocks = match mode {
            InSituMode::BlockMean => highres.block_mean(downsample)?,
            InSituMode::Point => {
                let probe = highres.block_mean(downsample)?;
                let half = downsample / 2;
                let pixels = (0..probe.height())
                    .flat_map(|r| (0..probe.width()).map(move |c| (r, c)))
                    .map(|(r, c)| highres.pixel(r * downsample + half, c * downsample + half).clone())
                    .collect();
                SpectralImage::new(probe.width(), probe.height(), pixels)?
            }
        };
        let truth = grid
            .cells()
            .map(|cell| blocks.pixels()[grid.pixel_index(cell)].clone())
            .collect();
        Ok(InSituOracle {
            highres,
            truth,
            noise_sigma,
            mode,
        })
    }

    pub fn highres(&self) -> &SpectralImage<T> {
        &self.highres
    }

    pub fn noise_sigma(&self) -> T {
        self.noise_sigma
    }

    pub fn mode(&self) -> InSituMode {
        self.mode
    }

    /// Noise-free spectrum `f(b)` at a grid cell, by grid cell index.
    pub fn truth(&self, cell_index: usize) -> &Spectrum<T> {
        &self.truth[cell_index]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMetadata {
    pub name: String,
    pub seed: Option<u64>,
    pub downsample: usize,
}

/// Co-registered orbital image, in-situ oracle and sampling grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneryPair<T> {
    pub orbital: OrbitalImage<T>,
    pub oracle: InSituOracle<T>,
    pub grid: GridMap,
    pub metadata: SceneMetadata,
}

impl<T: Scalar> SceneryPair<T> {
    pub fn new(
        orbital: OrbitalImage<T>,
        oracle: InSituOracle<T>,
        grid: GridMap,
        metadata: SceneMetadata,
    ) -> Result<Self> {
        if orbital.bands() != oracle.highres().bands() {
            return Err(Error::DimensionMismatch {
                expected: orbital.bands(),
                found: oracle.highres().bands(),
            });
        }
        Ok(SceneryPair {
            orbital,
            oracle,
            grid,
            metadata,
        })
    }

    pub fn bands(&self) -> usize {
        self.orbital.bands()
    }

    /// Orbital (remote) spectrum under a grid cell.
    pub fn remote(&self, cell: GridCell) -> &Spectrum<T> {
        &self.orbital.pixels()[self.grid.pixel_index(cell)]
    }

    pub fn sample_in_situ(&self, cell: GridCell, rng: &mut RandomStream) -> Result<Spectrum<T>> {
        sample_in_situ(&self.oracle, &self.grid, cell, rng)
    }
}

/// In-situ measurement `y = f(b) + ε`, `ε ~ N(0, σ²)` per band, clipped at 0.
pub fn sample_in_situ<T: Scalar>(
    oracle: &InSituOracle<T>,
    grid: &GridMap,
    location: GridCell,
    rng: &mut RandomStream,
) -> Result<Spectrum<T>> {
    grid.check(location)?;
    let truth = oracle.truth(grid.cell_index(location));
    if oracle.noise_sigma == T::zero() {
        return Ok(truth.clone());
    }
    let normal = Normal::new(0.0, oracle.noise_sigma.as_f64())
        .map_err(|e| Error::config(format!("noise model: {e}")))?;
    let values = truth
        .as_slice()
        .iter()
        .map(|v| (*v + T::of(normal.sample(rng))).max(T::zero()))
        .collect();
    Ok(Spectrum::from_vec_unchecked(values))
}
