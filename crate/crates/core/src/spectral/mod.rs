//! Linear mixing model: spectra, endmember libraries, NNLS unmixing and
//! scene reconstruction error.

mod nnls;

use std::ops::Index;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use nnls::{kkt_violation, nnls_solve};

/// A `d`-band reflectance vector. Cloning is cheap (shared storage).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    values: Arc<[T]>,
}

impl<T: Scalar> Spectrum<T> {
    /// Builds a spectrum, rejecting empty or non-finite input.
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("spectrum"));
        }
        Ok(Spectrum {
            values: values.into(),
        })
    }

    pub(crate) fn from_vec_unchecked(values: Vec<T>) -> Self {
        Spectrum {
            values: values.into(),
        }
    }

    pub fn zeros(bands: usize) -> Self {
        Spectrum::from_vec_unchecked(vec![T::zero(); bands])
    }

    pub fn bands(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn scaled(&self, s: T) -> Self {
        Spectrum::from_vec_unchecked(self.values.iter().map(|v| *v * s).collect())
    }

    pub fn squared_distance(&self, other: &Spectrum<T>) -> T {
        squared_distance(&self.values, &other.values)
    }

    pub fn distance(&self, other: &Spectrum<T>) -> T {
        self.squared_distance(other).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl<T> Index<usize> for Spectrum<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.values[i]
    }
}

pub(crate) fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = *x - *y;
            d * d
        })
        .sum()
}

/// Where a library column came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    InSitu,
    Remote,
}

/// Ordered endmember candidates sharing one band count.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpectralLibrary<T> {
    columns: Vec<Spectrum<T>>,
    provenance: Vec<Provenance>,
}

impl<T: Scalar> SpectralLibrary<T> {
    pub fn new() -> Self {
        SpectralLibrary {
            columns: Vec::new(),
            provenance: Vec::new(),
        }
    }

    /// Library with every column tagged `provenance`.
    pub fn from_spectra(
        spectra: impl IntoIterator<Item = Spectrum<T>>,
        provenance: Provenance,
    ) -> Result<Self> {
        let mut lib = SpectralLibrary::new();
        for s in spectra {
            lib.push(s, provenance)?;
        }
        Ok(lib)
    }

    pub fn push(&mut self, spectrum: Spectrum<T>, provenance: Provenance) -> Result<()> {
        if let Some(d) = self.bands() {
            if spectrum.bands() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: spectrum.bands(),
                });
            }
        }
        self.columns.push(spectrum);
        self.provenance.push(provenance);
        Ok(())
    }

    /// Column concatenation `[self other]`.
    pub fn concat(&self, other: &SpectralLibrary<T>) -> Result<Self> {
        let mut lib = self.clone();
        for (s, p) in other.iter() {
            lib.push(s.clone(), p)?;
        }
        Ok(lib)
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Band count, `None` for an empty library.
    pub fn bands(&self) -> Option<usize> {
        self.columns.first().map(Spectrum::bands)
    }

    pub fn columns(&self) -> &[Spectrum<T>] {
        &self.columns
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn column(&self, i: usize) -> &Spectrum<T> {
        &self.columns[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Spectrum<T>, Provenance)> {
        self.columns.iter().zip(self.provenance.iter().copied())
    }
}

/// Non-negative abundances, one per library column.
#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceVector<T> {
    coefficients: Vec<T>,
}

impl<T: Scalar> AbundanceVector<T> {
    pub fn new(coefficients: Vec<T>) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("abundances"));
        }
        if coefficients.iter().any(|c| *c < T::zero()) {
            return Err(Error::config("abundances must be non-negative"));
        }
        Ok(AbundanceVector { coefficients })
    }

    pub fn as_slice(&self) -> &[T] {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn sum(&self) -> T {
        self.coefficients.iter().copied().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnmixResult<T> {
    pub abundances: AbundanceVector<T>,
    /// `‖Y a − x‖₂` against the original (non-augmented) rows.
    pub residual: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions<T> {
    /// Tolerance on the dual (negative gradient) for inactive coefficients.
    pub tolerance: T,
    /// Enforce `Σa = 1` through an augmented row.
    pub sum_to_one: bool,
    /// Weight of the augmented sum-to-one row.
    pub asc_weight: T,
    /// Outer iteration cap; `None` means `3·K`.
    pub max_iterations: Option<usize>,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        SolverOptions {
            tolerance: T::nnls_tolerance(),
            sum_to_one: false,
            asc_weight: T::of(10.0),
            max_iterations: None,
        }
    }
}

impl SolverOptions<f64> {
    pub fn cast<T: Scalar>(&self) -> SolverOptions<T> {
        SolverOptions {
            tolerance: T::of(self.tolerance),
            sum_to_one: self.sum_to_one,
            asc_weight: T::of(self.asc_weight),
            max_iterations: self.max_iterations,
        }
    }
}

/// `Σᵢ aᵢ·yᵢ`.
pub fn reconstruct<T: Scalar>(
    library: &SpectralLibrary<T>,
    abundances: &AbundanceVector<T>,
) -> Result<Spectrum<T>> {
    if library.len() != abundances.len() {
        return Err(Error::DimensionMismatch {
            expected: library.len(),
            found: abundances.len(),
        });
    }
    let d = library.bands().ok_or(Error::EmptyLibrary)?;
    let mut out = vec![T::zero(); d];
    for (col, a) in library.columns().iter().zip(abundances.as_slice()) {
        if *a == T::zero() {
            continue;
        }
        for (o, y) in out.iter_mut().zip(col.as_slice()) {
            *o = *o + *a * *y;
        }
    }
    Ok(Spectrum::from_vec_unchecked(out))
}

/// Sum over pixels of the NNLS residual `min_{a ≥ 0} ‖Y a − x‖₂`.
pub fn scene_reconstruction_error<'a, T: Scalar>(
    library: &SpectralLibrary<T>,
    pixels: impl IntoIterator<Item = &'a Spectrum<T>>,
    opts: &SolverOptions<T>,
) -> Result<T> {
    let mut total = T::zero();
    let mut count = 0usize;
    for px in pixels {
        total = total + nnls_solve(library, px, opts)?.residual;
        count += 1;
    }
    if count == 0 {
        return Err(Error::config("image has no pixels"));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(v: &[f64]) -> Spectrum<f64> {
        Spectrum::new(v.to_vec()).unwrap()
    }

    #[test]
    fn reconstruct_unit_and_zero() {
        let lib = SpectralLibrary::from_spectra(
            [spec(&[0.1, 0.2, 0.3]), spec(&[0.5, 0.4, 0.9])],
            Provenance::InSitu,
        )
        .unwrap();
        let first = reconstruct(&lib, &AbundanceVector::new(vec![1.0, 0.0]).unwrap()).unwrap();
        assert_eq!(first, *lib.column(0));
        let zero = reconstruct(&lib, &AbundanceVector::new(vec![0.0, 0.0]).unwrap()).unwrap();
        assert_eq!(zero.as_slice(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn reconstruct_matches_loop() {
        let y1 = [0.12, 0.55, 0.31, 0.9];
        let y2 = [0.77, 0.05, 0.42, 0.6];
        let lib =
            SpectralLibrary::from_spectra([spec(&y1), spec(&y2)], Provenance::Remote).unwrap();
        let got = reconstruct(&lib, &AbundanceVector::new(vec![0.3, 0.7]).unwrap()).unwrap();
        for b in 0..4 {
            let mut expect = 0.0;
            expect += 0.3 * y1[b];
            expect += 0.7 * y2[b];
            assert!((got[b] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn reconstruct_length_mismatch() {
        let lib = SpectralLibrary::from_spectra([spec(&[0.1, 0.2])], Provenance::InSitu).unwrap();
        let err = reconstruct(&lib, &AbundanceVector::new(vec![1.0, 1.0]).unwrap());
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn library_rejects_band_mismatch() {
        let mut lib = SpectralLibrary::new();
        lib.push(spec(&[0.1, 0.2]), Provenance::InSitu).unwrap();
        assert!(lib.push(spec(&[0.1, 0.2, 0.3]), Provenance::Remote).is_err());
    }

    #[test]
    fn spectrum_rejects_nan() {
        assert!(matches!(
            Spectrum::new(vec![0.1, f64::NAN]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn exact_cover_has_zero_error() {
        let pixels = vec![spec(&[0.2, 0.4]), spec(&[0.6, 0.1]), spec(&[0.2, 0.4])];
        let lib = SpectralLibrary::from_spectra(
            [pixels[0].clone(), pixels[1].clone()],
            Provenance::InSitu,
        )
        .unwrap();
        let err = scene_reconstruction_error(&lib, &pixels, &SolverOptions::default()).unwrap();
        assert!(err.abs() < 1e-12);
    }

    #[test]
    fn single_pixel_scaled_library() {
        let px = spec(&[0.3, 0.5, 0.2]);
        let lib = SpectralLibrary::from_spectra([px.scaled(2.0)], Provenance::InSitu).unwrap();
        let err =
            scene_reconstruction_error(&lib, std::iter::once(&px), &SolverOptions::default())
                .unwrap();
        assert!(err.abs() < 1e-12);
        let r = nnls_solve(&lib, &px, &SolverOptions::default()).unwrap();
        assert!((r.abundances.as_slice()[0] - 0.5).abs() < 1e-12);
    }
}
