//! Lawson–Hanson active-set NNLS.

use super::{AbundanceVector, SolverOptions, SpectralLibrary, Spectrum, UnmixResult};
use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::scalar::Scalar;

/// Abundances minimizing `‖Y a − x‖₂` subject to `a ≥ 0` (and `Σa = 1`
/// through a weighted augmented row when `opts.sum_to_one` is set).
pub fn nnls_solve<T: Scalar>(
    library: &SpectralLibrary<T>,
    pixel: &Spectrum<T>,
    opts: &SolverOptions<T>,
) -> Result<UnmixResult<T>> {
    let d = library.bands().ok_or(Error::EmptyLibrary)?;
    if pixel.bands() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: pixel.bands(),
        });
    }
    if !pixel.is_finite() {
        return Err(Error::NonFinite("pixel"));
    }
    if library.columns().iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("library"));
    }
    if !(opts.tolerance > T::zero()) {
        return Err(Error::config("solver tolerance must be positive"));
    }

    let k = library.len();
    let max_iter = opts.max_iterations.unwrap_or(3 * k);
    let coeffs = if opts.sum_to_one {
        let w = opts.asc_weight;
        let cols: Vec<Vec<T>> = library
            .columns()
            .iter()
            .map(|c| {
                let mut v = c.as_slice().to_vec();
                v.push(w);
                v
            })
            .collect();
        let mut b = pixel.as_slice().to_vec();
        b.push(w);
        let refs: Vec<&[T]> = cols.iter().map(Vec::as_slice).collect();
        active_set(&refs, &b, opts.tolerance, max_iter)?
    } else {
        let refs: Vec<&[T]> = library.columns().iter().map(Spectrum::as_slice).collect();
        active_set(&refs, pixel.as_slice(), opts.tolerance, max_iter)?
    };

    let abundances = AbundanceVector::new(coeffs)?;
    let recon = super::reconstruct(library, &abundances)?;
    let residual = recon.distance(pixel);
    Ok(UnmixResult {
        abundances,
        residual,
    })
}

fn residual_of<T: Scalar>(cols: &[&[T]], b: &[T], x: &[T]) -> Vec<T> {
    let mut r = b.to_vec();
    for (c, xi) in cols.iter().zip(x) {
        if *xi != T::zero() {
            for (ri, ci) in r.iter_mut().zip(c.iter()) {
                *ri = *ri - *xi * *ci;
            }
        }
    }
    r
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

fn solve_passive<T: Scalar>(cols: &[&[T]], b: &[T], passive: &[bool]) -> Option<Vec<T>> {
    let idx: Vec<usize> = (0..cols.len()).filter(|&i| passive[i]).collect();
    let sub: Vec<&[T]> = idx.iter().map(|&i| cols[i]).collect();
    let z_p = least_squares(&sub, b)?;
    let mut z = vec![T::zero(); cols.len()];
    for (i, v) in idx.into_iter().zip(z_p) {
        z[i] = v;
    }
    Some(z)
}

fn active_set<T: Scalar>(cols: &[&[T]], b: &[T], tol: T, max_iter: usize) -> Result<Vec<T>> {
    let k = cols.len();
    let mut x = vec![T::zero(); k];
    let mut passive = vec![false; k];
    let mut rejected = vec![false; k];
    let mut iterations = 0usize;

    loop {
        let r = residual_of(cols, b, &x);
        // Dual vector w = Aᵀ(b − Ax); ties go to the lowest column index.
        let mut best: Option<(usize, T)> = None;
        for j in 0..k {
            if passive[j] || rejected[j] {
                continue;
            }
            let w = dot(cols[j], &r);
            if w > tol && best.is_none_or(|(_, bw)| w > bw) {
                best = Some((j, w));
            }
        }
        let Some((j, _)) = best else { break };
        iterations += 1;
        if iterations > max_iter {
            return Err(Error::IterationLimit(max_iter));
        }

        passive[j] = true;
        let mut z = match solve_passive(cols, b, &passive) {
            Some(z) if z[j] > T::zero() => z,
            _ => {
                // Numerically dependent on the passive set, or a round-off
                // sign flip; skip this column until the passive set changes.
                passive[j] = false;
                rejected[j] = true;
                continue;
            }
        };
        rejected.iter_mut().for_each(|r| *r = false);

        loop {
            if (0..k).all(|i| !passive[i] || z[i] > T::zero()) {
                x = z;
                break;
            }
            let mut alpha = T::infinity();
            for i in 0..k {
                if passive[i] && z[i] <= T::zero() {
                    let a = x[i] / (x[i] - z[i]);
                    if a < alpha {
                        alpha = a;
                    }
                }
            }
            for i in 0..k {
                x[i] = x[i] + alpha * (z[i] - x[i]);
            }
            let mut moved = false;
            for i in 0..k {
                if passive[i] && x[i] <= T::zero() {
                    passive[i] = false;
                    x[i] = T::zero();
                    moved = true;
                }
            }
            if !moved {
                // alpha hit a coefficient that round-off left marginally
                // positive; drop the smallest one explicitly.
                let i = (0..k)
                    .filter(|&i| passive[i] && z[i] <= T::zero())
                    .min_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap())
                    .expect("an infeasible passive coefficient exists");
                passive[i] = false;
                x[i] = T::zero();
            }
            z = solve_passive(cols, b, &passive)
                .expect("a subset of independent columns stays independent");
        }
    }

    for v in &mut x {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
    Ok(x)
}

/// Largest KKT violation of `a` for `min ‖Y a − x‖` s.t. `a ≥ 0`: the
/// gradient magnitude on positive coefficients and the negative part of the
/// gradient on zero coefficients.
pub fn kkt_violation<T: Scalar>(library: &SpectralLibrary<T>, pixel: &Spectrum<T>, a: &[T]) -> T {
    let cols: Vec<&[T]> = library.columns().iter().map(Spectrum::as_slice).collect();
    let r = residual_of(&cols, pixel.as_slice(), a);
    let mut worst = T::zero();
    for (c, ai) in cols.iter().zip(a) {
        // ∇ = Aᵀ(Ax − b) = −w
        let grad = -dot(c, &r);
        let v = if *ai > T::zero() {
            grad.abs()
        } else {
            (-grad).max(T::zero())
        };
        worst = worst.max(v);
    }
    worst
}
