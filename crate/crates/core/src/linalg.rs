//! Dense complex linear algebra: spectra, determinants, conditioning.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::C64;

/// All eigenvalues of a square complex matrix via the complex Schur form.
pub fn eigenvalues(m: &DMatrix<C64>) -> Result<Vec<C64>> {
    if !m.is_square() {
        return Err(Error::Shape(format!("{}x{} is not square", m.nrows(), m.ncols())));
    }
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    // Transfer matrices have entries spanning many orders of magnitude, so
    // iterate on a unit-norm copy and rescale.
    let scale = m.norm();
    if scale == 0.0 {
        return Ok(alloc::vec![C64::new(0.0, 0.0); m.nrows()]);
    }
    let mut unit = m / C64::new(scale, 0.0);
    balance(&mut unit);
    let schur = [64.0 * f64::EPSILON, 1e-12]
        .iter()
        .find_map(|&eps| nalgebra::Schur::try_new(unit.clone(), eps, 100_000))
        .ok_or_else(|| Error::Numerical("Schur iteration did not converge".into()))?;
    let ev = schur
        .eigenvalues()
        .ok_or_else(|| Error::Numerical("Schur form is not triangular".into()))?;
    Ok(ev.iter().map(|z| z * scale).collect())
}

/// Parlett-Reinsch balancing by powers of two: a diagonal similarity that
/// evens out row and column norms, which Schur iteration needs on strongly
/// non-normal matrices. nalgebra only ships the real version.
fn balance(m: &mut DMatrix<C64>) {
    const RADIX: f64 = 2.0;
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..m.nrows() {
            let c2 = m.column(i).norm_squared();
            let r2 = m.row(i).norm_squared();
            let (mut c, mut r) = (c2.sqrt(), r2.sqrt());
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let mut f = 1.0;
            while c < r / RADIX {
                c *= RADIX;
                r /= RADIX;
                f *= RADIX;
            }
            while c >= r * RADIX {
                c /= RADIX;
                r *= RADIX;
                f /= RADIX;
            }
            if c * c + r * r < 0.95 * (c2 + r2) {
                converged = false;
                m.column_mut(i).scale_mut(f);
                m.row_mut(i).unscale_mut(f);
            }
        }
    }
}

/// Coupling between sectors, relative to the whole matrix, above which
/// [`eigenvalues_by_sector`] gives up on the block decomposition.
pub const SECTOR_LEAKAGE: f64 = 1e-13;

/// Eigenvalues of a matrix that is block diagonal under the basis labels
/// `sector`, one Schur decomposition per block. Falls back to the full
/// matrix if any entry couples two sectors.
pub fn eigenvalues_by_sector(m: &DMatrix<C64>, sector: &[usize]) -> Result<Vec<C64>> {
    if !m.is_square() || sector.len() != m.nrows() {
        return Err(Error::Shape(format!("{}x{} matrix with {} sector labels", m.nrows(), m.ncols(), sector.len())));
    }
    let mut leak = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if sector[i] != sector[j] {
                leak += m[(i, j)].norm_sqr();
            }
        }
    }
    if leak.sqrt() > SECTOR_LEAKAGE * m.norm() {
        return eigenvalues(m);
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &s) in sector.iter().enumerate() {
        groups.entry(s).or_default().push(i);
    }
    let mut out = Vec::with_capacity(m.nrows());
    for idx in groups.values() {
        let block = DMatrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])]);
        out.extend(eigenvalues(&block)?);
    }
    Ok(out)
}

/// Determinant by LU with partial pivoting.
pub fn determinant(m: &DMatrix<C64>) -> C64 {
    m.clone().lu().determinant()
}

/// 2-norm condition number `σ_max / σ_min`; infinite for singular input.
pub fn condition_number(m: &DMatrix<C64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn singular_values(m: &DMatrix<C64>) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Solves `m x = rhs`; `None` when the LU factor is singular.
pub fn solve(m: &DMatrix<C64>, rhs: &DVector<C64>) -> Option<DVector<C64>> {
    m.clone().lu().solve(rhs)
}

/// Pairs two spectra greedily by nearest neighbour and returns the largest
/// distance, normalized by `max(spectral radius, 1)`. Equal multisets give 0.
pub fn spectrum_distance(a: &[C64], b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = alloc::vec![false; b.len()];
    let mut worst = 0.0f64;
    let scale = a.iter().chain(b.iter()).map(|z| z.norm()).fold(1.0, f64::max);
    for x in a {
        let mut best = (f64::INFINITY, usize::MAX);
        for (j, y) in b.iter().enumerate() {
            if !used[j] {
                let d = (x - y).norm();
                if d < best.0 {
                    best = (d, j);
                }
            }
        }
        used[best.1] = true;
        worst = worst.max(best.0);
    }
    worst / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sector_split_matches_full_spectrum() {
        let labels = [0usize, 1, 0, 1];
        let m = DMatrix::from_fn(4, 4, |i, j| {
            if labels[i] == labels[j] { C64::new((i * 3 + j) as f64 * 0.7 - 1.0, (i + 2 * j) as f64 * 0.3) } else { C64::new(0.0, 0.0) }
        });
        let split = eigenvalues_by_sector(&m, &labels).unwrap();
        assert!(spectrum_distance(&split, &eigenvalues(&m).unwrap()) < 1e-12);
        // A coupled matrix takes the full path and still gives its spectrum.
        let mut coupled = m.clone();
        coupled[(0, 1)] = C64::new(1.0, 0.0);
        let split = eigenvalues_by_sector(&coupled, &labels).unwrap();
        assert!(spectrum_distance(&split, &eigenvalues(&coupled).unwrap()) < 1e-12);
        assert!(eigenvalues_by_sector(&m, &labels[..3]).is_err());
    }

    #[test]
    fn triangular_spectrum_and_determinant() {
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[
                C64::new(2.0, 0.0), C64::new(1.0, 1.0), C64::new(0.0, 3.0),
                C64::new(0.0, 0.0), C64::new(0.0, 1.0), C64::new(5.0, 0.0),
                C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(-1.0, 0.0),
            ],
        );
        let ev = eigenvalues(&m).unwrap();
        let expected = [C64::new(2.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0)];
        assert!(spectrum_distance(&ev, &expected) < 1e-12);
        assert!((determinant(&m) - C64::new(0.0, -2.0)).norm() < 1e-12);
    }

    #[test]
    fn identity_is_perfectly_conditioned() {
        let m = DMatrix::<C64>::identity(4, 4);
        assert!((condition_number(&m) - 1.0).abs() < 1e-12);
    }
}
