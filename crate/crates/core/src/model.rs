//! Model parameters, the ω function, the Temperley-Lieb generator and the
//! Hamiltonian.

use alloc::format;
use alloc::vec::Vec;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::operator::{quantum_dim, DenseMatrix, QOperator, SparseMatrix, StoragePolicy};
use crate::residual;
use crate::C64;

/// Largest chain length accepted by [`ModelParams`]. Dense work is capped
/// separately by the operations that need it.
pub const MAX_SITES: usize = 12;

/// Which root of `q² + cq + 1 = 0` is used for `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Branch {
    /// `|q| ≥ 1`; ties broken by larger real part, then larger imaginary part.
    #[default]
    Plus,
    /// The reciprocal root.
    Minus,
}

impl Branch {
    pub fn other(self) -> Self {
        match self {
            Branch::Plus => Branch::Minus,
            Branch::Minus => Branch::Plus,
        }
    }
}

/// `ω(u) = u − 1/u`. No zero check; callers that can see `u = 0` use
/// [`omega`].
#[inline]
pub fn om(u: C64) -> C64 {
    u - u.inv()
}

/// `ω(u) = u − 1/u`, rejecting `u = 0`.
pub fn omega(u: C64) -> Result<C64> {
    if u.is_zero() {
        return Err(Error::InvalidParams("ω(u) is undefined at u = 0".into()));
    }
    Ok(om(u))
}

/// `c = 1 + Q² + Q⁻²`.
pub fn tl_constant(big_q: C64) -> C64 {
    let q2 = big_q * big_q;
    C64::new(1.0, 0.0) + q2 + q2.inv()
}

/// Solves `1 + Q² + Q⁻² = −(q + q⁻¹)` for `q` on the requested branch.
pub fn derive_q(big_q: C64, branch: Branch) -> Result<C64> {
    if big_q.is_zero() || !big_q.is_finite() {
        return Err(Error::InvalidParams(format!("Q must be nonzero and finite, got {big_q}")));
    }
    let c = tl_constant(big_q);
    let disc = (c * c - C64::new(4.0, 0.0)).sqrt();
    let r1 = (-c + disc) * 0.5;
    let r2 = (-c - disc) * 0.5;
    // ω(r₁) = r₁ − r₂ = disc; rounding in c² − 4 leaves |disc| ~ 1e-8 at a
    // true double root, so the guard sits at the square root of that scale.
    if disc.norm() < 1e-6 {
        return Err(Error::InvalidParams(format!(
            "Q = {big_q} gives the double root q = {r1}; ω(q) must not vanish"
        )));
    }
    let tie_tol = 1e-14 * r1.norm().max(r2.norm());
    let outer_is_r1 = if (r1.norm() - r2.norm()).abs() > tie_tol {
        r1.norm() > r2.norm()
    } else if (r1.re - r2.re).abs() > tie_tol {
        r1.re > r2.re
    } else {
        r1.im > r2.im
    };
    let (outer, inner) = if outer_is_r1 { (r1, r2) } else { (r2, r1) };
    Ok(match branch {
        Branch::Plus => outer,
        Branch::Minus => inner,
    })
}

/// Everything the scalar functions and operators depend on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    sites: usize,
    big_q: C64,
    q: C64,
    branch: Branch,
    tol_identity: f64,
    tol_derivative: f64,
    rng_seed: u64,
}

impl ModelParams {
    pub const DEFAULT_TOL_IDENTITY: f64 = 1e-9;
    pub const DEFAULT_TOL_DERIVATIVE: f64 = 1e-5;

    pub fn new(sites: usize, big_q: C64, branch: Branch) -> Result<Self> {
        let q = derive_q(big_q, branch)?;
        Self::with_q(sites, big_q, q, branch)
    }

    /// Builds from an explicit `(Q, q)` pair, validating the relation between
    /// them. `branch` is informational.
    pub fn with_q(sites: usize, big_q: C64, q: C64, branch: Branch) -> Result<Self> {
        if sites == 0 || sites > MAX_SITES {
            return Err(Error::InvalidParams(format!("N must lie in 1..={MAX_SITES}, got {sites}")));
        }
        if big_q.is_zero() || !big_q.is_finite() {
            return Err(Error::InvalidParams(format!("Q must be nonzero and finite, got {big_q}")));
        }
        if q.is_zero() || !q.is_finite() || om(q).norm() < 1e-12 {
            return Err(Error::InvalidParams(format!("q must avoid 0 and ±1, got {q}")));
        }
        let relation = residual::scalar(tl_constant(big_q), -(q + q.inv()));
        if relation > 1e-12 {
            return Err(Error::InvalidParams(format!(
                "1 + Q² + Q⁻² = −(q + q⁻¹) violated (relative residual {relation:.3e})"
            )));
        }
        Ok(Self {
            sites,
            big_q,
            q,
            branch,
            tol_identity: Self::DEFAULT_TOL_IDENTITY,
            tol_derivative: Self::DEFAULT_TOL_DERIVATIVE,
            rng_seed: 0,
        })
    }

    pub fn with_tolerances(mut self, identity: f64, derivative: f64) -> Result<Self> {
        if !(identity > 0.0 && derivative > 0.0) {
            return Err(Error::InvalidParams("tolerances must be positive".into()));
        }
        self.tol_identity = identity;
        self.tol_derivative = derivative;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    /// Same `Q`, different chain length.
    pub fn with_sites(self, sites: usize) -> Result<Self> {
        let mut p = Self::with_q(sites, self.big_q, self.q, self.branch)?;
        p.tol_identity = self.tol_identity;
        p.tol_derivative = self.tol_derivative;
        p.rng_seed = self.rng_seed;
        Ok(p)
    }

    pub fn sites(&self) -> usize {
        self.sites
    }
    pub fn big_q(&self) -> C64 {
        self.big_q
    }
    pub fn q(&self) -> C64 {
        self.q
    }
    pub fn branch(&self) -> Branch {
        self.branch
    }
    pub fn tol_identity(&self) -> f64 {
        self.tol_identity
    }
    pub fn tol_derivative(&self) -> f64 {
        self.tol_derivative
    }
    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }
    pub fn dim(&self) -> usize {
        quantum_dim(self.sites)
    }

    /// The loop weight `c = −(q + q⁻¹)`.
    pub fn c(&self) -> C64 {
        -(self.q + self.q.inv())
    }
}

/// The generator `X` as printed: nonzero only on the indices `{2, 4, 6}`
/// (0-based) that pair a local state with its mirror image.
pub fn build_x(params: &ModelParams) -> DenseMatrix {
    let qq = params.big_q();
    let one = C64::new(1.0, 0.0);
    let mut x = DenseMatrix::zeros(9, 9);
    let entries = [
        (2, 2, qq.powi(-2)),
        (2, 4, -qq.inv()),
        (2, 6, one),
        (4, 4, one),
        (4, 6, -qq),
        (6, 6, qq * qq),
    ];
    for (i, j, v) in entries {
        x[(i, j)] = v;
        x[(j, i)] = v;
    }
    x
}

/// `X` from the general spin-`s` matrix-element formula at `s = 1`,
/// `⟨m₁m₂|X|m₁'m₂'⟩ = (−1)^{m₁−m₁'} Q^{m₁+m₁'} δ_{m₁+m₂,0} δ_{m₁'+m₂',0}`,
/// with local index `i ↔ m = i − 1`.
pub fn build_x_general(params: &ModelParams) -> DenseMatrix {
    let qq = params.big_q();
    let mut x = DenseMatrix::zeros(9, 9);
    let ms = [-1i32, 0, 1];
    for (i1, &m1) in ms.iter().enumerate() {
        for (i2, &m2) in ms.iter().enumerate() {
            for (j1, &n1) in ms.iter().enumerate() {
                for (j2, &n2) in ms.iter().enumerate() {
                    if m1 + m2 == 0 && n1 + n2 == 0 {
                        let sign = if (m1 - n1).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                        x[(3 * i1 + i2, 3 * j1 + j2)] = qq.powi(m1 + n1) * sign;
                    }
                }
            }
        }
    }
    x
}

/// Spin-1 matrices `(Sˣ, Sʸ, Sᶻ)` in the local basis `m = +1, 0, −1`.
pub fn spin_one() -> [DenseMatrix; 3] {
    let r = core::f64::consts::FRAC_1_SQRT_2;
    let z = C64::zero();
    let re = |x: f64| C64::new(x, 0.0);
    let im = |x: f64| C64::new(0.0, x);
    let sx = DenseMatrix::from_row_slice(3, 3, &[z, re(r), z, re(r), z, re(r), z, re(r), z]);
    let sy = DenseMatrix::from_row_slice(3, 3, &[z, im(-r), z, im(r), z, im(-r), z, im(r), z]);
    let sz = DenseMatrix::from_row_slice(3, 3, &[re(1.0), z, z, z, z, z, z, z, re(-1.0)]);
    [sx, sy, sz]
}

/// `(S⃗⊗S⃗)² − I` on two spin-1 sites, built from [`spin_one`]. Equals `X` at
/// `Q = 1`.
pub fn biquadratic_x() -> DenseMatrix {
    let s = spin_one();
    let mut dot = DenseMatrix::zeros(9, 9);
    for a in &s {
        dot += a.kronecker(a);
    }
    &dot * &dot - DenseMatrix::identity(9, 9)
}

/// `X_{(i)} = I^{⊗(i−1)} ⊗ X ⊗ I^{⊗(N−i−1)}` for `1 ≤ i ≤ N − 1`.
pub fn embed_generator(i: usize, params: &ModelParams, policy: StoragePolicy) -> Result<QOperator> {
    embed_pair(&build_x(params), i, params.sites(), policy)
}

/// Embeds a 9×9 two-site operator on sites `(i, i+1)`.
pub fn embed_pair(x: &DenseMatrix, i: usize, sites: usize, policy: StoragePolicy) -> Result<QOperator> {
    if sites < 2 || i == 0 || i >= sites {
        return Err(Error::OutOfRange {
            what: "generator index",
            value: i,
            allowed: format!("1..={}", sites.saturating_sub(1)),
        });
    }
    let dim = quantum_dim(sites);
    let left = quantum_dim(i - 1);
    let right = quantum_dim(sites - i - 1);
    if policy.sparse_for(dim) {
        let mut trip = Vec::new();
        for l in 0..left {
            for r in 0..right {
                for a in 0..9 {
                    for b in 0..9 {
                        let v = x[(a, b)];
                        if !v.is_zero() {
                            trip.push(((l * 9 + a) * right + r, (l * 9 + b) * right + r, v));
                        }
                    }
                }
            }
        }
        QOperator::from_sparse(sites, SparseMatrix::from_triplets(dim, dim, &trip))
    } else {
        let m = DenseMatrix::identity(left, left)
            .kronecker(x)
            .kronecker(&DenseMatrix::identity(right, right));
        QOperator::from_dense(sites, m)
    }
}

/// `H = Σ_{i=1}^{N−1} X_{(i)}`.
pub fn build_hamiltonian(params: &ModelParams, policy: StoragePolicy) -> Result<QOperator> {
    build_hamiltonian_from(&build_x(params), params.sites(), policy)
}

pub(crate) fn build_hamiltonian_from(x: &DenseMatrix, sites: usize, policy: StoragePolicy) -> Result<QOperator> {
    if sites < 2 {
        return Err(Error::OutOfRange { what: "N for the Hamiltonian", value: sites, allowed: "≥ 2".into() });
    }
    let mut h = embed_pair(x, 1, sites, policy)?;
    for i in 2..sites {
        h = h.add_scaled(&embed_pair(x, i, sites, policy)?, C64::new(1.0, 0.0));
    }
    Ok(h)
}

/// Maximum residuals of the three Temperley-Lieb relations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TlReport {
    pub idempotency: f64,
    pub braid: f64,
    pub distant_commutation: f64,
    pub tolerance: f64,
}

impl TlReport {
    pub fn max_residual(&self) -> f64 {
        self.idempotency.max(self.braid).max(self.distant_commutation)
    }
    pub fn pass(&self) -> bool {
        self.max_residual() < self.tolerance
    }
}

pub fn check_tl_relations(params: &ModelParams) -> Result<TlReport> {
    check_tl_relations_with_c(params, params.c())
}

/// As [`check_tl_relations`] but with an arbitrary loop weight in the
/// idempotency relation.
pub fn check_tl_relations_with_c(params: &ModelParams, c: C64) -> Result<TlReport> {
    let n = params.sites();
    if n < 3 {
        return Err(Error::OutOfRange { what: "N for the TL relations", value: n, allowed: "≥ 3".into() });
    }
    let gens: Vec<QOperator> = (1..n)
        .map(|i| embed_generator(i, params, StoragePolicy::Auto))
        .collect::<Result<_>>()?;
    let mut report = TlReport {
        idempotency: 0.0,
        braid: 0.0,
        distant_commutation: 0.0,
        tolerance: params.tol_identity(),
    };
    for (i, xi) in gens.iter().enumerate() {
        let sq = xi.mul_op(xi);
        report.idempotency = report.idempotency.max(sq.residual(&xi.scale(c)));
        for (j, xj) in gens.iter().enumerate() {
            if i.abs_diff(j) == 1 {
                let xjx = xi.mul_op(xj).mul_op(xi);
                report.braid = report.braid.max(xjx.residual(xi));
            } else if i.abs_diff(j) > 1 {
                let lhs = xi.mul_op(xj);
                let rhs = xj.mul_op(xi);
                report.distant_commutation = report.distant_commutation.max(lhs.residual(&rhs));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;

    #[test]
    fn omega_values() {
        assert_eq!(omega(c64(1.0, 0.0)).unwrap(), c64(0.0, 0.0));
        assert_eq!(omega(c64(-1.0, 0.0)).unwrap(), c64(0.0, 0.0));
        assert_eq!(omega(c64(2.0, 0.0)).unwrap(), c64(1.5, 0.0));
        assert!(omega(c64(0.0, 0.0)).is_err());
    }

    #[test]
    fn q_at_isotropic_point() {
        let q = derive_q(c64(1.0, 0.0), Branch::Plus).unwrap();
        assert!((q - c64((-3.0 - 5f64.sqrt()) / 2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn branches_are_reciprocal() {
        for qq in [c64(1.1, 0.0), c64(0.7, 0.4), c64(-0.3, 1.2), C64::from_polar(1.0, 0.4)] {
            let p = derive_q(qq, Branch::Plus).unwrap();
            let m = derive_q(qq, Branch::Minus).unwrap();
            assert!((p * m - c64(1.0, 0.0)).norm() < 1e-13);
            assert!(p.norm() >= m.norm() - 1e-14);
            assert!(residual::scalar(tl_constant(qq), -(p + p.inv())) < 1e-13);
        }
    }

    #[test]
    fn double_root_is_rejected() {
        // c = 2 ⇒ q = −1; Q² + Q⁻² = 1 ⇒ Q = e^{iπ/6}.
        let qq = C64::from_polar(1.0, core::f64::consts::PI / 6.0);
        assert!(derive_q(qq, Branch::Plus).is_err());
        assert!(ModelParams::new(2, c64(0.0, 0.0), Branch::Plus).is_err());
    }

    #[test]
    fn mismatched_pair_is_rejected() {
        assert!(ModelParams::with_q(2, c64(1.1, 0.0), c64(2.0, 0.0), Branch::Plus).is_err());
    }

    #[test]
    fn x_literal_matches_general_formula() {
        let p = ModelParams::new(2, c64(0.8, -0.3), Branch::Plus).unwrap();
        let diff = (build_x(&p) - build_x_general(&p)).norm();
        assert!(diff < 1e-14);
    }

    #[test]
    fn isotropic_point_is_biquadratic() {
        let p = ModelParams::new(2, c64(1.0, 0.0), Branch::Plus).unwrap();
        assert!(residual::matrix(&build_x(&p), &biquadratic_x()) < 1e-13);
        let [sx, sy, sz] = spin_one();
        let comm = &sx * &sy - &sy * &sx;
        assert!(residual::matrix(&comm, &(sz * c64(0.0, 1.0))) < 1e-15);
    }

    #[test]
    fn x_trace_and_rank() {
        let p = ModelParams::new(2, c64(1.3, 0.2), Branch::Minus).unwrap();
        let x = build_x(&p);
        assert!(residual::scalar(x.trace(), p.c()) < 1e-14);
        let sv = crate::linalg::singular_values(&x);
        assert!(sv[1] < 1e-12 * sv[0]);
    }

    #[test]
    fn hamiltonian_of_two_sites_is_x() {
        let p = ModelParams::new(2, c64(1.1, 0.0), Branch::Plus).unwrap();
        let h = build_hamiltonian(&p, StoragePolicy::Auto).unwrap();
        assert_eq!(h.to_dense(), build_x(&p));
        assert!(build_hamiltonian(&p.with_sites(1).unwrap(), StoragePolicy::Auto).is_err());
    }

    #[test]
    fn embedding_norm_and_range() {
        let p = ModelParams::new(4, c64(0.9, 0.1), Branch::Plus).unwrap();
        let xf = build_x(&p).norm();
        for i in 1..4 {
            let e = embed_generator(i, &p, StoragePolicy::Auto).unwrap();
            assert!((e.frobenius_norm() - 3.0 * xf).abs() < 1e-12 * xf);
        }
        assert!(embed_generator(0, &p, StoragePolicy::Auto).is_err());
        assert!(embed_generator(4, &p, StoragePolicy::Auto).is_err());
    }

    #[test]
    fn sparse_and_dense_hamiltonians_agree() {
        let p = ModelParams::new(3, c64(1.1, 0.3), Branch::Plus).unwrap();
        let d = build_hamiltonian(&p, StoragePolicy::Dense).unwrap();
        let s = build_hamiltonian(&p, StoragePolicy::Sparse).unwrap();
        assert!(s.is_sparse());
        assert!(d.residual(&s) < 1e-15);
    }

    #[test]
    fn tl_relations_and_negative_control() {
        let p = ModelParams::new(3, c64(1.0, 0.0), Branch::Plus).unwrap();
        let r = check_tl_relations(&p).unwrap();
        assert!(r.max_residual() < 1e-12, "{r:?}");
        let bad = check_tl_relations_with_c(&p, p.c() + 1.0).unwrap();
        assert!(bad.idempotency > 0.1 && !bad.pass());
    }
}
