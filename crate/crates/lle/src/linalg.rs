//! Dense linear-algebra helpers shared by the solver modules: paired LU
//! factorizations, inverse-iteration estimates of extreme singular values,
//! and small trailing singular subspaces. All start vectors are
//! deterministic so identical inputs give bit-identical results.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// LU factors of both `A` and `Aᵀ`, so forward and adjoint solves are both
/// available. An exactly singular matrix is refactored with a tiny
/// diagonal shift so inverse iteration stays finite.
pub struct LuPair {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    lu_t: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl LuPair {
    pub fn new(a: &DMatrix<f64>) -> Self {
        let lu = a.clone().lu();
        let lu_t = a.transpose().lu();
        let probe = DVector::from_element(a.nrows(), 1.0);
        let healthy = |f: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>| {
            f.solve(&probe)
                .map(|x| x.iter().all(|v| v.is_finite()))
                .unwrap_or(false)
        };
        if healthy(&lu) && healthy(&lu_t) {
            return LuPair { lu, lu_t };
        }
        let scale = a.amax().max(1.0);
        let mut b = a.clone();
        for i in 0..b.nrows() {
            b[(i, i)] += 1e-14 * scale;
        }
        LuPair {
            lu: b.clone().lu(),
            lu_t: b.transpose().lu(),
        }
    }

    pub fn solve(&self, b: &DVector<f64>) -> Option<DVector<f64>> {
        self.lu.solve(b).filter(|x| x.iter().all(|v| v.is_finite()))
    }

    pub fn solve_transpose(&self, b: &DVector<f64>) -> Option<DVector<f64>> {
        self.lu_t
            .solve(b)
            .filter(|x| x.iter().all(|v| v.is_finite()))
    }
}

fn seeded_vector(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

/// Largest singular value by power iteration on `AᵀA`.
pub fn largest_singular_value(a: &DMatrix<f64>) -> f64 {
    let mut v = seeded_vector(a.ncols(), 0x5eed);
    v /= v.norm();
    let mut sigma = 0.0;
    for _ in 0..80 {
        let w = a.tr_mul(&(a * &v));
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        let s = nw.sqrt();
        let rel = (s - sigma).abs() / s.max(1e-300);
        sigma = s;
        v = w / nw;
        if rel < 1e-12 {
            break;
        }
    }
    sigma
}

/// Smallest singular value of `A` from a precomputed factorization, by
/// inverse iteration on `AAᵀ` (singular values of `AAᵀ` and `AᵀA` agree).
pub fn smallest_singular_value(lu: &LuPair, n: usize) -> f64 {
    let mut v = seeded_vector(n, 0xa11ce);
    v /= v.norm();
    let mut sigma = f64::INFINITY;
    for _ in 0..40 {
        let w = match lu.solve(&v).and_then(|x| lu.solve_transpose(&x)) {
            Some(w) => w,
            None => return 0.0,
        };
        let nw = w.norm();
        if !nw.is_finite() || nw == 0.0 {
            return 0.0;
        }
        let s = 1.0 / nw.sqrt();
        let rel = (sigma - s).abs() / s.max(1e-300);
        sigma = s;
        v = w / nw;
        if rel < 1e-10 {
            break;
        }
    }
    sigma
}

/// Subspace inverse iteration for the trailing right (`AᵀA`) or left
/// (`AAᵀ`) singular subspace of dimension `k`.
fn trailing_subspace(lu: &LuPair, n: usize, k: usize, right: bool) -> DMatrix<f64> {
    let mut basis = DMatrix::zeros(n, k);
    for j in 0..k {
        let col = seeded_vector(n, 0xbeef + j as u64);
        basis.set_column(j, &col);
    }
    basis = basis.qr().q();
    for sweep in 0..200 {
        let mut next = DMatrix::zeros(n, k);
        for j in 0..k {
            let col = DVector::from_column_slice(basis.column(j).as_slice());
            // (AᵀA)⁻¹ = A⁻¹A⁻ᵀ, (AAᵀ)⁻¹ = A⁻ᵀA⁻¹
            let w = if right {
                lu.solve_transpose(&col).and_then(|x| lu.solve(&x))
            } else {
                lu.solve(&col).and_then(|x| lu.solve_transpose(&x))
            };
            match w {
                Some(w) => next.set_column(j, &w),
                None => next.set_column(j, &col),
            }
        }
        let q = next.qr().q();
        let converged = sweep >= 4 && {
            let overlap = q.tr_mul(&basis);
            (0..k).all(|j| overlap.column(j).norm() > 1.0 - 1e-12)
        };
        basis = q;
        if converged {
            break;
        }
    }
    basis
}

/// The `k` smallest singular triplets of `A`: `(σ ascending, right
/// vectors, left vectors)`, all unit Euclidean norm. Accurate relative to
/// the dominant singular value, which is what rank decisions need.
pub fn smallest_singular_triplets(
    a: &DMatrix<f64>,
    k: usize,
) -> (Vec<f64>, Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let n = a.ncols();
    let k = k.min(n);
    let lu = LuPair::new(a);
    let v_basis = trailing_subspace(&lu, n, k, true);

    // Rayleigh-Ritz on the right subspace
    let av = a * &v_basis;
    let gram = av.tr_mul(&av);
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());

    let scale = largest_row_sum(a);
    let mut svals = Vec::with_capacity(k);
    let mut right = Vec::with_capacity(k);
    let mut left = Vec::with_capacity(k);
    for &idx in &order {
        let sigma = eig.eigenvalues[idx].max(0.0).sqrt();
        let coeff = eig.eigenvectors.column(idx);
        let mut v = DVector::zeros(n);
        for j in 0..k {
            v += coeff[j] * DVector::from_column_slice(v_basis.column(j).as_slice());
        }
        v /= v.norm();
        let w = {
            let av = a * &v;
            let nav = av.norm();
            if nav > 1e-10 * scale {
                av / nav
            } else {
                // near-kernel direction: take the smallest left singular
                // vector by its own inverse iteration
                let wb = trailing_subspace(&lu, n, 1, false);
                let mut w = DVector::from_column_slice(wb.column(0).as_slice());
                w /= w.norm();
                w
            }
        };
        svals.push(sigma);
        right.push(v);
        left.push(w);
    }
    (svals, right, left)
}

fn largest_row_sum(a: &DMatrix<f64>) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..a.nrows() {
        best = best.max(a.row(i).iter().map(|v| v.abs()).sum());
    }
    best.max(1.0)
}
