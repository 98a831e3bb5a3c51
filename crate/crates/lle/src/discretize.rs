//! Central finite-difference discretization on the uniform periodic grid.
//!
//! Fields are packed into real vectors of length `2n` with the convention
//! `x[2j] = Re u_j`, `x[2j+1] = Im u_j`; all linearizations act on this
//! real system because the Kerr nonlinearity `|u|²u` is not
//! complex-differentiable. The Jacobian couples each node to its two
//! neighbours through 2×2 blocks plus cyclic difference bands.

use crate::model::{ModelError, Params, PeriodicField};
use crate::{Complex, TWO_PI};
use nalgebra::{DMatrix, DVector};

/// First/second central-difference stencils on the n-point periodic grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeScheme {
    n: usize,
    h: f64,
}

impl DerivativeScheme {
    pub fn new(n: usize) -> Self {
        assert!(n >= 4, "grid too small for central differences");
        DerivativeScheme {
            n,
            h: TWO_PI / n as f64,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// `(u_{j+1} - u_{j-1}) / 2h`
    pub fn d1(&self, u: &PeriodicField) -> PeriodicField {
        let n = self.n as i64;
        debug_assert_eq!(u.n(), self.n);
        PeriodicField::from_values_unchecked(
            (0..n)
                .map(|j| (u.at(j + 1) - u.at(j - 1)) / (2.0 * self.h))
                .collect(),
        )
    }

    /// `(u_{j+1} - 2 u_j + u_{j-1}) / h²`
    pub fn d2(&self, u: &PeriodicField) -> PeriodicField {
        let n = self.n as i64;
        debug_assert_eq!(u.n(), self.n);
        PeriodicField::from_values_unchecked(
            (0..n)
                .map(|j| (u.at(j + 1) - 2.0 * u.at(j) + u.at(j - 1)) / (self.h * self.h))
                .collect(),
        )
    }
}

/// Packing convention between complex fields and the real `2n` system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealSystem {
    pub n: usize,
}

impl RealSystem {
    pub fn new(n: usize) -> Self {
        RealSystem { n }
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn pack(&self, u: &PeriodicField) -> DVector<f64> {
        debug_assert_eq!(u.n(), self.n);
        let mut x = DVector::zeros(2 * self.n);
        for (j, v) in u.values().iter().enumerate() {
            x[2 * j] = v.re;
            x[2 * j + 1] = v.im;
        }
        x
    }

    pub fn unpack(&self, x: &DVector<f64>) -> PeriodicField {
        debug_assert_eq!(x.len(), 2 * self.n);
        PeriodicField::from_values_unchecked(
            (0..self.n)
                .map(|j| Complex::new(x[2 * j], x[2 * j + 1]))
                .collect(),
        )
    }
}

pub fn pack(u: &PeriodicField) -> DVector<f64> {
    RealSystem::new(u.n()).pack(u)
}

pub fn unpack(x: &DVector<f64>) -> PeriodicField {
    RealSystem::new(x.len() / 2).unpack(x)
}

/// Packed residual of the discretized traveling-wave equation.
pub fn residual_vec(p: &Params, u: &PeriodicField) -> Result<DVector<f64>, ModelError> {
    let scheme = DerivativeScheme::new(u.n());
    let r = crate::model::residual(p, u, &scheme)?;
    Ok(pack(&r))
}

/// Exact Jacobian of [`residual_vec`] at `u`, as a dense real `2n×2n`
/// matrix with banded-cyclic 2×2 block structure.
///
/// The complex-linear part `-d ∂² + iω ∂ + (ζ - i - 2|u|²)` and the
/// conjugate-linear part `-u² (·barred)` assemble per grid point as
/// 2×2 blocks; only the diagonal blocks depend on `u`.
pub fn jacobian(p: &Params, u: &PeriodicField) -> DMatrix<f64> {
    let n = u.n();
    let h = TWO_PI / n as f64;
    let mut jac = DMatrix::zeros(2 * n, 2 * n);
    let dh2 = p.d / (h * h);
    let wh = p.omega / (2.0 * h);
    for j in 0..n {
        let uj = u.values()[j];
        let rho = uj.norm_sqr();
        let u2 = uj * uj;
        // center block: 2d/h² I + [[ζ,1],[-1,ζ]] - 2ρ I - [[p,q],[q,-p]]
        let (r0, r1) = (2 * j, 2 * j + 1);
        jac[(r0, r0)] = 2.0 * dh2 + p.zeta - 2.0 * rho - u2.re;
        jac[(r0, r1)] = 1.0 - u2.im;
        jac[(r1, r0)] = -1.0 - u2.im;
        jac[(r1, r1)] = 2.0 * dh2 + p.zeta - 2.0 * rho + u2.re;
        // neighbours: -d/h² I ± iω/2h
        let jp = (j + 1) % n;
        let jm = (j + n - 1) % n;
        jac[(r0, 2 * jp)] += -dh2;
        jac[(r1, 2 * jp + 1)] += -dh2;
        jac[(r0, 2 * jp + 1)] += -wh;
        jac[(r1, 2 * jp)] += wh;
        jac[(r0, 2 * jm)] += -dh2;
        jac[(r1, 2 * jm + 1)] += -dh2;
        jac[(r0, 2 * jm + 1)] += wh;
        jac[(r1, 2 * jm)] += -wh;
    }
    jac
}

/// Packed derivative of the residual with respect to `f₁`: `i e(s)`.
pub fn dresidual_df1(p: &Params, n: usize) -> Result<DVector<f64>, ModelError> {
    let e = p.profile_values(n)?;
    let mut g = DVector::zeros(2 * n);
    for (j, ej) in e.iter().enumerate() {
        let v = Complex::new(0.0, 1.0) * ej;
        g[2 * j] = v.re;
        g[2 * j + 1] = v.im;
    }
    Ok(g)
}

/// Packed derivative of the residual with respect to `ζ`: `u`.
pub fn dresidual_dzeta(u: &PeriodicField) -> DVector<f64> {
    pack(u)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    /// `‖u‖₂ = √(h Σ |u_j|²)`, the periodic rectangle rule.
    pub l2: f64,
    /// `‖u'‖₂` with the first-derivative stencil.
    pub l2_deriv: f64,
    /// `max_j |u_j|`.
    pub linf: f64,
}

/// Discrete L², derivative-L² and sup norms of a field.
pub fn norms(u: &PeriodicField) -> Norms {
    let h = TWO_PI / u.n() as f64;
    let sum_sq: f64 = u.values().iter().map(|v| v.norm_sqr()).sum();
    let d1 = DerivativeScheme::new(u.n()).d1(u);
    let sum_sq_d: f64 = d1.values().iter().map(|v| v.norm_sqr()).sum();
    Norms {
        l2: (h * sum_sq).sqrt(),
        l2_deriv: (h * sum_sq_d).sqrt(),
        linf: u.values().iter().map(|v| v.norm()).fold(0.0, f64::max),
    }
}

/// Discrete real L² inner product `Re ∫ v w̄ ds` by the rectangle rule.
pub fn inner_real(v: &PeriodicField, w: &PeriodicField) -> f64 {
    debug_assert_eq!(v.n(), w.n());
    let h = TWO_PI / v.n() as f64;
    h * v
        .values()
        .iter()
        .zip(w.values())
        .map(|(a, b)| (a * b.conj()).re)
        .sum::<f64>()
}

/// Complex quadrature `∫ v ds` by the rectangle rule.
pub fn integral(v: &PeriodicField) -> Complex {
    let h = TWO_PI / v.n() as f64;
    v.values().iter().sum::<Complex>() * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ForcingProfile;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_field(n: usize, rng: &mut ChaCha8Rng) -> PeriodicField {
        PeriodicField::new(
            (0..n)
                .map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn stencils_on_constants_and_modes() {
        let n = 64;
        let scheme = DerivativeScheme::new(n);
        let c = PeriodicField::constant(n, Complex::new(0.3, -0.7)).unwrap();
        assert!(scheme.d1(&c).values().iter().all(|v| v.norm() == 0.0));

        // discrete symbols on exp(i m s)
        let h = scheme.h();
        for m in [1i32, 3, 7, -5] {
            let u = PeriodicField::from_fn(n, |s| Complex::from_polar(1.0, m as f64 * s)).unwrap();
            let d1 = scheme.d1(&u);
            let d2 = scheme.d2(&u);
            let sym1 = Complex::new(0.0, (m as f64 * h).sin() / h);
            let sym2 = -(2.0 - 2.0 * (m as f64 * h).cos()) / (h * h);
            for j in 0..n {
                assert!((d1.values()[j] - sym1 * u.values()[j]).norm() < 1e-12 * (1.0 + 1.0 / h));
                assert!(
                    (d2.values()[j] - sym2 * u.values()[j]).norm() < 1e-12 * (1.0 + sym2.abs())
                );
            }
        }
    }

    #[test]
    fn pack_unpack_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_field(32, &mut rng);
        let sys = RealSystem::new(32);
        assert_eq!(sys.unpack(&sys.pack(&u)), u);
        let x = sys.pack(&u);
        assert_eq!(x[0], u.values()[0].re);
        assert_eq!(x[1], u.values()[0].im);
    }

    #[test]
    fn residual_vec_on_constant_solution_is_zero() {
        let p = Params::second_harmonic(-0.1, 1.0, 1.0, 1.0, 0.0, 1);
        let u = PeriodicField::constant(64, Complex::new(1.0, 0.0)).unwrap();
        let r = residual_vec(&p, &u).unwrap();
        assert!(r.amax() < 1e-14);
    }

    #[test]
    fn residual_vec_packs_pump_term() {
        let p = Params::second_harmonic(1.0, 0.0, 0.0, 2.0, 0.0, 1);
        let u = PeriodicField::constant(16, Complex::new(0.0, 0.0)).unwrap();
        let r = residual_vec(&p, &u).unwrap();
        for j in 0..16 {
            assert_eq!(r[2 * j], 0.0);
            assert_eq!(r[2 * j + 1], 2.0);
        }
    }

    /// Manufactured solution: w(s) = exp(is) with the forcing chosen so the
    /// continuous equation holds exactly; the discrete residual must then
    /// converge at second order.
    #[test]
    fn manufactured_solution_convergence_order() {
        let (d, zeta, omega) = (-0.1, 3.0, 1.0);
        let mut errs = Vec::new();
        let sizes = [64usize, 128, 256, 512];
        for &n in &sizes {
            let w = PeriodicField::from_fn(n, |s| Complex::from_polar(1.0, s)).unwrap();
            // i f = -(-d w'' + iω w' + (ζ - i)w - |w|²w)  =>  f = i(...)
            let ftilde: Vec<Complex> = w
                .values()
                .iter()
                .map(|&wj| {
                    let x = d * wj - omega * wj + Complex::new(zeta, -1.0) * wj - wj;
                    Complex::new(0.0, 1.0) * x
                })
                .collect();
            let p =
                Params::new(d, zeta, omega, 0.0, 1.0, 1, ForcingProfile::Sampled(ftilde)).unwrap();
            let r = residual_vec(&p, &w).unwrap();
            errs.push(r.amax());
        }
        println!("manufactured errors: {:?}", errs);
        for i in 1..errs.len() {
            let order = (errs[i - 1] / errs[i]).log2();
            println!("order {} -> {}: {:.3}", sizes[i - 1], sizes[i], order);
            assert!(order > 1.9 && order < 2.1, "observed order {order}");
        }
    }

    #[test]
    fn jacobian_matches_directional_finite_differences() {
        let n = 64;
        let p = Params::second_harmonic(-0.1, 3.0, 1.0, 2.0, 0.5, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let eps = 1e-6;
        for _ in 0..50 {
            let u = random_field(n, &mut rng);
            let v = random_field(n, &mut rng);
            let jac = jacobian(&p, &u);
            let xv = pack(&v);
            let up = unpack(&(pack(&u) + eps * &xv));
            let um = unpack(&(pack(&u) - eps * &xv));
            let fd =
                (residual_vec(&p, &up).unwrap() - residual_vec(&p, &um).unwrap()) / (2.0 * eps);
            let jv = &jac * &xv;
            let err = (fd - &jv).amax();
            assert!(
                err < 1e-6 * jv.amax().max(1.0),
                "directional derivative error {err}"
            );
        }
    }

    #[test]
    fn jacobian_at_zero_field_is_linear_operator() {
        let n = 32;
        let p = Params::second_harmonic(0.5, 2.0, 0.7, 1.0, 0.2, 1);
        let u0 = PeriodicField::constant(n, Complex::new(0.0, 0.0)).unwrap();
        let jac = jacobian(&p, &u0);
        // conjugate-linear block vanishes: J agrees with -d∂² + iω∂ + (ζ - i)
        // acting on any field
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = random_field(n, &mut rng);
        let scheme = DerivativeScheme::new(n);
        let d1 = scheme.d1(&v);
        let d2 = scheme.d2(&v);
        let lv: Vec<Complex> = (0..n)
            .map(|j| {
                -p.d * d2.values()[j]
                    + Complex::new(0.0, p.omega) * d1.values()[j]
                    + Complex::new(p.zeta, -1.0) * v.values()[j]
            })
            .collect();
        let jv = &jac * pack(&v);
        for j in 0..n {
            assert!((jv[2 * j] - lv[j].re).abs() < 1e-12 * (1.0 + lv[j].norm()));
            assert!((jv[2 * j + 1] - lv[j].im).abs() < 1e-12 * (1.0 + lv[j].norm()));
        }
    }

    #[test]
    fn only_diagonal_blocks_depend_on_u() {
        let n = 24;
        let p = Params::second_harmonic(-0.1, 3.0, 1.0, 2.0, 0.5, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = random_field(n, &mut rng);
        let zero = PeriodicField::constant(n, Complex::new(0.0, 0.0)).unwrap();
        let diff = jacobian(&p, &u) - jacobian(&p, &zero);
        for r in 0..2 * n {
            for c in 0..2 * n {
                if r / 2 != c / 2 {
                    assert_eq!(diff[(r, c)], 0.0, "off-diagonal block changed at ({r},{c})");
                }
            }
        }
    }

    #[test]
    fn norm_examples() {
        let n = 256;
        let u = PeriodicField::constant(n, Complex::new(0.6, -0.8)).unwrap();
        let nm = norms(&u);
        assert_relative_eq!(nm.l2, TWO_PI.sqrt(), epsilon = 1e-13);
        assert_eq!(nm.l2_deriv, 0.0);
        assert_relative_eq!(nm.linf, 1.0, epsilon = 1e-15);

        let u = PeriodicField::from_fn(n, |s| Complex::from_polar(1.0, s)).unwrap();
        let nm = norms(&u);
        let h = TWO_PI / n as f64;
        assert_relative_eq!(nm.l2, TWO_PI.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(nm.l2_deriv, TWO_PI.sqrt() * h.sin() / h, epsilon = 1e-12);

        let z = PeriodicField::constant(n, Complex::new(0.0, 0.0)).unwrap();
        let nm = norms(&z);
        assert_eq!((nm.l2, nm.l2_deriv, nm.linf), (0.0, 0.0, 0.0));
    }

    #[test]
    fn quadrature_exact_below_nyquist() {
        let n = 64;
        for m in 1..n / 2 {
            let u = PeriodicField::from_fn(n, |s| Complex::from_polar(1.0, m as f64 * s)).unwrap();
            assert_relative_eq!(norms(&u).l2, TWO_PI.sqrt(), epsilon = 1e-12);
        }
    }
}
