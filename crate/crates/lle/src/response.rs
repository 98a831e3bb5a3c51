//! Closed-form local response of the squared L²-norm along the `f₁`
//! continuation of a constant solution: the first-order field
//! `v = α e^{ik₁s} + β e^{-ik₁s}`, the second derivative of
//! `f₁ ↦ ‖u(f₁)‖₂²` at `f₁ = 0`, and the sign map along the trivial
//! curve.
//!
//! The denominators vanish exactly at degeneracies of the constant
//! solution: `|x|² - |y|² = ζ² - 4ρζ + 1 + 3ρ²` is the mode-0 quadratic
//! (turning points), and at `ω = 0` the α/β denominators reduce to the
//! same quadratic at `ζ + d k₁²` (the mode-k₁ degeneracy).

use crate::continuation::{newton_solve, NewtonSettings, SolveError};
use crate::discretize::norms;
use crate::model::{Params, PeriodicField};
use crate::trivial::param_point;
use crate::{Complex, TWO_PI};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResponseCoefficients {
    pub alpha: Complex,
    pub beta: Complex,
    pub x: Complex,
    pub y: Complex,
    pub z: Complex,
    pub epsilon: Complex,
    /// `4π(Re(u₀ ε̄) + |α|² + |β|²)`; unreliable when `singular`.
    pub second_deriv: f64,
    /// Some denominator fell below the relative threshold `1e-10`.
    pub singular: bool,
}

/// First- and second-order response constants at a constant solution.
pub fn response_coefficients(p: &Params, u0: Complex) -> ResponseCoefficients {
    let rho = u0.norm_sqr();
    let k = p.k1 as f64;
    let dk2 = p.d * k * k;
    let wk = p.omega * k;
    let i = Complex::new(0.0, 1.0);

    let core = p.zeta + dk2 - 2.0 * rho;
    let den_scale = (core * core + wk * wk + 1.0 + rho * rho).max(1.0);
    let den_alpha = Complex::new(core * core, 0.0) - (Complex::new(wk, 1.0)).powi(2) - rho * rho;
    let den_beta = Complex::new(core * core, 0.0) - (Complex::new(wk, -1.0)).powi(2) - rho * rho;
    let alpha = -i * Complex::new(dk2 + wk + p.zeta - 2.0 * rho, 1.0) / den_alpha;
    let beta = i * u0 * u0 / den_beta;

    let x = Complex::new(p.zeta - 2.0 * rho, -1.0);
    let y = -u0 * u0;
    let z = 4.0 * u0 * (alpha.norm_sqr() + beta.norm_sqr()) + 4.0 * u0.conj() * alpha * beta;
    let den_eps = x.norm_sqr() - y.norm_sqr();
    let eps_scale = (x.norm_sqr() + y.norm_sqr()).max(1.0);
    let epsilon = (-z.conj() * y + z * x.conj()) / den_eps;

    let singular = den_alpha.norm() < 1e-10 * den_scale
        || den_beta.norm() < 1e-10 * den_scale
        || den_eps.abs() < 1e-10 * eps_scale;
    let second_deriv =
        2.0 * TWO_PI * ((u0 * epsilon.conj()).re + alpha.norm_sqr() + beta.norm_sqr());
    ResponseCoefficients {
        alpha,
        beta,
        x,
        y,
        z,
        epsilon,
        second_deriv,
        singular,
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SecondDerivComparison {
    pub analytic: f64,
    /// Central second difference of `N(f₁) = ‖u(f₁)‖₂²` from
    /// Newton-corrected solutions at `f₁ = ±δ`.
    pub numeric: f64,
    pub rel_err: f64,
    pub n_plus: f64,
    pub n_minus: f64,
    pub n_zero: f64,
}

/// Cross-check the closed-form second derivative against a central finite
/// difference, using the first-order response as Newton predictor at
/// `f₁ = ±δ`.
pub fn second_derivative_vs_numeric(
    p: &Params,
    u0: Complex,
    n: usize,
    fd_step: f64,
) -> Result<SecondDerivComparison, SolveError> {
    let rc = response_coefficients(p, u0);
    let k = p.k1 as f64;
    let settings = NewtonSettings::default();
    let mut nvals = [0.0f64; 2];
    for (slot, sign) in [(0usize, 1.0f64), (1, -1.0)] {
        let f1 = sign * fd_step;
        let guess = PeriodicField::from_fn(n, |s| {
            u0 + f1
                * (rc.alpha * Complex::from_polar(1.0, k * s)
                    + rc.beta * Complex::from_polar(1.0, -k * s))
        })
        .expect("grid");
        let sol = newton_solve(&p.with_f1(f1), &guess, &settings)?;
        let l2 = norms(&sol).l2;
        nvals[slot] = l2 * l2;
    }
    let n_zero = TWO_PI * u0.norm_sqr();
    let numeric = (nvals[0] - 2.0 * n_zero + nvals[1]) / (fd_step * fd_step);
    let rel_err = (rc.second_deriv - numeric).abs() / rc.second_deriv.abs().max(1.0);
    Ok(SecondDerivComparison {
        analytic: rc.second_deriv,
        numeric,
        rel_err,
        n_plus: nvals[0],
        n_minus: nvals[1],
        n_zero,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SignMapPoint {
    pub t: f64,
    pub zeta: f64,
    pub rho: f64,
    /// `±∞` at singular points, signed by the one-sided limit from below
    /// in `t`.
    pub second_deriv: f64,
    pub sign: i8,
    pub singular: bool,
}

/// Sign of the second derivative along the trivial curve, one entry per
/// grid value of `t`. Grid points are evaluated in parallel.
pub fn sign_map(f0: f64, d: f64, omega: f64, k1: u32, t_grid: &[f64]) -> Vec<SignMapPoint> {
    t_grid
        .par_iter()
        .map(|&t| {
            let tp = param_point(t, f0).expect("t inside (-1,1)");
            let p = Params::second_harmonic(d, tp.zeta, omega, f0, 0.0, k1);
            let rc = response_coefficients(&p, tp.u0);
            if rc.singular {
                // one-sided limit along the curve from below
                let side = param_point(t - 1e-6, f0)
                    .map(|sp| {
                        response_coefficients(
                            &Params::second_harmonic(d, sp.zeta, omega, f0, 0.0, k1),
                            sp.u0,
                        )
                        .second_deriv
                    })
                    .unwrap_or(f64::NAN);
                let inf = if side >= 0.0 {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                };
                SignMapPoint {
                    t,
                    zeta: tp.zeta,
                    rho: tp.rho,
                    second_deriv: inf,
                    sign: if side >= 0.0 { 1 } else { -1 },
                    singular: true,
                }
            } else {
                SignMapPoint {
                    t,
                    zeta: tp.zeta,
                    rho: tp.rho,
                    second_deriv: rc.second_deriv,
                    sign: if rc.second_deriv > 0.0 {
                        1
                    } else if rc.second_deriv < 0.0 {
                        -1
                    } else {
                        0
                    },
                    singular: false,
                }
            }
        })
        .collect()
}

pub fn sign_map_csv_header() -> &'static str {
    "t,zeta,rho,second_deriv,sign,singular"
}

pub fn write_sign_map_csv<W: Write>(out: &mut W, points: &[SignMapPoint]) -> std::io::Result<()> {
    writeln!(out, "{}", sign_map_csv_header())?;
    for pt in points {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            pt.t, pt.zeta, pt.rho, pt.second_deriv, pt.sign, pt.singular
        )?;
    }
    Ok(())
}

/// One sign change of the second derivative along the trivial curve:
/// either a zero crossing or a pole flip (the ±∞ transition at a turning
/// point).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignChange {
    pub t: f64,
    pub zeta: f64,
    pub pole: bool,
}

/// All sign changes of the second derivative along the trivial curve,
/// located by scanning a `t` grid and bisecting each change. A change is
/// classified as a pole flip when the response is singular or diverging
/// at the bisected point.
pub fn sign_changes(f0: f64, d: f64, omega: f64, k1: u32, t_samples: usize) -> Vec<SignChange> {
    let eval = |t: f64| {
        let tp = param_point(t, f0).unwrap();
        let p = Params::second_harmonic(d, tp.zeta, omega, f0, 0.0, k1);
        response_coefficients(&p, tp.u0)
    };
    let ts: Vec<f64> = (0..t_samples)
        .map(|i| -0.999 + 1.998 * i as f64 / (t_samples - 1) as f64)
        .collect();
    let mut changes = Vec::new();
    for w in ts.windows(2) {
        let (a, b) = (eval(w[0]), eval(w[1]));
        if a.singular || b.singular {
            continue;
        }
        if a.second_deriv.signum() != b.second_deriv.signum() {
            let (mut lo, mut hi) = (w[0], w[1]);
            let flo = a.second_deriv;
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let fmid = eval(mid).second_deriv;
                if flo.signum() == fmid.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t_star = 0.5 * (lo + hi);
            let at = eval(t_star);
            changes.push(SignChange {
                t: t_star,
                zeta: param_point(t_star, f0).unwrap().zeta,
                pole: at.singular || at.second_deriv.abs() > 1e4,
            });
        }
    }
    changes
}
