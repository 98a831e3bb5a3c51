//! Exact algebra of the constant (one-pump, `f₁ = 0`) solutions: the curve
//! parametrization, the cubic for `|u₀|²`, turning points and the
//! threshold `f* = 2√2 / 27^{1/4}`, and the closed-form non-degeneracy
//! test of the linearized operator at constants.

use crate::Complex;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrivialError {
    #[error("curve parameter t = {0} outside (-1, 1)")]
    ParameterOutOfRange(f64),
}

/// One constant solution of `(ζ - i)u₀ - |u₀|²u₀ + i f₀ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrivialPoint {
    /// Curve parameter when the point came from the parametrization.
    pub t: Option<f64>,
    pub zeta: f64,
    pub u0: Complex,
    /// `|u₀|²`
    pub rho: f64,
    pub f0: f64,
}

impl TrivialPoint {
    /// Constant solution with prescribed modulus-square on the curve
    /// `ρ((ζ-ρ)² + 1) = f₀²`, taking the nonnegative pump amplitude.
    pub fn from_rho(zeta: f64, rho: f64) -> Self {
        let f0 = (rho * ((zeta - rho).powi(2) + 1.0)).sqrt();
        TrivialPoint {
            t: None,
            zeta,
            u0: u0_from_rho(zeta, f0, rho),
            rho,
            f0,
        }
    }

    /// Residual of the constant-solution equation `(ζ-i)u₀ - ρu₀ + i f₀`.
    pub fn residual(&self) -> Complex {
        (Complex::new(self.zeta, -1.0) - self.rho) * self.u0 + Complex::new(0.0, self.f0)
    }

    /// Residual of the modulus equation `ρ((ζ-ρ)² + 1) - f₀²`.
    pub fn modulus_residual(&self) -> f64 {
        self.rho * ((self.zeta - self.rho).powi(2) + 1.0) - self.f0 * self.f0
    }
}

fn u0_from_rho(zeta: f64, f0: f64, rho: f64) -> Complex {
    // u₀ = -i f₀ / (ζ - i - ρ); the denominator modulus is ≥ 1
    Complex::new(0.0, -f0) / Complex::new(zeta - rho, -1.0)
}

/// Threshold `f* = 2√2 / 27^{1/4}` separating 0 from 2 turning points.
pub fn fstar() -> f64 {
    2.0 * std::f64::consts::SQRT_2 / 27.0_f64.powf(0.25)
}

/// Point on the curve of constant solutions,
/// `ζ(t) = (1-t²)f₀² + t/√(1-t²)`, `u₀(t) = (1-t²)f₀ - i f₀ t √(1-t²)`.
pub fn param_point(t: f64, f0: f64) -> Result<TrivialPoint, TrivialError> {
    if !(t > -1.0 && t < 1.0) {
        return Err(TrivialError::ParameterOutOfRange(t));
    }
    let omt2 = 1.0 - t * t;
    let root = omt2.sqrt();
    let zeta = omt2 * f0 * f0 + t / root;
    let u0 = Complex::new(omt2 * f0, -f0 * t * root);
    Ok(TrivialPoint {
        t: Some(t),
        zeta,
        u0,
        rho: u0.norm_sqr(),
        f0,
    })
}

/// `ζ'(t) = -2t f₀² + (1-t²)^{-3/2}`, the turning-point indicator.
pub fn zeta_prime(t: f64, f0: f64) -> f64 {
    -2.0 * t * f0 * f0 + (1.0 - t * t).powf(-1.5)
}

fn zeta_second(t: f64, f0: f64) -> f64 {
    -2.0 * f0 * f0 + 3.0 * t * (1.0 - t * t).powf(-2.5)
}

/// All constant solutions at `(ζ, f₀)`: the real roots `ρ ≥ 0` of
/// `ρ³ - 2ζρ² + (ζ²+1)ρ - f₀² = 0`, sorted ascending in `ρ`.
///
/// The cubic is solved in closed form (trigonometric/Cardano) and each
/// root is polished by Newton; roots closer than `1e-8·max(1,|ζ|)` are
/// merged, which leaves 2 entries at a fold.
pub fn solve_constants(zeta: f64, f0: f64) -> Vec<TrivialPoint> {
    if f0 == 0.0 {
        return vec![TrivialPoint {
            t: None,
            zeta,
            u0: Complex::new(0.0, 0.0),
            rho: 0.0,
            f0,
        }];
    }
    let (a, b, c) = (-2.0 * zeta, zeta * zeta + 1.0, -(f0 * f0));
    let cubic = |x: f64| ((x + a) * x + b) * x + c;
    let cubic_d = |x: f64| (3.0 * x + 2.0 * a) * x + b;

    let mut roots = real_cubic_roots(a, b, c);
    for r in roots.iter_mut() {
        for _ in 0..8 {
            let d = cubic_d(*r);
            if d.abs() < 1e-300 {
                break;
            }
            let step = cubic(*r) / d;
            *r -= step;
            if step.abs() < 1e-16 * r.abs().max(1.0) {
                break;
            }
        }
    }
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let merge_tol = 1e-8 * zeta.abs().max(1.0);
    let mut out: Vec<TrivialPoint> = Vec::new();
    for r in roots {
        if r < -merge_tol {
            continue; // the modulus equation has no negative solutions
        }
        let rho = r.max(0.0);
        if out
            .last()
            .map(|p| (p.rho - rho).abs() < merge_tol)
            .unwrap_or(false)
        {
            continue;
        }
        out.push(TrivialPoint {
            t: None,
            zeta,
            u0: u0_from_rho(zeta, f0, rho),
            rho,
            f0,
        });
    }
    out
}

/// Real roots of the monic cubic `x³ + a x² + b x + c`.
fn real_cubic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let shift = -a / 3.0;
    let disc = -4.0 * p * p * p - 27.0 * q * q;
    let scale = (a.abs() + b.abs().sqrt() + c.abs().cbrt()).max(1.0);
    if p.abs() < 1e-14 * scale * scale && q.abs() < 1e-14 * scale.powi(3) {
        return vec![shift];
    }
    if disc >= 0.0 && p < 0.0 {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3)
            .map(|k| shift + m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos())
            .collect()
    } else {
        let rad = (q * q / 4.0 + p * p * p / 27.0).max(0.0).sqrt();
        let big = -q.signum() * (q.abs() / 2.0 + rad).cbrt();
        let other = if big != 0.0 { -p / (3.0 * big) } else { 0.0 };
        vec![shift + big + other]
    }
}

/// One turning point `(t, ζ, ρ)` of the trivial curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TurningPoint {
    pub t: f64,
    pub zeta: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurningPointReport {
    pub count: usize,
    /// Sorted ascending in `t` (descending in ζ).
    pub points: Vec<TurningPoint>,
    pub fstar: f64,
}

/// Turning points of the trivial curve, located as zeros of `ζ'(t)`.
///
/// `ζ'` is positive at both ends of `(-1,1)` and has a single interior
/// minimum, so it is bisected on the two monotone pieces; equality
/// `|f₀| = f*` is detected with absolute tolerance `1e-12` and yields the
/// single degenerate point.
pub fn turning_points(f0: f64) -> TurningPointReport {
    let fs = fstar();
    let af0 = f0.abs();
    let make = |t: f64| {
        let omt2 = 1.0 - t * t;
        TurningPoint {
            t,
            zeta: omt2 * f0 * f0 + t / omt2.sqrt(),
            rho: omt2 * f0 * f0,
        }
    };
    if af0 < fs - 1e-12 {
        return TurningPointReport {
            count: 0,
            points: vec![],
            fstar: fs,
        };
    }
    // interior minimum of ζ': single sign change of ζ''
    let lo = 1e-9;
    let hi = 1.0 - 1e-12;
    let tc = bisect(|t| zeta_second(t, f0), lo, hi);
    if (af0 - fs).abs() <= 1e-12 {
        return TurningPointReport {
            count: 1,
            points: vec![make(tc)],
            fstar: fs,
        };
    }
    debug_assert!(zeta_prime(tc, f0) < 0.0);
    let t1 = bisect(|t| -zeta_prime(t, f0), lo, tc);
    let t2 = bisect(|t| zeta_prime(t, f0), tc, hi);
    TurningPointReport {
        count: 2,
        points: vec![make(t1), make(t2)],
        fstar: fs,
    }
}

/// Bisection of a sign change from negative (at `lo`) to positive (at
/// `hi`), to absolute tolerance 1e-12 in the argument.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    debug_assert!(f(lo) < 0.0 && f(hi) > 0.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Nondegeneracy {
    NonDegenerate,
    /// The Fourier mode index witnessing a kernel of the linearization.
    Degenerate {
        m: u32,
    },
}

/// Closed-form non-degeneracy test of a constant solution.
///
/// For `ω ≠ 0` only the `m = 0` condition `ζ² - 4ρζ + 1 + 3ρ² ≠ 0` can
/// fail; for `ω = 0` the condition is checked for every `m` with
/// `ζ + d m²` inside the root interval `[2ρ - √(ρ²-1), 2ρ + √(ρ²-1)]`
/// (empty when `ρ < 1`). Returns the smallest violating mode.
pub fn is_nondegenerate(tp: &TrivialPoint, omega: f64, d: f64) -> Nondegeneracy {
    assert!(d != 0.0, "dispersion must be nonzero");
    let rho = tp.rho;
    let q = |x: f64| x * x - 4.0 * rho * x + 1.0 + 3.0 * rho * rho;
    let tol = |x: f64| 1e-8 * (x * x + 4.0 * rho * x.abs() + 1.0 + 3.0 * rho * rho).max(1.0);
    let vanishes = |x: f64| q(x).abs() <= tol(x);

    if vanishes(tp.zeta) {
        return Nondegeneracy::Degenerate { m: 0 };
    }
    if omega != 0.0 || rho < 1.0 {
        return Nondegeneracy::NonDegenerate;
    }
    let half = (rho * rho - 1.0).sqrt();
    let (x_lo, x_hi) = (2.0 * rho - half, 2.0 * rho + half);
    // ζ + d m² ∈ [x_lo, x_hi] bounds the scan
    let (m2_lo, m2_hi) = if d > 0.0 {
        ((x_lo - tp.zeta) / d, (x_hi - tp.zeta) / d)
    } else {
        ((x_hi - tp.zeta) / d, (x_lo - tp.zeta) / d)
    };
    if m2_hi < 0.0 {
        return Nondegeneracy::NonDegenerate;
    }
    let m_start = m2_lo.max(0.0).sqrt().floor().max(1.0) as u32;
    let m_end = (m2_hi.sqrt().ceil() as u32).saturating_add(1);
    for m in m_start..=m_end {
        let x = tp.zeta + d * (m as f64) * (m as f64);
        if vanishes(x) {
            return Nondegeneracy::Degenerate { m };
        }
    }
    Nondegeneracy::NonDegenerate
}
