//! Model parameters, forcing profiles, periodic fields and the continuous
//! residual of the traveling-wave equation.

use crate::discretize::DerivativeScheme;
use crate::{Complex, TWO_PI};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dispersion coefficient d must be nonzero")]
    ZeroDispersion,
    #[error("pump mode index k1 must be >= 1")]
    InvalidModeIndex,
    #[error("grid size {0} invalid: need n >= 8 and n even")]
    InvalidGridSize(usize),
    #[error("grid size {field} does not match sampled forcing length {forcing}")]
    GridMismatch { field: usize, forcing: usize },
    #[error("sampled forcing queried off-grid at s = {0}; interpolation is forbidden")]
    OffGridQuery(f64),
    #[error("grid size {n} not divisible by 2 k1 = {two_k1}; shift is not a grid rotation")]
    IndivisibleShift { n: usize, two_k1: usize },
    #[error("forcing profile violates the half-period antisymmetry e(s + pi/k1) = -e(s)")]
    NotAntisymmetric,
}

/// Second-pump spatial profile `e(s)`.
///
/// The default is `e(s) = exp(i k₁ s)`, which satisfies the half-period
/// antisymmetry `e(s + π/k₁) = -e(s)` exactly. Sampled profiles are
/// nearest-node exact only; they are never interpolated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ForcingProfile {
    SecondHarmonic,
    Sampled(Vec<Complex>),
}

/// All model constants of the traveling-wave equation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Params {
    /// Dispersion coefficient, nonzero; `d < 0` is normal, `d > 0` anomalous.
    pub d: f64,
    /// Detuning ζ.
    pub zeta: f64,
    /// Drift speed ω of the traveling frame.
    pub omega: f64,
    /// First pump amplitude.
    pub f0: f64,
    /// Second pump amplitude.
    pub f1: f64,
    /// Second pump mode index, `k1 >= 1`.
    pub k1: u32,
    pub forcing: ForcingProfile,
}

impl Params {
    pub fn new(
        d: f64,
        zeta: f64,
        omega: f64,
        f0: f64,
        f1: f64,
        k1: u32,
        forcing: ForcingProfile,
    ) -> Result<Self, ModelError> {
        if d == 0.0 || !d.is_finite() {
            return Err(ModelError::ZeroDispersion);
        }
        if k1 < 1 {
            return Err(ModelError::InvalidModeIndex);
        }
        Ok(Params {
            d,
            zeta,
            omega,
            f0,
            f1,
            k1,
            forcing,
        })
    }

    /// Second-harmonic parameter set, the configuration of the dual-pump
    /// experiments.
    pub fn second_harmonic(d: f64, zeta: f64, omega: f64, f0: f64, f1: f64, k1: u32) -> Self {
        Params::new(d, zeta, omega, f0, f1, k1, ForcingProfile::SecondHarmonic)
            .expect("invalid parameters")
    }

    pub fn with_f1(&self, f1: f64) -> Self {
        Params { f1, ..self.clone() }
    }

    pub fn with_zeta(&self, zeta: f64) -> Self {
        Params {
            zeta,
            ..self.clone()
        }
    }

    /// Pump term `f(s) = f₀ + f₁ e(s)`.
    ///
    /// Sampled profiles may only be queried at their own nodes.
    pub fn eval_forcing(&self, s: f64) -> Result<Complex, ModelError> {
        match &self.forcing {
            ForcingProfile::SecondHarmonic => {
                Ok(Complex::new(self.f0, 0.0)
                    + self.f1 * Complex::from_polar(1.0, self.k1 as f64 * s))
            }
            ForcingProfile::Sampled(e) => {
                let m = e.len() as f64;
                let x = s * m / TWO_PI;
                let j = x.round();
                if (x - j).abs() > 1e-9 {
                    return Err(ModelError::OffGridQuery(s));
                }
                let idx = (j as i64).rem_euclid(e.len() as i64) as usize;
                Ok(Complex::new(self.f0, 0.0) + self.f1 * e[idx])
            }
        }
    }

    /// Pump term on the uniform n-point grid.
    pub fn forcing_values(&self, n: usize) -> Result<Vec<Complex>, ModelError> {
        match &self.forcing {
            ForcingProfile::SecondHarmonic => Ok((0..n)
                .map(|j| {
                    Complex::new(self.f0, 0.0)
                        + self.f1
                            * Complex::from_polar(
                                1.0,
                                self.k1 as f64 * TWO_PI * j as f64 / n as f64,
                            )
                })
                .collect()),
            ForcingProfile::Sampled(e) => {
                if e.len() != n {
                    return Err(ModelError::GridMismatch {
                        field: n,
                        forcing: e.len(),
                    });
                }
                Ok(e.iter()
                    .map(|&ej| Complex::new(self.f0, 0.0) + self.f1 * ej)
                    .collect())
            }
        }
    }

    /// Profile values `e(s_j)` on the grid (without the pump amplitudes).
    pub fn profile_values(&self, n: usize) -> Result<Vec<Complex>, ModelError> {
        match &self.forcing {
            ForcingProfile::SecondHarmonic => Ok((0..n)
                .map(|j| Complex::from_polar(1.0, self.k1 as f64 * TWO_PI * j as f64 / n as f64))
                .collect()),
            ForcingProfile::Sampled(e) => {
                if e.len() != n {
                    return Err(ModelError::GridMismatch {
                        field: n,
                        forcing: e.len(),
                    });
                }
                Ok(e.clone())
            }
        }
    }
}

/// Complex-valued function on the uniform periodic grid `s_j = 2π j / n`.
///
/// Index arithmetic wraps modulo `n`; `n` is kept even and at least 8 so
/// that Nyquist handling and half-period shifts stay exact.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicField {
    values: Vec<Complex>,
}

impl PeriodicField {
    pub fn new(values: Vec<Complex>) -> Result<Self, ModelError> {
        let n = values.len();
        if n < 8 || n % 2 != 0 {
            return Err(ModelError::InvalidGridSize(n));
        }
        Ok(PeriodicField { values })
    }

    pub fn constant(n: usize, value: Complex) -> Result<Self, ModelError> {
        PeriodicField::new(vec![value; n])
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> Complex) -> Result<Self, ModelError> {
        PeriodicField::new((0..n).map(|j| f(TWO_PI * j as f64 / n as f64)).collect())
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Complex] {
        &self.values
    }

    /// Value at grid index `j`, wrapping modulo `n`.
    pub fn at(&self, j: i64) -> Complex {
        let n = self.values.len() as i64;
        self.values[j.rem_euclid(n) as usize]
    }

    /// Grid rotation by `m` nodes: result(s) = self(s + m h).
    pub fn rotated(&self, m: i64) -> Self {
        let n = self.values.len() as i64;
        PeriodicField {
            values: (0..n).map(|j| self.at(j + m)).collect(),
        }
    }

    /// Reflection about the center `M h / 2`: result_j = self_{(M - j) mod n}.
    pub fn reflected(&self, center_index: i64) -> Self {
        let n = self.values.len() as i64;
        PeriodicField {
            values: (0..n).map(|j| self.at(center_index - j)).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(Complex) -> Complex) -> Self {
        PeriodicField {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub(crate) fn from_values_unchecked(values: Vec<Complex>) -> Self {
        PeriodicField { values }
    }
}

/// Physical two-pump detunings, before the moving-frame reduction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalDetunings {
    pub zeta: f64,
    pub zeta1: f64,
    pub d: f64,
    pub k1: u32,
}

/// Drift speed ω = ν₁/k₁ with ν₁ = ζ - ζ₁ + d k₁².
pub fn omega_from_detunings(pd: &PhysicalDetunings) -> f64 {
    let k1 = pd.k1 as f64;
    (pd.zeta - pd.zeta1 + pd.d * k1 * k1) / k1
}

/// Pointwise residual of the traveling-wave equation on the grid,
/// `-d u'' + iω u' + (ζ - i) u - |u|² u + i f`, with the supplied
/// finite-difference stencils.
pub fn residual(
    p: &Params,
    u: &PeriodicField,
    derivs: &DerivativeScheme,
) -> Result<PeriodicField, ModelError> {
    let n = u.n();
    assert_eq!(derivs.n(), n, "derivative scheme grid size mismatch");
    let f = p.forcing_values(n)?;
    let d1 = derivs.d1(u);
    let d2 = derivs.d2(u);
    let i = Complex::new(0.0, 1.0);
    let zeta_m_i = Complex::new(p.zeta, -1.0);
    let values = (0..n)
        .map(|j| {
            let uj = u.values()[j];
            -p.d * d2.values()[j] + i * p.omega * d1.values()[j] + zeta_m_i * uj
                - uj.norm_sqr() * uj
                + i * f[j]
        })
        .collect();
    Ok(PeriodicField::from_values_unchecked(values))
}

/// The reflection `R: (f₁, u) ↦ (-f₁, u(· + π/k₁))`.
///
/// Requires the half-period antisymmetry of the profile and `n` divisible
/// by `2 k₁` so the shift is an exact index rotation. Solutions map to
/// solutions.
pub fn apply_r(p: &Params, f1: f64, u: &PeriodicField) -> Result<(f64, PeriodicField), ModelError> {
    let n = u.n();
    let two_k1 = 2 * p.k1 as usize;
    if n % two_k1 != 0 {
        return Err(ModelError::IndivisibleShift { n, two_k1 });
    }
    let shift = (n / two_k1) as i64;
    if let ForcingProfile::Sampled(e) = &p.forcing {
        if e.len() != n {
            return Err(ModelError::GridMismatch {
                field: n,
                forcing: e.len(),
            });
        }
        let scale = e.iter().map(|v| v.norm()).fold(0.0f64, f64::max).max(1.0);
        for j in 0..n {
            if (e[(j + shift as usize) % n] + e[j]).norm() > 1e-12 * scale {
                return Err(ModelError::NotAntisymmetric);
            }
        }
    }
    Ok((-f1, u.rotated(shift)))
}
