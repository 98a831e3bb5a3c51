//! Damped Newton corrector and pseudo-arclength predictor-corrector
//! branch tracing in `f₁` or `ζ`.
//!
//! The corrector always works on the bordered system (residual plus
//! arclength hyperplane), including through `f₁ = 0` where nontrivial
//! solutions make the plain Jacobian singular along the shift direction;
//! the bordering row generically removes the rank deficiency and the
//! smallest singular value is recorded per point so near-singular
//! passages can be flagged afterwards. No phase condition is imposed: for
//! `f₁ ≠ 0` the forcing breaks translation invariance, and at isolated
//! `f₁ = 0` crossings the bordered system suffices.
//!
//! Arclength uses the grid-independent metric
//! `‖(u, q)‖² = ‖u‖₂²/(2π) + q²`, i.e. weight `1/n` on the packed state.

use crate::discretize::{self, jacobian, pack, unpack};
use crate::linalg::{self, LuPair};
use crate::model::{ModelError, Params, PeriodicField};
use crate::trivial::TrivialPoint;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("Newton did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("Jacobian numerically singular (pivot below threshold)")]
    SingularJacobian,
    #[error("bordered continuation system singular")]
    SingularBordered,
    #[error("start point is not a converged solution (residual {0:.3e})")]
    BadStart(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Settings of the damped Newton corrector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewtonSettings {
    /// Convergence threshold on the packed residual 2-norm, scaled by √n.
    pub tol_residual: f64,
    pub max_iter: usize,
    /// Backtracking factor of the damping line search.
    pub backtrack: f64,
    /// Smallest admissible damping before an iteration counts as failed.
    pub min_damping: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            tol_residual: 1e-10,
            max_iter: 25,
            backtrack: 0.5,
            min_damping: (2.0_f64).powi(-10),
        }
    }
}

/// Damped Newton at fixed parameters.
///
/// A step (possibly backtracked by powers of `backtrack`) is accepted only
/// if it reduces the packed residual norm; convergence means
/// `‖R‖₂ ≤ tol_residual·√n`.
pub fn newton_solve(
    p: &Params,
    u_init: &PeriodicField,
    settings: &NewtonSettings,
) -> Result<PeriodicField, SolveError> {
    let n = u_init.n();
    let tol = settings.tol_residual * (n as f64).sqrt();
    let mut x = pack(u_init);
    let mut r = discretize::residual_vec(p, &unpack(&x))?;
    let mut rn = r.norm();
    for it in 0..settings.max_iter {
        if rn <= tol {
            return Ok(unpack(&x));
        }
        let jac = jacobian(p, &unpack(&x));
        let lu = jac.clone().lu();
        let pivot_floor = 1e-14 * jac.amax();
        if lu.u().diagonal().iter().any(|d| d.abs() < pivot_floor) {
            return Err(SolveError::SingularJacobian);
        }
        let delta = lu.solve(&(-&r)).ok_or(SolveError::SingularJacobian)?;
        if delta.iter().any(|v| !v.is_finite()) {
            return Err(SolveError::SingularJacobian);
        }
        let mut damping = 1.0;
        loop {
            let x_try = &x + damping * &delta;
            let r_try = discretize::residual_vec(p, &unpack(&x_try))?;
            let rn_try = r_try.norm();
            if rn_try.is_finite() && rn_try < rn {
                x = x_try;
                r = r_try;
                rn = rn_try;
                break;
            }
            damping *= settings.backtrack;
            if damping < settings.min_damping {
                return Err(SolveError::NonConvergence {
                    iterations: it + 1,
                    residual: rn,
                });
            }
        }
    }
    if rn <= tol {
        Ok(unpack(&x))
    } else {
        Err(SolveError::NonConvergence {
            iterations: settings.max_iter,
            residual: rn,
        })
    }
}

/// Which scalar the branch is continued in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ContinuationParam {
    F1,
    Zeta,
}

impl ContinuationParam {
    pub fn name(&self) -> &'static str {
        match self {
            ContinuationParam::F1 => "f1",
            ContinuationParam::Zeta => "zeta",
        }
    }

    pub fn get(&self, p: &Params) -> f64 {
        match self {
            ContinuationParam::F1 => p.f1,
            ContinuationParam::Zeta => p.zeta,
        }
    }

    pub fn set(&self, p: &Params, value: f64) -> Params {
        match self {
            ContinuationParam::F1 => p.with_f1(value),
            ContinuationParam::Zeta => p.with_zeta(value),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationSettings {
    pub param: ContinuationParam,
    /// Initial arclength step.
    pub ds0: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub max_steps: usize,
    /// Loop-closure tolerance in the combined parameter + state metric.
    pub loop_tol: f64,
    /// Direction of the first step in the parameter component, ±1.
    pub initial_direction: f64,
    pub param_min: f64,
    pub param_max: f64,
    pub newton: NewtonSettings,
    /// Record the smallest singular value of the plain Jacobian per point.
    pub track_min_sv: bool,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        ContinuationSettings {
            param: ContinuationParam::F1,
            ds0: 0.01,
            ds_min: 1e-5,
            ds_max: 0.1,
            max_steps: 2000,
            loop_tol: 1e-6,
            initial_direction: 1.0,
            param_min: f64::NEG_INFINITY,
            param_max: f64::INFINITY,
            newton: NewtonSettings::default(),
            track_min_sv: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BranchEvent {
    FoldDetected,
    F1ZeroCrossing,
    LoopClosed,
}

#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub param_value: f64,
    pub u: PeriodicField,
    /// `‖u‖₂²/(2π)`, the quantity the solution diagrams plot.
    pub norm_sq_over_2pi: f64,
    /// Cumulative arclength along the branch.
    pub arclength: f64,
    /// Smallest singular value of the plain Jacobian (NaN if not tracked).
    pub min_sv: f64,
    pub events: Vec<BranchEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Termination {
    MaxSteps,
    ParamBound,
    LoopClosed,
    CorrectorFailure { at_step: usize, detail: String },
    SingularBordered { at_step: usize },
}

#[derive(Debug, Clone)]
pub struct Branch {
    /// The scalar this branch is continued in.
    pub param: ContinuationParam,
    pub points: Vec<BranchPoint>,
    pub closed: bool,
    /// Starting point descriptor.
    pub provenance: String,
    pub termination: Termination,
}

impl Branch {
    pub fn param_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for pt in &self.points {
            lo = lo.min(pt.param_value);
            hi = hi.max(pt.param_value);
        }
        (lo, hi)
    }

    /// Points flagged as `f₁ = 0` crossings (including the closing point
    /// when the branch is a loop through the start).
    pub fn zero_crossings(&self) -> Vec<&BranchPoint> {
        self.points
            .iter()
            .filter(|pt| pt.events.contains(&BranchEvent::F1ZeroCrossing))
            .collect()
    }

    pub fn csv_header() -> &'static str {
        "branch_id,step,param_name,param_value,zeta,norm_sq_over_2pi,arclength,min_sv,events"
    }

    /// CSV serialization, one row per point. Numbers use the shortest
    /// round-trip representation.
    pub fn write_csv<W: Write>(
        &self,
        out: &mut W,
        branch_id: &str,
        p: &Params,
    ) -> std::io::Result<()> {
        for (step, pt) in self.points.iter().enumerate() {
            let zeta = match self.param {
                ContinuationParam::Zeta => pt.param_value,
                ContinuationParam::F1 => p.zeta,
            };
            let events = pt
                .events
                .iter()
                .map(|e| match e {
                    BranchEvent::FoldDetected => "fold",
                    BranchEvent::F1ZeroCrossing => "f1zero",
                    BranchEvent::LoopClosed => "loop",
                })
                .collect::<Vec<_>>()
                .join("|");
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                branch_id,
                step,
                self.param.name(),
                pt.param_value,
                zeta,
                pt.norm_sq_over_2pi,
                pt.arclength,
                pt.min_sv,
                events
            )?;
        }
        Ok(())
    }

    /// Per-point field snapshots as JSON `[re, im]` pairs with metadata.
    pub fn fields_json(&self, p: &Params) -> serde_json::Value {
        let points: Vec<serde_json::Value> = self
            .points
            .iter()
            .map(|pt| {
                let u: Vec<[f64; 2]> = pt.u.values().iter().map(|v| [v.re, v.im]).collect();
                serde_json::json!({ "param_value": pt.param_value, "u": u })
            })
            .collect();
        serde_json::json!({
            "n": self.points.first().map(|pt| pt.u.n()).unwrap_or(0),
            "params": p,
            "provenance": self.provenance,
            "closed": self.closed,
            "points": points,
        })
    }
}

/// Extended point of the continuation system: packed state plus parameter.
#[derive(Clone)]
struct ExtPoint {
    x: DVector<f64>,
    q: f64,
}

#[derive(Clone)]
struct Tangent {
    x: DVector<f64>,
    q: f64,
}

struct Tracer<'a> {
    base: &'a Params,
    which: ContinuationParam,
    settings: &'a ContinuationSettings,
    n: usize,
    w: f64,
    /// ∂R/∂f₁ is state-independent; cached for `f₁` continuation.
    g_f1: Option<DVector<f64>>,
}

impl<'a> Tracer<'a> {
    fn new(
        base: &'a Params,
        settings: &'a ContinuationSettings,
        n: usize,
    ) -> Result<Self, SolveError> {
        let g_f1 = match settings.param {
            ContinuationParam::F1 => Some(discretize::dresidual_df1(base, n)?),
            ContinuationParam::Zeta => None,
        };
        Ok(Tracer {
            base,
            which: settings.param,
            settings,
            n,
            w: 1.0 / n as f64,
            g_f1,
        })
    }

    fn params_at(&self, q: f64) -> Params {
        self.which.set(self.base, q)
    }

    fn residual(&self, y: &ExtPoint) -> Result<DVector<f64>, SolveError> {
        Ok(discretize::residual_vec(
            &self.params_at(y.q),
            &unpack(&y.x),
        )?)
    }

    fn dparam(&self, y: &ExtPoint) -> DVector<f64> {
        match self.which {
            ContinuationParam::F1 => self.g_f1.as_ref().unwrap().clone(),
            ContinuationParam::Zeta => y.x.clone(),
        }
    }

    fn m_dot(&self, ax: &DVector<f64>, aq: f64, bx: &DVector<f64>, bq: f64) -> f64 {
        self.w * ax.dot(bx) + aq * bq
    }

    fn dist(&self, a: &ExtPoint, b: &ExtPoint) -> f64 {
        let dx = &a.x - &b.x;
        let dq = a.q - b.q;
        self.m_dot(&dx, dq, &dx, dq).sqrt()
    }

    fn bordered(&self, y: &ExtPoint, t: &Tangent) -> DMatrix<f64> {
        let dim = 2 * self.n;
        let jac = jacobian(&self.params_at(y.q), &unpack(&y.x));
        let g = self.dparam(y);
        let mut a = DMatrix::zeros(dim + 1, dim + 1);
        a.view_mut((0, 0), (dim, dim)).copy_from(&jac);
        for i in 0..dim {
            a[(i, dim)] = g[i];
            a[(dim, i)] = self.w * t.x[i];
        }
        a[(dim, dim)] = t.q;
        a
    }

    /// Unit tangent of the solution curve at `y`, oriented along `prev`.
    fn tangent(&self, y: &ExtPoint, prev: &Tangent) -> Result<Tangent, SolveError> {
        let dim = 2 * self.n;
        let a = self.bordered(y, prev);
        let mut b = DVector::zeros(dim + 1);
        b[dim] = 1.0;
        let t = a.lu().solve(&b).ok_or(SolveError::SingularBordered)?;
        if t.iter().any(|v| !v.is_finite()) {
            return Err(SolveError::SingularBordered);
        }
        let tx = DVector::from_column_slice(&t.as_slice()[..dim]);
        let tq = t[dim];
        let nrm = self.m_dot(&tx, tq, &tx, tq).sqrt();
        if !(nrm > 0.0) || !nrm.is_finite() {
            return Err(SolveError::SingularBordered);
        }
        let mut tan = Tangent {
            x: tx / nrm,
            q: tq / nrm,
        };
        if self.m_dot(&tan.x, tan.q, &prev.x, prev.q) < 0.0 {
            tan.x = -tan.x;
            tan.q = -tan.q;
        }
        Ok(tan)
    }

    /// Newton on the bordered system: residual plus the hyperplane through
    /// `pred` perpendicular (in the arclength metric) to `t`.
    fn correct(&self, pred: &ExtPoint, t: &Tangent) -> Result<(ExtPoint, usize), SolveError> {
        let dim = 2 * self.n;
        let tol = self.settings.newton.tol_residual * (self.n as f64).sqrt();
        let mut y = pred.clone();
        for it in 0..self.settings.newton.max_iter {
            let r = self.residual(&y)?;
            let dx = &y.x - &pred.x;
            let con = self.m_dot(&t.x, t.q, &dx, y.q - pred.q);
            if r.norm() <= tol && con.abs() <= 1e-10 {
                return Ok((y, it));
            }
            let a = self.bordered(&y, t);
            let mut b = DVector::zeros(dim + 1);
            for i in 0..dim {
                b[i] = -r[i];
            }
            b[dim] = -con;
            let delta = a.lu().solve(&b).ok_or(SolveError::SingularBordered)?;
            if delta.iter().any(|v| !v.is_finite()) {
                return Err(SolveError::SingularBordered);
            }
            for i in 0..dim {
                y.x[i] += delta[i];
            }
            y.q += delta[dim];
        }
        let rn = self.residual(&y)?.norm();
        Err(SolveError::NonConvergence {
            iterations: self.settings.newton.max_iter,
            residual: rn,
        })
    }

    /// Corrected curve point at local arclength `s` from `base` along `t`.
    fn curve_point(&self, base: &ExtPoint, t: &Tangent, s: f64) -> Result<ExtPoint, SolveError> {
        let pred = ExtPoint {
            x: &base.x + s * &t.x,
            q: base.q + s * t.q,
        };
        Ok(self.correct(&pred, t)?.0)
    }

    fn min_sv(&self, y: &ExtPoint) -> f64 {
        if !self.settings.track_min_sv {
            return f64::NAN;
        }
        let jac = jacobian(&self.params_at(y.q), &unpack(&y.x));
        let lu = LuPair::new(&jac);
        linalg::smallest_singular_value(&lu, 2 * self.n)
    }

    fn branch_point(&self, y: &ExtPoint, arclength: f64, events: Vec<BranchEvent>) -> BranchPoint {
        let u = unpack(&y.x);
        let norm_sq_over_2pi = y.x.norm_squared() / self.n as f64;
        BranchPoint {
            param_value: y.q,
            u,
            norm_sq_over_2pi,
            arclength,
            min_sv: self.min_sv(y),
            events,
        }
    }
}

/// Regula falsi with the Illinois anti-stagnation rule on a bracketed
/// scalar function; returns an abscissa with `|f| ≤ tol_f`, or the better
/// bracket end after `max_iter` evaluations.
fn illinois(
    mut f: impl FnMut(f64) -> Result<f64, SolveError>,
    mut a: f64,
    mut fa: f64,
    mut b: f64,
    mut fb: f64,
    tol_f: f64,
    max_iter: usize,
) -> Result<f64, SolveError> {
    debug_assert!(fa * fb <= 0.0);
    let mut side = 0i32;
    for _ in 0..max_iter {
        if fa.abs() <= tol_f {
            return Ok(a);
        }
        if fb.abs() <= tol_f {
            return Ok(b);
        }
        let denom = fb - fa;
        let c = if denom.abs() > 0.0 {
            b - fb * (b - a) / denom
        } else {
            0.5 * (a + b)
        };
        let c = c.clamp(a.min(b), a.max(b));
        let fc = f(c)?;
        if fc.abs() <= tol_f {
            return Ok(c);
        }
        if fa * fc < 0.0 {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Ok(if fa.abs() < fb.abs() { a } else { b })
}

/// Trace one branch from a converged start by pseudo-arclength
/// continuation.
///
/// The start parameter value is read from `p` through the continued
/// scalar. Folds are refined to the point where the tangent parameter
/// component vanishes; `f₁ = 0` crossings are refined by bracketed
/// iteration to `|f₁| < 1e-10` and inserted as flagged points; the branch
/// closes when it returns within `loop_tol` of the start after arclength
/// `10·ds0`. The step halves on corrector failure and grows by 1.3 after
/// convergence in at most 3 iterations.
pub fn trace_branch(
    p: &Params,
    start: &PeriodicField,
    settings: &ContinuationSettings,
) -> Result<Branch, SolveError> {
    let n = start.n();
    let tracer = Tracer::new(p, settings, n)?;
    let tol = settings.newton.tol_residual * (n as f64).sqrt();
    let y0 = ExtPoint {
        x: pack(start),
        q: settings.param.get(p),
    };
    let r0 = tracer.residual(&y0)?.norm();
    if r0 > tol {
        return Err(SolveError::BadStart(r0));
    }
    let provenance = format!(
        "start {}={} zeta={} norm2/2pi={:.6} dir={:+}",
        settings.param.name(),
        y0.q,
        p.zeta,
        y0.x.norm_squared() / n as f64,
        settings.initial_direction
    );

    let seed_tangent = Tangent {
        x: DVector::zeros(2 * n),
        q: settings.initial_direction,
    };
    let mut tan = tracer.tangent(&y0, &seed_tangent)?;
    let start_tan = tan.clone();

    let mut points = vec![tracer.branch_point(&y0, 0.0, vec![])];
    let mut y = y0.clone();
    let mut ds = settings.ds0;
    let mut arclen = 0.0;
    let mut closed = false;
    let mut termination = Termination::MaxSteps;

    for step in 0..settings.max_steps {
        let mut accepted: Option<(ExtPoint, usize)> = None;
        let mut last_err: Option<SolveError> = None;
        while ds >= settings.ds_min {
            let pred = ExtPoint {
                x: &y.x + ds * &tan.x,
                q: y.q + ds * tan.q,
            };
            match tracer.correct(&pred, &tan) {
                Ok(res) => {
                    accepted = Some(res);
                    break;
                }
                Err(e @ SolveError::Model(_)) => return Err(e),
                Err(e) => {
                    last_err = Some(e);
                    ds *= 0.5;
                }
            }
        }
        let (y_new, iters) = match accepted {
            Some(v) => v,
            None => {
                termination = Termination::CorrectorFailure {
                    at_step: step,
                    detail: last_err.map(|e| e.to_string()).unwrap_or_default(),
                };
                break;
            }
        };
        let tan_new = match tracer.tangent(&y_new, &tan) {
            Ok(t) => t,
            Err(_) => {
                termination = Termination::SingularBordered { at_step: step };
                break;
            }
        };

        let seg_len = tracer.dist(&y, &y_new);

        // fold: the tangent parameter component changes sign
        if tan.q != 0.0 && tan_new.q.signum() != tan.q.signum() {
            let base = y.clone();
            let tan_seg = tan.clone();
            let fold_s = illinois(
                |s| {
                    let yp = tracer.curve_point(&base, &tan_seg, s)?;
                    Ok(tracer.tangent(&yp, &tan_seg)?.q)
                },
                0.0,
                tan.q,
                seg_len,
                tan_new.q,
                1e-9,
                40,
            );
            if let Ok(s) = fold_s {
                if let Ok(yf) = tracer.curve_point(&y, &tan, s) {
                    let arc = arclen + tracer.dist(&y, &yf);
                    points.push(tracer.branch_point(&yf, arc, vec![BranchEvent::FoldDetected]));
                }
            }
        }

        // f₁ = 0 crossing, refined to |f₁| < 1e-10 before being recorded
        if settings.param == ContinuationParam::F1 && y.q * y_new.q < 0.0 {
            let base = y.clone();
            let tan_seg = tan.clone();
            let cross_s = illinois(
                |s| Ok(tracer.curve_point(&base, &tan_seg, s)?.q),
                0.0,
                y.q,
                seg_len,
                y_new.q,
                1e-10,
                60,
            );
            if let Ok(s) = cross_s {
                if let Ok(yc) = tracer.curve_point(&y, &tan, s) {
                    let arc = arclen + tracer.dist(&y, &yc);
                    points.push(tracer.branch_point(&yc, arc, vec![BranchEvent::F1ZeroCrossing]));
                }
            }
        }

        arclen += seg_len;
        y = y_new;
        tan = tan_new;
        points.push(tracer.branch_point(&y, arclen, Vec::new()));

        // loop closure: near the start, moving in the start direction
        if arclen > 10.0 * settings.ds0
            && tracer.dist(&y, &y0) < (1.5 * ds).max(settings.loop_tol)
            && tracer.m_dot(&tan.x, tan.q, &start_tan.x, start_tan.q) > 0.5
        {
            if let Ok((yc, _)) = tracer.correct(&y0, &tan) {
                if tracer.dist(&yc, &y0) <= settings.loop_tol {
                    arclen += tracer.dist(&y, &yc);
                    let mut evs = vec![BranchEvent::LoopClosed];
                    if settings.param == ContinuationParam::F1 && yc.q.abs() < 1e-8 {
                        evs.push(BranchEvent::F1ZeroCrossing);
                    }
                    points.push(tracer.branch_point(&yc, arclen, evs));
                    closed = true;
                    termination = Termination::LoopClosed;
                    break;
                }
            }
        }

        if y.q < settings.param_min || y.q > settings.param_max {
            termination = Termination::ParamBound;
            break;
        }

        if iters <= 3 {
            ds = (ds * 1.3).min(settings.ds_max);
        }
    }

    Ok(Branch {
        param: settings.param,
        points,
        closed,
        provenance,
        termination,
    })
}

/// Two-sided trace: forward first; if the branch does not close, the
/// backward half is traced and prepended reversed, so arclength runs
/// monotonically through the start.
pub fn trace_two_sided(
    p: &Params,
    start: &PeriodicField,
    settings: &ContinuationSettings,
) -> Result<Branch, SolveError> {
    let fwd = trace_branch(p, start, settings)?;
    if fwd.closed {
        return Ok(fwd);
    }
    let mut back_settings = settings.clone();
    back_settings.initial_direction = -settings.initial_direction;
    let back = trace_branch(p, start, &back_settings)?;
    let back_total = back.points.last().map(|pt| pt.arclength).unwrap_or(0.0);
    let mut points: Vec<BranchPoint> = back
        .points
        .iter()
        .rev()
        .map(|pt| {
            let mut q = pt.clone();
            q.arclength = back_total - pt.arclength;
            q
        })
        .collect();
    for pt in &fwd.points[1..] {
        let mut q = pt.clone();
        q.arclength = back_total + pt.arclength;
        points.push(q);
    }
    Ok(Branch {
        param: settings.param,
        points,
        closed: false,
        provenance: format!(
            "{} (two-sided; backward: {:?})",
            fwd.provenance, back.termination
        ),
        termination: fwd.termination,
    })
}

/// Branches traced at one detuning of a sweep.
#[derive(Debug)]
pub struct ZetaSweep {
    pub zeta: f64,
    pub branches: Vec<Branch>,
    pub errors: Vec<String>,
}

/// Sweep a detuning list: enumerate the constant solutions at each ζ,
/// trace a two-sided `f₁` branch from every one not already covered by an
/// earlier branch at the same ζ, and collect per-branch failures without
/// aborting. Independent ζ jobs run on the rayon pool; results are
/// sorted by ζ.
pub fn sweep_zeta(
    p_template: &Params,
    zeta_list: &[f64],
    n: usize,
    settings: &ContinuationSettings,
) -> Vec<ZetaSweep> {
    assert_eq!(
        settings.param,
        ContinuationParam::F1,
        "sweeps continue in f1"
    );
    let mut sweeps: Vec<ZetaSweep> = zeta_list
        .par_iter()
        .map(|&zeta| {
            let p = p_template.with_zeta(zeta).with_f1(0.0);
            let mut branches: Vec<Branch> = Vec::new();
            let mut errors = Vec::new();
            for tp in crate::trivial::solve_constants(zeta, p.f0) {
                if trivial_covered(&branches, &tp, n) {
                    continue;
                }
                let u = match PeriodicField::constant(n, tp.u0) {
                    Ok(u) => u,
                    Err(e) => {
                        errors.push(e.to_string());
                        continue;
                    }
                };
                match trace_two_sided(&p, &u, settings) {
                    Ok(b) => branches.push(b),
                    Err(e) => errors.push(format!("start rho={}: {e}", tp.rho)),
                }
            }
            ZetaSweep {
                zeta,
                branches,
                errors,
            }
        })
        .collect();
    sweeps.sort_by(|a, b| a.zeta.partial_cmp(&b.zeta).unwrap());
    sweeps
}

/// Whether a trivial point already lies on one of the traced branches,
/// i.e. within `1e-4` of an `f₁ ≈ 0` branch point in the arclength
/// metric.
fn trivial_covered(branches: &[Branch], tp: &TrivialPoint, n: usize) -> bool {
    let w = 1.0 / n as f64;
    let xc = pack(&PeriodicField::from_values_unchecked(vec![tp.u0; n]));
    for b in branches {
        for pt in &b.points {
            if pt.param_value.abs() > 1e-8 {
                continue;
            }
            let dx = pack(&pt.u) - &xc;
            let dist = (w * dx.norm_squared() + pt.param_value.powi(2)).sqrt();
            if dist < 1e-4 {
                return true;
            }
        }
    }
    false
}

/// Map a whole branch through the reflection `R`.
///
/// Fields are rotated by the exact half-period index shift and the
/// second pump amplitude flips sign: on an `f₁` branch the parameter
/// value flips per point; on a `ζ` branch (fixed `f₁`) the parameter is
/// untouched and the result lives at `-f₁`, so a constant branch at
/// `f₁ = 0` maps to itself up to the rotation. The scalar diagnostics
/// are copied verbatim since grid rotation preserves them exactly (the
/// rotated Jacobian is a permutation conjugate of the original).
pub fn mirror_branch(b: &Branch, p: &Params) -> Result<Branch, ModelError> {
    let mut points = Vec::with_capacity(b.points.len());
    for pt in &b.points {
        let f1 = match b.param {
            ContinuationParam::F1 => pt.param_value,
            ContinuationParam::Zeta => p.f1,
        };
        let (f1m, um) = crate::model::apply_r(p, f1, &pt.u)?;
        let param_value = match b.param {
            ContinuationParam::F1 => f1m,
            ContinuationParam::Zeta => pt.param_value,
        };
        points.push(BranchPoint {
            param_value,
            u: um,
            norm_sq_over_2pi: pt.norm_sq_over_2pi,
            arclength: pt.arclength,
            min_sv: pt.min_sv,
            events: pt.events.clone(),
        });
    }
    Ok(Branch {
        param: b.param,
        points,
        closed: b.closed,
        provenance: format!("mirror of [{}]", b.provenance),
        termination: b.termination.clone(),
    })
}
