//! Powell's conjugate-direction method and a multi-start driver.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinimizeConfig {
    /// Outer iterations per run; `None` means `1000 * dimension`.
    pub max_iters: Option<usize>,
    /// Relative decrease of the objective over one sweep below which a run stops.
    pub ftol: f64,
    /// Sweep displacement (relative to `1 + |x|`) below which a run stops.
    pub xtol: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for MinimizeConfig {
    fn default() -> Self {
        Self { max_iters: None, ftol: 1e-10, xtol: 1e-10, restarts: 10, seed: 0 }
    }
}

impl MinimizeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == Some(0) {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.ftol > 0.0 && self.xtol > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be at least 1".into()));
        }
        Ok(())
    }

    fn iters_for(&self, dim: usize) -> usize {
        self.max_iters.unwrap_or(1000 * dim.max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeResult<T: Scalar> {
    pub x: Vec<T>,
    pub f: T,
    pub iters_used: usize,
    pub converged: bool,
    /// Objective after every accepted sweep, starting with `f(x0)`.
    pub trace: Vec<T>,
}

const GOLD: f64 = 1.618_034;
const GROW_LIMIT: f64 = 100.0;
const BRENT_ITERS: usize = 200;
const DET_FLOOR: f64 = 1e-12;

/// Minimises `f` from `x0` with Powell's method.
///
/// Each sweep line-minimises along every direction in the set, then tries the
/// net displacement as a new direction and replaces the direction of largest
/// decrease with it. The set falls back to coordinate directions every
/// `dim^2` sweeps, when it becomes nearly dependent, or after a non-finite
/// objective value.
pub fn powell_minimize<T, F>(f: F, x0: &[T], cfg: &MinimizeConfig) -> Result<MinimizeResult<T>>
where
    T: Scalar,
    F: Fn(&[T]) -> T,
{
    cfg.validate()?;
    let n = x0.len();
    let f0 = f(x0);
    if !f0.finite() {
        return Err(Error::InvalidStart);
    }
    let mut x = x0.to_vec();
    let mut fx = f0;
    let mut trace = vec![f0];
    if n == 0 {
        return Ok(MinimizeResult { x, f: fx, iters_used: 0, converged: true, trace });
    }

    let saw_bad = std::cell::Cell::new(false);
    let g = |p: &[T]| {
        let v = f(p);
        if v.finite() {
            v
        } else {
            saw_bad.set(true);
            T::max_value().unwrap_or_else(|| T::lit(f64::MAX))
        }
    };

    let ftol = T::lit(cfg.ftol);
    let xtol = T::lit(cfg.xtol);
    let tiny = T::lit(1e-25);
    let two = T::lit(2.0);
    let max_iters = cfg.iters_for(n);
    let mut dirs = identity_dirs::<T>(n);
    let mut since_reset = 0usize;
    let mut converged = false;
    let mut iters = 0usize;

    while iters < max_iters {
        iters += 1;
        since_reset += 1;
        let x_start = x.clone();
        let f_start = fx;
        let mut big_drop = T::zero();
        let mut big_idx = 0;
        for (i, d) in dirs.iter().enumerate() {
            let before = fx;
            let (nx, nf) = line_minimize(&g, &x, d, fx);
            x = nx;
            fx = nf;
            if before - fx > big_drop {
                big_drop = before - fx;
                big_idx = i;
            }
        }
        trace.push(fx);

        let shift: Vec<T> = x.iter().zip(&x_start).map(|(&a, &b)| a - b).collect();
        let step = crate::mixing::norm(&shift);
        if two * (f_start - fx) <= ftol * (f_start.abs() + fx.abs()) + tiny
            || step <= xtol * (T::one() + crate::mixing::norm(&x))
        {
            converged = true;
            break;
        }

        let extrap: Vec<T> = x.iter().zip(&shift).map(|(&a, &s)| a + s).collect();
        let f_ext = g(&extrap);
        if f_ext < f_start {
            let t = two * (f_start - two * fx + f_ext) * (f_start - fx - big_drop).powi(2)
                - big_drop * (f_start - f_ext).powi(2);
            if t < T::zero() {
                let unit = normalized(&shift);
                let (nx, nf) = line_minimize(&g, &x, &unit, fx);
                if nf <= fx {
                    x = nx;
                    fx = nf;
                    *trace.last_mut().expect("trace non-empty") = fx;
                }
                let last = n - 1;
                dirs[big_idx] = dirs[last].clone();
                dirs[last] = unit;
            }
        }

        if saw_bad.replace(false) || since_reset >= n * n || direction_det(&dirs) < T::lit(DET_FLOOR) {
            dirs = identity_dirs(n);
            since_reset = 0;
        }
    }

    let f_final = f(&x);
    Ok(MinimizeResult { x, f: f_final, iters_used: iters, converged, trace })
}

/// Runs [`powell_minimize`] from `cfg.restarts` starting points drawn by
/// `sampler` and keeps the best run, ties broken by restart index.
///
/// Start points are drawn sequentially from a generator seeded by `cfg.seed`,
/// so the outcome does not depend on how runs are scheduled across threads.
pub fn best_of_restarts<T, F, S>(f: F, mut sampler: S, cfg: &MinimizeConfig) -> Result<MinimizeResult<T>>
where
    T: Scalar,
    F: Fn(&[T]) -> T + Sync,
    S: FnMut(usize, &mut ChaCha8Rng) -> Vec<T>,
{
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let starts: Vec<Vec<T>> = (0..cfg.restarts).map(|k| sampler(k, &mut rng)).collect();
    let runs: Vec<Result<MinimizeResult<T>>> = starts.par_iter().map(|x0| powell_minimize(&f, x0, cfg)).collect();
    select_best(runs)
}

pub(crate) fn select_best<T: Scalar>(runs: Vec<Result<MinimizeResult<T>>>) -> Result<MinimizeResult<T>> {
    let mut best: Option<MinimizeResult<T>> = None;
    let mut first_err = None;
    for r in runs {
        match r {
            Ok(r) => {
                let better = match &best {
                    None => true,
                    Some(b) => r.f < b.f || (!b.f.finite() && r.f.finite()),
                };
                if better {
                    best = Some(r);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.unwrap_or(Error::InvalidStart))
}

fn identity_dirs<T: Scalar>(n: usize) -> Vec<Vec<T>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect()).collect()
}

fn normalized<T: Scalar>(v: &[T]) -> Vec<T> {
    let nv = crate::mixing::norm(v);
    if nv == T::zero() {
        return v.to_vec();
    }
    v.iter().map(|&x| x / nv).collect()
}

fn direction_det<T: Scalar>(dirs: &[Vec<T>]) -> T {
    let n = dirs.len();
    let m = DMatrix::from_fn(n, n, |i, j| dirs[j][i]);
    let cols: Vec<T> = (0..n).map(|j| m.column(j).norm()).collect();
    if cols.iter().any(|&c| c == T::zero()) {
        return T::zero();
    }
    let scaled = DMatrix::from_fn(n, n, |i, j| m[(i, j)] / cols[j]);
    scaled.determinant().abs()
}

fn axpy<T: Scalar>(x: &[T], t: T, d: &[T]) -> Vec<T> {
    x.iter().zip(d).map(|(&a, &b)| a + t * b).collect()
}

/// Minimises `g(x + t d)` over `t`; never returns a worse point than `x`.
fn line_minimize<T, G>(g: &G, x: &[T], d: &[T], fx: T) -> (Vec<T>, T)
where
    T: Scalar,
    G: Fn(&[T]) -> T,
{
    let phi = |t: T| g(&axpy(x, t, d));
    let (a, b, c, fb) = bracket(&phi, T::zero(), T::one(), fx);
    let (t, ft) = brent(&phi, a, b, c, fb);
    if ft < fx {
        (axpy(x, t, d), ft)
    } else {
        (x.to_vec(), fx)
    }
}

/// Downhill bracketing with parabolic extrapolation, growth bounded by
/// `GROW_LIMIT`. Returns `(a, b, c, f(b))` with `f(b) <= f(a), f(c)` when a
/// bracket exists.
fn bracket<T: Scalar, P: Fn(T) -> T>(phi: &P, a0: T, b0: T, fa0: T) -> (T, T, T, T) {
    let gold = T::lit(GOLD);
    let glimit = T::lit(GROW_LIMIT);
    let tiny = T::lit(1e-20);
    let (mut a, mut b) = (a0, b0);
    let (mut fa, mut fb) = (fa0, phi(b0));
    if fb > fa {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = b + gold * (b - a);
    let mut fc = phi(c);
    let mut guard = 0;
    while fb > fc && guard < 100 {
        guard += 1;
        let r = (b - a) * (fb - fc);
        let q = (b - c) * (fb - fa);
        let diff = q - r;
        let denom = T::lit(2.0) * if diff.abs() < tiny { tiny.copysign(diff) } else { diff };
        let mut u = b - ((b - c) * q - (b - a) * r) / denom;
        let ulim = b + glimit * (c - b);
        let mut fu;
        if (b - u) * (u - c) > T::zero() {
            fu = phi(u);
            if fu < fc {
                return order(b, u, c, fu);
            } else if fu > fb {
                return order(a, b, u, fb);
            }
            u = c + gold * (c - b);
            fu = phi(u);
        } else if (c - u) * (u - ulim) > T::zero() {
            fu = phi(u);
            if fu < fc {
                b = c;
                c = u;
                u = c + gold * (c - b);
                fb = fc;
                fc = fu;
                fu = phi(u);
            }
        } else if (u - ulim) * (ulim - c) >= T::zero() {
            u = ulim;
            fu = phi(u);
        } else {
            u = c + gold * (c - b);
            fu = phi(u);
        }
        a = b;
        b = c;
        c = u;
        fa = fb;
        fb = fc;
        fc = fu;
    }
    let _ = fa;
    order(a, b, c, fb)
}

fn order<T: Scalar>(a: T, b: T, c: T, fb: T) -> (T, T, T, T) {
    if a <= c {
        (a, b, c, fb)
    } else {
        (c, b, a, fb)
    }
}

/// Brent's parabolic/golden-section minimisation on `[a, c]` seeded at `b`.
fn brent<T: Scalar, P: Fn(T) -> T>(phi: &P, a: T, b: T, c: T, fb: T) -> (T, T) {
    let cgold = T::lit(0.381_966_0);
    let tol = T::eps().sqrt();
    let zeps = T::eps() * T::lit(1e-3);
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let (mut lo, mut hi) = if a < c { (a, c) } else { (c, a) };
    let (mut x, mut w, mut v) = (b, b, b);
    let (mut fx, mut fw, mut fv) = (fb, fb, fb);
    let mut d = T::zero();
    let mut e = T::zero();
    for _ in 0..BRENT_ITERS {
        let xm = half * (lo + hi);
        let tol1 = tol * x.abs() + zeps;
        let tol2 = two * tol1;
        if (x - xm).abs() <= tol2 - half * (hi - lo) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = two * (q - r);
            if q > T::zero() {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if !(p.abs() >= (half * q * etemp).abs() || p <= q * (lo - x) || p >= q * (hi - x)) {
                d = p / q;
                let u = x + d;
                if u - lo < tol2 || hi - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { lo - x } else { hi - x };
            d = cgold * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = phi(u);
        if fu <= fx {
            if u >= x {
                lo = x;
            } else {
                hi = x;
            }
            v = w;
            w = x;
            x = u;
            fv = fw;
            fw = fx;
            fx = fu;
        } else {
            if u < x {
                lo = u;
            } else {
                hi = u;
            }
            if fu <= fw || w == x {
                v = w;
                w = u;
                fv = fw;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, fx)
}
