//! Adaptive Gauss-Legendre quadrature.
//!
//! A panel is accepted when the difference between a 15-point and a
//! 30-point rule is below the requested relative tolerance; otherwise the
//! panel with the largest scaled error is bisected. Vector-valued
//! integrands share panel refinement, which lets a whole table of moments
//! `∫ x^k w(x) dx, k = 0…K` be computed in one pass driven by the hardest
//! component.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const LO_ORDER: usize = 15;
const HI_ORDER: usize = 30;
const MAX_PANELS: usize = 4096;

/// Gauss-Legendre nodes and weights on [-1, 1].
pub struct GaussLegendre<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Scalar> GaussLegendre<T> {
    /// Newton iteration on the Legendre polynomial from the Chebyshev
    /// initial guess; converges to working precision in a few steps.
    pub fn new(order: usize) -> Self {
        let mut nodes = vec![T::zero(); order];
        let mut weights = vec![T::zero(); order];
        let pi = T::from_f64_lit(std::f64::consts::PI);
        let nf = T::from_usize_lit(order);
        for i in 0..order {
            let k = T::from_usize_lit(i + 1);
            let quarter = T::from_f64_lit(0.25);
            let half = T::from_f64_lit(0.5);
            let mut x = (pi * (k - quarter) / (nf + half)).cos();
            for _ in 0..50 {
                let (p, dp) = legendre_and_derivative(order, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() <= T::epsilon() * T::from_f64_lit(4.0) {
                    break;
                }
            }
            let (_, dp) = legendre_and_derivative(order, x);
            nodes[i] = x;
            weights[i] = T::from_f64_lit(2.0) / ((T::one() - x * x) * dp * dp);
        }
        GaussLegendre { nodes, weights }
    }
}

fn legendre_and_derivative<T: Scalar>(order: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    for k in 2..=order {
        let kf = T::from_usize_lit(k);
        let a = (T::from_f64_lit(2.0) * kf - T::one()) / kf;
        let b = (kf - T::one()) / kf;
        let p2 = a * x * p1 - b * p0;
        p0 = p1;
        p1 = p2;
    }
    let n = T::from_usize_lit(order);
    let dp = n * (x * p1 - p0) / (x * x - T::one());
    (p1, dp)
}

struct Panel<T> {
    a: T,
    b: T,
    lo: Vec<T>,
    hi: Vec<T>,
    err: T,
}

/// Integrate a vector-valued integrand over `[a, b]`.
///
/// `f(x, out)` must fill `out` (length `dim`) with the integrand
/// components at `x`. Convergence is relative to each component's L1
/// mass, so components that are exactly zero by symmetry do not stall
/// refinement.
pub fn integrate_vector<T: Scalar>(
    f: &mut dyn FnMut(T, &mut [T]),
    dim: usize,
    a: T,
    b: T,
    rel_tol: T,
) -> Result<Vec<T>> {
    assert!(dim >= 1);
    if !(b > a) {
        return Err(Error::invalid("quadrature: empty interval"));
    }
    let rule_lo = GaussLegendre::<T>::new(LO_ORDER);
    let rule_hi = GaussLegendre::<T>::new(HI_ORDER);
    let eval = |f: &mut dyn FnMut(T, &mut [T]), pa: T, pb: T| -> Panel<T> {
        let half = (pb - pa) * T::from_f64_lit(0.5);
        let mid = (pb + pa) * T::from_f64_lit(0.5);
        let mut scratch = vec![T::zero(); dim];
        let mut lo = vec![T::zero(); dim];
        for (&x, &w) in rule_lo.nodes.iter().zip(&rule_lo.weights) {
            f(mid + half * x, &mut scratch);
            for (acc, &v) in lo.iter_mut().zip(scratch.iter()) {
                *acc += w * v;
            }
        }
        let mut hi = vec![T::zero(); dim];
        for (&x, &w) in rule_hi.nodes.iter().zip(&rule_hi.weights) {
            f(mid + half * x, &mut scratch);
            for (acc, &v) in hi.iter_mut().zip(scratch.iter()) {
                *acc += w * v;
            }
        }
        for v in lo.iter_mut() {
            *v *= half;
        }
        for v in hi.iter_mut() {
            *v *= half;
        }
        let mut err = T::zero();
        for (l, h) in lo.iter().zip(hi.iter()) {
            err = err.max((*l - *h).abs());
        }
        Panel {
            a: pa,
            b: pb,
            lo,
            hi,
            err,
        }
    };
    let mut panels = vec![eval(f, a, b)];
    loop {
        // per-component totals and error sums
        let mut converged = true;
        for k in 0..dim {
            let mut total = T::zero();
            let mut mass = T::zero();
            let mut err = T::zero();
            for p in &panels {
                total += p.hi[k];
                mass += p.hi[k].abs();
                err += (p.hi[k] - p.lo[k]).abs();
            }
            let scale = mass.max(total.abs()).max(T::min_positive_value());
            if err > rel_tol * scale {
                converged = false;
                break;
            }
        }
        if converged {
            let mut out = vec![T::zero(); dim];
            for p in &panels {
                for (acc, &v) in out.iter_mut().zip(p.hi.iter()) {
                    *acc += v;
                }
            }
            return Ok(out);
        }
        if panels.len() >= MAX_PANELS {
            return Err(Error::numeric(
                "quadrature failed to converge within panel budget",
            ));
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|(_, p), (_, q)| p.err.partial_cmp(&q.err).expect("finite errors"))
            .map(|(i, _)| i)
            .expect("nonempty panel list");
        let p = panels.swap_remove(worst);
        let mid = (p.a + p.b) * T::from_f64_lit(0.5);
        panels.push(eval(f, p.a, mid));
        panels.push(eval(f, mid, p.b));
    }
}

/// Scalar convenience wrapper around [`integrate_vector`].
pub fn integrate<T: Scalar>(f: &mut dyn FnMut(T) -> T, a: T, b: T, rel_tol: T) -> Result<T> {
    let mut g = |x: T, out: &mut [T]| out[0] = f(x);
    Ok(integrate_vector(&mut g, 1, a, b, rel_tol)?[0])
}

/// Nested adaptive integration over a small box (at most 3 axes).
pub fn integrate_box<T: Scalar>(axes: &[(T, T)], f: &dyn Fn(&[T]) -> T, rel_tol: T) -> Result<T> {
    if axes.is_empty() {
        return Ok(f(&[]));
    }
    if axes.len() > 3 {
        return Err(Error::invalid(
            "joint quadrature supports at most 3 coupled dimensions",
        ));
    }
    let mut point = vec![T::zero(); axes.len()];
    integrate_box_rec(axes, f, rel_tol, 0, &mut point)
}

fn integrate_box_rec<T: Scalar>(
    axes: &[(T, T)],
    f: &dyn Fn(&[T]) -> T,
    rel_tol: T,
    depth: usize,
    point: &mut [T],
) -> Result<T> {
    let (a, b) = axes[depth];
    if depth + 1 == axes.len() {
        let mut g = |x: T| {
            point[depth] = x;
            f(point)
        };
        integrate(&mut g, a, b, rel_tol)
    } else {
        let mut err: Option<Error> = None;
        let mut g = |x: T| {
            point[depth] = x;
            let mut sub = point.to_vec();
            match integrate_box_rec(axes, f, rel_tol, depth + 1, &mut sub) {
                Ok(v) => v,
                Err(e) => {
                    err = Some(e);
                    T::zero()
                }
            }
        };
        let v = integrate(&mut g, a, b, rel_tol)?;
        match err {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }
}
