//! Tail-probability bounds and ellipsoidal safety regions.
//!
//! Given approximate first and second moments with per-coordinate error
//! certificates, the probability that the state leaves a P-ellipsoid
//! around the approximate mean is bounded by a Markov argument on the
//! covariance. The region construction runs in three steps: a max-det
//! ellipsoid assuming exact moments (closed form), a scalar rescale
//! absorbing the certificate intervals into the constraint, and a radius
//! inflation covering the approximate center's own offset.

use crate::error::{Error, Result};
use crate::kron::{rank_descending, MultiIndex};
use crate::linalg;
use crate::model::Mode;
use crate::scalar::Scalar;

/// First and second moment block with certificates, exposing entrywise
/// covariance intervals.
#[derive(Debug, Clone)]
pub struct SecondMomentView<T> {
    pub n: usize,
    pub mode: Mode,
    /// approximate mean, length n
    pub mean: Vec<T>,
    /// degree-2 moment block in `mode` coordinates
    pub second: Vec<T>,
    /// certificate for the mean, length n
    pub err1: Vec<T>,
    /// certificate for the degree-2 block, same layout as `second`
    pub err2: Vec<T>,
}

impl<T: Scalar> SecondMomentView<T> {
    pub fn new(
        n: usize,
        mode: Mode,
        mean: Vec<T>,
        second: Vec<T>,
        err1: Vec<T>,
        err2: Vec<T>,
    ) -> Result<Self> {
        let want = mode.block_len(n, 2);
        if mean.len() != n || err1.len() != n || second.len() != want || err2.len() != want {
            return Err(Error::dims("second-moment view block lengths are wrong"));
        }
        Ok(SecondMomentView {
            n,
            mode,
            mean,
            second,
            err1,
            err2,
        })
    }

    /// Moments with zero certificates (exact by construction).
    pub fn exact(n: usize, mode: Mode, mean: Vec<T>, second: Vec<T>) -> Result<Self> {
        let e1 = vec![T::zero(); mean.len()];
        let e2 = vec![T::zero(); second.len()];
        Self::new(n, mode, mean, second, e1, e2)
    }

    fn pair_index(&self, i: usize, j: usize) -> usize {
        match self.mode {
            Mode::Full => self.n * i + j,
            Mode::Reduced => {
                let idx = MultiIndex::unit(self.n, i).combine(&MultiIndex::unit(self.n, j));
                rank_descending(idx.exponents())
            }
        }
    }

    /// Approximate `E[x_i x_j]`, symmetrized over the (i,j)/(j,i) rows.
    pub fn second_at(&self, i: usize, j: usize) -> T {
        let half = T::from_f64_lit(0.5);
        (self.second[self.pair_index(i, j)] + self.second[self.pair_index(j, i)]) * half
    }

    /// Certificate for the symmetrized second moment.
    pub fn err2_at(&self, i: usize, j: usize) -> T {
        let half = T::from_f64_lit(0.5);
        (self.err2[self.pair_index(i, j)] + self.err2[self.pair_index(j, i)]) * half
    }

    /// Covariance assuming the certificates are zero.
    pub fn cov_exact(&self, i: usize, j: usize) -> T {
        self.second_at(i, j) - self.mean[i] * self.mean[j]
    }

    /// Largest covariance consistent with the certificates.
    pub fn cov_upper(&self, i: usize, j: usize) -> T {
        self.second_at(i, j) + self.err2_at(i, j) - self.mean_product_min(i, j)
    }

    /// Smallest covariance consistent with the certificates.
    pub fn cov_lower(&self, i: usize, j: usize) -> T {
        self.second_at(i, j) - self.err2_at(i, j) - self.mean_product_max(i, j)
    }

    fn mean_interval(&self, i: usize) -> (T, T) {
        (self.mean[i] - self.err1[i], self.mean[i] + self.err1[i])
    }

    fn mean_product_min(&self, i: usize, j: usize) -> T {
        let (lo_i, hi_i) = self.mean_interval(i);
        if i == j {
            if lo_i <= T::zero() && hi_i >= T::zero() {
                return T::zero();
            }
            return (lo_i * lo_i).min(hi_i * hi_i);
        }
        let (lo_j, hi_j) = self.mean_interval(j);
        (lo_i * lo_j)
            .min(lo_i * hi_j)
            .min(hi_i * lo_j)
            .min(hi_i * hi_j)
    }

    fn mean_product_max(&self, i: usize, j: usize) -> T {
        let (lo_i, hi_i) = self.mean_interval(i);
        if i == j {
            return (lo_i * lo_i).max(hi_i * hi_i);
        }
        let (lo_j, hi_j) = self.mean_interval(j);
        (lo_i * lo_j)
            .max(lo_i * hi_j)
            .max(hi_i * lo_j)
            .max(hi_i * hi_j)
    }

    /// Exact covariance submatrix over `dims`, symmetrized, row-major.
    pub fn covariance_submatrix(&self, dims: &[usize]) -> Vec<T> {
        let k = dims.len();
        let mut c = vec![T::zero(); k * k];
        for (a, &i) in dims.iter().enumerate() {
            for (b, &j) in dims.iter().enumerate() {
                c[a * k + b] = self.cov_exact(i, j);
            }
        }
        // enforce symmetry against rounding in the (i,j)/(j,i) rows
        for a in 0..k {
            for b in (a + 1)..k {
                let avg = (c[a * k + b] + c[b * k + a]) * T::from_f64_lit(0.5);
                c[a * k + b] = avg;
                c[b * k + a] = avg;
            }
        }
        c
    }
}

/// Worst-case bound on `Σ p_ab · Cov(x_a, x_b)` over the certificate
/// intervals; each term takes the covariance end that maximizes it for
/// the sign of its weight.
fn weighted_cov_upper<T: Scalar>(view: &SecondMomentView<T>, p: &[T], dims: &[usize]) -> T {
    let k = dims.len();
    let mut acc = T::zero();
    for (a, &i) in dims.iter().enumerate() {
        for (b, &j) in dims.iter().enumerate() {
            let w = p[a * k + b];
            if w > T::zero() {
                acc += w * view.cov_upper(i, j);
            } else if w < T::zero() {
                acc += w * view.cov_lower(i, j);
            }
        }
    }
    acc
}

/// Upper bound on the probability that the state leaves the
/// `{‖x − mean‖_P ≥ α}` region, given a seminorm bound `eps` on the
/// center offset.
pub fn tail_bound<T: Scalar>(
    view: &SecondMomentView<T>,
    p: &[T],
    dims: &[usize],
    alpha: T,
    eps: T,
) -> Result<T> {
    if !(alpha > eps) || eps < T::zero() {
        return Err(Error::invalid("tail bound requires α > ε ≥ 0"));
    }
    if p.len() != dims.len() * dims.len() {
        return Err(Error::dims("weight matrix does not match dims"));
    }
    let num = weighted_cov_upper(view, p, dims);
    let d = alpha - eps;
    Ok(num.max(T::zero()) / (d * d))
}

/// Region shape: free ellipsoid or the diagonal-equal ball restriction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionShape {
    Ellipsoid,
    Ball,
}

/// Closed-form max-det step assuming exact moments: maximize `det Q`
/// subject to `⟨Q, C⟩ ≤ b·α²` over positive-definite `Q`. The optimum is
/// `Q = (b·α²/k)·C⁻¹`; the ball restriction gives `q = b·α²/tr(C)`.
pub fn maxdet_ellipsoid<T: Scalar>(
    view: &SecondMomentView<T>,
    b: T,
    alpha: T,
    dims: &[usize],
    shape: RegionShape,
) -> Result<Vec<T>> {
    if !(b > T::zero() && b < T::one()) {
        return Err(Error::invalid("probability bound must lie in (0,1)"));
    }
    if !(alpha > T::zero()) {
        return Err(Error::invalid("α must be positive"));
    }
    let k = dims.len();
    if k == 0 {
        return Err(Error::invalid("dimensions of interest are empty"));
    }
    let mut c = view.covariance_submatrix(dims);
    let budget = b * alpha * alpha;
    match shape {
        RegionShape::Ball => {
            let tr = (0..k).fold(T::zero(), |acc, a| acc + c[a * k + a]);
            if !(tr > T::zero()) {
                return Err(Error::numeric("covariance trace is not positive"));
            }
            let q = budget / tr;
            let mut out = vec![T::zero(); k * k];
            for a in 0..k {
                out[a * k + a] = q;
            }
            Ok(out)
        }
        RegionShape::Ellipsoid => {
            let (vals, _) = linalg::sym_eigen(&c, k)?;
            if !(vals[0] > T::zero()) {
                // ridge against numerically singular covariance
                let tr = (0..k).fold(T::zero(), |acc, a| acc + c[a * k + a]);
                let ridge = T::from_f64_lit(1e-10) * tr / T::from_usize_lit(k);
                if !(ridge > T::zero()) {
                    return Err(Error::numeric("covariance is singular"));
                }
                for a in 0..k {
                    c[a * k + a] += ridge;
                }
                let (ridged, _) = linalg::sym_eigen(&c, k)?;
                if !(ridged[0] > T::zero()) {
                    return Err(Error::numeric(
                        "covariance submatrix is singular beyond the ridge tolerance",
                    ));
                }
            }
            let inv = linalg::invert(&c, k)?;
            let scale = budget / T::from_usize_lit(k);
            Ok(inv.into_iter().map(|v| v * scale).collect())
        }
    }
}

/// Second step: scale `Q` so the certificate-aware constraint holds with
/// equality, `P = s·Q` with `s = b·α² / Σ q_ab u_ab`.
pub fn rescale<T: Scalar>(
    q: &[T],
    view: &SecondMomentView<T>,
    b: T,
    alpha: T,
    dims: &[usize],
) -> Result<(T, Vec<T>)> {
    let denom = weighted_cov_upper(view, q, dims);
    if !(denom > T::zero()) {
        return Err(Error::numeric(
            "certificate-aware covariance bound is not positive",
        ));
    }
    let s = b * alpha * alpha / denom;
    Ok((s, q.iter().map(|&v| v * s).collect()))
}

/// Final step: a P-seminorm bound on the center offset from the mean
/// certificate, `ε = λ_max(P)^{1/2} · ‖Ē⁽¹⁾|_I‖₂`. The Euclidean norm of
/// the certificate box dominates every offset the certificate allows.
pub fn center_offset_bound<T: Scalar>(p: &[T], dims: &[usize], err1: &[T]) -> Result<T> {
    let k = dims.len();
    if p.len() != k * k {
        return Err(Error::dims("weight matrix does not match dims"));
    }
    let lmax = linalg::max_eigenvalue(p, k)?.max(T::zero());
    let mut sq = T::zero();
    for &i in dims {
        sq += err1[i] * err1[i];
    }
    Ok(lmax.sqrt() * sq.sqrt())
}

/// Probabilistic safety region: `‖x|_I − center‖_P ≤ radius` holds with
/// probability at least `1 − prob_bound`.
#[derive(Debug, Clone)]
pub struct SafetyEllipsoid<T> {
    pub dims: Vec<usize>,
    /// row-major |I|×|I|, positive-definite
    pub p: Vec<T>,
    pub center: Vec<T>,
    pub alpha: T,
    pub epsilon: T,
    pub radius: T,
    pub prob_bound: T,
}

impl<T: Scalar> SafetyEllipsoid<T> {
    pub fn seminorm(&self, x_full: &[T]) -> T {
        let k = self.dims.len();
        let d: Vec<T> = self
            .dims
            .iter()
            .zip(&self.center)
            .map(|(&i, &c)| x_full[i] - c)
            .collect();
        let mut acc = T::zero();
        for a in 0..k {
            for b in 0..k {
                acc += d[a] * self.p[a * k + b] * d[b];
            }
        }
        acc.max(T::zero()).sqrt()
    }

    pub fn contains(&self, x_full: &[T]) -> bool {
        self.seminorm(x_full) <= self.radius
    }

    /// Area of a two-dimensional region.
    pub fn area(&self) -> Result<T> {
        if self.dims.len() != 2 {
            return Err(Error::invalid("area is defined for 2-dimensional regions"));
        }
        let det = linalg::determinant(&self.p, 2);
        if !(det > T::zero()) {
            return Err(Error::numeric("region matrix is not positive-definite"));
        }
        Ok(T::from_f64_lit(std::f64::consts::PI) * self.radius * self.radius / det.sqrt())
    }

    /// Evenly parameterized boundary polyline (two-dimensional regions).
    pub fn boundary(&self, points: usize) -> Result<Vec<(T, T)>> {
        if self.dims.len() != 2 {
            return Err(Error::invalid(
                "boundary sampling is defined for 2-dimensional regions",
            ));
        }
        let root_inv = linalg::sym_power(&self.p, 2, -0.5)?;
        let mut out = Vec::with_capacity(points);
        for idx in 0..points {
            let theta = T::from_f64_lit(2.0 * std::f64::consts::PI) * T::from_usize_lit(idx)
                / T::from_usize_lit(points);
            let u = [theta.cos() * self.radius, theta.sin() * self.radius];
            let x = self.center[0] + root_inv[0] * u[0] + root_inv[1] * u[1];
            let y = self.center[1] + root_inv[2] * u[0] + root_inv[3] * u[1];
            out.push((x, y));
        }
        Ok(out)
    }
}

/// Three-step construction: max-det ellipsoid, certificate-aware
/// rescale, radius inflation by the center-offset bound.
pub fn build_safety_region<T: Scalar>(
    view: &SecondMomentView<T>,
    b: T,
    alpha: T,
    dims: &[usize],
    shape: RegionShape,
) -> Result<SafetyEllipsoid<T>> {
    for &d in dims {
        if d >= view.n {
            return Err(Error::invalid(format!("dimension {d} out of range")));
        }
    }
    let q = maxdet_ellipsoid(view, b, alpha, dims, shape)?;
    let (_s, p) = rescale(&q, view, b, alpha, dims)?;
    let epsilon = center_offset_bound(&p, dims, &view.err1)?;
    let center = dims.iter().map(|&i| view.mean[i]).collect();
    Ok(SafetyEllipsoid {
        dims: dims.to_vec(),
        p,
        center,
        alpha,
        epsilon,
        radius: alpha + epsilon,
        prob_bound: b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact_view(mean: Vec<f64>, cov: Vec<f64>) -> SecondMomentView<f64> {
        // build the full-mode second block from covariance + mean
        let n = mean.len();
        let mut second = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                second[n * i + j] = cov[i * n + j] + mean[i] * mean[j];
            }
        }
        SecondMomentView::exact(n, Mode::Full, mean, second).unwrap()
    }

    #[test]
    fn tail_bound_direct_substitution() {
        // P = I, covariance trace 0.05, α = 1, ε = 0 → bound 0.05
        let v = exact_view(vec![0.0, 0.0], vec![0.03, 0.0, 0.0, 0.02]);
        let p = [1.0, 0.0, 0.0, 1.0];
        let b = tail_bound(&v, &p, &[0, 1], 1.0, 0.0).unwrap();
        assert!((b - 0.05).abs() < 1e-15);
    }

    #[test]
    fn tail_bound_zero_covariance() {
        let v = exact_view(vec![0.3, -0.1], vec![0.0; 4]);
        let p = [2.0, 0.5, 0.5, 1.0];
        let b = tail_bound(&v, &p, &[0, 1], 1.0, 0.0).unwrap();
        assert_eq!(b, 0.0);
    }

    #[test]
    fn tail_bound_rejects_alpha_not_above_eps() {
        let v = exact_view(vec![0.0], vec![0.1]);
        assert!(tail_bound(&v, &[1.0], &[0], 0.5, 0.5).is_err());
    }

    #[test]
    fn maxdet_diagonal_closed_form() {
        // C = diag(0.04, 0.01), b = 0.1, α = 1 → Q = diag(1.25, 5)
        let v = exact_view(vec![0.0, 0.0], vec![0.04, 0.0, 0.0, 0.01]);
        let q = maxdet_ellipsoid(&v, 0.1, 1.0, &[0, 1], RegionShape::Ellipsoid).unwrap();
        assert!((q[0] - 1.25).abs() < 1e-12, "{q:?}");
        assert!((q[3] - 5.0).abs() < 1e-12, "{q:?}");
        assert!(q[1].abs() < 1e-12 && q[2].abs() < 1e-12);
    }

    #[test]
    fn maxdet_isotropic_gives_ball() {
        let c = 0.02;
        let v = exact_view(vec![0.0, 0.0], vec![c, 0.0, 0.0, c]);
        let q = maxdet_ellipsoid(&v, 0.2, 1.0, &[0, 1], RegionShape::Ellipsoid).unwrap();
        let want = 0.2 / (2.0 * c);
        assert!((q[0] - want).abs() < 1e-12);
        assert!((q[3] - want).abs() < 1e-12);
    }

    #[test]
    fn rescale_is_identity_on_exact_moments() {
        let v = exact_view(vec![0.1, 0.2], vec![0.05, 0.01, 0.01, 0.03]);
        let q = maxdet_ellipsoid(&v, 0.1, 1.0, &[0, 1], RegionShape::Ellipsoid).unwrap();
        let (s, _) = rescale(&q, &v, 0.1, 1.0, &[0, 1]).unwrap();
        assert!((s - 1.0).abs() < 1e-10, "s = {s}");
    }

    #[test]
    fn rescale_halves_when_bound_doubles() {
        let v = exact_view(vec![0.0, 0.0], vec![0.04, 0.0, 0.0, 0.01]);
        let q = vec![1.0, 0.0, 0.0, 1.0];
        let (s1, _) = rescale(&q, &v, 0.1, 1.0, &[0, 1]).unwrap();
        // doubling every covariance doubles the constraint value
        let v2 = exact_view(vec![0.0, 0.0], vec![0.08, 0.0, 0.0, 0.02]);
        let (s2, _) = rescale(&q, &v2, 0.1, 1.0, &[0, 1]).unwrap();
        assert!((s1 / s2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn center_offset_direct_formula() {
        // λ_max = 5 with the certificate concentrated on one coordinate
        let p = [5.0, 0.0, 0.0, 1.0];
        let eps = center_offset_bound(&p, &[0, 1], &[0.01, 0.0]).unwrap();
        assert!((eps - 0.01 * 5.0f64.sqrt()).abs() < 1e-15);
        let zero = center_offset_bound(&p, &[0, 1], &[0.0, 0.0]).unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn center_offset_dominates_box() {
        // ‖v‖_P ≤ ε for every |v_i| ≤ Ē_i, sampled
        let p = [1.25, 0.3, 0.3, 5.0];
        let err = [0.01, 0.02];
        let eps = center_offset_bound(&p, &[0, 1], &err).unwrap();
        let mut worst: f64 = 0.0;
        for a in 0..100 {
            for b in 0..100 {
                let v = [
                    err[0] * (a as f64 / 49.5 - 1.0),
                    err[1] * (b as f64 / 49.5 - 1.0),
                ];
                let norm = (v[0] * v[0] * p[0] + 2.0 * v[0] * v[1] * p[1] + v[1] * v[1] * p[3])
                    .max(0.0)
                    .sqrt();
                worst = worst.max(norm);
            }
        }
        assert!(worst <= eps + 1e-12, "worst {worst} vs ε {eps}");
    }

    #[test]
    fn region_membership_and_area() {
        let v = exact_view(vec![1.0, 0.8], vec![0.01, 0.0, 0.0, 0.01]);
        let region = build_safety_region(&v, 0.1, 1.0, &[0, 1], RegionShape::Ellipsoid).unwrap();
        assert!(region.contains(&[1.0, 0.8]));
        assert_eq!(region.radius, region.alpha); // exact moments, ε = 0
        let a = region.area().unwrap();
        // det P = (bα²/2)²/det C → area = 2π√det C / b
        let want = 2.0 * std::f64::consts::PI * (0.01f64 * 0.01).sqrt() / 0.1;
        assert!((a - want).abs() < 1e-10 * want, "{a} vs {want}");
        // boundary points lie on the radius
        for (x, y) in region.boundary(64).unwrap() {
            let s = region.seminorm(&[x, y]);
            assert!((s - region.radius).abs() < 1e-9);
        }
    }

    #[test]
    fn scale_invariance_of_maxdet_region() {
        // changing α rescales Q but the α-sublevel region is unchanged
        let v = exact_view(vec![0.2, -0.1], vec![0.05, 0.01, 0.01, 0.02]);
        let q1 = maxdet_ellipsoid(&v, 0.1, 1.0, &[0, 1], RegionShape::Ellipsoid).unwrap();
        let q3 = maxdet_ellipsoid(&v, 0.1, 3.0, &[0, 1], RegionShape::Ellipsoid).unwrap();
        for step in 0..200 {
            let ang = step as f64 * 0.05;
            let x = [0.2 + 0.4 * ang.cos(), -0.1 + 0.4 * ang.sin()];
            let d = [x[0] - 0.2, x[1] + 0.1];
            let n1 = d[0] * d[0] * q1[0] + 2.0 * d[0] * d[1] * q1[1] + d[1] * d[1] * q1[3];
            let n3 = d[0] * d[0] * q3[0] + 2.0 * d[0] * d[1] * q3[1] + d[1] * d[1] * q3[3];
            assert_eq!(n1.sqrt() <= 1.0, n3.sqrt() <= 3.0, "angle {ang}");
        }
    }

    #[test]
    fn ball_shape_is_isotropic() {
        let v = exact_view(vec![0.0, 0.0], vec![0.05, 0.01, 0.01, 0.02]);
        let q = maxdet_ellipsoid(&v, 0.1, 1.0, &[0, 1], RegionShape::Ball).unwrap();
        assert_eq!(q[1], 0.0);
        assert_eq!(q[2], 0.0);
        assert_eq!(q[0], q[3]);
        let want = 0.1 / (0.05 + 0.02);
        assert!((q[0] - want).abs() < 1e-12);
    }
}
