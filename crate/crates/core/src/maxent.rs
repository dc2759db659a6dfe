//! Dual solvers for entropy maximization under linear constraints.
//!
//! The primal optimum has the form ρ(θ) = exp(Σ_j θ_j A_j + log σ)/Z(θ) and
//! θ minimizes the convex dual log Z(θ) − θ·c (+ ε‖θ‖₁ when every
//! constraint is relaxed to |tr(A_j ρ) − c_j| ≤ ε).

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, RMat, RVec};
use crate::operator::Operator;
use crate::reconstruction::{ConstraintSet, REDUCTION_TOL};

#[derive(Clone, Debug)]
pub(crate) struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub armijo: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-10, max_iter: 200, armijo: 1e-4 }
    }
}

pub(crate) struct SolveOutcome {
    pub rho: CMat,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
}

/// The exponential family generated by a set of traceless constraint
/// operators, optionally tilted by a prior.
pub(crate) struct Family {
    cs: ConstraintSet,
    q: RMat,
    c: RVec,
    ops: Vec<CMat>,
    log_prior: Option<CMat>,
}

struct Eval {
    f: f64,
    rho: CMat,
    vals: Vec<f64>,
    vecs: CMat,
    p: Vec<f64>,
    mean: RVec,
}

/// Minimum-norm least-squares solution through a truncated SVD with two
/// steps of iterative refinement.
pub(crate) fn least_squares(m: &RMat, b: &RVec) -> RVec {
    if m.nrows() == 0 {
        return RVec::zeros(m.ncols());
    }
    let svd = linalg::thin_svd(m);
    let cut = REDUCTION_TOL * svd.singular_values.max();
    let solve = |r: &RVec| svd.solve(r, cut).unwrap_or_else(|_| RVec::zeros(m.ncols()));
    let mut x = solve(b);
    for _ in 0..2 {
        x += solve(&(b - m * &x));
    }
    x
}

impl Family {
    /// With `eps == 0` the constraints are first reduced to an orthonormal
    /// set of independent rows; otherwise they are kept as given so that
    /// each one carries its own multiplier.
    pub fn new(cs: &ConstraintSet, prior: Option<&Operator>, eps: f64) -> Result<Self> {
        let (m, b) = cs.traceless();
        let (q, c) = if eps > 0.0 || m.nrows() == 0 {
            (m, b)
        } else {
            let svd = linalg::thin_svd(&m);
            let s = &svd.singular_values;
            let cut = REDUCTION_TOL * s.max();
            let keep: Vec<usize> = (0..s.len()).filter(|&j| s[j] > cut).collect();
            let u = svd.u.as_ref().expect("requested");
            let vt = svd.v_t.as_ref().expect("requested");
            let q = RMat::from_fn(keep.len(), m.ncols(), |r, col| vt[(keep[r], col)]);
            // refine against m itself: Uᵀb/σ alone amplifies the
            // factorization error by 1/σ_min
            let solve = |r: &RVec| {
                let utr = u.transpose() * r;
                RVec::from_iterator(keep.len(), keep.iter().map(|&j| utr[j] / s[j]))
            };
            let mut c = solve(&b);
            for _ in 0..2 {
                let x = q.transpose() * &c;
                c += solve(&(&b - &m * x));
            }
            (q, c)
        };
        let ops = (0..q.nrows()).map(|j| cs.operator_from_traceless(&q.row(j).transpose())).collect();
        let log_prior = match prior {
            Some(p) => {
                let (vals, _) = linalg::eigh(p.matrix());
                if vals[0] <= 1e-14 || !p.is_density() {
                    return Err(Error::InvalidArgument("prior must be a full-rank density operator".into()));
                }
                Some(linalg::hermitian_fn(p.matrix(), f64::ln))
            }
            None => None,
        };
        Ok(Family { cs: cs.clone(), q, c, ops, log_prior })
    }

    fn len(&self) -> usize {
        self.q.nrows()
    }

    fn eval(&self, theta: &RVec) -> Eval {
        let y = self.q.transpose() * theta;
        let mut g = self.cs.operator_from_traceless(&y);
        if let Some(lp) = &self.log_prior {
            g += lp;
        }
        let (vals, vecs) = linalg::eigh(&g);
        let gmax = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = vals.iter().map(|v| (v - gmax).exp()).collect();
        let z: f64 = e.iter().sum();
        let p: Vec<f64> = e.iter().map(|x| x / z).collect();
        let rho = linalg::from_spectrum(&p, &vecs);
        let mean = &self.q * self.cs.traceless_of(&rho);
        let f = gmax + z.ln() - theta.dot(&self.c);
        Eval { f, rho, vals, vecs, p, mean }
    }

    /// Kubo–Mori covariance of the constraint operators at `ev`.
    fn hessian(&self, ev: &Eval) -> RMat {
        let d = ev.vals.len();
        let r = self.len();
        let mut sw = vec![0.0; d * d];
        for a in 0..d {
            for b in 0..d {
                let gap = ev.vals[a] - ev.vals[b];
                let w = if gap.abs() > 1e-10 {
                    (ev.p[a] - ev.p[b]) / gap
                } else {
                    0.5 * (ev.p[a] + ev.p[b])
                };
                sw[b * d + a] = w.max(0.0).sqrt();
            }
        }
        let uh = ev.vecs.adjoint();
        let mut y = CMat::zeros(r, d * d);
        for (j, a) in self.ops.iter().enumerate() {
            let t = &uh * a * &ev.vecs;
            for (idx, z) in t.iter().enumerate() {
                y[(j, idx)] = z * sw[idx];
            }
        }
        let yy = linalg::matmul(&y, &y.adjoint());
        let mut h = yy.map(|z| z.re);
        h -= &ev.mean * ev.mean.transpose();
        h
    }
}

fn solve_damped(h: &RMat, rhs: &RVec) -> RVec {
    let scale = h.diagonal().amax().max(1e-300);
    let mut lambda = 1e-12 * scale;
    loop {
        let mut a = h.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += lambda;
        }
        if let Some(ch) = a.cholesky() {
            return ch.solve(rhs);
        }
        lambda *= 100.0;
        if lambda > 1e6 * scale {
            return rhs / scale;
        }
    }
}

/// Damped Newton on the equality-constrained dual.
pub(crate) fn newton(fam: &Family, opts: &SolveOptions) -> SolveOutcome {
    let r = fam.len();
    let mut theta = RVec::zeros(r);
    let mut ev = fam.eval(&theta);
    let mut trace = Vec::new();
    let mut best = (f64::INFINITY, ev.rho.clone());
    for it in 0..opts.max_iter {
        let grad = &ev.mean - &fam.c;
        let gn = if r == 0 { 0.0 } else { grad.amax() };
        trace.push(gn);
        if gn < best.0 {
            best = (gn, ev.rho.clone());
        }
        if gn < opts.tol {
            return SolveOutcome { rho: ev.rho, iterations: it, converged: true, trace };
        }
        let h = fam.hessian(&ev);
        let step = solve_damped(&h, &(-&grad));
        let slope = grad.dot(&step);
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-12 {
            let cand = &theta + &step * t;
            let e2 = fam.eval(&cand);
            let g2 = (&e2.mean - &fam.c).amax();
            if e2.f <= ev.f + opts.armijo * t * slope || g2 < 0.5 * gn {
                accepted = Some((cand, e2));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((c, e)) => {
                theta = c;
                ev = e;
            }
            None => {
                return SolveOutcome { rho: best.1, iterations: it + 1, converged: false, trace };
            }
        }
    }
    let gn = if r == 0 { 0.0 } else { (&ev.mean - &fam.c).amax() };
    trace.push(gn);
    if gn < best.0 {
        best = (gn, ev.rho);
    }
    SolveOutcome { rho: best.1, iterations: opts.max_iter, converged: gn < opts.tol, trace }
}

fn soft_threshold(x: &RVec, k: f64) -> RVec {
    x.map(|v| v.signum() * (v.abs() - k).max(0.0))
}

/// Distance of −∇f from ε∂‖θ‖₁, the optimality measure of the ℓ1 dual.
fn l1_kkt(theta: &RVec, grad: &RVec, eps: f64) -> f64 {
    theta
        .iter()
        .zip(grad.iter())
        .map(|(&t, &g)| if t != 0.0 { (g + eps * t.signum()).abs() } else { (g.abs() - eps).max(0.0) })
        .fold(0.0, f64::max)
}

/// Accelerated proximal gradient with backtracking and adaptive restart on
/// log Z(θ) − θ·c + ε‖θ‖₁.
pub(crate) fn fista_l1(fam: &Family, eps: f64, opts: &SolveOptions) -> SolveOutcome {
    let r = fam.len();
    let tol = opts.tol.max(1e-8);
    let obj = |ev: &Eval, th: &RVec| ev.f + eps * th.iter().map(|v| v.abs()).sum::<f64>();
    let mut theta = RVec::zeros(r);
    let mut ev_theta = fam.eval(&theta);
    let mut y = theta.clone();
    let mut t: f64 = 1.0;
    let mut lip = 1.0;
    let mut trace = Vec::new();
    let mut best = (f64::INFINITY, ev_theta.rho.clone());
    for it in 0..opts.max_iter {
        let ev_y = fam.eval(&y);
        let grad_y = &ev_y.mean - &fam.c;
        let (next, ev_next) = loop {
            let cand = soft_threshold(&(&y - &grad_y / lip), eps / lip);
            let e = fam.eval(&cand);
            let d = &cand - &y;
            if e.f <= ev_y.f + grad_y.dot(&d) + 0.5 * lip * d.norm_squared() + 1e-15 * ev_y.f.abs() || lip > 1e12 {
                break (cand, e);
            }
            lip *= 2.0;
        };
        let grad_next = &ev_next.mean - &fam.c;
        let kkt = l1_kkt(&next, &grad_next, eps);
        trace.push(kkt);
        let viol = grad_next.iter().map(|g| (g.abs() - eps).max(0.0)).fold(0.0, f64::max);
        if viol < best.0 {
            best = (viol, ev_next.rho.clone());
        }
        if kkt < tol {
            return SolveOutcome { rho: ev_next.rho, iterations: it + 1, converged: true, trace };
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        if obj(&ev_next, &next) > obj(&ev_theta, &theta) {
            y = next.clone();
            t = 1.0;
        } else {
            y = &next + (&next - &theta) * ((t - 1.0) / t_next);
            t = t_next;
        }
        theta = next;
        ev_theta = ev_next;
        lip *= 0.95;
    }
    SolveOutcome { rho: best.1, iterations: opts.max_iter, converged: false, trace }
}

/// Projected accelerated gradient on ½‖(|My − b| − ε)₊‖² over the traceless
/// coordinates of density operators. Returns the final coordinates.
pub(crate) fn hinge_feasibility(cs: &ConstraintSet, m: &RMat, b: &RVec, eps: f64, start: &RVec, iters: usize) -> RVec {
    let hinge = |y: &RVec| (m * y - b).map(|r| r.signum() * (r.abs() - eps).max(0.0));
    let project = |y: &RVec| cs.traceless_of(&linalg::project_to_density(&cs.state_from_traceless(y)));
    let lip = spectral_norm_sq(m).max(1e-12);
    let mut x = project(start);
    let mut z = x.clone();
    let mut t: f64 = 1.0;
    for _ in 0..iters {
        let h = hinge(&z);
        let next = project(&(&z - m.transpose() * h / lip));
        if hinge(&next).amax() <= 1e-10 {
            return next;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = &next + (&next - &x) * ((t - 1.0) / t_next);
        x = next;
        t = t_next;
    }
    x
}

fn spectral_norm_sq(m: &RMat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let mut v = RVec::from_element(m.ncols(), 1.0 / (m.ncols() as f64).sqrt());
    let mut est = 0.0;
    for _ in 0..100 {
        let w = m.transpose() * (m * &v);
        let n = w.norm();
        if n == 0.0 {
            return 0.0;
        }
        v = w / n;
        if (n - est).abs() <= 1e-6 * n {
            return n * 1.01;
        }
        est = n;
    }
    est * 1.01
}

/// Smallest t ∈ [0, 1] with |(1 − t)·r_s + t·r_w| ≤ limit componentwise,
/// assuming the witness residuals r_w already satisfy the bound.
pub(crate) fn minimal_blend(r_s: &RVec, r_w: &RVec, limit: f64) -> f64 {
    let mut t: f64 = 0.0;
    for (&s, &w) in r_s.iter().zip(r_w.iter()) {
        let slope = w - s;
        let need = if s > limit && slope < 0.0 {
            (limit - s) / slope
        } else if s < -limit && slope > 0.0 {
            (-limit - s) / slope
        } else if s.abs() > limit {
            1.0
        } else {
            0.0
        };
        t = t.max(need);
    }
    t.clamp(0.0, 1.0)
}

/// Umegaki relative entropy tr ρ(log ρ − log σ); infinite when the support
/// of ρ is not contained in that of σ.
pub fn relative_entropy(rho: &CMat, sigma: &CMat) -> f64 {
    let (sv, svecs) = linalg::eigh(sigma);
    let (rv, rvecs) = linalg::eigh(rho);
    let mut total = 0.0;
    for (a, &p) in rv.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        total += p * p.ln();
        let ra = rvecs.column(a);
        for (b, &s) in sv.iter().enumerate() {
            let overlap = svecs.column(b).dotc(&ra).norm_sqr();
            if overlap <= 1e-300 {
                continue;
            }
            if s <= 0.0 {
                return f64::INFINITY;
            }
            total -= p * overlap * s.ln();
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    #[test]
    fn blend_is_zero_when_already_feasible() {
        let r = RVec::from_vec(vec![0.01, -0.02]);
        let w = RVec::zeros(2);
        assert_eq!(minimal_blend(&r, &w, 0.05), 0.0);
    }

    #[test]
    fn blend_hits_the_bound_exactly() {
        let r = RVec::from_vec(vec![0.2, -0.1]);
        let w = RVec::zeros(2);
        let t = minimal_blend(&r, &w, 0.05);
        assert!((t - 0.75).abs() < 1e-15);
    }

    #[test]
    fn relative_entropy_of_equal_states_vanishes() {
        let s = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(0.3, 0.0), C64::new(0.7, 0.0)]));
        assert!(relative_entropy(&s, &s).abs() < 1e-15);
        let m = CMat::identity(2, 2) * C64::new(0.5, 0.0);
        let expect = 0.3 * (0.3f64 / 0.5).ln() + 0.7 * (0.7f64 / 0.5).ln();
        assert!((relative_entropy(&s, &m) - expect).abs() < 1e-14);
        let pure = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]));
        assert!(relative_entropy(&m, &pure).is_infinite());
    }

    #[test]
    fn soft_threshold_shrinks_towards_zero() {
        let x = RVec::from_vec(vec![1.0, -0.2, 0.05]);
        let y = soft_threshold(&x, 0.1);
        assert_eq!(y.as_slice(), &[0.9, -0.1, 0.0]);
    }
}
