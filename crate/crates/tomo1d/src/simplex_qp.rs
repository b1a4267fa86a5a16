//! Quadratic programming over the probability simplex.
//!
//! Minimizes `p' Q p - 2 b' p` subject to `p >= 0`, `sum p = 1`, with `Q`
//! positive semidefinite. Accelerated projected gradient finds the active
//! set; an exact solve on that set polishes the result. Degenerate
//! directions (singular `Q` on the active face) are resolved toward the
//! uniform point by a minimum-norm reduced solve, which is what breaks ties
//! deterministically.

use nalgebra::{DMatrix, DVector};

/// Euclidean projection onto the probability simplex.
pub fn project_to_simplex(v: &DVector<f64>) -> DVector<f64> {
    let n = v.len();
    let mut sorted: Vec<f64> = v.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &vj) in sorted.iter().enumerate() {
        cumsum += vj;
        let t = (cumsum - 1.0) / (j as f64 + 1.0);
        if vj - t > 0.0 {
            tau = t;
        }
    }
    let mut p = v.map(|x| (x - tau).max(0.0));
    let s: f64 = p.iter().sum();
    if s > 0.0 {
        p /= s;
    } else {
        p.fill(1.0 / n as f64);
    }
    p
}

fn objective(q: &DMatrix<f64>, b: &DVector<f64>, p: &DVector<f64>) -> f64 {
    p.dot(&(q * p)) - 2.0 * b.dot(p)
}

/// Solve the simplex QP starting from `init` (or the uniform point).
pub fn minimize_simplex_qp(
    q: &DMatrix<f64>,
    b: &DVector<f64>,
    init: Option<&DVector<f64>>,
    tol: f64,
    max_iters: usize,
) -> DVector<f64> {
    let n = b.len();
    assert_eq!(q.nrows(), n);
    assert_eq!(q.ncols(), n);
    if n == 1 {
        return DVector::from_element(1, 1.0);
    }
    let uniform = DVector::from_element(n, 1.0 / n as f64);
    let scale = q.diagonal().amax().max(b.amax()).max(1.0);

    let lmax = nalgebra::SymmetricEigen::new(q.clone())
        .eigenvalues
        .amax()
        .max(1e-12 * scale);

    let mut p = init
        .map(|p0| project_to_simplex(p0))
        .unwrap_or_else(|| uniform.clone());
    let mut momentum = p.clone();
    let mut t_acc = 1.0f64;
    let mut f_prev = objective(q, b, &p);

    for _ in 0..max_iters {
        let grad = q * &momentum - b;
        let cand = project_to_simplex(&(&momentum - grad / lmax));
        let f_cand = objective(q, b, &cand);
        if f_cand > f_prev {
            // Restart the acceleration from the best known point.
            momentum = p.clone();
            t_acc = 1.0;
            let grad = q * &momentum - b;
            let cand = project_to_simplex(&(&momentum - grad / lmax));
            let step = (&cand - &p).amax();
            p = cand;
            f_prev = objective(q, b, &p);
            momentum = p.clone();
            if step <= tol {
                break;
            }
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_acc * t_acc).sqrt());
        momentum = &cand + ((t_acc - 1.0) / t_next) * (&cand - &p);
        t_acc = t_next;
        let step = (&cand - &p).amax();
        p = cand;
        f_prev = f_cand;
        if step <= tol {
            break;
        }
    }

    // Exact solve on the active set found by the projected gradient phase.
    if let Some(polished) = active_set_polish(q, b, &p) {
        if objective(q, b, &polished) <= objective(q, b, &p) + 1e-14 * scale {
            p = polished;
        }
    }

    // Exact renormalization so downstream simplex invariants hold.
    for x in p.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let s: f64 = p.iter().sum();
    if s > 0.0 {
        p /= s;
    } else {
        p = uniform;
    }
    p
}

/// Orthonormal basis of the zero-sum subspace of R^m (m >= 2): column k has
/// `1/sqrt(k(k+1))` in its first k entries and `-k/sqrt(k(k+1))` next.
fn zero_sum_basis(m: usize) -> DMatrix<f64> {
    let mut z = DMatrix::zeros(m, m - 1);
    for k in 1..m {
        let c = 1.0 / ((k * (k + 1)) as f64).sqrt();
        for j in 0..k {
            z[(j, k - 1)] = c;
        }
        z[(k, k - 1)] = -(k as f64) * c;
    }
    z
}

/// Active-set refinement. On the free set F the problem reduces over
/// `p_F = u_F + Z w` (u_F uniform on F, Z a zero-sum basis) to the
/// unconstrained quadratic `(Z'QZ) w = Z'(b - Q u_F)`, solved with a
/// pseudo-inverse so that degenerate directions keep `w = 0`, i.e. stay at
/// the uniform point. Coordinates that the solve drives negative are
/// clamped; clamped coordinates with a strictly improving reduced gradient
/// are freed again.
fn active_set_polish(q: &DMatrix<f64>, b: &DVector<f64>, p: &DVector<f64>) -> Option<DVector<f64>> {
    let n = p.len();
    let mut free: Vec<bool> = (0..n).map(|i| p[i] > 1e-12).collect();
    if !free.iter().any(|&f| f) {
        free = vec![true; n];
    }
    let scale = q.diagonal().amax().max(b.amax()).max(1.0);

    for _ in 0..(3 * n + 4) {
        let idx: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
        let m = idx.len();
        if m == 0 {
            return None;
        }
        let mut cand = DVector::zeros(n);
        if m == 1 {
            cand[idx[0]] = 1.0;
        } else {
            let qf = DMatrix::from_fn(m, m, |r, c| q[(idx[r], idx[c])]);
            let bf = DVector::from_fn(m, |r, _| b[idx[r]]);
            let uf = DVector::from_element(m, 1.0 / m as f64);
            let z = zero_sum_basis(m);
            let reduced = z.transpose() * &qf * &z;
            let rhs = z.transpose() * (&bf - &qf * &uf);
            let svd = nalgebra::SVD::new(reduced, true, true);
            let cutoff = 1e-12 * svd.singular_values.max().max(1e-300);
            let w = svd.solve(&rhs, cutoff).ok()?;
            let pf = uf + &z * w;
            for (r, &i) in idx.iter().enumerate() {
                cand[i] = pf[r];
            }
        }

        // Primal feasibility: clamp the most negative coordinate and retry.
        let mut worst: Option<(usize, f64)> = None;
        for &i in &idx {
            if cand[i] < -1e-12 && worst.map_or(true, |(_, v)| cand[i] < v) {
                worst = Some((i, cand[i]));
            }
        }
        if let Some((i, _)) = worst {
            free[i] = false;
            continue;
        }
        for x in cand.iter_mut() {
            if *x < 0.0 {
                *x = 0.0;
            }
        }

        // Stationarity on F gives grad_F = -nu 1 up to the degenerate
        // directions; a clamped coordinate with grad_i + nu < 0 improves the
        // objective along (e_i - e_j), so free it.
        let grad = 2.0 * (q * &cand - b);
        let nu = -idx.iter().map(|&i| grad[i]).sum::<f64>() / m as f64;
        let mut violated: Option<(usize, f64)> = None;
        for i in 0..n {
            if !free[i] {
                let reduced = grad[i] + nu;
                if reduced < -1e-10 * scale && violated.map_or(true, |(_, v)| reduced < v) {
                    violated = Some((i, reduced));
                }
            }
        }
        if let Some((i, _)) = violated {
            free[i] = true;
            continue;
        }
        return Some(cand);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(q: &DMatrix<f64>, b: &DVector<f64>, steps: usize) -> f64 {
        // Exhaustive scan on a 3-simplex lattice.
        let mut best = f64::INFINITY;
        for i in 0..=steps {
            for j in 0..=(steps - i) {
                let k = steps - i - j;
                let p = DVector::from_vec(vec![
                    i as f64 / steps as f64,
                    j as f64 / steps as f64,
                    k as f64 / steps as f64,
                ]);
                best = best.min(objective(q, b, &p));
            }
        }
        best
    }

    #[test]
    fn interior_optimum() {
        // ||p - b||^2 with b already on the simplex.
        let q = DMatrix::identity(3, 3);
        let b = DVector::from_vec(vec![0.2, 0.3, 0.5]);
        let p = minimize_simplex_qp(&q, &b, None, 1e-12, 50_000);
        assert!((&p - &b).amax() < 1e-9, "{p}");
    }

    #[test]
    fn boundary_optimum_matches_projection() {
        let q = DMatrix::identity(3, 3);
        let b = DVector::from_vec(vec![1.2, 0.1, -0.4]);
        let p = minimize_simplex_qp(&q, &b, None, 1e-12, 50_000);
        let proj = project_to_simplex(&b);
        assert!((&p - &proj).amax() < 1e-9, "{p} vs {proj}");
    }

    #[test]
    fn tie_break_toward_uniform() {
        // Objective -2(p1 + p2): any split between the first two coordinates
        // is optimal; the tie-break picks the even one.
        let q = DMatrix::zeros(3, 3);
        let b = DVector::from_vec(vec![1.0, 1.0, 0.0]);
        let p = minimize_simplex_qp(&q, &b, None, 1e-12, 50_000);
        assert!((p[0] - 0.5).abs() < 1e-9 && (p[1] - 0.5).abs() < 1e-9, "{p}");
        assert!(p[2] < 1e-9);
    }

    #[test]
    fn fully_degenerate_returns_uniform() {
        let q = DMatrix::zeros(4, 4);
        let b = DVector::zeros(4);
        let p = minimize_simplex_qp(&q, &b, None, 1e-12, 10_000);
        for i in 0..4 {
            assert!((p[i] - 0.25).abs() < 1e-9, "{p}");
        }
    }

    #[test]
    fn beats_lattice_scan_on_random_instances() {
        use crate::seed::derive_rng;
        use rand::RngExt;
        let mut rng = derive_rng(11, "qp_rand", 0);
        for trial in 0..25 {
            let g = DMatrix::from_fn(3, 3, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let q = &g * g.transpose();
            let b = DVector::from_fn(3, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let p = minimize_simplex_qp(&q, &b, None, 1e-12, 50_000);
            let got = objective(&q, &b, &p);
            let lattice = brute_force(&q, &b, 120);
            assert!(
                got <= lattice + 1e-9,
                "trial {trial}: {got} vs lattice {lattice}"
            );
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(p.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn warm_start_is_respected() {
        let q = DMatrix::identity(2, 2);
        let b = DVector::from_vec(vec![0.9, 0.1]);
        let init = DVector::from_vec(vec![0.9, 0.1]);
        let p = minimize_simplex_qp(&q, &b, Some(&init), 1e-12, 10_000);
        assert!((&p - &b).amax() < 1e-9);
    }
}
