//! Gauss quadrature rules and Jacobi polynomial evaluation.
//!
//! All rules are generated at runtime via the Golub-Welsch eigenvalue method,
//! so exactness is a structural property rather than a table transcription.
//! The triangle rule is a collapsed-coordinate product of Gauss-Legendre and
//! Gauss-Jacobi(1,0) points, exact for total degree `2n - 1` per direction
//! count `n`.

use nalgebra::DMatrix;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Evaluate the orthonormal Jacobi polynomial `P_n^{(alpha,beta)}` at `x`.
///
/// Normalized so that `∫ (1-x)^alpha (1+x)^beta P_m P_n dx = δ_mn` on [-1,1].
pub fn jacobi(x: f64, alpha: usize, beta: usize, n: usize) -> f64 {
    jacobi_seq(x, alpha, beta, n)[n]
}

/// Values of `P_k^{(alpha,beta)}(x)` for `k = 0..=n` (orthonormal).
pub fn jacobi_seq(x: f64, alpha: usize, beta: usize, n: usize) -> Vec<f64> {
    let (a, b) = (alpha as f64, beta as f64);
    let mut p = Vec::with_capacity(n + 1);
    let gamma0 = 2f64.powf(a + b + 1.0) / (a + b + 1.0) * factorial(alpha) * factorial(beta)
        / factorial(alpha + beta);
    p.push(1.0 / gamma0.sqrt());
    if n == 0 {
        return p;
    }
    let gamma1 = (a + 1.0) * (b + 1.0) / (a + b + 3.0) * gamma0;
    p.push(((a + b + 2.0) * x / 2.0 + (a - b) / 2.0) / gamma1.sqrt());
    let mut aold = 2.0 / (2.0 + a + b) * ((a + 1.0) * (b + 1.0) / (a + b + 3.0)).sqrt();
    for i in 1..n {
        let fi = i as f64;
        let h1 = 2.0 * fi + a + b;
        let anew = 2.0 / (h1 + 2.0)
            * ((fi + 1.0) * (fi + 1.0 + a + b) * (fi + 1.0 + a) * (fi + 1.0 + b)
                / ((h1 + 1.0) * (h1 + 3.0)))
                .sqrt();
        let bnew = -(a * a - b * b) / (h1 * (h1 + 2.0));
        let pnext = (-aold * p[i - 1] + (x - bnew) * p[i]) / anew;
        p.push(pnext);
        aold = anew;
    }
    p
}

/// Derivative of the orthonormal Jacobi polynomial.
pub fn jacobi_deriv(x: f64, alpha: usize, beta: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        let nf = n as f64;
        (nf * (nf + alpha as f64 + beta as f64 + 1.0)).sqrt()
            * jacobi(x, alpha + 1, beta + 1, n - 1)
    }
}

/// `n`-point Gauss-Jacobi rule for the weight `(1-x)^alpha (1+x)^beta` on [-1,1].
///
/// Exact for polynomials of degree `2n - 1` against the weight.
pub fn gauss_jacobi(n: usize, alpha: usize, beta: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one quadrature point");
    let (a, b) = (alpha as f64, beta as f64);
    let mu0 = 2f64.powf(a + b + 1.0) * factorial(alpha) * factorial(beta)
        / factorial(alpha + beta + 1);
    if n == 1 {
        return (vec![(b - a) / (a + b + 2.0)], vec![mu0]);
    }
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let fk = k as f64;
        let diag = if k == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / ((2.0 * fk + a + b) * (2.0 * fk + a + b + 2.0))
        };
        jac[(k, k)] = diag;
        if k + 1 < n {
            let fk1 = fk + 1.0;
            let num = 4.0 * fk1 * (fk1 + a) * (fk1 + b) * (fk1 + a + b);
            let den = (2.0 * fk1 + a + b).powi(2)
                * (2.0 * fk1 + a + b + 1.0)
                * (2.0 * fk1 + a + b - 1.0);
            let off = (num / den).sqrt();
            jac[(k, k + 1)] = off;
            jac[(k + 1, k)] = off;
        }
    }
    let eig = jac.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let x = eig.eigenvalues[i];
            let v0 = eig.eigenvectors[(0, i)];
            (x, mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    pairs.into_iter().unzip()
}

/// `n`-point Gauss-Legendre rule on [-1,1], exact for degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    gauss_jacobi(n, 0, 0)
}

/// Gauss-Lobatto-Legendre nodes (`n >= 2` points including ±1).
///
/// Interior nodes are the Gauss-Jacobi(1,1) points of the matching degree.
pub fn gauss_lobatto_nodes(n: usize) -> Vec<f64> {
    assert!(n >= 2, "Lobatto needs at least the two endpoints");
    let mut nodes = vec![-1.0];
    if n > 2 {
        let (interior, _) = gauss_jacobi(n - 2, 1, 1);
        nodes.extend(interior);
    }
    nodes.push(1.0);
    nodes
}

/// Quadrature on the bi-unit right triangle `{(r,s) >= -1, r+s <= 0}`.
///
/// Collapsed-coordinate product rule: Gauss-Legendre in the `a` direction and
/// Gauss-Jacobi(1,0) in `b` (the Jacobi weight absorbs the Duffy factor), so
/// `n` points per direction integrate total degree `2n - 1` exactly. Weights
/// are positive and sum to 2.
pub fn triangle_quadrature(n: usize) -> (Vec<[f64; 2]>, Vec<f64>) {
    let (ga, wa) = gauss_legendre(n);
    let (gb, wb) = gauss_jacobi(n, 1, 0);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (ia, &a) in ga.iter().enumerate() {
        for (ib, &b) in gb.iter().enumerate() {
            let r = 0.5 * (1.0 + a) * (1.0 - b) - 1.0;
            let s = b;
            points.push([r, s]);
            // dr ds = (1-b)/2 da db; the (1-b) lives in the Jacobi weight.
            weights.push(0.5 * wa[ia] * wb[ib]);
        }
    }
    (points, weights)
}

/// Map collapsed coordinates `(a,b)` on the square to `(r,s)` on the triangle.
pub fn collapsed_to_triangle(a: f64, b: f64) -> [f64; 2] {
    [0.5 * (1.0 + a) * (1.0 - b) - 1.0, b]
}

/// Inverse of [`collapsed_to_triangle`]; at the singular vertex `s = 1`
/// returns `a = -1` by convention.
pub fn triangle_to_collapsed(r: f64, s: f64) -> [f64; 2] {
    let a = if (1.0 - s).abs() > 1e-14 {
        2.0 * (1.0 + r) / (1.0 - s) - 1.0
    } else {
        -1.0
    };
    [a, s]
}

/// Exact integral of the monomial `r^m s^n` over the bi-unit triangle.
///
/// Integrating out `s` first gives a closed form free of the cancellation
/// that plagues binomial expansions at high degree:
/// `I(m,n) = (-1)^{n+1}/(n+1) * (E(m+n+1) - E(m))` with
/// `E(k) = ∫ r^k dr = 2/(k+1)` for even `k` and 0 otherwise.
pub fn triangle_monomial_integral(m: usize, n: usize) -> f64 {
    let e = |k: usize| if k % 2 == 0 { 2.0 / (k as f64 + 1.0) } else { 0.0 };
    let sign = if (n + 1) % 2 == 0 { 1.0 } else { -1.0 };
    sign / (n as f64 + 1.0) * (e(m + n + 1) - e(m))
}
