//! Policy evaluation: the discretised Poisson equation
//!
//! ```text
//! v(y_i) = r(y_i) − ρ g(y_i) + (P v)(y_i),   i = 0..M−1
//! v(y_0) = 0,   v(y_M) − v(y_{M−1}) = s·dt
//! ```
//!
//! Row `i` of `P` is the idle-return distribution truncated at `θ(y_i)` plus
//! a single preemption entry at column `i + θ/dt > i` (or the far-field
//! column `M`). The truncated idle-return rows take only as many distinct
//! forms as there are distinct thresholds `K`, so the system is solved by
//! direct elimination: back-substitute every `v_i` as an affine function of
//! the border unknowns `(v_M, ρ, d_1..d_K)`, where `d_k` is the idle-return
//! value of threshold band `k`, then solve the `(K+2)`-square border system
//! with LU. Work is `O(M·K + K³)`.

use nalgebra::{DMatrix, DVector};

use super::idle::SampleTarget;
use super::kernel::QuadratureKernel;
use super::{SolverError, StationaryPolicy};
use crate::grids::{Grids, Theta};

/// Tolerance on `‖(I − P)v + ρg − r‖∞ / (1 + ‖r‖∞)` accepted from a solve.
pub const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub rho: f64,
    pub v: Vec<f64>,
    /// `‖(I − P)v + ρg − r‖∞` over all rows including the closure
    pub residual: f64,
    /// `‖r‖∞`
    pub rhs_norm: f64,
    /// distinct thresholds in the evaluated policy
    pub bands: usize,
}

/// Per-row data of the Poisson system.
#[derive(Debug, Clone)]
pub struct PoissonRows {
    pub g: Vec<f64>,
    pub r: Vec<f64>,
    /// preemption entry `(column, F̄(θ))`
    pub shift: Vec<Option<(usize, f64)>>,
    /// band key: `J` for finite `θ = J·dt`, `n + 1` for never
    pub key: Vec<usize>,
    /// column of `v(z(t_j))` for each action node
    pub col: Vec<usize>,
    /// tail mass of deliveries past the last action node (column `M`)
    pub far_mass: f64,
}

pub fn assemble(
    policy: &StationaryPolicy,
    kernel: &QuadratureKernel,
    grids: &Grids,
    kappa_s: f64,
    kappa_p: f64,
) -> PoissonRows {
    let m = grids.m();
    let n = kernel.n;
    let dt = grids.dt();
    let s = grids.slope;
    let y_m = grids.y_cut();

    let mut wait = Vec::with_capacity(n + 1);
    let mut idle = Vec::with_capacity(n + 1);
    let mut col = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let t = j as f64 * dt;
        let target = if j <= m {
            policy.z[j]
        } else {
            SampleTarget::Far(t.max(policy.far_target))
        };
        let z = target.aoi(dt);
        let w = (z - t).max(0.0);
        let (c, offset) = match target {
            SampleTarget::Node(k) => (k, 0.0),
            SampleTarget::Far(z) => (m, s * (z - y_m)),
        };
        wait.push(w);
        idle.push(kappa_s + t * w + 0.5 * w * w + offset);
        col.push(c);
    }
    let g_prefix = kernel.prefix(&wait);
    let r_prefix = kernel.prefix(&idle);
    let far = kernel.far_deliveries(policy.far_target, y_m);
    let g_never = g_prefix[n] + far.wait;
    let r_never = r_prefix[n] + far.idle_area + kappa_s * far.mass + s * far.overshoot;

    let mut rows = PoissonRows {
        g: Vec::with_capacity(m),
        r: Vec::with_capacity(m),
        shift: Vec::with_capacity(m),
        key: Vec::with_capacity(m),
        col,
        far_mass: far.mass,
    };
    for i in 0..m {
        let y = i as f64 * dt;
        match policy.theta[i] {
            Theta::Never => {
                rows.g.push(kernel.mean + g_never);
                rows.r.push(y * kernel.mean + 0.5 * kernel.second + r_never);
                rows.shift.push(None);
                rows.key.push(n + 1);
            }
            Theta::Finite(j) => {
                let (a, j1, tail) = (kernel.a[j], kernel.j1[j], kernel.tail[j]);
                let mut r = y * a + j1 + tail * kappa_p + r_prefix[j];
                let next = i + j;
                let c = if next > m {
                    r += tail * s * ((next - m) as f64 * dt);
                    m
                } else {
                    next
                };
                rows.g.push(a + g_prefix[j]);
                rows.r.push(r);
                rows.shift.push(Some((c, tail)));
                rows.key.push(j);
            }
        }
    }
    rows
}

pub fn policy_evaluate(
    policy: &StationaryPolicy,
    kernel: &QuadratureKernel,
    grids: &Grids,
    kappa_s: f64,
    kappa_p: f64,
) -> Result<Evaluation, SolverError> {
    let m = grids.m();
    let n = kernel.n;
    let dt = grids.dt();
    let rows = assemble(policy, kernel, grids, kappa_s, kappa_p);

    let mut keys: Vec<usize> = rows.key.clone();
    keys.sort_unstable();
    keys.dedup();
    let k_count = keys.len();
    let width = k_count + 2;
    let band_of = |key: usize| keys.binary_search(&key).expect("key present");

    // v_i = alpha_i + beta_i · u,  u = (v_M, ρ, d_1..d_K)
    let mut alpha = vec![0.0; m + 1];
    let mut beta = vec![0.0; (m + 1) * width];
    beta[m * width] = 1.0;
    for i in (0..m).rev() {
        let (head, tail_rows) = beta.split_at_mut((i + 1) * width);
        let row = &mut head[i * width..];
        row[1] = -rows.g[i];
        row[2 + band_of(rows.key[i])] += 1.0;
        alpha[i] = rows.r[i];
        if let Some((c, p)) = rows.shift[i] {
            let src = &tail_rows[(c - i - 1) * width..(c - i) * width];
            for (dst, s) in row.iter_mut().zip(src) {
                *dst += p * s;
            }
            alpha[i] += p * alpha[c];
        }
    }

    let mut mat = DMatrix::<f64>::zeros(width, width);
    let mut rhs = DVector::<f64>::zeros(width);
    // v_0 = 0
    for b in 0..width {
        mat[(0, b)] = beta[b];
    }
    rhs[0] = -alpha[0];
    // v_M − v_{M−1} = s·dt
    for b in 0..width {
        mat[(1, b)] = -beta[(m - 1) * width + b];
    }
    mat[(1, 0)] += 1.0;
    rhs[1] = grids.slope * dt + alpha[m - 1];

    // band rows: d_k − d_{k−1} = Σ_{cells in band} weights · v(z(t))
    let mut coef = vec![0.0; m + 1];
    let mut touched: Vec<usize> = Vec::new();
    let mut start = 0usize;
    for (k, &key) in keys.iter().enumerate() {
        let end = key.min(n);
        for j in start..end {
            for (c, w) in [
                (rows.col[j], kernel.w_left[j]),
                (rows.col[j + 1], kernel.w_right[j]),
            ] {
                if w != 0.0 {
                    if coef[c] == 0.0 {
                        touched.push(c);
                    }
                    coef[c] += w;
                }
            }
        }
        if key > n {
            if coef[m] == 0.0 {
                touched.push(m);
            }
            coef[m] += rows.far_mass;
        }
        let r = 2 + k;
        mat[(r, r)] += 1.0;
        if k > 0 {
            mat[(r, r - 1)] -= 1.0;
        }
        let mut acc = 0.0;
        for &c in &touched {
            let w = coef[c];
            acc += w * alpha[c];
            let src = &beta[c * width..(c + 1) * width];
            for b in 0..width {
                mat[(r, b)] -= w * src[b];
            }
            coef[c] = 0.0;
        }
        touched.clear();
        rhs[r] = acc;
        start = end.max(start);
    }

    let lu = mat.clone().lu();
    let diag = lu.u().diagonal();
    let (dmax, dmin) = diag.iter().fold((0.0f64, f64::INFINITY), |(a, b), &x| {
        (a.max(x.abs()), b.min(x.abs()))
    });
    let condition = if dmin > 0.0 {
        dmax / dmin
    } else {
        f64::INFINITY
    };
    let u = match lu.solve(&rhs) {
        Some(u) if u.iter().all(|x| x.is_finite()) && condition < 1e14 => u,
        _ => return Err(SolverError::Singular { condition }),
    };

    let mut v: Vec<f64> = (0..=m)
        .map(|i| {
            let row = &beta[i * width..(i + 1) * width];
            alpha[i] + row.iter().zip(u.iter()).map(|(b, x)| b * x).sum::<f64>()
        })
        .collect();
    v[0] = 0.0;
    let rho = u[1];

    let (residual, rhs_norm) = residual(&rows, kernel, grids, &v, rho);
    if residual > RESIDUAL_TOL * (1.0 + rhs_norm) {
        return Err(SolverError::Residual {
            residual,
            bound: RESIDUAL_TOL * (1.0 + rhs_norm),
            condition,
        });
    }
    Ok(Evaluation {
        rho,
        v,
        residual,
        rhs_norm,
        bands: k_count,
    })
}

/// `‖(I − P)v + ρg − r‖∞` and `‖r‖∞`, recomputed row by row from
/// prefix sums (independent of the elimination order used to solve).
pub fn residual(
    rows: &PoissonRows,
    kernel: &QuadratureKernel,
    grids: &Grids,
    v: &[f64],
    rho: f64,
) -> (f64, f64) {
    let m = grids.m();
    let n = kernel.n;
    let vz: Vec<f64> = rows.col.iter().map(|&c| v[c]).collect();
    let d = kernel.prefix(&vz);
    let mut worst: f64 = 0.0;
    let mut norm: f64 = grids.slope * grids.dt();
    for i in 0..m {
        let pv = if rows.key[i] > n {
            d[n] + rows.far_mass * v[m]
        } else {
            d[rows.key[i]]
        } + rows.shift[i].map_or(0.0, |(c, p)| p * v[c]);
        let res = v[i] + rho * rows.g[i] - pv - rows.r[i];
        worst = worst.max(res.abs());
        norm = norm.max(rows.r[i].abs());
    }
    let closure = v[m] - v[m - 1] - grids.slope * grids.dt();
    (worst.max(closure.abs()), norm)
}
