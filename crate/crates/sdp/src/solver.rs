use crate::problem::{SdpError, SdpProblem};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use std::sync::OnceLock;

fn trace_enabled() -> bool {
    static ENABLED: OnceLock<bool> = OnceLock::new();
    *ENABLED.get_or_init(|| std::env::var("DIREX_SDP_TRACE").ok().as_deref() == Some("1"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Converged to the requested gap and feasibility tolerances.
    Optimal,
    /// Farkas certificate found: no PSD X satisfies the equality constraints.
    PrimalInfeasible,
    /// Improving ray found: primal objective unbounded above, dual infeasible.
    DualUnbounded,
    /// Iteration limit reached; best iterate returned with its residuals.
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { gap_tol: 1e-9, feas_tol: 1e-9, max_iter: 200 }
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SolveStatus,
    /// <C, X> at the returned primal point (maximization sense).
    pub primal_value: f64,
    /// b'y at the returned dual point; >= primal_value - gap at optimality.
    pub dual_value: f64,
    /// Dual multiplier per constraint row.
    pub y: Vec<f64>,
    /// Absolute complementarity gap <X, S> of the scaled iterate.
    pub gap: f64,
    /// Minimum eigenvalue of Z(y) = sum_i y_i A_i - C, per block.
    pub min_dual_slack_eig: Vec<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Primal block matrices X (advisory; the certified object is y).
    pub primal_blocks: Vec<DMatrix<f64>>,
}

/// Per-block Nesterov-Todd scaling data.
struct NtScaling {
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    /// Scaled spectrum: lambda with G' S G = G^-1 X G^-T = diag(lambda).
    lambda: DVector<f64>,
    /// W = G G'.
    w: DMatrix<f64>,
}

fn nt_scaling(x: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<NtScaling, SdpError> {
    let d = x.nrows();
    let ls = Cholesky::new(s.clone())
        .ok_or_else(|| SdpError::Numerical("S lost positive definiteness".into()))?;
    let l = ls.l();
    // M = L' X L, symmetric positive definite.
    let m = l.transpose() * x * &l;
    let m = symmetrize(&m);
    let eig = SymmetricEigen::new(m);
    let mut d4 = DVector::zeros(d);
    let mut d4i = DVector::zeros(d);
    let mut lambda = DVector::zeros(d);
    for i in 0..d {
        let ev = eig.eigenvalues[i];
        if ev <= 0.0 || !ev.is_finite() {
            return Err(SdpError::Numerical("NT scaling: nonpositive spectrum".into()));
        }
        d4[i] = ev.powf(0.25);
        d4i[i] = ev.powf(-0.25);
        lambda[i] = ev.sqrt();
    }
    // G = L^-T Q D^(1/4), G^-1 = D^(-1/4) Q' L'.
    let q = &eig.eigenvectors;
    let mut qd = q.clone();
    for c in 0..d {
        for r in 0..d {
            qd[(r, c)] *= d4[c];
        }
    }
    let lt_inv_qd = l.transpose().solve_upper_triangular(&qd).ok_or_else(|| {
        SdpError::Numerical("NT scaling: triangular solve failed".into())
    })?;
    let g = lt_inv_qd;
    let mut qt_lt = q.transpose() * l.transpose();
    for r in 0..d {
        for c in 0..d {
            qt_lt[(r, c)] *= d4i[r];
        }
    }
    let g_inv = qt_lt;
    let w = &g * g.transpose();
    Ok(NtScaling { g, g_inv, lambda, w: symmetrize(&w) })
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}

/// Largest step alpha with P + alpha dP staying PSD (P assumed PD).
fn step_to_boundary(p: &DMatrix<f64>, dp: &DMatrix<f64>) -> f64 {
    let chol = match Cholesky::new(p.clone()) {
        Some(c) => c,
        None => return 0.0,
    };
    let l = chol.l();
    // M = L^-1 dP L^-T
    let li_dp = l.solve_lower_triangular(dp).unwrap_or_else(|| dp.clone());
    let m = l
        .solve_lower_triangular(&li_dp.transpose())
        .unwrap_or_else(|| li_dp.transpose());
    let eig = SymmetricEigen::new(symmetrize(&m));
    let min_eig = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !min_eig.is_finite() || min_eig >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / min_eig
    }
}

fn min_eig_sym(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

struct Iterate {
    x: Vec<DMatrix<f64>>,
    y: DVector<f64>,
    s: Vec<DMatrix<f64>>,
    tau: f64,
    kappa: f64,
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dy: DVector<f64>,
    ds: Vec<DMatrix<f64>>,
    dtau: f64,
    dkappa: f64,
}

/// Internals shared by predictor and corrector solves of one iteration.
struct KktContext {
    /// Unregularized Schur complement, kept for iterative refinement.
    h: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    /// u = A(WCW) + b
    u: DVector<f64>,
    /// w = A(WCW)
    w_vec: DVector<f64>,
    c_wcw: f64,
}

impl KktContext {
    /// Cholesky solve with two refinement steps against the unregularized H,
    /// which removes the bias the static regularization would otherwise leave
    /// in the primal residual.
    fn solve_refined(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut q = self.chol.solve(v);
        for _ in 0..2 {
            let r = v - &self.h * &q;
            q += self.chol.solve(&r);
        }
        q
    }
}

/// Solve `p` (maximization sense) with a homogeneous self-dual NT
/// predictor-corrector interior-point method.
pub fn solve(p: &SdpProblem, opts: &SolveOptions) -> Result<SdpSolution, SdpError> {
    p.validate()?;
    let m = p.num_constraints();
    let nblocks = p.block_dims.len();
    let nu: f64 = p.block_dims.iter().map(|&d| d as f64).sum::<f64>() + 1.0;

    // Internal minimization form: C_int = -C_ext.
    let b = DVector::from_iterator(m, p.constraints.iter().map(|(_, rhs)| *rhs));
    let b_norm = b.amax().max(1.0);
    let c_norm = p.objective.max_abs().max(1.0);

    let mut it = Iterate {
        x: p.block_dims.iter().map(|&d| DMatrix::identity(d, d)).collect(),
        y: DVector::zeros(m),
        s: p.block_dims.iter().map(|&d| DMatrix::identity(d, d)).collect(),
        tau: 1.0,
        kappa: 1.0,
    };

    // Constraint indices touching each block, for Schur assembly.
    let mut block_rows: Vec<Vec<usize>> = vec![Vec::new(); nblocks];
    for (i, (mat, _)) in p.constraints.iter().enumerate() {
        for (bidx, _) in &mat.blocks {
            block_rows[*bidx].push(i);
        }
    }

    let c_int_inner = |x: &[DMatrix<f64>]| -> f64 { -p.objective.inner_blocks(x) };
    let a_of = |x: &[DMatrix<f64>]| -> DVector<f64> {
        DVector::from_iterator(m, p.constraints.iter().map(|(mat, _)| mat.inner_blocks(x)))
    };
    // A*(y) accumulated into dense blocks.
    let a_star = |y: &DVector<f64>| -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> =
            p.block_dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
        for (i, (mat, _)) in p.constraints.iter().enumerate() {
            let yi = y[i];
            if yi != 0.0 {
                for (bidx, sm) in &mat.blocks {
                    sm.add_to(&mut out[*bidx], yi);
                }
            }
        }
        out
    };
    let c_int_blocks = || -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> =
            p.block_dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
        for (bidx, sm) in &p.objective.blocks {
            sm.add_to(&mut out[*bidx], -1.0);
        }
        out
    };
    let c_int = c_int_blocks();

    let mut best: Option<(f64, SdpSolution)> = None;
    let mut iterations = 0;

    for iter in 0..opts.max_iter {
        iterations = iter;
        // Residuals of the self-dual system.
        let ax = a_of(&it.x);
        let rp = &ax - &b * it.tau; // A(X) - b tau
        let asy = a_star(&it.y);
        let mut rd: Vec<DMatrix<f64>> = Vec::with_capacity(nblocks);
        for bidx in 0..nblocks {
            // -A*(y) + C tau - S
            rd.push(-&asy[bidx] + &c_int[bidx] * it.tau - &it.s[bidx]);
        }
        let cx = c_int_inner(&it.x);
        let by = b.dot(&it.y);
        let rg = by - cx - it.kappa;

        let gap_xs: f64 = it
            .x
            .iter()
            .zip(it.s.iter())
            .map(|(x, s)| x.iter().zip(s.iter()).map(|(a, b)| a * b).sum::<f64>())
            .sum();
        let mu = (gap_xs + it.tau * it.kappa) / nu;

        // Convergence metrics on the de-homogenized iterate.
        let tau = it.tau;
        let pval_int = cx / tau;
        let dval_int = by / tau;
        let rel_gap = (gap_xs / (tau * tau)) / (1.0 + pval_int.abs() + dval_int.abs());
        let rp_rel = (&ax / tau - &b).amax() / (1.0 + b_norm);
        let rd_rel = {
            let mut worst: f64 = 0.0;
            for bidx in 0..nblocks {
                let block = &asy[bidx] / tau + &it.s[bidx] / tau - &c_int[bidx];
                worst = worst.max(block.amax());
            }
            worst / (1.0 + c_norm)
        };

        if trace_enabled() {
            eprintln!(
                "iter {iter:3}  mu {mu:9.2e}  gap {rel_gap:9.2e}  rp {rp_rel:9.2e}  rd {rd_rel:9.2e}  tau {tau:9.2e}  kappa {:9.2e}",
                it.kappa
            );
        }

        let score = rel_gap.max(rp_rel).max(rd_rel);
        if best.as_ref().map_or(true, |(s, _)| score < *s) {
            best = Some((score, finalize(p, &it, iter, rp_rel, rd_rel, SolveStatus::MaxIter)));
        }

        if rel_gap <= opts.gap_tol && rp_rel <= opts.feas_tol && rd_rel <= opts.feas_tol {
            return Ok(finalize(p, &it, iter, rp_rel, rd_rel, SolveStatus::Optimal));
        }

        // Infeasibility tests: the embedding drives tau -> 0 with kappa > 0.
        if it.tau < 1e-10 * it.kappa.max(1.0) && mu < 1e-12 {
            if by > opts.feas_tol {
                return Ok(infeasible_solution(p, &it, iter, SolveStatus::PrimalInfeasible));
            }
            if cx < -opts.feas_tol {
                return Ok(infeasible_solution(p, &it, iter, SolveStatus::DualUnbounded));
            }
        }

        // NT scalings; numerical breakdown this close to the boundary means
        // the best iterate is as far as this arithmetic goes.
        let mut scalings = Vec::with_capacity(nblocks);
        let mut broke = false;
        for bidx in 0..nblocks {
            match nt_scaling(&it.x[bidx], &it.s[bidx]) {
                Ok(sc) => scalings.push(sc),
                Err(_) => {
                    broke = true;
                    break;
                }
            }
        }
        if broke {
            break;
        }
        let ctx = match build_kkt(p, &scalings, &b, &c_int, &block_rows) {
            Ok(ctx) => ctx,
            Err(_) => break,
        };

        // Predictor (affine scaling) direction.
        let rhat_aff: Vec<DMatrix<f64>> = scalings
            .iter()
            .map(|sc| -DMatrix::from_diagonal(&sc.lambda))
            .collect();
        let aff = match solve_newton(
            p, &ctx, &scalings, &b, &c_int, &it, &rp, &rd, rg, &rhat_aff,
            -it.tau * it.kappa,
        ) {
            Ok(d) => d,
            Err(_) => break,
        };
        let alpha_aff = max_step(&it, &aff);

        // Centering parameter from the affine step.
        let mu_aff = {
            let a = alpha_aff;
            let mut g = 0.0;
            for bidx in 0..nblocks {
                let xs = (&it.x[bidx] + &aff.dx[bidx] * a)
                    .iter()
                    .zip((&it.s[bidx] + &aff.ds[bidx] * a).iter())
                    .map(|(u, v)| u * v)
                    .sum::<f64>();
                g += xs;
            }
            (g + (it.tau + a * aff.dtau) * (it.kappa + a * aff.dkappa)) / nu
        };
        let sigma = (mu_aff / mu).max(0.0).powi(3).min(1.0);

        // Corrector: combined direction with Mehrotra second-order term.
        let mut rhat: Vec<DMatrix<f64>> = Vec::with_capacity(nblocks);
        for bidx in 0..nblocks {
            let sc = &scalings[bidx];
            let dxh = &sc.g_inv * &aff.dx[bidx] * sc.g_inv.transpose();
            let dsh = sc.g.transpose() * &aff.ds[bidx] * &sc.g;
            let cross = symmetrize(&(&dxh * &dsh));
            let d = sc.lambda.len();
            let mut r = DMatrix::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    let li = sc.lambda[i];
                    let lj = sc.lambda[j];
                    let target = if i == j { sigma * mu - li * lj } else { 0.0 };
                    r[(i, j)] = 2.0 * (target - cross[(i, j)]) / (li + lj);
                }
            }
            rhat.push(symmetrize(&r));
        }
        let rs = sigma * mu - it.tau * it.kappa - aff.dtau * aff.dkappa;
        let dir = match solve_newton(p, &ctx, &scalings, &b, &c_int, &it, &rp, &rd, rg, &rhat, rs) {
            Ok(d) => d,
            Err(_) => break,
        };

        let alpha = (0.98 * max_step(&it, &dir)).min(1.0);
        if alpha <= 1e-14 {
            break;
        }
        for bidx in 0..nblocks {
            it.x[bidx] = symmetrize(&(&it.x[bidx] + &dir.dx[bidx] * alpha));
            it.s[bidx] = symmetrize(&(&it.s[bidx] + &dir.ds[bidx] * alpha));
        }
        it.y += &dir.dy * alpha;
        it.tau += alpha * dir.dtau;
        it.kappa += alpha * dir.dkappa;
    }

    let (_, mut sol) = best.ok_or_else(|| SdpError::Numerical("no iterate produced".into()))?;
    sol.status = SolveStatus::MaxIter;
    sol.iterations = iterations;
    Ok(sol)
}

fn build_kkt(
    p: &SdpProblem,
    scalings: &[NtScaling],
    b: &DVector<f64>,
    c_int: &[DMatrix<f64>],
    block_rows: &[Vec<usize>],
) -> Result<KktContext, SdpError> {
    let m = p.num_constraints();
    let mut h: DMatrix<f64> = DMatrix::zeros(m, m);

    // H_ij = sum_blocks <A_i, W A_j W>; exploit sparsity of A_j via outer
    // products of W's columns.
    for (bidx, rows) in block_rows.iter().enumerate() {
        let w = &scalings[bidx].w;
        let d = w.nrows();
        let mut waw = DMatrix::zeros(d, d);
        for &j in rows {
            waw.fill(0.0);
            let (_, aj) = p.constraints[j]
                .0
                .blocks
                .iter()
                .find(|(bb, _)| *bb == bidx)
                .expect("row listed for block");
            for &(r, c, v) in &aj.entries {
                let wr = w.column(r);
                let wc = w.column(c);
                if r == c {
                    for ii in 0..d {
                        for jj in 0..d {
                            waw[(ii, jj)] += v * wr[ii] * wr[jj];
                        }
                    }
                } else {
                    for ii in 0..d {
                        for jj in 0..d {
                            waw[(ii, jj)] += v * (wr[ii] * wc[jj] + wc[ii] * wr[jj]);
                        }
                    }
                }
            }
            for &i in rows {
                if i > j {
                    continue;
                }
                let (_, ai) = p.constraints[i]
                    .0
                    .blocks
                    .iter()
                    .find(|(bb, _)| *bb == bidx)
                    .expect("row listed for block");
                let mut acc = 0.0;
                for &(r, c, v) in &ai.entries {
                    if r == c {
                        acc += v * waw[(r, c)];
                    } else {
                        acc += 2.0 * v * waw[(r, c)];
                    }
                }
                h[(i, j)] += acc;
                if i != j {
                    h[(j, i)] += acc;
                }
            }
        }
    }

    // Static regularization keeps the factorization alive under (near-)
    // dependent rows; iterative refinement against the unregularized matrix
    // removes the bias it would leave in the residuals.
    let reg = 1e-13 * h.diagonal().amax().max(1.0);
    let mut h_reg = h.clone();
    for i in 0..m {
        h_reg[(i, i)] += reg;
    }
    let chol = Cholesky::new(h_reg)
        .ok_or_else(|| SdpError::Numerical("Schur complement not positive definite".into()))?;

    let mut wcw = Vec::with_capacity(p.block_dims.len());
    for (bidx, sc) in scalings.iter().enumerate() {
        wcw.push(symmetrize(&(&sc.w * &c_int[bidx] * &sc.w)));
    }
    let w_vec = DVector::from_iterator(
        m,
        p.constraints.iter().map(|(mat, _)| mat.inner_blocks(&wcw)),
    );
    let u = &w_vec + b;
    let c_wcw: f64 = c_int
        .iter()
        .zip(wcw.iter())
        .map(|(c, wc)| c.iter().zip(wc.iter()).map(|(a, b)| a * b).sum::<f64>())
        .sum();

    Ok(KktContext { h, chol, u, w_vec, c_wcw })
}

#[allow(clippy::too_many_arguments)]
fn solve_newton(
    p: &SdpProblem,
    ctx: &KktContext,
    scalings: &[NtScaling],
    b: &DVector<f64>,
    c_int: &[DMatrix<f64>],
    it: &Iterate,
    rp: &DVector<f64>,
    rd: &[DMatrix<f64>],
    rg: f64,
    rhat: &[DMatrix<f64>],
    rs: f64,
) -> Result<Direction, SdpError> {
    let m = p.num_constraints();
    let nblocks = p.block_dims.len();

    // Rmat = G rhat G'; also W rd W per block.
    let mut rmat = Vec::with_capacity(nblocks);
    let mut wrdw = Vec::with_capacity(nblocks);
    for bidx in 0..nblocks {
        let sc = &scalings[bidx];
        rmat.push(symmetrize(&(&sc.g * &rhat[bidx] * sc.g.transpose())));
        wrdw.push(symmetrize(&(&sc.w * &rd[bidx] * &sc.w)));
    }

    let a_rmat = DVector::from_iterator(
        m,
        p.constraints.iter().map(|(mat, _)| mat.inner_blocks(&rmat)),
    );
    let a_wrdw = DVector::from_iterator(
        m,
        p.constraints.iter().map(|(mat, _)| mat.inner_blocks(&wrdw)),
    );

    // H dy - u dtau = v1
    let v1 = -rp - &a_rmat + &a_wrdw;
    let q1 = ctx.solve_refined(&v1);
    let q2 = ctx.solve_refined(&ctx.u);

    let c_rmat: f64 = c_int
        .iter()
        .zip(rmat.iter())
        .map(|(c, r)| c.iter().zip(r.iter()).map(|(a, b)| a * b).sum::<f64>())
        .sum();
    let c_wrdw: f64 = c_int
        .iter()
        .zip(wrdw.iter())
        .map(|(c, r)| c.iter().zip(r.iter()).map(|(a, b)| a * b).sum::<f64>())
        .sum();

    let bw = b - &ctx.w_vec;
    let denom = bw.dot(&q2) + ctx.c_wcw + it.kappa / it.tau;
    let v2 = -rg + rs / it.tau + c_rmat - c_wrdw;
    let dtau = (v2 - bw.dot(&q1)) / denom;
    let dy = &q1 + &q2 * dtau;

    // dS = -A*(dy) + C dtau + rd ; dX = Rmat - W dS W.
    let mut ds = Vec::with_capacity(nblocks);
    let mut dx = Vec::with_capacity(nblocks);
    for bidx in 0..nblocks {
        let d = p.block_dims[bidx];
        let mut asdy = DMatrix::zeros(d, d);
        for (i, (mat, _)) in p.constraints.iter().enumerate() {
            if dy[i] != 0.0 {
                if let Some((_, sm)) = mat.blocks.iter().find(|(bb, _)| *bb == bidx) {
                    sm.add_to(&mut asdy, dy[i]);
                }
            }
        }
        let ds_b = -&asdy + &c_int[bidx] * dtau + &rd[bidx];
        let sc = &scalings[bidx];
        let dx_b = &rmat[bidx] - symmetrize(&(&sc.w * &ds_b * &sc.w));
        ds.push(symmetrize(&ds_b));
        dx.push(dx_b);
    }
    let dkappa = (rs - it.kappa * dtau) / it.tau;

    Ok(Direction { dx, dy, ds, dtau, dkappa })
}

fn max_step(it: &Iterate, dir: &Direction) -> f64 {
    let mut alpha = f64::INFINITY;
    for (x, dx) in it.x.iter().zip(dir.dx.iter()) {
        alpha = alpha.min(step_to_boundary(x, dx));
    }
    for (s, ds) in it.s.iter().zip(dir.ds.iter()) {
        alpha = alpha.min(step_to_boundary(s, ds));
    }
    if dir.dtau < 0.0 {
        alpha = alpha.min(-it.tau / dir.dtau);
    }
    if dir.dkappa < 0.0 {
        alpha = alpha.min(-it.kappa / dir.dkappa);
    }
    alpha.min(10.0)
}

fn finalize(
    p: &SdpProblem,
    it: &Iterate,
    iter: usize,
    rp_rel: f64,
    rd_rel: f64,
    status: SolveStatus,
) -> SdpSolution {
    let tau = it.tau;
    let x_scaled: Vec<DMatrix<f64>> = it.x.iter().map(|x| x / tau).collect();
    // External sign conventions: max <C,X>, dual multipliers y_ext = -y_int.
    let y_ext: Vec<f64> = it.y.iter().map(|v| -v / tau).collect();
    let primal_value = p.objective.inner_blocks(&x_scaled);
    let dual_value = p
        .constraints
        .iter()
        .zip(y_ext.iter())
        .map(|((_, rhs), y)| rhs * y)
        .sum();
    let gap_xs: f64 = it
        .x
        .iter()
        .zip(it.s.iter())
        .map(|(x, s)| x.iter().zip(s.iter()).map(|(a, b)| a * b).sum::<f64>())
        .sum::<f64>()
        / (tau * tau);
    let min_dual_slack_eig = dual_slack_eigs(p, &y_ext);
    SdpSolution {
        status,
        primal_value,
        dual_value,
        y: y_ext,
        gap: gap_xs,
        min_dual_slack_eig,
        iterations: iter,
        primal_residual: rp_rel,
        dual_residual: rd_rel,
        primal_blocks: x_scaled,
    }
}

fn infeasible_solution(
    p: &SdpProblem,
    it: &Iterate,
    iter: usize,
    status: SolveStatus,
) -> SdpSolution {
    // Certificate-normalized quantities; primal/dual values are not
    // meaningful here beyond their signs.
    let y_ext: Vec<f64> = it.y.iter().map(|v| -*v).collect();
    SdpSolution {
        status,
        primal_value: f64::NAN,
        dual_value: f64::NAN,
        y: y_ext.clone(),
        gap: f64::NAN,
        min_dual_slack_eig: dual_slack_eigs(p, &y_ext),
        iterations: iter,
        primal_residual: f64::NAN,
        dual_residual: f64::NAN,
        primal_blocks: it.x.clone(),
    }
}

/// Minimum eigenvalue of the implied dual slack Z(y) = sum y_i A_i - C per block.
pub(crate) fn dual_slack_eigs(p: &SdpProblem, y_ext: &[f64]) -> Vec<f64> {
    let nblocks = p.block_dims.len();
    let mut z: Vec<DMatrix<f64>> =
        p.block_dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
    for (i, (mat, _)) in p.constraints.iter().enumerate() {
        for (bidx, sm) in &mat.blocks {
            sm.add_to(&mut z[*bidx], y_ext[i]);
        }
    }
    for (bidx, sm) in &p.objective.blocks {
        sm.add_to(&mut z[*bidx], -1.0);
    }
    (0..nblocks).map(|bidx| min_eig_sym(&z[bidx])).collect()
}
