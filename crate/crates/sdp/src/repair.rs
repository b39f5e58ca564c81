use crate::problem::{SdpError, SdpProblem};
use crate::solver::{dual_slack_eigs, SdpSolution};

#[derive(Debug, Clone)]
pub struct RepairedDual {
    /// Repaired multipliers: y with the identity row shifted.
    pub y: Vec<f64>,
    /// Shift applied to the identity row's multiplier.
    pub shift: f64,
    pub min_slack_eig_before: f64,
    pub min_slack_eig_after: f64,
    /// b'y at the repaired point; exceeds the unrepaired dual value by
    /// shift * b[identity_row].
    pub dual_value: f64,
}

/// Shift the multiplier of a constraint whose coefficient is the identity on
/// every block until the implied dual slack Z(y) = sum y_i A_i - C is PSD.
///
/// Adding `shift` to that multiplier adds `shift * I` to every block of Z, so
/// `shift = max(0, -min_eig(Z) + feas_margin)` guarantees strict dual
/// feasibility. The dual objective loosens by exactly `shift * b[row]`, so the
/// repaired value remains a valid upper bound on the primal optimum.
pub fn dual_feasibility_repair(
    p: &SdpProblem,
    sol: &SdpSolution,
    identity_row: usize,
    feas_margin: f64,
) -> Result<RepairedDual, SdpError> {
    let (mat, rhs) = p
        .constraints
        .get(identity_row)
        .ok_or(SdpError::NotIdentityRow(identity_row))?;
    if !mat.is_identity_on(&p.block_dims) {
        return Err(SdpError::NotIdentityRow(identity_row));
    }

    let before = sol
        .min_dual_slack_eig
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let shift = (-before + feas_margin).max(0.0);
    let mut y = sol.y.clone();
    y[identity_row] += shift;

    let after = dual_slack_eigs(p, &y)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let _ = rhs;
    let dual_value = p
        .constraints
        .iter()
        .zip(y.iter())
        .map(|((_, b), yi)| b * yi)
        .sum::<f64>();
    Ok(RepairedDual { y, shift, min_slack_eig_before: before, min_slack_eig_after: after, dual_value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{BlockMat, SdpProblem};
    use crate::solver::{solve, SolveOptions};

    fn toy_problem_with_identity_row() -> SdpProblem {
        // maximize X00 over 2x2 X with tr(X) = 1.
        let dims = vec![2];
        let mut prob = SdpProblem::new(dims.clone());
        prob.objective.push(0, 0, 0, 1.0, &dims);
        prob.constraints.push((BlockMat::identity(&dims), 1.0));
        prob
    }

    #[test]
    fn shift_formula() {
        let prob = toy_problem_with_identity_row();
        let mut sol = solve(&prob, &SolveOptions::default()).unwrap();
        // Force a slightly infeasible dual point.
        sol.y[0] -= 2e-9;
        sol.min_dual_slack_eig = crate::solver::dual_slack_eigs(&prob, &sol.y);
        let min_before = sol.min_dual_slack_eig.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(min_before < 0.0);
        let rep = dual_feasibility_repair(&prob, &sol, 0, 1e-12).unwrap();
        assert!((rep.shift - (-min_before + 1e-12)).abs() < 1e-15);
        assert!(rep.min_slack_eig_after >= 0.0);
    }

    #[test]
    fn already_feasible_is_untouched() {
        let prob = toy_problem_with_identity_row();
        let mut sol = solve(&prob, &SolveOptions::default()).unwrap();
        sol.y[0] += 1e-6; // strictly feasible now
        sol.min_dual_slack_eig = crate::solver::dual_slack_eigs(&prob, &sol.y);
        let rep = dual_feasibility_repair(&prob, &sol, 0, 0.0).unwrap();
        assert_eq!(rep.shift, 0.0);
        assert_eq!(rep.y, sol.y);
    }

    #[test]
    fn rejects_non_identity_row() {
        let dims = vec![2];
        let mut prob = SdpProblem::new(dims.clone());
        prob.objective.push(0, 0, 0, 1.0, &dims);
        let mut c = BlockMat::new();
        c.push(0, 0, 0, 1.0, &dims);
        prob.constraints.push((c, 1.0));
        let sol = solve(&prob, &SolveOptions::default()).unwrap();
        assert!(dual_feasibility_repair(&prob, &sol, 0, 0.0).is_err());
    }
}
