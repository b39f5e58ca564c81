use crate::problem::SdpProblem;
use std::fmt::Write as _;

/// Render the problem in the sparse SDPA text format for cross-checking with
/// external solvers.
///
/// SDPA's native form is `min b'y s.t. sum_i y_i F_i - F_0 >= 0`, which is
/// exactly our dual with `F_0 = C` and `F_i = A_i`, so the mapping is direct:
/// matrix 0 is the objective, matrix i is constraint i, and the cost vector is
/// the right-hand sides.
pub fn write_sdpa_sparse(p: &SdpProblem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", p.num_constraints());
    let _ = writeln!(out, "{}", p.block_dims.len());
    let dims: Vec<String> = p.block_dims.iter().map(|d| d.to_string()).collect();
    let _ = writeln!(out, "{}", dims.join(" "));
    let rhs: Vec<String> = p.constraints.iter().map(|(_, b)| format!("{b:.17e}")).collect();
    let _ = writeln!(out, "{}", rhs.join(" "));
    let emit = |matno: usize, blocks: &crate::problem::BlockMat, out: &mut String| {
        for (bidx, sm) in &blocks.blocks {
            let mut entries = sm.entries.clone();
            entries.sort_by_key(|&(r, c, _)| (r, c));
            for (r, c, v) in entries {
                if v != 0.0 {
                    let _ = writeln!(out, "{} {} {} {} {:.17e}", matno, bidx + 1, r + 1, c + 1, v);
                }
            }
        }
    };
    emit(0, &p.objective, &mut out);
    for (i, (mat, _)) in p.constraints.iter().enumerate() {
        emit(i + 1, mat, &mut out);
    }
    out
}
