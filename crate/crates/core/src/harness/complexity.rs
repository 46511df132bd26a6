//! Leading-order FLOP counts of one branch design and of branch selection.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplexityRow {
    pub step: usize,
    pub operation: &'static str,
    pub flops: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplexityTable {
    pub rows: Vec<ComplexityRow>,
    /// Sum of the per-branch rows.
    pub per_branch: u64,
    pub branches: u64,
    /// `K N_d^2` for choosing among the branches.
    pub selection: u64,
    /// `L * per_branch + selection`
    pub total: u64,
}

/// Per-step counts for antenna numbers `n_s, n_r, n_d`, bisection iteration
/// counts `i_s, i_r`, water-filling sweeps `i_i`, `l` branches and block
/// length `k`.
#[allow(clippy::too_many_arguments)]
pub fn complexity_estimate(
    n_s: u64,
    n_r: u64,
    n_d: u64,
    i_s: u64,
    i_r: u64,
    i_i: u64,
    l: u64,
    k: u64,
) -> ComplexityTable {
    let sum = n_s + n_r + n_d;
    let entries: [(&'static str, u64); 9] = [
        ("whitened source-relay channel", n_s * n_s * sum),
        ("whitened relay-destination channel", n_r * n_r * sum),
        (
            "SVD of whitened source-relay channel",
            n_r * n_s * n_s + n_s.pow(3),
        ),
        (
            "SVD of whitened relay-destination channel",
            n_d * n_r * n_r + n_r.pow(3),
        ),
        ("inverse of B", n_d.pow(3)),
        ("stream powers x and y", n_d * i_s * i_i + n_d * i_r * i_i),
        ("GMD", n_d.pow(3)),
        ("feedback matrix U", n_d.pow(3)),
        (
            "precoders F_s and F_r",
            (n_s * n_d + n_s * n_d * n_d) + (n_r * n_r + n_r.pow(3)),
        ),
    ];
    let rows: Vec<ComplexityRow> = entries
        .iter()
        .enumerate()
        .map(|(i, &(operation, flops))| ComplexityRow {
            step: i + 1,
            operation,
            flops,
        })
        .collect();
    let per_branch = rows.iter().map(|r| r.flops).sum();
    let selection = k * n_d * n_d;
    ComplexityTable {
        rows,
        per_branch,
        branches: l,
        selection,
        total: l * per_branch + selection,
    }
}

impl fmt::Display for ComplexityTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>4}  {:<42} {:>12}", "step", "operation", "flops")?;
        for r in &self.rows {
            writeln!(f, "{:>4}  {:<42} {:>12}", r.step, r.operation, r.flops)?;
        }
        writeln!(f, "{:>4}  {:<42} {:>12}", "", "per branch", self.per_branch)?;
        writeln!(f, "{:>4}  {:<42} {:>12}", "", "selection", self.selection)?;
        write!(
            f,
            "{:>4}  {:<42} {:>12}",
            "",
            format!("total (L = {})", self.branches),
            self.total
        )
    }
}
