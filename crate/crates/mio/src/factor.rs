//! Basis factorization for the bounded-variable simplex.
//!
//! The constraint matrix is `[ -I | A ]`: logical (row activity) columns come
//! first, structural columns after. A basis `B` therefore splits into basic
//! logicals, which are unit columns, and a square "kernel" formed by the basic
//! structural columns restricted to the rows whose logical is nonbasic. Only
//! the kernel is inverted densely; updates between refactorizations are kept
//! as product-form eta vectors.

use crate::sparse::CscMatrix;

const NONE: usize = usize::MAX;

#[derive(Debug)]
pub(crate) struct Singular {
    /// Basis positions whose structural column was linearly dependent.
    pub positions: Vec<usize>,
    /// Rows left without a pivot; their logicals can replace `positions`.
    pub free_rows: Vec<usize>,
}

#[derive(Clone, Debug)]
struct Eta {
    pos: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, Default)]
pub(crate) struct Factor {
    m: usize,
    /// Kernel column b is the structural at basis position `kern_pos[b]`.
    kern_pos: Vec<usize>,
    kern_var: Vec<usize>,
    /// Kernel row a is constraint row `kern_rows[a]`.
    kern_rows: Vec<usize>,
    row_to_kr: Vec<usize>,
    /// Basis position of the logical for each row, or NONE.
    logical_pos: Vec<usize>,
    /// Dense inverse of the kernel, row-major `k x k`.
    kinv: Vec<f64>,
    etas: Vec<Eta>,
    eta_nnz: usize,
}

impl Factor {
    pub fn num_etas(&self) -> usize {
        self.etas.len()
    }

    pub fn eta_nnz(&self) -> usize {
        self.eta_nnz
    }

    /// Factorizes the basis given by `head` (variable index per position;
    /// indices `< m` are logicals).
    pub fn refactor(&mut self, m: usize, head: &[usize], a: &CscMatrix) -> Result<(), Singular> {
        self.m = m;
        self.etas.clear();
        self.eta_nnz = 0;
        self.logical_pos = vec![NONE; m];
        self.kern_pos.clear();
        self.kern_var.clear();
        for (p, &v) in head.iter().enumerate() {
            if v < m {
                self.logical_pos[v] = p;
            } else {
                self.kern_pos.push(p);
                self.kern_var.push(v - m);
            }
        }
        self.kern_rows = (0..m).filter(|&i| self.logical_pos[i] == NONE).collect();
        self.row_to_kr = vec![NONE; m];
        for (a_idx, &i) in self.kern_rows.iter().enumerate() {
            self.row_to_kr[i] = a_idx;
        }
        let k = self.kern_pos.len();
        debug_assert_eq!(k, self.kern_rows.len());

        // Build [K | I] and run Gauss-Jordan with partial pivoting.
        let w = 2 * k;
        let mut aug = vec![0.0; k * w];
        for (b, &j) in self.kern_var.iter().enumerate() {
            for (i, val) in a.col(j) {
                let r = self.row_to_kr[i];
                if r != NONE {
                    aug[r * w + b] = val;
                }
            }
        }
        for r in 0..k {
            aug[r * w + k + r] = 1.0;
        }
        let mut row_of_col = vec![NONE; k];
        let mut used = vec![false; k];
        let mut dependent = Vec::new();
        for col in 0..k {
            let mut best = NONE;
            let mut best_val = 1e-11;
            for r in 0..k {
                if !used[r] {
                    let v = aug[r * w + col].abs();
                    if v > best_val {
                        best_val = v;
                        best = r;
                    }
                }
            }
            if best == NONE {
                dependent.push(col);
                continue;
            }
            used[best] = true;
            row_of_col[col] = best;
            let piv = aug[best * w + col];
            let inv = 1.0 / piv;
            for c in 0..w {
                aug[best * w + c] *= inv;
            }
            let (before, rest) = aug.split_at_mut(best * w);
            let (prow, after) = rest.split_at_mut(w);
            for (r, row) in before.chunks_exact_mut(w).enumerate() {
                eliminate(row, prow, col, r != best);
            }
            for row in after.chunks_exact_mut(w) {
                eliminate(row, prow, col, true);
            }
        }
        if !dependent.is_empty() {
            let free_rows = (0..k)
                .filter(|&r| !used[r])
                .map(|r| self.kern_rows[r])
                .collect();
            return Err(Singular {
                positions: dependent.iter().map(|&b| self.kern_pos[b]).collect(),
                free_rows,
            });
        }
        // Row `row_of_col[b]` of the reduced augmented matrix holds row b of K^-1.
        self.kinv = vec![0.0; k * k];
        for b in 0..k {
            let r = row_of_col[b];
            self.kinv[b * k..(b + 1) * k].copy_from_slice(&aug[r * w + k..r * w + w]);
        }
        Ok(())
    }

    /// Solves `B u = v`; `v` is indexed by row, the result by basis position.
    pub fn ftran(&self, v: &[f64], a: &CscMatrix) -> Vec<f64> {
        let m = self.m;
        let k = self.kern_pos.len();
        let mut u = vec![0.0; m];
        let mut us = vec![0.0; k];
        if k > 0 {
            let vr: Vec<f64> = self.kern_rows.iter().map(|&i| v[i]).collect();
            for b in 0..k {
                let row = &self.kinv[b * k..(b + 1) * k];
                us[b] = dot(row, &vr);
            }
        }
        let mut t = vec![0.0; m];
        for (b, &j) in self.kern_var.iter().enumerate() {
            let ub = us[b];
            u[self.kern_pos[b]] = ub;
            if ub != 0.0 {
                for (i, val) in a.col(j) {
                    t[i] += val * ub;
                }
            }
        }
        for i in 0..m {
            let p = self.logical_pos[i];
            if p != NONE {
                u[p] = t[i] - v[i];
            }
        }
        for eta in &self.etas {
            let ur = u[eta.pos];
            if ur == 0.0 {
                continue;
            }
            let ur = ur / eta.pivot;
            u[eta.pos] = ur;
            for &(i, al) in &eta.entries {
                u[i] -= al * ur;
            }
        }
        u
    }

    /// Solves `pi^T B = c^T`; `c` is indexed by basis position, `pi` by row.
    pub fn btran(&self, c: &[f64], a: &CscMatrix) -> Vec<f64> {
        let m = self.m;
        let k = self.kern_pos.len();
        let mut c = c.to_vec();
        for eta in self.etas.iter().rev() {
            let mut s = c[eta.pos];
            for &(i, al) in &eta.entries {
                s -= al * c[i];
            }
            c[eta.pos] = s / eta.pivot;
        }
        let mut pi = vec![0.0; m];
        for i in 0..m {
            let p = self.logical_pos[i];
            if p != NONE {
                pi[i] = -c[p];
            }
        }
        if k > 0 {
            let mut rhs = vec![0.0; k];
            for (b, &j) in self.kern_var.iter().enumerate() {
                let mut s = c[self.kern_pos[b]];
                for (i, val) in a.col(j) {
                    if self.logical_pos[i] != NONE {
                        s -= pi[i] * val;
                    }
                }
                rhs[b] = s;
            }
            let mut pr = vec![0.0; k];
            for (b, &rb) in rhs.iter().enumerate() {
                if rb == 0.0 {
                    continue;
                }
                let row = &self.kinv[b * k..(b + 1) * k];
                for (acc, &kv) in pr.iter_mut().zip(row) {
                    *acc += kv * rb;
                }
            }
            for (a_idx, &i) in self.kern_rows.iter().enumerate() {
                pi[i] = pr[a_idx];
            }
        }
        pi
    }

    /// Records the pivot that replaces basis position `pos`; `alpha` is the
    /// FTRAN'd entering column.
    pub fn push_eta(&mut self, pos: usize, alpha: &[f64]) {
        let entries: Vec<(usize, f64)> = alpha
            .iter()
            .enumerate()
            .filter(|&(i, &v)| i != pos && v.abs() > 1e-14)
            .map(|(i, &v)| (i, v))
            .collect();
        self.eta_nnz += entries.len() + 1;
        self.etas.push(Eta {
            pos,
            pivot: alpha[pos],
            entries,
        });
    }
}

fn eliminate(row: &mut [f64], prow: &[f64], col: usize, apply: bool) {
    if !apply {
        return;
    }
    let f = row[col];
    if f != 0.0 {
        for (x, &p) in row.iter_mut().zip(prow) {
            *x -= f * p;
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
