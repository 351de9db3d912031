use nalgebra::DMatrix;

use super::SparseMatrix;
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// A pivot at or below this fraction of its original diagonal entry is
/// treated as a numerically zero (or negative) eigenvalue.
const PIVOT_RTOL: f64 = 1e-9;

/// Sparse `P A Pᵀ = L Lᵀ` factorization.
///
/// Columns of `L` with identical below-diagonal structure are grouped into
/// supernodes and stored as dense column-major blocks, so the bulk of the
/// work runs through dense matrix products.
#[derive(Debug, Clone)]
pub struct SparseCholesky {
    n: usize,
    /// `perm[k]` is the original index eliminated k-th.
    perm: Vec<usize>,
    /// First column of each supernode, plus `n` at the end.
    sn_first: Vec<usize>,
    /// Row indices of each supernode's block, its own columns first.
    sn_rows_ptr: Vec<usize>,
    sn_rows: Vec<usize>,
    /// Offset of each supernode's `m × w` block in `vals`.
    sn_val_ptr: Vec<usize>,
    vals: Vec<f64>,
}

/// Permuted matrix split into column-compressed upper and lower triangles.
struct Permuted {
    up_ptr: Vec<usize>,
    up_rows: Vec<usize>,
    lo_ptr: Vec<usize>,
    lo_rows: Vec<usize>,
    lo_vals: Vec<f64>,
}

fn permute(a: &SparseMatrix, pinv: &[usize]) -> Permuted {
    let n = a.dim();
    let mut up_ptr = vec![0usize; n + 1];
    let mut lo_ptr = vec![0usize; n + 1];
    for i in 0..n {
        for &j in a.row(i).0 {
            let (pi, pj) = (pinv[i], pinv[j]);
            if pi <= pj {
                up_ptr[pj + 1] += 1;
            }
            if pi >= pj {
                lo_ptr[pj + 1] += 1;
            }
        }
    }
    for k in 0..n {
        up_ptr[k + 1] += up_ptr[k];
        lo_ptr[k + 1] += lo_ptr[k];
    }
    let mut up_next = up_ptr.clone();
    let mut lo_next = lo_ptr.clone();
    let mut up_rows = vec![0; up_ptr[n]];
    let mut lo_rows = vec![0; lo_ptr[n]];
    let mut lo_vals = vec![0.0; lo_ptr[n]];
    for i in 0..n {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            let (pi, pj) = (pinv[i], pinv[j]);
            if pi <= pj {
                up_rows[up_next[pj]] = pi;
                up_next[pj] += 1;
            }
            if pi >= pj {
                lo_rows[lo_next[pj]] = pi;
                lo_vals[lo_next[pj]] = v;
                lo_next[pj] += 1;
            }
        }
    }
    Permuted {
        up_ptr,
        up_rows,
        lo_ptr,
        lo_rows,
        lo_vals,
    }
}

impl SparseCholesky {
    pub fn factor(a: &SparseMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = a.dim();
        assert_eq!(perm.len(), n);
        let mut pinv = vec![NONE; n];
        for (k, &p) in perm.iter().enumerate() {
            pinv[p] = k;
        }
        let pm = permute(a, &pinv);
        let parent = etree(n, &pm.up_ptr, &pm.up_rows);

        // Column counts of L (diagonal included) from the row patterns.
        let mut counts = vec![1usize; n];
        let mut stack = vec![0usize; n];
        let mut flag = vec![NONE; n];
        for k in 0..n {
            let top = ereach(k, &pm.up_ptr, &pm.up_rows, &parent, &mut stack, &mut flag);
            for &j in &stack[top..] {
                counts[j] += 1;
            }
        }

        // Column j+1 extends j's supernode when it is j's parent and the
        // structures coincide below it.
        let mut sn_first = Vec::new();
        let mut sn_of = vec![0usize; n];
        for j in 0..n {
            if j == 0 || !(parent[j - 1] == j && counts[j - 1] == counts[j] + 1) {
                sn_first.push(j);
            }
            sn_of[j] = sn_first.len() - 1;
        }
        let ns = sn_first.len();
        sn_first.push(n);

        let mut children: Vec<Vec<usize>> = vec![Vec::new(); ns];
        for s in 0..ns {
            let last = sn_first[s + 1] - 1;
            if parent[last] != NONE {
                children[sn_of[parent[last]]].push(s);
            }
        }

        // Row structure of each supernode.
        let mut sn_rows_ptr = vec![0usize; ns + 1];
        let mut sn_rows: Vec<usize> = Vec::new();
        let mut mark = vec![NONE; n];
        for s in 0..ns {
            let (f, l) = (sn_first[s], sn_first[s + 1] - 1);
            let start = sn_rows.len();
            for j in f..=l {
                mark[j] = s;
                sn_rows.push(j);
            }
            let own = sn_rows.len();
            for j in f..=l {
                for &i in &pm.lo_rows[pm.lo_ptr[j]..pm.lo_ptr[j + 1]] {
                    if i > l && mark[i] != s {
                        mark[i] = s;
                        sn_rows.push(i);
                    }
                }
            }
            for &c in &children[s] {
                for p in sn_rows_ptr[c]..sn_rows_ptr[c + 1] {
                    let i = sn_rows[p];
                    if i > l && mark[i] != s {
                        mark[i] = s;
                        sn_rows.push(i);
                    }
                }
            }
            sn_rows[own..].sort_unstable();
            debug_assert_eq!(sn_rows.len() - start, counts[f]);
            sn_rows_ptr[s + 1] = sn_rows.len();
        }

        let mut sn_val_ptr = vec![0usize; ns + 1];
        for s in 0..ns {
            let m = sn_rows_ptr[s + 1] - sn_rows_ptr[s];
            let w = sn_first[s + 1] - sn_first[s];
            sn_val_ptr[s + 1] = sn_val_ptr[s] + m * w;
        }
        let mut vals = vec![0.0; sn_val_ptr[ns]];

        // Scatter A into the blocks; `rel[i]` is row i's position in the
        // block currently addressed.
        let mut rel = vec![NONE; n];
        let mut diag = vec![0.0; n];
        for s in 0..ns {
            let rows = &sn_rows[sn_rows_ptr[s]..sn_rows_ptr[s + 1]];
            let m = rows.len();
            for (p, &i) in rows.iter().enumerate() {
                rel[i] = p;
            }
            for j in sn_first[s]..sn_first[s + 1] {
                let base = sn_val_ptr[s] + (j - sn_first[s]) * m;
                for p in pm.lo_ptr[j]..pm.lo_ptr[j + 1] {
                    let i = pm.lo_rows[p];
                    if i == j {
                        diag[j] = pm.lo_vals[p];
                    }
                    vals[base + rel[i]] += pm.lo_vals[p];
                }
            }
        }

        let mut rel_owner = NONE;
        for s in 0..ns {
            let f = sn_first[s];
            let w = sn_first[s + 1] - f;
            let (r0, r1) = (sn_rows_ptr[s], sn_rows_ptr[s + 1]);
            let m = r1 - r0;
            let (done, rest) = vals.split_at_mut(sn_val_ptr[s + 1]);
            let block = &mut done[sn_val_ptr[s]..];

            // Dense Cholesky of the diagonal block fused with the triangular
            // solve of the rows below it.
            for j in 0..w {
                let d = block[j * m + j];
                let a_jj = diag[f + j];
                if !(d > PIVOT_RTOL * a_jj.abs()) || !d.is_finite() {
                    return Err(Error::Factorization {
                        column: perm[f + j],
                        pivot: d,
                    });
                }
                let ljj = d.sqrt();
                for v in &mut block[j * m + j..(j + 1) * m] {
                    *v /= ljj;
                }
                let (left, right) = block.split_at_mut((j + 1) * m);
                let col_j = &left[j * m..];
                for c in j + 1..w {
                    let l_cj = col_j[c];
                    let col_c = &mut right[(c - j - 1) * m..(c - j) * m];
                    for r in c..m {
                        col_c[r] -= col_j[r] * l_cj;
                    }
                }
            }

            let nb = m - w;
            if nb == 0 {
                continue;
            }
            let below = DMatrix::from_fn(nb, w, |r, c| block[c * m + w + r]);
            let update = &below * below.transpose();
            let rows = &sn_rows[r0 + w..r1];
            let rest_base = sn_val_ptr[s + 1];
            let mut a = 0;
            while a < nb {
                let t = sn_of[rows[a]];
                let t_rows = &sn_rows[sn_rows_ptr[t]..sn_rows_ptr[t + 1]];
                if rel_owner != t {
                    for (p, &i) in t_rows.iter().enumerate() {
                        rel[i] = p;
                    }
                    rel_owner = t;
                }
                let m_t = t_rows.len();
                let t_end = sn_first[t + 1];
                while a < nb && rows[a] < t_end {
                    let base = sn_val_ptr[t] - rest_base + (rows[a] - sn_first[t]) * m_t;
                    let u_col = &update.as_slice()[a * nb..(a + 1) * nb];
                    for b in a..nb {
                        rest[base + rel[rows[b]]] -= u_col[b];
                    }
                    a += 1;
                }
            }
        }

        Ok(Self {
            n,
            perm,
            sn_first,
            sn_rows_ptr,
            sn_rows,
            sn_val_ptr,
            vals,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Structural nonzeros of `L`.
    pub fn nnz(&self) -> usize {
        (0..self.sn_first.len() - 1)
            .map(|s| {
                let m = self.sn_rows_ptr[s + 1] - self.sn_rows_ptr[s];
                let w = self.sn_first[s + 1] - self.sn_first[s];
                m * w - w * (w - 1) / 2
            })
            .sum()
    }

    /// Number of supernodes.
    pub fn num_supernodes(&self) -> usize {
        self.sn_first.len() - 1
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        let ns = self.sn_first.len() - 1;
        let mut tmp = Vec::new();
        // L y' = y
        for s in 0..ns {
            let (f, w, rows, block) = self.supernode(s);
            let m = rows.len();
            for j in 0..w {
                let col = &block[j * m..j * m + w];
                let yj = y[f + j] / col[j];
                y[f + j] = yj;
                for r in j + 1..w {
                    y[f + r] -= col[r] * yj;
                }
            }
            tmp.clear();
            tmp.resize(m - w, 0.0);
            for j in 0..w {
                let yj = y[f + j];
                for (t, l) in tmp.iter_mut().zip(&block[j * m + w..(j + 1) * m]) {
                    *t += l * yj;
                }
            }
            for (t, &r) in tmp.iter().zip(&rows[w..]) {
                y[r] -= t;
            }
        }
        // Lᵀ x' = y'
        for s in (0..ns).rev() {
            let (f, w, rows, block) = self.supernode(s);
            let m = rows.len();
            tmp.clear();
            tmp.extend(rows[w..].iter().map(|&r| y[r]));
            for j in (0..w).rev() {
                let col = &block[j * m..(j + 1) * m];
                let mut acc = y[f + j];
                for r in j + 1..w {
                    acc -= col[r] * y[f + r];
                }
                acc -= col[w..].iter().zip(&tmp).map(|(l, t)| l * t).sum::<f64>();
                y[f + j] = acc / col[j];
            }
        }
        let mut x = vec![0.0; self.n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        x
    }

    /// First column, width, row indices and dense block of supernode `s`.
    fn supernode(&self, s: usize) -> (usize, usize, &[usize], &[f64]) {
        let f = self.sn_first[s];
        (
            f,
            self.sn_first[s + 1] - f,
            &self.sn_rows[self.sn_rows_ptr[s]..self.sn_rows_ptr[s + 1]],
            &self.vals[self.sn_val_ptr[s]..self.sn_val_ptr[s + 1]],
        )
    }
}

/// Elimination tree of a symmetric matrix given by its upper triangle.
fn etree(n: usize, ptr: &[usize], rows: &[usize]) -> Vec<usize> {
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        for &r in &rows[ptr[k]..ptr[k + 1]] {
            let mut i = r;
            while i != NONE && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == NONE {
                    parent[i] = k;
                }
                i = next;
            }
        }
    }
    parent
}

/// Nonzero pattern of row `k` of `L` (excluding the diagonal), written to
/// `stack[top..]` in topological order. Returns `top`.
fn ereach(k: usize, ptr: &[usize], rows: &[usize], parent: &[usize], stack: &mut [usize], flag: &mut [usize]) -> usize {
    let n = parent.len();
    let mut top = n;
    flag[k] = k;
    for &r in &rows[ptr[k]..ptr[k + 1]] {
        let mut i = r;
        if i > k {
            continue;
        }
        let mut len = 0;
        while flag[i] != k {
            stack[len] = i;
            len += 1;
            flag[i] = k;
            i = parent[i];
        }
        while len > 0 {
            len -= 1;
            top -= 1;
            stack[top] = stack[len];
        }
    }
    top
}
