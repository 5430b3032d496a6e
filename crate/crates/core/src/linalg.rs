//! Sparse row storage, banded LU without pivoting and projected SOR.
//!
//! Every matrix the schemes produce is a (possibly nonsymmetric) M-matrix on a
//! structured grid: diagonally dominant with nonpositive off-diagonals and a
//! bandwidth equal to the stride of the last axis. Gaussian elimination
//! without pivoting is stable for that class.

/// Compressed sparse rows with columns sorted inside each row.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    lower_bw: usize,
    upper_bw: usize,
}

impl SparseMatrix {
    /// Builds from per-row `(column, value)` lists. Duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let (mut lower_bw, mut upper_bw) = (0, 0);
        row_ptr.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                assert!(c < n, "column {c} out of range");
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                    continue;
                }
                last = Some(c);
                lower_bw = lower_bw.max(i.saturating_sub(c));
                upper_bw = upper_bw.max(c.saturating_sub(i));
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
            lower_bw,
            upper_bw,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.get(i, i)
    }

    pub fn bandwidth(&self) -> (usize, usize) {
        (self.lower_bw, self.upper_bw)
    }

    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            *o = self.row(i).map(|(c, v)| v * x[c]).sum();
        }
    }

    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        self.row(i).map(|(c, v)| v * x[c]).sum()
    }

    /// `uᵀ A v`.
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        (0..self.n).map(|i| u[i] * self.row_dot(i, v)).sum()
    }

    /// Returns `A + diag(d)` sharing the sparsity pattern.
    pub fn plus_diag(&self, d: &[f64]) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            for p in out.row_ptr[i]..out.row_ptr[i + 1] {
                if out.cols[p] == i {
                    out.vals[p] += d[i];
                }
            }
        }
        out
    }

    /// Linear combination `a·self + b·other` for matrices with the same pattern.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        let mut rows = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let mut r: Vec<(usize, f64)> = self.row(i).map(|(c, v)| (c, a * v)).collect();
            r.extend(other.row(i).map(|(c, v)| (c, b * v)));
            rows.push(r);
        }
        Self::from_rows(rows)
    }

    /// Replaces each masked row by the identity row.
    pub fn with_identity_rows(&self, mask: &[bool]) -> Self {
        let rows = (0..self.n)
            .map(|i| {
                if mask[i] {
                    vec![(i, 1.0)]
                } else {
                    self.row(i).collect()
                }
            })
            .collect();
        let mut m = Self::from_rows(rows);
        // keep the band wide enough for shared factorization code paths
        m.lower_bw = m.lower_bw.max(self.lower_bw);
        m.upper_bw = m.upper_bw.max(self.upper_bw);
        m
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Dense-band LU factors of a [`SparseMatrix`].
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row-major band, `width = kl + ku + 1`, entry `(i, j)` at `i*width + j + kl − i`.
    band: Vec<f64>,
}

impl BandedLu {
    /// Factors `A + diag(shift)`; `None` if a pivot vanishes.
    pub fn factor(a: &SparseMatrix, shift: Option<&[f64]>) -> Option<Self> {
        let n = a.n();
        let (kl, ku) = a.bandwidth();
        let width = kl + ku + 1;
        let mut band = vec![0.0; n * width];
        for i in 0..n {
            for (j, v) in a.row(i) {
                band[i * width + j + kl - i] += v;
            }
            if let Some(s) = shift {
                band[i * width + kl] += s[i];
            }
        }
        for k in 0..n {
            let pivot = band[k * width + kl];
            if pivot == 0.0 || !pivot.is_finite() {
                return None;
            }
            let i_end = (k + kl + 1).min(n);
            let j_end = (k + ku + 1).min(n);
            for i in k + 1..i_end {
                let ik = i * width + k + kl - i;
                let l = band[ik] / pivot;
                if l == 0.0 {
                    continue;
                }
                band[ik] = l;
                for j in k + 1..j_end {
                    let kj = band[k * width + j + kl - k];
                    band[i * width + j + kl - i] -= l * kj;
                }
            }
        }
        Some(Self { n, kl, ku, band })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let width = kl + ku + 1;
        for i in 0..n {
            let j0 = i.saturating_sub(kl);
            let mut s = x[i];
            for j in j0..i {
                s -= self.band[i * width + j + kl - i] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let j_end = (i + ku + 1).min(n);
            let mut s = x[i];
            for j in i + 1..j_end {
                s -= self.band[i * width + j + kl - i] * x[j];
            }
            x[i] = s / self.band[i * width + kl];
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelaxationConfig {
    /// Relaxation factor; `None` picks one per solve from a bound on the
    /// Jacobi spectral radius.
    pub omega: Option<f64>,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for RelaxationConfig {
    fn default() -> Self {
        Self {
            omega: None,
            tol: 1e-13,
            max_sweeps: 200_000,
        }
    }
}

/// Outcome of a projected relaxation solve.
#[derive(Clone, Copy, Debug)]
pub struct RelaxationStats {
    pub sweeps: usize,
    pub last_update: f64,
    pub converged: bool,
}

/// `2 / (1 + √(1 − ρ²))` with `ρ` the largest off-diagonal row ratio, an
/// upper bound on the Jacobi spectral radius of a diagonally dominant matrix.
fn auto_omega(a: &SparseMatrix, diag: &[f64]) -> f64 {
    let rho = (0..a.n())
        .map(|i| a.row(i).filter(|&(j, _)| j != i).map(|(_, v)| v.abs()).sum::<f64>() / diag[i].abs())
        .fold(0.0, f64::max)
        .min(1.0 - 1e-12);
    2.0 / (1.0 + (1.0 - rho * rho).sqrt())
}

/// Solves the box-constrained linear complementarity problem
/// `lower ≤ x ≤ upper`, with `(Ax − b)_i ≥ 0` where `x_i > lower_i` fails to
/// be tight, etc., by symmetric projected SOR (a forward then a backward sweep
/// per iteration). `x` carries the initial guess.
pub fn projected_sor(
    a: &SparseMatrix,
    b: &[f64],
    lower: &[f64],
    upper: &[f64],
    x: &mut [f64],
    cfg: &RelaxationConfig,
) -> RelaxationStats {
    let RelaxationConfig {
        omega,
        tol,
        max_sweeps,
    } = *cfg;
    let n = a.n();
    let diag: Vec<f64> = (0..n).map(|i| a.diag(i)).collect();
    let omega = omega.unwrap_or_else(|| auto_omega(a, &diag));
    for i in 0..n {
        x[i] = x[i].clamp(lower[i], upper[i]);
    }
    let relax = |i: usize, x: &mut [f64]| -> f64 {
        let r = b[i] - a.row_dot(i, x);
        let new = (x[i] + omega * r / diag[i]).clamp(lower[i], upper[i]);
        let d = (new - x[i]).abs();
        x[i] = new;
        d
    };
    let mut last = f64::INFINITY;
    for sweep in 1..=max_sweeps {
        let mut delta: f64 = 0.0;
        for i in 0..n {
            delta = delta.max(relax(i, x));
        }
        for i in (0..n).rev() {
            delta = delta.max(relax(i, x));
        }
        last = delta;
        if delta <= tol {
            return RelaxationStats {
                sweeps: sweep,
                last_update: delta,
                converged: true,
            };
        }
    }
    RelaxationStats {
        sweeps: max_sweeps,
        last_update: last,
        converged: false,
    }
}
