//! Weighted least squares through a pivoted Householder QR of the
//! √weight-scaled design.
//!
//! Full-rank problems are solved by back substitution. When the numerical
//! rank falls below the column count, the trapezoidal factor is reduced by a
//! second QR (a complete orthogonal decomposition) and the minimum-norm
//! minimizer is returned together with the detected rank.

use crate::error::{Error, Result};

/// Relative rank tolerance: diagonal entries of `R` below
/// `DEFAULT_RANK_TOL × (largest scaled column norm)` count as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Argument(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Argument("ragged rows".into()));
        }
        Matrix::from_row_major(rows.len(), cols, rows.concat())
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct WlsProblem {
    pub design: Matrix,
    pub weights: Vec<f64>,
    pub targets: Vec<f64>,
}

impl WlsProblem {
    pub fn new(design: Matrix, weights: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        let p = WlsProblem {
            design,
            weights,
            targets,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        let n = self.design.nrows();
        if n == 0 || self.design.ncols() == 0 {
            return Err(Error::Argument("empty least-squares system".into()));
        }
        if self.weights.len() != n || self.targets.len() != n {
            return Err(Error::Argument(format!(
                "design has {n} rows but {} weights and {} targets",
                self.weights.len(),
                self.targets.len()
            )));
        }
        check_finite("design", self.design.as_slice())?;
        check_finite("weights", &self.weights)?;
        check_finite("targets", &self.targets)?;
        if let Some(w) = self.weights.iter().find(|w| **w <= 0.0) {
            return Err(Error::Argument(format!("weights must be positive, got {w}")));
        }
        Ok(())
    }
}

fn check_finite(what: &str, xs: &[f64]) -> Result<()> {
    match xs.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NumericInput(format!("{what}[{i}] = {}", xs[i]))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WlsSolution {
    pub params: Vec<f64>,
    /// `sqrt(Σ w_i r_i²)`.
    pub residual_norm: f64,
    pub rank: usize,
    /// Ratio of the largest to the smallest retained `|R_ii|`.
    pub condition_estimate: f64,
}

impl WlsSolution {
    pub fn is_rank_deficient(&self) -> bool {
        self.rank < self.params.len()
    }
}

/// Householder reflectors stored column-major below the diagonal, `R` on and
/// above it.
#[derive(Debug, Clone)]
struct HouseholderQr {
    rows: usize,
    // column-major
    a: Vec<f64>,
    tau: Vec<f64>,
    diag: Vec<f64>,
}

impl HouseholderQr {
    fn col(&self, j: usize) -> &[f64] {
        &self.a[j * self.rows..(j + 1) * self.rows]
    }

    /// Factors in place; with `pivot`, columns are chosen by largest remaining
    /// norm and the permutation is returned.
    fn factor(rows: usize, cols: usize, mut a: Vec<f64>, pivot: bool) -> (Self, Vec<usize>) {
        let steps = rows.min(cols);
        let mut perm: Vec<usize> = (0..cols).collect();
        let mut tau = vec![0.0; steps];
        let mut diag = vec![0.0; steps];
        for k in 0..steps {
            if pivot {
                let norm_below = |j: usize| -> f64 {
                    a[j * rows + k..(j + 1) * rows].iter().map(|v| v * v).sum()
                };
                let mut best = k;
                let mut best_norm = norm_below(k);
                for j in k + 1..cols {
                    let n = norm_below(j);
                    if n > best_norm {
                        best = j;
                        best_norm = n;
                    }
                }
                if best != k {
                    for r in 0..rows {
                        a.swap(k * rows + r, best * rows + r);
                    }
                    perm.swap(k, best);
                }
            }
            let (head, tail) = a.split_at_mut((k + 1) * rows);
            let col = &mut head[k * rows + k..];
            let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                tau[k] = 0.0;
                diag[k] = 0.0;
                continue;
            }
            let alpha = if col[0] > 0.0 { -norm } else { norm };
            let v0 = col[0] - alpha;
            // normalize so v[0] = 1
            for v in col[1..].iter_mut() {
                *v /= v0;
            }
            col[0] = 1.0;
            let t = -v0 / alpha;
            tau[k] = t;
            diag[k] = alpha;
            for j in 0..cols - k - 1 {
                let target = &mut tail[j * rows + k..(j + 1) * rows];
                let dot: f64 = col.iter().zip(target.iter()).map(|(v, x)| v * x).sum();
                let s = t * dot;
                for (x, v) in target.iter_mut().zip(col.iter()) {
                    *x -= s * v;
                }
            }
        }
        (
            HouseholderQr {
                rows,
                a,
                tau,
                diag,
            },
            perm,
        )
    }

    /// `R[i][j]` for `i ≤ j`.
    fn r(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else {
            self.a[j * self.rows + i]
        }
    }

    /// `b ← Qᵀ b`.
    fn apply_qt(&self, b: &mut [f64]) {
        for k in 0..self.tau.len() {
            self.apply_reflector(k, b);
        }
    }

    /// `b ← Q b`.
    fn apply_q(&self, b: &mut [f64]) {
        for k in (0..self.tau.len()).rev() {
            self.apply_reflector(k, b);
        }
    }

    fn apply_reflector(&self, k: usize, b: &mut [f64]) {
        let t = self.tau[k];
        if t == 0.0 {
            return;
        }
        let v = &self.col(k)[k..];
        let seg = &mut b[k..];
        let dot = seg[0] + v[1..].iter().zip(&seg[1..]).map(|(a, b)| a * b).sum::<f64>();
        let s = t * dot;
        seg[0] -= s;
        for (x, vi) in seg[1..].iter_mut().zip(&v[1..]) {
            *x -= s * vi;
        }
    }
}

/// A reusable factorization of `diag(√w)·Z`: solving for a new target vector
/// costs `O(n·p)`.
#[derive(Debug, Clone)]
pub struct WlsFactorization {
    rows: usize,
    cols: usize,
    sqrt_weights: Vec<f64>,
    qr: HouseholderQr,
    perm: Vec<usize>,
    rank: usize,
    // QR of the first `rank` rows of R, transposed; present when rank < cols
    cod: Option<HouseholderQr>,
}

impl WlsFactorization {
    pub fn new(design: &Matrix, weights: &[f64], rank_tol: f64) -> Result<Self> {
        let (n, p) = (design.nrows(), design.ncols());
        if n == 0 || p == 0 {
            return Err(Error::Argument("empty least-squares system".into()));
        }
        if weights.len() != n {
            return Err(Error::Argument(format!(
                "design has {n} rows but {} weights",
                weights.len()
            )));
        }
        check_finite("design", design.as_slice())?;
        check_finite("weights", weights)?;
        if let Some(w) = weights.iter().find(|w| **w <= 0.0) {
            return Err(Error::Argument(format!("weights must be positive, got {w}")));
        }
        let sqrt_weights: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        let mut a = vec![0.0; n * p];
        for r in 0..n {
            let row = design.row(r);
            for c in 0..p {
                a[c * n + r] = row[c] * sqrt_weights[r];
            }
        }
        let (qr, perm) = HouseholderQr::factor(n, p, a, true);
        let largest = qr.diag.first().map_or(0.0, |d| d.abs());
        let threshold = rank_tol * largest;
        let rank = if largest == 0.0 {
            0
        } else {
            qr.diag.iter().take_while(|d| d.abs() > threshold).count()
        };
        let cod = (rank < p && rank > 0).then(|| {
            // (R[0..rank, 0..p])ᵀ is p×rank, column-major
            let mut t = vec![0.0; p * rank];
            for i in 0..rank {
                for j in i..p {
                    t[i * p + j] = qr.r(i, j);
                }
            }
            HouseholderQr::factor(p, rank, t, false).0
        });
        Ok(WlsFactorization {
            rows: n,
            cols: p,
            sqrt_weights,
            qr,
            perm,
            rank,
            cod,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn condition_estimate(&self) -> f64 {
        if self.rank == 0 {
            return f64::INFINITY;
        }
        self.qr.diag[0].abs() / self.qr.diag[self.rank - 1].abs()
    }

    pub fn solve(&self, targets: &[f64]) -> Result<WlsSolution> {
        if targets.len() != self.rows {
            return Err(Error::Argument(format!(
                "expected {} targets, got {}",
                self.rows,
                targets.len()
            )));
        }
        check_finite("targets", targets)?;
        let mut c: Vec<f64> = targets
            .iter()
            .zip(&self.sqrt_weights)
            .map(|(t, s)| t * s)
            .collect();
        self.qr.apply_qt(&mut c);
        let residual_norm = c[self.rank..].iter().map(|v| v * v).sum::<f64>().sqrt();

        let r = self.rank;
        let mut y = vec![0.0; self.cols];
        match &self.cod {
            None => {
                for i in (0..r).rev() {
                    let mut s = c[i];
                    for j in i + 1..r {
                        s -= self.qr.r(i, j) * y[j];
                    }
                    y[i] = s / self.qr.diag[i];
                }
            }
            Some(cod) => {
                // R_topᵀ = Q₂R₂  ⇒  R₂ᵀ z = c[..r], y = Q₂ [z; 0]
                let mut z = vec![0.0; self.cols];
                for i in 0..r {
                    let mut s = c[i];
                    for j in 0..i {
                        s -= cod.r(j, i) * z[j];
                    }
                    z[i] = s / cod.diag[i];
                }
                cod.apply_q(&mut z);
                y = z;
            }
        }
        let mut params = vec![0.0; self.cols];
        for (k, &orig) in self.perm.iter().enumerate() {
            params[orig] = y[k];
        }
        Ok(WlsSolution {
            params,
            residual_norm,
            rank: self.rank,
            condition_estimate: self.condition_estimate(),
        })
    }

    /// The linear map `targets ↦ params` as an explicit `p × n` matrix.
    pub fn solution_operator(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        let mut e = vec![0.0; self.rows];
        for i in 0..self.rows {
            e[i] = 1.0;
            let sol = self.solve(&e).expect("unit vector is finite");
            for (j, v) in sol.params.iter().enumerate() {
                out.set(j, i, *v);
            }
            e[i] = 0.0;
        }
        out
    }
}

pub fn solve_weighted_ls(problem: &WlsProblem, rank_tol: f64) -> Result<WlsSolution> {
    problem.validate()?;
    WlsFactorization::new(&problem.design, &problem.weights, rank_tol)?.solve(&problem.targets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_system_interpolates() {
        let design = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let p = WlsProblem::new(design, vec![1.0, 1.0], vec![5.0, 10.0]).unwrap();
        let s = solve_weighted_ls(&p, DEFAULT_RANK_TOL).unwrap();
        assert!((s.params[0] - 1.0).abs() < 1e-14);
        assert!((s.params[1] - 3.0).abs() < 1e-14);
        assert!(s.residual_norm < 1e-14);
        assert_eq!(s.rank, 2);
    }

    #[test]
    fn weighted_mean() {
        let design = Matrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        let p = WlsProblem::new(design, vec![1.0, 3.0], vec![0.0, 2.0]).unwrap();
        let s = solve_weighted_ls(&p, DEFAULT_RANK_TOL).unwrap();
        assert!((s.params[0] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn duplicated_column_gives_minimum_norm_split() {
        let rows: Vec<Vec<f64>> = (1..=4).map(|i| vec![i as f64, i as f64]).collect();
        let targets: Vec<f64> = (1..=4).map(|i| 2.0 * i as f64).collect();
        let p = WlsProblem::new(Matrix::from_rows(&rows).unwrap(), vec![1.0; 4], targets).unwrap();
        let s = solve_weighted_ls(&p, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(s.rank, 1);
        assert!(s.is_rank_deficient());
        assert!((s.params[0] - 1.0).abs() < 1e-12, "{:?}", s.params);
        assert!((s.params[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn underdetermined_minimum_norm() {
        // x + y + z = 3 has minimum-norm solution (1,1,1)
        let p = WlsProblem::new(
            Matrix::from_rows(&[vec![1.0, 1.0, 1.0]]).unwrap(),
            vec![2.0],
            vec![3.0],
        )
        .unwrap();
        let s = solve_weighted_ls(&p, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(s.rank, 1);
        for v in s.params {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = Matrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(matches!(
            WlsProblem::new(d.clone(), vec![1.0], vec![f64::NAN]),
            Err(Error::NumericInput(_))
        ));
        assert!(matches!(
            WlsProblem::new(d.clone(), vec![f64::INFINITY], vec![1.0]),
            Err(Error::NumericInput(_))
        ));
        assert!(WlsProblem::new(d.clone(), vec![0.0], vec![1.0]).is_err());
        assert!(WlsProblem::new(d, vec![1.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn zero_design_has_rank_zero() {
        let p = WlsProblem::new(Matrix::zeros(3, 2), vec![1.0; 3], vec![1.0, 2.0, 3.0]).unwrap();
        let s = solve_weighted_ls(&p, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(s.rank, 0);
        assert_eq!(s.params, [0.0, 0.0]);
    }

    #[test]
    fn operator_matches_direct_solve() {
        let design = Matrix::from_rows(&[
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![1.0, 2.0],
            vec![1.0, 3.0],
        ])
        .unwrap();
        let w = [1.0, 2.0, 3.0, 4.0];
        let f = WlsFactorization::new(&design, &w, DEFAULT_RANK_TOL).unwrap();
        let op = f.solution_operator();
        let t = [0.5, 1.0, -2.0, 4.0];
        let direct = f.solve(&t).unwrap().params;
        let via = op.mul_vec(&t);
        for (a, b) in direct.iter().zip(via) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
