//! Discrete one-body operators on the grid: kinetic and Schrodinger matrices,
//! mean-field operators, spectral projectors and heat-kernel diagonals.
//!
//! Matrices live in the orthonormal node basis e_i = indicator_i / dx^{d/2}.
//! A density matrix Gamma represents the kernel gamma(x_i, x_j) =
//! Gamma_ij / dx^d, so the spatial density is rho(x_i) = Gamma_ii / dx^d and
//! tr gamma = sum_i Gamma_ii.

use crate::lattice::{Density, Grid, ModelSpec};
use crate::{Error, Result};
use nalgebra::DMatrix;
use std::sync::Arc;

/// Pauli-constraint slack allowed on density-matrix eigenvalues.
pub const TOL_PSD: f64 = 1e-9;

mod lapack {
    extern "C" {
        // LAPACK divide-and-conquer symmetric eigensolver (from OpenBLAS).
        pub fn dsyevd_(
            jobz: *const u8,
            uplo: *const u8,
            n: *const i32,
            a: *mut f64,
            lda: *const i32,
            w: *mut f64,
            work: *mut f64,
            lwork: *const i32,
            iwork: *mut i32,
            liwork: *const i32,
            info: *mut i32,
        );
    }
}

/// Full symmetric eigendecomposition, eigenvalues ascending, eigenvectors in
/// the columns of the returned matrix.
pub(crate) fn sym_eigh(mat: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = mat.nrows() as i32;
    let mut a = mat.clone();
    let mut w = vec![0.0f64; mat.nrows()];
    let (jobz, uplo) = (b'V', b'L');
    let mut info: i32 = 0;
    // Workspace query.
    let mut wkopt = 0.0f64;
    let mut iwkopt: i32 = 0;
    let m1: i32 = -1;
    unsafe {
        lapack::dsyevd_(
            &jobz, &uplo, &n, a.as_mut_slice().as_mut_ptr(), &n, w.as_mut_ptr(),
            &mut wkopt, &m1, &mut iwkopt, &m1, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::InternalInvariant(format!("dsyevd workspace query failed: info={info}")));
    }
    let lwork = wkopt as i32;
    let liwork = iwkopt;
    let mut work = vec![0.0f64; lwork as usize];
    let mut iwork = vec![0i32; liwork as usize];
    unsafe {
        lapack::dsyevd_(
            &jobz, &uplo, &n, a.as_mut_slice().as_mut_ptr(), &n, w.as_mut_ptr(),
            work.as_mut_ptr(), &lwork, iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::InternalInvariant(format!("dsyevd failed: info={info}")));
    }
    Ok((w, a))
}

/// Real symmetric one-body density matrix with 0 <= gamma <= 1.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    grid: Arc<Grid>,
    gamma: DMatrix<f64>,
}

impl DensityMatrix {
    pub fn new(grid: Arc<Grid>, gamma: DMatrix<f64>) -> Result<Self> {
        let n = grid.n_nodes();
        if gamma.nrows() != n || gamma.ncols() != n {
            return Err(Error::ShapeMismatch {
                expected: n,
                got: gamma.nrows(),
            });
        }
        let sym_dev = symmetry_deviation(&gamma);
        if sym_dev > 1e-12 * gamma.norm().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "density matrix not symmetric (deviation {sym_dev:.3e})"
            )));
        }
        Ok(DensityMatrix { grid, gamma })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.n_nodes();
        DensityMatrix {
            grid,
            gamma: DMatrix::zeros(n, n),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    /// tr gamma = sum_i Gamma_ii.
    pub fn trace(&self) -> f64 {
        self.gamma.trace()
    }

    /// Spatial density rho(x_i) = Gamma_ii / dx^dim.
    pub fn density(&self) -> Density {
        let w = self.grid.weight();
        let values: Vec<f64> = (0..self.grid.n_nodes())
            .map(|i| (self.gamma[(i, i)] / w).max(0.0))
            .collect();
        Density::new(self.grid.clone(), values).expect("diagonal of PSD matrix")
    }

    pub fn frobenius_distance(&self, other: &DensityMatrix) -> f64 {
        (&self.gamma - &other.gamma).norm()
    }

    /// ||Gamma^2 - Gamma||_F, zero for exact projectors.
    pub fn idempotency_residual(&self) -> f64 {
        (&self.gamma * &self.gamma - &self.gamma).norm()
    }

    /// Checks the Pauli constraint 0 <= gamma <= 1 by eigendecomposition.
    pub fn check_admissible(&self, tol: f64) -> Result<()> {
        let (vals, _) = sym_eigh(&self.gamma)?;
        let (lo, hi) = (vals[0], vals[vals.len() - 1]);
        if lo < -tol || hi > 1.0 + tol {
            return Err(Error::OccupancyViolation(format!(
                "eigenvalues outside [0, 1]: range [{lo:.3e}, {hi:.3e}], tol {tol:.1e}"
            )));
        }
        Ok(())
    }

    /// Convex mixture (1 - t) self + t other.
    pub fn mix(&self, other: &DensityMatrix, t: f64) -> DensityMatrix {
        DensityMatrix {
            grid: self.grid.clone(),
            gamma: &self.gamma * (1.0 - t) + &other.gamma * t,
        }
    }
}

fn symmetry_deviation(m: &DMatrix<f64>) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    dev
}

/// Real symmetric one-body operator (units: energy).
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    grid: Arc<Grid>,
    matrix: DMatrix<f64>,
}

impl OperatorMatrix {
    pub fn new(grid: Arc<Grid>, matrix: DMatrix<f64>) -> Result<Self> {
        let n = grid.n_nodes();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::ShapeMismatch {
                expected: n,
                got: matrix.nrows(),
            });
        }
        let dev = symmetry_deviation(&matrix);
        if dev > 1e-12 * matrix.norm().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "operator not symmetric (deviation {dev:.3e})"
            )));
        }
        Ok(OperatorMatrix { grid, matrix })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.norm()
    }

    /// tr(H Gamma).
    pub fn trace_against(&self, gamma: &DensityMatrix) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.matrix.nrows() {
            for j in 0..self.matrix.ncols() {
                acc += self.matrix[(i, j)] * gamma.matrix()[(j, i)];
            }
        }
        acc
    }

    /// Default Fermi-shell tolerance, 1e-9 ||H||_F.
    pub fn default_zero_tol(&self) -> f64 {
        1e-9 * self.frobenius_norm()
    }
}

/// Second-order central-difference -hbar^2 Laplacian with Dirichlet
/// boundaries; the 2D matrix is the Kronecker sum of 1D stencils.
pub fn kinetic_matrix(grid: &Arc<Grid>, hbar: f64) -> OperatorMatrix {
    let n = grid.points_per_axis();
    let scale = hbar * hbar / (grid.spacing() * grid.spacing());
    let mut k1 = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        k1[(i, i)] = 2.0 * scale;
        if i + 1 < n {
            k1[(i, i + 1)] = -scale;
            k1[(i + 1, i)] = -scale;
        }
    }
    let matrix = match grid.dim() {
        1 => k1,
        _ => {
            let nn = n * n;
            let mut m = DMatrix::<f64>::zeros(nn, nn);
            for ix in 0..n {
                for iy in 0..n {
                    let row = ix * n + iy;
                    for jx in 0..n {
                        let v = k1[(ix, jx)];
                        if v != 0.0 {
                            m[(row, jx * n + iy)] += v;
                        }
                    }
                    for jy in 0..n {
                        let v = k1[(iy, jy)];
                        if v != 0.0 {
                            m[(row, ix * n + jy)] += v;
                        }
                    }
                }
            }
            m
        }
    };
    OperatorMatrix {
        grid: grid.clone(),
        matrix,
    }
}

/// -hbar^2 Laplacian + diag(V - E).
pub fn schrodinger(m: &ModelSpec) -> OperatorMatrix {
    let mut op = kinetic_matrix(&m.grid, m.hbar);
    let shifted = m.shifted_potential();
    for (i, v) in shifted.iter().enumerate() {
        op.matrix[(i, i)] += v;
    }
    op
}

/// Mean-field operator H_gamma = (-hbar^2 Lap + V - E)
/// + lambda hbar^d diag(rho_gamma * w) - lambda hbar^d X_w(gamma),
/// where X_w has kernel w(x - y) gamma(x, y). Exchange is omitted for
/// reduced Hartree-Fock.
pub fn mean_field_operator(
    m: &ModelSpec,
    gamma: &DensityMatrix,
    include_exchange: bool,
) -> Result<OperatorMatrix> {
    if !Arc::ptr_eq(gamma.grid(), &m.grid) && *gamma.grid().as_ref() != *m.grid.as_ref() {
        return Err(Error::GridMismatch("density matrix grid differs from model grid".into()));
    }
    let mut op = schrodinger(m);
    if m.lambda == 0.0 || m.interaction.is_zero() {
        return Ok(op);
    }
    let table = m.kernel_table();
    let coupling = m.lambda * m.hbar_d();
    let rho = gamma.density();
    let direct = crate::lattice::convolve_with_table(rho.values(), &table, &m.grid);
    let nn = m.grid.n_nodes();
    for i in 0..nn {
        op.matrix[(i, i)] += coupling * direct[i];
    }
    if include_exchange {
        for i in 0..nn {
            for j in 0..nn {
                op.matrix[(i, j)] -= coupling * table.get(i, j) * gamma.matrix()[(i, j)];
            }
        }
    }
    Ok(op)
}

/// Eigendecomposition with ascending eigenvalues and orthonormal columns.
#[derive(Debug, Clone)]
pub struct SpectralData {
    grid: Arc<Grid>,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SpectralData {
    pub fn compute(op: &OperatorMatrix) -> Result<Self> {
        let (eigenvalues, eigenvectors) = sym_eigh(&op.matrix)?;
        let data = SpectralData {
            grid: op.grid.clone(),
            eigenvalues,
            eigenvectors,
        };
        // Probe-vector residual check: O(n^2), full reconstruction is O(n^3).
        let n = data.eigenvalues.len();
        let mut state = 0x9e3779b97f4a7c15u64;
        for _ in 0..3 {
            let v = nalgebra::DVector::from_fn(n, |_, _| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 33) as f64 / (1u64 << 31) as f64 - 0.5
            });
            let coeffs = data.eigenvectors.transpose() * &v;
            let scaled = nalgebra::DVector::from_fn(n, |k, _| coeffs[k] * data.eigenvalues[k]);
            let recon = &data.eigenvectors * scaled;
            let residual = (recon - &op.matrix * &v).norm() / v.norm();
            if residual > 1e-8 * op.frobenius_norm().max(1e-300) {
                return Err(Error::InternalInvariant(format!(
                    "eigendecomposition residual {residual:.3e} exceeds tolerance"
                )));
            }
        }
        Ok(data)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// min |lambda_k|.
    pub fn gap_to_zero(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|v| v.abs())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn reconstruction_residual(&self, op: &OperatorMatrix) -> f64 {
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.eigenvalues.clone()));
        (&self.eigenvectors * lam * self.eigenvectors.transpose() - &op.matrix).norm()
    }

    /// Spectral projector onto eigenvalues below (strict) or up to (closed)
    /// the threshold, with the count of eigenvalues inside the zero_tol shell
    /// around the threshold reported as the degeneracy.
    pub fn projector(
        &self,
        threshold: f64,
        mode: ProjectorMode,
        zero_tol: f64,
    ) -> (DensityMatrix, usize) {
        let cutoff = match mode {
            ProjectorMode::Strict => threshold - zero_tol,
            ProjectorMode::Closed => threshold + zero_tol,
        };
        let n = self.eigenvalues.len();
        let selected: Vec<usize> = (0..n)
            .filter(|&k| match mode {
                ProjectorMode::Strict => self.eigenvalues[k] < cutoff,
                ProjectorMode::Closed => self.eigenvalues[k] <= cutoff,
            })
            .collect();
        let degeneracy = self
            .eigenvalues
            .iter()
            .filter(|&&v| (v - threshold).abs() <= zero_tol)
            .count();
        let mut gamma = DMatrix::<f64>::zeros(n, n);
        for &k in &selected {
            let u = self.eigenvectors.column(k);
            gamma.ger(1.0, &u, &u, 1.0);
        }
        // Enforce exact symmetry against rounding in the rank-one updates.
        for i in 0..n {
            for j in (i + 1)..n {
                let s = 0.5 * (gamma[(i, j)] + gamma[(j, i)]);
                gamma[(i, j)] = s;
                gamma[(j, i)] = s;
            }
        }
        (
            DensityMatrix {
                grid: self.grid.clone(),
                gamma,
            },
            degeneracy,
        )
    }

    /// Heat-kernel diagonal e^{-t H}(x, x) at a node, in kernel units 1/dx^d.
    pub fn heat_diag(&self, t: f64, node: usize) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("t must be > 0, got {t}")));
        }
        let floor = -700.0 / t;
        if self.eigenvalues[0] < floor {
            return Err(Error::InvalidArgument(format!(
                "eigenvalue {:.3e} below overflow guard {floor:.3e}",
                self.eigenvalues[0]
            )));
        }
        let w = self.grid.weight();
        let mut acc = 0.0;
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            let u = self.eigenvectors[(node, k)];
            acc += (-t * lam).exp() * u * u;
        }
        Ok(acc / w)
    }

    /// Eigenvalue list as plain text, one per line.
    pub fn eigenvalues_text(&self) -> String {
        let mut s = String::new();
        for v in &self.eigenvalues {
            s.push_str(&format!("{v:.15e}\n"));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectorMode {
    Strict,
    Closed,
}

/// Diagonalizes H and projects; see `SpectralData::projector`.
pub fn spectral_projector(
    op: &OperatorMatrix,
    threshold: f64,
    mode: ProjectorMode,
    zero_tol: f64,
) -> Result<(DensityMatrix, usize)> {
    let data = SpectralData::compute(op)?;
    Ok(data.projector(threshold, mode, zero_tol))
}

/// Heat-kernel diagonal via eigendecomposition; see `SpectralData::heat_diag`.
pub fn heat_diag(op: &OperatorMatrix, t: f64, node: usize) -> Result<f64> {
    let data = SpectralData::compute(op)?;
    data.heat_diag(t, node)
}
