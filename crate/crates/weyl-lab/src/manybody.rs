//! Toy-scale grand-canonical exact diagonalization over a few one-particle
//! modes, giving the variational ordering check e_h <= e^HF in the same
//! truncation.
//!
//! States are bit masks over the retained modes; fermionic signs are
//! computed on the fly from the number of set bits below the acted index.

use crate::lattice::{KernelTable, ModelSpec};
use crate::operators::{schrodinger, sym_eigh, SpectralData};
use crate::{Error, Result};
use nalgebra::DMatrix;

/// Dimension guards: M modes and per-sector dimension C(M, N).
pub const MAX_MODES: usize = 14;
pub const MAX_SECTOR_DIM: usize = 4000;

/// Galerkin truncation onto the M lowest modes of -hbar^2 Lap + V.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    pub modes: usize,
    /// One-body matrix in the mode basis, chemical-potential shift included;
    /// diagonal by construction (eigenbasis of the shifted operator).
    pub h: DMatrix<f64>,
    /// Two-body tensor W[a][b][c][d] = iint phi_a phi_c w phi_b phi_d,
    /// flattened with stride M^3, M^2, M, 1.
    pub w: Vec<f64>,
    pub hbar_d: f64,
}

impl ModeBasis {
    #[inline]
    pub fn w_get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let m = self.modes;
        self.w[((a * m + b) * m + c) * m + d]
    }
}

/// Assembles the mode basis by quadrature over the grid eigenvectors.
pub fn project_modes(m: &ModelSpec, modes: usize) -> Result<ModeBasis> {
    if modes == 0 || modes > MAX_MODES {
        return Err(Error::InvalidArgument(format!(
            "mode count {modes} outside 1..={MAX_MODES}"
        )));
    }
    if modes > m.grid.n_nodes() {
        return Err(Error::InvalidArgument(
            "more modes requested than grid nodes".into(),
        ));
    }
    let op = schrodinger(m);
    let spectral = SpectralData::compute(&op)?;
    let mut h = DMatrix::zeros(modes, modes);
    for a in 0..modes {
        h[(a, a)] = spectral.eigenvalues()[a];
    }

    let mut w = vec![0.0; modes.pow(4)];
    if m.lambda != 0.0 && !m.interaction.is_zero() {
        let table: KernelTable = m.kernel_table();
        let n = m.grid.n_nodes();
        let u = spectral.eigenvectors();
        // Pair densities q_ac(i) = u_a(i) u_c(i); then
        // W_{abcd} = sum_ij q_ac(i) w_ij q_bd(j) = q_ac . (w q_bd).
        let npairs = modes * modes;
        let mut pair = vec![0.0; npairs * n];
        for a in 0..modes {
            for c in 0..modes {
                let row = &mut pair[(a * modes + c) * n..(a * modes + c + 1) * n];
                for i in 0..n {
                    row[i] = u[(i, a)] * u[(i, c)];
                }
            }
        }
        let mut conv = vec![0.0; npairs * n];
        for p in 0..npairs {
            let src = &pair[p * n..(p + 1) * n];
            let dst = &mut conv[p * n..(p + 1) * n];
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += table.get(i, j) * src[j];
                }
                dst[i] = acc;
            }
        }
        for a in 0..modes {
            for b in 0..modes {
                for c in 0..modes {
                    for d in 0..modes {
                        let q_ac = &pair[(a * modes + c) * n..(a * modes + c + 1) * n];
                        let w_bd = &conv[(b * modes + d) * n..(b * modes + d + 1) * n];
                        w[((a * modes + b) * modes + c) * modes + d] =
                            q_ac.iter().zip(w_bd).map(|(x, y)| x * y).sum();
                    }
                }
            }
        }
    }
    Ok(ModeBasis {
        modes,
        h,
        w,
        hbar_d: m.hbar_d(),
    })
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1usize;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Sign (+-1) of applying an annihilation/creation operator at `index`:
/// (-1)^{number of occupied modes below index}.
#[inline]
fn jordan_wigner_sign(state: u32, index: usize) -> f64 {
    let below = state & ((1u32 << index) - 1);
    if below.count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Minimum eigenvalue of the second-quantized Hamiltonian restricted to the
/// N-particle sector (unscaled: multiply by hbar^d for e_h conventions).
pub fn sector_ground(basis: &ModeBasis, n_particles: usize) -> Result<f64> {
    let m = basis.modes;
    if n_particles > m {
        return Err(Error::InvalidArgument(format!(
            "sector N = {n_particles} exceeds M = {m}"
        )));
    }
    if n_particles == 0 {
        return Ok(0.0);
    }
    let dim = binomial(m, n_particles);
    if dim > MAX_SECTOR_DIM {
        return Err(Error::InvalidArgument(format!(
            "sector dimension C({m}, {n_particles}) = {dim} exceeds {MAX_SECTOR_DIM}"
        )));
    }
    // Enumerate bit masks with n_particles bits among m.
    let mut states = Vec::with_capacity(dim);
    let mut index_of = std::collections::HashMap::with_capacity(dim);
    for s in 0u32..(1u32 << m) {
        if s.count_ones() as usize == n_particles {
            index_of.insert(s, states.len());
            states.push(s);
        }
    }

    let mut hmat = DMatrix::<f64>::zeros(dim, dim);
    let half = 0.5 * basis.hbar_d;
    for (col, &s) in states.iter().enumerate() {
        // One-body: a+_a a_b.
        for b in 0..m {
            if s & (1 << b) == 0 {
                continue;
            }
            let sign_b = jordan_wigner_sign(s, b);
            let mid = s & !(1 << b);
            for a in 0..m {
                let hab = basis.h[(a, b)];
                if hab == 0.0 || mid & (1 << a) != 0 {
                    continue;
                }
                let sign_a = jordan_wigner_sign(mid, a);
                let row = index_of[&(mid | (1 << a))];
                hmat[(row, col)] += sign_a * sign_b * hab;
            }
        }
        // Two-body: (hbar^d / 2) W_{abcd} a+_a a+_b a_d a_c, right to left.
        for c in 0..m {
            if s & (1 << c) == 0 {
                continue;
            }
            let sign_c = jordan_wigner_sign(s, c);
            let s1 = s & !(1 << c);
            for d in 0..m {
                if s1 & (1 << d) == 0 {
                    continue;
                }
                let sign_d = jordan_wigner_sign(s1, d);
                let s2 = s1 & !(1 << d);
                for b in 0..m {
                    if s2 & (1 << b) != 0 {
                        continue;
                    }
                    let sign_b = jordan_wigner_sign(s2, b);
                    let s3 = s2 | (1 << b);
                    for a in 0..m {
                        if s3 & (1 << a) != 0 {
                            continue;
                        }
                        let coeff = basis.w_get(a, b, c, d);
                        if coeff == 0.0 {
                            continue;
                        }
                        let sign_a = jordan_wigner_sign(s3, a);
                        let row = index_of[&(s3 | (1 << a))];
                        hmat[(row, col)] += half * sign_a * sign_b * sign_c * sign_d * coeff;
                    }
                }
            }
        }
    }

    let (eigenvalues, _) = sym_eigh(&hmat)?;
    Ok(eigenvalues[0])
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SectorSpectrum {
    /// Unscaled ground energies for N = 0..=N_max.
    pub sector_energies: Vec<f64>,
    pub argmin_n: usize,
    /// e_h = hbar^d min_N.
    pub e_h: f64,
    /// False when the minimum sits at N_max: the truncation is too small to
    /// trust the grand-canonical minimum.
    pub interior: bool,
}

pub fn grand_canonical_ground(basis: &ModeBasis, n_max: usize) -> Result<SectorSpectrum> {
    if n_max > basis.modes {
        return Err(Error::InvalidArgument(format!(
            "N_max = {n_max} exceeds M = {}",
            basis.modes
        )));
    }
    let mut sector_energies = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        sector_energies.push(sector_ground(basis, n)?);
    }
    let argmin_n = sector_energies
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    Ok(SectorSpectrum {
        e_h: basis.hbar_d * sector_energies[argmin_n],
        argmin_n,
        interior: argmin_n < n_max,
        sector_energies,
    })
}

/// Hartree-Fock (single Slater determinant) energy of occupying the mode
/// subset encoded in `mask`, unscaled.
pub fn slater_energy(basis: &ModeBasis, mask: u32) -> f64 {
    let m = basis.modes;
    let occupied: Vec<usize> = (0..m).filter(|&a| mask & (1 << a) != 0).collect();
    let mut e: f64 = occupied.iter().map(|&a| basis.h[(a, a)]).sum();
    for &a in &occupied {
        for &b in &occupied {
            e += 0.5 * basis.hbar_d * (basis.w_get(a, b, a, b) - basis.w_get(a, b, b, a));
        }
    }
    e
}

/// hbar^d times the best Slater-determinant energy over all occupation
/// subsets — the Hartree-Fock ground energy within the same truncation.
pub fn best_slater(basis: &ModeBasis) -> (f64, u32) {
    let m = basis.modes;
    let mut best = (0.0, 0u32);
    for mask in 0u32..(1u32 << m) {
        let e = slater_energy(basis, mask);
        if e < best.0 {
            best = (e, mask);
        }
    }
    (basis.hbar_d * best.0, best.1)
}
