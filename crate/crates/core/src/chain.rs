//! Chain model and Gaussian phase-space states.
//!
//! Phase-space vectors are ordered (q_1..q_N, p_1..p_N) everywhere in the crate.
//! Units have hbar = 1.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_true() -> bool {
    true
}

/// Physical constants of the oscillator chain
///
/// H = sum_n [ p_n^2/2m + nu^2/2 (q_n - q_{n-1})^2 + K/2 (q_n - b_n)^2 ].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainParams {
    pub n_particles: usize,
    pub mass: f64,
    /// nu^2, the nearest-neighbour spring constant.
    pub coupling: f64,
    /// K, the on-site binding constant.
    pub binding: f64,
    /// Binding centers b_n. Empty means all zero.
    #[serde(default)]
    pub centers: Vec<f64>,
    #[serde(default = "default_true")]
    pub periodic: bool,
    /// Permits K = nu^2 = 0 for N > 1.
    #[serde(default)]
    pub free_evolution: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Derived {
    pub omega: f64,
    pub gamma: f64,
    pub mode_freqs: Vec<f64>,
}

impl ChainParams {
    pub fn new(n_particles: usize, mass: f64, coupling: f64, binding: f64) -> Self {
        ChainParams {
            n_particles,
            mass,
            coupling,
            binding,
            centers: Vec::new(),
            periodic: true,
            free_evolution: false,
        }
    }

    pub fn with_centers(mut self, centers: Vec<f64>) -> Self {
        self.centers = centers;
        self
    }

    pub fn n(&self) -> usize {
        self.n_particles
    }

    pub fn center(&self, j: usize) -> f64 {
        if self.centers.is_empty() {
            0.0
        } else {
            self.centers[j]
        }
    }

    pub fn has_centers(&self) -> bool {
        self.centers.iter().any(|&b| b != 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParams(msg.to_string()));
        if self.n_particles == 0 {
            return bad("N must be at least 1");
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return bad("mass must be positive and finite");
        }
        if !(self.coupling >= 0.0 && self.coupling.is_finite()) {
            return bad("coupling nu^2 must be non-negative and finite");
        }
        if !(self.binding >= 0.0 && self.binding.is_finite()) {
            return bad("binding K must be non-negative and finite");
        }
        if !self.centers.is_empty() && self.centers.len() != self.n_particles {
            return Err(Error::Dimension {
                expected: self.n_particles,
                got: self.centers.len(),
            });
        }
        if self.centers.iter().any(|b| !b.is_finite()) {
            return bad("centers must be finite");
        }
        if self.coupling == 0.0
            && self.binding == 0.0
            && self.n_particles > 1
            && !self.free_evolution
        {
            return bad("nu^2 = K = 0 requires free_evolution");
        }
        Ok(())
    }

    /// Bonds (n, n-1) of the interaction term. The periodic chain wraps
    /// q_0 = q_N; a single particle has no bond.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let n = self.n_particles;
        if self.periodic {
            (0..n)
                .map(|i| (i, (i + n - 1) % n))
                .filter(|(i, j)| i != j)
                .collect()
        } else {
            (1..n).map(|i| (i, i - 1)).collect()
        }
    }

    /// Quadratic form V of the potential, U = q^T V q / 2 - K b.q + const.
    pub fn potential_matrix(&self) -> DMatrix<f64> {
        let n = self.n_particles;
        let mut v = DMatrix::<f64>::identity(n, n) * self.binding;
        for (i, j) in self.bonds() {
            v[(i, i)] += self.coupling;
            v[(j, j)] += self.coupling;
            v[(i, j)] -= self.coupling;
            v[(j, i)] -= self.coupling;
        }
        v
    }

    pub fn omega(&self) -> Result<f64> {
        let w2 = (self.binding + 2.0 * self.coupling) / self.mass;
        if w2 <= 0.0 {
            return Err(Error::NoConfiningScale);
        }
        Ok(w2.sqrt())
    }

    pub fn gamma(&self) -> Result<f64> {
        let w = self.omega()?;
        Ok(self.coupling / (self.mass * w * w))
    }

    /// Normal-mode angular frequencies. The periodic chain is circulant, so
    /// omega_j^2 = (K + 4 nu^2 sin^2(pi j/N))/m; open chains are diagonalized.
    pub fn mode_freqs(&self) -> Vec<f64> {
        let n = self.n_particles;
        if self.periodic {
            (0..n)
                .map(|j| {
                    let s = (std::f64::consts::PI * j as f64 / n as f64).sin();
                    let w2 = if n == 1 {
                        self.binding / self.mass
                    } else {
                        (self.binding + 4.0 * self.coupling * s * s) / self.mass
                    };
                    w2.max(0.0).sqrt()
                })
                .collect()
        } else {
            let eig = self.potential_matrix().symmetric_eigen();
            let mut w: Vec<f64> = eig
                .eigenvalues
                .iter()
                .map(|&l| (l / self.mass).max(0.0).sqrt())
                .collect();
            w.sort_by(f64::total_cmp);
            w
        }
    }

    pub fn derived(&self) -> Result<Derived> {
        self.validate()?;
        Ok(Derived {
            omega: self.omega()?,
            gamma: self.gamma()?,
            mode_freqs: self.mode_freqs(),
        })
    }
}

/// Omega, gamma and the normal-mode frequencies.
pub fn derived_params(params: &ChainParams) -> Result<Derived> {
    params.derived()
}

/// Standard symplectic form J = [[0, I], [-I, 0]] in (q, p) ordering.
pub fn symplectic_form(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    j
}

/// Mean vector and covariance matrix over the 2N phase-space coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianState {
    pub const HBAR: f64 = 1.0;

    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d % 2 != 0 || d == 0 {
            return Err(Error::InvalidInput(format!(
                "phase-space dimension must be even and positive, got {d}"
            )));
        }
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::Dimension {
                expected: d,
                got: cov.nrows(),
            });
        }
        Ok(GaussianState { mean, cov })
    }

    /// Uncorrelated product state.
    pub fn product(q: &[f64], p: &[f64], var_q: &[f64], var_p: &[f64]) -> Result<Self> {
        let n = q.len();
        for len in [p.len(), var_q.len(), var_p.len()] {
            if len != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: len,
                });
            }
        }
        let mean = DVector::from_iterator(2 * n, q.iter().chain(p.iter()).copied());
        let diag = DVector::from_iterator(2 * n, var_q.iter().chain(var_p.iter()).copied());
        GaussianState::new(mean, DMatrix::from_diagonal(&diag))
    }

    pub fn n(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn q(&self, j: usize) -> f64 {
        self.mean[j]
    }

    pub fn p(&self, j: usize) -> f64 {
        self.mean[self.n() + j]
    }

    pub fn var_q(&self, j: usize) -> f64 {
        self.cov[(j, j)]
    }

    pub fn var_p(&self, j: usize) -> f64 {
        let n = self.n();
        self.cov[(n + j, n + j)]
    }

    /// sigma(q_i, q_j)
    pub fn cov_qq(&self, i: usize, j: usize) -> f64 {
        self.cov[(i, j)]
    }

    /// sigma(q_i, p_j)
    pub fn cov_qp(&self, i: usize, j: usize) -> f64 {
        self.cov[(i, self.n() + j)]
    }

    /// sigma(p_i, p_j)
    pub fn cov_pp(&self, i: usize, j: usize) -> f64 {
        let n = self.n();
        self.cov[(n + i, n + j)]
    }

    /// Variance of X = sum_j q_j.
    pub fn center_of_mass_variance(&self) -> f64 {
        let n = self.n();
        self.cov.view((0, 0), (n, n)).sum()
    }

    pub fn symmetrize(&mut self) {
        let t = self.cov.transpose();
        self.cov += t;
        self.cov *= 0.5;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StateIssue {
    /// Covariance is identically zero.
    ClassicalPoint,
    Asymmetric {
        defect: f64,
    },
    NotPositiveSemidefinite {
        min_eigenvalue: f64,
    },
    NegativeVariance {
        index: usize,
        value: f64,
    },
    /// Smallest symplectic eigenvalue below hbar/2. Warning only.
    BelowUncertainty {
        min_symplectic: f64,
    },
}

impl StateIssue {
    pub fn is_error(&self) -> bool {
        matches!(
            self,
            StateIssue::Asymmetric { .. }
                | StateIssue::NotPositiveSemidefinite { .. }
                | StateIssue::NegativeVariance { .. }
        )
    }
}

#[derive(Clone, Debug)]
pub struct StateReport {
    pub symmetry_defect: f64,
    pub min_eigenvalue: f64,
    pub symplectic_eigenvalues: Vec<f64>,
    pub issues: Vec<StateIssue>,
}

impl StateReport {
    pub fn has_errors(&self) -> bool {
        self.issues.iter().any(StateIssue::is_error)
    }
}

/// Symplectic eigenvalues of a positive semidefinite covariance, ascending.
///
/// With M = Sigma^{1/2} J Sigma^{1/2} antisymmetric, -M^2 has each nu_k^2 twice.
pub fn symplectic_eigenvalues(cov: &DMatrix<f64>) -> Vec<f64> {
    let d = cov.nrows();
    let n = d / 2;
    let sym = (cov + cov.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let sqrt_l = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let root = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_l) * eig.eigenvectors.transpose();
    let m = &root * symplectic_form(n) * &root;
    let neg_m2 = -(&m * &m);
    let neg_m2 = (&neg_m2 + neg_m2.transpose()) * 0.5;
    let mut nu: Vec<f64> = neg_m2
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .collect();
    nu.sort_by(f64::total_cmp);
    nu.iter().step_by(2).copied().collect()
}

pub fn validate_state(state: &GaussianState) -> StateReport {
    let cov = &state.cov;
    let scale = cov.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let asym = (cov - cov.transpose()).abs().max();
    let symmetry_defect = if scale > 0.0 { asym / scale } else { asym };
    let mut issues = Vec::new();

    if scale == 0.0 {
        issues.push(StateIssue::ClassicalPoint);
    }
    if symmetry_defect > 1e-12 {
        issues.push(StateIssue::Asymmetric {
            defect: symmetry_defect,
        });
    }
    for i in 0..cov.nrows() {
        if cov[(i, i)] < 0.0 {
            issues.push(StateIssue::NegativeVariance {
                index: i,
                value: cov[(i, i)],
            });
        }
    }
    let sym = (cov + cov.transpose()) * 0.5;
    let min_eigenvalue = sym
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &x| a.min(x));
    let trace = sym.trace().abs();
    if min_eigenvalue < -1e-10 * trace.max(f64::MIN_POSITIVE) {
        issues.push(StateIssue::NotPositiveSemidefinite { min_eigenvalue });
    }
    let symplectic_eigenvalues = symplectic_eigenvalues(cov);
    if scale > 0.0 {
        let min_nu = symplectic_eigenvalues[0];
        if min_nu < 0.5 * GaussianState::HBAR * (1.0 - 1e-9) {
            log::warn!("state below the uncertainty bound: min symplectic eigenvalue {min_nu}");
            issues.push(StateIssue::BelowUncertainty {
                min_symplectic: min_nu,
            });
        }
    }
    StateReport {
        symmetry_defect,
        min_eigenvalue,
        symplectic_eigenvalues,
        issues,
    }
}
