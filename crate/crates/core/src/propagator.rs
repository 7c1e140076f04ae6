//! Exact affine flow of the chain equations of motion.

use nalgebra::{DMatrix, DVector};

use crate::chain::{symplectic_form, ChainParams, GaussianState};
use crate::error::{Error, Result};

/// x(t) = S x(0) + d.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinePropagator {
    pub matrix: DMatrix<f64>,
    pub drift: DVector<f64>,
    pub time: f64,
}

impl AffinePropagator {
    pub fn identity(n: usize) -> Self {
        AffinePropagator {
            matrix: DMatrix::identity(2 * n, 2 * n),
            drift: DVector::zeros(2 * n),
            time: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.drift.len() / 2
    }

    /// max |S^T J S - J|
    pub fn symplectic_defect(&self) -> f64 {
        let j = symplectic_form(self.n());
        (self.matrix.transpose() * &j * &self.matrix - j)
            .abs()
            .max()
    }

    /// Apply `self` first, then `later`.
    pub fn then(&self, later: &AffinePropagator) -> AffinePropagator {
        AffinePropagator {
            matrix: &later.matrix * &self.matrix,
            drift: &later.matrix * &self.drift + &later.drift,
            time: self.time + later.time,
        }
    }

    pub fn apply_mean(&self, mean: &DVector<f64>) -> DVector<f64> {
        &self.matrix * mean + &self.drift
    }
}

/// Cached normal-mode decomposition of a chain.
#[derive(Clone, Debug)]
pub struct ChainDynamics {
    params: ChainParams,
    modes: DMatrix<f64>,
    freqs: Vec<f64>,
    /// q* with V q* = K b; None when K = 0 or all centers vanish.
    fixed_point: Option<DVector<f64>>,
}

impl ChainDynamics {
    pub fn new(params: &ChainParams) -> Result<Self> {
        params.validate()?;
        let v = params.potential_matrix();
        let eig = v.symmetric_eigen();
        let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
        let zero_tol = 1e-12 * lmax.max(1e-300);
        let freqs = eig
            .eigenvalues
            .iter()
            .map(|&l| {
                if l <= zero_tol {
                    0.0
                } else {
                    (l / params.mass).sqrt()
                }
            })
            .collect();

        let fixed_point = if params.has_centers() {
            if params.binding > 0.0 {
                let n = params.n();
                let kb =
                    DVector::from_iterator(n, (0..n).map(|j| params.binding * params.center(j)));
                let ut_kb = eig.eigenvectors.transpose() * kb;
                let scaled = ut_kb.component_div(&eig.eigenvalues);
                Some(&eig.eigenvectors * scaled)
            } else {
                log::warn!("K = 0: binding centers do not enter the force and are ignored");
                None
            }
        } else {
            None
        };

        Ok(ChainDynamics {
            params: params.clone(),
            modes: eig.eigenvectors,
            freqs,
            fixed_point,
        })
    }

    pub fn params(&self) -> &ChainParams {
        &self.params
    }

    /// Normal-mode frequencies in the order of the cached eigenvectors.
    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    /// Static equilibrium (q*, 0) of the affine flow.
    pub fn fixed_point(&self) -> DVector<f64> {
        let n = self.params.n();
        let mut x = DVector::zeros(2 * n);
        if let Some(q) = &self.fixed_point {
            x.rows_mut(0, n).copy_from(q);
        }
        x
    }

    fn mode_sum(&self, weights: &[f64]) -> DMatrix<f64> {
        let mut scaled = self.modes.clone();
        for (mut col, &w) in scaled.column_iter_mut().zip(weights) {
            col *= w;
        }
        scaled * self.modes.transpose()
    }

    pub fn propagator(&self, t: f64) -> Result<AffinePropagator> {
        if !t.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite time {t}")));
        }
        let n = self.params.n();
        let m = self.params.mass;
        let mut c = Vec::with_capacity(n);
        let mut qp = Vec::with_capacity(n);
        let mut pq = Vec::with_capacity(n);
        for &w in &self.freqs {
            if w == 0.0 {
                c.push(1.0);
                qp.push(t / m);
                pq.push(0.0);
            } else {
                let (s, co) = (w * t).sin_cos();
                c.push(co);
                qp.push(s / (m * w));
                pq.push(-m * w * s);
            }
        }
        let b_qq = self.mode_sum(&c);
        let b_qp = self.mode_sum(&qp);
        let b_pq = self.mode_sum(&pq);

        let mut s = DMatrix::zeros(2 * n, 2 * n);
        s.view_mut((0, 0), (n, n)).copy_from(&b_qq);
        s.view_mut((0, n), (n, n)).copy_from(&b_qp);
        s.view_mut((n, 0), (n, n)).copy_from(&b_pq);
        s.view_mut((n, n), (n, n)).copy_from(&b_qq);

        let drift = match &self.fixed_point {
            Some(_) => {
                let xs = self.fixed_point();
                &xs - &s * &xs
            }
            None => DVector::zeros(2 * n),
        };
        Ok(AffinePropagator {
            matrix: s,
            drift,
            time: t,
        })
    }
}

/// Exact propagator from the normal-mode decomposition. Build a
/// [`ChainDynamics`] directly when many times are needed.
pub fn exact_propagator(params: &ChainParams, t: f64) -> Result<AffinePropagator> {
    ChainDynamics::new(params)?.propagator(t)
}

/// mean' = S mean + d, cov' = S cov S^T.
pub fn evolve(state: &GaussianState, prop: &AffinePropagator) -> Result<GaussianState> {
    let d = state.mean.len();
    if prop.drift.len() != d {
        return Err(Error::Dimension {
            expected: prop.drift.len(),
            got: d,
        });
    }
    let mean = prop.apply_mean(&state.mean);
    let cov = &prop.matrix * &state.cov * prop.matrix.transpose();
    let mut out = GaussianState { mean, cov };
    out.symmetrize();
    Ok(out)
}

/// Evolves the mean and only the one-particle (q_j, p_j) covariance blocks.
/// Cross-particle covariances of the result are zero, so this is exact for
/// anything built from single-particle marginals such as real-space fields.
/// Costs O(N^2) for a product initial state.
pub fn evolve_marginals(state: &GaussianState, prop: &AffinePropagator) -> Result<GaussianState> {
    let d = state.mean.len();
    if prop.drift.len() != d {
        return Err(Error::Dimension {
            expected: prop.drift.len(),
            got: d,
        });
    }
    let n = d / 2;
    let s = &prop.matrix;
    let diagonal = (0..d).all(|i| (0..d).all(|j| i == j || state.cov[(i, j)] == 0.0));
    let mut cov = DMatrix::zeros(d, d);
    if diagonal {
        let w: Vec<f64> = (0..d).map(|a| state.cov[(a, a)]).collect();
        for j in 0..n {
            let (mut qq, mut pp, mut qp) = (0.0, 0.0, 0.0);
            for (a, &wa) in w.iter().enumerate() {
                let (x, y) = (s[(j, a)], s[(n + j, a)]);
                qq += x * x * wa;
                pp += y * y * wa;
                qp += x * y * wa;
            }
            cov[(j, j)] = qq;
            cov[(n + j, n + j)] = pp;
            cov[(j, n + j)] = qp;
            cov[(n + j, j)] = qp;
        }
    } else {
        let sc = s * &state.cov;
        for j in 0..n {
            let (rq, rp) = (sc.row(j), sc.row(n + j));
            let (sq, sp) = (s.row(j), s.row(n + j));
            cov[(j, j)] = rq.dot(&sq);
            cov[(n + j, n + j)] = rp.dot(&sp);
            let qp = 0.5 * (rq.dot(&sp) + rp.dot(&sq));
            cov[(j, n + j)] = qp;
            cov[(n + j, j)] = qp;
        }
    }
    Ok(GaussianState {
        mean: prop.apply_mean(&state.mean),
        cov,
    })
}

/// <H> including second-moment contributions.
pub fn energy_expectation(state: &GaussianState, params: &ChainParams) -> f64 {
    let n = params.n();
    let m = params.mass;
    let mut e = 0.0;
    for j in 0..n {
        let p = state.p(j);
        let u = state.q(j) - params.center(j);
        e += (p * p + state.var_p(j)) / (2.0 * m);
        e += 0.5 * params.binding * (u * u + state.var_q(j));
    }
    for (i, j) in params.bonds() {
        let dq = state.q(i) - state.q(j);
        let var = state.var_q(i) + state.var_q(j) - 2.0 * state.cov_qq(i, j);
        e += 0.5 * params.coupling * (dq * dq + var);
    }
    e
}
