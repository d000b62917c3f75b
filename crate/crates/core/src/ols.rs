//! Outcome regression estimator with incremental row-removal downdates.
//!
//! The effect is read off the treatment coefficient of the least-squares fit
//! `o ~ 1 + T + Z`. The state keeps `A = XᵀX`, its inverse and `b = Xᵀo`, so
//! deleting a block of rows `X_rmv` only needs the identity
//!
//! ```text
//! (A - UUᵀ)⁻¹ = A⁻¹ + A⁻¹U (I_r - UᵀA⁻¹U)⁻¹ UᵀA⁻¹,    U = X_rmvᵀ
//! ```
//!
//! or its first-order Neumann truncation `(A - Δ)⁻¹ ≈ A⁻¹ + A⁻¹ΔA⁻¹`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{CausalQuery, Dataset};
use crate::design::Design;
use crate::error::{Error, Result};
use crate::linalg;

/// Singular values below this fraction of the largest (after scaling to unit
/// diagonal) count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;
/// Upper bound on `‖ΔA⁻¹‖_F` accepted by [`OlsState::downdate_neumann`].
pub const NEUMANN_NORM_LIMIT: f64 = 0.5;
/// Number of consecutive Neumann steps after which the state should be refit.
pub const NEUMANN_MAX_STEPS: u32 = 50;
const CAPACITANCE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Staleness {
    Exact,
    NeumannApprox { steps: u32 },
}

/// Sufficient statistics of a least-squares fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsState {
    design: Design,
    a: DMatrix<f64>,
    a_inv: DMatrix<f64>,
    b: DVector<f64>,
    beta: DVector<f64>,
    rows: usize,
    treated: usize,
    staleness: Staleness,
}

/// Fits the outcome regression on the alive tuples of `dataset`.
pub fn fit_ols(dataset: &Dataset, query: &CausalQuery) -> Result<OlsState> {
    let rows: Vec<usize> = dataset.alive_ids().collect();
    fit_ols_rows(dataset, query, &rows)
}

/// Fits on an explicit row set, typically `dataset.alive_excluding(..)`.
pub fn fit_ols_rows(dataset: &Dataset, query: &CausalQuery, rows: &[usize]) -> Result<OlsState> {
    let design = if rows.len() == dataset.alive_count() {
        Design::outcome_model(dataset, query)?
    } else {
        // Categorical levels are decided on the rows actually fitted.
        Design::outcome_model(&dataset.with_alive(rows), query)?
    };
    let m = design.width();
    let x = design.encode_rows(dataset, rows);
    let o: Vec<f64> = rows.iter().map(|&r| design.outcome(dataset, r)).collect();
    let t_idx = design.treatment_index().expect("outcome model includes T");
    let treated = x.chunks_exact(m).filter(|r| r[t_idx] == 1.0).count();
    if treated == 0 || treated == rows.len() {
        return Err(Error::DegenerateGroups);
    }
    let (a, b) = linalg::gram(&x, &o, m);
    if rows.len() < m || linalg::scaled_eigen_ratio(&a) < RANK_TOLERANCE {
        return Err(Error::RankDeficient);
    }
    let a_inv = linalg::spd_inverse(&a).ok_or(Error::RankDeficient)?;
    let beta = refine(&a, &a_inv, &b, &a_inv * &b);
    Ok(OlsState {
        design,
        a,
        a_inv,
        b,
        beta,
        rows: rows.len(),
        treated,
        staleness: Staleness::Exact,
    })
}

/// One step of iterative refinement for `Aβ = b`.
fn refine(
    a: &DMatrix<f64>,
    a_inv: &DMatrix<f64>,
    b: &DVector<f64>,
    beta: DVector<f64>,
) -> DVector<f64> {
    let residual = b - a * &beta;
    beta + a_inv * residual
}

/// The treatment coefficient.
pub fn ate(state: &OlsState) -> f64 {
    state.ate()
}

impl OlsState {
    pub fn ate(&self) -> f64 {
        self.beta[self.treatment_index()]
    }

    pub fn treatment_index(&self) -> usize {
        self.design.treatment_index().expect("outcome model includes T")
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn gram_inverse(&self) -> &DMatrix<f64> {
        &self.a_inv
    }

    pub fn moment(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn staleness(&self) -> Staleness {
        self.staleness
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn width(&self) -> usize {
        self.design.width()
    }

    /// Encodes `ids` with this state's design, for the downdate entry points.
    pub fn encode_removal(&self, dataset: &Dataset, ids: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let x = self.design.encode_rows(dataset, ids);
        let o = ids.iter().map(|&i| self.design.outcome(dataset, i)).collect();
        (x, o)
    }

    fn after_removal_counts(&self, x_rmv: &[f64], r: usize) -> Result<(usize, usize)> {
        let m = self.width();
        let t_idx = self.treatment_index();
        let removed_treated = x_rmv.chunks_exact(m).filter(|row| row[t_idx] == 1.0).count();
        if r > self.rows {
            return Err(Error::RankLost);
        }
        let rows = self.rows - r;
        let treated = self.treated.checked_sub(removed_treated).ok_or(Error::RankLost)?;
        if treated == 0 || treated == rows {
            return Err(Error::DegenerateGroups);
        }
        if rows < m {
            return Err(Error::RankLost);
        }
        Ok((rows, treated))
    }

    /// Exact removal of the encoded row block `x_rmv` (row-major, `r × m`)
    /// with outcomes `o_rmv`.
    ///
    /// Blocks of at most `m` rows go through the `r × r` capacitance matrix of
    /// the Woodbury identity; larger blocks invert the `m × m` downdated Gram
    /// matrix directly, which is the cheaper of the two exact forms.
    pub fn downdate_exact(&self, x_rmv: &[f64], o_rmv: &[f64]) -> Result<OlsState> {
        let m = self.width();
        let r = o_rmv.len();
        assert_eq!(x_rmv.len(), r * m, "removal block has the wrong width");
        if r == 0 {
            return Ok(self.clone());
        }
        let (rows, treated) = self.after_removal_counts(x_rmv, r)?;
        let (delta, xo) = linalg::gram(x_rmv, o_rmv, m);
        let a_new = &self.a - &delta;
        let b_new = &self.b - &xo;
        let a_inv_new = if r <= m {
            let u = DMatrix::from_row_slice(r, m, x_rmv).transpose();
            let w = &self.a_inv * &u;
            let mut cap = DMatrix::<f64>::identity(r, r) - u.transpose() * &w;
            linalg::symmetrize(&mut cap);
            if linalg::extreme_eigen_ratio(&cap) < CAPACITANCE_TOLERANCE {
                return Err(Error::SingularCapacitance);
            }
            let cap_inv = linalg::spd_inverse(&cap).ok_or(Error::SingularCapacitance)?;
            let mut inv = &self.a_inv + &w * cap_inv * w.transpose();
            linalg::symmetrize(&mut inv);
            inv
        } else {
            if linalg::scaled_eigen_ratio(&a_new) < RANK_TOLERANCE {
                return Err(Error::RankLost);
            }
            linalg::spd_inverse(&a_new).ok_or(Error::RankLost)?
        };
        let beta = refine(&a_new, &a_inv_new, &b_new, &a_inv_new * &b_new);
        Ok(OlsState {
            design: self.design.clone(),
            a: a_new,
            a_inv: a_inv_new,
            b: b_new,
            beta,
            rows,
            treated,
            staleness: self.staleness,
        })
    }

    /// `‖ΔA⁻¹‖_F` for a removal block, the validity proxy of the Neumann step.
    pub fn neumann_norm(&self, x_rmv: &[f64]) -> f64 {
        let m = self.width();
        let (delta, _) = linalg::gram(x_rmv, &vec![0.0; x_rmv.len() / m.max(1)], m);
        (delta * &self.a_inv).norm()
    }

    /// Approximate removal keeping the first two Neumann terms.
    pub fn downdate_neumann(&self, x_rmv: &[f64], o_rmv: &[f64]) -> Result<OlsState> {
        let m = self.width();
        let r = o_rmv.len();
        assert_eq!(x_rmv.len(), r * m, "removal block has the wrong width");
        if r == 0 {
            return Ok(self.clone());
        }
        let (delta, xo) = linalg::gram(x_rmv, o_rmv, m);
        let p = &delta * &self.a_inv;
        let norm = p.norm();
        if !(norm < NEUMANN_NORM_LIMIT) {
            return Err(Error::NormTooLarge(norm));
        }
        let (rows, treated) = self.after_removal_counts(x_rmv, r)?;
        let mut a_inv_new = &self.a_inv + &self.a_inv * p;
        linalg::symmetrize(&mut a_inv_new);
        let b_new = &self.b - &xo;
        let beta = &a_inv_new * &b_new;
        let steps = match self.staleness {
            Staleness::Exact => 1,
            Staleness::NeumannApprox { steps } => steps + 1,
        };
        Ok(OlsState {
            design: self.design.clone(),
            a: &self.a - &delta,
            a_inv: a_inv_new,
            b: b_new,
            beta,
            rows,
            treated,
            staleness: Staleness::NeumannApprox { steps },
        })
    }

    /// Whether the staleness policy asks for a full refit.
    pub fn needs_refit(&self) -> bool {
        matches!(self.staleness, Staleness::NeumannApprox { steps } if steps >= NEUMANN_MAX_STEPS)
    }
}
