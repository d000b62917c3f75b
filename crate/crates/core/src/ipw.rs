//! Inverse propensity weighting with a logistic propensity model.
//!
//! The propensity model minimises the penalised negative log-likelihood
//!
//! ```text
//! L(θ; D) = Σ_{i∈D} [ log(1 + exp(z_iᵀθ)) - t_i z_iᵀθ ] + (λ/2) ‖θ‖²
//! ```
//!
//! and the effect is the self-normalised (Hájek) difference of the weighted
//! outcome means of the treated and control groups. Removal of tuples is
//! handled by one Newton step per mini-batch on the remaining data instead of
//! a refit. Batch `i` uses the gradient and Hessian of `L` on the data that
//! remains after excluding batches `1..=i`; this reading was checked against a
//! full refit in the tests below.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{CausalQuery, Dataset};
use crate::design::Design;
use crate::error::{Error, Result};
use crate::linalg;

const GRADIENT_TOLERANCE: f64 = 1e-8;
const MAX_NEWTON_ITERATIONS: usize = 200;
const FISHER_CONDITION_LIMIT: f64 = 1e12;

/// Tunables of the propensity model and of the unlearning step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IpwConfig {
    /// ℓ2 penalty strength.
    pub lambda: f64,
    /// Propensities are clipped to `[clip, 1 - clip]` before weighting.
    pub clip: f64,
    /// Mini-batch size of the unlearning update.
    pub batch_size: usize,
    /// Scale of the Gaussian perturbation added after each batch (0 = off).
    pub sigma: f64,
}

impl Default for IpwConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            clip: 0.01,
            batch_size: 512,
            sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityModel {
    pub theta: DVector<f64>,
    pub lambda: f64,
    pub clip: f64,
}

impl PropensityModel {
    pub fn propensity(&self, z: &[f64]) -> f64 {
        sigmoid(dot(z, self.theta.as_slice()))
    }
}

/// Gradient and Hessian of the penalised loss at the model's `theta`, over
/// `rows` tuples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Curvature {
    gradient: DVector<f64>,
    hessian: DMatrix<f64>,
    rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpwState {
    model: PropensityModel,
    design: Design,
    propensities: Vec<f64>,
    curvature: Option<Curvature>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `log(1 + exp(x))` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

struct Objective<'a> {
    z: &'a [f64],
    t: &'a [f64],
    d: usize,
    lambda: f64,
}

impl Objective<'_> {
    fn loss(&self, theta: &DVector<f64>) -> f64 {
        let th = theta.as_slice();
        let data: f64 = self
            .z
            .chunks_exact(self.d)
            .zip(self.t)
            .map(|(z, &t)| {
                let s = dot(z, th);
                softplus(s) - t * s
            })
            .sum();
        data + 0.5 * self.lambda * theta.norm_squared()
    }

    fn curvature(&self, theta: &DVector<f64>) -> Curvature {
        let (g, h) = sums(self.z, self.t, self.d, theta);
        let gradient = DVector::from_vec(g) + self.lambda * theta;
        let mut hessian = h;
        for i in 0..self.d {
            hessian[(i, i)] += self.lambda;
        }
        Curvature {
            gradient,
            hessian,
            rows: self.t.len(),
        }
    }
}

/// Unpenalised gradient and Hessian sums of the logistic loss over a block.
fn sums(z: &[f64], t: &[f64], d: usize, theta: &DVector<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let th = theta.as_slice();
    let mut g = vec![0.0; d];
    let mut h = vec![0.0; d * d];
    for (zi, &ti) in z.chunks_exact(d).zip(t) {
        let p = sigmoid(dot(zi, th));
        let w = p * (1.0 - p);
        for a in 0..d {
            g[a] += (p - ti) * zi[a];
            let wa = w * zi[a];
            if wa == 0.0 {
                continue;
            }
            let line = &mut h[a * d..(a + 1) * d];
            for b in a..d {
                line[b] += wa * zi[b];
            }
        }
    }
    let mut hm = DMatrix::from_row_slice(d, d, &h);
    for a in 0..d {
        for b in 0..a {
            hm[(a, b)] = hm[(b, a)];
        }
    }
    (g, hm)
}

fn check_groups(t: &[f64]) -> Result<()> {
    let treated = t.iter().filter(|&&x| x == 1.0).count();
    if treated == 0 || treated == t.len() {
        return Err(Error::DegenerateGroups);
    }
    Ok(())
}

/// Fits the propensity model on the alive tuples with default clipping.
pub fn fit_logistic(dataset: &Dataset, query: &CausalQuery, lambda: f64) -> Result<IpwState> {
    let cfg = IpwConfig {
        lambda,
        ..IpwConfig::default()
    };
    let rows: Vec<usize> = dataset.alive_ids().collect();
    fit_logistic_rows(dataset, query, &cfg, &rows)
}

/// Newton iterations with backtracking until `‖∇L‖ ≤ 1e-8`.
pub fn fit_logistic_rows(
    dataset: &Dataset,
    query: &CausalQuery,
    cfg: &IpwConfig,
    rows: &[usize],
) -> Result<IpwState> {
    let design = if rows.len() == dataset.alive_count() {
        Design::propensity_model(dataset, query)?
    } else {
        Design::propensity_model(&dataset.with_alive(rows), query)?
    };
    let d = design.width();
    let z = design.encode_rows(dataset, rows);
    let t: Vec<f64> = rows.iter().map(|&r| design.treatment(dataset, r)).collect();
    check_groups(&t)?;
    let obj = Objective {
        z: &z,
        t: &t,
        d,
        lambda: cfg.lambda,
    };
    let mut theta = DVector::zeros(d);
    let mut loss = obj.loss(&theta);
    let mut converged = None;
    for _ in 0..MAX_NEWTON_ITERATIONS {
        let curv = obj.curvature(&theta);
        if curv.gradient.norm() <= GRADIENT_TOLERANCE {
            converged = Some(curv);
            break;
        }
        let chol = curv.hessian.clone().cholesky().ok_or(Error::Separation)?;
        let step = chol.solve(&curv.gradient);
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = &theta - scale * &step;
            let cand_loss = obj.loss(&cand);
            if cand_loss <= loss + 1e-12 * loss.abs().max(1.0) {
                theta = cand;
                loss = cand_loss;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted || !theta.iter().all(|x| x.is_finite()) || theta.amax() > 1e8 {
            return Err(Error::Separation);
        }
    }
    let curvature = converged.ok_or(Error::Separation)?;
    let model = PropensityModel {
        theta,
        lambda: cfg.lambda,
        clip: cfg.clip,
    };
    let propensities = all_propensities(&design, dataset, &model.theta, &[]);
    Ok(IpwState {
        model,
        design,
        propensities,
        curvature: Some(curvature),
    })
}

/// Propensity of every table row under `theta`, leaving `skip` at NaN.
fn all_propensities(design: &Design, dataset: &Dataset, theta: &DVector<f64>, skip: &[usize]) -> Vec<f64> {
    let mut z = vec![0.0; design.width()];
    let mut out: Vec<f64> = (0..dataset.n())
        .map(|row| {
            design.encode_into(dataset, row, &mut z);
            sigmoid(dot(&z, theta.as_slice()))
        })
        .collect();
    for &s in skip {
        out[s] = f64::NAN;
    }
    out
}

/// Hájek-weighted effect over `(t, o, p)` triples, with `p` clipped.
pub fn hajek_ate(items: impl IntoIterator<Item = (f64, f64, f64)>, clip: f64) -> Result<f64> {
    let (mut num1, mut den1, mut num0, mut den0) = (0.0, 0.0, 0.0, 0.0);
    for (t, o, p) in items {
        let p = p.clamp(clip, 1.0 - clip);
        if t == 1.0 {
            num1 += o / p;
            den1 += 1.0 / p;
        } else {
            num0 += o / (1.0 - p);
            den0 += 1.0 / (1.0 - p);
        }
    }
    if den1 <= 0.0 || den0 <= 0.0 {
        return Err(Error::EmptyGroup);
    }
    Ok(num1 / den1 - num0 / den0)
}

/// The IPW effect on the alive tuples of `dataset`, using cached
/// propensities.
pub fn ate_ipw(state: &IpwState, dataset: &Dataset, query: &CausalQuery) -> Result<f64> {
    let _ = query;
    let rows: Vec<usize> = dataset.alive_ids().collect();
    state.ate_on_rows(dataset, &rows)
}

/// Applies the mini-batch Fisher update for the removal of `removed`.
///
/// The dataset must still hold `removed` as alive; the caller deletes them
/// afterwards. With `sigma > 0` each batch adds `σ F^(-1/4) b`, `b ~ N(0, I)`.
pub fn fisher_unlearn<R: Rng + ?Sized>(
    state: &IpwState,
    dataset: &Dataset,
    removed: &[usize],
    batch_size: usize,
    sigma: f64,
    rng: &mut R,
) -> Result<IpwState> {
    if removed.is_empty() {
        return Ok(state.clone());
    }
    let theta = state.unlearn_theta(dataset, removed, batch_size, sigma, rng)?;
    let model = PropensityModel {
        theta,
        ..state.model.clone()
    };
    let propensities = all_propensities(&state.design, dataset, &model.theta, removed);
    Ok(IpwState {
        model,
        design: state.design.clone(),
        propensities,
        curvature: None,
    })
}

impl IpwState {
    pub fn model(&self) -> &PropensityModel {
        &self.model
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.model.theta
    }

    pub fn propensities(&self) -> &[f64] {
        &self.propensities
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn ate_on_rows(&self, dataset: &Dataset, rows: &[usize]) -> Result<f64> {
        hajek_ate(
            rows.iter().map(|&r| {
                (
                    self.design.treatment(dataset, r),
                    self.design.outcome(dataset, r),
                    self.propensities[r],
                )
            }),
            self.model.clip,
        )
    }

    /// Effect on `rows` with propensities recomputed under `theta`.
    pub fn ate_with_theta(&self, dataset: &Dataset, rows: &[usize], theta: &DVector<f64>) -> Result<f64> {
        let mut z = vec![0.0; self.design.width()];
        hajek_ate(
            rows.iter().map(|&r| {
                self.design.encode_into(dataset, r, &mut z);
                (
                    self.design.treatment(dataset, r),
                    self.design.outcome(dataset, r),
                    sigmoid(dot(&z, theta.as_slice())),
                )
            }),
            self.model.clip,
        )
    }

    /// Recomputes gradient and Hessian on the alive tuples so that the next
    /// unlearning call can start from them.
    pub fn refresh_curvature(&mut self, dataset: &Dataset) {
        let rows: Vec<usize> = dataset.alive_ids().collect();
        self.curvature = Some(self.curvature_on(dataset, &rows));
    }

    fn curvature_on(&self, dataset: &Dataset, rows: &[usize]) -> Curvature {
        let z = self.design.encode_rows(dataset, rows);
        let t: Vec<f64> = rows.iter().map(|&r| self.design.treatment(dataset, r)).collect();
        Objective {
            z: &z,
            t: &t,
            d: self.design.width(),
            lambda: self.model.lambda,
        }
        .curvature(&self.model.theta)
    }

    /// Parameters after unlearning `removed`, without touching propensities.
    pub fn unlearn_theta<R: Rng + ?Sized>(
        &self,
        dataset: &Dataset,
        removed: &[usize],
        batch_size: usize,
        sigma: f64,
        rng: &mut R,
    ) -> Result<DVector<f64>> {
        let d = self.design.width();
        let batch_size = batch_size.max(1);
        let mut remaining_mask = dataset.alive_mask().to_vec();
        for &r in removed {
            if !dataset.is_alive(r) {
                return Err(Error::AlreadyDeleted(r));
            }
            remaining_mask[r] = false;
        }
        let final_t = (0..dataset.n())
            .filter(|&i| remaining_mask[i])
            .map(|i| self.design.treatment(dataset, i));
        let (mut treated, mut total) = (0usize, 0usize);
        for t in final_t {
            total += 1;
            treated += usize::from(t == 1.0);
        }
        if treated == 0 || treated == total {
            return Err(Error::DegenerateGroups);
        }

        let mut theta = self.model.theta.clone();
        let mut current = dataset.alive_mask().to_vec();
        let cached = self
            .curvature
            .as_ref()
            .filter(|c| c.rows == dataset.alive_count());
        for (i, batch) in removed.chunks(batch_size).enumerate() {
            for &r in batch {
                current[r] = false;
            }
            let (gradient, hessian) = match (i, cached) {
                (0, Some(c)) => {
                    // θ has not moved yet: subtract the batch from the cache.
                    let z = self.design.encode_rows(dataset, batch);
                    let t: Vec<f64> = batch.iter().map(|&r| self.design.treatment(dataset, r)).collect();
                    let (g, h) = sums(&z, &t, d, &theta);
                    (&c.gradient - DVector::from_vec(g), &c.hessian - h)
                }
                _ => {
                    let rows: Vec<usize> = (0..dataset.n()).filter(|&k| current[k]).collect();
                    let z = self.design.encode_rows(dataset, &rows);
                    let t: Vec<f64> = rows.iter().map(|&r| self.design.treatment(dataset, r)).collect();
                    let c = Objective {
                        z: &z,
                        t: &t,
                        d,
                        lambda: self.model.lambda,
                    }
                    .curvature(&theta);
                    (c.gradient, c.hessian)
                }
            };
            let mut hessian = hessian;
            linalg::symmetrize(&mut hessian);
            let ratio = linalg::extreme_eigen_ratio(&hessian);
            if !(ratio > 1.0 / FISHER_CONDITION_LIMIT) {
                return Err(Error::SingularFisher);
            }
            let chol = hessian.clone().cholesky().ok_or(Error::SingularFisher)?;
            theta -= chol.solve(&gradient);
            if sigma > 0.0 {
                let b = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                theta += sigma * linalg::spd_power(&hessian, -0.25) * b;
            }
        }
        Ok(theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::read_csv;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixture() -> (Dataset, CausalQuery) {
        let csv = "T,O\n1,1\n1,3\n1,5\n1,-4\n0,0\n0,0\n0,0\n";
        (
            read_csv(csv.as_bytes(), None).unwrap(),
            CausalQuery::new("T", "O", Vec::<String>::new(), 0.0, 0.0),
        )
    }

    #[test]
    fn intercept_only_recovers_base_rate() {
        let (ds, q) = fixture();
        let s = fit_logistic(&ds, &q, 1e-12).unwrap();
        for i in 0..ds.n() {
            assert!((s.propensities()[i] - 4.0 / 7.0).abs() < 1e-9);
        }
        let ate = ate_ipw(&s, &ds, &q).unwrap();
        assert!((ate - 1.25).abs() < 1e-12);
    }

    #[test]
    fn constant_outcome() {
        let csv = "T,O,Z\n1,3,0.1\n0,3,0.4\n1,3,-0.2\n0,3,0.9\n1,3,1.3\n0,3,-1.0\n";
        let ds = read_csv(csv.as_bytes(), None).unwrap();
        let q = CausalQuery::new("T", "O", ["Z"], 0.0, 0.0);
        let s = fit_logistic(&ds, &q, 1e-4).unwrap();
        assert!(ate_ipw(&s, &ds, &q).unwrap().abs() < 1e-12);
    }

    #[test]
    fn empty_removal_keeps_theta() {
        let (ds, q) = fixture();
        let s = fit_logistic(&ds, &q, 1e-4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = fisher_unlearn(&s, &ds, &[], 512, 0.0, &mut rng).unwrap();
        assert_eq!(u.theta(), s.theta());
    }

    #[test]
    fn degenerate_inputs() {
        let ds = read_csv("T,O\n1,1\n1,2\n".as_bytes(), None).unwrap();
        let q = CausalQuery::new("T", "O", Vec::<String>::new(), 0.0, 0.0);
        assert!(matches!(fit_logistic(&ds, &q, 1e-4), Err(Error::DegenerateGroups)));
        let (ds, q) = fixture();
        let s = fit_logistic(&ds, &q, 1e-4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = fisher_unlearn(&s, &ds, &[4, 5, 6], 2, 0.0, &mut rng);
        assert!(matches!(err, Err(Error::DegenerateGroups)));
    }

    #[test]
    fn perfect_separation_is_tamed_by_the_penalty() {
        let csv = "T,O,Z\n1,1,2\n1,2,3\n0,1,-2\n0,0,-3\n";
        let ds = read_csv(csv.as_bytes(), None).unwrap();
        let q = CausalQuery::new("T", "O", ["Z"], 0.0, 0.0);
        let s = fit_logistic(&ds, &q, 1.0).unwrap();
        assert!(s.theta().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn hajek_clips_extreme_propensities() {
        let items = [(1.0, 1.0, 0.0), (0.0, 0.0, 1.0)];
        assert_eq!(hajek_ate(items, 0.01).unwrap(), 1.0);
        assert!(matches!(hajek_ate([(1.0, 1.0, 0.5)], 0.01), Err(Error::EmptyGroup)));
    }
}
