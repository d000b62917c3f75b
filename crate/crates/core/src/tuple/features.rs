use crate::data::{CausalQuery, Dataset};
use crate::design::Design;
use crate::error::Result;

/// Standardised `(Z, T, O)` coordinates of every table row, row-major.
///
/// Confounders use the propensity design without its intercept, so
/// categoricals appear one-hot. Means and deviations are taken over alive
/// rows; a constant column is only centred.
#[derive(Debug, Clone)]
pub struct FeatureSpace {
    dims: usize,
    data: Vec<f64>,
}

impl FeatureSpace {
    pub fn build(dataset: &Dataset, query: &CausalQuery) -> Result<Self> {
        let design = Design::propensity_model(dataset, query)?;
        let dz = design.width() - 1;
        let dims = dz + 2;
        let mut data = vec![0.0; dataset.n() * dims];
        let mut z = vec![0.0; design.width()];
        for row in 0..dataset.n() {
            design.encode_into(dataset, row, &mut z);
            let out = &mut data[row * dims..(row + 1) * dims];
            out[..dz].copy_from_slice(&z[1..]);
            out[dz] = design.treatment(dataset, row);
            out[dz + 1] = design.outcome(dataset, row);
        }
        let alive = dataset.alive_count().max(1) as f64;
        for c in 0..dims {
            let mean = dataset.alive_ids().map(|r| data[r * dims + c]).sum::<f64>() / alive;
            let var = dataset
                .alive_ids()
                .map(|r| (data[r * dims + c] - mean).powi(2))
                .sum::<f64>()
                / alive;
            let scale = if var > 0.0 { var.sqrt().recip() } else { 1.0 };
            for r in 0..dataset.n() {
                let v = &mut data[r * dims + c];
                *v = (*v - mean) * scale;
            }
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn point(&self, row: usize) -> &[f64] {
        &self.data[row * self.dims..(row + 1) * self.dims]
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
