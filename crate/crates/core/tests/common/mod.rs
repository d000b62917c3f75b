//! Test-side reference implementations, written against raw columns so that
//! they share no code with the library's estimators.

#![allow(dead_code)]

use ate_repair::data::{AttrKind, Attribute, Column};
use ate_repair::{CausalQuery, Dataset, Schema};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// `T, O, Z1..Zp` and, when `levels > 0`, a categorical confounder `C` with
/// that many levels `c0, c1, …`.
pub fn random_dataset<R: Rng>(rng: &mut R, n: usize, p: usize, levels: usize) -> (Dataset, CausalQuery) {
    let z: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| StandardNormal.sample(rng)).collect())
        .collect();
    let c: Vec<u32> = (0..n).map(|_| if levels > 0 { rng.random_range(0..levels as u32) } else { 0 }).collect();
    let coef: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
    let effect = rng.random_range(-2.0..2.0);
    let mut t = Vec::with_capacity(n);
    let mut o = Vec::with_capacity(n);
    for i in 0..n {
        let lin: f64 = (0..p).map(|j| coef[j] * z[j][i]).sum::<f64>() + 0.3 * c[i] as f64;
        let prob = 1.0 / (1.0 + (-lin).exp());
        let ti = if rng.random::<f64>() < prob { 1.0 } else { 0.0 };
        let noise: f64 = StandardNormal.sample(rng);
        t.push(ti);
        o.push(effect * ti + lin + noise);
    }
    // keep both arms populated
    t[0] = 1.0;
    t[1] = 0.0;

    let mut attributes = vec![
        Attribute {
            name: "T".into(),
            kind: AttrKind::NumericBinary,
        },
        Attribute {
            name: "O".into(),
            kind: AttrKind::NumericContinuous,
        },
    ];
    let mut columns = vec![Column::Numeric(t), Column::Numeric(o)];
    let mut confounders = Vec::new();
    for (j, col) in z.into_iter().enumerate() {
        let name = format!("Z{}", j + 1);
        attributes.push(Attribute {
            name: name.clone(),
            kind: AttrKind::NumericContinuous,
        });
        columns.push(Column::Numeric(col));
        confounders.push(name);
    }
    if levels > 0 {
        attributes.push(Attribute {
            name: "C".into(),
            kind: AttrKind::Categorical,
        });
        columns.push(Column::Categorical {
            codes: c,
            levels: (0..levels).map(|l| format!("c{l}")).collect(),
        });
        confounders.push("C".into());
    }
    let data = Dataset::from_columns(Schema::new(attributes).unwrap(), columns).unwrap();
    let query = CausalQuery::new("T", "O", confounders, 0.0, 0.0);
    (data, query)
}

/// `[1, T, Z…]` for `rows`, categoricals one-hot over the codes present in
/// `basis` with the smallest present code dropped.
pub fn design_matrix(data: &Dataset, query: &CausalQuery, rows: &[usize], basis: &[usize]) -> DMatrix<f64> {
    let numeric = |name: &str| data.column_by_name(name).unwrap().as_numeric().unwrap().to_vec();
    let mut cols: Vec<Vec<f64>> = vec![vec![1.0; rows.len()]];
    let t = numeric(&query.treatment);
    cols.push(rows.iter().map(|&r| t[r]).collect());
    for z in &query.confounders {
        match data.column_by_name(z).unwrap() {
            Column::Numeric(v) => cols.push(rows.iter().map(|&r| v[r]).collect()),
            Column::Categorical { codes, .. } => {
                let mut present: Vec<u32> = basis.iter().map(|&r| codes[r]).collect();
                present.sort_unstable();
                present.dedup();
                for &code in present.iter().skip(1) {
                    cols.push(rows.iter().map(|&r| f64::from(codes[r] == code)).collect());
                }
            }
        }
    }
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| cols[j][i])
}

/// Least-squares coefficients through a Householder QR of the design, or
/// `None` when the design is rank deficient or an arm is empty.
pub fn ols_oracle(data: &Dataset, query: &CausalQuery, rows: &[usize]) -> Option<Vec<f64>> {
    ols_oracle_on_basis(data, query, rows, rows)
}

pub fn ols_oracle_on_basis(data: &Dataset, query: &CausalQuery, rows: &[usize], basis: &[usize]) -> Option<Vec<f64>> {
    let x = design_matrix(data, query, rows, basis);
    let (n, m) = x.shape();
    if n < m {
        return None;
    }
    let t = data.column_by_name(&query.treatment).unwrap().as_numeric().unwrap();
    let treated = rows.iter().filter(|&&r| t[r] == 1.0).count();
    if treated == 0 || treated == n {
        return None;
    }
    let o = data.column_by_name(&query.outcome).unwrap().as_numeric().unwrap();
    let y = DVector::from_iterator(n, rows.iter().map(|&r| o[r]));
    let scale = x.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    let qr = x.qr();
    let r = qr.r();
    let mut qty = y;
    qr.q_tr_mul(&mut qty);
    if (0..m).any(|i| r[(i, i)].abs() <= 1e-10 * scale) {
        return None;
    }
    let beta = r.solve_upper_triangular(&qty.rows(0, m).into_owned())?;
    Some(beta.iter().copied().collect())
}

pub fn ols_ate_oracle(data: &Dataset, query: &CausalQuery, rows: &[usize]) -> Option<f64> {
    ols_oracle(data, query, rows).map(|b| b[1])
}

/// Mean outcome of the treated rows minus that of the controls.
pub fn difference_of_means(data: &Dataset, query: &CausalQuery, rows: &[usize]) -> f64 {
    let t = data.column_by_name(&query.treatment).unwrap().as_numeric().unwrap();
    let o = data.column_by_name(&query.outcome).unwrap().as_numeric().unwrap();
    let (mut s1, mut n1, mut s0, mut n0) = (0.0, 0.0, 0.0, 0.0);
    for &r in rows {
        if t[r] == 1.0 {
            s1 += o[r];
            n1 += 1.0;
        } else {
            s0 += o[r];
            n0 += 1.0;
        }
    }
    s1 / n1 - s0 / n0
}

/// Smallest deletion (up to `budget` rows) whose oracle effect lies in the
/// query interval, by depth-first search over subsets of each size.
pub fn min_repair_size(data: &Dataset, query: &CausalQuery, budget: usize) -> Option<usize> {
    let alive: Vec<usize> = data.alive_ids().collect();
    let hits = |removed: &[usize]| {
        let rows: Vec<usize> = alive.iter().copied().filter(|r| !removed.contains(r)).collect();
        ols_ate_oracle(data, query, &rows).is_some_and(|a| query.contains(a))
    };
    fn search(alive: &[usize], from: usize, left: usize, chosen: &mut Vec<usize>, hits: &dyn Fn(&[usize]) -> bool) -> bool {
        if left == 0 {
            return hits(chosen);
        }
        for i in from..alive.len() {
            chosen.push(alive[i]);
            let found = search(alive, i + 1, left - 1, chosen, hits);
            chosen.pop();
            if found {
                return true;
            }
        }
        false
    }
    (0..=budget.min(alive.len())).find(|&size| search(&alive, 0, size, &mut Vec::new(), &hits))
}
