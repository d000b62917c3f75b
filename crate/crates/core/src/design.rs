//! Row encoding shared by the outcome and propensity models.

use serde::{Deserialize, Serialize};

use crate::data::{AttrKind, CausalQuery, Column, Dataset};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Term {
    Intercept,
    Numeric(usize),
    Indicator { col: usize, code: u32 },
}

/// Encodes a tuple as a design row: an intercept, optionally the treatment,
/// then every confounder. Numeric confounders enter raw; categoricals are
/// one-hot encoded with the first level present among alive tuples dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    names: Vec<String>,
    terms: Vec<Term>,
    treatment_col: usize,
    outcome_col: usize,
    treatment_index: Option<usize>,
}

impl Design {
    /// `[intercept, T, Z...]` for the outcome regression.
    pub fn outcome_model(dataset: &Dataset, query: &CausalQuery) -> Result<Self> {
        Self::build(dataset, query, true)
    }

    /// `[intercept, Z...]` for the propensity model.
    pub fn propensity_model(dataset: &Dataset, query: &CausalQuery) -> Result<Self> {
        Self::build(dataset, query, false)
    }

    fn build(dataset: &Dataset, query: &CausalQuery, with_treatment: bool) -> Result<Self> {
        query.validate(dataset)?;
        let schema = dataset.schema();
        let treatment_col = schema.require(&query.treatment)?;
        let outcome_col = schema.require(&query.outcome)?;
        let mut names = vec!["intercept".to_owned()];
        let mut terms = vec![Term::Intercept];
        let mut treatment_index = None;
        if with_treatment {
            treatment_index = Some(terms.len());
            names.push(query.treatment.clone());
            terms.push(Term::Numeric(treatment_col));
        }
        for z in &query.confounders {
            let col = schema.require(z)?;
            match (schema.kind(col), dataset.column(col)) {
                (AttrKind::Categorical, Column::Categorical { codes, levels }) => {
                    let mut present = vec![false; levels.len()];
                    for i in dataset.alive_ids() {
                        present[codes[i] as usize] = true;
                    }
                    let observed: Vec<u32> = (0..levels.len() as u32)
                        .filter(|&c| present[c as usize])
                        .collect();
                    for &code in observed.iter().skip(1) {
                        names.push(format!("{z}={}", levels[code as usize]));
                        terms.push(Term::Indicator { col, code });
                    }
                }
                _ => {
                    names.push(z.clone());
                    terms.push(Term::Numeric(col));
                }
            }
        }
        Ok(Self {
            names,
            terms,
            treatment_col,
            outcome_col,
            treatment_index,
        })
    }

    pub fn width(&self) -> usize {
        self.terms.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn treatment_index(&self) -> Option<usize> {
        self.treatment_index
    }

    pub fn encode_into(&self, dataset: &Dataset, row: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.width());
        for (slot, term) in out.iter_mut().zip(&self.terms) {
            *slot = match term {
                Term::Intercept => 1.0,
                Term::Numeric(col) => dataset.column(*col).as_numeric().expect("numeric term")[row],
                Term::Indicator { col, code } => match dataset.column(*col) {
                    Column::Categorical { codes, .. } => f64::from(u8::from(codes[row] == *code)),
                    Column::Numeric(_) => unreachable!("indicator on numeric column"),
                },
            };
        }
    }

    pub fn encode(&self, dataset: &Dataset, row: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.width()];
        self.encode_into(dataset, row, &mut out);
        out
    }

    /// Encoded rows as one row-major buffer.
    pub fn encode_rows(&self, dataset: &Dataset, rows: &[usize]) -> Vec<f64> {
        let m = self.width();
        let mut out = vec![0.0; rows.len() * m];
        for (chunk, &row) in out.chunks_exact_mut(m).zip(rows) {
            self.encode_into(dataset, row, chunk);
        }
        out
    }

    pub fn outcome(&self, dataset: &Dataset, row: usize) -> f64 {
        dataset.column(self.outcome_col).as_numeric().expect("numeric outcome")[row]
    }

    pub fn treatment(&self, dataset: &Dataset, row: usize) -> f64 {
        dataset.column(self.treatment_col).as_numeric().expect("binary treatment")[row]
    }
}
