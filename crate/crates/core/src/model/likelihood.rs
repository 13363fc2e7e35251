use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::transform::{log1m, log_sum_exp, softplus};
use crate::ingest::{ConfirmedPresence, Visit};
use crate::ModelError;

/// One site-year that contributes to the likelihood.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub site: usize,
    /// 0-based offset into the study window.
    pub year: usize,
    pub a: bool,
    pub visits: Range<usize>,
}

/// Cells with at least one visit or `a = 1`, and per-visit integer codes
/// stored contiguously by cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodIndex {
    pub cells: Vec<Cell>,
    /// Index into the sorted observer tokens.
    pub observer: Vec<u32>,
    /// Week minus one, `0..53`.
    pub week: Vec<u8>,
    /// List-length class index, 0 = L1.
    pub class: Vec<u8>,
    pub y: Vec<bool>,
    pub observers: Vec<String>,
}

impl LikelihoodIndex {
    pub fn build(visits: &[Visit], presence: &ConfirmedPresence) -> Result<Self, ModelError> {
        let observers: Vec<String> = {
            let mut v: Vec<String> = visits.iter().map(|v| v.observer.clone()).collect();
            v.sort();
            v.dedup();
            v
        };
        let obs_idx: BTreeMap<String, u32> = observers
            .iter()
            .enumerate()
            .map(|(i, o)| (o.clone(), i as u32))
            .collect();
        let mut by_cell: BTreeMap<(usize, usize), Vec<&Visit>> = BTreeMap::new();
        for v in visits {
            let t = v.year - presence.first_year;
            if v.site >= presence.n_sites || t < 0 || t as usize >= presence.n_years {
                return Err(ModelError::Data(format!(
                    "visit at site {} year {} lies outside the presence matrix",
                    v.site, v.year
                )));
            }
            if !(1..=53).contains(&v.week) {
                return Err(ModelError::Data(format!("week {} outside 1..=53", v.week)));
            }
            by_cell.entry((v.site, t as usize)).or_default().push(v);
        }
        for s in 0..presence.n_sites {
            for t in 0..presence.n_years {
                if presence.get_idx(s, t) {
                    by_cell.entry((s, t)).or_default();
                }
            }
        }
        let mut idx = Self {
            cells: Vec::with_capacity(by_cell.len()),
            observer: Vec::with_capacity(visits.len()),
            week: Vec::with_capacity(visits.len()),
            class: Vec::with_capacity(visits.len()),
            y: Vec::with_capacity(visits.len()),
            observers,
        };
        for ((site, year), vs) in by_cell {
            let a = presence.get_idx(site, year);
            let start = idx.y.len();
            for v in vs {
                if v.y && !a {
                    return Err(ModelError::Data(format!(
                        "detection at site {site} year {} but a = 0",
                        v.year
                    )));
                }
                idx.observer.push(obs_idx[&v.observer]);
                idx.week.push(v.week - 1);
                idx.class.push(v.list_length.index() as u8);
                idx.y.push(v.y);
            }
            idx.cells.push(Cell {
                site,
                year,
                a,
                visits: start..idx.y.len(),
            });
        }
        Ok(idx)
    }

    pub fn n_visits(&self) -> usize {
        self.y.len()
    }
}

/// Marginal log-likelihood of one site-year on the probability scale.
pub fn site_year_loglik(a: bool, ys: &[bool], p_vs: &[f64], psi: f64) -> Result<f64, ModelError> {
    if ys.len() != p_vs.len() {
        return Err(ModelError::Dimension {
            expected: ys.len(),
            got: p_vs.len(),
        });
    }
    if a {
        let mut ll = psi.ln();
        for (&y, &p) in ys.iter().zip(p_vs) {
            ll += if y { p.ln() } else { log1m(p) };
        }
        Ok(ll)
    } else {
        if ys.iter().any(|&y| y) {
            return Err(ModelError::Data("detection in a cell with a = 0".into()));
        }
        if p_vs.is_empty() {
            return Ok(0.0);
        }
        let miss: f64 = p_vs.iter().map(|&p| log1m(p)).sum();
        Ok(log_sum_exp(log1m(psi), psi.ln() + miss))
    }
}

/// Logit-scale cell log-likelihood. Writes `∂/∂η_v` into `g_visit` and
/// returns `(log-lik, ∂/∂η_ψ)`.
pub(crate) fn cell_loglik_logit(
    a: bool,
    ys: &[bool],
    eta_v: &[f64],
    eta_psi: f64,
    g_visit: &mut [f64],
) -> (f64, f64) {
    let psi = super::transform::logistic(eta_psi);
    if a {
        let mut ll = -softplus(-eta_psi);
        for ((&y, &e), g) in ys.iter().zip(eta_v).zip(g_visit.iter_mut()) {
            let p = super::transform::logistic(e);
            if y {
                ll -= softplus(-e);
                *g = 1.0 - p;
            } else {
                ll -= softplus(e);
                *g = -p;
            }
        }
        (ll, 1.0 - psi)
    } else {
        let mut branch = -softplus(-eta_psi);
        for &e in eta_v {
            branch -= softplus(e);
        }
        let ll = log_sum_exp(-softplus(eta_psi), branch);
        let r = (branch - ll).exp();
        for (&e, g) in eta_v.iter().zip(g_visit.iter_mut()) {
            *g = -r * super::transform::logistic(e);
        }
        (ll, r - psi)
    }
}
