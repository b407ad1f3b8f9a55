//! Neuron contribution and alignment diagnostics of a trained network.

use std::io::Write;

use ndarray::{Array1, Array2};

use crate::data::SubclassBasis;
use crate::net::PreluNet;
use crate::{linalg, Error, Result};

#[derive(Debug, Clone)]
pub struct AlignmentReport {
    /// `|v_j|·‖w_j‖` in original neuron order.
    pub contributions: Array1<f64>,
    /// Neuron indices sorted by decreasing contribution.
    pub order: Vec<usize>,
    /// Column names: `mu_plus`, `mu_minus`, `mu_1`, ..., `mu_K`.
    pub targets: Vec<String>,
    /// `cos(w_j, target)` in original neuron order, one row per neuron.
    pub cosines: Array2<f64>,
    /// Neurons grouped by their best-aligned target, each group in
    /// decreasing contribution.
    pub grouping: Vec<usize>,
}

impl AlignmentReport {
    pub fn width(&self) -> usize {
        self.contributions.len()
    }

    /// The top `frac` of neurons by contribution (at least one).
    pub fn top(&self, frac: f64) -> &[usize] {
        let n = ((self.width() as f64 * frac).ceil() as usize).clamp(1, self.width());
        &self.order[..n]
    }

    /// Largest cosine of neuron `j` over the class averages.
    pub fn best_class_average(&self, j: usize) -> f64 {
        self.cosines[[j, 0]].max(self.cosines[[j, 1]])
    }

    /// Largest cosine of neuron `j` over the subclass centers.
    pub fn best_subclass(&self, j: usize) -> f64 {
        self.cosines.row(j).iter().skip(2).copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index into `targets` of the best-aligned direction of neuron `j`.
    pub fn best_target(&self, j: usize) -> usize {
        argmax(self.cosines.row(j).iter().copied())
    }

    /// Rows in contribution order: `rank,neuron,contribution,<targets...>`.
    pub fn write_csv<W: Write>(&self, wr: &mut csv::Writer<W>, rows: &[usize]) -> Result<()> {
        let mut header = vec!["rank".to_string(), "neuron".into(), "contribution".into()];
        header.extend(self.targets.iter().cloned());
        wr.write_record(&header)?;
        for (rank, &j) in rows.iter().enumerate() {
            let mut rec = vec![rank.to_string(), j.to_string(), format!("{:.10e}", self.contributions[j])];
            rec.extend(self.cosines.row(j).iter().map(|c| format!("{c:.6}")));
            wr.write_record(&rec)?;
        }
        Ok(())
    }
}

fn argmax(it: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in it.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

pub fn alignment_report(net: &PreluNet, basis: &SubclassBasis) -> Result<AlignmentReport> {
    if net.dim() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), got: net.dim() });
    }
    let k = basis.k();
    let mut dirs = Array2::zeros((k + 2, basis.dim()));
    dirs.row_mut(0).assign(&basis.mu_plus());
    dirs.row_mut(1).assign(&basis.mu_minus());
    for i in 0..k {
        dirs.row_mut(i + 2).assign(&basis.center(i));
    }
    let mut targets = vec!["mu_plus".to_string(), "mu_minus".to_string()];
    targets.extend((1..=k).map(|i| format!("mu_{i}")));

    let h = net.width();
    let mut cosines = Array2::zeros((h, k + 2));
    for (j, w) in net.w.rows().into_iter().enumerate() {
        for (t, d) in dirs.rows().into_iter().enumerate() {
            cosines[[j, t]] = linalg::cosine(w, d);
        }
    }
    let contributions = net.contributions();
    let mut order: Vec<usize> = (0..h).collect();
    order.sort_by(|&a, &b| contributions[b].total_cmp(&contributions[a]).then(a.cmp(&b)));
    let mut grouping = order.clone();
    let best: Vec<usize> = (0..h).map(|j| argmax(cosines.row(j).iter().copied())).collect();
    grouping.sort_by_key(|&j| best[j]);
    Ok(AlignmentReport { contributions, order, targets, cosines, grouping })
}
