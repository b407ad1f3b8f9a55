use std::io::{Read, Write};

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Synthetic,
    Simplified,
    MnistRaw,
    MnistParity,
    MnistDigits,
    Imported,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Provenance::Synthetic => "synthetic",
            Provenance::Simplified => "simplified",
            Provenance::MnistRaw => "mnist-raw",
            Provenance::MnistParity => "mnist-parity",
            Provenance::MnistDigits => "mnist-digits",
            Provenance::Imported => "imported",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// Labels in `{-1, +1}` with optional latent subclass (0-based).
    Binary { y: Vec<f64>, z: Option<Vec<usize>> },
    /// Class indices `0..classes`.
    Multiclass { labels: Vec<usize>, classes: usize },
}

/// One observation of a binary dataset.
#[derive(Debug, Clone, Copy)]
pub struct LabeledSample<'a> {
    pub x: ArrayView1<'a, f64>,
    pub y: f64,
    pub z: Option<usize>,
}

/// Row-major samples with their targets.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub targets: Targets,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(x: Array2<f64>, targets: Targets, provenance: Provenance) -> Result<Self> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::InvalidParameter("dataset must be nonempty".into()));
        }
        match &targets {
            Targets::Binary { y, z } => {
                if y.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: y.len() });
                }
                if y.iter().any(|&v| v != 1.0 && v != -1.0) {
                    return Err(Error::InvalidParameter("binary labels must be +-1".into()));
                }
                if let Some(z) = z {
                    if z.len() != n {
                        return Err(Error::DimensionMismatch { expected: n, got: z.len() });
                    }
                }
            }
            Targets::Multiclass { labels, classes } => {
                if labels.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
                }
                if labels.iter().any(|&l| l >= *classes) {
                    return Err(Error::InvalidParameter("class label out of range".into()));
                }
            }
        }
        Ok(Self { x, targets, provenance })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_binary(&self) -> bool {
        matches!(self.targets, Targets::Binary { .. })
    }

    /// Number of network outputs this dataset needs.
    pub fn outputs(&self) -> usize {
        match &self.targets {
            Targets::Binary { .. } => 1,
            Targets::Multiclass { classes, .. } => *classes,
        }
    }

    /// Binary labels, if any.
    pub fn labels_pm(&self) -> Option<&[f64]> {
        match &self.targets {
            Targets::Binary { y, .. } => Some(y),
            Targets::Multiclass { .. } => None,
        }
    }

    pub fn subclasses(&self) -> Option<&[usize]> {
        match &self.targets {
            Targets::Binary { z: Some(z), .. } => Some(z),
            _ => None,
        }
    }

    pub fn class_labels(&self) -> Option<&[usize]> {
        match &self.targets {
            Targets::Multiclass { labels, .. } => Some(labels),
            Targets::Binary { .. } => None,
        }
    }

    pub fn sample(&self, i: usize) -> Option<LabeledSample<'_>> {
        match &self.targets {
            Targets::Binary { y, z } => Some(LabeledSample { x: self.x.row(i), y: y[i], z: z.as_ref().map(|z| z[i]) }),
            Targets::Multiclass { .. } => None,
        }
    }

    pub fn samples(&self) -> impl Iterator<Item = LabeledSample<'_>> + '_ {
        (0..self.len()).filter_map(move |i| self.sample(i))
    }

    /// Rows `idx` as a new dataset with the same provenance.
    pub fn select(&self, idx: &[usize]) -> Dataset {
        let x = self.x.select(Axis(0), idx);
        let targets = match &self.targets {
            Targets::Binary { y, z } => Targets::Binary {
                y: idx.iter().map(|&i| y[i]).collect(),
                z: z.as_ref().map(|z| idx.iter().map(|&i| z[i]).collect()),
            },
            Targets::Multiclass { labels, classes } => {
                Targets::Multiclass { labels: idx.iter().map(|&i| labels[i]).collect(), classes: *classes }
            }
        };
        Dataset { x, targets, provenance: self.provenance }
    }

    /// Writes `d0..d{D-1},y,z`. For multiclass data `y` is the class index and
    /// `z` is empty.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (0..self.dim()).map(|j| format!("d{j}")).collect();
        header.push("y".into());
        header.push("z".into());
        wr.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.x.row(i).iter().map(|v| format!("{v:e}")).collect();
            match &self.targets {
                Targets::Binary { y, z } => {
                    rec.push(format!("{}", y[i] as i64));
                    rec.push(z.as_ref().map(|z| z[i].to_string()).unwrap_or_default());
                }
                Targets::Multiclass { labels, .. } => {
                    rec.push(labels[i].to_string());
                    rec.push(String::new());
                }
            }
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads the format of [`Dataset::write_csv`]. Labels are binary when
    /// every `y` is `±1`, multiclass otherwise.
    pub fn read_csv<R: Read>(r: R, provenance: Provenance) -> Result<Dataset> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        let ncols = headers.len();
        if ncols < 3 || &headers[ncols - 2] != "y" || &headers[ncols - 1] != "z" {
            return Err(Error::InvalidParameter("expected header d0..d{D-1},y,z".into()));
        }
        let d = ncols - 2;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut zs: Vec<Option<usize>> = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            for j in 0..d {
                xs.push(parse_f64(&rec[j])?);
            }
            ys.push(parse_f64(&rec[d])?);
            let z = rec[d + 1].trim();
            zs.push(if z.is_empty() {
                None
            } else {
                Some(z.parse().map_err(|_| Error::InvalidParameter(format!("bad z {z:?}")))?)
            });
        }
        let n = ys.len();
        let x = Array2::from_shape_vec((n, d), xs).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let binary = ys.iter().all(|&v| v == 1.0 || v == -1.0);
        let targets = if binary {
            let z = if zs.iter().all(|z| z.is_some()) { Some(zs.into_iter().flatten().collect()) } else { None };
            Targets::Binary { y: ys, z }
        } else {
            let labels: Vec<usize> = ys.iter().map(|&v| v as usize).collect();
            let classes = labels.iter().max().map_or(0, |m| m + 1);
            Targets::Multiclass { labels, classes }
        };
        Dataset::new(x, targets, provenance)
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::InvalidParameter(format!("bad number {s:?}")))
}
