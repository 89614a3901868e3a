//! Tabular datasets of observed decisions, contexts and outcomes.
//!
//! On disk a dataset is a CSV file with a header row plus a JSON manifest
//! that declares the role of each column:
//!
//! ```json
//! { "x": ["dose_a", "dose_b"], "w": ["age"], "y": ["toxicity"] }
//! ```
//!
//! Columns not named in the manifest are ignored.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model_ir::FeatureSpace;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("column `{0}` not found")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: {message}")]
    BadValue {
        row: usize,
        column: String,
        message: String,
    },
    #[error("unknown outcome `{0}`")]
    UnknownOutcome(String),
    #[error("dataset needs at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("ragged data: {0}")]
    Ragged(String),
}

/// Column roles of a dataset file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub x: Vec<String>,
    #[serde(default)]
    pub w: Vec<String>,
    pub y: Vec<String>,
}

/// `N` observations of decisions `x`, contexts `w` and named outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x_names: Vec<String>,
    pub w_names: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub outcomes: Vec<(String, Vec<f64>)>,
}

impl Dataset {
    pub fn new(
        x_names: Vec<String>,
        w_names: Vec<String>,
        x: Vec<Vec<f64>>,
        w: Vec<Vec<f64>>,
        outcomes: Vec<(String, Vec<f64>)>,
    ) -> Result<Self, DataError> {
        let n_rows = x.len();
        let w = if w.is_empty() && w_names.is_empty() {
            vec![Vec::new(); n_rows]
        } else {
            w
        };
        if w.len() != n_rows {
            return Err(DataError::Ragged(format!("{} x rows but {} w rows", n_rows, w.len())));
        }
        if let Some(i) = x.iter().position(|r| r.len() != x_names.len()) {
            return Err(DataError::Ragged(format!("x row {i} has {} entries", x[i].len())));
        }
        if let Some(i) = w.iter().position(|r| r.len() != w_names.len()) {
            return Err(DataError::Ragged(format!("w row {i} has {} entries", w[i].len())));
        }
        for (name, y) in &outcomes {
            if y.len() != n_rows {
                return Err(DataError::Ragged(format!("outcome `{name}` has {} values", y.len())));
            }
        }
        let all = x.iter().chain(&w).flatten().chain(outcomes.iter().flat_map(|(_, y)| y));
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(DataError::Ragged("non-finite value".into()));
        }
        Ok(Self {
            x_names,
            w_names,
            x,
            w,
            outcomes,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn n(&self) -> usize {
        self.x_names.len()
    }

    pub fn p(&self) -> usize {
        self.w_names.len()
    }

    /// Joint row `(x_i, w_i)`.
    pub fn joint(&self, i: usize) -> Vec<f64> {
        self.x[i].iter().chain(&self.w[i]).copied().collect()
    }

    pub fn joint_rows(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.joint(i)).collect()
    }

    pub fn outcome(&self, name: &str) -> Result<&[f64], DataError> {
        self.outcomes
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, y)| y.as_slice())
            .ok_or_else(|| DataError::UnknownOutcome(name.to_string()))
    }

    pub fn outcome_names(&self) -> impl Iterator<Item = &str> {
        self.outcomes.iter().map(|(n, _)| n.as_str())
    }

    /// Replaces (or adds) an outcome column.
    pub fn with_outcome(mut self, name: &str, values: Vec<f64>) -> Result<Self, DataError> {
        if values.len() != self.len() {
            return Err(DataError::Ragged(format!("outcome `{name}` has {} values", values.len())));
        }
        match self.outcomes.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = values,
            None => self.outcomes.push((name.to_string(), values)),
        }
        Ok(self)
    }

    /// Feature names with box bounds taken from the observed min and max.
    pub fn feature_space(&self) -> FeatureSpace {
        let bounds = |rows: &[Vec<f64>], k: usize| -> Vec<(f64, f64)> {
            (0..k)
                .map(|j| {
                    rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                        (lo.min(r[j]), hi.max(r[j]))
                    })
                })
                .map(|(lo, hi)| if lo > hi { (0.0, 0.0) } else { (lo, hi) })
                .collect()
        };
        FeatureSpace {
            x_names: self.x_names.clone(),
            w_names: self.w_names.clone(),
            x_bounds: bounds(&self.x, self.n()),
            w_bounds: bounds(&self.w, self.p()),
        }
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            x_names: self.x_names.clone(),
            w_names: self.w_names.clone(),
            x: indices.iter().map(|&i| self.x[i].clone()).collect(),
            w: indices.iter().map(|&i| self.w[i].clone()).collect(),
            outcomes: self
                .outcomes
                .iter()
                .map(|(n, y)| (n.clone(), indices.iter().map(|&i| y[i]).collect()))
                .collect(),
        }
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            x: self.x_names.clone(),
            w: self.w_names.clone(),
            y: self.outcomes.iter().map(|(n, _)| n.clone()).collect(),
        }
    }

    /// Loads a dataset from a CSV file and its manifest.
    pub fn load(csv_path: &Path, manifest_path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(manifest_path).map_err(|source| DataError::Io {
            path: manifest_path.display().to_string(),
            source,
        })?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| DataError::Manifest(e.to_string()))?;
        let file = std::fs::File::open(csv_path).map_err(|source| DataError::Io {
            path: csv_path.display().to_string(),
            source,
        })?;
        Self::from_reader(file, &manifest)
    }

    pub fn from_reader<R: std::io::Read>(reader: R, manifest: &Manifest) -> Result<Self, DataError> {
        if manifest.x.is_empty() {
            return Err(DataError::Manifest("at least one x column is required".into()));
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
        let locate = |names: &[String]| -> Result<Vec<usize>, DataError> {
            names
                .iter()
                .map(|n| index.get(n.as_str()).copied().ok_or_else(|| DataError::MissingColumn(n.clone())))
                .collect()
        };
        let (xi, wi, yi) = (locate(&manifest.x)?, locate(&manifest.w)?, locate(&manifest.y)?);
        let mut x = Vec::new();
        let mut w = Vec::new();
        let mut ys = vec![Vec::new(); yi.len()];
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let get = |col: usize| -> Result<f64, DataError> {
                let raw = rec.get(col).unwrap_or("");
                let v: f64 = raw.parse().map_err(|_| DataError::BadValue {
                    row: row + 1,
                    column: headers[col].to_string(),
                    message: format!("`{raw}` is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(DataError::BadValue {
                        row: row + 1,
                        column: headers[col].to_string(),
                        message: "value is not finite".into(),
                    });
                }
                Ok(v)
            };
            x.push(xi.iter().map(|&c| get(c)).collect::<Result<Vec<_>, _>>()?);
            w.push(wi.iter().map(|&c| get(c)).collect::<Result<Vec<_>, _>>()?);
            for (k, &c) in yi.iter().enumerate() {
                ys[k].push(get(c)?);
            }
        }
        if x.len() < 2 {
            return Err(DataError::TooFewRows { needed: 2, got: x.len() });
        }
        Self::new(
            manifest.x.clone(),
            manifest.w.clone(),
            x,
            w,
            manifest.y.iter().cloned().zip(ys).collect(),
        )
    }

    /// Writes the CSV (columns in x, w, y order) and returns its manifest.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<Manifest, DataError> {
        let mut wtr = csv::Writer::from_writer(writer);
        let header: Vec<&str> = self
            .x_names
            .iter()
            .chain(&self.w_names)
            .map(String::as_str)
            .chain(self.outcome_names())
            .collect();
        wtr.write_record(&header)?;
        for i in 0..self.len() {
            let rec: Vec<String> = self.x[i]
                .iter()
                .chain(&self.w[i])
                .copied()
                .chain(self.outcomes.iter().map(|(_, y)| y[i]))
                .map(|v| v.to_string())
                .collect();
            wtr.write_record(&rec)?;
        }
        wtr.flush().map_err(|source| DataError::Io {
            path: "<csv writer>".into(),
            source,
        })?;
        Ok(self.manifest())
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<(), DataError> {
        let io = |path: &Path| {
            let p = path.display().to_string();
            move |source| DataError::Io { path: p, source }
        };
        let csv_path = dir.join(format!("{stem}.csv"));
        let file = std::fs::File::create(&csv_path).map_err(io(&csv_path))?;
        let manifest = self.write_csv(std::io::BufWriter::new(file))?;
        let man_path = dir.join(format!("{stem}.json"));
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(&man_path, text).map_err(io(&man_path))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_with_unused_columns() {
        let text = "id,a,b,ctx,y\n1,0.5,2,1,3.25\n2,1.5,-1,0,0.1\n";
        let man = Manifest {
            x: vec!["b".into(), "a".into()],
            w: vec!["ctx".into()],
            y: vec!["y".into()],
        };
        let d = Dataset::from_reader(text.as_bytes(), &man).unwrap();
        assert_eq!(d.x, vec![vec![2.0, 0.5], vec![-1.0, 1.5]]);
        assert_eq!(d.joint(0), vec![2.0, 0.5, 1.0]);
        assert_eq!(d.feature_space().x_bounds, vec![(-1.0, 2.0), (0.5, 1.5)]);
        let mut buf = Vec::new();
        let man2 = d.write_csv(&mut buf).unwrap();
        let back = Dataset::from_reader(buf.as_slice(), &man2).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn bad_number_reports_row_and_column() {
        let man = Manifest {
            x: vec!["a".into()],
            w: vec![],
            y: vec!["y".into()],
        };
        let err = Dataset::from_reader("a,y\n1,2\nfoo,3\n".as_bytes(), &man).unwrap_err();
        assert!(matches!(err, DataError::BadValue { row: 2, ref column, .. } if column == "a"));
    }

    #[test]
    fn missing_column() {
        let man = Manifest {
            x: vec!["zz".into()],
            w: vec![],
            y: vec![],
        };
        let err = Dataset::from_reader("a\n1\n2\n".as_bytes(), &man).unwrap_err();
        assert!(matches!(err, DataError::MissingColumn(c) if c == "zz"));
    }
}
