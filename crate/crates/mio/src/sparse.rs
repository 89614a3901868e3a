/// Compressed sparse column storage, append-only by column.
#[derive(Clone, Debug, Default)]
pub(crate) struct CscMatrix {
    nrows: usize,
    start: Vec<usize>,
    rows: Vec<usize>,
    vals: Vec<f64>,
}

impl CscMatrix {
    pub fn new(nrows: usize) -> Self {
        Self {
            nrows,
            start: vec![0],
            rows: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn from_columns(nrows: usize, cols: Vec<Vec<(usize, f64)>>) -> Self {
        let mut m = Self::new(nrows);
        for c in cols {
            m.push_col(c);
        }
        m
    }

    pub fn push_col(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) {
        for (i, v) in entries {
            debug_assert!(i < self.nrows);
            if v != 0.0 {
                self.rows.push(i);
                self.vals.push(v);
            }
        }
        self.start.push(self.rows.len());
    }

    #[inline]
    pub fn col(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.start[j], self.start[j + 1]);
        self.rows[s..e].iter().copied().zip(self.vals[s..e].iter().copied())
    }

    #[inline]
    pub fn col_dot(&self, j: usize, y: &[f64]) -> f64 {
        let (s, e) = (self.start[j], self.start[j + 1]);
        let mut acc = 0.0;
        for k in s..e {
            acc += self.vals[k] * y[self.rows[k]];
        }
        acc
    }
}
