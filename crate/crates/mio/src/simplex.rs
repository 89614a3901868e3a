//! Bounded-variable revised simplex.
//!
//! Rows are written as `a_i x - r_i = 0` with a logical variable `r_i` whose
//! bounds encode the row sense, so every variable is simply boxed. Phase 1
//! minimizes the sum of bound infeasibilities of the basic variables; phase 2
//! prices with the true costs. Entering variables follow Dantzig's rule with
//! lowest-index tie breaking, switching to Bland's rule after a run of
//! degenerate pivots. A dual simplex pass is used to reoptimize after bound
//! changes when the current basis is still dual feasible.

use crate::error::LpError;
use crate::factor::{Factor, Singular};
use crate::model::{MioModel, VarId};
use crate::sparse::CscMatrix;

const NONE: usize = usize::MAX;
const PIVOT_TOL: f64 = 1e-9;
const MIN_PIVOT: f64 = 1e-10;
const REFACTOR_EVERY: usize = 96;
const DEGENERATE_RUN: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Status {
    Basic,
    Lower,
    Upper,
    Free,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Basis statuses for every logical and structural variable.
pub(crate) type BasisSnapshot = Vec<Status>;

#[derive(Clone, Debug)]
pub(crate) struct Simplex {
    m: usize,
    n: usize,
    a: CscMatrix,
    row_scale: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    obj_constant: f64,
    x: Vec<f64>,
    status: Vec<Status>,
    head: Vec<usize>,
    pos: Vec<usize>,
    factor: Factor,
    xb_dirty: bool,
    feas_tol: f64,
    dual_tol: f64,
    pub iterations: usize,
}

impl Simplex {
    /// Builds the engine with binaries relaxed to their `[0, 1]` box.
    pub fn new(model: &MioModel) -> Self {
        let m = model.num_constraints();
        let n = model.num_vars();
        let mut row_scale = vec![1.0; m];
        for (i, c) in model.constraints().iter().enumerate() {
            let amax = c.coefficients.iter().fold(0.0f64, |acc, &(_, v)| acc.max(v.abs()));
            if amax > 0.0 {
                row_scale[i] = 1.0 / amax;
            }
        }
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, c) in model.constraints().iter().enumerate() {
            for &(v, val) in &c.coefficients {
                cols[v.0].push((i, val * row_scale[i]));
            }
        }
        let a = CscMatrix::from_columns(m, cols);
        let mut lo = Vec::with_capacity(m + n);
        let mut hi = Vec::with_capacity(m + n);
        for (i, c) in model.constraints().iter().enumerate() {
            let (l, h) = c.sense.activity_bounds(c.rhs);
            lo.push(l * row_scale[i]);
            hi.push(h * row_scale[i]);
        }
        for v in model.variables() {
            lo.push(v.lower);
            hi.push(v.upper);
        }
        let mut cost = vec![0.0; m + n];
        for &(v, c) in &model.objective().terms {
            cost[m + v.0] += c;
        }
        let mut s = Self {
            m,
            n,
            a,
            row_scale,
            lo,
            hi,
            cost,
            obj_constant: model.objective().constant,
            x: vec![0.0; m + n],
            status: vec![Status::Lower; m + n],
            head: (0..m).collect(),
            pos: vec![NONE; m + n],
            factor: Factor::default(),
            xb_dirty: true,
            feas_tol: 1e-9,
            dual_tol: 1e-9,
            iterations: 0,
        };
        for i in 0..m {
            s.status[i] = Status::Basic;
            s.pos[i] = i;
        }
        for j in m..m + n {
            s.status[j] = s.default_nonbasic(j);
            s.x[j] = s.nonbasic_value(j);
        }
        s.factor
            .refactor(m, &s.head, &s.a)
            .expect("slack basis is always nonsingular");
        s
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    pub fn num_structurals(&self) -> usize {
        self.n
    }

    fn default_nonbasic(&self, j: usize) -> Status {
        let (l, h) = (self.lo[j], self.hi[j]);
        if l.is_finite() {
            if h.is_finite() && h.abs() < l.abs() {
                Status::Upper
            } else {
                Status::Lower
            }
        } else if h.is_finite() {
            Status::Upper
        } else {
            Status::Free
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            Status::Lower => self.lo[j],
            Status::Upper => self.hi[j],
            Status::Free => 0.0,
            Status::Basic => self.x[j],
        }
    }

    /// Keeps a nonbasic status consistent with (possibly new) finite bounds.
    fn normalize_nonbasic(&mut self, j: usize) {
        let st = match self.status[j] {
            Status::Basic => return,
            Status::Lower if self.lo[j].is_finite() => Status::Lower,
            Status::Upper if self.hi[j].is_finite() => Status::Upper,
            _ => self.default_nonbasic(j),
        };
        self.status[j] = st;
        self.x[j] = self.nonbasic_value(j);
    }

    /// Changes the bounds of structural `var`; takes effect on the next solve.
    pub fn set_var_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        let j = self.m + var;
        self.lo[j] = lower;
        self.hi[j] = upper;
        if self.status[j] != Status::Basic {
            self.normalize_nonbasic(j);
        }
        self.xb_dirty = true;
    }

    pub fn var_bounds(&self, var: usize) -> (f64, f64) {
        (self.lo[self.m + var], self.hi[self.m + var])
    }

    pub fn set_costs(&mut self, terms: &[(VarId, f64)], constant: f64) {
        for c in &mut self.cost[self.m..] {
            *c = 0.0;
        }
        for &(v, c) in terms {
            self.cost[self.m + v.0] += c;
        }
        self.obj_constant = constant;
    }

    /// Appends a structural column; returns its structural index. The new
    /// variable starts nonbasic so the current basis stays valid.
    pub fn add_column(&mut self, entries: &[(usize, f64)], lower: f64, upper: f64, cost: f64) -> usize {
        let scaled: Vec<(usize, f64)> = entries
            .iter()
            .map(|&(i, v)| (i, v * self.row_scale[i]))
            .collect();
        self.a.push_col(scaled);
        self.lo.push(lower);
        self.hi.push(upper);
        self.cost.push(cost);
        self.x.push(0.0);
        self.status.push(Status::Lower);
        self.pos.push(NONE);
        let j = self.m + self.n;
        self.n += 1;
        self.status[j] = self.default_nonbasic(j);
        self.x[j] = self.nonbasic_value(j);
        self.xb_dirty = true;
        self.n - 1
    }

    pub fn snapshot(&self) -> BasisSnapshot {
        self.status.clone()
    }

    pub fn restore(&mut self, snap: &BasisSnapshot) -> Result<(), LpError> {
        debug_assert_eq!(snap.len(), self.m + self.n);
        self.status.clone_from(snap);
        self.head = (0..self.m + self.n)
            .filter(|&j| self.status[j] == Status::Basic)
            .collect();
        if self.head.len() != self.m {
            return Err(LpError::NumericalFailure(
                "basis snapshot has the wrong number of basic variables".into(),
            ));
        }
        self.pos.iter_mut().for_each(|p| *p = NONE);
        for (p, &j) in self.head.iter().enumerate() {
            self.pos[j] = p;
        }
        for j in 0..self.m + self.n {
            if self.status[j] != Status::Basic {
                self.normalize_nonbasic(j);
            }
        }
        self.refactor()?;
        self.recompute_xb();
        Ok(())
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        for _ in 0..=self.m {
            match self.factor.refactor(self.m, &self.head, &self.a) {
                Ok(()) => {
                    self.xb_dirty = true;
                    return Ok(());
                }
                Err(Singular { positions, free_rows }) => {
                    // Swap dependent structurals for logicals of unpivoted rows.
                    for (p, row) in positions.into_iter().zip(free_rows) {
                        let out = self.head[p];
                        self.pos[out] = NONE;
                        self.status[out] = Status::Lower;
                        self.normalize_nonbasic(out);
                        self.head[p] = row;
                        self.pos[row] = p;
                        self.status[row] = Status::Basic;
                    }
                }
            }
        }
        Err(LpError::NumericalFailure("basis repair did not converge".into()))
    }

    fn recompute_xb(&mut self) {
        let mut v = vec![0.0; self.m];
        for i in 0..self.m {
            if self.status[i] != Status::Basic {
                v[i] += self.x[i];
            }
        }
        for j in 0..self.n {
            let jj = self.m + j;
            if self.status[jj] != Status::Basic {
                let xj = self.x[jj];
                if xj != 0.0 {
                    for (i, a) in self.a.col(j) {
                        v[i] -= a * xj;
                    }
                }
            }
        }
        let xb = self.factor.ftran(&v, &self.a);
        for (p, &j) in self.head.iter().enumerate() {
            self.x[j] = xb[p];
        }
        self.xb_dirty = false;
    }

    fn column(&self, j: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.m];
        if j < self.m {
            c[j] = -1.0;
        } else {
            for (i, v) in self.a.col(j - self.m) {
                c[i] = v;
            }
        }
        c
    }

    #[inline]
    fn col_dot(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.m {
            -y[j]
        } else {
            self.a.col_dot(j - self.m, y)
        }
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.lo[j] == self.hi[j]
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let x = self.x[j];
        (self.lo[j] - x).max(x - self.hi[j]).max(0.0)
    }

    fn max_basic_infeasibility(&self) -> f64 {
        self.head.iter().map(|&j| self.infeasibility(j)).fold(0.0, f64::max)
    }

    fn iteration_cap(&self) -> usize {
        50 * (self.m + self.n) + 20_000
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64], leave_at_upper: bool) {
        let l = self.head[r];
        self.x[l] = if leave_at_upper { self.hi[l] } else { self.lo[l] };
        self.status[l] = if leave_at_upper && !self.is_fixed(l) {
            Status::Upper
        } else {
            Status::Lower
        };
        if !self.x[l].is_finite() {
            self.status[l] = Status::Free;
            self.x[l] = 0.0;
        }
        self.pos[l] = NONE;
        self.head[r] = q;
        self.pos[q] = r;
        self.status[q] = Status::Basic;
        self.factor.push_eta(r, alpha);
    }

    fn maybe_refactor(&mut self) -> Result<(), LpError> {
        if self.factor.num_etas() >= REFACTOR_EVERY || self.factor.eta_nnz() > 40 * self.m + 1000 {
            self.refactor()?;
            self.recompute_xb();
        } else if self.xb_dirty {
            self.recompute_xb();
        }
        Ok(())
    }

    /// Primal simplex from the current basis.
    pub fn primal(&mut self) -> Result<Outcome, LpError> {
        let m = self.m;
        let total = self.m + self.n;
        let cap = self.iteration_cap();
        let mut ptol = self.feas_tol;
        let mut degenerate = 0usize;
        let mut bland = false;
        let mut verified = false;
        let mut small_pivots = 0usize;
        let mut steps = 0usize;
        loop {
            steps += 1;
            if steps > cap {
                return Err(LpError::IterationLimit(cap));
            }
            self.maybe_refactor()?;

            let mut cb = vec![0.0; m];
            let mut phase1 = false;
            for (p, &j) in self.head.iter().enumerate() {
                let x = self.x[j];
                if x < self.lo[j] - ptol {
                    cb[p] = -1.0;
                    phase1 = true;
                } else if x > self.hi[j] + ptol {
                    cb[p] = 1.0;
                    phase1 = true;
                }
            }
            if !phase1 {
                for (p, &j) in self.head.iter().enumerate() {
                    cb[p] = self.cost[j];
                }
            }
            let pi = self.factor.btran(&cb, &self.a);

            let mut enter = NONE;
            let mut enter_d = 0.0;
            let mut best = 0.0;
            for j in 0..total {
                let st = self.status[j];
                if st == Status::Basic || self.is_fixed(j) {
                    continue;
                }
                let c = if phase1 { 0.0 } else { self.cost[j] };
                let d = c - self.col_dot(j, &pi);
                let eligible = match st {
                    Status::Lower => d < -self.dual_tol,
                    Status::Upper => d > self.dual_tol,
                    Status::Free => d.abs() > self.dual_tol,
                    Status::Basic => false,
                };
                if !eligible {
                    continue;
                }
                if bland {
                    enter = j;
                    enter_d = d;
                    break;
                }
                if d.abs() > best {
                    best = d.abs();
                    enter = j;
                    enter_d = d;
                }
            }

            if enter == NONE {
                if !verified {
                    self.refactor()?;
                    self.recompute_xb();
                    verified = true;
                    continue;
                }
                if phase1 {
                    let inf = self.max_basic_infeasibility();
                    if inf <= 1e-7 && ptol < inf {
                        ptol = inf * 1.01;
                        continue;
                    }
                    return Ok(Outcome::Infeasible);
                }
                return Ok(Outcome::Optimal);
            }
            verified = false;

            let q = enter;
            let s = if enter_d < 0.0 { 1.0 } else { -1.0 };
            let alpha = self.factor.ftran(&self.column(q), &self.a);
            let t_flip = if self.lo[q].is_finite() && self.hi[q].is_finite() {
                self.hi[q] - self.lo[q]
            } else {
                f64::INFINITY
            };

            // Harris pass 1: relaxed ratios.
            let mut t1 = f64::INFINITY;
            for p in 0..m {
                let ap = alpha[p];
                if ap.abs() <= PIVOT_TOL {
                    continue;
                }
                if let Some((relaxed, _, _)) = self.ratio(p, -s * ap, phase1, ptol) {
                    t1 = t1.min(relaxed);
                }
            }
            // Pass 2: largest pivot among ratios within the relaxed bound.
            let mut leave = NONE;
            let mut leave_t = 0.0;
            let mut leave_upper = false;
            let mut leave_mag = 0.0;
            if t1.is_finite() {
                for p in 0..m {
                    let ap = alpha[p];
                    if ap.abs() <= PIVOT_TOL {
                        continue;
                    }
                    if let Some((_, exact, upper)) = self.ratio(p, -s * ap, phase1, ptol) {
                        if exact > t1 {
                            continue;
                        }
                        let better = if leave == NONE {
                            true
                        } else if bland {
                            self.head[p] < self.head[leave]
                        } else {
                            ap.abs() > leave_mag
                                || (ap.abs() == leave_mag && self.head[p] < self.head[leave])
                        };
                        if better {
                            leave = p;
                            leave_t = exact.max(0.0);
                            leave_upper = upper;
                            leave_mag = ap.abs();
                        }
                    }
                }
            }

            if t_flip.is_finite() && (leave == NONE || t_flip <= leave_t) {
                // Bound flip: entering variable crosses its box, basis unchanged.
                let t = t_flip;
                for p in 0..m {
                    let j = self.head[p];
                    self.x[j] -= s * alpha[p] * t;
                }
                self.status[q] = if s > 0.0 { Status::Upper } else { Status::Lower };
                self.x[q] = self.nonbasic_value(q);
                self.iterations += 1;
                degenerate = 0;
                bland = false;
                continue;
            }
            if leave == NONE {
                if phase1 {
                    return Err(LpError::NumericalFailure("unbounded ray in phase 1".into()));
                }
                return Ok(Outcome::Unbounded);
            }
            if alpha[leave].abs() < MIN_PIVOT {
                small_pivots += 1;
                if small_pivots > 3 {
                    return Err(LpError::NumericalFailure(format!(
                        "pivot magnitude {:.3e} below threshold after refactorization",
                        alpha[leave].abs()
                    )));
                }
                self.refactor()?;
                self.recompute_xb();
                continue;
            }
            small_pivots = 0;

            let t = leave_t;
            for p in 0..m {
                let j = self.head[p];
                self.x[j] -= s * alpha[p] * t;
            }
            self.x[q] += s * t;
            self.pivot(leave, q, &alpha, leave_upper);
            self.iterations += 1;
            if t <= 1e-12 {
                degenerate += 1;
                if degenerate > DEGENERATE_RUN {
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = false;
            }
        }
    }

    /// Ratio for basic position `p` moving at rate `delta` per unit step.
    /// Returns (relaxed ratio, exact ratio, leaves at upper bound).
    fn ratio(&self, p: usize, delta: f64, phase1: bool, ptol: f64) -> Option<(f64, f64, bool)> {
        let j = self.head[p];
        let x = self.x[j];
        let (lo, hi) = (self.lo[j], self.hi[j]);
        if delta < 0.0 {
            let rate = -delta;
            if phase1 && x > hi + ptol {
                Some(((x - hi + ptol) / rate, (x - hi) / rate, true))
            } else if x >= lo - ptol && lo.is_finite() {
                Some(((x - lo + ptol) / rate, (x - lo) / rate, false))
            } else {
                None
            }
        } else {
            let rate = delta;
            if phase1 && x < lo - ptol {
                Some(((lo - x + ptol) / rate, (lo - x) / rate, false))
            } else if x <= hi + ptol && hi.is_finite() {
                Some(((hi - x + ptol) / rate, (hi - x) / rate, true))
            } else {
                None
            }
        }
    }

    fn reduced_costs(&self) -> Vec<f64> {
        let cb: Vec<f64> = self.head.iter().map(|&j| self.cost[j]).collect();
        let pi = self.factor.btran(&cb, &self.a);
        (0..self.m + self.n)
            .map(|j| {
                if self.status[j] == Status::Basic {
                    0.0
                } else {
                    self.cost[j] - self.col_dot(j, &pi)
                }
            })
            .collect()
    }

    fn is_dual_feasible(&self, d: &[f64]) -> bool {
        (0..self.m + self.n).all(|j| {
            if self.is_fixed(j) {
                return true;
            }
            match self.status[j] {
                Status::Basic => true,
                Status::Lower => d[j] >= -self.dual_tol,
                Status::Upper => d[j] <= self.dual_tol,
                Status::Free => d[j].abs() <= self.dual_tol,
            }
        })
    }

    /// Dual simplex; `None` means the caller should continue with the primal.
    fn dual(&mut self) -> Result<Option<Outcome>, LpError> {
        let m = self.m;
        let total = self.m + self.n;
        let cap = self.iteration_cap();
        let ptol = self.feas_tol;
        let mut steps = 0usize;
        // The dual objective never decreases; a long run without progress
        // (always the case under a zero objective) is handed to the primal.
        let window = m + 50;
        let mut best_obj = f64::NEG_INFINITY;
        let mut last_progress = 0usize;
        loop {
            steps += 1;
            if steps > cap || steps - last_progress > window {
                return Ok(None);
            }
            self.maybe_refactor()?;
            let obj = self.objective_value();
            if obj > best_obj + 1e-9 * (1.0 + obj.abs()) {
                best_obj = obj;
                last_progress = steps;
            }
            let mut r = NONE;
            let mut worst = ptol;
            for (p, &j) in self.head.iter().enumerate() {
                let inf = self.infeasibility(j);
                if inf > worst || (inf == worst && r != NONE && inf > ptol && j < self.head[r]) {
                    worst = inf;
                    r = p;
                }
            }
            if r == NONE {
                return Ok(Some(Outcome::Optimal));
            }
            let l = self.head[r];
            let increase = self.x[l] < self.lo[l];
            let cb: Vec<f64> = self.head.iter().map(|&j| self.cost[j]).collect();
            let pi = self.factor.btran(&cb, &self.a);
            let mut er = vec![0.0; m];
            er[r] = 1.0;
            let rho = self.factor.btran(&er, &self.a);

            let mut cands: Vec<(usize, f64, f64)> = Vec::new();
            let mut t1 = f64::INFINITY;
            for j in 0..total {
                let st = self.status[j];
                if st == Status::Basic || self.is_fixed(j) {
                    continue;
                }
                let arj = self.col_dot(j, &rho);
                if arj.abs() <= PIVOT_TOL {
                    continue;
                }
                // x_l changes by -arj * dx_j.
                let ok = match st {
                    Status::Lower => (if increase { -arj } else { arj }) > 0.0,
                    Status::Upper => (if increase { arj } else { -arj }) > 0.0,
                    Status::Free => true,
                    Status::Basic => false,
                };
                if !ok {
                    continue;
                }
                let d = self.cost[j] - self.col_dot(j, &pi);
                let dabs = match st {
                    Status::Lower => d.max(0.0),
                    Status::Upper => (-d).max(0.0),
                    _ => d.abs(),
                };
                t1 = t1.min((dabs + self.dual_tol) / arj.abs());
                cands.push((j, dabs / arj.abs(), arj.abs()));
            }
            if cands.is_empty() {
                return Ok(Some(Outcome::Infeasible));
            }
            let mut q = NONE;
            let mut qmag = 0.0;
            for &(j, ratio, mag) in &cands {
                if ratio <= t1 && mag > qmag {
                    q = j;
                    qmag = mag;
                }
            }
            let alpha = self.factor.ftran(&self.column(q), &self.a);
            if alpha[r].abs() < MIN_PIVOT {
                return Ok(None);
            }
            let target = if increase { self.lo[l] } else { self.hi[l] };
            let theta = (self.x[l] - target) / alpha[r];
            for p in 0..m {
                let j = self.head[p];
                self.x[j] -= alpha[p] * theta;
            }
            self.x[q] += theta;
            self.pivot(r, q, &alpha, !increase);
            self.iterations += 1;
        }
    }

    /// Solves from the current basis, preferring the dual simplex when the
    /// basis is dual feasible (typical after bound tightening).
    pub fn solve(&mut self) -> Result<Outcome, LpError> {
        if self.xb_dirty {
            self.recompute_xb();
        }
        if self.max_basic_infeasibility() > self.feas_tol {
            let d = self.reduced_costs();
            if self.is_dual_feasible(&d) {
                if let Some(Outcome::Infeasible) = self.dual()? {
                    // Marginal infeasibilities are confirmed by the primal phase 1.
                    if self.max_basic_infeasibility() > 1e-6 {
                        return Ok(Outcome::Infeasible);
                    }
                }
            }
        }
        self.primal()
    }

    pub fn structural_values(&self) -> Vec<f64> {
        self.x[self.m..].to_vec()
    }

    pub fn objective_value(&self) -> f64 {
        self.obj_constant
            + (0..self.n)
                .map(|j| self.cost[self.m + j] * self.x[self.m + j])
                .sum::<f64>()
    }

    /// Row duals in the original (unscaled) row units.
    pub fn row_duals(&self) -> Vec<f64> {
        let cb: Vec<f64> = self.head.iter().map(|&j| self.cost[j]).collect();
        let pi = self.factor.btran(&cb, &self.a);
        pi.iter().zip(&self.row_scale).map(|(p, s)| p * s).collect()
    }

    pub fn structural_reduced_costs(&self) -> Vec<f64> {
        let d = self.reduced_costs();
        d[self.m..].to_vec()
    }
}
