//! Random instance generators and an independent brute-force oracle.
#![allow(dead_code)]

use conlearn_mio::{MioModel, Sense, VarId, VarKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub model: MioModel,
    pub binaries: Vec<usize>,
    pub continuous: Vec<usize>,
}

/// Mixed-binary instance with boxed continuous variables.
pub fn random_mixed(seed: u64, max_bin: usize, max_cont: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nb = rng.gen_range(1..=max_bin);
    let nc = rng.gen_range(1..=max_cont);
    let rows = rng.gen_range(1..=4);
    let mut m = MioModel::new();
    let mut vars = Vec::new();
    let mut binaries = Vec::new();
    let mut continuous = Vec::new();
    // Interleave kinds so ids are not grouped.
    let mut kinds: Vec<VarKind> = (0..nb)
        .map(|_| VarKind::Binary)
        .chain((0..nc).map(|_| VarKind::Continuous))
        .collect();
    for i in (1..kinds.len()).rev() {
        let j = rng.gen_range(0..=i);
        kinds.swap(i, j);
    }
    for (i, k) in kinds.iter().enumerate() {
        let id = match k {
            VarKind::Binary => {
                binaries.push(i);
                m.add_binary(format!("b{i}"))
            }
            VarKind::Continuous => {
                continuous.push(i);
                let lo = rng.gen_range(-3.0..1.0f64).round();
                let hi = lo + rng.gen_range(1.0..5.0f64).round();
                m.add_continuous(lo, hi, format!("c{i}"))
            }
        };
        vars.push(id);
    }
    for r in 0..rows {
        let mut coeffs: Vec<(VarId, f64)> = Vec::new();
        for &v in &vars {
            if rng.gen_bool(0.7) {
                coeffs.push((v, (rng.gen_range(-5.0..5.0f64) * 4.0).round() / 4.0));
            }
        }
        let sense = match rng.gen_range(0..10) {
            0 => Sense::Eq,
            1..=5 => Sense::Le,
            _ => Sense::Ge,
        };
        let rhs = (rng.gen_range(-4.0..6.0f64) * 2.0).round() / 2.0;
        m.add_constraint(coeffs, sense, rhs, format!("r{r}"));
    }
    let obj: Vec<(VarId, f64)> = vars
        .iter()
        .map(|&v| (v, (rng.gen_range(-4.0..4.0f64) * 8.0).round() / 8.0))
        .collect();
    m.set_objective(obj, 0.0);
    Instance {
        model: m,
        binaries,
        continuous,
    }
}

/// Solves `A z = b` for square `A` by Gaussian elimination; None if singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Minimum objective by enumerating binary assignments and, for each, every
/// vertex of the continuous polytope (each variable at a bound or free, free
/// ones pinned by an equal number of tight rows). Returns None if infeasible.
pub fn brute_force(inst: &Instance) -> Option<f64> {
    let m = &inst.model;
    let nb = inst.binaries.len();
    let nc = inst.continuous.len();
    let rows = m.constraints();
    let obj = m.objective();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << nb) {
        let mut x = vec![0.0; m.num_vars()];
        for (k, &j) in inst.binaries.iter().enumerate() {
            x[j] = ((mask >> k) & 1) as f64;
        }
        let mut state = vec![0usize; nc];
        loop {
            // state: 0 at lower, 1 at upper, 2 free.
            let free: Vec<usize> = (0..nc).filter(|&k| state[k] == 2).collect();
            for (k, &j) in inst.continuous.iter().enumerate() {
                let v = m.variable(VarId(j));
                match state[k] {
                    0 => x[j] = v.lower,
                    1 => x[j] = v.upper,
                    _ => {}
                }
            }
            for subset in combinations(rows.len(), free.len()) {
                let mut a = vec![vec![0.0; free.len()]; free.len()];
                let mut b = vec![0.0; free.len()];
                for (r, &ri) in subset.iter().enumerate() {
                    let row = &rows[ri];
                    b[r] = row.rhs;
                    for &(v, coef) in &row.coefficients {
                        match free.iter().position(|&k| inst.continuous[k] == v.0) {
                            Some(fk) => a[r][fk] = coef,
                            None => b[r] -= coef * x[v.0],
                        }
                    }
                }
                let Some(z) = solve_square(a, b) else { continue };
                let mut y = x.clone();
                for (fk, &k) in free.iter().enumerate() {
                    y[inst.continuous[k]] = z[fk];
                }
                if m.max_violation(&y) <= 1e-9 {
                    let val = obj.evaluate(&y);
                    if best.map_or(true, |b| val < b) {
                        best = Some(val);
                    }
                }
            }
            // Next state in base 3.
            let mut k = 0;
            while k < nc {
                state[k] += 1;
                if state[k] < 3 {
                    break;
                }
                state[k] = 0;
                k += 1;
            }
            if k == nc {
                break;
            }
        }
    }
    best
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Random feasible LP with boxed variables: a random interior point is made
/// to satisfy every row.
pub fn random_lp(seed: u64) -> MioModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=12);
    let rows = rng.gen_range(1..=10);
    let mut m = MioModel::new();
    let mut point = Vec::new();
    let vars: Vec<VarId> = (0..n)
        .map(|i| {
            let lo = rng.gen_range(-10.0..0.0);
            let hi = lo + rng.gen_range(0.5..20.0);
            let (lo, hi) = match rng.gen_range(0..6) {
                0 => (f64::NEG_INFINITY, hi),
                1 => (lo, f64::INFINITY),
                _ => (lo, hi),
            };
            let p = if lo.is_finite() && hi.is_finite() {
                rng.gen_range(lo..hi)
            } else if lo.is_finite() {
                lo + rng.gen_range(0.0..5.0)
            } else {
                hi - rng.gen_range(0.0..5.0)
            };
            point.push(p);
            m.add_continuous(lo, hi, format!("x{i}"))
        })
        .collect();
    let mut c_dir = Vec::new();
    for r in 0..rows {
        let mut coeffs: Vec<(VarId, f64)> = Vec::new();
        for &v in &vars {
            if rng.gen_bool(0.6) {
                coeffs.push((v, rng.gen_range(-3.0..3.0)));
            }
        }
        let act: f64 = coeffs.iter().map(|(v, a)| a * point[v.0]).sum();
        let (sense, rhs) = match rng.gen_range(0..7) {
            0 => (Sense::Eq, act),
            1..=3 => (Sense::Le, act + rng.gen_range(0.0..4.0)),
            _ => (Sense::Ge, act - rng.gen_range(0.0..4.0)),
        };
        c_dir.push(coeffs.clone());
        m.add_constraint(coeffs, sense, rhs, format!("r{r}"));
    }
    let obj: Vec<(VarId, f64)> = vars.iter().map(|&v| (v, rng.gen_range(-2.0..2.0))).collect();
    m.set_objective(obj, rng.gen_range(-1.0..1.0));
    m
}
