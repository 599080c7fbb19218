use super::{Basis, BasisEntry, LpBackend, LpError, LpProblem, LpSolution, LpStatus, RowKind, Sense, VarKind};

#[derive(Clone, Debug)]
pub struct SimplexOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    /// Pivots between refactorizations of the basis inverse.
    pub refactor_every: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
    pub max_iterations: Option<usize>,
    /// Relative size of the right-hand-side perturbation used against stalling in phase two;
    /// zero disables it.
    pub perturbation: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-9,
            optimality_tol: 1e-9,
            pivot_tol: 1e-7,
            refactor_every: 64,
            bland_after: 200,
            max_iterations: None,
            perturbation: 1e-6,
        }
    }
}

/// Two-phase revised simplex keeping an explicit dense basis inverse.
///
/// Rows are flipped so right-hand sides are nonnegative, free variables are split,
/// and every row gets an artificial column. Artificials that cannot be pivoted out
/// after phase one mark redundant rows and stay basic at zero.
#[derive(Clone, Debug, Default)]
pub struct DenseRevisedSimplex {
    pub options: SimplexOptions,
}

impl DenseRevisedSimplex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_options(options: SimplexOptions) -> Self {
        Self { options }
    }
}

impl LpBackend for DenseRevisedSimplex {
    fn name(&self) -> &str {
        "dense-revised-simplex"
    }

    fn solve(&self, problem: &LpProblem, warm_start: Option<&Basis>) -> Result<LpSolution, LpError> {
        match self.solve_with(problem, warm_start, self.options.perturbation) {
            Err(LpError::Singular) | Err(LpError::IterationLimit(_)) if self.options.perturbation > 0.0 => {
                self.solve_with(problem, None, 0.0)
            }
            other => other,
        }
    }
}

impl DenseRevisedSimplex {
    fn solve_with(
        &self,
        problem: &LpProblem,
        warm_start: Option<&Basis>,
        perturbation: f64,
    ) -> Result<LpSolution, LpError> {
        let mut t = Tableau::build(problem, &self.options)?;
        let warm = warm_start.map(|b| t.try_warm_start(b)).unwrap_or(false);
        if !warm {
            t.cold_start()?;
            if t.has_basic_artificial() {
                let phase1: Vec<f64> = t.cols.iter().map(|c| f64::from(u8::from(c.artificial))).collect();
                t.iterate(&phase1, false)?;
                let infeas: f64 = (0..t.m)
                    .filter(|&i| t.cols[t.basis[i]].artificial)
                    .map(|i| t.xb[i].max(0.0))
                    .sum();
                let bmax = t.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                if infeas > 1e-7 * (1.0 + bmax) {
                    return Ok(t.finish(problem, LpStatus::Infeasible));
                }
                t.drive_out_artificials()?;
            }
        }
        let costs: Vec<f64> = t.cols.iter().map(|c| c.cost).collect();
        if perturbation > 0.0 {
            let exact_b = t.perturb(perturbation);
            let outcome = t.iterate(&costs, true)?;
            t.b = exact_b;
            t.refactor()?;
            if let Outcome::Unbounded = outcome {
                return Ok(t.finish(problem, LpStatus::Unbounded));
            }
            if !t.dual_cleanup(&costs)? {
                return self.solve_with(problem, None, 0.0);
            }
        }
        let status = match t.iterate(&costs, true)? {
            Outcome::Optimal => LpStatus::Optimal,
            Outcome::Unbounded => LpStatus::Unbounded,
        };
        Ok(t.finish(problem, status))
    }
}

struct Column {
    entries: Vec<(usize, f64)>,
    cost: f64,
    tag: BasisEntry,
    artificial: bool,
}

enum Outcome {
    Optimal,
    Unbounded,
}

struct Tableau<'o> {
    opts: &'o SimplexOptions,
    m: usize,
    cols: Vec<Column>,
    b: Vec<f64>,
    row_sign: Vec<f64>,
    basis: Vec<usize>,
    position: Vec<Option<usize>>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
    max_iterations: usize,
}

impl<'o> Tableau<'o> {
    fn build(p: &LpProblem, opts: &'o SimplexOptions) -> Result<Self, LpError> {
        let m = p.num_rows();
        let n = p.num_vars();
        if p.rhs().iter().any(|v| !v.is_finite()) || p.objective().iter().any(|v| !v.is_finite()) {
            return Err(LpError::InvalidProblem("non-finite data".into()));
        }
        let row_sign: Vec<f64> = p.rhs().iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
        let b: Vec<f64> = p.rhs().iter().map(|v| v.abs()).collect();
        let obj_sign = match p.sense {
            Sense::Maximize => -1.0,
            Sense::Minimize => 1.0,
        };

        let mut per_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in p.entries() {
            if i >= m || j >= n || !v.is_finite() {
                return Err(LpError::InvalidProblem(format!("bad entry ({i}, {j}, {v})")));
            }
            per_col[j].push((i, v * row_sign[i]));
        }
        let mut cols = Vec::with_capacity(2 * n + 2 * m);
        for (j, mut e) in per_col.into_iter().enumerate() {
            e.sort_by_key(|&(i, _)| i);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(e.len());
            for (i, v) in e {
                match merged.last_mut() {
                    Some(last) if last.0 == i => last.1 += v,
                    _ => merged.push((i, v)),
                }
            }
            merged.retain(|&(_, v)| v != 0.0);
            let cost = obj_sign * p.objective()[j];
            if p.var_kinds()[j] == VarKind::Free {
                cols.push(Column {
                    entries: merged.iter().map(|&(i, v)| (i, -v)).collect(),
                    cost: -cost,
                    tag: BasisEntry::VarNeg(j),
                    artificial: false,
                });
            }
            cols.push(Column {
                entries: merged,
                cost,
                tag: BasisEntry::Var(j),
                artificial: false,
            });
        }
        for (i, kind) in p.row_kinds().iter().enumerate() {
            let v = match kind {
                RowKind::Le => 1.0,
                RowKind::Ge => -1.0,
                RowKind::Eq => continue,
            };
            cols.push(Column {
                entries: vec![(i, v * row_sign[i])],
                cost: 0.0,
                tag: BasisEntry::Slack(i),
                artificial: false,
            });
        }
        for i in 0..m {
            cols.push(Column {
                entries: vec![(i, 1.0)],
                cost: 0.0,
                tag: BasisEntry::Artificial(i),
                artificial: true,
            });
        }
        let ncols = cols.len();
        let max_iterations = opts.max_iterations.unwrap_or(50 * (m + ncols) + 10_000);
        Ok(Self {
            opts,
            m,
            cols,
            b,
            row_sign,
            basis: Vec::new(),
            position: vec![None; ncols],
            binv: Vec::new(),
            xb: Vec::new(),
            iterations: 0,
            since_refactor: 0,
            max_iterations,
        })
    }

    fn set_basis(&mut self, basis: Vec<usize>) {
        self.position.iter_mut().for_each(|p| *p = None);
        for (i, &c) in basis.iter().enumerate() {
            self.position[c] = Some(i);
        }
        self.basis = basis;
    }

    fn cold_start(&mut self) -> Result<(), LpError> {
        let m = self.m;
        let mut choice: Vec<Option<usize>> = vec![None; m];
        for (k, c) in self.cols.iter().enumerate() {
            match c.tag {
                BasisEntry::Slack(i) if c.entries[0].1 > 0.0 => choice[i] = Some(k),
                BasisEntry::Artificial(i) if choice[i].is_none() => choice[i] = Some(k),
                _ => {}
            }
        }
        // slacks precede artificials in `cols`, so a usable slack always wins
        let basis = choice
            .into_iter()
            .map(|c| c.expect("every row has an artificial"))
            .collect();
        self.set_basis(basis);
        self.refactor()
    }

    fn try_warm_start(&mut self, warm: &Basis) -> bool {
        if warm.0.len() != self.m {
            return false;
        }
        let mut basis = Vec::with_capacity(self.m);
        for entry in &warm.0 {
            match self.cols.iter().position(|c| c.tag == *entry) {
                Some(k) if !basis.contains(&k) => basis.push(k),
                _ => return false,
            }
        }
        self.set_basis(basis);
        if self.refactor().is_err() {
            return false;
        }
        let tol = 1e-7;
        (0..self.m).all(|i| {
            let v = self.xb[i];
            if self.cols[self.basis[i]].artificial {
                v.abs() <= tol
            } else {
                v >= -tol
            }
        })
    }

    fn has_basic_artificial(&self) -> bool {
        self.basis.iter().any(|&c| self.cols[c].artificial)
    }

    /// Rebuilds the inverse of the basis by Gauss-Jordan elimination with partial pivoting.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (pos, &c) in self.basis.iter().enumerate() {
            for &(i, v) in &self.cols[c].entries {
                a[i * m + pos] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let (mut piv, mut best) = (col, a[col * m + col].abs());
            for r in col + 1..m {
                let v = a[r * m + col].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-13 {
                return Err(LpError::Singular);
            }
            if piv != col {
                for k in 0..m {
                    a.swap(col * m + k, piv * m + k);
                    inv.swap(col * m + k, piv * m + k);
                }
            }
            let d = a[col * m + col];
            for k in 0..m {
                a[col * m + k] /= d;
                inv[col * m + k] /= d;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = a[r * m + col];
                if f == 0.0 {
                    continue;
                }
                for k in 0..m {
                    a[r * m + k] -= f * a[col * m + k];
                    inv[r * m + k] -= f * inv[col * m + k];
                }
            }
        }
        self.binv = inv;
        self.xb = (0..m)
            .map(|i| (0..m).map(|k| self.binv[i * m + k] * self.b[k]).sum())
            .collect();
        self.since_refactor = 0;
        Ok(())
    }

    fn duals(&self, costs: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (i, &c) in self.basis.iter().enumerate() {
            let cb = costs[c];
            if cb == 0.0 {
                continue;
            }
            let row = &self.binv[i * m..(i + 1) * m];
            for (yk, r) in y.iter_mut().zip(row) {
                *yk += cb * r;
            }
        }
        y
    }

    fn ftran(&self, col: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for &(r, v) in &self.cols[col].entries {
            for (i, a) in alpha.iter_mut().enumerate() {
                *a += self.binv[i * m + r] * v;
            }
        }
        alpha
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64], step: f64) {
        let m = self.m;
        let piv = alpha[r];
        for k in 0..m {
            self.binv[r * m + k] /= piv;
        }
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (pivot_row, after) = rest.split_at_mut(m);
        for (i, row) in before.chunks_exact_mut(m).enumerate() {
            let f = alpha[i];
            if f != 0.0 {
                row.iter_mut().zip(pivot_row.iter()).for_each(|(x, p)| *x -= f * p);
            }
        }
        for (i, row) in after.chunks_exact_mut(m).enumerate() {
            let f = alpha[r + 1 + i];
            if f != 0.0 {
                row.iter_mut().zip(pivot_row.iter()).for_each(|(x, p)| *x -= f * p);
            }
        }
        for i in 0..m {
            if i != r {
                self.xb[i] -= step * alpha[i];
            }
        }
        self.xb[r] = step;
        let old = self.basis[r];
        self.position[old] = None;
        self.position[q] = Some(r);
        self.basis[r] = q;
        self.iterations += 1;
        self.since_refactor += 1;
    }

    fn iterate(&mut self, costs: &[f64], phase2: bool) -> Result<Outcome, LpError> {
        let opts = self.opts;
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= self.max_iterations {
                return Err(LpError::IterationLimit(self.max_iterations));
            }
            if self.since_refactor >= opts.refactor_every {
                self.refactor()?;
            }
            let bland = degenerate_run >= opts.bland_after;
            let y = self.duals(costs);
            let mut entering: Option<(usize, f64)> = None;
            for (j, col) in self.cols.iter().enumerate() {
                if col.artificial || self.position[j].is_some() {
                    continue;
                }
                let d = costs[j] - col.entries.iter().map(|&(i, v)| y[i] * v).sum::<f64>();
                if d < -opts.optimality_tol {
                    if bland {
                        entering = Some((j, d));
                        break;
                    }
                    if entering.is_none_or(|(_, best)| d < best) {
                        entering = Some((j, d));
                    }
                }
            }
            let Some((q, _)) = entering else {
                return Ok(Outcome::Optimal);
            };
            let alpha = self.ftran(q);
            let Some(r) = self.ratio_test(&alpha, phase2, bland) else {
                if self.since_refactor > 0 {
                    self.refactor()?;
                    continue;
                }
                return Ok(Outcome::Unbounded);
            };
            let step = if self.cols[self.basis[r]].artificial && phase2 {
                0.0
            } else {
                self.xb[r].max(0.0) / alpha[r]
            };
            if step.abs() <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, q, &alpha, step);
        }
    }

    fn ratio_test(&self, alpha: &[f64], phase2: bool, bland: bool) -> Option<usize> {
        let tol = self.opts.pivot_tol;
        if phase2 {
            // artificials left in the basis are fixed at zero and must leave first
            let fixed = (0..self.m)
                .filter(|&i| self.cols[self.basis[i]].artificial && alpha[i].abs() > tol)
                .max_by(|&a, &b| alpha[a].abs().total_cmp(&alpha[b].abs()));
            if fixed.is_some() {
                return fixed;
            }
        }
        let eligible = |i: usize| alpha[i] > tol && !(phase2 && self.cols[self.basis[i]].artificial);
        if bland {
            let mut best: Option<(usize, f64)> = None;
            for i in (0..self.m).filter(|&i| eligible(i)) {
                let ratio = self.xb[i].max(0.0) / alpha[i];
                match best {
                    Some((_, br)) if ratio > br + 1e-12 => {}
                    Some((bi, br)) if (ratio - br).abs() <= 1e-12 && self.basis[i] > self.basis[bi] => {}
                    _ => best = Some((i, ratio)),
                }
            }
            return best.map(|(i, _)| i);
        }
        // Harris two-pass test
        let feas = self.opts.feasibility_tol;
        let bound = (0..self.m)
            .filter(|&i| eligible(i))
            .map(|i| (self.xb[i].max(0.0) + feas) / alpha[i])
            .fold(f64::INFINITY, f64::min);
        if !bound.is_finite() {
            return None;
        }
        (0..self.m)
            .filter(|&i| eligible(i) && self.xb[i].max(0.0) / alpha[i] <= bound)
            .max_by(|&a, &b| alpha[a].total_cmp(&alpha[b]))
    }

    /// Lifts every structural basic variable by a small pseudo-random amount, moving the
    /// right-hand side to `b + B δ`. Returns the unperturbed right-hand side.
    fn perturb(&mut self, scale: f64) -> Vec<f64> {
        let exact = self.b.clone();
        let mut state = 0x9E37_79B9_7F4A_7C15u64;
        for i in 0..self.m {
            let c = self.basis[i];
            if self.cols[c].artificial {
                continue;
            }
            state = state
                .wrapping_mul(6_364_136_223_846_793_005)
                .wrapping_add(1_442_695_040_888_963_407);
            let u = (state >> 11) as f64 / (1u64 << 53) as f64;
            let delta = scale * (1.0 + u) * (1.0 + self.xb[i].abs());
            for &(r, v) in &self.cols[c].entries {
                self.b[r] += delta * v;
            }
        }
        let _ = self.refactor();
        exact
    }

    /// Dual simplex on a dual-feasible basis until primal feasibility is restored.
    /// Returns false when no pivot can repair a negative basic variable.
    fn dual_cleanup(&mut self, costs: &[f64]) -> Result<bool, LpError> {
        let m = self.m;
        let feas = self.opts.feasibility_tol;
        let limit = self.iterations + 50 * m + 1000;
        loop {
            if self.iterations >= limit {
                return Ok(false);
            }
            if self.since_refactor >= self.opts.refactor_every {
                self.refactor()?;
            }
            let leaving = (0..m)
                .filter(|&i| !self.cols[self.basis[i]].artificial && self.xb[i] < -feas)
                .min_by(|&a, &b| self.xb[a].total_cmp(&self.xb[b]));
            let Some(r) = leaving else {
                return Ok(true);
            };
            let y = self.duals(costs);
            let row = self.binv[r * m..(r + 1) * m].to_vec();
            let mut best: Option<(usize, f64, f64)> = None;
            for (j, col) in self.cols.iter().enumerate() {
                if col.artificial || self.position[j].is_some() {
                    continue;
                }
                let a: f64 = col.entries.iter().map(|&(i, v)| row[i] * v).sum();
                if a >= -self.opts.pivot_tol {
                    continue;
                }
                let d = costs[j] - col.entries.iter().map(|&(i, v)| y[i] * v).sum::<f64>();
                let ratio = d.max(0.0) / -a;
                let better = match best {
                    None => true,
                    Some((_, br, ba)) => ratio < br - 1e-12 || (ratio <= br + 1e-12 && -a > ba),
                };
                if better {
                    best = Some((j, ratio, -a));
                }
            }
            let Some((q, _, _)) = best else {
                return Ok(false);
            };
            let alpha = self.ftran(q);
            let step = self.xb[r] / alpha[r];
            self.pivot(r, q, &alpha, step);
        }
    }

    fn drive_out_artificials(&mut self) -> Result<(), LpError> {
        let m = self.m;
        for r in 0..m {
            if !self.cols[self.basis[r]].artificial {
                continue;
            }
            let row = self.binv[r * m..(r + 1) * m].to_vec();
            let mut best: Option<(usize, f64)> = None;
            for (j, col) in self.cols.iter().enumerate() {
                if col.artificial || self.position[j].is_some() {
                    continue;
                }
                let v: f64 = col.entries.iter().map(|&(i, a)| row[i] * a).sum();
                if v.abs() > 1e-7 && best.is_none_or(|(_, b)| v.abs() > b) {
                    best = Some((j, v.abs()));
                }
            }
            if let Some((q, _)) = best {
                let alpha = self.ftran(q);
                let step = self.xb[r] / alpha[r];
                self.pivot(r, q, &alpha, step);
            }
        }
        self.refactor()
    }

    fn finish(mut self, p: &LpProblem, status: LpStatus) -> LpSolution {
        if self.since_refactor > 0 && self.refactor().is_err() {
            // keep the updated inverse; it was good enough to terminate
        }
        let n = p.num_vars();
        let mut x = vec![0.0; n];
        for (i, &c) in self.basis.iter().enumerate() {
            match self.cols[c].tag {
                BasisEntry::Var(j) => x[j] += self.xb[i],
                BasisEntry::VarNeg(j) => x[j] -= self.xb[i],
                _ => {}
            }
        }
        for (j, kind) in p.var_kinds().iter().enumerate() {
            if *kind == VarKind::NonNegative && x[j] < 0.0 {
                x[j] = 0.0;
            }
        }
        let costs: Vec<f64> = self.cols.iter().map(|c| c.cost).collect();
        let y = self.duals(&costs);
        let sense_sign = match p.sense {
            Sense::Maximize => -1.0,
            Sense::Minimize => 1.0,
        };
        let duals = y.iter().zip(&self.row_sign).map(|(v, s)| sense_sign * s * v).collect();
        LpSolution {
            status,
            objective: p.evaluate(&x),
            x,
            duals,
            basis: Basis(self.basis.iter().map(|&c| self.cols[c].tag).collect()),
            iterations: self.iterations,
        }
    }
}
