//! Small dense linear programming kernel.
//!
//! Programs have equality constraints and per-variable lower bounds (finite
//! or `-inf`). They are solved with a two-phase tableau simplex using
//! Bland's rule throughout, so runs are deterministic and cannot cycle.
//! Infeasible programs return a Farkas multiplier vector, unbounded ones a
//! recession ray.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("malformed program: {0}")]
    MalformedProgram(String),
    #[error("iteration limit {0} reached")]
    IterationLimit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// All solver tolerances in one place.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LpTolerances {
    /// Smallest tableau entry accepted as a pivot.
    pub pivot: f64,
    /// Reduced costs above `-optimality` count as nonnegative.
    pub optimality: f64,
    /// Phase-one objective (relative to the right-hand side) treated as zero.
    pub feasibility: f64,
    pub max_iterations: usize,
}

impl Default for LpTolerances {
    fn default() -> Self {
        LpTolerances { pivot: 1e-10, optimality: 1e-10, feasibility: 1e-9, max_iterations: 200_000 }
    }
}

/// `min/max c'x  s.t.  A x = b,  x_j >= l_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    direction: Direction,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    lower: Vec<f64>,
}

impl LinearProgram {
    /// A program over `n` variables, all bounded below by zero.
    pub fn new(n: usize, direction: Direction) -> Self {
        LinearProgram { objective: vec![0.0; n], direction, rows: Vec::new(), rhs: Vec::new(), lower: vec![0.0; n] }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn set_objective(&mut self, c: Vec<f64>) -> &mut Self {
        self.objective = c;
        self
    }

    pub fn set_objective_coef(&mut self, j: usize, c: f64) -> &mut Self {
        self.objective[j] = c;
        self
    }

    pub fn add_equality(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.rows.push(row);
        self.rhs.push(rhs);
        self
    }

    pub fn set_lower(&mut self, j: usize, lb: f64) -> &mut Self {
        self.lower[j] = lb;
        self
    }

    pub fn set_free(&mut self, j: usize) -> &mut Self {
        self.set_lower(j, f64::NEG_INFINITY)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.objective.len();
        let bad = |s: String| Err(LpError::MalformedProgram(s));
        if self.lower.len() != n {
            return bad(format!("{} lower bounds for {n} variables", self.lower.len()));
        }
        if self.rows.len() != self.rhs.len() {
            return bad(format!("{} rows but {} right-hand sides", self.rows.len(), self.rhs.len()));
        }
        if let Some(i) = self.rows.iter().position(|r| r.len() != n) {
            return bad(format!("row {i} has {} coefficients, expected {n}", self.rows[i].len()));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return bad("non-finite objective coefficient".into());
        }
        if self.rows.iter().flatten().chain(&self.rhs).any(|a| !a.is_finite()) {
            return bad("non-finite constraint coefficient".into());
        }
        if self.lower.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
            return bad("lower bound must be finite or -inf".into());
        }
        Ok(())
    }

    /// Largest violation of the equalities and bounds at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let eq = self
            .rows
            .iter()
            .zip(&self.rhs)
            .map(|(r, b)| (r.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() - b).abs())
            .fold(0.0, f64::max);
        let bounds = x.iter().zip(&self.lower).map(|(v, l)| (l - v).max(0.0)).fold(0.0, f64::max);
        eq.max(bounds)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    /// Row multipliers `u` with `w = A'u` zero on free variables,
    /// nonpositive on bounded ones, and `u'b - sum w_j l_j > 0`.
    Farkas(Vec<f64>),
    /// Direction `d` with `A d = 0`, `d_j >= 0` on bounded variables, and
    /// the objective strictly improving along it.
    Ray(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal value; `+-inf` when unbounded, `NaN` when infeasible.
    pub objective: f64,
    /// Optimal point, or a feasible point when unbounded; empty when infeasible.
    pub primal: Vec<f64>,
    /// Equality multipliers at the optimum.
    pub duals: Vec<f64>,
    pub certificate: Option<Certificate>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_with(lp, &LpTolerances::default())
}

/// How an original variable maps to standard-form columns.
#[derive(Clone, Copy)]
enum ColMap {
    Shifted(usize),
    Split(usize, usize),
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    width: usize,
    iterations: usize,
}

enum Exit {
    Optimal,
    Unbounded(usize),
}

impl Tableau {
    fn rhs(&self) -> usize {
        self.width
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let piv = self.rows[r][e];
        for v in self.rows[r].iter_mut() {
            *v /= piv;
        }
        self.rows[r][e] = 1.0;
        let prow = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let factor = row[e];
            if factor != 0.0 {
                for (v, p) in row.iter_mut().zip(&prow) {
                    *v -= factor * p;
                }
                row[e] = 0.0;
            }
        }
        let factor = self.cost[e];
        if factor != 0.0 {
            for (v, p) in self.cost.iter_mut().zip(&prow) {
                *v -= factor * p;
            }
            self.cost[e] = 0.0;
        }
        self.basis[r] = e;
    }

    /// Minimizes the current cost row over columns `0..allowed`.
    fn run(&mut self, allowed: usize, tol: &LpTolerances) -> Result<Exit, LpError> {
        let rhs = self.rhs();
        loop {
            if self.iterations >= tol.max_iterations {
                return Err(LpError::IterationLimit(tol.max_iterations));
            }
            let Some(e) = (0..allowed).find(|&j| self.cost[j] < -tol.optimality) else {
                return Ok(Exit::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[e];
                if a <= tol.pivot {
                    continue;
                }
                let ratio = row[rhs].max(0.0) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((k, best)) => {
                        let tie = (ratio - best).abs() <= 1e-12 * (1.0 + best.abs());
                        if ratio < best && !tie || tie && self.basis[i] < self.basis[k] {
                            Some((i, ratio))
                        } else {
                            Some((k, best))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                return Ok(Exit::Unbounded(e));
            };
            self.pivot(r, e);
            self.iterations += 1;
        }
    }
}

pub fn solve_with(lp: &LinearProgram, tol: &LpTolerances) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let n = lp.num_vars();
    let m = lp.num_rows();

    let mut map = Vec::with_capacity(n);
    let mut ns = 0;
    for &l in &lp.lower {
        if l == f64::NEG_INFINITY {
            map.push(ColMap::Split(ns, ns + 1));
            ns += 2;
        } else {
            map.push(ColMap::Shifted(ns));
            ns += 1;
        }
    }
    let width = ns + m;

    // standard-form rows with nonnegative right-hand sides
    let mut sign = vec![1.0; m];
    let mut rows = Vec::with_capacity(m);
    let mut bmax = 0.0f64;
    for i in 0..m {
        let mut row = vec![0.0; width + 1];
        let mut b = lp.rhs[i];
        for (j, cm) in map.iter().enumerate() {
            let a = lp.rows[i][j];
            match *cm {
                ColMap::Shifted(c) => {
                    row[c] = a;
                    b -= a * lp.lower[j];
                }
                ColMap::Split(p, q) => {
                    row[p] = a;
                    row[q] = -a;
                }
            }
        }
        if b < 0.0 {
            sign[i] = -1.0;
            b = -b;
            for v in row[..ns].iter_mut() {
                *v = -*v;
            }
        }
        row[ns + i] = 1.0;
        row[width] = b;
        bmax = bmax.max(b);
        rows.push(row);
    }

    let mut cost = vec![0.0; width + 1];
    for row in &rows {
        for j in 0..ns {
            cost[j] -= row[j];
        }
        cost[width] -= row[width];
    }
    let mut t = Tableau { rows, cost, basis: (ns..ns + m).collect(), width, iterations: 0 };

    // phase one
    t.run(width, tol)?;
    let infeasibility = -t.cost[width];
    if infeasibility > tol.feasibility * bmax.max(1.0) {
        let farkas = (0..m).map(|i| sign[i] * (1.0 - t.cost[ns + i])).collect();
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            objective: f64::NAN,
            primal: Vec::new(),
            duals: Vec::new(),
            certificate: Some(Certificate::Farkas(farkas)),
            iterations: t.iterations,
        });
    }

    // drive artificials out of the basis where the row allows it
    for i in 0..m {
        if t.basis[i] >= ns {
            let best = (0..ns)
                .map(|j| (j, t.rows[i][j].abs()))
                .filter(|&(_, a)| a > tol.pivot)
                .fold(None, |acc: Option<(usize, f64)>, c| match acc {
                    Some(a) if a.1 >= c.1 => Some(a),
                    _ => Some(c),
                });
            if let Some((j, _)) = best {
                t.pivot(i, j);
            }
        }
    }

    // phase two
    let flip = if lp.direction == Direction::Maximize { -1.0 } else { 1.0 };
    let mut c_std = vec![0.0; width + 1];
    for (j, cm) in map.iter().enumerate() {
        let c = flip * lp.objective[j];
        match *cm {
            ColMap::Shifted(k) => c_std[k] = c,
            ColMap::Split(p, q) => {
                c_std[p] = c;
                c_std[q] = -c;
            }
        }
    }
    let mut cost = c_std.clone();
    for (i, row) in t.rows.iter().enumerate() {
        let cb = c_std[t.basis[i]];
        if cb != 0.0 {
            for (v, a) in cost.iter_mut().zip(row) {
                *v -= cb * a;
            }
        }
    }
    t.cost = cost;
    let exit = t.run(ns, tol)?;

    let mut x_std = vec![0.0; width];
    for (i, &b) in t.basis.iter().enumerate() {
        x_std[b] = t.rows[i][width].max(0.0);
    }
    let unmap = |v: &[f64], shift: bool| -> Vec<f64> {
        map.iter()
            .enumerate()
            .map(|(j, cm)| match *cm {
                ColMap::Shifted(k) => v[k] + if shift { lp.lower[j] } else { 0.0 },
                ColMap::Split(p, q) => v[p] - v[q],
            })
            .collect()
    };
    let primal = unmap(&x_std, true);

    match exit {
        Exit::Optimal => {
            let duals = (0..m).map(|i| -flip * sign[i] * t.cost[ns + i]).collect();
            Ok(LpSolution {
                status: LpStatus::Optimal,
                objective: lp.objective_value(&primal),
                primal,
                duals,
                certificate: None,
                iterations: t.iterations,
            })
        }
        Exit::Unbounded(e) => {
            let mut d_std = vec![0.0; width];
            d_std[e] = 1.0;
            for (i, &b) in t.basis.iter().enumerate() {
                d_std[b] -= t.rows[i][e];
            }
            let ray = unmap(&d_std, false);
            Ok(LpSolution {
                status: LpStatus::Unbounded,
                objective: -flip * f64::INFINITY,
                primal,
                duals: Vec::new(),
                certificate: Some(Certificate::Ray(ray)),
                iterations: t.iterations,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_epsilon_program() {
        // vars y1, y2, eps (free), s1, s2 >= 0; y_i - eps - s_i = 0
        let mut lp = LinearProgram::new(5, Direction::Maximize);
        lp.set_objective(vec![0.0, 0.0, 1.0, 0.0, 0.0]);
        lp.set_free(0).set_free(1).set_free(2);
        lp.add_equality(vec![1.0, -1.0, 0.0, 0.0, 0.0], 0.0);
        lp.add_equality(vec![1.0, 1.0, 0.0, 0.0, 0.0], 1.0);
        lp.add_equality(vec![1.0, 0.0, -1.0, -1.0, 0.0], 0.0);
        lp.add_equality(vec![0.0, 1.0, -1.0, 0.0, -1.0], 0.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 0.5).abs() < 1e-12);
        assert!((sol.primal[0] - 0.5).abs() < 1e-12 && (sol.primal[1] - 0.5).abs() < 1e-12);
        assert!(lp.max_violation(&sol.primal) < 1e-9);
    }

    #[test]
    fn unbounded_has_improving_ray() {
        let mut lp = LinearProgram::new(1, Direction::Maximize);
        lp.set_objective(vec![1.0]);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
        assert_eq!(sol.objective, f64::INFINITY);
        let Some(Certificate::Ray(d)) = sol.certificate else { panic!("no ray") };
        assert!(d[0] > 0.0);
    }

    #[test]
    fn unbounded_ray_with_constraints() {
        // min -x1 s.t. x1 - x2 = 1, x >= 0
        let mut lp = LinearProgram::new(2, Direction::Minimize);
        lp.set_objective(vec![-1.0, 0.0]).add_equality(vec![1.0, -1.0], 1.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
        let Some(Certificate::Ray(d)) = &sol.certificate else { panic!("no ray") };
        assert!((d[0] - d[1]).abs() < 1e-12 && d[0] > 0.0 && d[1] >= 0.0);
        assert!(lp.max_violation(&sol.primal) < 1e-9);
    }

    #[test]
    fn infeasible_has_farkas_certificate() {
        // x >= 1 and x + s = 0 with s >= 0
        let mut lp = LinearProgram::new(2, Direction::Minimize);
        lp.set_lower(0, 1.0).add_equality(vec![1.0, 1.0], 0.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
        let Some(Certificate::Farkas(u)) = &sol.certificate else { panic!("no certificate") };
        check_farkas(&lp, u);
    }

    fn check_farkas(lp: &LinearProgram, u: &[f64]) {
        let n = lp.num_vars();
        let w: Vec<f64> = (0..n).map(|j| lp.rows().iter().zip(u).map(|(r, ui)| r[j] * ui).sum()).collect();
        let mut gap: f64 = lp.rhs().iter().zip(u).map(|(b, ui)| b * ui).sum();
        for j in 0..n {
            if lp.lower()[j] == f64::NEG_INFINITY {
                assert!(w[j].abs() < 1e-9);
            } else {
                assert!(w[j] <= 1e-9);
                gap -= w[j] * lp.lower()[j];
            }
        }
        assert!(gap > 1e-9, "gap {gap}");
    }

    #[test]
    fn inconsistent_free_system_is_infeasible() {
        let mut lp = LinearProgram::new(2, Direction::Minimize);
        lp.set_free(0).set_free(1);
        lp.add_equality(vec![1.0, 1.0], 1.0).add_equality(vec![2.0, 2.0], 3.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
        let Some(Certificate::Farkas(u)) = &sol.certificate else { panic!() };
        check_farkas(&lp, u);
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let mut lp = LinearProgram::new(3, Direction::Minimize);
        lp.set_objective(vec![1.0, 2.0, 3.0]);
        lp.add_equality(vec![1.0, 1.0, 1.0], 1.0);
        lp.add_equality(vec![2.0, 2.0, 2.0], 2.0);
        lp.add_equality(vec![0.0, 1.0, 1.0], 0.5);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 1.5).abs() < 1e-12);
        assert!(lp.max_violation(&sol.primal) < 1e-9);
    }

    #[test]
    fn duals_certify_optimality() {
        // min x1 + 2 x2 + 0 x3 s.t. x1 + x2 - x3 = 2, x >= 0
        let mut lp = LinearProgram::new(3, Direction::Minimize);
        lp.set_objective(vec![1.0, 2.0, 0.0]).add_equality(vec![1.0, 1.0, -1.0], 2.0);
        let sol = solve(&lp).unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-12);
        assert!((sol.duals[0] - 1.0).abs() < 1e-12);
        let mut lp = lp.clone();
        lp.direction = Direction::Maximize;
        lp.set_objective(vec![-1.0, -2.0, 0.0]);
        let sol = solve(&lp).unwrap();
        assert!((sol.objective + 2.0).abs() < 1e-12);
        assert!((sol.duals[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn malformed_programs_are_rejected() {
        let mut lp = LinearProgram::new(2, Direction::Minimize);
        lp.add_equality(vec![1.0], 1.0);
        assert!(matches!(solve(&lp), Err(LpError::MalformedProgram(_))));
        let mut lp = LinearProgram::new(1, Direction::Minimize);
        lp.set_objective(vec![f64::NAN]);
        assert!(matches!(solve(&lp), Err(LpError::MalformedProgram(_))));
        let mut lp = LinearProgram::new(1, Direction::Minimize);
        lp.set_lower(0, f64::INFINITY);
        assert!(matches!(solve(&lp), Err(LpError::MalformedProgram(_))));
    }

    #[test]
    fn identical_inputs_give_identical_outputs() {
        let mut lp = LinearProgram::new(4, Direction::Maximize);
        lp.set_objective(vec![0.3, 0.1, 0.7, -0.2]);
        lp.add_equality(vec![1.0, 1.0, 1.0, 1.0], 1.0);
        lp.add_equality(vec![0.2, 0.5, 0.9, 0.1], 0.4);
        let a = solve(&lp).unwrap();
        let b = solve(&lp).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn degenerate_program_terminates() {
        // Classic cycling example (Beale) in equality form with slacks.
        let mut lp = LinearProgram::new(7, Direction::Minimize);
        lp.set_objective(vec![-0.75, 150.0, -0.02, 6.0, 0.0, 0.0, 0.0]);
        lp.add_equality(vec![0.25, -60.0, -0.04, 9.0, 1.0, 0.0, 0.0], 0.0);
        lp.add_equality(vec![0.5, -90.0, -0.02, 3.0, 0.0, 1.0, 0.0], 0.0);
        lp.add_equality(vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], 1.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective + 0.05).abs() < 1e-12);
    }
}
