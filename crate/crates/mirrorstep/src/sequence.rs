//! The scalar error recursion `e_{t+1} = (1 - theta * eta_t) * e_t + delta * eta_t^2`
//! and the self-tuned stepsize sequence that minimizes it.
//!
//! Everything the stepsize policies promise reduces to facts about this
//! recursion: the closed form `e_t = (2 delta / theta) * eta_t`, the `1/t`
//! decay of both sequences, and grid-search optimality over bounded
//! stepsizes. This module makes those facts checkable numerically, including
//! an exhaustive brute-force minimizer used as an independent oracle.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Largest horizon the exhaustive grid search accepts; cost grows like
/// `(1 / (theta * grid_step))^t`.
pub const MAX_BRUTE_FORCE_HORIZON: usize = 4;

/// Parameters of the error recursion. `e0` must satisfy
/// `e0 <= 2 * delta / theta^2` for the self-tuned start to be a valid
/// stepsize.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRecursion {
    theta: f64,
    delta: f64,
    e0: f64,
}

impl ErrorRecursion {
    pub fn new(theta: f64, delta: f64, e0: f64) -> Result<Self> {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::Validation(format!("theta must be positive, got {theta}")));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::Validation(format!("delta must be positive, got {delta}")));
        }
        if !(e0 >= 0.0) || !e0.is_finite() {
            return Err(Error::Validation(format!("e0 must be nonnegative, got {e0}")));
        }
        let cap = 2.0 * delta / (theta * theta);
        if e0 > cap {
            return Err(Error::Validation(format!(
                "e0 = {e0} exceeds admissible bound 2*delta/theta^2 = {cap}"
            )));
        }
        Ok(ErrorRecursion { theta, delta, e0 })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn e0(&self) -> f64 {
        self.e0
    }

    /// Upper end of the admissible stepsize interval `(0, 1/theta]`.
    pub fn eta_cap(&self) -> f64 {
        1.0 / self.theta
    }

    /// Folds the recursion over the given stepsizes and returns the final
    /// error. Every stepsize must lie in `(0, 1/theta]`.
    pub fn evaluate(&self, etas: &[f64]) -> Result<f64> {
        for (j, &eta) in etas.iter().enumerate() {
            if !(eta > 0.0) || eta > self.eta_cap() {
                return Err(Error::Validation(format!(
                    "stepsize {eta} at index {j} outside (0, {}]",
                    self.eta_cap()
                )));
            }
        }
        Ok(self.fold(etas))
    }

    fn fold(&self, etas: &[f64]) -> f64 {
        etas.iter().fold(self.e0, |e, &eta| {
            (1.0 - self.theta * eta) * e + self.delta * eta * eta
        })
    }

    /// First `t` terms of the self-tuned sequence:
    /// `eta_0 = (theta / (2 delta)) * e0`, then
    /// `eta_j = eta_{j-1} * (1 - (theta / 2) * eta_{j-1})`.
    pub fn selftuned_sequence(&self, t: usize) -> Result<Vec<f64>> {
        if t == 0 {
            return Err(Error::Validation("sequence length must be positive".into()));
        }
        let eta0 = self.theta / (2.0 * self.delta) * self.e0;
        if !(eta0 > 0.0) {
            return Err(Error::Validation(
                "self-tuned start is not positive; e0 must be strictly positive".into(),
            ));
        }
        let mut etas = Vec::with_capacity(t);
        let mut eta = eta0;
        for _ in 0..t {
            etas.push(eta);
            eta *= 1.0 - 0.5 * self.theta * eta;
        }
        Ok(etas)
    }

    /// `eta_t` of the self-tuned sequence without materializing the prefix.
    pub fn selftuned_eta(&self, t: usize) -> Result<f64> {
        let mut eta = self.theta / (2.0 * self.delta) * self.e0;
        if !(eta > 0.0) {
            return Err(Error::Validation(
                "self-tuned start is not positive; e0 must be strictly positive".into(),
            ));
        }
        for _ in 0..t {
            eta *= 1.0 - 0.5 * self.theta * eta;
        }
        Ok(eta)
    }

    /// Stepsize grid `{k * grid_step} ∩ (0, 1/theta]` plus the endpoint
    /// `1/theta` when the spacing misses it.
    fn grid(&self, grid_step: f64) -> Result<Vec<f64>> {
        if !(grid_step > 0.0) || grid_step > self.eta_cap() {
            return Err(Error::Validation(format!(
                "grid step {grid_step} outside (0, {}]",
                self.eta_cap()
            )));
        }
        let cap = self.eta_cap();
        let mut grid = Vec::new();
        let mut k = 1u64;
        loop {
            let eta = k as f64 * grid_step;
            if eta > cap * (1.0 + 1e-12) {
                break;
            }
            grid.push(eta.min(cap));
            k += 1;
        }
        if *grid.last().unwrap() < cap * (1.0 - 1e-12) {
            grid.push(cap);
        }
        Ok(grid)
    }

    /// Exhaustive minimization of `evaluate` over the stepsize grid raised to
    /// the `t`-th power. Ties break toward the lexicographically smaller
    /// sequence, so the result does not depend on how work is split across
    /// threads.
    pub fn brute_force_min(&self, t: usize, grid_step: f64) -> Result<(Vec<f64>, f64)> {
        self.check_horizon(t)?;
        let grid = self.grid(grid_step)?;
        let best = grid
            .par_iter()
            .map(|&eta0| {
                let e1 = (1.0 - self.theta * eta0) * self.e0 + self.delta * eta0 * eta0;
                let mut prefix = vec![eta0];
                let mut best = (f64::INFINITY, Vec::new());
                descend_min(&grid, self.theta, self.delta, t - 1, e1, &mut prefix, &mut best);
                best
            })
            .reduce(
                || (f64::INFINITY, Vec::new()),
                |a, b| if better(&a, &b) { a } else { b },
            );
        Ok((best.1, best.0))
    }

    /// Smallest value of
    /// `e_t(eta) - e_t(eta*) - delta * (eta_{t-1} - eta*_{t-1})^2`
    /// over the same grid as [`Self::brute_force_min`]. Nonnegative (up to
    /// floating-point slack) exactly when the quadratic suboptimality gap
    /// holds at every grid point.
    pub fn grid_gap_margin(&self, t: usize, grid_step: f64) -> Result<f64> {
        self.check_horizon(t)?;
        let grid = self.grid(grid_step)?;
        let star = self.selftuned_sequence(t)?;
        let e_star = self.fold(&star);
        let eta_star_last = star[t - 1];
        let margin = grid
            .par_iter()
            .map(|&eta0| {
                let e1 = (1.0 - self.theta * eta0) * self.e0 + self.delta * eta0 * eta0;
                descend_gap(
                    &grid,
                    self.theta,
                    self.delta,
                    t - 1,
                    e1,
                    eta0,
                    e_star,
                    eta_star_last,
                )
            })
            .reduce(|| f64::INFINITY, f64::min);
        Ok(margin)
    }

    fn check_horizon(&self, t: usize) -> Result<()> {
        if t == 0 {
            return Err(Error::Validation("horizon must be positive".into()));
        }
        if t > MAX_BRUTE_FORCE_HORIZON {
            return Err(Error::Budget(format!(
                "grid search over {t} stepsizes is out of budget (max {MAX_BRUTE_FORCE_HORIZON})"
            )));
        }
        Ok(())
    }
}

fn better(a: &(f64, Vec<f64>), b: &(f64, Vec<f64>)) -> bool {
    if a.0 != b.0 {
        return a.0 < b.0;
    }
    if a.1.is_empty() {
        return false;
    }
    if b.1.is_empty() {
        return true;
    }
    a.1 <= b.1
}

fn descend_min(
    grid: &[f64],
    theta: f64,
    delta: f64,
    remaining: usize,
    e: f64,
    prefix: &mut Vec<f64>,
    best: &mut (f64, Vec<f64>),
) {
    if remaining == 0 {
        let cand = (e, std::mem::take(prefix));
        if better(&cand, best) {
            *best = (cand.0, cand.1.clone());
        }
        *prefix = cand.1;
        return;
    }
    for &eta in grid {
        let next = (1.0 - theta * eta) * e + delta * eta * eta;
        prefix.push(eta);
        descend_min(grid, theta, delta, remaining - 1, next, prefix, best);
        prefix.pop();
    }
}

#[allow(clippy::too_many_arguments)]
fn descend_gap(
    grid: &[f64],
    theta: f64,
    delta: f64,
    remaining: usize,
    e: f64,
    last_eta: f64,
    e_star: f64,
    eta_star_last: f64,
) -> f64 {
    if remaining == 0 {
        let dev = last_eta - eta_star_last;
        return e - e_star - delta * dev * dev;
    }
    let mut margin = f64::INFINITY;
    for &eta in grid {
        let next = (1.0 - theta * eta) * e + delta * eta * eta;
        margin = margin.min(descend_gap(
            grid,
            theta,
            delta,
            remaining - 1,
            next,
            eta,
            e_star,
            eta_star_last,
        ));
    }
    margin
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec() -> ErrorRecursion {
        ErrorRecursion::new(2.0, 1.0, 0.5).unwrap()
    }

    #[test]
    fn admissibility_boundary() {
        assert!(ErrorRecursion::new(2.0, 1.0, 0.5).is_ok());
        assert!(ErrorRecursion::new(2.0, 1.0, 0.5 + 1e-9).is_err());
        assert!(ErrorRecursion::new(-1.0, 1.0, 0.1).is_err());
        assert!(ErrorRecursion::new(2.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn evaluate_single_step_by_hand() {
        // e_1 = (1 - 2*0.5)*0.5 + 1*0.25 = 0.25
        assert_eq!(rec().evaluate(&[0.5]).unwrap(), 0.25);
    }

    #[test]
    fn evaluate_empty_fold_returns_e0() {
        assert_eq!(rec().evaluate(&[]).unwrap(), 0.5);
    }

    #[test]
    fn evaluate_two_steps_by_hand() {
        // e_2 = (1 - 2*0.25)*0.25 + 0.0625 = 0.1875
        assert_eq!(rec().evaluate(&[0.5, 0.25]).unwrap(), 0.1875);
    }

    #[test]
    fn evaluate_rejects_out_of_range_stepsizes() {
        assert!(rec().evaluate(&[0.6]).is_err());
        assert!(rec().evaluate(&[0.0]).is_err());
        assert!(rec().evaluate(&[0.25, -0.1]).is_err());
    }

    #[test]
    fn selftuned_prefix() {
        assert_eq!(
            rec().selftuned_sequence(3).unwrap(),
            vec![0.5, 0.25, 0.1875]
        );
    }

    #[test]
    fn selftuned_rejects_zero_start() {
        let degenerate = ErrorRecursion::new(2.0, 1.0, 0.0).unwrap();
        assert!(degenerate.selftuned_sequence(3).is_err());
    }

    #[test]
    fn closed_form_matches_next_stepsize() {
        // e_t(eta*_0..eta*_{t-1}) = (2 delta / theta) * eta*_t
        let r = rec();
        for t in [1usize, 2, 3, 10, 100, 1000] {
            let etas = r.selftuned_sequence(t).unwrap();
            let e_t = r.evaluate(&etas).unwrap();
            let eta_t = r.selftuned_eta(t).unwrap();
            let expected = 2.0 * r.delta() / r.theta() * eta_t;
            assert!(
                (e_t - expected).abs() <= 1e-12 * expected.abs(),
                "t = {t}: {e_t} vs {expected}"
            );
        }
        assert_eq!(r.evaluate(&r.selftuned_sequence(3).unwrap()).unwrap(), 0.15234375);
    }

    #[test]
    fn brute_force_single_step_calculus_oracle() {
        // d/d eta [(1 - 2 eta) 0.5 + eta^2] = -1 + 2 eta, so the minimizer on
        // (0, 0.5] is 0.5 with value 0.25.
        let (etas, e) = rec().brute_force_min(1, 1e-3).unwrap();
        assert_eq!(etas, vec![0.5]);
        assert_eq!(e, 0.25);
    }

    #[test]
    fn brute_force_two_steps() {
        let (_, e) = rec().brute_force_min(2, 1e-3).unwrap();
        assert!((e - 0.1875).abs() < 1e-5, "{e}");
    }

    #[test]
    fn brute_force_three_steps_coarse() {
        let (_, e) = rec().brute_force_min(3, 5e-3).unwrap();
        assert!((e - 0.15234375).abs() < 1e-4, "{e}");
    }

    #[test]
    fn brute_force_refuses_large_horizon() {
        assert!(matches!(
            rec().brute_force_min(5, 0.1),
            Err(Error::Budget(_))
        ));
    }

    #[test]
    fn brute_force_never_beats_selftuned() {
        let r = rec();
        for t in 1..=3 {
            let star = r.evaluate(&r.selftuned_sequence(t).unwrap()).unwrap();
            let (_, e) = r.brute_force_min(t, 5e-3).unwrap();
            assert!(e >= star - 1e-9, "t = {t}: grid {e} below optimal {star}");
        }
    }

    #[test]
    fn gap_margin_nonnegative() {
        let r = rec();
        for t in 1..=3 {
            let margin = r.grid_gap_margin(t, 5e-3).unwrap();
            assert!(margin >= -1e-9, "t = {t}: margin {margin}");
        }
    }

    #[test]
    fn brute_force_independent_of_worker_count() {
        let r = rec();
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| r.brute_force_min(2, 2e-3).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn grid_includes_endpoint() {
        let r = rec();
        let g = r.grid(3e-3).unwrap();
        assert_eq!(*g.last().unwrap(), 0.5);
        let g = r.grid(5e-3).unwrap();
        assert_eq!(*g.last().unwrap(), 0.5);
        assert!(g[0] > 0.0);
    }

    #[test]
    fn selftuned_decay_and_bounds_midscale() {
        let r = rec();
        let theta = r.theta();
        let mut eta = r.selftuned_sequence(1).unwrap()[0];
        let mut prev = eta;
        let mut e = r.e0();
        for t in 1..=100_000usize {
            e = (1.0 - theta * eta) * e + r.delta() * eta * eta;
            eta *= 1.0 - 0.5 * theta * eta;
            assert!(eta > 0.0);
            assert!(eta <= prev);
            assert!(eta < 2.0 / (theta * t as f64), "t = {t}");
            assert!(e <= 4.0 * r.delta() / (theta * theta) / t as f64, "t = {t}");
            prev = eta;
        }
    }
}
