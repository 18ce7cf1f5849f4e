//! Equilibrium solvers: best-response iteration, Rosen's weighted projected
//! pseudogradient, potential minimization, and the multiplier-bias sweep.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::block::BlockVector;
use crate::error::{GameError, Result};
use crate::model::{GameSpec, ObjectiveSpec, WeightVector};
use crate::ni::{block_minimum, is_gne, merit_phi, TAU_SOLVE};
use crate::scalar::{lit, Scalar};
use crate::sections::{
    minimize_linear, project_polytope, spectral_bound, FeasibleSection,
};

const PROJ_TOL: f64 = 1e-12;
const PROJ_MAX_ITER: usize = 50_000;
const MAX_BACKTRACKS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveMethod {
    BestResponse,
    Rosen,
    Potential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    GaussSeidel,
    Jacobi,
}

#[derive(Debug, Clone, Serialize)]
pub struct TracePoint<S: Scalar + Serialize> {
    pub iteration: usize,
    pub residual: S,
    pub x: BlockVector<S>,
}

/// Outcome of a solver run. `residual` is the merit gap for best-response
/// and potential runs and the projected-gradient VI residual for Rosen.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport<S: Scalar + Serialize> {
    pub x_star: BlockVector<S>,
    pub iterations: usize,
    pub residual: S,
    pub trace: Vec<TracePoint<S>>,
    pub converged: bool,
    pub method: SolveMethod,
    /// Rosen only: optimal value of the stacked-pseudogradient linear
    /// program over the joint set, near zero at a variational equilibrium.
    pub vi_certificate: Option<S>,
    /// Potential only: the minimizer was found but failed equilibrium
    /// certification, so the supplied potential does not fit the game.
    pub potential_mismatch: bool,
}

/// Forcing-function tags; each satisfies "g(t_k) -> 0 implies t_k -> 0".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ForcingTag {
    /// g(t) = t
    Identity,
    /// g(t) = t^2
    Square,
    /// g(t) = min(t, 1) * t
    SaturatedLinear,
}

impl ForcingTag {
    pub fn apply<S: Scalar>(self, t: S) -> S {
        match self {
            ForcingTag::Identity => t,
            ForcingTag::Square => t * t,
            ForcingTag::SaturatedLinear => num_traits::Float::min(t, S::one()) * t,
        }
    }
}

/// A candidate potential function for a game.
#[derive(Debug, Clone)]
pub struct PotentialSpec<S: Scalar> {
    pub g: ObjectiveSpec<S>,
    pub forcing: ForcingTag,
}

impl<S: Scalar> PotentialSpec<S> {
    pub fn evaluate(&self, game: &GameSpec<S>, x: &BlockVector<S>) -> Result<S> {
        match &self.g {
            ObjectiveSpec::Quadratic { q, c, d } => {
                let v = x.flatten();
                Ok(lit::<S>(0.5) * v.dot(&(q * &v)) + c.dot(&v) + *d)
            }
            ObjectiveSpec::Oracle { evaluate, .. } => {
                let _ = game;
                Ok(evaluate(x))
            }
        }
    }

    pub fn gradient(&self, game: &GameSpec<S>, x: &BlockVector<S>) -> Result<DVector<S>> {
        match &self.g {
            ObjectiveSpec::Quadratic { q, c, .. } => Ok(q * x.flatten() + c),
            ObjectiveSpec::Oracle {
                partial_gradient, ..
            } => {
                let g = partial_gradient
                    .as_ref()
                    .ok_or(GameError::GradientUnavailable { player: 0 })?;
                let mut out = DVector::zeros(game.total_dim());
                for i in 0..game.n_players() {
                    let block = g(i, x);
                    out.rows_mut(game.block_offset(i), game.dims()[i])
                        .copy_from(&block);
                }
                Ok(out)
            }
        }
    }
}

/// Player `i`'s best response against the opponents' blocks of `x`.
pub fn best_response<S: Scalar>(
    game: &GameSpec<S>,
    i: usize,
    x_minus_i: &BlockVector<S>,
    tol: S,
) -> Result<DVector<S>> {
    let section = FeasibleSection::freeze(game, i, x_minus_i)?;
    let (y, _) = block_minimum(game, i, x_minus_i, &section, tol)?;
    Ok(y)
}

/// Fixed-point iteration on the best-response map, player-by-player
/// (Gauss-Seidel, ascending index) or simultaneous (Jacobi).
pub fn solve_best_response<S: Scalar + Serialize>(
    game: &GameSpec<S>,
    x0: &BlockVector<S>,
    mode: SweepMode,
    tol: S,
    max_iter: usize,
) -> Result<SolveReport<S>> {
    let mut x = x0.clone();
    // Entry check: x0 must lie in the constraint-map domain.
    for i in 0..game.n_players() {
        FeasibleSection::freeze(game, i, &x)?;
    }
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    for iter in 0..max_iter {
        iterations = iter + 1;
        let previous = x.clone();
        match mode {
            SweepMode::GaussSeidel => {
                for i in 0..game.n_players() {
                    let y = best_response(game, i, &x, tol)?;
                    x = x.replace_block(i, y)?;
                }
            }
            SweepMode::Jacobi => {
                let responses: Vec<DVector<S>> = (0..game.n_players())
                    .map(|i| best_response(game, i, &previous, tol))
                    .collect::<Result<_>>()?;
                x = BlockVector::new(responses)?;
            }
        }
        let gap = merit_phi(game, &x, lit(TAU_SOLVE))?.gap;
        trace.push(TracePoint {
            iteration: iterations,
            residual: gap,
            x: x.clone(),
        });
        if x.sup_distance(&previous) < tol {
            converged = true;
            break;
        }
    }
    let residual = merit_phi(game, &x, lit(TAU_SOLVE))?.gap;
    let certified = converged && is_gne(game, &x, tol * lit(10.0))?;
    Ok(SolveReport {
        x_star: x,
        iterations,
        residual,
        trace,
        converged: certified,
        method: SolveMethod::BestResponse,
        vi_certificate: None,
        potential_mismatch: false,
    })
}

/// The weighted pseudogradient `d(x, r)`: block `i` is `r_i * grad_i J_i(x)`.
pub fn pseudogradient<S: Scalar>(
    game: &GameSpec<S>,
    r: &WeightVector<S>,
    x: &BlockVector<S>,
) -> Result<BlockVector<S>> {
    if r.len() != game.n_players() {
        return Err(GameError::InvalidSpec(
            "weight vector length must equal the player count".into(),
        ));
    }
    let blocks = (0..game.n_players())
        .map(|i| Ok(game.partial_gradient(i, x)? * r.get(i)))
        .collect::<Result<Vec<_>>>()?;
    BlockVector::new(blocks)
}

/// Jacobian of `x -> d(x, r)` for games with quadratic objectives.
pub fn pseudogradient_jacobian<S: Scalar>(
    game: &GameSpec<S>,
    r: &WeightVector<S>,
) -> Option<DMatrix<S>> {
    let n = game.total_dim();
    let mut jac = DMatrix::zeros(n, n);
    for i in 0..game.n_players() {
        let off = game.block_offset(i);
        let d = game.dims()[i];
        match game.objective(i) {
            ObjectiveSpec::Quadratic { q, .. } => {
                let rows = q.rows(off, d) * r.get(i);
                jac.rows_mut(off, d).copy_from(&rows);
            }
            ObjectiveSpec::Oracle { .. } => return None,
        }
    }
    Some(jac)
}

fn vi_residual<S: Scalar>(
    game: &GameSpec<S>,
    r: &WeightVector<S>,
    joint: &FeasibleSection<S>,
    x: &BlockVector<S>,
) -> Result<S> {
    let d = pseudogradient(game, r, x)?.flatten();
    let flat = x.flatten();
    let projected = project_polytope(&(&flat - &d), joint, lit(PROJ_TOL), PROJ_MAX_ITER)?;
    Ok((flat - projected).norm())
}

fn default_rosen_step<S: Scalar>(game: &GameSpec<S>, r: &WeightVector<S>) -> S {
    match pseudogradient_jacobian(game, r) {
        Some(jac) => {
            let bound = num_traits::Float::sqrt(spectral_bound(&(jac.transpose() * &jac)));
            if bound > lit(1e-12) {
                lit::<S>(0.1) / bound
            } else {
                S::one()
            }
        }
        None => S::one(),
    }
}

/// Projected pseudogradient iteration `x <- P(x - step d(x, r))` over the
/// joint set, with backtracking halving on residual increase. Converged
/// runs satisfy the variational-equilibrium condition within `tol`.
pub fn solve_rosen<S: Scalar + Serialize>(
    game: &GameSpec<S>,
    r: &WeightVector<S>,
    x0: &BlockVector<S>,
    step: Option<S>,
    tol: S,
    max_iter: usize,
) -> Result<SolveReport<S>> {
    let joint = FeasibleSection::joint(game)?;
    let dims = game.dims().to_vec();
    let mut flat = project_polytope(&x0.flatten(), &joint, lit(PROJ_TOL), PROJ_MAX_ITER)?;
    let mut x = BlockVector::from_flat(&dims, &flat)?;
    let mut step = step.unwrap_or_else(|| default_rosen_step(game, r));
    let mut residual = vi_residual(game, r, &joint, &x)?;
    let mut trace = vec![TracePoint {
        iteration: 0,
        residual,
        x: x.clone(),
    }];
    let mut iterations = 0;
    for iter in 0..max_iter {
        if residual <= tol {
            break;
        }
        iterations = iter + 1;
        let d = pseudogradient(game, r, &x)?.flatten();
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let candidate_flat =
                project_polytope(&(&flat - &d * step), &joint, lit(PROJ_TOL), PROJ_MAX_ITER)?;
            let candidate = BlockVector::from_flat(&dims, &candidate_flat)?;
            let candidate_residual = vi_residual(game, r, &joint, &candidate)?;
            if candidate_residual <= residual + lit(1e-15) {
                flat = candidate_flat;
                x = candidate;
                residual = candidate_residual;
                accepted = true;
                break;
            }
            step *= lit(0.5);
        }
        trace.push(TracePoint {
            iteration: iterations,
            residual,
            x: x.clone(),
        });
        if !accepted {
            break;
        }
    }
    let converged = residual <= tol;
    let vi_certificate = if converged {
        let d = pseudogradient(game, r, &x)?.flatten();
        let (_, value) = minimize_linear(&d, &joint, tol)?;
        Some(value - d.dot(&flat))
    } else {
        None
    };
    Ok(SolveReport {
        x_star: x,
        iterations,
        residual,
        trace,
        converged,
        method: SolveMethod::Rosen,
        vi_certificate,
        potential_mismatch: false,
    })
}

/// Projected-gradient minimization of a candidate potential over the joint
/// set; a certified minimizer is a Nash equilibrium of the game.
pub fn solve_potential<S: Scalar + Serialize>(
    game: &GameSpec<S>,
    pot: &PotentialSpec<S>,
    x0: &BlockVector<S>,
    tol: S,
    max_iter: usize,
) -> Result<SolveReport<S>> {
    let joint = FeasibleSection::joint(game)?;
    let dims = game.dims().to_vec();
    let mut flat = project_polytope(&x0.flatten(), &joint, lit(PROJ_TOL), PROJ_MAX_ITER)?;
    let mut lip = S::one();
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut residual = S::infinity();
    for iter in 0..max_iter {
        iterations = iter;
        let x = BlockVector::from_flat(&dims, &flat)?;
        let grad = pot.gradient(game, &x)?;
        let stationarity = {
            let p = project_polytope(&(&flat - &grad), &joint, lit(PROJ_TOL), PROJ_MAX_ITER)?;
            (&flat - &p).norm()
        };
        residual = stationarity;
        trace.push(TracePoint {
            iteration: iter,
            residual,
            x: x.clone(),
        });
        if stationarity <= tol {
            break;
        }
        let fx = pot.evaluate(game, &x)?;
        let mut moved = false;
        for _ in 0..MAX_BACKTRACKS {
            let candidate =
                project_polytope(&(&flat - &grad * (S::one() / lip)), &joint, lit(PROJ_TOL), PROJ_MAX_ITER)?;
            let d = &candidate - &flat;
            let cx = BlockVector::from_flat(&dims, &candidate)?;
            let upper = fx + grad.dot(&d) + lip * lit::<S>(0.5) * d.norm_squared();
            if pot.evaluate(game, &cx)? <= upper + lit(1e-14) {
                flat = candidate;
                moved = true;
                break;
            }
            lip *= lit(2.0);
        }
        if !moved {
            break;
        }
        lip *= lit(0.9);
    }
    let x = BlockVector::from_flat(&dims, &flat)?;
    let converged = residual <= tol;
    let potential_mismatch = if converged {
        !is_gne(game, &x, tol)?
    } else {
        false
    };
    Ok(SolveReport {
        x_star: x,
        iterations,
        residual,
        trace,
        converged,
        method: SolveMethod::Potential,
        vi_certificate: None,
        potential_mismatch,
    })
}

/// One entry of a multiplier-bias sweep.
#[derive(Debug, Clone, Serialize)]
pub struct BiasSweepEntry<S: Scalar + Serialize> {
    pub r: Vec<S>,
    pub x: BlockVector<S>,
    pub objectives: Vec<S>,
    /// Two starts agreed within `10 * tol` (a cheap necessary probe for the
    /// uniqueness guaranteed under diagonal strict convexity).
    pub unique: bool,
    pub converged: bool,
}

pub type BiasSweepOutcome<S> = (Vec<S>, Result<BiasSweepEntry<S>>);

/// Run Rosen's method per weight vector from a common start and from one
/// alternate start; flag entries whose two runs disagree.
pub fn bias_sweep<S: Scalar + Serialize>(
    game: &GameSpec<S>,
    weights: &[WeightVector<S>],
    tol: S,
) -> Result<Vec<BiasSweepOutcome<S>>> {
    let joint = FeasibleSection::joint(game)?;
    let dims = game.dims().to_vec();
    let start_a = match game.shared_set() {
        Some(set) => BlockVector::from_flat(&dims, &set.feasible_point)?,
        None => BlockVector::from_flat(&dims, &joint.anchor()?)?,
    };
    let start_b = BlockVector::from_flat(&dims, &joint.anchor()?)?;
    let max_iter = 200_000;
    let mut out = Vec::with_capacity(weights.len());
    for r in weights {
        let entry = (|| -> Result<BiasSweepEntry<S>> {
            let run_a = solve_rosen(game, r, &start_a, None, tol, max_iter)?;
            let run_b = solve_rosen(game, r, &start_b, None, tol, max_iter)?;
            let unique = run_a.x_star.sup_distance(&run_b.x_star) <= tol * lit(10.0);
            let objectives = (0..game.n_players())
                .map(|i| game.evaluate_objective(i, &run_a.x_star))
                .collect::<Result<Vec<_>>>()?;
            Ok(BiasSweepEntry {
                r: r.as_slice().to_vec(),
                x: run_a.x_star.clone(),
                objectives,
                unique,
                converged: run_a.converged && run_b.converged,
            })
        })();
        out.push((r.as_slice().to_vec(), entry));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct BiasDirectionReport<S: Scalar + Serialize> {
    pub holds: bool,
    pub value: S,
    /// Index (0-based) of the coordinate in which the weights differ.
    pub player: usize,
}

/// Directional-derivative check for two variational equilibria computed
/// under weights differing in exactly one coordinate `j` with `r_j > s_j`:
/// reports `<grad_j J_j(x^r), x_j^r - x_j^s>` and whether it is negative.
pub fn verify_bias_direction<S: Scalar + Serialize>(
    game: &GameSpec<S>,
    r: &WeightVector<S>,
    s: &WeightVector<S>,
    x_r: &BlockVector<S>,
    x_s: &BlockVector<S>,
) -> Result<BiasDirectionReport<S>> {
    if r.len() != s.len() {
        return Err(GameError::WeightCoordinateMismatch {
            differing: usize::MAX,
        });
    }
    let differing: Vec<usize> = (0..r.len()).filter(|&i| r.get(i) != s.get(i)).collect();
    if differing.len() != 1 {
        return Err(GameError::WeightCoordinateMismatch {
            differing: differing.len(),
        });
    }
    let j = differing[0];
    if !(r.get(j) > s.get(j)) {
        return Err(GameError::InvalidSpec(
            "expected r_j > s_j in the differing coordinate".into(),
        ));
    }
    let direction = x_r.block(j) - x_s.block(j);
    if direction.norm() <= lit(1e-14) {
        return Err(GameError::ZeroBiasDirection { player: j + 1 });
    }
    let grad = game.partial_gradient(j, x_r)?;
    let value = grad.dot(&direction);
    Ok(BiasDirectionReport {
        holds: value < S::zero(),
        value,
        player: j,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{build_cournot, build_cournot_potential};
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    fn bundle(x1: f64, x2: f64) -> BlockVector<f64> {
        BlockVector::new(vec![dvector![x1], dvector![x2]]).unwrap()
    }

    #[test]
    fn cournot_best_responses() {
        let g = build_cournot(4.0, 1.0, &[1.0, 1.5], Some(3.0)).unwrap();
        let y = best_response(&g, 0, &bundle(0.0, 2.0 / 3.0), 1e-10).unwrap();
        assert_relative_eq!(y[0], 7.0 / 6.0, epsilon = 1e-8);
        let g = build_cournot(4.0, 1.0, &[1.0, 1.5], Some(1.0)).unwrap();
        let y = best_response(&g, 0, &bundle(0.0, 0.25), 1e-10).unwrap();
        assert_relative_eq!(y[0], 0.75, epsilon = 1e-8);
    }

    #[test]
    fn best_response_iteration_reaches_interior_equilibrium() {
        let g = build_cournot(4.0, 1.0, &[1.0, 1.5], Some(3.0)).unwrap();
        let report =
            solve_best_response(&g, &bundle(0.0, 0.0), SweepMode::GaussSeidel, 1e-9, 500).unwrap();
        assert!(report.converged);
        assert_relative_eq!(report.x_star.block(0)[0], 7.0 / 6.0, epsilon = 1e-6);
        assert_relative_eq!(report.x_star.block(1)[0], 2.0 / 3.0, epsilon = 1e-6);
    }

    #[test]
    fn best_response_on_continuum_certifies_membership() {
        let g = build_cournot(4.0, 1.0, &[1.0, 1.5], Some(1.0)).unwrap();
        let report =
            solve_best_response(&g, &bundle(1.0, 0.0), SweepMode::GaussSeidel, 1e-9, 500).unwrap();
        assert!(report.converged);
        let x = &report.x_star;
        assert!(is_gne(&g, x, 1e-6).unwrap());
        assert_relative_eq!(x.block(0)[0] + x.block(1)[0], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn jacobi_converges_on_cournot() {
        let g = build_cournot(4.0, 1.0, &[1.0, 1.5], Some(3.0)).unwrap();
        let report =
            solve_best_response(&g, &bundle(0.0, 0.0), SweepMode::Jacobi, 1e-9, 500).unwrap();
        assert!(report.converged);
        assert_relative_eq!(report.x_star.block(0)[0], 7.0 / 6.0, epsilon = 1e-6);
    }

    #[test]
    fn pseudogradient_blocks_scale() {
        let g = build_cournot(4.0, 1.0, &[1.0, 1.5], Some(1.0)).unwrap();
        let x = bundle(0.75, 0.25);
        let d = pseudogradient(&g, &WeightVector::ones(2), &x).unwrap();
        assert_relative_eq!(d.block(0)[0], -1.25);
        assert_relative_eq!(d.block(1)[0], -1.25);
        let d = pseudogradient(&g, &WeightVector::new(vec![2.0, 1.0]).unwrap(), &x).unwrap();
        assert_relative_eq!(d.block(0)[0], -2.5);
        assert_relative_eq!(d.block(1)[0], -1.25);
    }

    #[test]
    fn rosen_finds_variational_equilibrium() {
        let g = build_cournot(4.0, 1.0, &[1.0, 1.5], Some(1.0)).unwrap();
        let report = solve_rosen(
            &g,
            &WeightVector::ones(2),
            &bundle(0.0, 0.0),
            None,
            1e-8,
            100_000,
        )
        .unwrap();
        assert!(report.converged);
        assert_relative_eq!(report.x_star.block(0)[0], 0.75, epsilon = 1e-6);
        assert_relative_eq!(report.x_star.block(1)[0], 0.25, epsilon = 1e-6);
        assert!(report.vi_certificate.unwrap() >= -1e-7);
    }

    #[test]
    fn rosen_weighting_selects_other_equilibrium() {
        // Segment stationarity with weights (1, 2): r1(x1 - 2) = r2(-x1 - 1/2)
        // gives x1 = (2 r1 - r2/2) / (r1 + r2) = 1/3.
        let g = build_cournot(4.0, 1.0, &[1.0, 1.5], Some(1.0)).unwrap();
        let report = solve_rosen(
            &g,
            &WeightVector::new(vec![1.0, 2.0]).unwrap(),
            &bundle(0.5, 0.5),
            None,
            1e-8,
            100_000,
        )
        .unwrap();
        assert!(report.converged);
        assert_relative_eq!(report.x_star.block(0)[0], 1.0 / 3.0, epsilon = 1e-6);
        assert_relative_eq!(report.x_star.block(1)[0], 2.0 / 3.0, epsilon = 1e-6);
    }

    #[test]
    fn rosen_trace_residuals_monotone() {
        let g = build_cournot(4.0, 1.0, &[1.0, 1.5], Some(1.0)).unwrap();
        let report = solve_rosen(
            &g,
            &WeightVector::ones(2),
            &bundle(0.0, 0.0),
            None,
            1e-8,
            100_000,
        )
        .unwrap();
        for pair in report.trace.windows(2) {
            assert!(pair[1].residual <= pair[0].residual + 1e-14);
        }
    }

    #[test]
    fn rosen_zero_objectives_keep_start() {
        use crate::model::{BoxBounds, ConstraintSpec};
        use nalgebra::DMatrix;
        let obj = ObjectiveSpec::Quadratic {
            q: DMatrix::zeros(2, 2),
            c: DVector::zeros(2),
            d: 0.0,
        };
        let g = GameSpec::new(
            vec![1, 1],
            vec![obj.clone(), obj],
            vec![
                BoxBounds::new(dvector![0.0], dvector![1.0]).unwrap(),
                BoxBounds::new(dvector![0.0], dvector![1.0]).unwrap(),
            ],
            ConstraintSpec::Constant,
        )
        .unwrap();
        let x0 = bundle(0.3, 0.6);
        let report = solve_rosen(&g, &WeightVector::ones(2), &x0, None, 1e-10, 100).unwrap();
        assert!(report.converged);
        assert!(report.x_star.sup_distance(&x0) <= 1e-12);
    }

    #[test]
    fn rosen_rejects_oracle_constraint_maps() {
        use crate::model::{BoxBounds, ConstraintSpec};
        use nalgebra::DMatrix;
        use std::sync::Arc;
        let obj = ObjectiveSpec::Quadratic {
            q: DMatrix::zeros(2, 2),
            c: DVector::zeros(2),
            d: 0.0,
        };
        let g = GameSpec::new(
            vec![1, 1],
            vec![obj.clone(), obj],
            vec![
                BoxBounds::new(dvector![0.0], dvector![1.0]).unwrap(),
                BoxBounds::new(dvector![0.0], dvector![1.0]).unwrap(),
            ],
            ConstraintSpec::OracleMap {
                membership: Arc::new(|_, _, _| true),
            },
        )
        .unwrap();
        let r = solve_rosen(
            &g,
            &WeightVector::ones(2),
            &bundle(0.0, 0.0),
            None,
            1e-8,
            100,
        );
        assert!(matches!(r, Err(GameError::SharedSetRequired)));
    }

    #[test]
    fn potential_solve_reaches_equilibrium_segment() {
        let g = build_cournot(4.0, 1.0, &[1.0, 1.5], Some(1.0)).unwrap();
        let pot = build_cournot_potential(4.0, 1.0, &[1.0, 1.5]).unwrap();
        let report = solve_potential(&g, &pot, &bundle(0.0, 0.0), 1e-8, 100_000).unwrap();
        assert!(report.converged);
        assert!(!report.potential_mismatch);
        assert!(is_gne(&g, &report.x_star, 1e-5).unwrap());
    }

    #[test]
    fn degenerate_potential_flags_mismatch() {
        use nalgebra::DMatrix;
        let g = build_cournot(4.0, 1.0, &[1.0, 1.5], Some(1.0)).unwrap();
        let pot = PotentialSpec {
            g: ObjectiveSpec::Quadratic {
                q: DMatrix::zeros(2, 2),
                c: DVector::zeros(2),
                d: 0.0,
            },
            forcing: ForcingTag::Identity,
        };
        let report = solve_potential(&g, &pot, &bundle(0.2, 0.3), 1e-8, 1000).unwrap();
        assert!(report.converged);
        assert!(report.potential_mismatch);
    }

    #[test]
    fn bias_sweep_selects_segment_points() {
        let g = build_cournot(4.0, 1.0, &[1.0, 1.5], Some(1.0)).unwrap();
        let weights = vec![
            WeightVector::ones(2),
            WeightVector::new(vec![1.0, 2.0]).unwrap(),
        ];
        let out = bias_sweep(&g, &weights, 1e-8).unwrap();
        let expected_x1 = [0.75, 1.0 / 3.0];
        for (k, (_, entry)) in out.iter().enumerate() {
            let entry = entry.as_ref().unwrap();
            assert!(entry.converged && entry.unique);
            assert_relative_eq!(entry.x.block(0)[0], expected_x1[k], epsilon = 1e-5);
        }
    }

    #[test]
    fn bias_sweep_empty_weights() {
        let g = build_cournot(4.0, 1.0, &[1.0, 1.5], Some(1.0)).unwrap();
        assert!(bias_sweep(&g, &[], 1e-8).unwrap().is_empty());
    }

    #[test]
    fn bias_direction_on_cournot() {
        let g = build_cournot(4.0, 1.0, &[1.0, 1.5], Some(1.0)).unwrap();
        let r = WeightVector::ones(2);
        let s = WeightVector::new(vec![1.0, 0.8]).unwrap();
        let x_r = bundle(0.75, 0.25);
        let x_s = bundle(8.0 / 9.0, 1.0 / 9.0);
        let report = verify_bias_direction(&g, &r, &s, &x_r, &x_s).unwrap();
        assert!(report.holds);
        assert_eq!(report.player, 1);
        assert_relative_eq!(report.value, -1.25 * (0.25 - 1.0 / 9.0), epsilon = 1e-10);
    }

    #[test]
    fn bias_direction_precondition_errors() {
        let g = build_cournot(4.0, 1.0, &[1.0, 1.5], Some(1.0)).unwrap();
        let r = WeightVector::new(vec![2.0, 2.0]).unwrap();
        let s = WeightVector::ones(2);
        let x = bundle(0.75, 0.25);
        assert!(matches!(
            verify_bias_direction(&g, &r, &s, &x, &x),
            Err(GameError::WeightCoordinateMismatch { differing: 2 })
        ));
        let r = WeightVector::new(vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            verify_bias_direction(&g, &r, &s, &x, &x),
            Err(GameError::ZeroBiasDirection { .. })
        ));
    }
}
