//! Nikaido-Isoda function, merit/gap computation, equilibrium
//! certification, and QVI residuals.

use nalgebra::DVector;
use serde::Serialize;

use crate::block::BlockVector;
use crate::error::{GameError, Result};
use crate::model::{GameSpec, ObjectiveSpec};
use crate::scalar::{lit, Scalar};
use crate::sections::{minimize_linear, minimize_quadratic, minimize_smooth, FeasibleSection};

/// Default tolerance for inner block solves.
pub const TAU_SOLVE: f64 = 1e-8;
/// Default tolerance for equilibrium certification (one order of slack
/// above the inner solves).
pub const CERT_TOL: f64 = 1e-6;

/// Result of a merit-function evaluation at a bundle `x`.
#[derive(Debug, Clone, Serialize)]
pub struct GapReport<S: Scalar + Serialize> {
    /// `Psi(x, x)`: the diagonal value, i.e. the sum of the objectives.
    pub psi_xx: S,
    /// `Phi(x) = min_y Psi(x, y)` over the frozen feasible sections.
    pub phi: S,
    /// `Psi(x, x) - Phi(x)`, zero exactly at equilibria among fixed points.
    pub gap: S,
    /// How much each player can improve by a unilateral feasible deviation.
    pub per_player_improvement: Vec<S>,
    /// A minimizer of `Psi(x, .)`.
    pub argmin: BlockVector<S>,
    pub fixed_point: bool,
}

/// The Nikaido-Isoda function `Psi(x, y) = sum_i J_i(y_i, x_{-i})`.
pub fn psi<S: Scalar>(game: &GameSpec<S>, x: &BlockVector<S>, y: &BlockVector<S>) -> Result<S> {
    let mut total = S::zero();
    for i in 0..game.n_players() {
        let deviated = x.replace_block(i, y.block(i).clone())?;
        total += game.evaluate_objective(i, &deviated)?;
    }
    Ok(total)
}

/// Best unilateral response value and minimizer for one player with the
/// opponents frozen at `x`.
pub(crate) fn block_minimum<S: Scalar>(
    game: &GameSpec<S>,
    i: usize,
    x: &BlockVector<S>,
    section: &FeasibleSection<S>,
    tol: S,
) -> Result<(DVector<S>, S)> {
    let y = match game.objective(i) {
        ObjectiveSpec::Quadratic { q, .. } => {
            let off = game.block_offset(i);
            let d = game.dims()[i];
            let own = q.view((off, off), (d, d)).into_owned();
            // Linear term of y_i -> J_i(y_i, x_{-i}): the own-block gradient
            // with block i zeroed out.
            let zeroed = x.replace_block(i, DVector::zeros(d))?;
            let lin = game.partial_gradient(i, &zeroed)?;
            minimize_quadratic(&own, &lin, section, tol)?
        }
        ObjectiveSpec::Oracle { .. } => {
            let f = |y_i: &DVector<S>| {
                let bundle = x.replace_block(i, y_i.clone()).expect("dims fixed");
                game.evaluate_objective(i, &bundle).expect("dims fixed")
            };
            let grad = |y_i: &DVector<S>| {
                let bundle = x.replace_block(i, y_i.clone()).expect("dims fixed");
                game.partial_gradient(i, &bundle).expect("gradient checked")
            };
            // Fail early if no gradient oracle exists.
            game.partial_gradient(i, x)?;
            minimize_smooth(f, grad, section, tol, crate::sections::DEFAULT_MAX_ITER)?
        }
    };
    let value = game.evaluate_objective(i, &x.replace_block(i, y.clone())?)?;
    Ok((y, value))
}

/// The merit function `Phi(x)` and the associated gap report. Since
/// `Psi(x, .)` separates across players and the feasible set is a product,
/// the minimization is solved block by block.
pub fn merit_phi<S: Scalar + Serialize>(
    game: &GameSpec<S>,
    x: &BlockVector<S>,
    tol: S,
) -> Result<GapReport<S>> {
    if !(tol > S::zero()) {
        return Err(GameError::InvalidSpec("tolerance must be positive".into()));
    }
    let n = game.n_players();
    let mut psi_xx = S::zero();
    let mut phi = S::zero();
    let mut improvements = Vec::with_capacity(n);
    let mut argmin_blocks = Vec::with_capacity(n);
    for i in 0..n {
        let section = FeasibleSection::freeze(game, i, x)?;
        let current = game.evaluate_objective(i, x)?;
        let (y_i, best) = block_minimum(game, i, x, &section, tol)?;
        psi_xx += current;
        phi += best;
        improvements.push(current - best);
        argmin_blocks.push(y_i);
    }
    let argmin = BlockVector::new(argmin_blocks)?;
    Ok(GapReport {
        psi_xx,
        phi,
        gap: psi_xx - phi,
        per_player_improvement: improvements,
        argmin,
        fixed_point: game.is_fixed_point(x),
    })
}

/// Is `x` a generalized Nash equilibrium: a feasible fixed point whose
/// merit gap is below `tol`?
pub fn is_gne<S: Scalar + Serialize>(game: &GameSpec<S>, x: &BlockVector<S>, tol: S) -> Result<bool> {
    if !game.is_fixed_point(x) {
        return Ok(false);
    }
    let report = merit_phi(game, x, lit::<S>(TAU_SOLVE))?;
    Ok(report.gap <= tol)
}

/// Optimal value of the linearized deviation problem
/// `min_y sum_i <grad_i J_i(x), y_i - x_i>` over the frozen sections.
/// A value above `-tol` certifies the first-order equilibrium condition.
pub fn qvi_residual<S: Scalar>(game: &GameSpec<S>, x: &BlockVector<S>) -> Result<S> {
    let mut total = S::zero();
    for i in 0..game.n_players() {
        let section = FeasibleSection::freeze(game, i, x)?;
        let g = game.partial_gradient(i, x)?;
        let (_, value) = minimize_linear(&g, &section, lit(TAU_SOLVE))?;
        total += value - g.dot(x.block(i));
    }
    Ok(total)
}
