//! Built-in game constructors: Cournot competition with an optional shared
//! capacity, a discretized heat-equation spot market, and a seeded random
//! jointly-convex generator.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::equilibrium::{ForcingTag, PotentialSpec};
use crate::error::{GameError, Result};
use crate::model::{BoxBounds, ConstraintSpec, GameSpec, ObjectiveSpec, SharedSet};
use crate::scalar::{as_f64, lit, Scalar};

/// Two-or-more-firm Cournot market: inverse demand `eta - p * sum(x)`,
/// unit costs `c_i`, optional shared capacity `sum(x) <= cap`.
///
/// Player `i` minimizes `J_i(x) = -x_i (eta - c_i - p * sum(x))`, i.e. the
/// negative profit, written as a quadratic over the full strategy vector.
pub fn build_cournot<S: Scalar>(
    eta: S,
    p: S,
    costs: &[S],
    cap: Option<S>,
) -> Result<GameSpec<S>> {
    if !(p > S::zero()) {
        return Err(GameError::InvalidSpec("price slope p must be positive".into()));
    }
    let n = costs.len();
    if n < 2 {
        return Err(GameError::InvalidSpec("need at least two firms".into()));
    }
    for (i, c) in costs.iter().enumerate() {
        if !(*c > S::zero() && *c < eta) {
            return Err(GameError::InvalidSpec(format!(
                "cost of firm {} must satisfy 0 < c < eta",
                i + 1
            )));
        }
    }
    if let Some(cap) = cap {
        if !(cap > S::zero()) {
            return Err(GameError::InvalidSpec("capacity must be positive".into()));
        }
    }
    // Any equilibrium output satisfies x_i <= (eta - c_i) / (2p) < eta / p,
    // so the box bound is never active.
    let bound = eta / p;
    let two = lit::<S>(2.0);
    let mut objectives = Vec::with_capacity(n);
    for i in 0..n {
        let mut q = DMatrix::zeros(n, n);
        q[(i, i)] = two * p;
        for j in 0..n {
            if j != i {
                q[(i, j)] = p;
                q[(j, i)] = p;
            }
        }
        let mut c = DVector::zeros(n);
        c[i] = -(eta - costs[i]);
        objectives.push(ObjectiveSpec::Quadratic { q, c, d: S::zero() });
    }
    let boxes = (0..n)
        .map(|_| BoxBounds::new(DVector::zeros(1), DVector::from_element(1, bound)))
        .collect::<Result<Vec<_>>>()?;
    let constraints = match cap {
        Some(cap) => {
            let a = DMatrix::from_element(1, n, S::one());
            let b = DVector::from_element(1, cap);
            ConstraintSpec::Shared(SharedSet::new(a, b, DVector::zeros(n))?)
        }
        None => ConstraintSpec::Constant,
    };
    GameSpec::new(vec![1; n], objectives, boxes, constraints)
}

/// Exact potential for the Cournot game:
/// `G(x) = sum_i [p x_i^2 - (eta - c_i) x_i] + p * sum_{i<j} x_i x_j`,
/// whose own-block gradients coincide with the players' gradients.
pub fn build_cournot_potential<S: Scalar>(
    eta: S,
    p: S,
    costs: &[S],
) -> Result<PotentialSpec<S>> {
    let n = costs.len();
    if n < 2 {
        return Err(GameError::InvalidSpec("need at least two firms".into()));
    }
    let two = lit::<S>(2.0);
    let mut q = DMatrix::from_element(n, n, p);
    for i in 0..n {
        q[(i, i)] = two * p;
    }
    let c = DVector::from_iterator(n, costs.iter().map(|ci| -(eta - *ci)));
    Ok(PotentialSpec {
        g: ObjectiveSpec::Quadratic { q, c, d: S::zero() },
        forcing: ForcingTag::Identity,
    })
}

/// Configuration of the discretized heat-equation spot market on the unit
/// interval with homogeneous Dirichlet conditions and zero initial state.
#[derive(Debug, Clone)]
pub struct HeatMarketConfig<S: Scalar> {
    /// Interior grid points M (M >= 3).
    pub grid_points: usize,
    /// Implicit-Euler time steps T (T >= 2).
    pub time_steps: usize,
    pub horizon: S,
    /// Per-player control caps `u_i <= cap_i`.
    pub caps: Vec<S>,
    /// Global state cap `y <= y_max`.
    pub state_cap: S,
    /// Per-player buffers; player i enforces `y <= y_max - buffer_i`.
    pub buffers: Vec<S>,
    /// Constant tracking target for the state.
    pub target: S,
    /// Per-player control regularization weights.
    pub regularization: Vec<S>,
}

impl<S: Scalar> HeatMarketConfig<S> {
    fn validate(&self, n_players: usize) -> Result<()> {
        if self.grid_points < 3 {
            return Err(GameError::InvalidSpec("need at least 3 grid points".into()));
        }
        if self.time_steps < 2 {
            return Err(GameError::InvalidSpec("need at least 2 time steps".into()));
        }
        if !(self.horizon > S::zero()) {
            return Err(GameError::InvalidSpec("horizon must be positive".into()));
        }
        if self.caps.len() != n_players
            || self.buffers.len() != n_players
            || self.regularization.len() != n_players
        {
            return Err(GameError::InvalidSpec(
                "caps, buffers, and regularization need one entry per player".into(),
            ));
        }
        for b in &self.buffers {
            if !(*b >= S::zero() && *b < self.state_cap) {
                return Err(GameError::InvalidSpec(
                    "buffers must be nonnegative and below the state cap".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Dense solution operator of the implicit-Euler heat discretization: maps
/// a stacked space-time source (time-major, dimension M*T) to the stacked
/// state trajectory.
pub fn heat_solution_matrix<S: Scalar>(cfg: &HeatMarketConfig<S>) -> Result<DMatrix<S>> {
    let m = cfg.grid_points;
    let t_steps = cfg.time_steps;
    let h = S::one() / lit::<S>((m + 1) as f64);
    let dt = cfg.horizon / lit::<S>(t_steps as f64);
    let two = lit::<S>(2.0);
    // B = I + dt * A with A the 1-D Dirichlet Laplacian stencil.
    let mut b = DMatrix::zeros(m, m);
    let scale = dt / (h * h);
    for k in 0..m {
        b[(k, k)] = S::one() + two * scale;
        if k + 1 < m {
            b[(k, k + 1)] = -scale;
            b[(k + 1, k)] = -scale;
        }
    }
    let b_inv = b.try_inverse().ok_or_else(|| {
        GameError::InvalidSpec("heat discretization matrix is singular".into())
    })?;
    // y^t = B^{-1} (y^{t-1} + dt u^t), y^0 = 0, so the (t, s) block of the
    // stacked operator is dt * B^{-(t-s+1)} for s <= t.
    let mut powers = Vec::with_capacity(t_steps);
    powers.push(&b_inv * dt);
    for k in 1..t_steps {
        let next = &b_inv * &powers[k - 1];
        powers.push(next);
    }
    let dim = m * t_steps;
    let mut s_mat = DMatrix::zeros(dim, dim);
    for t in 0..t_steps {
        for s in 0..=t {
            s_mat
                .view_mut((t * m, s * m), (m, m))
                .copy_from(&powers[t - s]);
        }
    }
    Ok(s_mat)
}

/// Discretized spot market: each player sources heat subject to a shared,
/// individually buffered state cap, and tracks the target profile.
pub fn build_heat_market<S: Scalar>(
    cfg: &HeatMarketConfig<S>,
    n_players: usize,
) -> Result<GameSpec<S>> {
    if n_players < 2 {
        return Err(GameError::InvalidSpec("need at least two players".into()));
    }
    cfg.validate(n_players)?;
    let s_mat = heat_solution_matrix(cfg)?;
    let dim = s_mat.nrows();
    let total = dim * n_players;
    let y_d = DVector::from_element(dim, cfg.target);
    let p = s_mat.transpose() * &s_mat;
    let st_yd = s_mat.transpose() * &y_d;
    let half = lit::<S>(0.5);

    let mut objectives = Vec::with_capacity(n_players);
    for i in 0..n_players {
        // J_i(u) = 1/2 |S sum_j u_j - y_d|^2 + alpha_i/2 |u_i|^2.
        let mut q = DMatrix::zeros(total, total);
        for bj in 0..n_players {
            for bk in 0..n_players {
                q.view_mut((bj * dim, bk * dim), (dim, dim)).copy_from(&p);
            }
        }
        for k in 0..dim {
            q[(i * dim + k, i * dim + k)] += cfg.regularization[i];
        }
        let mut c = DVector::zeros(total);
        for bj in 0..n_players {
            c.rows_mut(bj * dim, dim).copy_from(&(-&st_yd));
        }
        objectives.push(ObjectiveSpec::Quadratic {
            q,
            c,
            d: half * y_d.norm_squared(),
        });
    }

    let boxes = (0..n_players)
        .map(|i| {
            BoxBounds::new(
                DVector::zeros(dim),
                DVector::from_element(dim, cfg.caps[i]),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    // One row per (player, space-time index): (S sum_j u_j)_k <= y_max - buffer_i.
    let mut a = DMatrix::zeros(n_players * dim, total);
    let mut b = DVector::zeros(n_players * dim);
    for i in 0..n_players {
        for k in 0..dim {
            let row = i * dim + k;
            for bj in 0..n_players {
                a.view_mut((row, bj * dim), (1, dim))
                    .copy_from(&s_mat.row(k));
            }
            b[row] = cfg.state_cap - cfg.buffers[i];
        }
    }
    let constraints = ConstraintSpec::Shared(SharedSet::new(a, b, DVector::zeros(total))?);
    GameSpec::new(vec![dim; n_players], objectives, boxes, constraints)
}

/// Seeded random jointly-convex quadratic game: PSD own-blocks, bounded
/// boxes, and a shared polytope with a certified interior point. The
/// construction boosts the own-block curvature until the symmetrized
/// pseudogradient Jacobian is positive definite, so the game is diagonally
/// strictly convex at unit weights.
pub fn build_random_jointly_convex<S: Scalar>(
    n_players: usize,
    dims: &[usize],
    density: f64,
    seed: u64,
) -> Result<GameSpec<S>> {
    if n_players < 2 || dims.len() != n_players {
        return Err(GameError::InvalidSpec(
            "need at least two players and one dimension per player".into(),
        ));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(GameError::InvalidSpec("density must lie in (0, 1]".into()));
    }
    let ridge = lit::<S>(1e-3);
    let total: usize = dims.iter().sum();
    let offsets: Vec<usize> = dims
        .iter()
        .scan(0usize, |acc, &d| {
            let o = *acc;
            *acc += d;
            Some(o)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut objectives_qc: Vec<(DMatrix<S>, DVector<S>)> = Vec::with_capacity(n_players);
    for i in 0..n_players {
        let d = dims[i];
        let mut factor = DMatrix::zeros(d, d);
        for r in 0..d {
            for cidx in 0..d {
                factor[(r, cidx)] = lit::<S>(rng.gen_range(-1.0..1.0));
            }
        }
        let own = factor.transpose() * &factor + DMatrix::identity(d, d) * ridge;
        let mut q = DMatrix::zeros(total, total);
        q.view_mut((offsets[i], offsets[i]), (d, d)).copy_from(&own);
        for j in 0..n_players {
            if j == i {
                continue;
            }
            for r in 0..d {
                for cidx in 0..dims[j] {
                    if rng.gen::<f64>() < density {
                        let v = lit::<S>(rng.gen_range(-0.05..0.05));
                        q[(offsets[i] + r, offsets[j] + cidx)] = v;
                        q[(offsets[j] + cidx, offsets[i] + r)] = v;
                    }
                }
            }
        }
        let c = DVector::from_iterator(total, (0..total).map(|_| lit::<S>(rng.gen_range(-0.5..0.5))));
        objectives_qc.push((q, c));
    }

    // Boost own-block curvature until the symmetrized pseudogradient
    // Jacobian is positive definite at unit weights.
    loop {
        let mut jac = DMatrix::zeros(total, total);
        for i in 0..n_players {
            let rows = objectives_qc[i].0.rows(offsets[i], dims[i]).into_owned();
            jac.rows_mut(offsets[i], dims[i]).copy_from(&rows);
        }
        let sym = &jac + jac.transpose();
        let min_eig = sym
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |m, v| m.min(as_f64(*v)));
        if min_eig > 2.0 * as_f64(ridge) {
            break;
        }
        let boost = lit::<S>((2e-3 - min_eig / 2.0).max(1e-3));
        for i in 0..n_players {
            for k in 0..dims[i] {
                let idx = offsets[i] + k;
                objectives_qc[i].0[(idx, idx)] += boost;
            }
        }
    }

    let objectives = objectives_qc
        .into_iter()
        .map(|(q, c)| ObjectiveSpec::Quadratic { q, c, d: S::zero() })
        .collect();

    let mut boxes = Vec::with_capacity(n_players);
    for &d in dims {
        let lo = DVector::from_iterator(d, (0..d).map(|_| lit::<S>(rng.gen_range(-1.0..-0.2))));
        let hi = DVector::from_iterator(d, (0..d).map(|_| lit::<S>(rng.gen_range(0.2..1.0))));
        boxes.push(BoxBounds::new(lo, hi)?);
    }

    let midpoint = {
        let mut v = DVector::zeros(total);
        for (i, bx) in boxes.iter().enumerate() {
            v.rows_mut(offsets[i], dims[i]).copy_from(&bx.midpoint());
        }
        v
    };
    let n_rows = total;
    let mut a = DMatrix::zeros(n_rows, total);
    let mut b = DVector::zeros(n_rows);
    for r in 0..n_rows {
        let mut row = DVector::from_iterator(total, (0..total).map(|_| lit::<S>(rng.gen_range(-1.0..1.0))));
        let norm = row.norm();
        if norm > lit(1e-12) {
            row /= norm;
        }
        a.row_mut(r).copy_from(&row.transpose());
        b[r] = row.dot(&midpoint) + lit::<S>(rng.gen_range(0.1..0.5));
    }
    let constraints = ConstraintSpec::Shared(SharedSet::new(a, b, midpoint)?);
    GameSpec::new(dims.to_vec(), objectives, boxes, constraints)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::BlockVector;
    use crate::model::WeightVector;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    #[test]
    fn cournot_unconstrained_equilibrium() {
        let g = build_cournot(4.0, 1.0, &[1.0, 1.5], None).unwrap();
        // Intersection of the best-response lines: (7/6, 2/3).
        let x = BlockVector::new(vec![dvector![7.0 / 6.0], dvector![2.0 / 3.0]]).unwrap();
        for i in 0..2 {
            assert_relative_eq!(g.partial_gradient(i, &x).unwrap()[0], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn cournot_symmetric_case() {
        let g = build_cournot(2.0, 1.0, &[1.0, 1.0], None).unwrap();
        let x = BlockVector::new(vec![dvector![1.0 / 3.0], dvector![1.0 / 3.0]]).unwrap();
        for i in 0..2 {
            assert_relative_eq!(g.partial_gradient(i, &x).unwrap()[0], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn cournot_rejects_bad_costs() {
        assert!(build_cournot(4.0, 1.0, &[1.0, 5.0], None).is_err());
        assert!(build_cournot(4.0, -1.0, &[1.0, 1.5], None).is_err());
    }

    #[test]
    fn potential_gradients_match_objectives() {
        let g = build_cournot(4.0, 1.0, &[1.0, 1.5], Some(1.0)).unwrap();
        let pot = build_cournot_potential(4.0, 1.0, &[1.0, 1.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x = BlockVector::new(vec![
                dvector![rng.gen_range(0.0..4.0)],
                dvector![rng.gen_range(0.0..4.0)],
            ])
            .unwrap();
            let grad = pot.gradient(&g, &x).unwrap();
            for i in 0..2 {
                let gi = g.partial_gradient(i, &x).unwrap();
                assert!((grad[i] - gi[0]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn potential_value_at_reference_point() {
        let g = build_cournot(4.0, 1.0, &[1.0, 1.5], Some(1.0)).unwrap();
        let pot = build_cournot_potential(4.0, 1.0, &[1.0, 1.5]).unwrap();
        let x = BlockVector::new(vec![dvector![0.75], dvector![0.25]]).unwrap();
        assert_relative_eq!(pot.evaluate(&g, &x).unwrap(), -2.0625, epsilon = 1e-12);
    }

    #[test]
    fn potential_symmetric_under_player_swap() {
        let g = build_cournot(3.0, 1.0, &[1.0, 1.0], None).unwrap();
        let pot = build_cournot_potential(3.0, 1.0, &[1.0, 1.0]).unwrap();
        let a = BlockVector::new(vec![dvector![0.3], dvector![0.8]]).unwrap();
        let b = BlockVector::new(vec![dvector![0.8], dvector![0.3]]).unwrap();
        assert_relative_eq!(
            pot.evaluate(&g, &a).unwrap(),
            pot.evaluate(&g, &b).unwrap(),
            epsilon = 1e-12
        );
    }

    fn small_cfg() -> HeatMarketConfig<f64> {
        HeatMarketConfig {
            grid_points: 5,
            time_steps: 4,
            horizon: 1.0,
            caps: vec![1.0, 1.0],
            state_cap: 0.4,
            buffers: vec![0.05, 0.05],
            target: 0.2,
            regularization: vec![1.0, 1.0],
        }
    }

    #[test]
    fn zero_controls_give_zero_state() {
        let cfg = small_cfg();
        let g = build_heat_market(&cfg, 2).unwrap();
        let x = BlockVector::zeros(g.dims());
        assert!(g.is_fixed_point(&x));
        // All cap rows are slack at zero source.
        let set = g.shared_set().unwrap();
        let ax = &set.a * x.flatten();
        for (lhs, rhs) in ax.iter().zip(set.b.iter()) {
            assert!(*lhs < *rhs - 0.3);
        }
    }

    #[test]
    fn heat_operator_is_linear() {
        let cfg = small_cfg();
        let s = heat_solution_matrix(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let u = DVector::from_iterator(s.ncols(), (0..s.ncols()).map(|_| rng.gen::<f64>()));
            let v = DVector::from_iterator(s.ncols(), (0..s.ncols()).map(|_| rng.gen::<f64>()));
            let lambda = rng.gen_range(-2.0..2.0);
            assert_relative_eq!(
                (&s * (&u + &v) - (&s * &u + &s * &v)).norm(),
                0.0,
                epsilon = 1e-12
            );
            assert_relative_eq!(
                (&s * (&u * lambda) - (&s * &u) * lambda).norm(),
                0.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn unit_source_profile_symmetric_and_monotone() {
        let cfg = small_cfg();
        let s = heat_solution_matrix(&cfg).unwrap();
        let m = cfg.grid_points;
        let u = DVector::from_element(s.ncols(), 1.0);
        let y = &s * &u;
        let mut prev_max = 0.0;
        for t in 0..cfg.time_steps {
            let slice = y.rows(t * m, m);
            for k in 0..m {
                assert_relative_eq!(slice[k], slice[m - 1 - k], epsilon = 1e-12);
            }
            let max = slice.iter().cloned().fold(0.0_f64, f64::max);
            assert!(max > prev_max);
            prev_max = max;
        }
    }

    #[test]
    fn random_game_is_deterministic_in_seed() {
        let a: GameSpec<f64> = build_random_jointly_convex(2, &[3, 3], 0.5, 42).unwrap();
        let b: GameSpec<f64> = build_random_jointly_convex(2, &[3, 3], 0.5, 42).unwrap();
        for i in 0..2 {
            let (ObjectiveSpec::Quadratic { q: qa, c: ca, .. }, ObjectiveSpec::Quadratic { q: qb, c: cb, .. }) =
                (a.objective(i), b.objective(i))
            else {
                panic!("expected quadratic objectives");
            };
            assert_eq!(qa, qb);
            assert_eq!(ca, cb);
            assert_eq!(a.box_bounds(i), b.box_bounds(i));
        }
        assert_eq!(a.shared_set().unwrap(), b.shared_set().unwrap());
    }

    #[test]
    fn random_game_own_blocks_have_ridge_curvature() {
        let g: GameSpec<f64> = build_random_jointly_convex(2, &[3, 2], 0.7, 7).unwrap();
        for i in 0..2 {
            let ObjectiveSpec::Quadratic { q, .. } = g.objective(i) else {
                panic!("expected quadratic");
            };
            let off = g.block_offset(i);
            let d = g.dims()[i];
            let own = q.view((off, off), (d, d)).into_owned();
            let min = own
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            assert!(min >= 1e-3 - 1e-12);
        }
    }

    #[test]
    fn rosen_converges_on_seeded_random_instances() {
        use crate::equilibrium::solve_rosen;
        for seed in 0..10 {
            let g: GameSpec<f64> = build_random_jointly_convex(2, &[3, 3], 0.5, seed).unwrap();
            let x0 = BlockVector::from_flat(
                g.dims(),
                &g.shared_set().unwrap().feasible_point.clone(),
            )
            .unwrap();
            let report = solve_rosen(&g, &WeightVector::ones(2), &x0, None, 1e-6, 50_000)
                .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
            assert!(report.converged, "seed {seed} residual {}", report.residual);
        }
    }
}
