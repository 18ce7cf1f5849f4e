//! Game model: objectives, admissible boxes, constraint maps, and the
//! evaluation/feasibility primitives built on them.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_traits::Float;

use crate::block::BlockVector;
use crate::error::{GameError, Result};
use crate::scalar::{as_f64, lit, Scalar};

/// Absolute feasibility tolerance applied to every inequality row.
pub const TAU_FEAS: f64 = 1e-9;

pub type EvalFn<S> = Arc<dyn Fn(&BlockVector<S>) -> S + Send + Sync>;
pub type PartialGradFn<S> = Arc<dyn Fn(usize, &BlockVector<S>) -> DVector<S> + Send + Sync>;
pub type MembershipFn<S> = Arc<dyn Fn(usize, &DVector<S>, &BlockVector<S>) -> bool + Send + Sync>;

/// One player's objective.
#[derive(Clone)]
pub enum ObjectiveSpec<S: Scalar> {
    /// `J_i(x) = 1/2 x'Qx + c'x + d` over the full concatenated vector, so
    /// cross-player couplings need no special encoding.
    Quadratic {
        q: DMatrix<S>,
        c: DVector<S>,
        d: S,
    },
    /// Black-box objective, optionally with an own-block gradient.
    Oracle {
        evaluate: EvalFn<S>,
        partial_gradient: Option<PartialGradFn<S>>,
    },
}

impl<S: Scalar> fmt::Debug for ObjectiveSpec<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectiveSpec::Quadratic { q, c, d } => f
                .debug_struct("Quadratic")
                .field("q", q)
                .field("c", c)
                .field("d", d)
                .finish(),
            ObjectiveSpec::Oracle { .. } => f.write_str("Oracle"),
        }
    }
}

/// Per-player admissible box `X_i^ad` (always bounded).
#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds<S: Scalar> {
    pub lo: DVector<S>,
    pub hi: DVector<S>,
}

impl<S: Scalar> BoxBounds<S> {
    pub fn new(lo: DVector<S>, hi: DVector<S>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(GameError::InvalidSpec(
                "box bounds have different lengths".into(),
            ));
        }
        for (l, h) in lo.iter().zip(hi.iter()) {
            if !Float::is_finite(*l) || !Float::is_finite(*h) {
                return Err(GameError::InvalidSpec(
                    "box bounds must be finite (admissible sets are bounded)".into(),
                ));
            }
            if *l > *h {
                return Err(GameError::InvalidSpec("empty box: lo > hi".into()));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, v: &DVector<S>, tol: S) -> bool {
        v.iter()
            .zip(self.lo.iter().zip(self.hi.iter()))
            .all(|(x, (l, h))| *x >= *l - tol && *x <= *h + tol)
    }

    pub fn midpoint(&self) -> DVector<S> {
        (&self.lo + &self.hi) * lit::<S>(0.5)
    }
}

/// Shared polytope `C = {x : Ax <= b}` (rows encode `a.x <= b`), inducing
/// per-player constraint maps by slicing at the opponents' strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedSet<S: Scalar> {
    pub a: DMatrix<S>,
    pub b: DVector<S>,
    /// Certifies nonemptiness; also the default solver start.
    pub feasible_point: DVector<S>,
}

impl<S: Scalar> SharedSet<S> {
    pub fn new(a: DMatrix<S>, b: DVector<S>, feasible_point: DVector<S>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(GameError::InvalidSpec(
                "shared set: row count of A must match length of b".into(),
            ));
        }
        if a.ncols() != feasible_point.len() {
            return Err(GameError::InvalidSpec(
                "shared set: feasible point dimension must match A columns".into(),
            ));
        }
        let set = Self { a, b, feasible_point };
        if !set.contains(&set.feasible_point.clone(), lit(TAU_FEAS)) {
            return Err(GameError::InvalidSpec(
                "shared set: stored feasible point violates the inequalities".into(),
            ));
        }
        Ok(set)
    }

    pub fn contains(&self, x: &DVector<S>, tol: S) -> bool {
        let ax = &self.a * x;
        ax.iter().zip(self.b.iter()).all(|(lhs, rhs)| *lhs <= *rhs + tol)
    }
}

/// Constraint-map specification for the whole game.
#[derive(Clone)]
pub enum ConstraintSpec<S: Scalar> {
    /// Feasible sets are the admissible boxes only.
    Constant,
    /// Shared polytope sliced per player.
    Shared(SharedSet<S>),
    /// Black-box membership test `(i, x_i, x_{-i}) -> bool`; per-player
    /// convexity of the sections is asserted by the caller.
    OracleMap { membership: MembershipFn<S> },
}

impl<S: Scalar> fmt::Debug for ConstraintSpec<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintSpec::Constant => f.write_str("Constant"),
            ConstraintSpec::Shared(s) => f.debug_tuple("Shared").field(s).finish(),
            ConstraintSpec::OracleMap { .. } => f.write_str("OracleMap"),
        }
    }
}

/// Strictly positive per-player weights for the pseudogradient.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector<S: Scalar>(Vec<S>);

impl<S: Scalar> WeightVector<S> {
    pub fn new(r: Vec<S>) -> Result<Self> {
        for (i, v) in r.iter().enumerate() {
            if !(*v > S::zero()) || !Float::is_finite(*v) {
                return Err(GameError::InvalidWeight {
                    index: i,
                    value: as_f64(*v),
                });
            }
        }
        Ok(Self(r))
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![S::one(); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> S {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[S] {
        &self.0
    }
}

/// The game `G = (X, J)`: N players, objectives, admissible boxes, and a
/// constraint map.
#[derive(Debug, Clone)]
pub struct GameSpec<S: Scalar> {
    dims: Vec<usize>,
    objectives: Vec<ObjectiveSpec<S>>,
    boxes: Vec<BoxBounds<S>>,
    constraints: ConstraintSpec<S>,
}

impl<S: Scalar> GameSpec<S> {
    pub fn new(
        dims: Vec<usize>,
        objectives: Vec<ObjectiveSpec<S>>,
        boxes: Vec<BoxBounds<S>>,
        constraints: ConstraintSpec<S>,
    ) -> Result<Self> {
        let n = dims.len();
        if n < 2 {
            return Err(GameError::InvalidSpec(
                "a generalized game needs N > 1 players".into(),
            ));
        }
        if objectives.len() != n || boxes.len() != n {
            return Err(GameError::InvalidSpec(
                "objectives and boxes must have one entry per player".into(),
            ));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(GameError::InvalidSpec("zero-dimensional block".into()));
        }
        for (i, (bx, &d)) in boxes.iter().zip(&dims).enumerate() {
            if bx.dim() != d {
                return Err(GameError::DimensionMismatch {
                    player: i + 1,
                    expected: d,
                    got: bx.dim(),
                });
            }
        }
        let total: usize = dims.iter().sum();
        let game = Self {
            dims,
            objectives,
            boxes,
            constraints,
        };
        for i in 0..n {
            game.validate_objective(i, total)?;
        }
        if let ConstraintSpec::Shared(set) = &game.constraints {
            if set.a.ncols() != total {
                return Err(GameError::InvalidSpec(
                    "shared set column count must equal the total dimension".into(),
                ));
            }
        }
        Ok(game)
    }

    fn validate_objective(&self, i: usize, total: usize) -> Result<()> {
        if let ObjectiveSpec::Quadratic { q, c, .. } = &self.objectives[i] {
            if q.nrows() != total || q.ncols() != total || c.len() != total {
                return Err(GameError::DimensionMismatch {
                    player: i + 1,
                    expected: total,
                    got: q.nrows(),
                });
            }
            let sym_tol = lit::<S>(1e-8);
            for r in 0..total {
                for s in (r + 1)..total {
                    if Float::abs(q[(r, s)] - q[(s, r)]) > sym_tol {
                        return Err(GameError::InvalidSpec(format!(
                            "player {} quadratic term is not symmetric at ({r},{s})",
                            i + 1
                        )));
                    }
                }
            }
            // Convexity in the own variable: the (i,i) diagonal block must be PSD.
            let off = self.block_offset(i);
            let d = self.dims[i];
            let own = q.view((off, off), (d, d)).into_owned();
            let eig = own.symmetric_eigen();
            let min = eig
                .eigenvalues
                .iter()
                .fold(S::infinity(), |m, &v| Float::min(m, v));
            if min < -sym_tol {
                return Err(GameError::NotConvex {
                    player: i + 1,
                    curvature: as_f64(min),
                });
            }
        }
        Ok(())
    }

    pub fn n_players(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn block_offset(&self, i: usize) -> usize {
        self.dims[..i].iter().sum()
    }

    pub fn objective(&self, i: usize) -> &ObjectiveSpec<S> {
        &self.objectives[i]
    }

    pub fn objectives(&self) -> &[ObjectiveSpec<S>] {
        &self.objectives
    }

    pub fn boxes(&self) -> &[BoxBounds<S>] {
        &self.boxes
    }

    pub fn box_bounds(&self, i: usize) -> &BoxBounds<S> {
        &self.boxes[i]
    }

    pub fn constraints(&self) -> &ConstraintSpec<S> {
        &self.constraints
    }

    pub fn shared_set(&self) -> Option<&SharedSet<S>> {
        match &self.constraints {
            ConstraintSpec::Shared(set) => Some(set),
            _ => None,
        }
    }

    fn check_dims(&self, x: &BlockVector<S>) -> Result<()> {
        if x.dims() != self.dims {
            return Err(GameError::DimensionMismatch {
                player: 0,
                expected: self.total_dim(),
                got: x.total_dim(),
            });
        }
        Ok(())
    }

    /// `J_i(x)`.
    pub fn evaluate_objective(&self, i: usize, x: &BlockVector<S>) -> Result<S> {
        self.check_dims(x)?;
        match &self.objectives[i] {
            ObjectiveSpec::Quadratic { q, c, d } => {
                let v = x.flatten();
                Ok(lit::<S>(0.5) * v.dot(&(q * &v)) + c.dot(&v) + *d)
            }
            ObjectiveSpec::Oracle { evaluate, .. } => Ok(evaluate(x)),
        }
    }

    /// `∂_i J_i(x)`: gradient with respect to block `i` only.
    pub fn partial_gradient(&self, i: usize, x: &BlockVector<S>) -> Result<DVector<S>> {
        self.check_dims(x)?;
        match &self.objectives[i] {
            ObjectiveSpec::Quadratic { q, c, .. } => {
                let v = x.flatten();
                let full = q * &v + c;
                Ok(full.rows(self.block_offset(i), self.dims[i]).into_owned())
            }
            ObjectiveSpec::Oracle {
                partial_gradient, ..
            } => match partial_gradient {
                Some(g) => Ok(g(i, x)),
                None => Err(GameError::GradientUnavailable { player: i + 1 }),
            },
        }
    }

    /// Does every player have a gradient?
    pub fn gradients_available(&self) -> bool {
        self.objectives.iter().all(|o| match o {
            ObjectiveSpec::Quadratic { .. } => true,
            ObjectiveSpec::Oracle {
                partial_gradient, ..
            } => partial_gradient.is_some(),
        })
    }

    /// `x_i ∈ X_i^ad ∩ X_i(x_{-i})`. The bundle supplies the opponents'
    /// blocks; its own block `i` is ignored.
    pub fn feasible(&self, i: usize, x_i: &DVector<S>, x_minus_i: &BlockVector<S>) -> bool {
        let tol = lit::<S>(TAU_FEAS);
        if x_i.len() != self.dims[i] || x_minus_i.dims() != self.dims {
            return false;
        }
        if !self.boxes[i].contains(x_i, tol) {
            return false;
        }
        match &self.constraints {
            ConstraintSpec::Constant => true,
            ConstraintSpec::Shared(set) => {
                let joint = x_minus_i
                    .replace_block(i, x_i.clone())
                    .expect("dims checked above");
                set.contains(&joint.flatten(), tol)
            }
            ConstraintSpec::OracleMap { membership } => membership(i, x_i, x_minus_i),
        }
    }

    /// `x ∈ X(x)`: every player's block is feasible against the others. For
    /// shared constraints this is exactly `x ∈ C ∩ X^ad`.
    pub fn is_fixed_point(&self, x: &BlockVector<S>) -> bool {
        if x.dims() != self.dims {
            return false;
        }
        (0..self.n_players()).all(|i| self.feasible(i, x.block(i), x))
    }

    /// Same game with objectives scaled player-wise by `r` (the game `G_r`).
    pub fn scale_objectives(&self, r: &WeightVector<S>) -> Result<Self> {
        if r.len() != self.n_players() {
            return Err(GameError::InvalidSpec(
                "weight vector length must equal the player count".into(),
            ));
        }
        let objectives = self
            .objectives
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let ri = r.get(i);
                match o {
                    ObjectiveSpec::Quadratic { q, c, d } => ObjectiveSpec::Quadratic {
                        q: q * ri,
                        c: c * ri,
                        d: *d * ri,
                    },
                    ObjectiveSpec::Oracle {
                        evaluate,
                        partial_gradient,
                    } => {
                        let ev = evaluate.clone();
                        let pg = partial_gradient.clone();
                        ObjectiveSpec::Oracle {
                            evaluate: Arc::new(move |x| ri * ev(x)),
                            partial_gradient: pg.map(|g| {
                                let g = g.clone();
                                Arc::new(move |i: usize, x: &BlockVector<S>| g(i, x) * ri)
                                    as PartialGradFn<S>
                            }),
                        }
                    }
                }
            })
            .collect();
        Ok(Self {
            dims: self.dims.clone(),
            objectives,
            boxes: self.boxes.clone(),
            constraints: self.constraints.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::build_cournot;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    fn cournot() -> GameSpec<f64> {
        build_cournot(4.0, 1.0, &[1.0, 1.5], Some(1.0)).unwrap()
    }

    fn bundle(x1: f64, x2: f64) -> BlockVector<f64> {
        BlockVector::new(vec![dvector![x1], dvector![x2]]).unwrap()
    }

    #[test]
    fn cournot_objective_values() {
        let g = cournot();
        assert_relative_eq!(g.evaluate_objective(0, &bundle(1.0, 1.0)).unwrap(), -1.0);
        assert_relative_eq!(
            g.evaluate_objective(1, &bundle(0.75, 0.25)).unwrap(),
            -0.375
        );
    }

    #[test]
    fn zero_quadratic_is_zero() {
        let q = DMatrix::zeros(2, 2);
        let obj = ObjectiveSpec::Quadratic {
            q: q.clone(),
            c: DVector::zeros(2),
            d: 0.0,
        };
        let g = GameSpec::new(
            vec![1, 1],
            vec![obj.clone(), obj],
            vec![
                BoxBounds::new(dvector![-1.0], dvector![1.0]).unwrap(),
                BoxBounds::new(dvector![-1.0], dvector![1.0]).unwrap(),
            ],
            ConstraintSpec::Constant,
        )
        .unwrap();
        assert_eq!(g.evaluate_objective(0, &bundle(0.3, -0.7)).unwrap(), 0.0);
    }

    #[test]
    fn cournot_partial_gradients() {
        let g = cournot();
        assert_relative_eq!(g.partial_gradient(0, &bundle(1.0, 1.0)).unwrap()[0], 0.0);
        assert_relative_eq!(
            g.partial_gradient(1, &bundle(0.75, 0.25)).unwrap()[0],
            -1.25
        );
    }

    #[test]
    fn identity_quadratic_gradient() {
        let obj = ObjectiveSpec::Quadratic {
            q: DMatrix::identity(2, 2),
            c: DVector::zeros(2),
            d: 0.0,
        };
        let g = GameSpec::new(
            vec![1, 1],
            vec![obj.clone(), obj],
            vec![
                BoxBounds::new(dvector![-2.0], dvector![2.0]).unwrap(),
                BoxBounds::new(dvector![-2.0], dvector![2.0]).unwrap(),
            ],
            ConstraintSpec::Constant,
        )
        .unwrap();
        let x = bundle(1.0, 0.0);
        assert_eq!(g.partial_gradient(0, &x).unwrap()[0], 1.0);
    }

    #[test]
    fn cournot_feasibility() {
        let g = cournot();
        assert!(g.feasible(0, &dvector![0.75], &bundle(0.0, 0.25)));
        assert!(!g.feasible(0, &dvector![0.9], &bundle(0.0, 0.25)));
    }

    #[test]
    fn constant_variant_in_box() {
        let q = DMatrix::zeros(2, 2);
        let obj = ObjectiveSpec::Quadratic {
            q,
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
        assert!(g.feasible(0, &dvector![0.5], &bundle(0.0, 0.0)));
        assert!(!g.feasible(0, &dvector![1.5], &bundle(0.0, 0.0)));
    }

    #[test]
    fn fixed_points_match_shared_membership() {
        let g = cournot();
        assert!(g.is_fixed_point(&bundle(0.5, 0.5)));
        assert!(!g.is_fixed_point(&bundle(0.8, 0.4)));
        let fp = g.shared_set().unwrap().feasible_point.clone();
        let x = BlockVector::from_flat(&[1, 1], &fp).unwrap();
        assert!(g.is_fixed_point(&x));
    }

    #[test]
    fn rejects_single_player() {
        let obj = ObjectiveSpec::Quadratic {
            q: DMatrix::zeros(1, 1),
            c: DVector::zeros(1),
            d: 0.0,
        };
        assert!(GameSpec::new(
            vec![1],
            vec![obj],
            vec![BoxBounds::new(dvector![0.0], dvector![1.0]).unwrap()],
            ConstraintSpec::<f64>::Constant,
        )
        .is_err());
    }

    #[test]
    fn rejects_nonconvex_own_block() {
        let mut q = DMatrix::zeros(2, 2);
        q[(0, 0)] = -1.0;
        let bad = ObjectiveSpec::Quadratic {
            q,
            c: DVector::zeros(2),
            d: 0.0,
        };
        let ok = ObjectiveSpec::Quadratic {
            q: DMatrix::zeros(2, 2),
            c: DVector::zeros(2),
            d: 0.0,
        };
        assert!(matches!(
            GameSpec::new(
                vec![1, 1],
                vec![bad, ok],
                vec![
                    BoxBounds::new(dvector![0.0], dvector![1.0]).unwrap(),
                    BoxBounds::new(dvector![0.0], dvector![1.0]).unwrap(),
                ],
                ConstraintSpec::Constant,
            ),
            Err(GameError::NotConvex { player: 1, .. })
        ));
    }

    #[test]
    fn scaling_scales_values_and_gradients() {
        let g = cournot();
        let r = WeightVector::new(vec![2.0, 5.0]).unwrap();
        let gr = g.scale_objectives(&r).unwrap();
        let x = bundle(0.4, 0.3);
        for i in 0..2 {
            assert_relative_eq!(
                gr.evaluate_objective(i, &x).unwrap(),
                r.get(i) * g.evaluate_objective(i, &x).unwrap()
            );
            assert_relative_eq!(
                gr.partial_gradient(i, &x).unwrap()[0],
                r.get(i) * g.partial_gradient(i, &x).unwrap()[0]
            );
        }
    }
}
