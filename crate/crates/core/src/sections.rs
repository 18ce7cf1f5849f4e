//! Low-level convex solvers: projections onto boxes and polytopes, and
//! box/polytope-constrained quadratic and linear minimization.

use nalgebra::{DMatrix, DVector};
use num_traits::Float;

use crate::block::BlockVector;
use crate::error::{GameError, Result};
use crate::model::{ConstraintSpec, GameSpec, TAU_FEAS};
use crate::scalar::{as_f64, lit, Scalar};

pub const DEFAULT_MAX_ITER: usize = 10_000;
const PROJECTION_TOL: f64 = 1e-12;
const PROJECTION_MAX_ITER: usize = 50_000;

/// One player's feasible set with the opponents frozen: a box intersected
/// with normalized halfspaces `a.y <= beta`.
#[derive(Debug, Clone)]
pub struct FeasibleSection<S: Scalar> {
    pub lo: DVector<S>,
    pub hi: DVector<S>,
    pub halfspaces: Vec<(DVector<S>, S)>,
}

impl<S: Scalar> FeasibleSection<S> {
    pub fn from_box(lo: DVector<S>, hi: DVector<S>) -> Self {
        Self {
            lo,
            hi,
            halfspaces: Vec::new(),
        }
    }

    /// Add a halfspace `a.y <= beta`; the row is normalized on insertion.
    pub fn push_halfspace(&mut self, a: DVector<S>, beta: S) {
        let norm = a.norm();
        if norm > lit(1e-14) {
            self.halfspaces.push((a / norm, beta / norm));
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, v: &DVector<S>, tol: S) -> bool {
        let in_box = v
            .iter()
            .zip(self.lo.iter().zip(self.hi.iter()))
            .all(|(x, (l, h))| *x >= *l - tol && *x <= *h + tol);
        in_box && self.halfspaces.iter().all(|(a, b)| a.dot(v) <= *b + tol)
    }

    /// Tightest interval for a 1-D section, `None` in higher dimensions.
    pub fn interval(&self) -> Option<(S, S)> {
        if self.dim() != 1 {
            return None;
        }
        let (mut lo, mut hi) = (self.lo[0], self.hi[0]);
        for (a, b) in &self.halfspaces {
            let a0 = a[0];
            if a0 > S::zero() {
                hi = Float::min(hi, *b / a0);
            } else if a0 < S::zero() {
                lo = Float::max(lo, *b / a0);
            }
        }
        Some((lo, hi))
    }

    pub fn is_empty(&self) -> bool {
        if let Some((lo, hi)) = self.interval() {
            return hi < lo - lit(TAU_FEAS);
        }
        let mid = (&self.lo + &self.hi) * lit::<S>(0.5);
        match project_polytope(&mid, self, lit(PROJECTION_TOL), PROJECTION_MAX_ITER) {
            Ok(p) => !self.contains(&p, lit(10.0 * TAU_FEAS)),
            Err(_) => true,
        }
    }

    /// Any feasible point, used as solver start.
    pub fn anchor(&self) -> Result<DVector<S>> {
        let mid = (&self.lo + &self.hi) * lit::<S>(0.5);
        project_polytope(&mid, self, lit(PROJECTION_TOL), PROJECTION_MAX_ITER)
    }

    /// Player `i`'s feasible section at `x_{-i}`: the game box intersected
    /// with the shared rows frozen at the opponents' blocks.
    pub fn freeze(game: &GameSpec<S>, i: usize, x: &BlockVector<S>) -> Result<Self> {
        let bx = game.box_bounds(i);
        let mut section = Self::from_box(bx.lo.clone(), bx.hi.clone());
        match game.constraints() {
            ConstraintSpec::Constant => {}
            ConstraintSpec::Shared(set) => {
                let off = game.block_offset(i);
                let d = game.dims()[i];
                let flat = x.flatten();
                for r in 0..set.a.nrows() {
                    let row = set.a.row(r);
                    let a_own = row.columns(off, d).transpose().into_owned();
                    let mut rest = S::zero();
                    for c in 0..set.a.ncols() {
                        if c < off || c >= off + d {
                            rest += row[c] * flat[c];
                        }
                    }
                    let beta = set.b[r] - rest;
                    if a_own.norm() <= lit(1e-14) {
                        // Row does not involve this block: it constrains the
                        // opponents only; if violated, the section is empty.
                        if beta < -lit::<S>(TAU_FEAS) {
                            return Err(GameError::OutsideDomain { player: i + 1 });
                        }
                    } else {
                        section.push_halfspace(a_own, beta);
                    }
                }
            }
            ConstraintSpec::OracleMap { .. } => {
                return Err(GameError::InvalidSpec(
                    "oracle constraint maps do not expose a polyhedral section".into(),
                ))
            }
        }
        if section.is_empty() {
            return Err(GameError::OutsideDomain { player: i + 1 });
        }
        Ok(section)
    }

    /// The joint set `C ∩ X^ad` in the concatenated space. For constant
    /// constraints this is the box product (the orthogonal case).
    pub fn joint(game: &GameSpec<S>) -> Result<Self> {
        let n = game.total_dim();
        let mut lo = DVector::zeros(n);
        let mut hi = DVector::zeros(n);
        for i in 0..game.n_players() {
            let off = game.block_offset(i);
            let bx = game.box_bounds(i);
            lo.rows_mut(off, bx.dim()).copy_from(&bx.lo);
            hi.rows_mut(off, bx.dim()).copy_from(&bx.hi);
        }
        let mut section = Self::from_box(lo, hi);
        match game.constraints() {
            ConstraintSpec::Constant => {}
            ConstraintSpec::Shared(set) => {
                for r in 0..set.a.nrows() {
                    section.push_halfspace(set.a.row(r).transpose().into_owned(), set.b[r]);
                }
            }
            ConstraintSpec::OracleMap { .. } => return Err(GameError::SharedSetRequired),
        }
        Ok(section)
    }
}

/// Componentwise clamp onto `[lo, hi]`.
pub fn project_box<S: Scalar>(v: &DVector<S>, lo: &DVector<S>, hi: &DVector<S>) -> DVector<S> {
    DVector::from_iterator(
        v.len(),
        v.iter()
            .zip(lo.iter().zip(hi.iter()))
            .map(|(x, (l, h))| Float::min(Float::max(*x, *l), *h)),
    )
}

fn project_halfspace<S: Scalar>(v: &DVector<S>, a: &DVector<S>, beta: S) -> DVector<S> {
    // Rows are unit-norm by construction.
    let excess = a.dot(v) - beta;
    if excess > S::zero() {
        v - a * excess
    } else {
        v.clone()
    }
}

/// Euclidean projection onto the section via Dykstra's alternating
/// projections. Plain cyclic projection would land in the intersection but
/// not at the nearest point; Dykstra's correction terms fix that.
pub fn project_polytope<S: Scalar>(
    v: &DVector<S>,
    section: &FeasibleSection<S>,
    tol: S,
    max_iter: usize,
) -> Result<DVector<S>> {
    if section.halfspaces.is_empty() {
        return Ok(project_box(v, &section.lo, &section.hi));
    }
    let n_sets = section.halfspaces.len() + 1;
    let mut y = v.clone();
    let mut increments = vec![DVector::<S>::zeros(v.len()); n_sets];
    let mut residual = S::infinity();
    for _ in 0..max_iter {
        let cycle_start = y.clone();
        for (k, p) in increments.iter_mut().enumerate() {
            let z = &y + &*p;
            let projected = if k == 0 {
                project_box(&z, &section.lo, &section.hi)
            } else {
                let (a, b) = &section.halfspaces[k - 1];
                project_halfspace(&z, a, *b)
            };
            *p = z - &projected;
            y = projected;
        }
        residual = (&y - &cycle_start).norm();
        if residual < tol && section.contains(&y, lit(TAU_FEAS)) {
            return Ok(y);
        }
    }
    Err(GameError::ProjectionStalled {
        max_iter,
        residual: as_f64(residual),
        last_iterate: y.iter().map(|s| as_f64(*s)).collect(),
    })
}

/// Largest-magnitude eigenvalue bound for a symmetric matrix.
pub fn spectral_bound<S: Scalar>(q: &DMatrix<S>) -> S {
    let n = q.nrows();
    if n == 0 {
        return S::zero();
    }
    let mut v = DVector::from_element(n, S::one());
    v[0] += lit(0.5);
    v /= v.norm();
    let mut lambda = S::zero();
    for _ in 0..60 {
        let w = q * &v;
        let norm = w.norm();
        if norm <= lit(1e-300) {
            return S::zero();
        }
        lambda = norm;
        v = w / norm;
    }
    lambda
}

fn stationarity_residual<S: Scalar>(
    y: &DVector<S>,
    grad: &DVector<S>,
    section: &FeasibleSection<S>,
) -> Result<S> {
    let p = project_polytope(&(y - grad), section, lit(PROJECTION_TOL), PROJECTION_MAX_ITER)?;
    Ok((y - p).norm())
}

/// Minimize `1/2 y'qy + g.y` over the section by accelerated projected
/// gradient (FISTA with gradient restart), step `1/L`.
pub fn minimize_quadratic<S: Scalar>(
    q: &DMatrix<S>,
    g: &DVector<S>,
    section: &FeasibleSection<S>,
    tol: S,
) -> Result<DVector<S>> {
    minimize_quadratic_iter(q, g, section, tol, DEFAULT_MAX_ITER)
}

pub fn minimize_quadratic_iter<S: Scalar>(
    q: &DMatrix<S>,
    g: &DVector<S>,
    section: &FeasibleSection<S>,
    tol: S,
    max_iter: usize,
) -> Result<DVector<S>> {
    let lip = spectral_bound(q);
    if lip <= lit(1e-14) {
        // Degenerate curvature: the objective is linear.
        return Ok(minimize_linear(g, section, tol)?.0);
    }
    let step = S::one() / lip;
    let mut y = section.anchor()?;
    let mut z = y.clone();
    let mut t = S::one();
    let curvature_tol = lit::<S>(1e-10);
    for _ in 0..max_iter {
        let grad_y = q * &y + g;
        if stationarity_residual(&y, &grad_y, section)? <= tol {
            return Ok(y);
        }
        let grad_z = q * &z + g;
        let next = project_polytope(
            &(&z - &grad_z * step),
            section,
            lit(PROJECTION_TOL),
            PROJECTION_MAX_ITER,
        )?;
        let d = &next - &y;
        let dn = d.norm_squared();
        if dn > S::zero() {
            let curv = d.dot(&(q * &d));
            if curv < -curvature_tol * dn {
                return Err(GameError::NotPsd {
                    curvature: as_f64(curv / dn),
                });
            }
        }
        let t_next = (S::one() + Float::sqrt(S::one() + lit::<S>(4.0) * t * t)) * lit(0.5);
        let momentum = (t - S::one()) / t_next;
        let grad_next = q * &next + g;
        if grad_next.dot(&d) > S::zero() {
            // Restart the momentum when the gradient opposes the step.
            z = next.clone();
            t = S::one();
        } else {
            z = &next + d * momentum;
            t = t_next;
        }
        y = next;
    }
    let grad_y = q * &y + g;
    let residual = stationarity_residual(&y, &grad_y, section)?;
    if residual <= tol {
        Ok(y)
    } else {
        Err(GameError::ProjectionStalled {
            max_iter,
            residual: as_f64(residual),
            last_iterate: y.iter().map(|s| as_f64(*s)).collect(),
        })
    }
}

/// Minimize `g.y` over a bounded section; returns the minimizer and the
/// value. Ties (zero gradient component) break to the lower endpoint.
pub fn minimize_linear<S: Scalar>(
    g: &DVector<S>,
    section: &FeasibleSection<S>,
    tol: S,
) -> Result<(DVector<S>, S)> {
    if section.halfspaces.is_empty() {
        let y = DVector::from_iterator(
            g.len(),
            g.iter()
                .zip(section.lo.iter().zip(section.hi.iter()))
                .map(|(gi, (l, h))| if *gi < S::zero() { *h } else { *l }),
        );
        let value = g.dot(&y);
        return Ok((y, value));
    }
    if let Some((lo, hi)) = section.interval() {
        if hi < lo - lit::<S>(TAU_FEAS) {
            return Err(GameError::OutsideDomain { player: 0 });
        }
        let y = if g[0] < S::zero() { hi } else { lo };
        let y = DVector::from_element(1, Float::max(Float::min(y, hi), lo));
        let value = g.dot(&y);
        return Ok((y, value));
    }
    if g.norm() <= lit(1e-300) {
        let y = project_polytope(
            &section.lo,
            section,
            lit(PROJECTION_TOL),
            PROJECTION_MAX_ITER,
        )?;
        return Ok((y, S::zero()));
    }
    // Tikhonov route: the minimizer of g.y + mu/2 |y|^2 is the projection of
    // -g/mu onto the section, and the value gap shrinks linearly in mu.
    let radius_sq = section
        .lo
        .iter()
        .zip(section.hi.iter())
        .map(|(l, h)| {
            let m = Float::max(Float::abs(*l), Float::abs(*h));
            m * m
        })
        .fold(S::zero(), |acc, v| acc + v);
    let mu = tol / (radius_sq + S::one());
    let target = g * (-S::one() / mu);
    let y = project_polytope(&target, section, lit(PROJECTION_TOL), PROJECTION_MAX_ITER)?;
    let value = g.dot(&y);
    Ok((y, value))
}

/// Projected gradient with backtracking for a smooth convex black-box
/// objective over the section.
pub fn minimize_smooth<S: Scalar>(
    f: impl Fn(&DVector<S>) -> S,
    grad: impl Fn(&DVector<S>) -> DVector<S>,
    section: &FeasibleSection<S>,
    tol: S,
    max_iter: usize,
) -> Result<DVector<S>> {
    let mut y = section.anchor()?;
    let mut lip = S::one();
    for _ in 0..max_iter {
        let g = grad(&y);
        if stationarity_residual(&y, &g, section)? <= tol {
            return Ok(y);
        }
        let fy = f(&y);
        let mut accepted = None;
        for _ in 0..60 {
            let candidate = project_polytope(
                &(&y - &g * (S::one() / lip)),
                section,
                lit(PROJECTION_TOL),
                PROJECTION_MAX_ITER,
            )?;
            let d = &candidate - &y;
            let upper = fy + g.dot(&d) + lip * lit::<S>(0.5) * d.norm_squared();
            if f(&candidate) <= upper + lit(1e-14) {
                accepted = Some(candidate);
                break;
            }
            lip *= lit(2.0);
        }
        match accepted {
            Some(candidate) => {
                y = candidate;
                lip *= lit(0.9);
            }
            None => break,
        }
    }
    let g = grad(&y);
    let residual = stationarity_residual(&y, &g, section)?;
    if residual <= tol {
        Ok(y)
    } else {
        Err(GameError::ProjectionStalled {
            max_iter,
            residual: as_f64(residual),
            last_iterate: y.iter().map(|s| as_f64(*s)).collect(),
        })
    }
}
