//! Sampling-based falsifiers for structural conditions on set-valued maps
//! and games: graph-convexity, the KKM property, diagonal strict convexity,
//! lower semicontinuity of 1-D interval maps, and geometric equilibrium.
//!
//! Every checker is a falsifier: `holds = true` means no counterexample was
//! found at the given budget, never a proof. A failing verdict always
//! carries a witness that reproduces the violation when replayed.

use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::block::BlockVector;
use crate::error::{GameError, Result};
use crate::model::{GameSpec, WeightVector, TAU_FEAS};
use crate::scalar::{as_f64, lit, Scalar};
use crate::sections::FeasibleSection;

pub const DEFAULT_SAMPLES: usize = 2000;
pub const DEFAULT_MAX_SUBSET: usize = 4;
pub const DEFAULT_HULL_SAMPLES: usize = 50;
pub const LSC_MARGIN: f64 = 1e-2;
pub const LSC_DEPTH: u32 = 20;
/// Floating-point-safe strictness margin for the diagonal convexity test,
/// scaled by the squared pair distance.
pub const DSC_STRICTNESS: f64 = 1e-12;

/// Counterexample payload; coordinates are stored at full `f64` precision
/// so a failing verdict can be replayed exactly.
#[derive(Debug, Clone, Serialize)]
pub enum Witness {
    ConvexCombination {
        x_a: Vec<f64>,
        y_a: Vec<f64>,
        x_b: Vec<f64>,
        y_b: Vec<f64>,
        theta: f64,
        x_mid: Vec<f64>,
        y_mid: Vec<f64>,
    },
    HullPoint {
        subset: Vec<Vec<f64>>,
        weights: Vec<f64>,
        point: Vec<f64>,
    },
    LscFailure {
        x0: f64,
        y0: f64,
        delta: f64,
        probe: f64,
        distance: f64,
    },
    DscPair {
        x: Vec<f64>,
        y: Vec<f64>,
        value: f64,
    },
    NonPositiveEigenvalue {
        min_eigenvalue: f64,
    },
    PreferredAlternative {
        player: usize,
        alternative: Vec<f64>,
        objective_at_x: f64,
        objective_at_alternative: f64,
    },
}

/// Result of a sampling-based structural check.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub holds: bool,
    pub witness: Option<Witness>,
    pub samples_tested: usize,
    pub seed: u64,
}

impl Verdict {
    fn holds(samples: usize, seed: u64) -> Self {
        Self {
            holds: true,
            witness: None,
            samples_tested: samples,
            seed,
        }
    }

    fn fails(witness: Witness, samples: usize, seed: u64) -> Self {
        Self {
            holds: false,
            witness: Some(witness),
            samples_tested: samples,
            seed,
        }
    }
}

/// DSC verdict plus, for quadratic games, the exact eigenvalue certificate
/// of the symmetrized pseudogradient Jacobian.
#[derive(Debug, Clone, Serialize)]
pub struct DscReport {
    pub verdict: Verdict,
    pub min_eigenvalue: Option<f64>,
}

pub type SampleFn<S> = Arc<dyn Fn(&mut ChaCha8Rng) -> DVector<S> + Send + Sync>;
pub type SetMembershipFn<S> = Arc<dyn Fn(&DVector<S>, &DVector<S>) -> bool + Send + Sync>;

/// A set-valued map `F` given by a domain sampler and a membership test
/// `y in F(x)`; membership must be deterministic.
#[derive(Clone)]
pub struct SetValuedOracle<S: Scalar> {
    pub sample_domain: SampleFn<S>,
    /// Sampler for candidate values; defaults to the domain sampler for
    /// maps `F : X -> 2^X`.
    pub sample_value: SampleFn<S>,
    pub membership: SetMembershipFn<S>,
}

impl<S: Scalar> SetValuedOracle<S> {
    pub fn new(sample_domain: SampleFn<S>, membership: SetMembershipFn<S>) -> Self {
        Self {
            sample_value: sample_domain.clone(),
            sample_domain,
            membership,
        }
    }

    /// Oracle for a 1-D interval map on [0, 1]. The sampler mixes atoms at
    /// the endpoints into the uniform draw so that violations living on a
    /// single fiber (such as x = 0) are reachable.
    pub fn from_interval_map(map: &IntervalMap<S>) -> Self {
        let map_lo = map.clone();
        let sampler: SampleFn<S> = Arc::new(|rng: &mut ChaCha8Rng| {
            let roll = rng.gen::<f64>();
            let v = if roll < 0.05 {
                0.0
            } else if roll < 0.10 {
                1.0
            } else {
                rng.gen::<f64>()
            };
            DVector::from_element(1, lit::<S>(v))
        });
        Self {
            sample_domain: sampler.clone(),
            sample_value: sampler,
            membership: Arc::new(move |x: &DVector<S>, y: &DVector<S>| {
                let (lo, hi) = map_lo.endpoints(x[0]);
                y[0] >= lo - lit(1e-12) && y[0] <= hi + lit(1e-12)
            }),
        }
    }

    /// Oracle for a game's joint constraint map `x -> X(x)`, sampled over
    /// the admissible box.
    pub fn from_constraint_map(game: &GameSpec<S>) -> Result<Self> {
        let joint = FeasibleSection::joint(game)?;
        let dims = game.dims().to_vec();
        let lo: Vec<f64> = joint.lo.iter().map(|v| as_f64(*v)).collect();
        let hi: Vec<f64> = joint.hi.iter().map(|v| as_f64(*v)).collect();
        let sampler: SampleFn<S> = Arc::new(move |rng: &mut ChaCha8Rng| {
            DVector::from_iterator(
                lo.len(),
                lo.iter()
                    .zip(&hi)
                    .map(|(l, h)| lit::<S>(rng.gen_range(*l..=*h))),
            )
        });
        let game = game.clone();
        Ok(Self {
            sample_domain: sampler.clone(),
            sample_value: sampler,
            membership: Arc::new(move |x: &DVector<S>, y: &DVector<S>| {
                let (Ok(xb), Ok(yb)) = (
                    BlockVector::from_flat(&dims, x),
                    BlockVector::from_flat(&dims, y),
                ) else {
                    return false;
                };
                (0..game.n_players()).all(|i| game.feasible(i, yb.block(i), &xb))
            }),
        })
    }
}

/// A 1-D interval-valued map on [0, 1] given by pointwise endpoint
/// functions.
#[derive(Clone)]
pub struct IntervalMap<S: Scalar> {
    pub lo: Arc<dyn Fn(S) -> S + Send + Sync>,
    pub hi: Arc<dyn Fn(S) -> S + Send + Sync>,
}

impl<S: Scalar> IntervalMap<S> {
    pub fn endpoints(&self, x: S) -> (S, S) {
        ((self.lo)(x), (self.hi)(x))
    }

    pub fn distance_to_value(&self, x: S, y: S) -> S {
        let (lo, hi) = self.endpoints(x);
        if y < lo {
            lo - y
        } else if y > hi {
            y - hi
        } else {
            S::zero()
        }
    }

    /// `F(0) = [0, 1]`, `F(x) = [0, x]` for `x > 0`: closed-graph KKM map
    /// that is not lower semicontinuous at 0.
    pub fn kkm_demo_a() -> Self {
        Self {
            lo: Arc::new(|_| S::zero()),
            hi: Arc::new(|x: S| if x == S::zero() { S::one() } else { x }),
        }
    }

    /// `F(x) = [0, x]` on `[0, 1/2]`, `F(x) = [x, 1]` on `(1/2, 1]`: a KKM
    /// map that is not graph-convex.
    pub fn kkm_demo_b() -> Self {
        let half = lit::<S>(0.5);
        Self {
            lo: Arc::new(move |x: S| if x <= half { S::zero() } else { x }),
            hi: Arc::new(move |x: S| if x <= half { x } else { S::one() }),
        }
    }

    /// Constant map `F(x) = [0, 1]`.
    pub fn constant_unit() -> Self {
        Self {
            lo: Arc::new(|_| S::zero()),
            hi: Arc::new(|_| S::one()),
        }
    }
}

fn to_f64_vec<S: Scalar>(v: &DVector<S>) -> Vec<f64> {
    v.iter().map(|s| as_f64(*s)).collect()
}

fn sample_graph_point<S: Scalar>(
    oracle: &SetValuedOracle<S>,
    rng: &mut ChaCha8Rng,
    max_attempts: usize,
) -> Result<(DVector<S>, DVector<S>)> {
    for _ in 0..max_attempts {
        let x = (oracle.sample_domain)(rng);
        let y = (oracle.sample_value)(rng);
        if (oracle.membership)(&x, &y) {
            return Ok((x, y));
        }
    }
    Err(GameError::GraphAppearsEmpty {
        attempts: max_attempts,
    })
}

/// Search for a convexity violation of the graph of `F`: sampled pairs in
/// the graph whose convex combination leaves it.
pub fn check_graph_convexity<S: Scalar>(
    oracle: &SetValuedOracle<S>,
    n_samples: usize,
    seed: u64,
) -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_attempts = 10 * n_samples.max(1);
    let mut tested = 0;
    for _ in 0..n_samples {
        let (x_a, y_a) = sample_graph_point(oracle, &mut rng, max_attempts)?;
        let (x_b, y_b) = sample_graph_point(oracle, &mut rng, max_attempts)?;
        let theta = lit::<S>(rng.gen_range(0.0..1.0));
        let one_minus = S::one() - theta;
        let x_mid = &x_a * theta + &x_b * one_minus;
        let y_mid = &y_a * theta + &y_b * one_minus;
        tested += 1;
        if !(oracle.membership)(&x_mid, &y_mid) {
            return Ok(Verdict::fails(
                Witness::ConvexCombination {
                    x_a: to_f64_vec(&x_a),
                    y_a: to_f64_vec(&y_a),
                    x_b: to_f64_vec(&x_b),
                    y_b: to_f64_vec(&y_b),
                    theta: as_f64(theta),
                    x_mid: to_f64_vec(&x_mid),
                    y_mid: to_f64_vec(&y_mid),
                },
                tested,
                seed,
            ));
        }
    }
    Ok(Verdict::holds(tested, seed))
}

/// Replays a graph-convexity witness through the membership oracle; true
/// means the violation is reproduced.
pub fn replay_graph_convexity<S: Scalar>(oracle: &SetValuedOracle<S>, w: &Witness) -> bool {
    let Witness::ConvexCombination {
        x_a, y_a, x_b, y_b, x_mid, y_mid, ..
    } = w
    else {
        return false;
    };
    let conv = |v: &[f64]| DVector::from_iterator(v.len(), v.iter().map(|&f| lit::<S>(f)));
    (oracle.membership)(&conv(x_a), &conv(y_a))
        && (oracle.membership)(&conv(x_b), &conv(y_b))
        && !(oracle.membership)(&conv(x_mid), &conv(y_mid))
}

/// Search for a KKM violation: a point of the convex hull of a sampled
/// finite subset that belongs to none of the subset's values.
pub fn check_kkm<S: Scalar>(
    oracle: &SetValuedOracle<S>,
    n_subsets: usize,
    max_subset_size: usize,
    hull_samples: usize,
    seed: u64,
) -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tested = 0;
    for _ in 0..n_subsets {
        let size = rng.gen_range(1..=max_subset_size.max(1));
        let subset: Vec<DVector<S>> = (0..size).map(|_| (oracle.sample_domain)(&mut rng)).collect();
        for _ in 0..hull_samples {
            // Dirichlet(1,...,1) weights via normalized exponentials.
            let raw: Vec<f64> = (0..size).map(|_| -f64::ln(rng.gen_range(1e-12..1.0))).collect();
            let total: f64 = raw.iter().sum();
            let weights: Vec<S> = raw.iter().map(|w| lit::<S>(w / total)).collect();
            let mut point = DVector::<S>::zeros(subset[0].len());
            for (p, w) in subset.iter().zip(&weights) {
                point += p * *w;
            }
            tested += 1;
            if !subset.iter().any(|x| (oracle.membership)(x, &point)) {
                return Ok(Verdict::fails(
                    Witness::HullPoint {
                        subset: subset.iter().map(to_f64_vec).collect(),
                        weights: weights.iter().map(|w| as_f64(*w)).collect(),
                        point: to_f64_vec(&point),
                    },
                    tested,
                    seed,
                ));
            }
        }
    }
    Ok(Verdict::holds(tested, seed))
}

pub fn replay_kkm<S: Scalar>(oracle: &SetValuedOracle<S>, w: &Witness) -> bool {
    let Witness::HullPoint { subset, point, .. } = w else {
        return false;
    };
    let conv = |v: &[f64]| DVector::from_iterator(v.len(), v.iter().map(|&f| lit::<S>(f)));
    let p = conv(point);
    !subset.iter().any(|x| (oracle.membership)(&conv(x), &p))
}

fn sample_joint_point<S: Scalar>(
    game: &GameSpec<S>,
    joint: &FeasibleSection<S>,
    rng: &mut ChaCha8Rng,
) -> Result<DVector<S>> {
    let _ = game;
    for _ in 0..200 {
        let candidate = DVector::from_iterator(
            joint.lo.len(),
            joint
                .lo
                .iter()
                .zip(joint.hi.iter())
                .map(|(l, h)| lit::<S>(rng.gen_range(as_f64(*l)..=as_f64(*h)))),
        );
        if joint.contains(&candidate, lit(TAU_FEAS)) {
            return Ok(candidate);
        }
    }
    // Low acceptance rate: fall back to projecting a box sample.
    let candidate = DVector::from_iterator(
        joint.lo.len(),
        joint
            .lo
            .iter()
            .zip(joint.hi.iter())
            .map(|(l, h)| lit::<S>(rng.gen_range(as_f64(*l)..=as_f64(*h)))),
    );
    crate::sections::project_polytope(&candidate, joint, lit(1e-12), 50_000)
}

fn dsc_expression<S: Scalar>(
    game: &GameSpec<S>,
    r: &WeightVector<S>,
    x: &BlockVector<S>,
    y: &BlockVector<S>,
) -> Result<S> {
    let dx = crate::equilibrium::pseudogradient(game, r, x)?.flatten();
    let dy = crate::equilibrium::pseudogradient(game, r, y)?.flatten();
    let diff = y.flatten() - x.flatten();
    Ok(dx.dot(&diff) - dy.dot(&diff))
}

/// Diagonal strict convexity check: samples pairs in the joint set and
/// tests `d(x,r).(y-x) + d(y,r).(x-y) < 0`; for quadratic games the
/// symmetrized pseudogradient Jacobian gives an exact eigenvalue
/// certificate.
pub fn check_dsc<S: Scalar>(
    game: &GameSpec<S>,
    r: &WeightVector<S>,
    n_pairs: usize,
    seed: u64,
) -> Result<DscReport> {
    if !game.gradients_available() {
        return Err(GameError::GradientUnavailable { player: 0 });
    }
    let joint = FeasibleSection::joint(game)?;
    let dims = game.dims().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_eigenvalue = crate::equilibrium::pseudogradient_jacobian(game, r).map(|jac| {
        let sym = &jac + jac.transpose();
        sym.symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |m, v| m.min(as_f64(*v)))
    });
    let mut tested = 0;
    for _ in 0..n_pairs {
        let xf = sample_joint_point(game, &joint, &mut rng)?;
        let yf = sample_joint_point(game, &joint, &mut rng)?;
        let dist_sq = (&yf - &xf).norm_squared();
        if dist_sq <= lit(1e-20) {
            continue;
        }
        let x = BlockVector::from_flat(&dims, &xf)?;
        let y = BlockVector::from_flat(&dims, &yf)?;
        tested += 1;
        let value = dsc_expression(game, r, &x, &y)?;
        if !(value < -lit::<S>(DSC_STRICTNESS) * dist_sq) {
            return Ok(DscReport {
                verdict: Verdict::fails(
                    Witness::DscPair {
                        x: to_f64_vec(&xf),
                        y: to_f64_vec(&yf),
                        value: as_f64(value),
                    },
                    tested,
                    seed,
                ),
                min_eigenvalue,
            });
        }
    }
    // For affine pseudogradients the sampled expression equals
    // -(y-x)'(D+D')(y-x)/2, so the eigenvalue test is exact.
    if let Some(eig) = min_eigenvalue {
        if eig <= 0.0 {
            return Ok(DscReport {
                verdict: Verdict::fails(
                    Witness::NonPositiveEigenvalue {
                        min_eigenvalue: eig,
                    },
                    tested,
                    seed,
                ),
                min_eigenvalue,
            });
        }
    }
    Ok(DscReport {
        verdict: Verdict::holds(tested, seed),
        min_eigenvalue,
    })
}

pub fn replay_dsc<S: Scalar>(game: &GameSpec<S>, r: &WeightVector<S>, w: &Witness) -> bool {
    let Witness::DscPair { x, y, .. } = w else {
        return matches!(w, Witness::NonPositiveEigenvalue { .. });
    };
    let dims = game.dims().to_vec();
    let conv = |v: &[f64]| DVector::from_iterator(v.len(), v.iter().map(|&f| lit::<S>(f)));
    let xf = conv(x);
    let yf = conv(y);
    let dist_sq = (&yf - &xf).norm_squared();
    let (Ok(xb), Ok(yb)) = (
        BlockVector::from_flat(&dims, &xf),
        BlockVector::from_flat(&dims, &yf),
    ) else {
        return false;
    };
    match dsc_expression(game, r, &xb, &yb) {
        Ok(v) => !(v < -lit::<S>(DSC_STRICTNESS) * dist_sq),
        Err(_) => false,
    }
}

/// Lower-semicontinuity probe for a 1-D interval map at `x0`: for sampled
/// targets `y0 in F(x0)` and shrinking radii, the worst-case distance
/// `dist(y0, F(x))` over probes `x` near `x0` must go to zero.
pub fn check_lsc_interval<S: Scalar>(
    map: &IntervalMap<S>,
    x0: S,
    n_probes: usize,
    seed: u64,
) -> Result<Verdict> {
    if x0 < S::zero() || x0 > S::one() {
        return Err(GameError::OutsideUnitInterval { value: as_f64(x0) });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo0, hi0) = map.endpoints(x0);
    let margin = lit::<S>(LSC_MARGIN);
    let mut tested = 0;
    for _ in 0..n_probes.max(1) {
        let y0 = lo0 + (hi0 - lo0) * lit::<S>(rng.gen::<f64>());
        tested += 1;
        let mut last: Option<(S, S, S)> = None; // (delta, worst probe, distance)
        let mut persistent = true;
        for k in 1..=LSC_DEPTH {
            let delta = lit::<S>(0.5_f64.powi(k as i32));
            let mut worst = S::zero();
            let mut worst_probe = x0;
            for _ in 0..64 {
                let offset = lit::<S>(rng.gen_range(-1.0..=1.0)) * delta;
                let probe = num_traits::Float::min(
                    num_traits::Float::max(x0 + offset, S::zero()),
                    S::one(),
                );
                let d = map.distance_to_value(probe, y0);
                if d > worst {
                    worst = d;
                    worst_probe = probe;
                }
            }
            if worst < margin {
                persistent = false;
                break;
            }
            last = Some((delta, worst_probe, worst));
        }
        if persistent {
            if let Some((delta, probe, distance)) = last {
                return Ok(Verdict::fails(
                    Witness::LscFailure {
                        x0: as_f64(x0),
                        y0: as_f64(y0),
                        delta: as_f64(delta),
                        probe: as_f64(probe),
                        distance: as_f64(distance),
                    },
                    tested,
                    seed,
                ));
            }
        }
    }
    Ok(Verdict::holds(tested, seed))
}

pub fn replay_lsc<S: Scalar>(map: &IntervalMap<S>, w: &Witness) -> bool {
    let Witness::LscFailure {
        x0, y0, delta, probe, ..
    } = w
    else {
        return false;
    };
    let in_ball = (probe - x0).abs() <= *delta + 1e-15;
    let dist = map.distance_to_value(lit::<S>(*probe), lit::<S>(*y0));
    in_ball && dist >= lit::<S>(LSC_MARGIN)
}

/// Geometric equilibrium probe: build each player's strict-preference set
/// `P_i(x) = {alt : J_i(alt, x_{-i}) < J_i(x) - eps}` and look for a
/// feasible probe inside it.
pub fn check_geometric_equilibrium<S: Scalar>(
    game: &GameSpec<S>,
    x: &BlockVector<S>,
    epsilon: S,
    n_probes: usize,
    seed: u64,
) -> Result<Verdict> {
    if !game.is_fixed_point(x) {
        return Err(GameError::InvalidSpec(
            "geometric equilibrium check requires a feasible fixed point".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tested = 0;
    for i in 0..game.n_players() {
        let current = game.evaluate_objective(i, x)?;
        let bx = game.box_bounds(i);
        let mut found = 0;
        let mut attempts = 0;
        while found < n_probes && attempts < 50 * n_probes.max(1) {
            attempts += 1;
            let probe = DVector::from_iterator(
                bx.dim(),
                bx.lo
                    .iter()
                    .zip(bx.hi.iter())
                    .map(|(l, h)| lit::<S>(rng.gen_range(as_f64(*l)..=as_f64(*h)))),
            );
            if !game.feasible(i, &probe, x) {
                continue;
            }
            found += 1;
            tested += 1;
            let value = game.evaluate_objective(i, &x.replace_block(i, probe.clone())?)?;
            if value < current - epsilon {
                return Ok(Verdict::fails(
                    Witness::PreferredAlternative {
                        player: i + 1,
                        alternative: to_f64_vec(&probe),
                        objective_at_x: as_f64(current),
                        objective_at_alternative: as_f64(value),
                    },
                    tested,
                    seed,
                ));
            }
        }
    }
    Ok(Verdict::holds(tested, seed))
}

pub fn replay_geometric<S: Scalar>(
    game: &GameSpec<S>,
    x: &BlockVector<S>,
    epsilon: S,
    w: &Witness,
) -> bool {
    let Witness::PreferredAlternative {
        player, alternative, ..
    } = w
    else {
        return false;
    };
    let i = player - 1;
    let alt = DVector::from_iterator(alternative.len(), alternative.iter().map(|&f| lit::<S>(f)));
    if !game.feasible(i, &alt, x) {
        return false;
    }
    let current = match game.evaluate_objective(i, x) {
        Ok(v) => v,
        Err(_) => return false,
    };
    match x
        .replace_block(i, alt)
        .and_then(|b| game.evaluate_objective(i, &b))
    {
        Ok(v) => v < current - epsilon,
        Err(_) => false,
    }
}
