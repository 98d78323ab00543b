//! Block layouts, distance-generating functions, Bregman divergences, and
//! prox mappings.
//!
//! A vector in R^n is split into `l` coordinate blocks. Each block carries a
//! sampling probability, a mirror map (Euclidean or negative entropy), a
//! feasible set, and the constants (strong convexity, gradient smoothness,
//! radius) that the stepsize rules and error bounds consume.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Coordinates beneath this value are lifted before the entropy map takes a
/// logarithm, so the entropic prox stays finite near the simplex boundary.
pub const ENTROPY_FLOOR: f64 = 1e-12;

const PROB_SUM_TOL: f64 = 1e-12;
const FEASIBILITY_TOL: f64 = 1e-9;

/// Partition of R^n into blocks, with per-block sampling probabilities and
/// the geometry constants attached to each block's mirror map.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLayout {
    block_sizes: Vec<usize>,
    offsets: Vec<usize>,
    probs: Vec<f64>,
    mu_omega: Vec<f64>,
    l_omega: Vec<f64>,
    radii: Vec<f64>,
}

impl BlockLayout {
    /// Builds a layout and validates its invariants: probabilities are
    /// positive and sum to one, and `mu_omega[i] <= l_omega[i]` per block.
    pub fn new(
        block_sizes: Vec<usize>,
        probs: Vec<f64>,
        mu_omega: Vec<f64>,
        l_omega: Vec<f64>,
        radii: Vec<f64>,
    ) -> Result<Self> {
        let l = block_sizes.len();
        if l == 0 {
            return Err(Error::Validation("layout needs at least one block".into()));
        }
        for (name, v) in [
            ("probs", probs.len()),
            ("mu_omega", mu_omega.len()),
            ("l_omega", l_omega.len()),
            ("radii", radii.len()),
        ] {
            if v != l {
                return Err(Error::Validation(format!(
                    "{name} has {v} entries, expected {l}"
                )));
            }
        }
        if block_sizes.iter().any(|&n| n == 0) {
            return Err(Error::Validation("block sizes must be positive".into()));
        }
        if probs.iter().any(|&p| !(p > 0.0) || p > 1.0) {
            return Err(Error::Validation(
                "block probabilities must lie in (0, 1]".into(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::Validation(format!(
                "block probabilities sum to {sum}, expected 1"
            )));
        }
        for i in 0..l {
            if !(mu_omega[i] > 0.0) {
                return Err(Error::Validation(format!(
                    "block {i}: strong convexity constant must be positive"
                )));
            }
            if l_omega[i] < mu_omega[i] {
                return Err(Error::Validation(format!(
                    "block {i}: smoothness constant {} below strong convexity {}",
                    l_omega[i], mu_omega[i]
                )));
            }
            if !(radii[i] > 0.0) {
                return Err(Error::Validation(format!(
                    "block {i}: radius must be positive"
                )));
            }
        }
        let mut offsets = Vec::with_capacity(l + 1);
        let mut acc = 0;
        offsets.push(0);
        for &n in &block_sizes {
            acc += n;
            offsets.push(acc);
        }
        Ok(BlockLayout {
            block_sizes,
            offsets,
            probs,
            mu_omega,
            l_omega,
            radii,
        })
    }

    /// Uniform sampling over `l` blocks of equal size and identical constants.
    pub fn uniform(
        l: usize,
        block_size: usize,
        mu_omega: f64,
        l_omega: f64,
        radius: f64,
    ) -> Result<Self> {
        let p = 1.0 / l as f64;
        Self::new(
            vec![block_size; l],
            vec![p; l],
            vec![mu_omega; l],
            vec![l_omega; l],
            vec![radius; l],
        )
    }

    /// One block holding the whole vector.
    pub fn single(n: usize, mu_omega: f64, l_omega: f64, radius: f64) -> Result<Self> {
        Self::new(vec![n], vec![1.0], vec![mu_omega], vec![l_omega], vec![radius])
    }

    pub fn num_blocks(&self) -> usize {
        self.block_sizes.len()
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn block_size(&self, i: usize) -> usize {
        self.block_sizes[i]
    }

    pub fn block_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mu_omega(&self, i: usize) -> f64 {
        self.mu_omega[i]
    }

    pub fn l_omega(&self, i: usize) -> f64 {
        self.l_omega[i]
    }

    pub fn radius(&self, i: usize) -> f64 {
        self.radii[i]
    }

    /// Smallest block probability.
    pub fn p_min(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest block probability.
    pub fn p_max(&self) -> f64 {
        self.probs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest smoothness constant over blocks.
    pub fn l_omega_max(&self) -> f64 {
        self.l_omega.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest strong-convexity constant over blocks.
    pub fn mu_omega_min(&self) -> f64 {
        self.mu_omega.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// A vector tied to the layout that partitions it.
#[derive(Debug, Clone)]
pub struct Point {
    layout: Arc<BlockLayout>,
    values: Vec<f64>,
}

impl Point {
    pub fn new(layout: Arc<BlockLayout>, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.dim() {
            return Err(Error::Validation(format!(
                "point has {} coordinates, layout expects {}",
                values.len(),
                layout.dim()
            )));
        }
        Ok(Point { layout, values })
    }

    pub fn zeros(layout: Arc<BlockLayout>) -> Self {
        let n = layout.dim();
        Point {
            layout,
            values: vec![0.0; n],
        }
    }

    pub fn layout(&self) -> &Arc<BlockLayout> {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.values[self.layout.block_range(i)]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        let range = self.layout.block_range(i);
        &mut self.values[range]
    }

    pub fn same_layout(&self, other: &Point) -> bool {
        Arc::ptr_eq(&self.layout, &other.layout) || *self.layout == *other.layout
    }
}

impl PartialEq for Point {
    fn eq(&self, other: &Self) -> bool {
        self.same_layout(other) && self.values == other.values
    }
}

/// Mirror map for one block. Euclidean pairs with the l2 norm; negative
/// entropy lives on the simplex and pairs with the l1 norm (l-infinity dual).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceGenerator {
    Euclidean,
    NegativeEntropy,
}

impl DistanceGenerator {
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        match self {
            DistanceGenerator::Euclidean => Ok(0.5 * x.iter().map(|v| v * v).sum::<f64>()),
            DistanceGenerator::NegativeEntropy => {
                check_entropy_domain(x)?;
                Ok(x.iter().map(|&v| v * v.ln()).sum())
            }
        }
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            DistanceGenerator::Euclidean => Ok(x.to_vec()),
            DistanceGenerator::NegativeEntropy => {
                check_entropy_domain(x)?;
                Ok(x.iter().map(|&v| 1.0 + v.ln()).collect())
            }
        }
    }

    /// Bregman divergence `omega(b2) - omega(b1) - <grad omega(b1), b2 - b1>`.
    pub fn bregman(&self, b1: &[f64], b2: &[f64]) -> Result<f64> {
        check_same_dim(b1, b2)?;
        match self {
            DistanceGenerator::Euclidean => Ok(0.5
                * b1.iter()
                    .zip(b2)
                    .map(|(a, b)| (b - a) * (b - a))
                    .sum::<f64>()),
            DistanceGenerator::NegativeEntropy => {
                check_entropy_domain(b1)?;
                check_entropy_domain(b2)?;
                // Generalized KL: sums of b1 and b2 cancel on the simplex.
                Ok(b1
                    .iter()
                    .zip(b2)
                    .map(|(&a, &b)| b * (b / a).ln() - b + a)
                    .sum())
            }
        }
    }

    /// Gradient of `b2 -> bregman(b1, b2)`, namely
    /// `grad omega(b2) - grad omega(b1)`.
    pub fn bregman_partial_grad(&self, b1: &[f64], b2: &[f64]) -> Result<Vec<f64>> {
        check_same_dim(b1, b2)?;
        let g1 = self.grad(b1)?;
        let g2 = self.grad(b2)?;
        Ok(g2.iter().zip(&g1).map(|(a, b)| a - b).collect())
    }

    /// Squared dual norm of a gradient-space vector: squared l2 for the
    /// Euclidean map, squared max magnitude for the entropy map.
    pub fn dual_norm_sq(&self, v: &[f64]) -> f64 {
        match self {
            DistanceGenerator::Euclidean => v.iter().map(|a| a * a).sum(),
            DistanceGenerator::NegativeEntropy => {
                let m = v.iter().fold(0.0f64, |acc, a| acc.max(a.abs()));
                m * m
            }
        }
    }

    /// Squared primal block norm: l2 for Euclidean, l1 for entropy.
    pub fn norm_sq(&self, x: &[f64]) -> f64 {
        match self {
            DistanceGenerator::Euclidean => x.iter().map(|a| a * a).sum(),
            DistanceGenerator::NegativeEntropy => {
                let s: f64 = x.iter().map(|a| a.abs()).sum();
                s * s
            }
        }
    }
}

fn check_entropy_domain(x: &[f64]) -> Result<()> {
    if let Some(j) = x.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Domain(format!(
            "entropy map needs strictly positive coordinates, got {} at index {j}",
            x[j]
        )));
    }
    Ok(())
}

fn check_same_dim(b1: &[f64], b2: &[f64]) -> Result<()> {
    if b1.len() != b2.len() {
        return Err(Error::Validation(format!(
            "block dimension mismatch: {} vs {}",
            b1.len(),
            b2.len()
        )));
    }
    Ok(())
}

/// Feasible set for one block.
#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleBlock {
    /// Per-coordinate interval constraints.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Origin-centered Euclidean ball.
    Ball { radius: f64 },
    /// Probability simplex.
    Simplex,
}

impl FeasibleBlock {
    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Validation("box bounds length mismatch".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(Error::Validation("box has an empty interval".into()));
        }
        Ok(FeasibleBlock::Box { lower, upper })
    }

    pub fn ball(radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Validation("ball radius must be positive".into()));
        }
        Ok(FeasibleBlock::Ball { radius })
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            FeasibleBlock::Box { lower, upper } => {
                x.len() == lower.len()
                    && x.iter()
                        .zip(lower.iter().zip(upper))
                        .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol)
            }
            FeasibleBlock::Ball { radius } => {
                x.iter().map(|v| v * v).sum::<f64>().sqrt() <= radius + tol
            }
            FeasibleBlock::Simplex => {
                x.iter().all(|&v| v >= -tol) && (x.iter().sum::<f64>() - 1.0).abs() <= tol
            }
        }
    }

    /// Largest block norm any admitted point can have, under the norm paired
    /// with `dgf`. Used to certify the layout radius bound.
    pub fn max_norm(&self, dgf: DistanceGenerator) -> f64 {
        match (self, dgf) {
            (FeasibleBlock::Box { lower, upper }, DistanceGenerator::Euclidean) => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| l.abs().max(u.abs()).powi(2))
                .sum::<f64>()
                .sqrt(),
            (FeasibleBlock::Box { lower, upper }, DistanceGenerator::NegativeEntropy) => {
                lower.iter().zip(upper).map(|(l, u)| l.abs().max(u.abs())).sum()
            }
            (FeasibleBlock::Ball { radius }, _) => *radius,
            (FeasibleBlock::Simplex, _) => 1.0,
        }
    }
}

/// Mirror map plus feasible set for one block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGeometry {
    pub dgf: DistanceGenerator,
    pub set: FeasibleBlock,
}

/// Per-block geometry for a whole layout.
#[derive(Debug, Clone)]
pub struct Geometry {
    layout: Arc<BlockLayout>,
    blocks: Vec<BlockGeometry>,
}

impl Geometry {
    pub fn new(layout: Arc<BlockLayout>, blocks: Vec<BlockGeometry>) -> Result<Self> {
        if blocks.len() != layout.num_blocks() {
            return Err(Error::Validation(format!(
                "{} block geometries for a layout with {} blocks",
                blocks.len(),
                layout.num_blocks()
            )));
        }
        for (i, b) in blocks.iter().enumerate() {
            if let FeasibleBlock::Box { lower, .. } = &b.set {
                if lower.len() != layout.block_size(i) {
                    return Err(Error::Validation(format!(
                        "block {i}: box dimension {} does not match block size {}",
                        lower.len(),
                        layout.block_size(i)
                    )));
                }
            }
            let max_norm = b.set.max_norm(b.dgf);
            if max_norm > layout.radius(i) + FEASIBILITY_TOL {
                return Err(Error::Validation(format!(
                    "block {i}: feasible set admits norm {max_norm}, above radius {}",
                    layout.radius(i)
                )));
            }
        }
        Ok(Geometry { layout, blocks })
    }

    /// Euclidean map with an origin-centered ball of the layout radius on
    /// every block.
    pub fn euclidean_balls(layout: Arc<BlockLayout>) -> Result<Self> {
        let blocks = (0..layout.num_blocks())
            .map(|i| {
                Ok(BlockGeometry {
                    dgf: DistanceGenerator::Euclidean,
                    set: FeasibleBlock::ball(layout.radius(i))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Geometry::new(layout, blocks)
    }

    pub fn layout(&self) -> &Arc<BlockLayout> {
        &self.layout
    }

    pub fn dgf(&self, i: usize) -> DistanceGenerator {
        self.blocks[i].dgf
    }

    pub fn set(&self, i: usize) -> &FeasibleBlock {
        &self.blocks[i].set
    }

    pub fn is_feasible(&self, point: &Point) -> bool {
        (0..self.layout.num_blocks())
            .all(|i| self.blocks[i].set.contains(point.block(i), FEASIBILITY_TOL))
    }

    /// Squared distance between two points under the blockwise norm, i.e.
    /// the sum of squared per-block norms.
    pub fn sq_dist(&self, a: &Point, b: &Point) -> Result<f64> {
        if !a.same_layout(b) {
            return Err(Error::Validation("points use different layouts".into()));
        }
        let mut total = 0.0;
        for i in 0..self.layout.num_blocks() {
            let diff: Vec<f64> = a.block(i).iter().zip(b.block(i)).map(|(x, y)| x - y).collect();
            total += self.blocks[i].dgf.norm_sq(&diff);
        }
        Ok(total)
    }
}

/// Prox mapping `argmin_{z in set} <v, z> + D(b1, z)`.
///
/// `v` must already carry the stepsize factor. Only the closed-form pairs
/// are solved: gradient-step-and-clip on a box, radial projection on a ball
/// (both Euclidean), and exponentiated-gradient normalization on the simplex
/// (entropy). Other pairings are rejected.
pub fn prox_map(
    dgf: DistanceGenerator,
    set: &FeasibleBlock,
    b1: &[f64],
    v: &[f64],
) -> Result<Vec<f64>> {
    check_same_dim(b1, v)?;
    if v.iter().any(|a| !a.is_finite()) {
        return Err(Error::Validation("prox direction has non-finite entries".into()));
    }
    if !set.contains(b1, FEASIBILITY_TOL) {
        return Err(Error::Infeasible(
            "prox base point lies outside the feasible set".into(),
        ));
    }
    match (dgf, set) {
        (DistanceGenerator::Euclidean, FeasibleBlock::Box { lower, upper }) => Ok(b1
            .iter()
            .zip(v)
            .zip(lower.iter().zip(upper))
            .map(|((x, g), (l, u))| (x - g).clamp(*l, *u))
            .collect()),
        (DistanceGenerator::Euclidean, FeasibleBlock::Ball { radius }) => {
            let y: Vec<f64> = b1.iter().zip(v).map(|(x, g)| x - g).collect();
            let norm = y.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm <= *radius {
                Ok(y)
            } else {
                let scale = radius / norm;
                Ok(y.into_iter().map(|a| a * scale).collect())
            }
        }
        (DistanceGenerator::NegativeEntropy, FeasibleBlock::Simplex) => {
            // z_j proportional to b1_j * exp(-v_j); shift by the minimum
            // component of v before exponentiating to avoid overflow.
            let shift = v.iter().copied().fold(f64::INFINITY, f64::min);
            let mut z: Vec<f64> = b1
                .iter()
                .zip(v)
                .map(|(x, g)| x.max(ENTROPY_FLOOR) * (-(g - shift)).exp())
                .collect();
            let sum: f64 = z.iter().sum();
            if !(sum > 0.0) || !sum.is_finite() {
                return Err(Error::Internal(
                    "entropic prox normalization degenerated".into(),
                ));
            }
            for a in &mut z {
                *a /= sum;
            }
            // Keep coordinates off the boundary so later gradients exist.
            let mut clipped = false;
            for a in &mut z {
                if *a < ENTROPY_FLOOR {
                    *a = ENTROPY_FLOOR;
                    clipped = true;
                }
            }
            if clipped {
                let sum: f64 = z.iter().sum();
                for a in &mut z {
                    *a /= sum;
                }
            }
            Ok(z)
        }
        (dgf, set) => Err(Error::Validation(format!(
            "no closed-form prox for {dgf:?} over {set:?}"
        ))),
    }
}
