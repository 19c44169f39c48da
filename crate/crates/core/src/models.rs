//! Seeded samplers for the example processes and small exact trees.
//!
//! Every sampler draws from a single [`SeededRng`], path by path, time by
//! time, coordinate by coordinate, so `(model, n, seed)` fixes the output
//! bit for bit.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::measure::{ModelMetadata, PathMeasureTree};
use crate::paths::{Dims, PathSample};
use crate::rng::SeededRng;

/// Drift and volatility pair of a discretized SDE, applied coordinatewise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdePreset {
    /// `mu(x) = 0.1 x`, `sigma(x) = 0.2 x`.
    Linear,
    /// `mu(x) = sin x`, `sigma(x) = 1 + 0.5 cos x`.
    Trig,
}

impl SdePreset {
    fn drift(self, x: f64) -> f64 {
        match self {
            SdePreset::Linear => 0.1 * x,
            SdePreset::Trig => x.sin(),
        }
    }

    fn vol(self, x: f64) -> f64 {
        match self {
            SdePreset::Linear => 0.2 * x,
            SdePreset::Trig => 1.0 + 0.5 * x.cos(),
        }
    }
}

impl FromStr for SdePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(SdePreset::Linear),
            "trig" => Ok(SdePreset::Trig),
            _ => Err(Error::InvalidParameter(format!(
                "unknown SDE preset {s:?} (expected linear or trig)"
            ))),
        }
    }
}

impl fmt::Display for SdePreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SdePreset::Linear => "linear",
            SdePreset::Trig => "trig",
        })
    }
}

/// The process families.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelKind {
    /// `X_1 = 1`, `X_{t+1} = X_t + sqrt(dt) X_t * eps_t`.
    BlackScholesDisc { dt: f64 },
    /// Euler scheme `X_{t+1} = X_t + mu(X_t) dt + sigma(X_t) sqrt(dt) eps_t`
    /// started at `x0` (the ones vector when `None`).
    SdeDisc {
        dt: f64,
        preset: SdePreset,
        x0: Option<Vec<f64>>,
    },
    /// `X_1 = 0`, `X_{t+1} = X_t + eps_t`.
    GaussianWalk,
    /// `X_1 ~ N(0, I)`, `X_{t+1} = a X_t + eps_t`.
    ArOne { a: f64 },
    /// All coordinates i.i.d. uniform on `[-radius, radius]`.
    UniformCube { radius: f64 },
    /// Paths drawn from a finite tree.
    CustomTree { tree: PathMeasureTree },
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::BlackScholesDisc { .. } => "black-scholes",
            ModelKind::SdeDisc { .. } => "sde",
            ModelKind::GaussianWalk => "gaussian-walk",
            ModelKind::ArOne { .. } => "ar1",
            ModelKind::UniformCube { .. } => "uniform-cube",
            ModelKind::CustomTree { .. } => "tree",
        }
    }
}

/// A validated model with its dimensions and declared regularity.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    kind: ModelKind,
    dims: Dims,
    metadata: ModelMetadata,
}

fn check_dt(dt: f64) -> Result<()> {
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::InvalidParameter(format!("time step must be finite and positive, got {dt}")));
    }
    Ok(())
}

impl ModelSpec {
    pub fn new(kind: ModelKind, dims: Dims) -> Result<Self> {
        let d = dims.d() as f64;
        let gauss_tails = |m: ModelMetadata| ModelMetadata {
            exp_alpha: Some(2.0),
            exp_gamma: Some(0.25),
            ..m
        };
        let metadata = match &kind {
            ModelKind::BlackScholesDisc { dt } => {
                check_dt(*dt)?;
                gauss_tails(ModelMetadata {
                    lipschitz_l: Some((1.0 + d * dt).sqrt()),
                    growth_r: Some(1.0),
                    ..Default::default()
                })
            }
            ModelKind::SdeDisc { dt, preset, x0 } => {
                check_dt(*dt)?;
                if let Some(x0) = x0 {
                    if x0.len() != dims.d() {
                        return Err(Error::DimensionMismatch {
                            expected: dims.d(),
                            found: x0.len(),
                        });
                    }
                    crate::paths::check_finite(x0)?;
                }
                let (l, r) = match preset {
                    SdePreset::Linear => (1.0 + 0.1 * dt + 0.2 * dt.sqrt(), 1.0),
                    SdePreset::Trig => (1.0 + dt + 0.5 * dt.sqrt(), 0.0),
                };
                gauss_tails(ModelMetadata {
                    lipschitz_l: Some(l),
                    growth_r: Some(r),
                    ..Default::default()
                })
            }
            ModelKind::GaussianWalk => gauss_tails(ModelMetadata {
                lipschitz_l: Some(1.0),
                growth_r: Some(0.0),
                ..Default::default()
            }),
            ModelKind::ArOne { a } => {
                if !a.is_finite() {
                    return Err(Error::InvalidParameter(format!("AR coefficient must be finite, got {a}")));
                }
                gauss_tails(ModelMetadata {
                    lipschitz_l: Some(a.abs()),
                    growth_r: Some(0.0),
                    ..Default::default()
                })
            }
            ModelKind::UniformCube { radius } => {
                if !radius.is_finite() || *radius <= 0.0 {
                    return Err(Error::InvalidParameter(format!("cube radius must be positive, got {radius}")));
                }
                gauss_tails(ModelMetadata {
                    lipschitz_l: Some(0.0),
                    growth_r: Some(0.0),
                    ..Default::default()
                })
            }
            ModelKind::CustomTree { tree } => {
                if tree.dims() != dims {
                    return Err(Error::DimensionMismatch {
                        expected: dims.len(),
                        found: tree.dims().len(),
                    });
                }
                ModelMetadata::default()
            }
        };
        Ok(Self {
            kind,
            dims,
            metadata,
        })
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn metadata(&self) -> ModelMetadata {
        self.metadata
    }

    /// Short identifier used in reports, e.g. `gaussian-walk-d1-T2`.
    pub fn id(&self) -> String {
        format!("{}-d{}-T{}", self.kind.name(), self.dims.d(), self.dims.t())
    }

    /// The law itself when it is finitely supported.
    pub fn exact_tree(&self) -> Option<&PathMeasureTree> {
        match &self.kind {
            ModelKind::CustomTree { tree } => Some(tree),
            _ => None,
        }
    }

    /// `n` i.i.d. paths.
    pub fn sample(&self, n: usize, seed: u64) -> Result<PathSample> {
        if n == 0 {
            return Err(Error::InvalidParameter("sample size must be at least 1".into()));
        }
        let d = self.dims.d();
        let t_max = self.dims.t();
        let k = self.dims.len();
        let mut rng = SeededRng::new(seed);
        let mut data = vec![0.0; n * k];
        for x in data.chunks_exact_mut(k) {
            match &self.kind {
                ModelKind::BlackScholesDisc { dt } => {
                    let s = dt.sqrt();
                    x[..d].fill(1.0);
                    for t in 1..t_max {
                        for c in 0..d {
                            let prev = x[(t - 1) * d + c];
                            x[t * d + c] = prev + s * prev * rng.normal();
                        }
                    }
                }
                ModelKind::SdeDisc { dt, preset, x0 } => {
                    let s = dt.sqrt();
                    match x0 {
                        Some(v) => x[..d].copy_from_slice(v),
                        None => x[..d].fill(1.0),
                    }
                    for t in 1..t_max {
                        for c in 0..d {
                            let prev = x[(t - 1) * d + c];
                            x[t * d + c] =
                                prev + preset.drift(prev) * dt + preset.vol(prev) * s * rng.normal();
                        }
                    }
                }
                ModelKind::GaussianWalk => {
                    for t in 1..t_max {
                        for c in 0..d {
                            x[t * d + c] = x[(t - 1) * d + c] + rng.normal();
                        }
                    }
                }
                ModelKind::ArOne { a } => {
                    for v in &mut x[..d] {
                        *v = rng.normal();
                    }
                    for t in 1..t_max {
                        for c in 0..d {
                            x[t * d + c] = a * x[(t - 1) * d + c] + rng.normal();
                        }
                    }
                }
                ModelKind::UniformCube { radius } => {
                    for v in x.iter_mut() {
                        *v = rng.uniform_in(-radius, *radius);
                    }
                }
                ModelKind::CustomTree { tree } => sample_tree_path(tree, &mut rng, x),
            }
        }
        PathSample::from_flat(self.dims, data, seed)
    }
}

/// Draws one path from a tree: at each level one uniform selects a child in
/// proportion to its count.
fn sample_tree_path(tree: &PathMeasureTree, rng: &mut SeededRng, out: &mut [f64]) {
    let d = tree.dims().d();
    let mut range = 0..tree.level(1).len();
    let mut mass = tree.total();
    for t in 1..=tree.dims().t() {
        let nodes = &tree.level(t)[range.clone()];
        let target = ((rng.uniform() * mass as f64) as u64).min(mass - 1);
        let mut acc = 0;
        let mut pick = nodes.len() - 1;
        for (k, node) in nodes.iter().enumerate() {
            acc += node.count;
            if acc > target {
                pick = k;
                break;
            }
        }
        let node = &nodes[pick];
        out[(t - 1) * d..t * d].copy_from_slice(&node.point);
        mass = node.count;
        range = node.children.clone();
    }
}

/// The two-leaf pair with equal flat distance `epsilon` but adapted distance
/// `1 + epsilon`: `mu = (delta_(0,1) + delta_(0,-1)) / 2` and
/// `nu = (delta_(eps,1) + delta_(-eps,-1)) / 2`.
pub fn figure1_pair(epsilon: f64) -> Result<(PathMeasureTree, PathMeasureTree)> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let dims = Dims::new(1, 2)?;
    let mu = PathMeasureTree::from_leaves(dims, [([0.0, 1.0], 1), ([0.0, -1.0], 1)])?;
    let nu = PathMeasureTree::from_leaves(dims, [([epsilon, 1.0], 1), ([-epsilon, -1.0], 1)])?;
    Ok((mu, nu))
}

/// Names accepted by [`ground_truth_tree`].
pub const TREE_PRESETS: [&str; 3] = ["coin2", "coin2-biased", "markov3"];

/// Small finitely supported laws whose adapted distance to any tree is
/// computable exactly.
///
/// - `coin2`: two fair +-1 coins, four leaves of weight 1/4.
/// - `coin2-biased`: two independent coins showing +1 with probability 3/4.
/// - `markov3`: a +-1 chain over three steps, fair start, staying put with
///   probability 3/4.
pub fn ground_truth_tree(preset: &str) -> Result<PathMeasureTree> {
    let signs = [1.0, -1.0];
    match preset {
        "coin2" | "coin2-biased" => {
            let heads = if preset == "coin2" { 1 } else { 3 };
            let w = |x: f64| if x > 0.0 { heads } else { 1 };
            let leaves: Vec<([f64; 2], u64)> = signs
                .iter()
                .flat_map(|&a| signs.iter().map(move |&b| ([a, b], w(a) * w(b))))
                .collect();
            PathMeasureTree::from_leaves(Dims::new(1, 2)?, leaves)
        }
        "markov3" => {
            let stay = |a: f64, b: f64| if a == b { 3 } else { 1 };
            let mut leaves = Vec::new();
            for &a in &signs {
                for &b in &signs {
                    for &c in &signs {
                        leaves.push(([a, b, c], stay(a, b) * stay(b, c)));
                    }
                }
            }
            PathMeasureTree::from_leaves(Dims::new(1, 3)?, leaves)
        }
        _ => Err(Error::InvalidParameter(format!(
            "unknown tree preset {preset:?} (expected one of {})",
            TREE_PRESETS.join(", ")
        ))),
    }
}

/// A random tree: every node has between 1 and `fanout` children with
/// standard normal points, and every leaf a count in `1..=9`.
pub fn random_tree(dims: Dims, fanout: usize, rng: &mut SeededRng) -> Result<PathMeasureTree> {
    if fanout == 0 {
        return Err(Error::InvalidParameter("fan-out must be at least 1".into()));
    }
    let d = dims.d();
    let mut prefixes: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in 0..dims.t() {
        let mut next = Vec::new();
        for prefix in &prefixes {
            let kids = 1 + (rng.next_u64() % fanout as u64) as usize;
            for _ in 0..kids {
                let mut x = prefix.clone();
                x.extend((0..d).map(|_| rng.normal()));
                next.push(x);
            }
        }
        prefixes = next;
    }
    let leaves: Vec<(Vec<f64>, u64)> = prefixes
        .into_iter()
        .map(|x| (x, 1 + rng.next_u64() % 9))
        .collect();
    PathMeasureTree::from_leaves(dims, leaves)
}
