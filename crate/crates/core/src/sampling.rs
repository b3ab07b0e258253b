//! Deterministic sampling boxes for the numerical certification checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::spacetime::ModelKind;

/// Four-dimensional Sobol sequence (Joe–Kuo direction numbers).
#[derive(Debug, Clone)]
pub struct Sobol4 {
    directions: [[u32; 32]; 4],
    state: [u32; 4],
    index: u32,
}

impl Sobol4 {
    pub fn new() -> Self {
        // (s, a, m) for dimensions 2..4; dimension 1 is van der Corput.
        const PARAMS: [(usize, u32, &[u32]); 3] = [(1, 0, &[1]), (2, 1, &[1, 3]), (3, 1, &[1, 3, 1])];
        let mut directions = [[0u32; 32]; 4];
        for k in 0..32 {
            directions[0][k] = 1u32 << (31 - k);
        }
        for (d, &(s, a, m)) in PARAMS.iter().enumerate() {
            let v = &mut directions[d + 1];
            for k in 0..s {
                v[k] = m[k] << (31 - k);
            }
            for k in s..32 {
                let mut x = v[k - s] ^ (v[k - s] >> s);
                for j in 1..s {
                    if (a >> (s - 1 - j)) & 1 == 1 {
                        x ^= v[k - j];
                    }
                }
                v[k] = x;
            }
        }
        Sobol4 { directions, state: [0; 4], index: 0 }
    }
}

impl Default for Sobol4 {
    fn default() -> Self {
        Sobol4::new()
    }
}

impl Iterator for Sobol4 {
    type Item = [f64; 4];

    /// Points in `[0,1)^4`, starting after the origin.
    fn next(&mut self) -> Option<[f64; 4]> {
        let c = self.index.trailing_ones() as usize;
        if c >= 32 {
            return None;
        }
        for d in 0..4 {
            self.state[d] ^= self.directions[d][c];
        }
        self.index += 1;
        Some(self.state.map(|s| s as f64 / 4294967296.0))
    }
}

/// Sampling box and tolerances shared by the full-time-derivative and
/// symmetry checks.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingConfig {
    pub center: [f64; 4],
    pub half_width: f64,
    pub points: usize,
    pub directions: usize,
    pub tol: f64,
    pub seed: u64,
    pub min_points: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            center: [0.0; 4],
            half_width: 10.0,
            points: 256,
            directions: 16,
            tol: 1e-7,
            seed: 0x5EED_0F_1A66,
            min_points: 8,
        }
    }
}

impl SamplingConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.points < self.min_points {
            return Err(Error::SamplingDegenerate(format!(
                "{} sample points, need at least {}",
                self.points, self.min_points
            )));
        }
        if self.directions < 2 {
            return Err(Error::SamplingDegenerate("need at least 2 velocity directions".into()));
        }
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(Error::SamplingDegenerate(format!("box half-width {} must be positive", self.half_width)));
        }
        Ok(())
    }
}

/// One sample point with its velocity directions and the positive
/// coefficients used for the linearity probe `f(αw_j + βw_{j+1})`.
#[derive(Debug, Clone)]
pub struct SamplePoint {
    pub x: [f64; 4],
    pub dirs: Vec<[f64; 4]>,
    pub coeffs: Vec<(f64, f64)>,
}

/// Random future-like direction, comfortably inside the cone.
pub fn random_future_vector(model: ModelKind, rng: &mut impl Rng) -> [f64; 4] {
    let lambda = rng.random_range(0.5..2.0);
    let v: [f64; 3] = match model {
        ModelKind::NonRelativistic => std::array::from_fn(|_| rng.random_range(-3.0..3.0)),
        ModelKind::Relativistic => std::array::from_fn(|_| rng.random_range(-0.46..0.46)),
    };
    [lambda, lambda * v[0], lambda * v[1], lambda * v[2]]
}

pub fn sample_points(model: ModelKind, cfg: &SamplingConfig) -> Result<Vec<SamplePoint>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pts = Sobol4::new()
        .take(cfg.points)
        .map(|u| {
            let x = std::array::from_fn(|i| cfg.center[i] + cfg.half_width * (2.0 * u[i] - 1.0));
            let dirs = (0..cfg.directions).map(|_| random_future_vector(model, &mut rng)).collect();
            let coeffs = (0..cfg.directions)
                .map(|_| (rng.random_range(0.1..2.0), rng.random_range(0.1..2.0)))
                .collect();
            SamplePoint { x, dirs, coeffs }
        })
        .collect();
    Ok(pts)
}
