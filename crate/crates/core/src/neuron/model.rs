use crate::error::{Error, Result};
use crate::numerics::{sample_gaussian_inputs, DenseMatrix, Rng};

/// Joint sign of the outer weight `a` and the first inner weight `w_1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SignQuadrant {
    PosPos,
    PosNeg,
    NegPos,
    NegNeg,
}

impl SignQuadrant {
    pub const ALL: [SignQuadrant; 4] = [
        SignQuadrant::PosPos,
        SignQuadrant::PosNeg,
        SignQuadrant::NegPos,
        SignQuadrant::NegNeg,
    ];

    /// `None` when either value is exactly zero.
    pub fn from_signs(a: f64, w1: f64) -> Option<Self> {
        match (a.partial_cmp(&0.0)?, w1.partial_cmp(&0.0)?) {
            (std::cmp::Ordering::Greater, std::cmp::Ordering::Greater) => Some(Self::PosPos),
            (std::cmp::Ordering::Greater, std::cmp::Ordering::Less) => Some(Self::PosNeg),
            (std::cmp::Ordering::Less, std::cmp::Ordering::Greater) => Some(Self::NegPos),
            (std::cmp::Ordering::Less, std::cmp::Ordering::Less) => Some(Self::NegNeg),
            _ => None,
        }
    }

    pub fn a_sign(self) -> f64 {
        match self {
            Self::PosPos | Self::PosNeg => 1.0,
            Self::NegPos | Self::NegNeg => -1.0,
        }
    }

    pub fn w1_sign(self) -> f64 {
        match self {
            Self::PosPos | Self::NegPos => 1.0,
            Self::PosNeg | Self::NegNeg => -1.0,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::PosPos => "a+w+",
            Self::PosNeg => "a+w-",
            Self::NegPos => "a-w+",
            Self::NegNeg => "a-w-",
        }
    }
}

impl std::fmt::Display for SignQuadrant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// `f(x) = a * relu(w . x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronParams {
    pub a: f64,
    pub w: Vec<f64>,
}

impl NeuronParams {
    pub fn new(a: f64, w: Vec<f64>) -> Self {
        Self { a, w }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn w_norm_sq(&self) -> f64 {
        self.w.iter().map(|v| v * v).sum()
    }

    /// `a^2 - |w|^2`; zero for a balanced neuron.
    pub fn imbalance(&self) -> f64 {
        self.a * self.a - self.w_norm_sq()
    }

    pub fn quadrant(&self) -> Option<SignQuadrant> {
        SignQuadrant::from_signs(self.a, self.w[0])
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.a * dot(&self.w, x).max(0.0)
    }

    /// Flattened `[a, w_1, ..., w_d]`.
    pub fn to_state(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.w.len() + 1);
        s.push(self.a);
        s.extend_from_slice(&self.w);
        s
    }

    pub fn from_state(state: &[f64]) -> Self {
        Self {
            a: state[0],
            w: state[1..].to_vec(),
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Training set for the single-neuron problem: rows of `x`, labels `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronData {
    pub x: DenseMatrix,
    pub y: Vec<f64>,
    pub noise_sigma: f64,
}

impl NeuronData {
    pub fn new(x: DenseMatrix, y: Vec<f64>, noise_sigma: f64) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::shape(format!(
                "{} inputs but {} labels",
                x.rows(),
                y.len()
            )));
        }
        Ok(Self { x, y, noise_sigma })
    }

    /// `x_i ~ N(0, I/d)`, `y_i = relu(x_i1) + zeta_i` with `zeta_i ~ N(0, sigma^2)`.
    pub fn synthesize(n: usize, d: usize, noise_sigma: f64, rng: &mut Rng) -> Self {
        let x = sample_gaussian_inputs(n, d, rng);
        let y = (0..n)
            .map(|i| x.get(i, 0).max(0.0) + noise_sigma * rng.standard_normal())
            .collect();
        Self { x, y, noise_sigma }
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    /// Keeps only the listed input coordinates (a pruned neuron's view).
    pub fn restrict_inputs(&self, coords: &[usize]) -> Self {
        let n = self.n();
        let mut data = Vec::with_capacity(n * coords.len());
        for i in 0..n {
            let row = self.x.row(i);
            data.extend(coords.iter().map(|&c| row[c]));
        }
        Self {
            x: DenseMatrix::from_vec(n, coords.len(), data).expect("finite subset"),
            y: self.y.clone(),
            noise_sigma: self.noise_sigma,
        }
    }
}

/// Mean squared error `1/(2n) sum (f(x_i) - y_i)^2`.
pub fn objective(params: &NeuronParams, data: &NeuronData) -> f64 {
    let n = data.n();
    let sum: f64 = (0..n)
        .map(|i| {
            let r = params.predict(data.x.row(i)) - data.y[i];
            r * r
        })
        .sum();
    sum / (2.0 * n as f64)
}

/// `w ~ scale * N(0, I/d)` and `a = +-|w|` with a fair sign, so
/// `a^2 = |w|^2` holds up to rounding.
pub fn balanced_init(d: usize, scale: f64, rng: &mut Rng) -> NeuronParams {
    assert!(
        d >= 1 && scale > 0.0,
        "balanced_init needs d >= 1, scale > 0"
    );
    let std = scale / (d as f64).sqrt();
    let w: Vec<f64> = (0..d).map(|_| std * rng.standard_normal()).collect();
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    let a = if rng.coin() { norm } else { -norm };
    NeuronParams { a, w }
}

/// Balanced initialization conditioned on a sign quadrant: the magnitudes
/// are drawn as in [`balanced_init`], then `a` and `w_1` get the requested
/// signs.
pub fn balanced_init_in_quadrant(
    d: usize,
    scale: f64,
    quadrant: SignQuadrant,
    rng: &mut Rng,
) -> NeuronParams {
    let mut p = balanced_init(d, scale, rng);
    p.a = quadrant.a_sign() * p.a.abs();
    p.w[0] = quadrant.w1_sign() * p.w[0].abs();
    p
}

/// Redraws [`balanced_init_in_quadrant`] until `0 < |a| |w| <= max_product`.
pub fn bounded_balanced_init(
    d: usize,
    scale: f64,
    quadrant: SignQuadrant,
    max_product: f64,
    rng: &mut Rng,
) -> NeuronParams {
    loop {
        let p = balanced_init_in_quadrant(d, scale, quadrant, rng);
        let product = p.a.abs() * p.w_norm_sq().sqrt();
        if product > 0.0 && product <= max_product {
            return p;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn univariate_init_is_exactly_balanced() {
        let mut rng = Rng::new(1);
        for _ in 0..100 {
            let p = balanced_init(1, 1.0, &mut rng);
            assert_eq!(p.a.abs(), p.w[0].abs());
        }
    }

    #[test]
    fn multivariate_init_is_balanced() {
        for seed in 0..50 {
            let p = balanced_init(10, 0.7, &mut Rng::new(seed));
            assert!(p.imbalance().abs() <= 1e-12);
        }
    }

    #[test]
    fn quadrant_frequencies_are_uniform() {
        let mut counts = [0usize; 4];
        for seed in 0..10_000 {
            let p = balanced_init(3, 1.0, &mut Rng::new(seed));
            counts[p.quadrant().unwrap().index()] += 1;
        }
        for c in counts {
            let f = c as f64 / 10_000.0;
            assert!((f - 0.25).abs() <= 0.02, "quadrant frequency {f}");
        }
    }

    #[test]
    fn forced_quadrant_keeps_balance() {
        let mut rng = Rng::new(2);
        for q in SignQuadrant::ALL {
            let p = balanced_init_in_quadrant(5, 1.0, q, &mut rng);
            assert_eq!(p.quadrant(), Some(q));
            assert!(p.imbalance().abs() <= 1e-12);
        }
    }

    #[test]
    fn bounded_init_respects_product_bound() {
        let mut rng = Rng::new(8);
        for _ in 0..200 {
            let p = bounded_balanced_init(2, 2.0, SignQuadrant::NegPos, 2.0, &mut rng);
            assert!(p.a.abs() * p.w_norm_sq().sqrt() <= 2.0);
        }
    }

    #[test]
    fn synthesized_labels_follow_target() {
        let data = NeuronData::synthesize(50, 3, 0.0, &mut Rng::new(4));
        for i in 0..50 {
            assert_eq!(data.y[i], data.x.get(i, 0).max(0.0));
        }
        let truth = NeuronParams::new(1.0, vec![1.0, 0.0, 0.0]);
        assert_eq!(objective(&truth, &data), 0.0);
    }
}
