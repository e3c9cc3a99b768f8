use std::sync::Arc;

/// Rectangular box in parameter space.
#[derive(Debug, Clone)]
pub struct ParamBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ParamBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        ParamBox { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, mu: &[f64]) -> bool {
        mu.len() == self.dim()
            && mu
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(m, (lo, hi))| *m >= *lo && *m <= *hi)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

pub type CoeffFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type ShapeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type SourceFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// Inflow profile g(x, y, Omega); the parametric part lives in the
/// piece coefficient.
pub type InflowProfileFn = Arc<dyn Fn(f64, f64, [f64; 3]) -> f64 + Send + Sync>;

/// One affine term of a cross-section field: `coeff(mu) * shape(x, y)`.
#[derive(Clone)]
pub struct CrossSectionPiece {
    pub coeff: CoeffFn,
    pub shape: ShapeFn,
}

impl CrossSectionPiece {
    pub fn new(
        coeff: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        shape: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        CrossSectionPiece { coeff: Arc::new(coeff), shape: Arc::new(shape) }
    }
}

/// One affine term of the inflow boundary flux.
#[derive(Clone)]
pub struct InflowPiece {
    pub coeff: CoeffFn,
    pub profile: InflowProfileFn,
}

impl InflowPiece {
    pub fn new(
        coeff: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        profile: impl Fn(f64, f64, [f64; 3]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        InflowPiece { coeff: Arc::new(coeff), profile: Arc::new(profile) }
    }
}

/// Parametric material data: scattering and absorption cross sections in
/// affine form, the isotropic volume source, and inflow boundary flux.
/// The total cross section is always `sigma_s + sigma_a`.
#[derive(Clone)]
pub struct MaterialField {
    pub scattering: Vec<CrossSectionPiece>,
    pub absorption: Vec<CrossSectionPiece>,
    pub source: SourceFn,
    pub inflow: Vec<InflowPiece>,
    pub param_box: ParamBox,
}

impl MaterialField {
    pub fn sigma_s(&self, x: f64, y: f64, mu: &[f64]) -> f64 {
        self.scattering.iter().map(|p| (p.coeff)(mu) * (p.shape)(x, y)).sum()
    }

    pub fn sigma_a(&self, x: f64, y: f64, mu: &[f64]) -> f64 {
        self.absorption.iter().map(|p| (p.coeff)(mu) * (p.shape)(x, y)).sum()
    }

    pub fn sigma_t(&self, x: f64, y: f64, mu: &[f64]) -> f64 {
        self.sigma_s(x, y, mu) + self.sigma_a(x, y, mu)
    }

    /// Homogeneous material with a fixed source, handy in tests.
    pub fn homogeneous(
        sigma_s: f64,
        sigma_a: f64,
        source: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        MaterialField {
            scattering: vec![CrossSectionPiece::new(move |_| sigma_s, |_, _| 1.0)],
            absorption: vec![CrossSectionPiece::new(move |_| sigma_a, |_, _| 1.0)],
            source: Arc::new(source),
            inflow: Vec::new(),
            param_box: ParamBox::new(vec![0.0], vec![1.0]),
        }
    }
}
