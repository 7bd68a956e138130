use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CgOptions;
use crate::reflectance::BregmanParams;
use crate::shading::ShadingParams;

/// Which prior terms take part: Stage-1 terms | Stage-2 terms.
///
/// | variant | Stage 1       | Stage 2         |
/// |---------|---------------|-----------------|
/// | v1      | S_l           | R_l, R_m, R_g   |
/// | v2      | S_l, S_g      | R_l, R_m, R_g   |
/// | v3      | S_l, S_m      | R_l, R_m, R_g   |
/// | v4      | S_l, S_m, S_g | R_l             |
/// | v5      | S_l, S_m, S_g | R_l, R_g        |
/// | v6      | S_l, S_m, S_g | R_l, R_m        |
/// | v7      | all           | all             |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    V1,
    V2,
    V3,
    V4,
    V5,
    V6,
    #[default]
    V7,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::V1,
        Variant::V2,
        Variant::V3,
        Variant::V4,
        Variant::V5,
        Variant::V6,
        Variant::V7,
    ];

    /// `(lambda_g, lambda_m, gamma_m, gamma_g)` switches.
    fn terms(self) -> (bool, bool, bool, bool) {
        match self {
            Variant::V1 => (false, false, true, true),
            Variant::V2 => (true, false, true, true),
            Variant::V3 => (false, true, true, true),
            Variant::V4 => (true, true, false, false),
            Variant::V5 => (true, true, false, true),
            Variant::V6 => (true, true, true, false),
            Variant::V7 => (true, true, true, true),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = Variant::ALL.iter().position(|v| v == self).expect("listed") + 1;
        write!(f, "v{i}")
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .iter()
            .copied()
            .find(|v| v.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Param(format!("unknown variant {s:?}, expected v1..v7")))
    }
}

/// Every tunable of a decomposition run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationParams {
    pub lambda_g: f64,
    pub lambda_m: f64,
    pub lambda_l: f64,
    pub gamma_g: f64,
    pub gamma_m: f64,
    pub gamma_l: f64,
    pub gamma_a: f64,
    pub theta: f64,
    pub tau: f64,
    pub t_c: f64,
    pub t_m: f64,
    pub t_b: f64,
    pub t: f64,
    pub k: usize,
    pub suppress: f64,
    /// Reduced semantic dimension.
    pub d: usize,
    pub eps: f64,
    pub sample_count: usize,
    pub seed: u64,
    pub schedule_on: bool,
    pub variant: Variant,
    pub patch_size: usize,
    pub stride: usize,
    pub neighbors: usize,
    pub max_proposals: usize,
    pub max_representatives: usize,
    pub outer_iters: usize,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub gauge_weight: f64,
    pub matting_eps: f64,
    /// Blur of the first Laplacian base image.
    pub base_blur: f64,
    /// Blur of the illumination colour field and relighting residues.
    pub merge_blur: f64,
}

impl Default for IterationParams {
    fn default() -> Self {
        Self {
            lambda_g: 0.02,
            lambda_m: 0.02,
            lambda_l: 2.0,
            gamma_g: 2.0,
            gamma_m: 20.0,
            gamma_l: 20.0,
            gamma_a: 1.0,
            theta: 40.0,
            tau: 1.2,
            t_c: 1e-4,
            t_m: 0.05,
            t_b: 0.05,
            t: 0.05,
            k: 5,
            suppress: crate::imgcore::DEFAULT_SUPPRESS,
            d: crate::semantics::DEFAULT_REDUCED_DIM,
            eps: crate::imgcore::DEFAULT_EPS,
            sample_count: crate::reflectance::DEFAULT_SAMPLE_COUNT,
            seed: 0,
            schedule_on: true,
            variant: Variant::V7,
            patch_size: crate::semantics::DEFAULT_PATCH_SIZE,
            stride: crate::semantics::DEFAULT_STRIDE,
            neighbors: crate::semantics::DEFAULT_NEIGHBORS,
            max_proposals: crate::semantics::DEFAULT_MAX_PROPOSALS,
            max_representatives: crate::semantics::DEFAULT_MAX_REPRESENTATIVES,
            outer_iters: 4,
            cg_tol: 1e-6,
            cg_max_iter: 2000,
            gauge_weight: 1e-6,
            matting_eps: crate::shading::DEFAULT_MATTING_EPS,
            base_blur: 2.0,
            merge_blur: 5.0,
        }
    }
}

impl IterationParams {
    pub fn for_variant(variant: Variant) -> Self {
        Self::default().with_variant(variant)
    }

    /// Zeroes the weights of the terms the variant leaves out.
    pub fn with_variant(mut self, variant: Variant) -> Self {
        let (lg, lm, gm, gg) = variant.terms();
        if !lg {
            self.lambda_g = 0.0;
        }
        if !lm {
            self.lambda_m = 0.0;
        }
        if !gm {
            self.gamma_m = 0.0;
        }
        if !gg {
            self.gamma_g = 0.0;
        }
        self.variant = variant;
        self
    }

    /// Parameters for the next iteration: mid-level, global and coupling
    /// weights grow by `tau`, local weights shrink by `tau`.
    pub fn schedule_update(&self) -> Self {
        if !self.schedule_on {
            return *self;
        }
        let tau = self.tau;
        Self {
            gamma_m: self.gamma_m * tau,
            gamma_g: self.gamma_g * tau,
            lambda_m: self.lambda_m * tau,
            lambda_g: self.lambda_g * tau,
            theta: self.theta * tau,
            gamma_l: self.gamma_l / tau,
            lambda_l: self.lambda_l / tau,
            ..*self
        }
    }

    /// Sets one field from its textual value, as given on a command line.
    pub fn set(&mut self, name: &str, value: &str) -> Result<()> {
        let float = || -> Result<f64> {
            value
                .parse::<f64>()
                .map_err(|_| Error::Param(format!("{name}: {value:?} is not a number")))
        };
        let int = || -> Result<usize> {
            value
                .parse::<usize>()
                .map_err(|_| Error::Param(format!("{name}: {value:?} is not a non-negative integer")))
        };
        match name {
            "lambda_g" => self.lambda_g = float()?,
            "lambda_m" => self.lambda_m = float()?,
            "lambda_l" => self.lambda_l = float()?,
            "gamma_g" => self.gamma_g = float()?,
            "gamma_m" => self.gamma_m = float()?,
            "gamma_l" => self.gamma_l = float()?,
            "gamma_a" => self.gamma_a = float()?,
            "theta" => self.theta = float()?,
            "tau" => self.tau = float()?,
            "t_c" => self.t_c = float()?,
            "t_m" => self.t_m = float()?,
            "t_b" => self.t_b = float()?,
            "t" => self.t = float()?,
            "k" => self.k = int()?,
            "suppress" => self.suppress = float()?,
            "d" => self.d = int()?,
            "eps" => self.eps = float()?,
            "sample_count" => self.sample_count = int()?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::Param(format!("seed: {value:?} is not an integer")))?
            }
            "schedule_on" => {
                self.schedule_on = value
                    .parse()
                    .map_err(|_| Error::Param(format!("schedule_on: {value:?} is not true/false")))?
            }
            "variant" => *self = self.with_variant(value.parse()?),
            "patch_size" => self.patch_size = int()?,
            "stride" => self.stride = int()?,
            "neighbors" => self.neighbors = int()?,
            "max_proposals" => self.max_proposals = int()?,
            "max_representatives" => self.max_representatives = int()?,
            "outer_iters" => self.outer_iters = int()?,
            "cg_tol" => self.cg_tol = float()?,
            "cg_max_iter" => self.cg_max_iter = int()?,
            "gauge_weight" => self.gauge_weight = float()?,
            "matting_eps" => self.matting_eps = float()?,
            "base_blur" => self.base_blur = float()?,
            "merge_blur" => self.merge_blur = float()?,
            _ => return Err(Error::Param(format!("unknown parameter {name:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let weights = [
            ("lambda_g", self.lambda_g),
            ("lambda_m", self.lambda_m),
            ("lambda_l", self.lambda_l),
            ("gamma_g", self.gamma_g),
            ("gamma_m", self.gamma_m),
            ("gamma_l", self.gamma_l),
        ];
        for (name, w) in weights {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Param(format!("{name} must be finite and non-negative, got {w}")));
            }
        }
        let positive = [
            ("gamma_a", self.gamma_a),
            ("theta", self.theta),
            ("t_c", self.t_c),
            ("t_m", self.t_m),
            ("t_b", self.t_b),
            ("t", self.t),
            ("eps", self.eps),
            ("cg_tol", self.cg_tol),
            ("matting_eps", self.matting_eps),
        ];
        for (name, w) in positive {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Param(format!("{name} must be positive, got {w}")));
            }
        }
        if !(self.tau >= 1.0) {
            return Err(Error::Param(format!("tau must be at least 1, got {}", self.tau)));
        }
        if self.k == 0 {
            return Err(Error::Param("k must be at least 1".into()));
        }
        if !(self.suppress > 0.0 && self.suppress <= 1.0) {
            return Err(Error::Param(format!("suppress must lie in (0, 1], got {}", self.suppress)));
        }
        if self.d == 0 {
            return Err(Error::Param("reduced dimension d must be at least 1".into()));
        }
        if self.gauge_weight < 0.0 || self.base_blur < 0.0 || self.merge_blur < 0.0 {
            return Err(Error::Param("gauge weight and blur radii must be non-negative".into()));
        }
        Ok(())
    }

    pub fn shading(&self) -> ShadingParams {
        ShadingParams {
            lambda_g: self.lambda_g,
            lambda_m: self.lambda_m,
            lambda_l: self.lambda_l,
            gauge_weight: self.gauge_weight,
            matting_eps: self.matting_eps,
        }
    }

    pub fn bregman(&self) -> BregmanParams {
        BregmanParams {
            gamma_l: self.gamma_l,
            gamma_m: self.gamma_m,
            gamma_g: self.gamma_g,
            gamma_a: self.gamma_a,
            theta: self.theta,
            outer_iters: self.outer_iters,
            cg: self.cg(),
            eps: self.eps,
        }
    }

    pub fn cg(&self) -> CgOptions {
        CgOptions {
            tol: self.cg_tol,
            max_iter: self.cg_max_iter,
        }
    }
}
