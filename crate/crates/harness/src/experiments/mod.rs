//! The experiment registry.

mod a_quantity;
mod atoms;
mod calculus;
mod far_field;
mod geometry;
mod kernel;
mod lp_lq;
mod luxemburg;
mod omega;

use hlab_core::{Dimension, GroupPoint, IntegrationSpec, KoranyiBall};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::report::ExperimentReport;

/// What an experiment gets to run with.
pub struct Context<'a> {
    pub config: &'a ExperimentConfig,
    pub seed: u64,
    pub hash: String,
}

impl Context<'_> {
    pub fn report(&self, columns: &[&str]) -> ExperimentReport {
        ExperimentReport::new(
            &self.config.experiment,
            self.seed,
            self.hash.clone(),
            columns,
        )
    }

    /// Independent stream `stream` of the run's RNG.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        trial_rng(self.seed, stream)
    }

    /// Seed for a core routine that takes its own seed.
    pub fn sub_seed(&self, stream: u64) -> u64 {
        self.rng(stream).random()
    }

    pub fn spec(&self) -> IntegrationSpec {
        self.config.integration(self.seed)
    }

    pub fn dim(&self) -> Result<Dimension> {
        self.config.dim()
    }

    pub fn threshold(&self, name: &str) -> Result<f64> {
        self.config.threshold(name)
    }

    pub fn samples(&self, name: &str) -> Result<usize> {
        self.config.sample_count(name)
    }
}

pub struct Experiment {
    pub name: &'static str,
    pub summary: &'static str,
    /// Acceptance criteria whose checks this experiment emits.
    pub criteria: &'static [&'static str],
    pub default_config: &'static str,
    run: fn(&Context) -> Result<ExperimentReport>,
}

impl Experiment {
    pub fn run(&self, ctx: &Context) -> Result<ExperimentReport> {
        (self.run)(ctx)
    }

    pub fn default_config(&self) -> Result<ExperimentConfig> {
        ExperimentConfig::from_json(self.default_config)
    }
}

macro_rules! config {
    ($name:literal) => {
        include_str!(concat!("../../configs/", $name, ".json"))
    };
}

pub static REGISTRY: &[Experiment] = &[
    Experiment {
        name: "group-axioms",
        summary: "group law, inverse, dilation and rotation identities on random samples",
        criteria: &["C1"],
        default_config: config!("group-axioms"),
        run: geometry::group_axioms,
    },
    Experiment {
        name: "koranyi-props",
        summary: "unit ball volume, volume power law and quasi-distance properties",
        criteria: &["C2"],
        default_config: config!("koranyi-props"),
        run: geometry::koranyi_props,
    },
    Experiment {
        name: "calculus-suite",
        summary: "vector fields, Taylor projector and Taylor remainder ratios",
        criteria: &[],
        default_config: config!("calculus-suite"),
        run: calculus::run,
    },
    Experiment {
        name: "luxemburg-suite",
        summary: "Luxemburg closed forms, power identity, log-Hoelder reports and the D_p table",
        criteria: &["C3", "C4"],
        default_config: config!("luxemburg-suite"),
        run: luxemburg::run,
    },
    Experiment {
        name: "luxemburg-golden",
        summary: "two-region Luxemburg norm against the golden ratio",
        criteria: &["C3"],
        default_config: config!("luxemburg-golden"),
        run: luxemburg::golden,
    },
    Experiment {
        name: "atom-suite",
        summary: "random atoms through the verifier across moment degrees",
        criteria: &["C5"],
        default_config: config!("atom-suite"),
        run: atoms::atom_suite,
    },
    Experiment {
        name: "lp-lq-ratio",
        summary: "dilation covariance of the Riesz potential and L^p0 -> L^q0 ratios",
        criteria: &["C9"],
        default_config: config!("lp-lq-ratio"),
        run: lp_lq::run,
    },
    Experiment {
        name: "omega-geometry",
        summary: "Omega separation and partition, pointwise domination constants",
        criteria: &["C6", "C7"],
        default_config: config!("omega-geometry"),
        run: omega::run,
    },
    Experiment {
        name: "kernel-derivatives",
        summary: "derivative bounds of the kernel for orders up to 3",
        criteria: &["C8"],
        default_config: config!("kernel-derivatives"),
        run: kernel::run,
    },
    Experiment {
        name: "atom-uniform",
        summary: "uniform bound of the image norm over atoms at four dyadic scales",
        criteria: &["C11"],
        default_config: config!("atom-uniform"),
        run: atoms::atom_uniform,
    },
    Experiment {
        name: "far-field-decay",
        summary: "decay exponent of T a along rays and the far-field bound ratio",
        criteria: &["C10"],
        default_config: config!("far-field-decay"),
        run: far_field::run,
    },
    Experiment {
        name: "a-quantity-suite",
        summary: "aggregate ratios for rotated, expanded ball families",
        criteria: &["C12"],
        default_config: config!("a-quantity-suite"),
        run: a_quantity::run,
    },
];

pub fn find(name: &str) -> Result<&'static Experiment> {
    REGISTRY
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| HarnessError::config(format!("unknown experiment `{name}`")))
}

pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform point in the box [-half, half]^{2n+1}.
pub fn box_point(dim: Dimension, half: f64, rng: &mut impl Rng) -> GroupPoint {
    let x: Vec<f64> = (0..dim.horizontal())
        .map(|_| rng.random_range(-half..half))
        .collect();
    GroupPoint::new(&x, rng.random_range(-half..half)).expect("finite coordinates")
}

/// Ball with a box-uniform center and a log-uniform radius.
pub fn random_ball(
    dim: Dimension,
    half: f64,
    radii: (f64, f64),
    rng: &mut impl Rng,
) -> Result<KoranyiBall> {
    let c = box_point(dim, half, rng);
    let r = (rng.random_range(radii.0.ln()..=radii.1.ln())).exp();
    Ok(KoranyiBall::new(c, r)?)
}

/// |b - a| / |a|, zero when both vanish.
pub fn relative_change(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (b - a).abs() / a.abs()
    }
}

pub fn point_from(coords: &[f64]) -> Result<GroupPoint> {
    GroupPoint::from_coords(coords).map_err(|e| HarnessError::config(e.to_string()))
}
