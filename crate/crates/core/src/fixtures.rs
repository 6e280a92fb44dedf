//! Named instances used by the tests, the benches and the CLI.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{spectral_radius, Mat, Vector};
use crate::model::{default_terminals, validate, CostWeights, InfoStructure, ProblemSpec, SystemModel};

fn s(v: f64) -> Mat {
    Mat::from_element(1, 1, v)
}

fn scalar(a: f64, horizon: usize) -> ProblemSpec {
    ProblemSpec {
        system: SystemModel {
            a: s(a),
            b1: s(1.0),
            b2: s(1.0),
            c1: s(1.0),
            c2: s(1.0),
            qw: s(0.1),
            qv1: s(0.5),
            qv2: s(0.1),
            mu: Vector::zeros(1),
            sigma: s(0.2),
        },
        weights: CostWeights {
            q1: s(1.0),
            q2: s(1.0),
            s1: s(1.0),
            s2: s(1.0),
            r1: s(1.0),
            r2: s(1.0),
            ..default_terminals(1)
        },
        horizon,
        info: InfoStructure::Asymmetric,
    }
}

/// Scalar instance: `A = 0.9`, unit inputs, sensors and weights, horizon 3.
pub fn scalar_s1() -> ProblemSpec {
    scalar(0.9, 3)
}

/// Scalar instance with an unstable open loop, `A = 1.2`, horizon 20.
pub fn unstable_scalar() -> ProblemSpec {
    scalar(1.2, 20)
}

/// Two-state instance with `A = 0`.
pub fn zero_dynamics() -> ProblemSpec {
    let mut spec = crate::model::paper_example();
    spec.system.a = Mat::zeros(2, 2);
    spec.horizon = 10;
    spec
}

/// Estimator 1 sees every informative measurement: `C1 = I` and sensor 2
/// is a zero row, so both estimators coincide.
pub fn identical_filters() -> ProblemSpec {
    let mut spec = crate::model::paper_example();
    spec.system.c1 = Mat::identity(2, 2);
    spec.system.qv1 = Mat::identity(2, 2) * 0.05;
    spec.system.c2 = Mat::zeros(1, 2);
    spec.system.qv2 = s(1.0);
    spec
}

/// No process noise, no initial uncertainty, zero mean.
pub fn noiseless() -> ProblemSpec {
    let mut spec = crate::model::paper_example();
    spec.system.qw = Mat::zeros(2, 2);
    spec.system.sigma = Mat::zeros(2, 2);
    spec.system.qv1 = Mat::identity(2, 2) * 1e-9;
    spec.system.qv2 = Mat::identity(2, 2) * 1e-9;
    spec.system.mu = Vector::zeros(2);
    spec
}

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn spd(rng: &mut ChaCha8Rng, k: usize, floor: f64) -> Mat {
    let g = gaussian(rng, k, k);
    &g * g.transpose() / k as f64 + Mat::identity(k, k) * floor
}

/// Random instance with `n <= max_n`, a mix of stable and mildly unstable
/// dynamics, dense input/sensor maps and random SPD covariances and weights.
pub fn random_instance(rng: &mut ChaCha8Rng, max_n: usize, horizon: usize) -> ProblemSpec {
    let n = rng.random_range(1..=max_n);
    let mut dim = || rng.random_range(1..=n);
    let (m1, m2, p1, p2) = (dim(), dim(), dim(), dim());
    let a = gaussian(rng, n, n);
    let rho = spectral_radius(&a).max(1e-6);
    let a = a * (rng.random_range(0.5..1.2) / rho);
    let system = SystemModel {
        a,
        b1: gaussian(rng, n, m1),
        b2: gaussian(rng, n, m2),
        c1: gaussian(rng, p1, n),
        c2: gaussian(rng, p2, n),
        qw: spd(rng, n, 0.01),
        qv1: spd(rng, p1, 0.1),
        qv2: spd(rng, p2, 0.1),
        mu: Vector::zeros(n),
        sigma: spd(rng, n, 0.01),
    };
    let weights = CostWeights {
        q1: spd(rng, n, 0.1),
        q2: spd(rng, n, 0.1),
        s1: spd(rng, m1, 0.1),
        s2: spd(rng, m1, 0.1),
        r1: spd(rng, m2, 0.1),
        r2: spd(rng, m2, 0.1),
        ..default_terminals(n)
    };
    ProblemSpec {
        system,
        weights,
        horizon,
        info: InfoStructure::Asymmetric,
    }
}

/// `count` random instances that pass validation including the
/// stabilizability/detectability checks, reproducible from `seed`.
pub fn random_compliant(seed: u64, count: usize, max_n: usize, horizon: usize) -> Vec<ProblemSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let spec = random_instance(&mut rng, max_n, horizon);
        if validate(&spec).steady_ready() {
            out.push(spec);
        }
    }
    out
}
