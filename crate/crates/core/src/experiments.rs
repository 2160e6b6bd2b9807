//! Strong-error estimation and the convergence and stiffness test drivers.
//!
//! `ε_h = (1/M·Σ_j ‖X_T^j − Y_N^j‖²)^{1/2}`, where each path's exact solution is evaluated
//! from the Wiener increments that path actually drew. Paths run in parallel on their own
//! streams `(seed, test, level, path)` and are summed in path order with compensation, so the
//! result is independent of the worker count.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{exact_solution_linear, exact_solution_test1, test1, test2, test3, LinearSde, ScalarSde, SdeModel, Test1Oracle};
use crate::rng::{experiment_id, RngStream};
use crate::scalar::KahanSum;
use crate::schemes::{PathIntegrator, Scheme, SchemeConfig};

/// A model with an initial state, a horizon and a closed-form solution driven by `W_T`.
pub trait ExactProblem: Sync {
    type Model: SdeModel<f64>;

    fn model(&self) -> &Self::Model;
    fn x0(&self) -> &[f64];
    fn horizon(&self) -> f64;
    /// `X_T` given `W_T − W_0` per noise.
    fn exact(&self, w: &[f64]) -> Result<Vec<f64>>;
}

/// Test 1: `dX = −β²X(1−X²) dt + β(1−X²) dW`.
#[derive(Debug, Clone)]
pub struct Test1Problem {
    pub beta: f64,
    model: ScalarSde<f64, Test1Oracle<f64>>,
    x0: [f64; 1],
    horizon: f64,
}

impl Test1Problem {
    pub fn new(beta: f64, x0: f64, horizon: f64) -> Self {
        Self {
            beta,
            model: test1(beta),
            x0: [x0],
            horizon,
        }
    }
}

impl ExactProblem for Test1Problem {
    type Model = ScalarSde<f64, Test1Oracle<f64>>;

    fn model(&self) -> &Self::Model {
        &self.model
    }

    fn x0(&self) -> &[f64] {
        &self.x0
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn exact(&self, w: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![exact_solution_test1(self.beta, self.x0[0], w[0])?])
    }
}

/// Linear SDE with commuting constant matrices.
#[derive(Debug, Clone)]
pub struct LinearProblem {
    model: LinearSde<f64>,
    x0: Vec<f64>,
    horizon: f64,
}

impl LinearProblem {
    pub fn new(model: LinearSde<f64>, x0: Vec<f64>, horizon: f64) -> Result<Self> {
        if x0.len() != model.dim() {
            return Err(Error::Dimension(format!("x0 has length {} vs d = {}", x0.len(), model.dim())));
        }
        model.check_commuting()?;
        Ok(Self { model, x0, horizon })
    }
}

impl ExactProblem for LinearProblem {
    type Model = LinearSde<f64>;

    fn model(&self) -> &Self::Model {
        &self.model
    }

    fn x0(&self) -> &[f64] {
        &self.x0
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn exact(&self, w: &[f64]) -> Result<Vec<f64>> {
        exact_solution_linear(&self.model, &self.x0, self.horizon, w)
    }
}

/// Fraction of failed paths above which a level is flagged.
pub const FAILURE_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrongError {
    /// RMS terminal error over the paths that completed.
    pub eps: f64,
    pub paths: usize,
    pub failed_paths: usize,
}

impl StrongError {
    pub fn flagged(&self) -> bool {
        self.failed_paths as f64 > FAILURE_THRESHOLD * self.paths as f64
    }
}

/// RMS terminal error over `paths` independent paths on streams `(seed, experiment, level, j)`.
///
/// A path counts as failed when the scheme or the exact solution reports an error or the
/// numerical state is not finite; failed paths are excluded from the mean.
#[allow(clippy::too_many_arguments)]
pub fn strong_error<P: ExactProblem>(
    problem: &P,
    scheme: Scheme,
    h: f64,
    paths: usize,
    seed: u64,
    experiment: u64,
    level: u64,
    cfg: &SchemeConfig<f64>,
) -> Result<StrongError> {
    if paths == 0 {
        return Err(Error::InvalidParameter("at least one path is required".into()));
    }
    // validates h and the layout once before fanning out
    PathIntegrator::new(problem.model(), scheme, h, problem.horizon(), *cfg)?;
    const CHUNK: usize = 64;
    let chunks = paths.div_ceil(CHUNK);
    let squared: Vec<Result<Vec<Option<f64>>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut integ = PathIntegrator::new(problem.model(), scheme, h, problem.horizon(), *cfg)?;
            let range = (c * CHUNK)..((c + 1) * CHUNK).min(paths);
            Ok(range
                .map(|j| {
                    let mut stream = RngStream::from_parts(seed, experiment, level, j as u64);
                    let out = integ.run(problem.x0(), &mut stream, false).ok()?;
                    let exact = problem.exact(&out.w_total).ok()?;
                    let e2: f64 = out.terminal.iter().zip(&exact).map(|(y, x)| (y - x) * (y - x)).sum();
                    e2.is_finite().then_some(e2)
                })
                .collect())
        })
        .collect();
    let mut sum = KahanSum::new();
    let mut failed = 0;
    for chunk in squared {
        for e2 in chunk? {
            match e2 {
                Some(v) => sum.add(v),
                None => failed += 1,
            }
        }
    }
    let ok = paths - failed;
    let eps = if ok > 0 { (sum.value() / ok as f64).sqrt() } else { f64::NAN };
    Ok(StrongError {
        eps,
        paths,
        failed_paths: failed,
    })
}

/// `ρ_h = log₂(ε_h / ε_{h/2})` for consecutive pairs of `(h, ε_h)`.
pub fn observed_orders(errors: &[(f64, f64)]) -> Result<Vec<f64>> {
    errors
        .windows(2)
        .map(|w| {
            let ((h0, e0), (h1, e1)) = (w[0], w[1]);
            if (h0 / h1 - 2.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("steps {h0} and {h1} do not halve")));
            }
            Ok((e0 / e1).log2())
        })
        .collect()
}

/// The four validation problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TestCase {
    /// Test 1 with `β = ½`, `X₀ = ½`, `T = 1`.
    Order,
    /// Test 2 with `d = 2`, `a = 15`, `b = ½`, `X₀ = e₁`, `T = 1`.
    Stiff2,
    /// Test 2 with `d = 5`, `a = 15`, `b = ½`, `X₀ = e₁`, `T = 1`.
    Stiff5,
    /// Test 3 in its four-dimensional form with `X₀ = (1,0,0,1)`, `T = 1`.
    General,
}

impl TestCase {
    pub const ALL: [TestCase; 4] = [TestCase::Order, TestCase::Stiff2, TestCase::Stiff5, TestCase::General];

    pub fn name(self) -> &'static str {
        match self {
            TestCase::Order => "order",
            TestCase::Stiff2 => "stiff2",
            TestCase::Stiff5 => "stiff5",
            TestCase::General => "general",
        }
    }

    /// Exponents `i` of `h = 2⁻ⁱ` used for the corresponding table.
    pub fn default_exponents(self) -> (u32, u32) {
        match self {
            TestCase::Order => (3, 10),
            _ => (1, 7),
        }
    }

    pub fn default_schemes(self) -> Vec<Scheme> {
        match self {
            TestCase::Order => crate::schemes::Variant::ALL.iter().map(|&v| Scheme::TrBdf2(v)).collect(),
            _ => vec![Scheme::IT2, Scheme::TRBDF2],
        }
    }
}

impl fmt::Display for TestCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TestCase::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown test {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub test: TestCase,
    pub schemes: Vec<Scheme>,
    /// Inclusive range of `i` in `h = 2⁻ⁱ`.
    pub h_exponents: (u32, u32),
    pub paths: usize,
    pub seed: u64,
    pub scheme_config: SchemeConfig<f64>,
}

impl ExperimentConfig {
    /// Table defaults with `M = 10⁴` paths.
    pub fn new(test: TestCase) -> Self {
        Self {
            test,
            schemes: test.default_schemes(),
            h_exponents: test.default_exponents(),
            paths: 10_000,
            seed: 0,
            scheme_config: SchemeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelResult {
    pub h: f64,
    pub eps: f64,
    /// `log₂(ε_h/ε_{h/2})`; absent on the finest level.
    pub rho: Option<f64>,
    pub failed_paths: usize,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeReport {
    pub scheme: String,
    pub levels: Vec<LevelResult>,
}

impl SchemeReport {
    pub fn level(&self, h: f64) -> Option<&LevelResult> {
        self.levels.iter().find(|l| l.h == h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub test: TestCase,
    pub paths: usize,
    pub seed: u64,
    pub gamma: f64,
    pub schemes: Vec<SchemeReport>,
    /// Seconds; informational and excluded from the CSV.
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Serialize)]
struct ReportMeta<'a> {
    version: &'a str,
    test: TestCase,
    seed: u64,
    paths: usize,
    gamma: f64,
    wall_time_s: f64,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    meta: Option<ReportMeta<'a>>,
    test: TestCase,
    schemes: &'a [SchemeReport],
}

impl ExperimentReport {
    pub fn scheme(&self, name: &str) -> Option<&SchemeReport> {
        self.schemes.iter().find(|s| s.scheme == name)
    }

    pub fn flagged(&self) -> bool {
        self.schemes.iter().any(|s| s.levels.iter().any(|l| l.flagged))
    }

    /// `scheme,h,eps,rho,failed_paths`, one row per scheme and level.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scheme,h,eps,rho,failed_paths\n");
        for s in &self.schemes {
            for l in &s.levels {
                let rho = l.rho.map(|r| r.to_string()).unwrap_or_default();
                let _ = writeln!(out, "{},{},{},{},{}", s.scheme, l.h, l.eps, rho, l.failed_paths);
            }
        }
        out
    }

    /// JSON mirror of the CSV; `meta` adds the version, seed, path count, `γ` and wall time.
    pub fn to_json(&self, meta: bool) -> Result<String> {
        let doc = ReportJson {
            meta: meta.then(|| ReportMeta {
                version: env!("CARGO_PKG_VERSION"),
                test: self.test,
                seed: self.seed,
                paths: self.paths,
                gamma: self.gamma,
                wall_time_s: self.wall_time,
            }),
            test: self.test,
            schemes: &self.schemes,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

fn run_levels<P: ExactProblem>(problem: &P, cfg: &ExperimentConfig) -> Result<Vec<SchemeReport>> {
    let (lo, hi) = cfg.h_exponents;
    if lo > hi || hi > 30 {
        return Err(Error::InvalidParameter(format!("exponent range {lo}..{hi}")));
    }
    let experiment = experiment_id(cfg.test.name());
    cfg.schemes
        .iter()
        .map(|&scheme| {
            let mut levels = Vec::new();
            for i in lo..=hi {
                let h = (-(i as f64)).exp2();
                let e = strong_error(problem, scheme, h, cfg.paths, cfg.seed, experiment, u64::from(i), &cfg.scheme_config)?;
                levels.push(LevelResult {
                    h,
                    eps: e.eps,
                    rho: None,
                    failed_paths: e.failed_paths,
                    flagged: e.flagged(),
                });
            }
            let pairs: Vec<(f64, f64)> = levels.iter().map(|l| (l.h, l.eps)).collect();
            for (l, r) in levels.iter_mut().zip(observed_orders(&pairs)?) {
                l.rho = Some(r);
            }
            Ok(SchemeReport {
                scheme: scheme.name().to_string(),
                levels,
            })
        })
        .collect()
}

/// Builds the problem for `test`.
pub fn test1_problem() -> Test1Problem {
    Test1Problem::new(0.5, 0.5, 1.0)
}

pub fn linear_problem(test: TestCase) -> Result<LinearProblem> {
    match test {
        TestCase::Stiff2 | TestCase::Stiff5 => {
            let d = if test == TestCase::Stiff2 { 2 } else { 5 };
            let mut x0 = vec![0.0; d];
            x0[0] = 1.0;
            LinearProblem::new(test2(d, 15.0, 0.5)?, x0, 1.0)
        }
        TestCase::General => LinearProblem::new(test3()?, vec![1.0, 0.0, 0.0, 1.0], 1.0),
        TestCase::Order => Err(Error::InvalidParameter("the order test is not linear".into())),
    }
}

/// Runs every scheme on every level and assembles the report.
pub fn run_test(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let schemes = match cfg.test {
        TestCase::Order => run_levels(&test1_problem(), cfg)?,
        t => run_levels(&linear_problem(t)?, cfg)?,
    };
    Ok(ExperimentReport {
        test: cfg.test,
        paths: cfg.paths,
        seed: cfg.seed,
        gamma: cfg.scheme_config.gamma(),
        schemes,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
