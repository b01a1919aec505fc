//! Chi-square objectives and constrained minimization for recovering a
//! unitary matrix from error-affected measurements.
//!
//! Two structural objectives measure how far a candidate matrix of
//! squared moduli is from unistochasticity: the phase-cosine spread over
//! quadruple completions, and the unitarity-triangle side spread. A data
//! term compares derived observables against measurements with errors.
//! Minimization is derivative-free (Nelder-Mead) with seeded multi-start,
//! either over the nine squared moduli in `[0, 1]^9` or over the four
//! mixing parameters directly (where the structural term vanishes by
//! construction).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::math;
use crate::matrix::{hadamard_square, ComplexMatrix, SquaredModuliMatrix};
use crate::parametrize::{build_ckm3, MixingParameters3};
use crate::simplex::{nelder_mead, SimplexConfig};
use crate::tagged::Tagged;
use crate::triangles::{sides_on, OrthogonalityId};
use crate::unitarity::{
    complete_from_quadruple, corner_cos_deltas, enumerate_independent_quadruples,
    solve_first_line, test_unistochastic, QuadrupleSelection,
};

/// Default weight on squared line-sum defects inside the fit objectives.
pub const DEFAULT_PENALTY_WEIGHT: f64 = 1e3;
/// Default weight on hinge penalties (out-of-range or imaginary
/// candidates, triangle-inequality violations).
pub const DEFAULT_HINGE_WEIGHT: f64 = 1e3;

/// What a single measurement constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurementKind {
    /// `|U_ij|` at a position.
    Modulus,
    /// `|U_ij|^2` at a position.
    SquaredModulus,
    /// A triangle side ratio (`R_c` or `R_t`) of one orthogonality
    /// relation.
    TriangleSide,
    /// The cosine of a vertex angle of one unitarity triangle.
    TriangleAngleCosine,
}

/// Where a measurement applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurementTarget {
    /// Zero-based matrix position, for moduli.
    Position { row: usize, col: usize },
    /// An orthogonality relation and an index: for sides 0 is `R_c` and
    /// 1 is `R_t`; for angle cosines 0, 1, 2 are the apex, `(1, 0)`, and
    /// origin vertex angles.
    Triangle { id: OrthogonalityId, index: usize },
}

/// One error-affected measurement `d~ +- sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub kind: MeasurementKind,
    pub target: MeasurementTarget,
    pub value: f64,
    pub sigma: f64,
}

impl Measurement {
    /// Checks sigma positivity and kind/target consistency.
    pub fn validate(&self) -> Result<(), FitError> {
        if !(self.sigma > 0.0) {
            return Err(FitError::BadSigma(self.sigma));
        }
        if !self.value.is_finite() {
            return Err(FitError::BadTarget(format!(
                "non-finite measured value {}",
                self.value
            )));
        }
        match (self.kind, self.target) {
            (
                MeasurementKind::Modulus | MeasurementKind::SquaredModulus,
                MeasurementTarget::Position { row, col },
            ) => {
                if row >= 3 || col >= 3 {
                    return Err(FitError::BadTarget(format!(
                        "position ({row}, {col}) out of range for a 3x3 matrix"
                    )));
                }
            }
            (MeasurementKind::TriangleSide, MeasurementTarget::Triangle { index, .. }) => {
                if index > 1 {
                    return Err(FitError::BadTarget(format!(
                        "side index {index} (0 = R_c, 1 = R_t)"
                    )));
                }
            }
            (MeasurementKind::TriangleAngleCosine, MeasurementTarget::Triangle { index, .. }) => {
                if index > 2 {
                    return Err(FitError::BadTarget(format!(
                        "vertex angle index {index} (0, 1, 2)"
                    )));
                }
            }
            (kind, target) => {
                return Err(FitError::BadTarget(format!(
                    "kind {kind:?} does not accept target {target:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Errors from measurement validation and fit configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum FitError {
    BadSigma(f64),
    BadTarget(String),
    BadConfig(String),
}

impl core::fmt::Display for FitError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            FitError::BadSigma(s) => write!(f, "measurement sigma {s} is not positive"),
            FitError::BadTarget(msg) => write!(f, "bad measurement target: {msg}"),
            FitError::BadConfig(msg) => write!(f, "bad fit configuration: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for FitError {}

/// Which structural objective shapes the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    /// Phase-cosine spread over quadruple completions.
    UnitarityCondition,
    /// Triangle side-ratio spread over quadruple completions.
    Triangles,
    /// Sum of both structural objectives.
    Merged,
}

/// Fit configuration: mode, weights, and optimizer controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub mode: FitMode,
    /// Weight on squared line-sum defects (and out-of-box excesses).
    pub penalty_weight: f64,
    /// Weight on hinge penalties.
    pub hinge_weight: f64,
    /// Number of simplex starts (the first is deterministic, the rest
    /// are seeded-random).
    pub restarts: usize,
    pub seed: u64,
    /// Simplex iteration budget per start.
    pub max_iterations: usize,
    /// Simplex convergence tolerance on the value spread.
    pub tolerance: f64,
    /// Pair all four corner candidates of every quadruple completion in
    /// the structural objective instead of one designated value each.
    pub full_pairing: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            mode: FitMode::UnitarityCondition,
            penalty_weight: DEFAULT_PENALTY_WEIGHT,
            hinge_weight: DEFAULT_HINGE_WEIGHT,
            restarts: 32,
            seed: 0,
            max_iterations: 2000,
            tolerance: 1e-12,
            full_pairing: false,
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<(), FitError> {
        if !(self.penalty_weight > 0.0 && self.hinge_weight > 0.0) {
            return Err(FitError::BadConfig(String::from(
                "penalty and hinge weights must be positive",
            )));
        }
        if self.restarts == 0 || self.max_iterations == 0 {
            return Err(FitError::BadConfig(String::from(
                "restarts and max iterations must be positive",
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(FitError::BadConfig(String::from(
                "tolerance must be positive",
            )));
        }
        Ok(())
    }
}

/// Outcome of a fit: best matrix, derived parameters, chi-square split,
/// physicality, and per-measurement pulls.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub fitted_squared_moduli: SquaredModuliMatrix,
    pub fitted_params: MixingParameters3,
    /// Structural chi-square (mode-dependent) at the optimum, with the
    /// configured weights.
    pub chi2_unitarity: f64,
    /// Data chi-square at the optimum.
    pub chi2_data: f64,
    /// Exactly `chi2_unitarity + chi2_data`.
    pub chi2_total: f64,
    pub physical: bool,
    /// Unitary reconstruction from the fitted parameters, when physical.
    pub reconstructed: Option<ComplexMatrix>,
    /// `(theory - measured) / sigma` per measurement, in input order.
    pub pulls: Vec<f64>,
    pub converged: bool,
    /// Fewer than four independent measurements.
    pub underdetermined: bool,
}

/// Weighting and pairing options for the structural chi-squares.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chi2Options {
    /// Weight on squared line-sum defects.
    pub line_weight: f64,
    /// Weight on hinge penalties and imaginary-candidate magnitudes.
    pub hinge_weight: f64,
    /// Pair all four corner candidates of every completion instead of
    /// one designated value per quadruple.
    pub full_pairing: bool,
}

impl Default for Chi2Options {
    fn default() -> Self {
        Self {
            line_weight: 1.0,
            hinge_weight: DEFAULT_HINGE_WEIGHT,
            full_pairing: false,
        }
    }
}

/// `sum_{i<j} (r_i - r_j)^2 = n sum d_i^2 - (sum d_i)^2` on the centered
/// values `d_i = r_i - mean`; centering avoids the cancellation the raw
/// closed form suffers when all values coincide.
fn pair_spread(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean: f64 = values.iter().sum::<f64>() / n;
    let sum: f64 = values.iter().map(|v| v - mean).sum();
    let sum_sq: f64 = values.iter().map(|v| math::sq(v - mean)).sum();
    (n * sum_sq - sum * sum).max(0.0)
}

fn line_defect_sum(m: &SquaredModuliMatrix) -> f64 {
    m.row_sums()
        .iter()
        .chain(m.col_sums().iter())
        .map(|s| math::sq(s - 1.0))
        .sum()
}

/// Splits tagged candidates: real values are collected for the pair
/// spread and hinged beyond `[-1, 1]` (or below `floor` when given);
/// imaginary ones contribute their squared magnitude as penalty.
fn accumulate_candidates(
    candidates: &[Tagged],
    hinge_weight: f64,
    unit_hinge: bool,
    reals: &mut Vec<f64>,
    chi2: &mut f64,
) {
    for t in candidates {
        match t {
            Tagged::Real(v) => {
                reals.push(*v);
                if unit_hinge {
                    *chi2 += hinge_weight * math::sq((math::abs(*v) - 1.0).max(0.0));
                } else {
                    *chi2 += hinge_weight * math::sq((-*v).max(0.0));
                }
            }
            Tagged::Imaginary(v) => *chi2 += hinge_weight * v * v,
            Tagged::Degenerate => {}
        }
    }
}

/// Phase-cosine spread objective with explicit weights and quadruple set.
///
/// Candidates are the four corner relations of the input matrix plus,
/// for every quadruple, the corner value of its line-sum completion (the
/// four relations coincide on any completion, so one value represents
/// it; with `full_pairing` all four are kept anyway). Real candidates
/// enter the pair spread and are hinged beyond `[-1, 1]`; imaginary
/// candidates contribute their squared magnitude. Line-sum defects are
/// added with `line_weight`.
pub fn chi2_unitarity_condition_with(
    m: &SquaredModuliMatrix,
    opts: &Chi2Options,
    quadruples: &[QuadrupleSelection],
) -> f64 {
    let mut chi2 = 0.0;
    let mut reals: Vec<f64> = Vec::with_capacity(4 + quadruples.len());
    accumulate_candidates(
        &corner_cos_deltas(m),
        opts.hinge_weight,
        true,
        &mut reals,
        &mut chi2,
    );
    for q in quadruples {
        if let Ok(done) = complete_from_quadruple(m, q) {
            let corners = corner_cos_deltas(&done.matrix);
            let subset = if opts.full_pairing { &corners[..] } else { &corners[..1] };
            accumulate_candidates(subset, opts.hinge_weight, true, &mut reals, &mut chi2);
        }
    }
    chi2 += pair_spread(&reals);
    chi2 += opts.line_weight * line_defect_sum(m);
    if corner_cos_deltas(m)[0].is_degenerate() {
        // the phase dropped out of the moduli: unistochasticity reduces
        // to an entrywise comparison against the phase-free built matrix
        chi2 += opts.hinge_weight * degenerate_mismatch(m);
    }
    chi2
}

/// Squared entrywise distance to the matrix built from the first-line
/// cosines with an arbitrary phase, used when every phase-cosine
/// relation degenerates. A leading `m11 = 1` forces a direct sum of
/// `[1]` and a 2x2 doubly stochastic block, handled separately.
fn degenerate_mismatch(m: &SquaredModuliMatrix) -> f64 {
    use core::f64::consts::FRAC_PI_2;
    let fl = solve_first_line(m);
    let cosine = |v: f64| if v.is_finite() { clamp01(v) } else { 0.0 };
    let p = if fl.c13.degenerate {
        MixingParameters3 {
            theta12: 0.0,
            theta13: math::acos(math::sqrt(clamp01(m.get(1, 1)))),
            theta23: 0.0,
            delta: FRAC_PI_2,
        }
    } else {
        MixingParameters3 {
            theta12: math::acos(cosine(fl.c12.value)),
            theta13: math::acos(cosine(fl.c13.value)),
            theta23: math::acos(cosine(fl.c23.value)),
            delta: FRAC_PI_2,
        }
    };
    let built = hadamard_square(&build_ckm3(&p));
    m.entries()
        .iter()
        .zip(built.entries())
        .map(|(a, b)| math::sq(a - b))
        .sum()
}

/// Phase-cosine spread objective with the default weights and the full
/// independent-quadruple census.
pub fn chi2_unitarity_condition(m: &SquaredModuliMatrix) -> f64 {
    chi2_unitarity_condition_with(
        m,
        &Chi2Options::default(),
        &enumerate_independent_quadruples(),
    )
}

/// Triangle-side spread objective with explicit weights and quadruple
/// set.
///
/// For every orthogonality relation, the side ratios `R_c` and `R_t` are
/// evaluated on each quadruple completion; real sides enter per-side
/// pair spreads and are hinged below zero, imaginary sides contribute
/// their squared magnitude, and real side pairs are hinged on the
/// triangle inequality `|R_c - R_t| <= 1 <= R_c + R_t`. Line-sum defects
/// are added with `line_weight`.
pub fn chi2_triangles_with(
    m: &SquaredModuliMatrix,
    opts: &Chi2Options,
    quadruples: &[QuadrupleSelection],
) -> f64 {
    let mut chi2 = 0.0;
    let completions: Vec<SquaredModuliMatrix> = quadruples
        .iter()
        .filter_map(|q| complete_from_quadruple(m, q).ok().map(|c| c.matrix))
        .collect();
    for id in OrthogonalityId::ALL {
        let mut rcs: Vec<f64> = Vec::with_capacity(completions.len());
        let mut rts: Vec<f64> = Vec::with_capacity(completions.len());
        for done in &completions {
            let (rc, rt) = sides_on(done, id);
            accumulate_candidates(&[rc], opts.hinge_weight, false, &mut rcs, &mut chi2);
            accumulate_candidates(&[rt], opts.hinge_weight, false, &mut rts, &mut chi2);
            if let (Tagged::Real(a), Tagged::Real(b)) = (rc, rt) {
                chi2 += opts.hinge_weight * math::sq((math::abs(a - b) - 1.0).max(0.0));
                chi2 += opts.hinge_weight * math::sq((1.0 - (a + b)).max(0.0));
            }
        }
        chi2 += pair_spread(&rcs);
        chi2 += pair_spread(&rts);
    }
    chi2 += opts.line_weight * line_defect_sum(m);
    chi2
}

/// Triangle-side spread objective with the default weights and the full
/// independent-quadruple census.
pub fn chi2_triangles(m: &SquaredModuliMatrix) -> f64 {
    chi2_triangles_with(
        m,
        &Chi2Options::default(),
        &enumerate_independent_quadruples(),
    )
}

/// Theoretical value of one measurement on a squared-moduli matrix.
/// Imaginary triangle sides contribute through their magnitude (which
/// coincides with the side for physical matrices and stays continuous
/// across sign changes of the completed entries); degenerate quantities
/// evaluate to zero.
fn theory_value(m: &SquaredModuliMatrix, meas: &Measurement) -> f64 {
    match (meas.kind, meas.target) {
        (MeasurementKind::Modulus, MeasurementTarget::Position { row, col }) => {
            math::sqrt(m.get(row, col).max(0.0))
        }
        (MeasurementKind::SquaredModulus, MeasurementTarget::Position { row, col }) => {
            m.get(row, col)
        }
        (MeasurementKind::TriangleSide, MeasurementTarget::Triangle { id, index }) => {
            let (rc, rt) = sides_on(m, id);
            let side = if index == 0 { rc } else { rt };
            side.magnitude().unwrap_or(0.0)
        }
        (MeasurementKind::TriangleAngleCosine, MeasurementTarget::Triangle { id, index }) => {
            let (rc, rt) = sides_on(m, id);
            let (a, b) = (
                rc.magnitude().unwrap_or(0.0),
                rt.magnitude().unwrap_or(0.0),
            );
            // law of cosines on sides (1, a, b), unclamped so the data
            // term keeps shaping the objective outside closure
            let guard = 1e-12;
            match index {
                0 if a * b > guard => (a * a + b * b - 1.0) / (2.0 * a * b),
                1 if b > guard => (1.0 + b * b - a * a) / (2.0 * b),
                2 if a > guard => (1.0 + a * a - b * b) / (2.0 * a),
                _ => 0.0,
            }
        }
        _ => 0.0,
    }
}

/// Data chi-square `sum ((d_i - d~_i) / sigma_i)^2` of a squared-moduli
/// matrix against the measurements.
pub fn chi2_data(m: &SquaredModuliMatrix, measurements: &[Measurement]) -> Result<f64, FitError> {
    let mut chi2 = 0.0;
    for meas in measurements {
        meas.validate()?;
        chi2 += math::sq((theory_value(m, meas) - meas.value) / meas.sigma);
    }
    Ok(chi2)
}

/// Data chi-square of a parameter point, through the built unitary.
pub fn chi2_data_params(
    p: &MixingParameters3,
    measurements: &[Measurement],
) -> Result<f64, FitError> {
    chi2_data(&hadamard_square(&build_ckm3(p)), measurements)
}

fn structural_chi2(
    m: &SquaredModuliMatrix,
    mode: FitMode,
    opts: &Chi2Options,
    quadruples: &[QuadrupleSelection],
) -> f64 {
    match mode {
        FitMode::UnitarityCondition => chi2_unitarity_condition_with(m, opts, quadruples),
        FitMode::Triangles => chi2_triangles_with(m, opts, quadruples),
        FitMode::Merged => {
            chi2_unitarity_condition_with(m, opts, quadruples)
                + chi2_triangles_with(m, opts, quadruples)
        }
    }
}

fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Quadratic penalty for leaving a box, so clamped objectives keep a
/// restoring slope for the simplex.
fn box_excess(x: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    x.iter()
        .zip(lo.iter().zip(hi))
        .map(|(&v, (&a, &b))| math::sq((a - v).max(0.0)) + math::sq((v - b).max(0.0)))
        .sum()
}

/// Mixing parameters read off a (possibly inexact) squared-moduli
/// matrix: first-line cosines clamped to `[0, 1]`, phase from the
/// designated corner relation clamped to `[-1, 1]` (`pi/2` when the
/// phase is imaginary or undetermined).
fn derive_params(m: &SquaredModuliMatrix) -> MixingParameters3 {
    let fl = solve_first_line(m);
    let cosine = |v: f64| if v.is_finite() { clamp01(v) } else { 0.5 };
    let cos_delta = match corner_cos_deltas(m)[0] {
        Tagged::Real(v) if v.is_finite() => math::clamp_unit(v),
        _ => 0.0,
    };
    MixingParameters3 {
        theta12: math::acos(cosine(fl.c12.value)),
        theta13: math::acos(cosine(fl.c13.value)),
        theta23: math::acos(cosine(fl.c23.value)),
        delta: math::acos(cos_delta),
    }
}

struct MultiStartBest {
    x: Vec<f64>,
    value: f64,
    converged: bool,
}

fn multi_start<F: FnMut(&[f64]) -> f64>(
    mut objective: F,
    first: &[f64],
    lo: &[f64],
    hi: &[f64],
    steps: &[f64],
    config: &FitConfig,
) -> MultiStartBest {
    let simplex_cfg = SimplexConfig {
        max_iterations: config.max_iterations,
        tolerance: config.tolerance,
        ..SimplexConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let unit = Uniform::new(0.0f64, 1.0f64);
    let mut best: Option<MultiStartBest> = None;
    for restart in 0..config.restarts {
        let start: Vec<f64> = if restart == 0 {
            first.to_vec()
        } else {
            lo.iter()
                .zip(hi)
                .map(|(&a, &b)| a + (b - a) * unit.sample(&mut rng))
                .collect()
        };
        let run = nelder_mead(&mut objective, &start, steps, &simplex_cfg);
        // strict improvement keeps the lowest restart index on ties
        let better = best.as_ref().map_or(true, |b| run.value < b.value);
        if better {
            best = Some(MultiStartBest {
                x: run.x,
                value: run.value,
                converged: run.converged,
            });
        }
    }
    best.expect("at least one restart")
}

/// Assembles a result from a fitted matrix: physicality is judged with a
/// tolerance adapted to the residual line-sum defects (a free-moduli fit
/// balances the stochasticity penalty against the data term, so exact
/// line sums cannot be expected), and the reconstruction is built from
/// the derived parameters so it is unitary by construction.
fn assemble_result(
    fitted: SquaredModuliMatrix,
    measurements: &[Measurement],
    chi2_unitarity: f64,
    chi2_data_value: f64,
    converged: bool,
    underdetermined: bool,
) -> FitResult {
    let params = derive_params(&fitted);
    let max_defect = fitted
        .row_sums()
        .iter()
        .chain(fitted.col_sums().iter())
        .map(|s| math::abs(s - 1.0))
        .fold(0.0f64, f64::max);
    let verdict_tol = (2.0 * max_defect).max(1e-6);
    let physical = verdict_tol <= 0.05
        && matches!(
            test_unistochastic(&fitted, verdict_tol),
            Ok(v) if v.physical
        );
    let reconstructed = physical.then(|| build_ckm3(&params));
    let pulls = measurements
        .iter()
        .map(|meas| (theory_value(&fitted, meas) - meas.value) / meas.sigma)
        .collect();
    FitResult {
        fitted_squared_moduli: fitted,
        fitted_params: params,
        chi2_unitarity,
        chi2_data: chi2_data_value,
        chi2_total: chi2_unitarity + chi2_data_value,
        physical,
        reconstructed,
        pulls,
        converged,
        underdetermined,
    }
}

/// Fits the nine squared moduli in `[0, 1]^9` to the measurements, with
/// the mode's structural chi-square shaping unistochasticity. The first
/// start is the flat matrix (all entries 1/3); the remaining starts are
/// uniform in the box, drawn from a stream seeded with `config.seed`, so
/// the fit is deterministic.
pub fn fit(measurements: &[Measurement], config: &FitConfig) -> Result<FitResult, FitError> {
    config.validate()?;
    for meas in measurements {
        meas.validate()?;
    }
    let quadruples = enumerate_independent_quadruples();
    let opts = Chi2Options {
        line_weight: config.penalty_weight,
        hinge_weight: config.hinge_weight,
        full_pairing: config.full_pairing,
    };
    let lo = [0.0f64; 9];
    let hi = [1.0f64; 9];
    let objective = |x: &[f64]| {
        let clamped: Vec<f64> = x.iter().map(|&v| clamp01(v)).collect();
        let m = SquaredModuliMatrix::from_raw(3, clamped);
        structural_chi2(&m, config.mode, &opts, &quadruples)
            + chi2_data(&m, measurements).expect("measurements validated")
            + config.penalty_weight * box_excess(x, &lo, &hi)
    };
    let first = [1.0 / 3.0; 9];
    let steps = [0.15f64; 9];
    let best = multi_start(objective, &first, &lo, &hi, &steps, config);
    let entries: Vec<f64> = best.x.iter().map(|&v| clamp01(v)).collect();
    let fitted = SquaredModuliMatrix::from_raw(3, entries);
    let chi2_u = structural_chi2(&fitted, config.mode, &opts, &quadruples);
    let chi2_d = chi2_data(&fitted, measurements)?;
    Ok(assemble_result(
        fitted,
        measurements,
        chi2_u,
        chi2_d,
        best.converged,
        measurements.len() < 4,
    ))
}

/// Fits the four mixing parameters directly, so the candidate matrix is
/// exactly unistochastic at every step and the structural chi-square is
/// identically zero; only the data term is minimized. The box is
/// `[0, pi/2]^3 x [0, pi]`.
pub fn fit_constrained_params(
    measurements: &[Measurement],
    config: &FitConfig,
) -> Result<FitResult, FitError> {
    use core::f64::consts::{FRAC_PI_2, PI};
    config.validate()?;
    for meas in measurements {
        meas.validate()?;
    }
    let lo = [0.0f64; 4];
    let hi = [FRAC_PI_2, FRAC_PI_2, FRAC_PI_2, PI];
    let params_of = |x: &[f64]| MixingParameters3 {
        theta12: x[0].clamp(0.0, FRAC_PI_2),
        theta13: x[1].clamp(0.0, FRAC_PI_2),
        theta23: x[2].clamp(0.0, FRAC_PI_2),
        delta: x[3].clamp(0.0, PI),
    };
    let objective = |x: &[f64]| {
        chi2_data_params(&params_of(x), measurements).expect("measurements validated")
            + config.penalty_weight * box_excess(x, &lo, &hi)
    };
    let first = [FRAC_PI_2 / 2.0, FRAC_PI_2 / 2.0, FRAC_PI_2 / 2.0, FRAC_PI_2];
    let steps = [0.2f64; 4];
    let best = multi_start(objective, &first, &lo, &hi, &steps, config);
    let params = params_of(&best.x);
    let reconstructed = build_ckm3(&params);
    let fitted = hadamard_square(&reconstructed);
    let chi2_d = chi2_data(&fitted, measurements)?;
    let pulls = measurements
        .iter()
        .map(|meas| (theory_value(&fitted, meas) - meas.value) / meas.sigma)
        .collect();
    Ok(FitResult {
        fitted_squared_moduli: fitted,
        fitted_params: params,
        chi2_unitarity: 0.0,
        chi2_data: chi2_d,
        chi2_total: chi2_d,
        physical: true,
        reconstructed: Some(reconstructed),
        pulls,
        converged: best.converged,
        underdetermined: measurements.len() < 4,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parametrize::test_support::toy3_params;
    use rand::Rng;

    const COS_DELTA_TOY: f64 = 0.6196773353931867; // 4 sqrt(15) / 25

    fn toy3() -> SquaredModuliMatrix {
        SquaredModuliMatrix::from_rows3([
            [1.0 / 3.0, 1.0 / 2.0, 1.0 / 6.0],
            [1.0 / 4.0, 2.0 / 5.0, 7.0 / 20.0],
            [5.0 / 12.0, 1.0 / 10.0, 29.0 / 60.0],
        ])
    }

    /// Squared moduli from the measured reference values (first two
    /// rows; the rest left zero exactly as measured sets do).
    fn measured_squares() -> SquaredModuliMatrix {
        let (a, b, c, d, e, f) = (0.9738f64, 0.22, 0.00367, 0.224, 0.996, 0.0423);
        let mut entries = vec![0.0f64; 9];
        for (k, v) in [a, b, c, d, e, f].iter().enumerate() {
            entries[k] = v * v;
        }
        SquaredModuliMatrix::from_raw(3, entries)
    }

    fn moduli_measurements(m: &SquaredModuliMatrix, sigma: f64) -> Vec<Measurement> {
        let mut out = Vec::new();
        for row in 0..3 {
            for col in 0..3 {
                out.push(Measurement {
                    kind: MeasurementKind::SquaredModulus,
                    target: MeasurementTarget::Position { row, col },
                    value: m.get(row, col),
                    sigma,
                });
            }
        }
        out
    }

    #[test]
    fn chi2_unitarity_vanishes_on_exact_input() {
        assert!(chi2_unitarity_condition(&toy3()) < 1e-20);
    }

    #[test]
    fn chi2_unitarity_on_measured_values_is_penalty_dominated() {
        let chi2 = chi2_triangle_free_reference();
        // imaginary candidate near 6 i alone contributes ~ 3.6e4
        assert!(chi2 > 1e3, "chi2 = {chi2}");
    }

    fn chi2_triangle_free_reference() -> f64 {
        chi2_unitarity_condition(&measured_squares())
    }

    #[test]
    fn chi2_unitarity_sees_a_line_perturbation() {
        let mut entries = toy3().entries().to_vec();
        entries[4] += 0.01; // m22
        let m = SquaredModuliMatrix::from_raw(3, entries);
        let chi2 = chi2_unitarity_condition(&m);
        // one row and one column sum each off by 0.01 -> at least 2e-4
        assert!(chi2 > 2.0 * 1e-4 * 0.999, "chi2 = {chi2}");
        assert!(chi2.is_finite());
        // with the line term switched off a cosine spread remains
        let opts = Chi2Options {
            line_weight: 0.0,
            ..Chi2Options::default()
        };
        let spread = chi2_unitarity_condition_with(&m, &opts, &enumerate_independent_quadruples());
        assert!(spread > 0.0);
    }

    #[test]
    fn chi2_triangles_vanishes_on_exact_input() {
        assert!(chi2_triangles(&toy3()) < 1e-20);
    }

    #[test]
    fn chi2_triangles_on_measured_values_is_positive() {
        let chi2 = chi2_triangles(&measured_squares());
        // the reference evaluation has imaginary sides near 0.8 i and
        // 11.7 i, so the hinge penalties dominate
        assert!(chi2 > 1e3, "chi2 = {chi2}");
    }

    #[test]
    fn chi2_triangles_is_smooth_in_a_perturbation() {
        let f = |h: f64| {
            let mut entries = toy3().entries().to_vec();
            entries[4] += h;
            chi2_triangles(&SquaredModuliMatrix::from_raw(3, entries))
        };
        let h = 1e-3;
        let (f0, f1, f2) = (f(0.0), f(h), f(2.0 * h));
        assert!(f0 < 1e-20 && f1 > 0.0 && f2 > f1);
        // quadratic growth: the second difference matches the first
        // curvature estimate within a modest factor
        let second = f2 - 2.0 * f1 + f0;
        assert!(second > 0.0 && second / f1 < 10.0, "f1 = {f1}, dd = {second}");
    }

    #[test]
    fn chi2_objectives_vanish_only_with_a_physical_verdict() {
        let half = SquaredModuliMatrix::from_rows3([
            [0.5, 0.5, 0.0],
            [0.5, 0.0, 0.5],
            [0.0, 0.5, 0.5],
        ]);
        // doubly stochastic but not unistochastic: cosine out of range
        assert!(!test_unistochastic(&half, 1e-9).unwrap().physical);
        assert!(chi2_unitarity_condition(&half) > 0.0);
        assert!(chi2_triangles(&half) > 0.0);
        assert!(chi2_unitarity_condition(&toy3()) < 1e-20);
    }

    #[test]
    fn chi2_zero_sets_are_permutation_invariant() {
        // the phase convention is position dependent, so the objective
        // value moves under permutations; membership of the zero set
        // (i.e. unistochasticity) does not
        let half = SquaredModuliMatrix::from_rows3([
            [0.5, 0.5, 0.0],
            [0.5, 0.0, 0.5],
            [0.0, 0.5, 0.5],
        ]);
        for (rp, cp) in [
            ([0, 1, 2], [0, 1, 2]),
            ([1, 2, 0], [0, 1, 2]),
            ([2, 0, 1], [1, 0, 2]),
            ([0, 2, 1], [2, 1, 0]),
        ] {
            let bad = half.permuted(&rp, &cp);
            assert!(chi2_unitarity_condition(&bad) > 1e-6, "{rp:?} {cp:?}");
            assert!(chi2_triangles(&bad) > 1e-6, "{rp:?} {cp:?}");
            let good = toy3().permuted(&rp, &cp);
            assert!(chi2_unitarity_condition(&good) < 1e-18, "{rp:?} {cp:?}");
            assert!(chi2_triangles(&good) < 1e-18, "{rp:?} {cp:?}");
        }
    }

    #[test]
    fn chi2_data_examples() {
        let exact = moduli_measurements(&toy3(), 1e-3);
        assert!(chi2_data(&toy3(), &exact).unwrap() < 1e-20);
        // single-term definition
        let single = Measurement {
            kind: MeasurementKind::Modulus,
            target: MeasurementTarget::Position { row: 0, col: 0 },
            value: 0.5,
            sigma: 0.1,
        };
        let t = (1.0f64 / 3.0).sqrt();
        let chi2 = chi2_data(&toy3(), &[single]).unwrap();
        assert!((chi2 - ((t - 0.5) / 0.1).powi(2)).abs() < 1e-14);
        // measured moduli against the exact toy theory: finite, positive
        let measured = [
            (0, 0, 0.9738, 0.0005),
            (0, 1, 0.22, 0.0026),
            (0, 2, 0.00367, 0.00047),
            (1, 0, 0.224, 0.012),
            (1, 1, 0.996, 0.013),
            (1, 2, 0.0423, 0.0015),
        ]
        .map(|(row, col, value, sigma)| Measurement {
            kind: MeasurementKind::Modulus,
            target: MeasurementTarget::Position { row, col },
            value,
            sigma,
        });
        let chi2 = chi2_data(&toy3(), &measured).unwrap();
        assert!(chi2.is_finite() && chi2 > 0.0);
    }

    #[test]
    fn chi2_data_rejects_bad_measurements() {
        let bad_sigma = Measurement {
            kind: MeasurementKind::Modulus,
            target: MeasurementTarget::Position { row: 0, col: 0 },
            value: 0.5,
            sigma: 0.0,
        };
        assert!(matches!(
            chi2_data(&toy3(), &[bad_sigma]),
            Err(FitError::BadSigma(_))
        ));
        let bad_target = Measurement {
            kind: MeasurementKind::Modulus,
            target: MeasurementTarget::Triangle {
                id: OrthogonalityId::C12,
                index: 0,
            },
            value: 0.5,
            sigma: 0.1,
        };
        assert!(matches!(
            chi2_data(&toy3(), &[bad_target]),
            Err(FitError::BadTarget(_))
        ));
        let bad_index = Measurement {
            kind: MeasurementKind::TriangleSide,
            target: MeasurementTarget::Triangle {
                id: OrthogonalityId::C12,
                index: 2,
            },
            value: 0.5,
            sigma: 0.1,
        };
        assert!(matches!(
            chi2_data(&toy3(), &[bad_index]),
            Err(FitError::BadTarget(_))
        ));
    }

    #[test]
    fn chi2_data_on_triangle_observables_vanishes_at_truth() {
        let m = toy3();
        let mut ms = Vec::new();
        for id in OrthogonalityId::ALL {
            let (rc, rt) = sides_on(&m, id);
            for (index, side) in [(0usize, rc), (1, rt)] {
                ms.push(Measurement {
                    kind: MeasurementKind::TriangleSide,
                    target: MeasurementTarget::Triangle { id, index },
                    value: side.magnitude().unwrap(),
                    sigma: 1e-2,
                });
            }
        }
        assert!(chi2_data(&m, &ms).unwrap() < 1e-20);
    }

    fn quick_config(mode: FitMode, restarts: usize, max_iterations: usize) -> FitConfig {
        FitConfig {
            mode,
            restarts,
            max_iterations,
            seed: 11,
            ..FitConfig::default()
        }
    }

    #[test]
    fn constrained_fit_recovers_exact_parameters() {
        let ms = moduli_measurements(&toy3(), 1e-3);
        let cfg = quick_config(FitMode::UnitarityCondition, 3, 4000);
        let r = fit_constrained_params(&ms, &cfg).unwrap();
        assert!(r.physical && !r.underdetermined);
        let truth = toy3_params();
        let (c12, c13, c23) = r.fitted_params.cosines();
        let (t12, t13, t23) = truth.cosines();
        assert!((c12 - t12).abs() < 1e-6, "c12 {c12} vs {t12}");
        assert!((c13 - t13).abs() < 1e-6);
        assert!((c23 - t23).abs() < 1e-6);
        assert!((r.fitted_params.cos_delta() - COS_DELTA_TOY).abs() < 1e-6);
        assert!(r.chi2_data < 1e-10, "chi2 {}", r.chi2_data);
        assert!((r.chi2_total - r.chi2_unitarity - r.chi2_data).abs() < 1e-12);
        let u = r.reconstructed.unwrap();
        assert!(crate::matrix::unitarity_defect(&u) < 1e-6);
    }

    #[test]
    fn constrained_fit_interpolates_four_measurements() {
        // four squared moduli from one independent quadruple: four
        // parameters meet four data points exactly
        let m = toy3();
        let ms: Vec<Measurement> = [(1usize, 1usize), (1, 2), (2, 1), (2, 2)]
            .iter()
            .map(|&(row, col)| Measurement {
                kind: MeasurementKind::SquaredModulus,
                target: MeasurementTarget::Position { row, col },
                value: m.get(row, col),
                sigma: 1e-3,
            })
            .collect();
        let cfg = quick_config(FitMode::UnitarityCondition, 3, 4000);
        let r = fit_constrained_params(&ms, &cfg).unwrap();
        assert!(r.chi2_data < 1e-8, "chi2 {}", r.chi2_data);
    }

    #[test]
    fn constrained_fit_balances_contradictory_duplicates() {
        // two incompatible measurements of one squared modulus with
        // equal errors settle at their mean
        let ms = [0.30, 0.40].map(|value| Measurement {
            kind: MeasurementKind::SquaredModulus,
            target: MeasurementTarget::Position { row: 0, col: 0 },
            value,
            sigma: 0.1,
        });
        let cfg = quick_config(FitMode::UnitarityCondition, 4, 3000);
        let r = fit_constrained_params(&ms, &cfg).unwrap();
        assert!(r.underdetermined);
        let fitted = r.fitted_squared_moduli.get(0, 0);
        assert!((fitted - 0.35).abs() < 1e-4, "fitted {fitted}");
        assert!((r.chi2_data - 2.0 * 0.25).abs() < 1e-6, "chi2 {}", r.chi2_data);
    }

    #[test]
    fn free_fit_recovers_toy_matrix() {
        let ms = moduli_measurements(&toy3(), 1e-3);
        let cfg = quick_config(FitMode::UnitarityCondition, 2, 6000);
        let r = fit(&ms, &cfg).unwrap();
        assert!(r.chi2_data < 1e-2, "chi2_data {}", r.chi2_data);
        assert!(r.physical, "fit not physical: {r:?}");
        let cos_delta = r.fitted_params.cos_delta();
        assert!(
            (cos_delta - COS_DELTA_TOY).abs() < 1e-3,
            "cos delta {cos_delta}"
        );
        assert!((r.chi2_total - r.chi2_unitarity - r.chi2_data).abs() < 1e-12);
        let u = r.reconstructed.unwrap();
        assert!(crate::matrix::unitarity_defect(&u) < 1e-6);
    }

    #[test]
    fn free_fit_handles_noisy_measurements() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ms: Vec<Measurement> = moduli_measurements(&toy3(), 0.01)
            .into_iter()
            .map(|mut meas| {
                meas.value = (meas.value + rng.gen_range(-0.01..0.01)).clamp(0.0, 1.0);
                meas
            })
            .collect();
        let cfg = quick_config(FitMode::Merged, 2, 6000);
        let r = fit(&ms, &cfg).unwrap();
        assert!(r.physical, "noisy fit not physical: {r:?}");
        let cos_delta = r.fitted_params.cos_delta();
        assert!(
            (cos_delta - COS_DELTA_TOY).abs() < 0.25,
            "cos delta {cos_delta}"
        );
    }

    #[test]
    fn free_fit_records_tension_of_measured_values() {
        let measured = [
            (0usize, 0usize, 0.9738, 0.0005),
            (0, 1, 0.22, 0.0026),
            (0, 2, 0.00367, 0.00047),
            (1, 0, 0.224, 0.012),
            (1, 1, 0.996, 0.013),
            (1, 2, 0.0423, 0.0015),
        ]
        .map(|(row, col, value, sigma)| Measurement {
            kind: MeasurementKind::Modulus,
            target: MeasurementTarget::Position { row, col },
            value,
            sigma,
        });
        let cfg = quick_config(FitMode::UnitarityCondition, 2, 3000);
        let r = fit(&measured, &cfg).unwrap();
        assert_eq!(r.pulls.len(), 6);
        assert!(r.chi2_total > 0.0);
        assert!(r.pulls.iter().all(|p| p.is_finite()));
    }

    #[test]
    fn fit_is_deterministic() {
        let ms = moduli_measurements(&toy3(), 1e-2);
        let cfg = quick_config(FitMode::UnitarityCondition, 2, 400);
        let a = fit(&ms, &cfg).unwrap();
        let b = fit(&ms, &cfg).unwrap();
        assert_eq!(
            a.fitted_squared_moduli.entries(),
            b.fitted_squared_moduli.entries()
        );
        assert_eq!(a.chi2_total.to_bits(), b.chi2_total.to_bits());
        assert_eq!(a.pulls, b.pulls);
    }

    #[test]
    fn adding_a_measurement_cannot_lower_the_data_term() {
        let m = toy3();
        let ms = moduli_measurements(&m, 1e-2);
        let base = chi2_data(&m, &ms[..4]).unwrap();
        let more = chi2_data(&m, &ms[..6]).unwrap();
        assert!(more >= base);
        let extra = Measurement {
            kind: MeasurementKind::SquaredModulus,
            target: MeasurementTarget::Position { row: 0, col: 0 },
            value: 0.9,
            sigma: 1e-2,
        };
        let mut with_extra = ms.clone();
        with_extra.push(extra);
        assert!(chi2_data(&m, &with_extra).unwrap() > chi2_data(&m, &ms).unwrap());
    }

    #[test]
    fn config_validation_rejects_degenerate_settings() {
        let ms = moduli_measurements(&toy3(), 1e-2);
        let bad = FitConfig {
            restarts: 0,
            ..FitConfig::default()
        };
        assert!(matches!(fit(&ms, &bad), Err(FitError::BadConfig(_))));
        let bad = FitConfig {
            penalty_weight: 0.0,
            ..FitConfig::default()
        };
        assert!(matches!(fit(&ms, &bad), Err(FitError::BadConfig(_))));
    }

    use rand_chacha::ChaCha8Rng;
}
