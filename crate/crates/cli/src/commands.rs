//! Command implementations: each builds a JSON report, optional CSV
//! sidecars, and the exit code.

use serde_json::{json, Value};
use unisto_core::triangles::TangentQuadruple;
use unisto_core::unitarity::FirstLineSolution;
use unisto_core::{
    check_doubly_stochastic, cos_delta_candidates_from_tangents, count_distinct_cos_delta_expressions,
    enumerate_independent_quadruples, fit, fit_constrained_params, hadamard_square, mean_moduli,
    convex_combine, reconstruct_unitary, recover_cij_from_tangents, sigma_moduli, solve4,
    test_unistochastic, triangle_geometry, unitarity_defect, ComplexMatrix, FitConfig, FitMode,
    FitResult, MixingParameters3, ModuliEnsemble, OrthogonalityId, SeparationVerdict, Solve4Config,
    SquaredModuliMatrix, StochasticityReport, UnitarityError, DEFAULT_TOL,
};

use crate::io::{
    matrix_from, measurements_from, num, sinkhorn_project, tagged_json, InputDocument, InputError,
};

/// Exit codes: 0 consistent/physical, 1 inconsistent with unitarity,
/// 2 not doubly stochastic, 3 input or usage error, 4 internal numerical
/// failure.
pub const EXIT_OK: i32 = 0;
pub const EXIT_UNPHYSICAL: i32 = 1;
pub const EXIT_NOT_STOCHASTIC: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

const SINKHORN_SWEEPS: usize = 100;

/// A finished command: report, exit code, and CSV sidecars as
/// `(file name, content)` pairs.
pub struct Report {
    pub json: Value,
    pub exit: i32,
    pub csv: Vec<(String, String)>,
}

impl Report {
    fn new(json: Value, exit: i32) -> Self {
        Self {
            json,
            exit,
            csv: Vec::new(),
        }
    }
}

/// Effective settings after merging document options and flags (flags
/// win).
#[derive(Debug, Clone)]
pub struct Settings {
    pub tolerance: f64,
    pub seed: u64,
    pub restarts: Option<usize>,
    pub max_iterations: Option<usize>,
    pub mode: FitMode,
    pub penalty_weight: Option<f64>,
    pub hinge_weight: Option<f64>,
    pub project: bool,
    pub all_relations: bool,
    pub constrained: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOL,
            seed: 0,
            restarts: None,
            max_iterations: None,
            mode: FitMode::UnitarityCondition,
            penalty_weight: None,
            hinge_weight: None,
            project: false,
            all_relations: false,
            constrained: false,
        }
    }
}

pub fn parse_mode(name: &str) -> Result<FitMode, InputError> {
    match name {
        "unitarity-condition" => Ok(FitMode::UnitarityCondition),
        "triangles" => Ok(FitMode::Triangles),
        "merged" => Ok(FitMode::Merged),
        other => Err(InputError(format!(
            "unknown mode {other:?} (unitarity-condition, triangles, merged)"
        ))),
    }
}

fn stochasticity_json(r: &StochasticityReport) -> Value {
    json!({
        "rowDefects": r.row_defects.iter().map(|&v| num(v)).collect::<Vec<_>>(),
        "colDefects": r.col_defects.iter().map(|&v| num(v)).collect::<Vec<_>>(),
        "maxDefect": num(r.max_defect),
        "tolerance": num(r.tolerance),
        "pass": r.pass,
    })
}

fn cosines_json(fl: &FirstLineSolution) -> Value {
    let one = |name: &str, e: &unisto_core::unitarity::CosineEstimate| {
        (
            name.to_string(),
            json!({"value": num(e.value), "valid": e.valid, "degenerate": e.degenerate}),
        )
    };
    Value::Object(
        [one("c12", &fl.c12), one("c13", &fl.c13), one("c23", &fl.c23)]
            .into_iter()
            .collect(),
    )
}

fn verdict_json(v: &SeparationVerdict) -> Value {
    json!({
        "physical": v.physical,
        "cosDelta": v.cos_delta().map_or(Value::Null, num),
        "designated": tagged_json(&v.designated),
        "cosDeltaCandidates": v.cos_delta_values.iter().map(tagged_json).collect::<Vec<_>>(),
        "cosines": cosines_json(&v.mixing),
        "diagnostics": v.diagnostics,
    })
}

fn matrix_json(m: &SquaredModuliMatrix) -> Value {
    let n = m.dim();
    Value::Array(
        (0..n)
            .map(|i| Value::Array((0..n).map(|j| num(m.get(i, j))).collect()))
            .collect(),
    )
}

fn complex_matrix_json(u: &ComplexMatrix) -> Value {
    let n = u.dim();
    Value::Array(
        (0..n)
            .map(|i| {
                Value::Array(
                    (0..n)
                        .map(|j| {
                            let z = u.get(i, j);
                            Value::Array(vec![num(z.re), num(z.im)])
                        })
                        .collect(),
                )
            })
            .collect(),
    )
}

fn params_json(p: &MixingParameters3) -> Value {
    json!({
        "theta12": num(p.theta12),
        "theta13": num(p.theta13),
        "theta23": num(p.theta23),
        "delta": num(p.delta),
    })
}

/// The stochasticity report or the not-doubly-stochastic outcome.
fn stochastic_gate(
    m: &SquaredModuliMatrix,
    tolerance: f64,
) -> Result<StochasticityReport, Report> {
    match check_doubly_stochastic(m, tolerance) {
        Ok(report) if report.pass => Ok(report),
        Ok(report) => Err(Report::new(
            json!({
                "command": "check",
                "stochasticity": stochasticity_json(&report),
                "verdict": Value::Null,
            }),
            EXIT_NOT_STOCHASTIC,
        )),
        Err(e) => Err(Report::new(
            json!({"error": format!("invalid matrix: {e:?}")}),
            EXIT_INPUT,
        )),
    }
}

fn unitarity_error_report(command: &str, e: &UnitarityError) -> Report {
    match e {
        UnitarityError::NotDoublyStochastic(report) => Report::new(
            json!({
                "command": command,
                "stochasticity": stochasticity_json(report),
                "error": "not doubly stochastic",
            }),
            EXIT_NOT_STOCHASTIC,
        ),
        UnitarityError::ReconstructionRefused(verdict) => Report::new(
            json!({
                "command": command,
                "verdict": verdict_json(verdict),
                "error": "not unistochastic; reconstruction refused",
            }),
            EXIT_UNPHYSICAL,
        ),
        other => Report::new(
            json!({"command": command, "error": format!("{other}")}),
            EXIT_NUMERICAL,
        ),
    }
}

fn prepared_matrix(
    doc: &InputDocument,
    s: &Settings,
) -> Result<(SquaredModuliMatrix, bool), InputError> {
    let m = matrix_from(doc, s.tolerance.max(1e-9))?;
    if s.project {
        Ok((sinkhorn_project(&m, SINKHORN_SWEEPS), true))
    } else {
        Ok((m, false))
    }
}

/// `check`: doubly-stochastic gate, then the unistochasticity decision
/// (n = 3) or the numerical solver (n = 4).
pub fn cmd_check(doc: &InputDocument, s: &Settings) -> Result<Report, InputError> {
    let (m, projected) = prepared_matrix(doc, s)?;
    let stochasticity = match stochastic_gate(&m, s.tolerance) {
        Ok(r) => r,
        Err(report) => return Ok(report),
    };
    match m.dim() {
        3 => {
            let verdict = match test_unistochastic(&m, s.tolerance) {
                Ok(v) => v,
                Err(e) => return Ok(unitarity_error_report("check", &e)),
            };
            let exit = if verdict.physical { EXIT_OK } else { EXIT_UNPHYSICAL };
            Ok(Report::new(
                json!({
                    "command": "check",
                    "n": 3,
                    "projected": projected,
                    "stochasticity": stochasticity_json(&stochasticity),
                    "verdict": verdict_json(&verdict),
                }),
                exit,
            ))
        }
        4 => {
            let mut config = Solve4Config::default();
            if let Some(it) = s.max_iterations {
                config.max_iterations = it;
            }
            let outcome = solve4(&m, &config);
            let physical = outcome.solutions.iter().any(|sol| sol.criteria_pass);
            let solutions: Vec<Value> = outcome
                .solutions
                .iter()
                .map(|sol| {
                    json!({
                        "b2": num(sol.params.b2),
                        "beta1": num(sol.params.beta1),
                        "beta2": num(sol.params.beta2),
                        "gamma1": num(sol.params.gamma1),
                        "residualNorm": num(sol.residual_norm),
                        "jacobianRank": sol.jacobian_rank,
                        "criteriaPass": sol.criteria_pass,
                    })
                })
                .collect();
            Ok(Report::new(
                json!({
                    "command": "check",
                    "n": 4,
                    "projected": projected,
                    "stochasticity": stochasticity_json(&stochasticity),
                    "solutions": solutions,
                    "diagnostics": outcome.diagnostics,
                    "physical": physical,
                }),
                if physical { EXIT_OK } else { EXIT_UNPHYSICAL },
            ))
        }
        n => Err(InputError(format!(
            "check supports 3x3 and 4x4 matrices, got {n}x{n}"
        ))),
    }
}

/// `reconstruct`: emits the reconstructed unitary as JSON (and CSV).
pub fn cmd_reconstruct(doc: &InputDocument, s: &Settings) -> Result<Report, InputError> {
    let (m, projected) = prepared_matrix(doc, s)?;
    if m.dim() != 3 {
        return Err(InputError(String::from(
            "reconstruct supports 3x3 matrices only",
        )));
    }
    let u = match reconstruct_unitary(&m) {
        Ok(u) => u,
        Err(e) => return Ok(unitarity_error_report("reconstruct", &e)),
    };
    let defect = unitarity_defect(&u);
    let round_trip = hadamard_square(&u);
    let mut csv = String::from("row,col,re,im\n");
    for i in 0..3 {
        for j in 0..3 {
            let z = u.get(i, j);
            csv.push_str(&format!("{i},{j},{:.16e},{:.16e}\n", z.re, z.im));
        }
    }
    let mut report = Report::new(
        json!({
            "command": "reconstruct",
            "projected": projected,
            "unitary": complex_matrix_json(&u),
            "unitarityDefect": num(defect),
            "squaredModuli": matrix_json(&round_trip),
        }),
        EXIT_OK,
    );
    report.csv.push((String::from("reconstructed.csv"), csv));
    Ok(report)
}

/// `triangles`: all six orthogonality triangles with sides, apex, and
/// vertex angles; CSV of the vertex coordinates.
pub fn cmd_triangles(doc: &InputDocument, s: &Settings) -> Result<Report, InputError> {
    let (m, projected) = prepared_matrix(doc, s)?;
    if m.dim() != 3 {
        return Err(InputError(String::from(
            "triangles supports 3x3 matrices only",
        )));
    }
    let quadruple = enumerate_independent_quadruples()[0];
    let mut entries = Vec::new();
    let mut csv = String::from("relation,x1,y1,x2,y2,x3,y3\n");
    let mut all_valid = true;
    for id in OrthogonalityId::ALL {
        let geo = match triangle_geometry(&m, id, &quadruple) {
            Ok(g) => g,
            Err(e) => return Ok(unitarity_error_report("triangles", &e)),
        };
        all_valid &= geo.valid;
        if let Some((rho, eta)) = geo.apex {
            csv.push_str(&format!("{id},0,0,1,0,{rho:.16e},{eta:.16e}\n"));
        }
        entries.push(json!({
            "relation": format!("{id}"),
            "rc": tagged_json(&geo.sides.0),
            "rt": tagged_json(&geo.sides.1),
            "valid": geo.valid,
            "apex": geo.apex.map_or(Value::Null, |(rho, eta)| json!([num(rho), num(eta)])),
            "vertexAngles": geo.vertex_angles.map_or(Value::Null, |(a, b, c)| {
                json!([num(a), num(b), num(c)])
            }),
            "angleCosines": geo.vertex_angles.map_or(Value::Null, |(a, b, c)| {
                json!([num(a.cos()), num(b.cos()), num(c.cos())])
            }),
            "diagnostics": geo.diagnostics,
        }));
    }
    let mut report = Report::new(
        json!({
            "command": "triangles",
            "projected": projected,
            "triangles": entries,
            "allValid": all_valid,
        }),
        if all_valid { EXIT_OK } else { EXIT_UNPHYSICAL },
    );
    report.csv.push((String::from("triangle_vertices.csv"), csv));
    Ok(report)
}

/// `recover-angles`: mixing cosines and phase-cosine candidates from the
/// four measurable phase tangents.
pub fn cmd_recover_angles(doc: &InputDocument) -> Result<Report, InputError> {
    let [t22, t23, t32, t33] = doc
        .tangents
        .ok_or_else(|| InputError(String::from("recover-angles requires tangents")))?;
    if ![t22, t23, t32, t33].iter().all(|t| t.is_finite()) {
        return Err(InputError(String::from("tangents must be finite")));
    }
    let tangents = TangentQuadruple { t22, t23, t32, t33 };
    let candidates = cos_delta_candidates_from_tangents(&tangents);
    let (squares, cosines, valid) = match recover_cij_from_tangents(&tangents) {
        Ok(sq) => {
            let clamp = |x: f64| x.clamp(0.0, 1.0);
            let cosines = json!({
                "c12": num(clamp(sq.c12_sq).sqrt()),
                "c13": num(clamp(sq.c13_sq).sqrt()),
                "c23": num(clamp(sq.c23_sq).sqrt()),
            });
            let squares = json!({
                "c12Sq": num(sq.c12_sq),
                "c13Sq": num(sq.c13_sq),
                "c23Sq": num(sq.c23_sq),
                "valid": sq.valid,
            });
            (squares, cosines, sq.valid)
        }
        Err(e) => (
            json!({"error": format!("{e}")}),
            Value::Null,
            false,
        ),
    };
    let exit = if valid && candidates.consistent.is_some() {
        EXIT_OK
    } else {
        EXIT_UNPHYSICAL
    };
    Ok(Report::new(
        json!({
            "command": "recover-angles",
            "tangents": [num(t22), num(t23), num(t32), num(t33)],
            "squaredCosines": squares,
            "cosines": cosines,
            "cosDeltaCandidates": candidates.candidates.iter().map(|&v| num(v)).collect::<Vec<_>>(),
            "consistent": candidates.consistent.map_or(Value::Null, num),
            "diagnostics": candidates.diagnostics,
        }),
        exit,
    ))
}

fn fit_config(doc: &InputDocument, s: &Settings) -> FitConfig {
    let opts = doc.options.clone().unwrap_or_default();
    let mut config = FitConfig {
        mode: s.mode,
        seed: s.seed,
        full_pairing: s.all_relations,
        ..FitConfig::default()
    };
    if let Some(r) = s.restarts.or(opts.restarts) {
        config.restarts = r;
    }
    if let Some(it) = s.max_iterations.or(opts.max_iterations) {
        config.max_iterations = it;
    }
    if let Some(w) = s.penalty_weight.or(opts.penalty_weight) {
        config.penalty_weight = w;
    }
    if let Some(w) = s.hinge_weight.or(opts.hinge_weight) {
        config.hinge_weight = w;
    }
    config
}

fn fit_result_json(r: &FitResult, mode: FitMode) -> Value {
    let mode_name = match mode {
        FitMode::UnitarityCondition => "unitarity-condition",
        FitMode::Triangles => "triangles",
        FitMode::Merged => "merged",
    };
    json!({
        "command": "fit",
        "mode": mode_name,
        "fittedSquaredModuli": matrix_json(&r.fitted_squared_moduli),
        "fittedParams": params_json(&r.fitted_params),
        "chi2": {
            "unitarity": num(r.chi2_unitarity),
            "data": num(r.chi2_data),
            "total": num(r.chi2_total),
        },
        "physical": r.physical,
        "reconstructed": r.reconstructed.as_ref().map_or(Value::Null, complex_matrix_json),
        "pulls": r.pulls.iter().map(|&p| num(p)).collect::<Vec<_>>(),
        "converged": r.converged,
        "underdetermined": r.underdetermined,
    })
}

/// `fit`: chi-square fit of the measurements, free-moduli by default or
/// parameter-constrained with `--constrained`.
pub fn cmd_fit(doc: &InputDocument, s: &Settings) -> Result<Report, InputError> {
    let measurements = measurements_from(doc)?;
    let config = fit_config(doc, s);
    let result = if s.constrained {
        fit_constrained_params(&measurements, &config)
    } else {
        fit(&measurements, &config)
    }
    .map_err(|e| InputError(format!("{e}")))?;
    let exit = if result.physical { EXIT_OK } else { EXIT_UNPHYSICAL };
    Ok(Report::new(fit_result_json(&result, config.mode), exit))
}

/// `stats`: entrywise mean and spread of the moduli, plus the convex
/// combination of the squares.
pub fn cmd_stats(doc: &InputDocument, s: &Settings) -> Result<Report, InputError> {
    let grids = doc
        .unitaries
        .as_ref()
        .ok_or_else(|| InputError(String::from("stats requires unitaries")))?;
    let mut members = Vec::with_capacity(grids.len());
    for grid in grids {
        let n = grid.len();
        if grid.iter().any(|row| row.len() != n) {
            return Err(InputError(String::from("unitaries must be square grids")));
        }
        let entries = grid
            .iter()
            .flatten()
            .map(|&[re, im]| num_complex::Complex64::new(re, im))
            .collect();
        members.push(
            ComplexMatrix::from_entries(n, entries)
                .map_err(|e| InputError(format!("invalid unitary grid: {e:?}")))?,
        );
    }
    let ensemble = match &doc.weights {
        Some(w) => ModuliEnsemble::with_weights(members, w.clone()),
        None => ModuliEnsemble::new(members),
    }
    .map_err(|e| InputError(format!("{e}")))?;
    let real_matrix_json = |m: &unisto_core::stats::RealMatrix| {
        let n = m.dim();
        Value::Array(
            (0..n)
                .map(|i| Value::Array((0..n).map(|j| num(m.get(i, j))).collect()))
                .collect(),
        )
    };
    // mean/spread are defined for uniform weights only
    let mean = mean_moduli(&ensemble).ok();
    let sigma = sigma_moduli(&ensemble).ok();
    let combined = match convex_combine(&ensemble) {
        Ok(c) => c,
        Err(e) => return Err(InputError(format!("{e}"))),
    };
    let stochasticity = check_doubly_stochastic(&combined, s.tolerance.max(1e-9))
        .map(|r| stochasticity_json(&r))
        .unwrap_or(Value::Null);
    let verdict = if combined.dim() == 3 {
        test_unistochastic(&combined, s.tolerance.max(1e-9))
            .map(|v| verdict_json(&v))
            .unwrap_or(Value::Null)
    } else {
        Value::Null
    };
    Ok(Report::new(
        json!({
            "command": "stats",
            "members": ensemble.len(),
            "meanModuli": mean.as_ref().map_or(Value::Null, &real_matrix_json),
            "sigmaModuli": sigma.as_ref().map_or(Value::Null, &real_matrix_json),
            "convexCombination": matrix_json(&combined),
            "combinationStochasticity": stochasticity,
            "combinationVerdict": verdict,
        }),
        EXIT_OK,
    ))
}

/// `quadruples`: the census of independent quadruples and the numeric
/// fingerprint count of distinct phase-cosine expressions.
pub fn cmd_quadruples(seed: u64) -> Report {
    let quadruples = enumerate_independent_quadruples();
    let listing: Vec<Value> = quadruples
        .iter()
        .map(|q| {
            Value::Array(
                q.positions()
                    .iter()
                    .map(|&(r, c)| json!([r, c]))
                    .collect(),
            )
        })
        .collect();
    let expressions = count_distinct_cos_delta_expressions(seed);
    Report::new(
        json!({
            "command": "quadruples",
            "count": quadruples.len(),
            "quadruples": listing,
            "distinctCosDeltaExpressions": expressions,
        }),
        EXIT_OK,
    )
}
