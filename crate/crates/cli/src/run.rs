//! One driver per command. Grid points run in parallel; results are
//! collected in grid order before any output is written.

use std::f64::consts::PI;
use std::fmt::Display;

use inghamlab::analysis::{
    block_reduction, condition_numbers, dd_threshold_check, default_trace_window, defect_decay_fit,
    frame_bound_sequence, run_trace_experiment, transition_bracket, ClusteredSetup, FrameBoundReport, SweepMetadata,
    SweepResult,
};
use inghamlab::analysis::centered_gram;
use inghamlab::exponents::{estimate_density, validate_gaps};
use inghamlab::gram::{assemble_gram, ExponentialSystem};
use inghamlab::{extreme_eigenvalues, DirectionAssignment, Error, ExponentFamily, FamilySpec, IntervalSpec, Partition};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{Command, ExperimentConfig};
use crate::output::{Cell, Report, Table};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    /// The request cannot be carried out as stated (exit status 2).
    #[error("{0}")]
    Invalid(String),
    /// A computation failed its own accuracy checks (exit status 3).
    #[error("{0}")]
    Numerical(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Invalid(_) => 2,
            RunError::Numerical(_) => 3,
        }
    }
}

fn classify(e: Error, context: impl Display) -> RunError {
    let msg = format!("{context}: {e}");
    match e {
        Error::Numerical(_) | Error::NearSingular { .. } | Error::NotHermitian { .. } => RunError::Numerical(msg),
        _ => RunError::Invalid(msg),
    }
}

type Result<T> = std::result::Result<T, RunError>;

fn to_json<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("reports are serializable")
}

struct Setup {
    family: ExponentFamily,
    directions: DirectionAssignment,
    partition: Option<Partition>,
}

fn setup(config: &ExperimentConfig) -> Result<Setup> {
    let family = config.family.generate(config.seed).map_err(|e| classify(e, "family"))?;
    let (directions, partition) = config
        .directions
        .assign(&family, config.seed)
        .map_err(|e| classify(e, "directions"))?;
    Ok(Setup { family, directions, partition })
}

pub fn run(config: &ExperimentConfig) -> Result<Report> {
    match config.command {
        Command::Density => density(config),
        Command::Gram => gram(config),
        Command::BoundsSweep => bounds_sweep(config),
        Command::Trace => trace(config),
        Command::DefectDecay => defect_decay(config),
        Command::DdCondition => dd_condition(config),
        Command::Sharpness => sharpness(config),
    }
}

fn density(config: &ExperimentConfig) -> Result<Report> {
    let family = config.family.generate(config.seed).map_err(|e| classify(e, "family"))?;
    let radii = config.grids.r.as_deref().expect("validated");
    let est = estimate_density(&family, radii).map_err(|e| classify(e, "density estimate"))?;
    let gaps = validate_gaps(&family, config.params.m.unwrap_or(1)).map_err(|e| classify(e, "gaps"))?;
    let mut t = Table::new("counting function", vec!["r", "n_plus", "n_plus_over_r", "in_fit"])
        .meta("dplus_estimate", est.dplus_estimate)
        .meta("intercept", est.intercept)
        .meta("fit_residual", est.residual)
        .meta("gamma", gaps.gamma.unwrap_or(f64::NAN))
        .meta("gamma_prime", gaps.gamma_prime.unwrap_or(f64::NAN))
        .meta("m", gaps.m);
    for (i, (&r, &n)) in est.radii.iter().zip(&est.counts).enumerate() {
        t.push(vec![r.into(), n.into(), (n as f64 / r).into(), est.fit_window.contains(&i).into()]);
    }
    Ok(Report { tables: vec![t], results: json!({ "density": to_json(&est), "gaps": to_json(&gaps) }) })
}

fn gram(config: &ExperimentConfig) -> Result<Report> {
    let s = setup(config)?;
    let interval = config.interval();
    let (g, first) = match config.params.n {
        Some(n) => {
            let g = centered_gram(&s.family, &s.directions, &interval, n).map_err(|e| classify(e, format!("N = {n}")))?;
            (g, s.family.index_of(s.family.center_position()) - n as i64)
        }
        None => {
            let sys = ExponentialSystem::new(s.family.clone(), s.directions.clone()).map_err(|e| classify(e, "system"))?;
            (assemble_gram(&sys, &interval).map_err(|e| classify(e, "gram"))?, s.family.first_index())
        }
    };
    let e = extreme_eigenvalues(&g).map_err(|e| classify(e, "eigensolve"))?;
    let m = g.entries();
    let mut t = Table::new("gram entries G[k][n] = (e_n, e_k)", vec!["k", "n", "re", "im"])
        .meta("size", g.size())
        .meta("lambda_min", e.min)
        .meta("lambda_max", e.max)
        .meta("residual", e.residual_min.max(e.residual_max));
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            t.push(vec![(first + i as i64).into(), (first + j as i64).into(), m[(i, j)].re.into(), m[(i, j)].im.into()]);
        }
    }
    Ok(Report { tables: vec![t], results: json!({ "extremes": to_json(&e), "gram": to_json(&g.to_record()) }) })
}

/// `(a, a + L)` per length, or the configured interval alone.
fn intervals(config: &ExperimentConfig) -> Result<Vec<IntervalSpec>> {
    let a = config.interval.map_or(0.0, |i| i.a());
    match &config.grids.lengths {
        Some(ls) => ls
            .iter()
            .map(|&l| IntervalSpec::new(a, a + l).map_err(|e| classify(e, format!("interval length {l}"))))
            .collect(),
        None => Ok(vec![config.interval()]),
    }
}

fn sweep(config: &ExperimentConfig, s: &Setup) -> Result<Vec<FrameBoundReport>> {
    let n_grid = config.grids.n.as_deref().expect("validated");
    let method = config.params.method.unwrap_or_default();
    intervals(config)?
        .par_iter()
        .map(|i| {
            frame_bound_sequence(&s.family, &s.directions, i, n_grid, method)
                .map_err(|e| classify(e, format!("interval_length = {}", i.length())))
        })
        .collect()
}

fn bound_table(rep: &FrameBoundReport) -> Table {
    let mut t = Table::new(format!("interval_length = {}", crate::output::format_real(rep.interval_length)), vec![
        "N",
        "lambda_min",
        "lambda_max",
    ])
    .meta("interval_length", rep.interval_length)
    .meta("method", rep.method.to_string())
    .meta("verdict", rep.verdict.to_string())
    .meta("max_residual", rep.max_residual)
    .meta("interlacing_holds", rep.interlacing_holds());
    for k in 0..rep.truncations.len() {
        t.push(vec![rep.truncations[k].into(), rep.lambda_min[k].into(), rep.lambda_max[k].into()]);
    }
    t
}

fn bounds_sweep(config: &ExperimentConfig) -> Result<Report> {
    let s = setup(config)?;
    let reports = sweep(config, &s)?;
    Ok(Report { tables: reports.iter().map(bound_table).collect(), results: to_json(&reports) })
}

fn trace_window(config: &ExperimentConfig, family: &ExponentFamily) -> Result<(f64, f64)> {
    let p = &config.params;
    if let (Some(y), Some(r)) = (p.y, p.r) {
        return Ok((y, r));
    }
    let (y, r) = default_trace_window(family, p.margin.unwrap_or(2)).map_err(|e| classify(e, "default trace window"))?;
    Ok((p.y.unwrap_or(y), p.r.unwrap_or(r)))
}

fn trace(config: &ExperimentConfig) -> Result<Report> {
    let s = setup(config)?;
    let interval = config.interval();
    let (y, r) = trace_window(config, &s.family)?;
    let experiments = config
        .grids
        .big_r
        .as_deref()
        .expect("validated")
        .par_iter()
        .map(|&big_r| {
            run_trace_experiment(&s.family, &s.directions, &interval, y, r, big_r)
                .map_err(|e| classify(e, format!("R = {big_r}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new("trace experiments", vec![
        "R",
        "card_omega_r",
        "card_gamma",
        "abs_trace_s",
        "trace_bound",
        "trace_bound_holds",
        "trace_s_re",
        "trace_s_im",
        "trace_decomposed_re",
        "trace_decomposed_im",
        "traces_agree",
        "max_defect",
        "biorthogonality_residual",
    ])
    .meta("y", y)
    .meta("r", r)
    .meta("d", s.directions.d())
    .meta("interval_length", interval.length());
    for x in &experiments {
        t.push(vec![
            x.big_r.into(),
            x.card_omega_r.into(),
            x.card_gamma.into(),
            x.trace_s.norm().into(),
            x.trace_bound().into(),
            x.trace_bound_holds().into(),
            x.trace_s.re.into(),
            x.trace_s.im.into(),
            x.trace_decomposed.re.into(),
            x.trace_decomposed.im.into(),
            x.traces_agree().into(),
            x.max_defect().into(),
            x.biorthogonality_residual.into(),
        ]);
    }
    Ok(Report { tables: vec![t], results: to_json(&experiments) })
}

fn defect_decay(config: &ExperimentConfig) -> Result<Report> {
    let s = setup(config)?;
    let interval = config.interval();
    let (y, r) = trace_window(config, &s.family)?;
    let radii = config.grids.big_r.as_deref().expect("validated");
    let fit = defect_decay_fit(&s.family, &s.directions, &interval, y, r, radii).map_err(|e| classify(e, "decay fit"))?;
    let mut t = Table::new("defect decay", vec!["R", "max_defect", "max_defect_sq", "majorant", "below_majorant"])
        .meta("y", y)
        .meta("r", r)
        .meta("fit", fit.describe_fit())
        .meta("slope", fit.slope.unwrap_or(f64::NAN))
        .meta("majorant_holds", fit.majorant_holds());
    for k in 0..fit.radii.len() {
        let d = fit.max_defect[k];
        t.push(vec![fit.radii[k].into(), d.into(), (d * d).into(), fit.majorant[k].into(), (d * d <= fit.majorant[k]).into()]);
    }
    Ok(Report { tables: vec![t], results: to_json(&fit) })
}

fn dd_condition(config: &ExperimentConfig) -> Result<Report> {
    let FamilySpec::ClusteredPairs { spacing, window, offset, .. } = config.family else {
        unreachable!("validated family kind")
    };
    let setup = ClusteredSetup {
        spacing,
        window,
        offset,
        gamma_prime: config.params.gamma_prime.expect("validated"),
        m: config.params.m.expect("validated"),
    };
    let interval = config.interval();
    let (lo, hi) = config.params.n_range.unwrap_or((-20, 20));
    let rows = config
        .grids
        .delta
        .as_deref()
        .expect("validated")
        .par_iter()
        .map(|&delta| {
            let ctx = |e| classify(e, format!("delta = {delta}"));
            let cond = condition_numbers(&setup, &interval, delta).map_err(ctx)?;
            let basis = setup.basis(delta).map_err(ctx)?;
            let c = dd_threshold_check(&basis, &interval, lo..=hi).map_err(ctx)?;
            Ok((cond, c))
        })
        .collect::<Result<Vec<_>>>()?;
    let cs: Vec<f64> = rows.iter().map(|(_, c)| c.empirical_c).collect();
    let spread = cs.iter().copied().fold(f64::NEG_INFINITY, f64::max) / cs.iter().copied().fold(f64::INFINITY, f64::min);
    let mut t = Table::new("conditioning and integration-by-parts constant", vec![
        "delta",
        "raw_condition",
        "dd_condition",
        "dd_condition_origin_zero",
        "ratio",
        "empirical_c",
        "far_field_c",
        "pairs",
    ])
    .meta("c_spread", spread)
    .meta("n_range", format!("{lo}..={hi}"));
    for (cond, c) in &rows {
        let (raw, ratio) = match cond.raw_condition {
            Some(v) => (Cell::Real(v), Cell::Real(v / cond.dd_condition)),
            None => (Cell::from("overflow"), Cell::from("overflow")),
        };
        t.push(vec![
            cond.delta.into(),
            raw,
            cond.dd_condition.into(),
            cond.dd_condition_origin_zero.into(),
            ratio,
            c.empirical_c.into(),
            c.far_field_c.into(),
            c.pairs.into(),
        ]);
    }
    let results: Vec<serde_json::Value> =
        rows.iter().map(|(cond, c)| json!({ "conditioning": to_json(cond), "threshold": to_json(c) })).collect();
    Ok(Report { tables: vec![t], results: json!({ "points": results, "c_spread": spread }) })
}

fn sharpness(config: &ExperimentConfig) -> Result<Report> {
    let s = setup(config)?;
    let partition = s.partition.as_ref().expect("validated partition rule");
    let reports = sweep(config, &s)?;
    let ivs = intervals(config)?;
    let blocks = ivs
        .par_iter()
        .map(|i| {
            block_reduction(&s.family, partition, i).map_err(|e| classify(e, format!("interval_length = {}", i.length())))
        })
        .collect::<Result<Vec<_>>>()?;
    let sweep_result = SweepResult {
        parameter: "interval_length".into(),
        grid: ivs.iter().map(|i| i.length()).collect(),
        points: reports.clone(),
        metadata: SweepMetadata { family: s.family.label().into(), d: partition.d, seed: Some(config.seed) },
    };
    let bracket = transition_bracket(&sweep_result);
    let mut t = Table::new("threshold sweep", vec![
        "interval_length",
        "verdict",
        "lambda_min_last",
        "lambda_max_last",
        "block_residual",
        "reduction_gap",
    ])
    .meta("alpha", partition.target_alpha)
    .meta("predicted_threshold", 2.0 * PI * partition.max_class_density())
    .meta("bracket_lo", bracket.map_or(f64::NAN, |b| b.0))
    .meta("bracket_hi", bracket.map_or(f64::NAN, |b| b.1));
    for (rep, b) in reports.iter().zip(&blocks) {
        t.push(vec![
            rep.interval_length.into(),
            rep.verdict.to_string().into(),
            (*rep.lambda_min.last().expect("nonempty")).into(),
            (*rep.lambda_max.last().expect("nonempty")).into(),
            b.residual.into(),
            b.reduction_gap().into(),
        ]);
    }
    let mut classes = Table::new("classes", vec!["class", "members", "density", "threshold"]).meta("period", partition.period);
    for j in 1..=partition.d {
        let dj = partition.class_densities[j - 1];
        classes.push(vec![j.into(), partition.members(j).len().into(), dj.into(), (2.0 * PI * dj).into()]);
    }
    Ok(Report {
        tables: vec![t, classes],
        results: json!({
            "sweep": to_json(&sweep_result),
            "blocks": to_json(&blocks),
            "bracket": to_json(&bracket),
            "partition": to_json(partition),
        }),
    })
}
