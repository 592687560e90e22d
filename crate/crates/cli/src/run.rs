//! Experiment orchestration for the five subcommands.

use std::collections::BTreeMap;
use std::path::Path;

use quanneal_core::anneal::{
    adiabatic_monitor, commutator_residual, ground_space_overlap, make_eqa_schedule,
    make_poly_schedule, make_qa_schedule, make_sa_schedule, propagate, reintegrate_max_rel_err,
    DrivenHamiltonian, IntegratorConfig, Schedule, ScheduleFamily,
};
use quanneal_core::pimc::{
    effective_couplings, read_checkpoint, run_pimc, write_checkpoint, Checkpoint, FieldMode,
    PimcParams,
};
use quanneal_core::qmap::{
    annihilation_residual, ising_closed_form_check, qa_bound_value, recover_markov_matrix,
    sa_bound_value, QuantumMap,
};
use quanneal_core::spectral::dense_spectrum;
use quanneal_core::{
    brute_thermal, build_eqa_hamiltonian, compute_map_params, flip_identity_residual,
    gibbs_vector, ising_decompose, verify_gibbs_ground, ClassicalModel, DiagonalObservable,
    DiagonalOperator, EnergyKind, Spin, ThermalPoint,
};

use crate::config::{ExperimentConfig, FamilyConfig, ScheduleConfig};
use crate::error::CliError;
use crate::output::{resolve_precision, CheckResult, Emitter, RunReport, REPORT_SCHEMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Verify,
    Anneal,
    Pimc,
    Schedule,
    Decompose,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Verify => "verify",
            Subcommand::Anneal => "anneal",
            Subcommand::Pimc => "pimc",
            Subcommand::Schedule => "schedule",
            Subcommand::Decompose => "decompose",
        }
    }
}

struct RunContext {
    model: ClassicalModel,
    point: ThermalPoint,
    seed: u64,
    checks: Vec<CheckResult>,
    metrics: BTreeMap<String, f64>,
    notes: Vec<String>,
}

impl RunContext {
    fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }
}

/// Run one experiment into `out_dir`. The report is returned and also
/// written as report.json; a failing check does not abort emission.
pub fn run_experiment(
    sub: Subcommand,
    config: &ExperimentConfig,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<RunReport, CliError> {
    config.validate()?;
    let mut ctx = RunContext {
        model: config.build_model()?,
        point: config.thermal_point()?,
        seed: seed_override.unwrap_or(config.run.seed),
        checks: Vec::new(),
        metrics: BTreeMap::new(),
        notes: Vec::new(),
    };
    let mut emitter = Emitter::new(out_dir, resolve_precision(config.output.precision))?;

    match sub {
        Subcommand::Verify => run_verify(&mut ctx)?,
        Subcommand::Anneal => run_anneal(config, &mut ctx, &mut emitter)?,
        Subcommand::Pimc => run_pimc_cmd(config, &mut ctx, &mut emitter)?,
        Subcommand::Schedule => run_schedule(config, &mut ctx, &mut emitter)?,
        Subcommand::Decompose => run_decompose(&mut ctx, &mut emitter)?,
    }

    let echo = config.canonical_toml()?;
    emitter.write_text("config.toml", &echo)?;
    let report = RunReport {
        schema: REPORT_SCHEMA,
        subcommand: sub.name().to_string(),
        seed: ctx.seed,
        checks: ctx.checks,
        metrics: ctx.metrics,
        notes: ctx.notes,
        manifest: Vec::new(),
        config_echo: echo,
    };
    emitter.finish(report)
}

// ---------------------------------------------------------------- verify

fn run_verify(ctx: &mut RunContext) -> Result<(), CliError> {
    let model = &ctx.model;
    let point = ctx.point;

    let flip = flip_identity_residual(model, point)?;
    ctx.checks.push(CheckResult::below("flip_identity_residual", flip, 1e-12));

    let params = compute_map_params(model, point)?;
    ctx.metrics.insert("p".into(), params.p);
    ctx.metrics.insert("chi".into(), params.chi);

    if model.spin() == Spin::HALF {
        let rep = verify_gibbs_ground(model, point)?;
        ctx.checks.push(CheckResult::at_least(
            "gibbs_ground_overlap",
            rep.overlap_with_gibbs,
            1.0 - 1e-9,
        ));
        ctx.checks.push(CheckResult::below(
            "ground_energy_abs",
            rep.ground_energy.abs(),
            1e-9,
        ));
        let bound = sa_bound_value(model.n_sites(), point.beta, params.p);
        ctx.checks.push(CheckResult::at_least("gap_above_bound", rep.gap, bound));
        ctx.checks.push(CheckResult::at_least(
            "ground_positivity_min_entry",
            rep.positivity_min_entry,
            f64::MIN_POSITIVE,
        ));
        ctx.metrics.insert("gap".into(), rep.gap);
        ctx.metrics.insert("gap_bound".into(), bound);

        let comm = commutator_residual(model, point)?;
        ctx.checks.push(CheckResult::below(
            "commutator_residual",
            comm.commutator_residual,
            1e-9,
        ));
        ctx.checks.push(CheckResult::below(
            "eq5_deviation",
            comm.eq5_max_deviation,
            1e-8 * comm.h_norm.max(1.0),
        ));
        ctx.checks.push(CheckResult::below(
            "matrix_element_vs_bound",
            comm.max_matrix_element,
            comm.matrix_element_bound * (1.0 + 1e-12),
        ));
    } else {
        // spin-s: the field family at gamma = chi plays the SA role; the
        // ground space can be exactly degenerate, so the Gibbs vector is
        // checked against the whole ground space.
        let h = build_eqa_hamiltonian(model, point, params.chi)?;
        let psi = gibbs_vector(model, point, true)?;
        let res = annihilation_residual(&h, &psi)?;
        ctx.checks.push(CheckResult::below("gibbs_annihilation_residual", res, 1e-10));
        let sol = dense_spectrum(&h)?;
        let overlap = ground_space_overlap(&sol, &psi, 1e-9);
        ctx.checks.push(CheckResult::at_least(
            "gibbs_ground_space_overlap",
            overlap,
            1.0 - 1e-9,
        ));
        ctx.metrics.insert("ground_energy".into(), sol.energies[0]);
        ctx.notes.push(
            "spin-s model: SA-family commutator and gap-bound checks are spin-1/2 only, skipped"
                .into(),
        );
    }

    let (_, markov) = recover_markov_matrix(model, point)?;
    ctx.checks.push(CheckResult::below(
        "markov_row_sum_deviation",
        markov.max_row_sum_deviation,
        1e-10,
    ));
    ctx.checks.push(CheckResult::at_least(
        "markov_min_off_diagonal",
        markov.min_off_diagonal,
        0.0,
    ));
    ctx.checks.push(CheckResult::below(
        "markov_detailed_balance",
        markov.detailed_balance_residual,
        1e-10,
    ));
    ctx.metrics
        .insert("markov_min_diagonal".into(), markov.min_diagonal);
    ctx.notes
        .push("markov_min_diagonal is reported without assertion; it may be negative".into());
    Ok(())
}

// ---------------------------------------------------------------- anneal

fn build_schedule(
    config: &ExperimentConfig,
    model: &ClassicalModel,
    point: ThermalPoint,
) -> Result<(Schedule, ScheduleConfig), CliError> {
    let sched_cfg = config
        .run
        .schedule
        .clone()
        .ok_or_else(|| CliError::Config("this subcommand needs a [run.schedule] block".into()))?;
    let params = compute_map_params(model, point)?;
    let n = model.n_sites();
    let schedule = match sched_cfg.family {
        FamilyConfig::Sa => {
            let t_final = sched_cfg.t_final.unwrap_or(point.temperature);
            make_sa_schedule(params.p, n, sched_cfg.epsilon, t_final, sched_cfg.t_max_cap)?
        }
        FamilyConfig::Eqa => {
            let gamma_final = sched_cfg.gamma_final.unwrap_or(params.chi);
            let c = sched_cfg.c.unwrap_or(sched_cfg.gamma0);
            make_eqa_schedule(
                n,
                c,
                sched_cfg.epsilon,
                sched_cfg.gamma0,
                gamma_final,
                sched_cfg.refined,
            )?
        }
        FamilyConfig::Qa => {
            let gamma_final = sched_cfg.gamma_final.unwrap_or(params.chi);
            let c = sched_cfg.c.unwrap_or(sched_cfg.gamma0);
            make_qa_schedule(n, c, sched_cfg.epsilon, sched_cfg.gamma0, gamma_final)?
        }
        FamilyConfig::Poly => {
            let t_final = sched_cfg.t_final.unwrap_or(point.temperature);
            make_poly_schedule(sched_cfg.q, n, sched_cfg.epsilon, t_final)?
        }
    };
    let schedule = if sched_cfg.compression > 1.0 {
        schedule.compress(sched_cfg.compression)?
    } else {
        schedule
    };
    Ok((schedule, sched_cfg))
}

fn driven_for(
    family: ScheduleFamily,
    model: &ClassicalModel,
    point: ThermalPoint,
) -> Result<DrivenHamiltonian, CliError> {
    Ok(match family {
        ScheduleFamily::Sa | ScheduleFamily::Poly => DrivenHamiltonian::sa(model, point)?,
        ScheduleFamily::Eqa => DrivenHamiltonian::eqa(model, point)?,
        ScheduleFamily::Qa => DrivenHamiltonian::qa(model)?,
    })
}

fn run_anneal(
    config: &ExperimentConfig,
    ctx: &mut RunContext,
    emitter: &mut Emitter,
) -> Result<(), CliError> {
    let (schedule, _) = build_schedule(config, &ctx.model, ctx.point)?;
    let driven = driven_for(schedule.family, &ctx.model, ctx.point)?;
    let integ = config.run.integrator.clone().unwrap_or_default();
    let cfg = IntegratorConfig {
        tolerance: integ.tolerance,
        max_step: integ.max_step,
        samples: integ.samples,
        track_fidelity: integ.track_fidelity,
    };
    let trace = propagate(&driven, &schedule, &cfg)?;

    let rows: Vec<Vec<String>> = trace
        .samples
        .iter()
        .map(|s| {
            vec![
                emitter.fmt(s.t),
                emitter.fmt(s.control),
                emitter.fmt(s.gap),
                emitter.fmt(s.fidelity),
                emitter.fmt(s.energy),
                emitter.fmt(s.monitor),
                emitter.fmt(s.norm_drift),
            ]
        })
        .collect();
    emitter.write_csv(
        "trace.csv",
        &["t", "lambda", "gap", "fidelity", "energy", "monitor", "norm_drift"],
        &rows,
    )?;

    let max_monitor = trace
        .samples
        .iter()
        .map(|s| s.monitor)
        .fold(f64::NAN, f64::max);
    ctx.metric("final_fidelity", trace.final_fidelity);
    ctx.metric("total_time", schedule.total_time);
    ctx.metric("rate_constant", schedule.rate_constant());
    ctx.metric("max_monitor", max_monitor);
    ctx.metric("max_norm_drift", trace.max_norm_drift);
    ctx.metric("accepted_steps", trace.accepted_steps as f64);
    ctx.metric("rejected_steps", trace.rejected_steps as f64);
    ctx.checks.push(CheckResult::below(
        "norm_drift_within_budget",
        trace.max_norm_drift,
        10.0 * cfg.tolerance,
    ));
    let ode_err = reintegrate_max_rel_err(&schedule, 20_000)?;
    ctx.checks
        .push(CheckResult::below("schedule_ode_consistency", ode_err, 1e-6));
    Ok(())
}

// -------------------------------------------------------------- schedule

fn run_schedule(
    config: &ExperimentConfig,
    ctx: &mut RunContext,
    emitter: &mut Emitter,
) -> Result<(), CliError> {
    let (schedule, sched_cfg) = build_schedule(config, &ctx.model, ctx.point)?;
    let params = compute_map_params(&ctx.model, ctx.point)?;
    let n = ctx.model.n_sites();

    let points = sched_cfg.points;
    let mut rows = Vec::with_capacity(points + 1);
    for k in 0..=points {
        let t = schedule.total_time * k as f64 / points as f64;
        let lambda = schedule.control(t);
        let rate = schedule.dcontrol_dt(t);
        let bound = match schedule.family {
            ScheduleFamily::Sa => sa_bound_value(n, 1.0 / lambda, params.p),
            ScheduleFamily::Eqa | ScheduleFamily::Qa => {
                let c = sched_cfg.c.unwrap_or(sched_cfg.gamma0);
                if lambda < c {
                    qa_bound_value(n, c, lambda)
                } else {
                    f64::NAN
                }
            }
            ScheduleFamily::Poly => (lambda / n as f64).powf(sched_cfg.q),
        };
        rows.push(vec![
            emitter.fmt(t),
            emitter.fmt(lambda),
            emitter.fmt(rate),
            emitter.fmt(bound),
        ]);
    }
    emitter.write_csv(
        "schedule.csv",
        &["t", "lambda", "dlambda_dt", "gap_bound"],
        &rows,
    )?;

    ctx.metric("total_time", schedule.total_time);
    ctx.metric("rate_constant", schedule.rate_constant());
    ctx.metric("control_start", schedule.control_start);
    ctx.metric("control_final", schedule.control_final);
    if let Some(note) = &schedule.note {
        ctx.notes.push(note.clone());
    }
    let ode_err = reintegrate_max_rel_err(&schedule, 20_000)?;
    ctx.checks
        .push(CheckResult::below("schedule_ode_consistency", ode_err, 1e-6));
    Ok(())
}

// ------------------------------------------------------------------ pimc

fn run_pimc_cmd(
    config: &ExperimentConfig,
    ctx: &mut RunContext,
    emitter: &mut Emitter,
) -> Result<(), CliError> {
    let section = config
        .run
        .pimc
        .clone()
        .ok_or_else(|| CliError::Config("the pimc subcommand needs a [run.pimc] block".into()))?;
    let params = PimcParams {
        slices: section.slices,
        beta_tilde: section.beta_tilde,
        sweeps: section.sweeps,
        burn_in: section.burn_in,
        seed: ctx.seed,
        chains: section.chains,
        measure_every: section.measure_every,
        xi_convention: section.xi_convention.into(),
    };
    let mode = if section.annealed {
        let (schedule, _) = build_schedule(config, &ctx.model, ctx.point)?;
        if !matches!(schedule.family, ScheduleFamily::Eqa | ScheduleFamily::Qa) {
            return Err(CliError::Config(
                "annealed PIMC needs a field-family (eqa/qa) schedule".into(),
            ));
        }
        FieldMode::Annealed {
            schedule,
            anneal_sweeps: section.anneal_sweeps,
        }
    } else {
        FieldMode::Fixed {
            gamma: section.gamma,
        }
    };

    let resume: Option<Checkpoint> = match &section.resume_from {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
                path: path.clone(),
                source: e,
            })?;
            Some(read_checkpoint(&text)?)
        }
        None => None,
    };

    let run = run_pimc(&ctx.model, ctx.point, &params, &mode, resume.as_ref(), None)?;

    // per-measurement series, chain-major
    let mut rows = Vec::new();
    for chain in &run.chains {
        for (i, (nn, en)) in chain
            .nn_series
            .iter()
            .zip(&chain.energy_series)
            .enumerate()
        {
            rows.push(vec![
                chain.chain.to_string(),
                i.to_string(),
                emitter.fmt(*nn),
                emitter.fmt(*en),
            ]);
        }
    }
    emitter.write_csv("series.csv", &["chain", "index", "nn_corr", "energy"], &rows)?;

    if let Some(cp) = &run.checkpoint {
        emitter.write_text("checkpoint.txt", &write_checkpoint(cp))?;
    }

    ctx.metric("nn_corr_mean", run.nn_corr.mean);
    ctx.metric("nn_corr_stderr", run.nn_corr.stderr);
    ctx.metric("energy_mean", run.energy.mean);
    ctx.metric("energy_stderr", run.energy.stderr);
    ctx.metric("acceptance_rate", run.acceptance_rate);
    ctx.metric("lambda_constant", run.lambda);
    ctx.metric("gamma_final", run.gamma_final);
    ctx.metric("xi_final", run.xi_final);
    ctx.metric("samples", run.nn_corr.count as f64);

    // exact references for enumerable models at the Gibbs endpoint; the
    // residual Trotter and finite-btilde bias is expected and reported, not
    // asserted
    if ctx.model.dim().is_ok() {
        let bonds: Vec<(usize, usize)> = ctx
            .model
            .terms()
            .iter()
            .map(|t| (t.sites[0], t.sites[1]))
            .collect();
        let mut exact = 0.0;
        for &(i, j) in &bonds {
            let (_, c) = brute_thermal(
                &ctx.model,
                ctx.point,
                &DiagonalObservable::PairCorrelator(i, j),
            )?;
            exact += c;
        }
        exact /= bonds.len() as f64;
        let (_, e_exact) = brute_thermal(&ctx.model, ctx.point, &DiagonalObservable::Energy)?;
        ctx.metric("nn_corr_exact_thermal", exact);
        ctx.metric("energy_exact_thermal", e_exact);
        ctx.metric(
            "nn_corr_deviation_sigma",
            (run.nn_corr.mean - exact).abs() / run.nn_corr.stderr,
        );
        ctx.notes.push(
            "deviation from the exact thermal value includes the finite-L Trotter bias".into(),
        );
    }
    if !params.low_quantum_temperature() {
        ctx.notes
            .push("beta_tilde < 10: ground-state projection regime not reached".into());
    }
    Ok(())
}

// ------------------------------------------------------------- decompose

fn run_decompose(ctx: &mut RunContext, emitter: &mut Emitter) -> Result<(), CliError> {
    let model = ctx.model.clone();
    if model.spin() != Spin::HALF {
        return Err(CliError::Config(
            "decompose requires a spin-1/2 model (sigma_z product basis)".into(),
        ));
    }
    let map = QuantumMap::new(&model, ctx.point)?;
    let table = DiagonalOperator::new(map.diag.clone())?;
    let poly = ising_decompose(&table, model.n_sites())?;

    let mut rows = Vec::new();
    rows.push(vec!["0".to_string(), String::new(), emitter.fmt(poly.constant)]);
    for (&(i, j), &v) in &poly.pair_terms {
        rows.push(vec!["2".to_string(), format!("{i};{j}"), emitter.fmt(v)]);
    }
    for (sites, &v) in &poly.higher_terms {
        let label = sites
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(";");
        rows.push(vec![sites.len().to_string(), label, emitter.fmt(v)]);
    }
    emitter.write_csv("coefficients.csv", &["arity", "sites", "coeff"], &rows)?;

    ctx.metric("lambda", poly.constant);
    ctx.metric("pair_terms", poly.pair_terms.len() as f64);
    ctx.metric("higher_terms", poly.higher_terms.len() as f64);
    ctx.metric("p", map.params.p);
    ctx.metric("chi", map.params.chi);

    // closed-form cross-check for homogeneous NN rings
    if let Some(j) = homogeneous_ring_coupling(&model) {
        if model.n_sites() >= 4 {
            let rep = ising_closed_form_check(ctx.point.beta, j, model.n_sites())?;
            ctx.checks.push(CheckResult::below(
                "ising_closed_form_deviation",
                rep.max_deviation,
                1e-12,
            ));
            ctx.metric("closed_form_x", rep.x);
            ctx.metric("closed_form_y", rep.y);
        }
    }
    Ok(())
}

fn homogeneous_ring_coupling(model: &ClassicalModel) -> Option<f64> {
    if model.kind() != EnergyKind::Multilinear {
        return None;
    }
    let n = model.n_sites();
    let terms = model.terms();
    if terms.len() != n {
        return None;
    }
    let j = terms[0].coeff;
    let mut bonds: Vec<(usize, usize)> = Vec::new();
    for t in terms {
        if t.sites.len() != 2 || (t.coeff - j).abs() > 0.0 {
            return None;
        }
        bonds.push((t.sites[0], t.sites[1]));
    }
    bonds.sort_unstable();
    let mut expect: Vec<(usize, usize)> = (0..n)
        .map(|k| {
            let (a, b) = (k, (k + 1) % n);
            if a < b {
                (a, b)
            } else {
                (b, a)
            }
        })
        .collect();
    expect.sort_unstable();
    (bonds == expect).then_some(j)
}

/// Convenience used by the monitor-facing tests: evaluate the adiabatic
/// monitor along a schedule at evenly spaced times.
pub fn monitor_along_schedule(
    model: &ClassicalModel,
    point: ThermalPoint,
    schedule: &Schedule,
    samples: usize,
) -> Result<Vec<f64>, CliError> {
    let driven = driven_for(schedule.family, model, point)?;
    let mut out = Vec::with_capacity(samples);
    for k in 1..=samples {
        let t = schedule.total_time * k as f64 / samples as f64;
        out.push(adiabatic_monitor(
            &driven,
            schedule.control(t),
            schedule.dcontrol_dt(t),
        )?);
    }
    Ok(out)
}

/// Effective-couplings summary for PIMC-facing tests.
pub fn couplings_summary(
    model: &ClassicalModel,
    point: ThermalPoint,
) -> Result<(f64, usize), CliError> {
    let c = effective_couplings(model, point)?;
    Ok((c.lambda, c.pairs.len()))
}
