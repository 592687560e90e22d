//! Real-time Schrodinger propagation along an annealing schedule.
//!
//! The integrator is an adaptive midpoint-exponential: each step applies
//! exp(-i H(t + h/2) h) exactly through a dense eigendecomposition, which is
//! unitary to machine precision and phase-exact for arbitrarily large
//! steps. The local error then comes only from the time variation of H
//! within the step; the controller estimates it from the leading Magnus
//! terms h^3 (||[H, dH/dt] psi|| / 12 + ||d2H/dt2 psi|| / 24) using finite
//! differences of the control path, and grows steps aggressively wherever
//! the schedule is slow. That is what makes the glacial certified schedules
//! (total times of 1e7 and beyond) integrable at all.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{dense_spectrum, extremal_pair, DENSE_CAP};

use super::driven::{DrivenHamiltonian, HamiltonianParts};
use super::monitor::monitor_with_spectrum;
use super::schedule::Schedule;

/// Integrator knobs.
#[derive(Debug, Clone)]
pub struct IntegratorConfig {
    /// Local error tolerance per step.
    pub tolerance: f64,
    /// Hard step cap; 0 means total_time / 1000.
    pub max_step: f64,
    /// Number of trace samples along the run.
    pub samples: usize,
    /// Fidelity/gap/monitor tracking; None = on when the dense solver fits.
    pub track_fidelity: Option<bool>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            tolerance: 1e-8,
            max_step: 0.0,
            samples: 500,
            track_fidelity: None,
        }
    }
}

/// One trace record. Untracked quantities are NaN.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TraceSample {
    pub t: f64,
    pub control: f64,
    pub gap: f64,
    pub fidelity: f64,
    pub energy: f64,
    pub monitor: f64,
    pub norm_drift: f64,
}

/// Full propagation record.
#[derive(Debug, Clone, Serialize)]
pub struct AnnealTrace {
    pub samples: Vec<TraceSample>,
    pub final_fidelity: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub max_norm_drift: f64,
}

/// Integrate i d|phi>/dt = H(lambda(t)) |phi> from the ground state at
/// lambda(0) to the end of the schedule.
pub fn propagate(
    driven: &DrivenHamiltonian,
    schedule: &Schedule,
    cfg: &IntegratorConfig,
) -> Result<AnnealTrace> {
    let dim = driven.dim();
    let track = cfg.track_fidelity.unwrap_or(dim <= DENSE_CAP);
    if track && dim > DENSE_CAP {
        return Err(Error::Capacity {
            dim: dim as u128,
            cap: DENSE_CAP,
        });
    }
    if !(cfg.tolerance > 0.0) {
        return Err(Error::domain("integrator tolerance must be positive"));
    }
    let samples = cfg.samples.max(1);
    let total = schedule.total_time;

    // initial state: exact ground state at the starting control
    let lambda0 = schedule.control(0.0);
    let mut psi: Vec<Complex64> = if track {
        let sol = dense_spectrum(&driven.build_sparse(lambda0))?;
        sol.states[0].amplitudes().to_vec()
    } else {
        let pair = extremal_pair(&driven.build_sparse(lambda0), 1e-10)?;
        pair.v0.iter().map(|&x| Complex64::new(x, 0.0)).collect()
    };
    normalize(&mut psi);

    // event grid: sample times plus schedule breakpoints
    let mut events: Vec<f64> = (0..=samples)
        .map(|k| total * k as f64 / samples as f64)
        .collect();
    events.extend(schedule.breakpoints());
    events.sort_by(f64::total_cmp);
    events.dedup_by(|a, b| (*a - *b).abs() <= total * 1e-15);

    let max_step = if cfg.max_step > 0.0 {
        cfg.max_step
    } else {
        (total / 1000.0).max(f64::MIN_POSITIVE)
    };

    let mut trace = AnnealTrace {
        samples: Vec::with_capacity(events.len()),
        final_fidelity: f64::NAN,
        accepted_steps: 0,
        rejected_steps: 0,
        max_norm_drift: 0.0,
    };

    if total == 0.0 {
        let s = record_sample(driven, schedule, 0.0, &psi, track)?;
        trace.final_fidelity = s.fidelity;
        trace.max_norm_drift = s.norm_drift.abs();
        trace.samples.push(s);
        return Ok(trace);
    }

    let mut scratch = Scratch::new(dim);
    let mut h = max_step / 16.0;
    let mut prev_event = 0.0f64;

    for &event in &events {
        if event <= prev_event && event != 0.0 {
            continue;
        }
        if event == 0.0 {
            let s = record_sample(driven, schedule, 0.0, &psi, track)?;
            trace.max_norm_drift = trace.max_norm_drift.max(s.norm_drift.abs());
            trace.samples.push(s);
            continue;
        }
        let mut t = prev_event;
        while t < event {
            let step = h.min(max_step).min(event - t);
            let (accepted, est) =
                attempt_step(driven, schedule, t, step, cfg.tolerance, &mut psi, &mut scratch)?;
            if accepted {
                t += step;
                trace.accepted_steps += 1;
                let grow = if est > 0.0 {
                    (0.9 * (cfg.tolerance / est).powf(1.0 / 3.0)).clamp(0.3, 4.0)
                } else {
                    4.0
                };
                h = (step * grow).min(max_step);
            } else {
                trace.rejected_steps += 1;
                let shrink = (0.9 * (cfg.tolerance / est).powf(1.0 / 3.0)).clamp(0.1, 0.9);
                h = step * shrink;
                if h < total * 1e-14 {
                    return Err(Error::numerical(format!(
                        "step size underflow at t = {t}: h = {h}, estimate = {est}"
                    )));
                }
            }
        }
        let s = record_sample(driven, schedule, event, &psi, track)?;
        trace.max_norm_drift = trace.max_norm_drift.max(s.norm_drift.abs());
        trace.samples.push(s);
        prev_event = event;
    }

    trace.final_fidelity = trace.samples.last().map(|s| s.fidelity).unwrap_or(f64::NAN);
    Ok(trace)
}

struct Scratch {
    candidate: Vec<Complex64>,
    work1: Vec<Complex64>,
    work2: Vec<Complex64>,
    work3: Vec<Complex64>,
    coeffs_re: Vec<f64>,
    coeffs_im: Vec<f64>,
}

impl Scratch {
    fn new(dim: usize) -> Self {
        Scratch {
            candidate: vec![Complex64::new(0.0, 0.0); dim],
            work1: vec![Complex64::new(0.0, 0.0); dim],
            work2: vec![Complex64::new(0.0, 0.0); dim],
            work3: vec![Complex64::new(0.0, 0.0); dim],
            coeffs_re: vec![0.0; dim],
            coeffs_im: vec![0.0; dim],
        }
    }
}

/// One trial step of the midpoint exponential. Returns (accepted, estimate);
/// on acceptance `psi` is advanced by exp(-i H(t + h/2) h).
fn attempt_step(
    driven: &DrivenHamiltonian,
    schedule: &Schedule,
    t: f64,
    h: f64,
    tolerance: f64,
    psi: &mut [Complex64],
    scratch: &mut Scratch,
) -> Result<(bool, f64)> {
    let p0 = driven.parts_at(schedule.control(t));
    let pm = driven.parts_at(schedule.control(t + 0.5 * h));
    let p1 = driven.parts_at(schedule.control(t + h));

    // local error estimate from the leading Magnus terms
    let dim = psi.len();
    let hdot = parts_diff(&p1, &p0, 1.0 / h);
    let hddot = parts_second_diff(&p0, &pm, &p1, 4.0 / (h * h));

    driven.apply_parts(&hdot, psi, &mut scratch.work1); // Hdot psi
    driven.apply_parts(&pm, &scratch.work1, &mut scratch.work2); // Hm Hdot psi
    driven.apply_parts(&pm, psi, &mut scratch.work1); // Hm psi
    driven.apply_parts(&hdot, &scratch.work1, &mut scratch.work3); // Hdot Hm psi
    let mut comm_sq = 0.0;
    for i in 0..dim {
        comm_sq += (scratch.work2[i] - scratch.work3[i]).norm_sqr();
    }
    driven.apply_parts(&hddot, psi, &mut scratch.work1);
    let ddot_norm: f64 = scratch.work1.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let est = h.powi(3) * (comm_sq.sqrt() / 12.0 + ddot_norm / 24.0);
    if est > tolerance {
        return Ok((false, est));
    }

    // exact unitary step through the eigendecomposition of H(midpoint)
    let eig = nalgebra::SymmetricEigen::new(driven.build_dense(&pm));
    let q = &eig.eigenvectors;
    for k in 0..dim {
        let mut re = 0.0;
        let mut im = 0.0;
        for (j, a) in psi.iter().enumerate() {
            let x = q[(j, k)];
            re += x * a.re;
            im += x * a.im;
        }
        let phase = -eig.eigenvalues[k] * h;
        let (s, c) = phase.sin_cos();
        scratch.coeffs_re[k] = re * c - im * s;
        scratch.coeffs_im[k] = re * s + im * c;
    }
    for (j, o) in scratch.candidate.iter_mut().enumerate() {
        let mut re = 0.0;
        let mut im = 0.0;
        for k in 0..dim {
            let x = q[(j, k)];
            re += x * scratch.coeffs_re[k];
            im += x * scratch.coeffs_im[k];
        }
        *o = Complex64::new(re, im);
    }
    psi.copy_from_slice(&scratch.candidate);
    Ok((true, est))
}

fn parts_diff(a: &HamiltonianParts, b: &HamiltonianParts, scale: f64) -> HamiltonianParts {
    HamiltonianParts {
        diag: a
            .diag
            .iter()
            .zip(&b.diag)
            .map(|(x, y)| (x - y) * scale)
            .collect(),
        coeff: (a.coeff - b.coeff) * scale,
    }
}

fn parts_second_diff(
    a: &HamiltonianParts,
    m: &HamiltonianParts,
    b: &HamiltonianParts,
    scale: f64,
) -> HamiltonianParts {
    HamiltonianParts {
        diag: a
            .diag
            .iter()
            .zip(&m.diag)
            .zip(&b.diag)
            .map(|((x, y), z)| (x - 2.0 * y + z) * scale)
            .collect(),
        coeff: (a.coeff - 2.0 * m.coeff + b.coeff) * scale,
    }
}

fn normalize(psi: &mut [Complex64]) {
    let n = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in psi {
        *a /= n;
    }
}

fn record_sample(
    driven: &DrivenHamiltonian,
    schedule: &Schedule,
    t: f64,
    psi: &[Complex64],
    track: bool,
) -> Result<TraceSample> {
    let control = schedule.control(t);
    let parts = driven.parts_at(control);
    let mut hpsi = vec![Complex64::new(0.0, 0.0); psi.len()];
    driven.apply_parts(&parts, psi, &mut hpsi);
    let norm_sqr: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
    let energy: f64 = psi
        .iter()
        .zip(&hpsi)
        .map(|(a, b)| (a.conj() * b).re)
        .sum::<f64>()
        / norm_sqr;
    let norm_drift = norm_sqr.sqrt() - 1.0;

    let (gap, fidelity, monitor) = if track {
        let sol = dense_spectrum(&driven.build_sparse(control))?;
        let v0 = &sol.states[0];
        let ov = v0
            .amplitudes()
            .iter()
            .zip(psi)
            .map(|(a, b)| a.re * b.conj())
            .sum::<Complex64>();
        let fid = (ov.norm_sqr() / norm_sqr).min(1.0);
        let mon = monitor_with_spectrum(driven, control, schedule.dcontrol_dt(t), &sol)?;
        (sol.gap(), fid, mon)
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };

    Ok(TraceSample {
        t,
        control,
        gap,
        fidelity,
        energy,
        monitor,
        norm_drift,
    })
}
