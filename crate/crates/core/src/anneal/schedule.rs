//! Certified annealing schedules from the adiabatic condition.
//!
//! Each schedule is the closed-form solution of the separable ODE obtained
//! by saturating the adiabatic condition with the worst-case matrix-element
//! bound and the certified gap lower bound:
//!
//! * SA:  dT/dt = -(2 eps T^2 / (p N)) * gap_sa(T)
//!   giving T(t) = pN / ln(alpha t + 1), alpha = 4 eps sqrt(2 pi N) e^{-N};
//! * EQA: dgamma/dt = -(eps / N) * gap_qa(gamma)^2
//!   giving gamma^{-(2N-1)} = (2N-1) abar t + gamma_0^{-(2N-1)},
//!   abar = 8 pi eps e^{-2N} (1+c)^{-2N};
//! * POLY: same numerator with an assumed polynomial gap (beta N)^{-q},
//!   giving T(t) ~ alpha / t^{1/(q+1)}.
//!
//! Temperatures are clamped to a finite start cap (the closed form diverges
//! at t = 0); the clamp time is exposed as a breakpoint so integrators never
//! step across the kink.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::qmap::{qa_bound_value, sa_bound_value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ScheduleFamily {
    Sa,
    Eqa,
    Qa,
    Poly,
}

/// A monotone control path lambda(t) with its provenance constants.
#[derive(Debug, Clone)]
pub struct Schedule {
    pub family: ScheduleFamily,
    pub epsilon: f64,
    pub total_time: f64,
    pub control_start: f64,
    pub control_final: f64,
    pub note: Option<String>,
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Sa {
        alpha: f64,
        pn: f64,
        cap: f64,
        t_clamp: f64,
        p: f64,
        n: usize,
    },
    Gamma {
        alpha_bar: f64,
        /// Power-law exponent m: gamma^{-m} grows linearly in t (m = 2N-1,
        /// or N-1 for the refined variant; m = 0 degenerates to an
        /// exponential decay).
        exponent: f64,
        gamma0: f64,
        c: f64,
        n: usize,
        refined: bool,
    },
    Poly {
        /// (q+1) * C so that T^{-(q+1)} = rate * t + cap^{-(q+1)}.
        rate: f64,
        q: f64,
        cap: f64,
        n: usize,
        p: f64,
        alpha_asymptotic: f64,
    },
    /// p = 0 free model: nothing to anneal.
    Instant,
    Compressed {
        inner: Box<Schedule>,
        factor: f64,
    },
}

impl Schedule {
    /// Control value at time t in [0, total_time].
    pub fn control(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::Sa {
                alpha, pn, cap, ..
            } => {
                if t <= 0.0 {
                    return *cap;
                }
                let formula = pn / (alpha * t + 1.0).ln();
                formula.min(*cap)
            }
            Kind::Gamma {
                alpha_bar,
                exponent,
                gamma0,
                ..
            } => {
                if *exponent == 0.0 {
                    gamma0 * (-alpha_bar * t).exp()
                } else {
                    (exponent * alpha_bar * t + gamma0.powf(-exponent)).powf(-1.0 / exponent)
                }
            }
            Kind::Poly { rate, q, cap, .. } => {
                (rate * t + cap.powf(-(q + 1.0))).powf(-1.0 / (q + 1.0))
            }
            Kind::Instant => self.control_final,
            Kind::Compressed { inner, factor } => inner.control(factor * t),
        }
    }

    /// Time derivative of the control at time t.
    pub fn dcontrol_dt(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::Sa {
                alpha,
                pn,
                t_clamp,
                ..
            } => {
                if t <= *t_clamp {
                    0.0
                } else {
                    let u = alpha * t + 1.0;
                    let l = u.ln();
                    -pn * alpha / (u * l * l)
                }
            }
            Kind::Gamma {
                alpha_bar,
                exponent,
                ..
            } => {
                let g = self.control(t);
                -alpha_bar * g.powf(exponent + 1.0)
            }
            Kind::Poly { rate, q, .. } => {
                let temp = self.control(t);
                -(rate / (q + 1.0)) * temp.powf(q + 2.0)
            }
            Kind::Instant => 0.0,
            Kind::Compressed { inner, factor } => factor * inner.dcontrol_dt(factor * t),
        }
    }

    /// Times in (0, total_time) where the control path has a kink.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            Kind::Sa { t_clamp, .. } => {
                if *t_clamp > 0.0 && *t_clamp < self.total_time {
                    vec![*t_clamp]
                } else {
                    vec![]
                }
            }
            Kind::Compressed { inner, factor } => inner
                .breakpoints()
                .into_iter()
                .map(|t| t / factor)
                .filter(|&t| t > 0.0 && t < self.total_time)
                .collect(),
            _ => vec![],
        }
    }

    /// Right-hand side of the defining adiabatic ODE, written from the
    /// physics (numerator bound times gap bound), for cross-checking the
    /// closed form by independent re-integration.
    pub fn ode_rhs(&self, control: f64) -> f64 {
        match &self.kind {
            Kind::Sa { p, n, pn, .. } => {
                -2.0 * self.epsilon * control * control * sa_bound_value(*n, 1.0 / control, *p)
                    / pn
            }
            Kind::Gamma {
                c, n, refined, ..
            } => {
                let nf = *n as f64;
                let gap = qa_bound_value(*n, *c, control);
                if *refined {
                    // improved matrix-element bound: first power of the gap
                    -(self.epsilon / nf) * gap
                } else {
                    -(self.epsilon / nf) * gap * gap
                }
            }
            Kind::Poly { q, n, p, .. } => {
                let nf = *n as f64;
                -(2.0 * self.epsilon / (p * nf)) * control * control * (control / nf).powf(*q)
            }
            Kind::Instant => 0.0,
            Kind::Compressed { inner, factor } => factor * inner.ode_rhs(control),
        }
    }

    /// Same control path traversed `factor` times faster. Used for the
    /// fidelity-degradation studies.
    pub fn compress(&self, factor: f64) -> Result<Schedule> {
        if !(factor >= 1.0 && factor.is_finite()) {
            return Err(Error::domain(format!(
                "compression factor must be >= 1, got {factor}"
            )));
        }
        Ok(Schedule {
            family: self.family,
            epsilon: self.epsilon,
            total_time: self.total_time / factor,
            control_start: self.control_start,
            control_final: self.control_final,
            note: self.note.clone(),
            kind: Kind::Compressed {
                inner: Box::new(self.clone()),
                factor,
            },
        })
    }

    /// Schedule constant: alpha for SA/POLY (asymptotic), alpha-bar for the
    /// field families.
    pub fn rate_constant(&self) -> f64 {
        match &self.kind {
            Kind::Sa { alpha, .. } => *alpha,
            Kind::Gamma { alpha_bar, .. } => *alpha_bar,
            Kind::Poly {
                alpha_asymptotic, ..
            } => *alpha_asymptotic,
            Kind::Instant => 0.0,
            Kind::Compressed { inner, .. } => inner.rate_constant(),
        }
    }
}

fn check_positive(value: f64, name: &str) -> Result<()> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(Error::domain(format!(
            "{name} must be positive and finite, got {value}"
        )));
    }
    Ok(())
}

/// Default temperature cap for the clamped start, 20 p N (beta ~ 0).
pub fn default_t_max_cap(p: f64, n_sites: usize) -> f64 {
    20.0 * p.max(1e-12) * n_sites as f64
}

/// SA schedule T(t) = pN / ln(alpha t + 1), alpha = 4 eps sqrt(2 pi N) e^{-N}.
pub fn make_sa_schedule(
    p: f64,
    n_sites: usize,
    epsilon: f64,
    t_final: f64,
    t_max_cap: Option<f64>,
) -> Result<Schedule> {
    check_positive(epsilon, "epsilon")?;
    check_positive(t_final, "t_final")?;
    if n_sites == 0 {
        return Err(Error::domain("schedule needs at least one site"));
    }
    if p < 0.0 || !p.is_finite() {
        return Err(Error::domain(format!("p must be non-negative, got {p}")));
    }
    if p == 0.0 {
        // free model: the Gibbs state is control-independent
        return Ok(Schedule {
            family: ScheduleFamily::Sa,
            epsilon,
            total_time: 0.0,
            control_start: t_final,
            control_final: t_final,
            note: Some("p = 0: free model, schedule is instantaneous".into()),
            kind: Kind::Instant,
        });
    }
    let cap = t_max_cap.unwrap_or_else(|| default_t_max_cap(p, n_sites));
    check_positive(cap, "t_max_cap")?;
    if t_final >= cap {
        return Err(Error::domain(format!(
            "t_final {t_final} must lie below the start cap {cap}"
        )));
    }
    let n = n_sites as f64;
    let pn = p * n;
    let alpha = 4.0 * epsilon * (2.0 * std::f64::consts::PI * n).sqrt() * (-n).exp();
    let grand = (pn / t_final).exp();
    if !grand.is_finite() {
        return Err(Error::numerical(format!(
            "total time overflows: exp({})",
            pn / t_final
        )));
    }
    let total_time = (grand - 1.0) / alpha;
    let t_clamp = ((pn / cap).exp() - 1.0) / alpha;
    Ok(Schedule {
        family: ScheduleFamily::Sa,
        epsilon,
        total_time,
        control_start: cap,
        control_final: t_final,
        note: None,
        kind: Kind::Sa {
            alpha,
            pn,
            cap,
            t_clamp,
            p,
            n: n_sites,
        },
    })
}

/// EQA/QA field schedule gamma^{-(2N-1)} = (2N-1) abar t + gamma_0^{-(2N-1)}.
///
/// `refined` substitutes N for 2N in the power law, assuming the improved
/// matrix-element bound; it is labeled non-worst-case.
pub fn make_eqa_schedule(
    n_sites: usize,
    c: f64,
    epsilon: f64,
    gamma0: f64,
    gamma_final: f64,
    refined: bool,
) -> Result<Schedule> {
    check_positive(epsilon, "epsilon")?;
    check_positive(c, "c")?;
    check_positive(gamma0, "gamma0")?;
    if !(gamma_final > 0.0 && gamma_final < gamma0) {
        return Err(Error::domain(format!(
            "need 0 < gamma_final < gamma0, got gamma_final={gamma_final}, gamma0={gamma0}"
        )));
    }
    if gamma0 > c {
        return Err(Error::domain(format!(
            "gamma0 {gamma0} must not exceed c = {c} (bound validity)"
        )));
    }
    let n = n_sites as f64;
    let (alpha_bar, exponent) = if refined {
        // first-power integration of the improved bound
        let k = 2.0 * (2.0 * std::f64::consts::PI * n).sqrt() * (-n).exp() * (1.0 + c).powf(-n);
        ((epsilon / n) * k, n - 1.0)
    } else {
        (
            8.0 * std::f64::consts::PI * epsilon * (-2.0 * n).exp() * (1.0 + c).powf(-2.0 * n),
            2.0 * n - 1.0,
        )
    };
    let total_time = if exponent == 0.0 {
        (gamma0 / gamma_final).ln() / alpha_bar
    } else {
        (gamma_final.powf(-exponent) - gamma0.powf(-exponent)) / (exponent * alpha_bar)
    };
    if !total_time.is_finite() {
        return Err(Error::numerical("EQA total time overflows"));
    }
    Ok(Schedule {
        family: ScheduleFamily::Eqa,
        epsilon,
        total_time,
        control_start: gamma0,
        control_final: gamma_final,
        note: refined.then(|| "refined variant: non-worst-case N-for-2N power law".into()),
        kind: Kind::Gamma {
            alpha_bar,
            exponent,
            gamma0,
            c,
            n: n_sites,
            refined,
        },
    })
}

/// Same field path driving the plain-QA Hamiltonian family.
pub fn make_qa_schedule(
    n_sites: usize,
    c: f64,
    epsilon: f64,
    gamma0: f64,
    gamma_final: f64,
) -> Result<Schedule> {
    let mut s = make_eqa_schedule(n_sites, c, epsilon, gamma0, gamma_final, false)?;
    s.family = ScheduleFamily::Qa;
    Ok(s)
}

/// Polynomial-gap schedule T(t) ~ alpha / t^{1/(q+1)} from an assumed gap
/// lower bound (beta N)^{-q}.
///
/// Uses the SA numerator bound with p = 1 (the paper treats p as O(1));
/// the start is capped at 20 N like the SA family.
pub fn make_poly_schedule(q: f64, n_sites: usize, epsilon: f64, t_final: f64) -> Result<Schedule> {
    if q < 0.0 || !q.is_finite() {
        return Err(Error::domain(format!("q must be >= 0, got {q}")));
    }
    check_positive(epsilon, "epsilon")?;
    check_positive(t_final, "t_final")?;
    if n_sites == 0 {
        return Err(Error::domain("schedule needs at least one site"));
    }
    let n = n_sites as f64;
    let p = 1.0;
    let cap = 20.0 * p * n;
    if t_final >= cap {
        return Err(Error::domain(format!(
            "t_final {t_final} must lie below the start cap {cap}"
        )));
    }
    let big_c = (2.0 * epsilon / (p * n)) * n.powf(-q);
    let rate = (q + 1.0) * big_c;
    let total_time = (t_final.powf(-(q + 1.0)) - cap.powf(-(q + 1.0))) / rate;
    Ok(Schedule {
        family: ScheduleFamily::Poly,
        epsilon,
        total_time,
        control_start: cap,
        control_final: t_final,
        note: None,
        kind: Kind::Poly {
            rate,
            q,
            cap,
            n: n_sites,
            p,
            alpha_asymptotic: rate.powf(-1.0 / (q + 1.0)),
        },
    })
}

/// Re-integrate the schedule ODE with classical RK4 and return the largest
/// relative deviation from the closed form, sampled at every step.
pub fn reintegrate_max_rel_err(schedule: &Schedule, steps: usize) -> Result<f64> {
    if schedule.total_time == 0.0 {
        return Ok(0.0);
    }
    let t0 = match &schedule.kind {
        Kind::Sa { t_clamp, .. } => *t_clamp,
        _ => 0.0,
    };
    if t0 >= schedule.total_time {
        return Ok(0.0);
    }
    let h = (schedule.total_time - t0) / steps as f64;
    let mut t = t0;
    let mut x = schedule.control(t0);
    let mut worst = 0.0f64;
    for _ in 0..steps {
        let k1 = schedule.ode_rhs(x);
        let k2 = schedule.ode_rhs(x + 0.5 * h * k1);
        let k3 = schedule.ode_rhs(x + 0.5 * h * k2);
        let k4 = schedule.ode_rhs(x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
        let exact = schedule.control(t);
        worst = worst.max((x - exact).abs() / exact.abs().max(1e-300));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sa_schedule_constants_and_values() {
        let s = make_sa_schedule(2.0, 4, 0.01, 2.0, None).unwrap();
        let alpha = s.rate_constant();
        assert!((alpha - 3.672_840e-3).abs() < 1e-8, "alpha = {alpha}");
        let t_at = s.control(1e4);
        assert!((t_at - 8.0 / (alpha * 1e4 + 1.0).ln()).abs() < 1e-12);
        assert!((t_at - 2.2036).abs() < 1e-3);
        // total time solves T(total) = t_final
        assert!((s.control(s.total_time) - 2.0).abs() < 1e-9);
        assert!((s.total_time - ((8.0f64 / 2.0).exp() - 1.0) / alpha).abs() < 1e-6);
        assert_eq!(s.control_start, 160.0);
    }

    #[test]
    fn sa_schedule_asymptotic_form() {
        // T(t) k_B ln t / (p N) -> 1 once ln t >> N
        let s = make_sa_schedule(1.0, 3, 0.05, 0.05, None).unwrap();
        let t = 1e250;
        let ratio = s.control(t) * t.ln() / 3.0;
        assert!((ratio - 1.0).abs() < 0.01, "ratio {ratio}");
    }

    #[test]
    fn sa_schedule_monotone_and_clamped() {
        let s = make_sa_schedule(2.0, 4, 0.01, 2.0, Some(50.0)).unwrap();
        assert_eq!(s.control(0.0), 50.0);
        let bp = s.breakpoints();
        assert_eq!(bp.len(), 1);
        assert!(s.dcontrol_dt(bp[0] * 0.5) == 0.0);
        let mut last = f64::INFINITY;
        for k in 1..200 {
            let v = s.control(s.total_time * k as f64 / 200.0);
            assert!(v <= last + 1e-12);
            last = v;
        }
        assert!(s.dcontrol_dt(s.total_time) < 0.0);
    }

    #[test]
    fn sa_schedule_free_model_is_instant() {
        let s = make_sa_schedule(0.0, 4, 0.01, 2.0, None).unwrap();
        assert_eq!(s.total_time, 0.0);
        assert!(s.note.is_some());
    }

    #[test]
    fn eqa_schedule_constant_and_power_law() {
        let s = make_eqa_schedule(1, 1.0, 0.01, 1.0, 0.05, false).unwrap();
        let abar = s.rate_constant();
        let expect = 8.0 * std::f64::consts::PI * 0.01 * (-2.0f64).exp() * 0.25;
        assert!((abar - expect).abs() < 1e-15);
        assert!((abar - 8.503_9e-3).abs() < 1e-6);

        // power-law check: gamma(t) [(2N-1) abar t]^{1/(2N-1)} -> 1 for
        // large t (gamma_0 term negligible)
        let n = 3;
        let s = make_eqa_schedule(n, 0.8, 0.01, 0.8, 1e-6, false).unwrap();
        let m = 2.0 * n as f64 - 1.0;
        let t = s.total_time * 0.9;
        let ratio = s.control(t) * (m * s.rate_constant() * t).powf(1.0 / m);
        assert!((ratio - 1.0).abs() < 1e-3, "ratio {ratio}");
    }

    #[test]
    fn eqa_schedule_monotone_decreasing() {
        let s = make_eqa_schedule(4, 0.5, 0.01, 0.5, 0.37, false).unwrap();
        let mut last = f64::INFINITY;
        for k in 0..=100 {
            let v = s.control(s.total_time * k as f64 / 100.0);
            assert!(v < last || k == 0);
            last = v;
        }
        assert!((s.control(s.total_time) - 0.37).abs() < 1e-10);
        assert!((s.control(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn eqa_schedule_rejects_bad_ranges() {
        assert!(make_eqa_schedule(2, 1.0, 0.01, 0.5, 0.6, false).is_err());
        assert!(make_eqa_schedule(2, 0.4, 0.01, 0.5, 0.1, false).is_err());
    }

    #[test]
    fn eqa_refined_variant() {
        // N = 2: exponent drops from 3 to 1
        let s = make_eqa_schedule(2, 0.5, 0.01, 0.5, 0.1, true).unwrap();
        assert!(s.note.is_some());
        assert!((s.control(s.total_time) - 0.1).abs() < 1e-12);
        // N = 1 refined: exponent 0 degenerates to exponential decay
        let s1 = make_eqa_schedule(1, 0.5, 0.01, 0.5, 0.1, true).unwrap();
        let g_half = s1.control(s1.total_time / 2.0);
        assert!((g_half - (0.5f64 * 0.1).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn poly_schedule_exponent() {
        for q in [0.0, 1.0, 3.0] {
            let s = make_poly_schedule(q, 4, 0.01, 0.02).unwrap();
            // T(2t)/T(t) -> 2^{-1/(q+1)} at large t
            let t = s.total_time * 0.45;
            let ratio = s.control(2.0 * t) / s.control(t);
            let expect = 2.0f64.powf(-1.0 / (q + 1.0));
            assert!(
                (ratio - expect).abs() < 1e-3,
                "q={q}: ratio {ratio} vs {expect}"
            );
            let mut last = f64::INFINITY;
            for k in 0..=50 {
                let v = s.control(s.total_time * k as f64 / 50.0);
                assert!(v <= last);
                last = v;
            }
        }
        assert!(make_poly_schedule(-0.5, 4, 0.01, 0.5).is_err());
    }

    #[test]
    fn reintegration_matches_closed_forms() {
        let sa = make_sa_schedule(2.0, 4, 0.01, 2.0, None).unwrap();
        assert!(reintegrate_max_rel_err(&sa, 20_000).unwrap() < 1e-6);

        let eqa = make_eqa_schedule(4, 0.5, 0.01, 0.5, 0.37, false).unwrap();
        assert!(reintegrate_max_rel_err(&eqa, 20_000).unwrap() < 1e-6);

        let poly = make_poly_schedule(1.5, 4, 0.01, 1.0).unwrap();
        assert!(reintegrate_max_rel_err(&poly, 20_000).unwrap() < 1e-6);

        let refined = make_eqa_schedule(3, 0.5, 0.01, 0.5, 0.2, true).unwrap();
        assert!(reintegrate_max_rel_err(&refined, 20_000).unwrap() < 1e-6);
    }

    #[test]
    fn compression_scales_time_and_derivative() {
        let s = make_sa_schedule(2.0, 4, 0.01, 2.0, None).unwrap();
        let c = s.compress(100.0).unwrap();
        assert!((c.total_time - s.total_time / 100.0).abs() < 1e-9);
        let t = c.total_time * 0.7;
        assert!((c.control(t) - s.control(100.0 * t)).abs() < 1e-12);
        assert!((c.dcontrol_dt(t) - 100.0 * s.dcontrol_dt(100.0 * t)).abs() < 1e-12);
    }
}
