//! Acceptance criteria 1–11, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so that every line is printed. The
//! process exits non-zero when any criterion fails.

mod common;

use std::f64::consts::FRAC_PI_2;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{rngs::StdRng, Rng, SeedableRng};

use si_age::continuation::{trace_diagram, BifurcationKind, Branch};
use si_age::equilibria::{disease_free, eval_fgh, eval_phi, find_endemic, EqKind, EquilibriumPoint};
use si_age::quadrature::QuadGrid;
use si_age::simulate::{perturbed_initial, run, Outcome, PERTURBATION};
use si_age::spectrum::{
    rightmost_at, spectrum_at, tau_thresholds, transversality_at_zero, KernelSet, Verdict,
};
use si_age::{presets, Model, ModelSpec};

// Tolerances and budgets, in criterion order.
const NORM_TOL: f64 = 1e-8;
const NORM_BUDGET: u64 = 5;
const W0_EXPECTED: f64 = 5.04512;
const W0_TOL: f64 = 5e-4;
const H0_EXPECTED: f64 = 0.12;
const H0_TOL: f64 = 1e-6;
const SCALAR_BUDGET: u64 = 10;
const TAU2: f64 = -5.0;
const TAU_TOL: f64 = 1e-8;
const TAU_BUDGET: u64 = 10;
const IMAG_ROOT_TOL: f64 = 1e-4;
const SPECTRUM_ZETA_LO: f64 = -10.0;
const SPECTRUM_BUDGET: u64 = 60;
const CONST_TOL: f64 = 1e-3;
const ZETA_PRIME_EXPECTED: f64 = 1.42878;
const ZETA_PRIME_TOL: f64 = 1e-2;
const TRANSVERSALITY_BUDGET: u64 = 60;
const TWO_STATES_BUDGET: u64 = 10;
const ALPHA1_EXPECTED: f64 = 20.1143;
const ALPHA2_EXPECTED: f64 = 22.8495;
const ALPHA_TOL: f64 = 0.05;
const DIAGRAM_BUDGET: u64 = 600;
const HOPF_EXPECTED: f64 = 0.6743;
const HOPF_TOL: f64 = 0.01;
const CONSISTENCY_BUDGET: u64 = 900;
const DECAY_REL_TOL: f64 = 0.25;
const PERIOD_REL_TOL: f64 = 0.15;
const SIM_CELLS: f64 = 512.0;
const SIM_T_END: f64 = 150.0;
const ORACLE_TOL: f64 = 1e-6;
const ORACLE_CELLS: usize = 4002;
const ORACLE_POINTS: usize = 10;
const ORACLE_SEED: u64 = 20240611;
const LAPLACE_TOL: f64 = 1e-10;
const ORACLE_BUDGET: u64 = 60;

type Verdict_ = (bool, String);

fn model(spec: ModelSpec) -> Model {
    Model::new(spec).expect("preset validates")
}

fn endemic(m: &Model, alpha: f64) -> Vec<EquilibriumPoint> {
    find_endemic(m, alpha).expect("endemic search")
}

fn close(x: f64, want: f64, tol: f64) -> bool {
    (x - want).abs() <= tol
}

fn c1_normalisation() -> Verdict_ {
    let names = ["choices", "plus(34)", "choices-stab", "choices-stab2", "choices2", "choices3"];
    let mut worst = 0.0f64;
    for name in names {
        let m = model(presets::by_name(name).unwrap());
        worst = worst.max((m.int_beta_pi() - 1.0).abs());
        for alpha in [0.0, 1.0, 10.0, 24.0] {
            worst = worst.max((eval_fgh(&m, alpha, 0.0).unwrap().f - 1.0).abs());
        }
        for w in [0.0, 1.0, 5.0, 50.0] {
            worst = worst.max((eval_fgh(&m, 0.0, w).unwrap().f - 1.0).abs());
        }
    }
    (worst < NORM_TOL, format!("max deviation {:.3e}", worst))
}

fn c2_scalars() -> Verdict_ {
    let m = model(presets::choices_stab());
    let eqs = endemic(&m, 0.0);
    if eqs.len() != 1 {
        return (false, format!("{} endemic states at alpha = 0", eqs.len()));
    }
    let w0 = eqs[0].w_star;
    let h = eval_fgh(&m, 0.0, w0).unwrap().h;
    (
        close(w0, W0_EXPECTED, W0_TOL) && close(h, H0_EXPECTED, H0_TOL),
        format!("W*0 = {:.7}, H(0, W*0) = {:.9}", w0, h),
    )
}

fn c3_tau() -> Verdict_ {
    match tau_thresholds(6) {
        Ok(t) => {
            let tau2 = t.iter().find(|x| x.k == 2).map(|x| x.tau_numeric).unwrap_or(f64::NAN);
            let worst = t.iter().map(|x| (x.tau_numeric - x.tau_closed).abs()).fold(0.0, f64::max);
            (
                close(tau2, TAU2, TAU_TOL) && worst < TAU_TOL && t.len() == 5,
                format!("tau_2 = {:.12}, max |numeric - closed| over k = 2..6: {:.2e}", tau2, worst),
            )
        }
        Err(e) => (false, e.to_string()),
    }
}

fn c4_imaginary_pair() -> Verdict_ {
    let m = model(presets::choices_stab());
    let eq = &endemic(&m, 0.0)[0];
    let res = match spectrum_at(&m, eq) {
        Ok(r) => r,
        Err(e) => return (false, e.to_string()),
    };
    let is_pair = |l: Complex64| (l - Complex64::new(0.0, 5.0)).norm() < IMAG_ROOT_TOL || (l - Complex64::new(0.0, -5.0)).norm() < IMAG_ROOT_TOL;
    let pair = res.roots.iter().filter(|r| is_pair(r.lambda)).count();
    let others_ok = res
        .roots
        .iter()
        .filter(|r| !is_pair(r.lambda))
        .all(|r| r.lambda.re >= SPECTRUM_ZETA_LO && r.lambda.re < 0.0);
    let next = res
        .roots
        .iter()
        .filter(|r| !is_pair(r.lambda))
        .map(|r| r.lambda.re)
        .fold(f64::NEG_INFINITY, f64::max);
    (
        pair == 2 && others_ok && !res.partial,
        format!("{} roots, +-5i found: {}, next real part {:.4}", res.roots.len(), pair, next),
    )
}

fn c5_transversality() -> Verdict_ {
    let r = match transversality_at_zero(&model(presets::choices_stab())) {
        Ok(r) => r,
        Err(e) => return (false, e.to_string()),
    };
    let checks = [
        ("A", r.a, 0.83432),
        ("B", r.b, 0.236031),
        ("C", r.c, 2.52632),
        ("D", r.d, -0.397545),
        ("E", r.e, -0.147547),
        ("F", r.f, -0.177344),
        ("G", r.g, -0.0744986),
        ("H", r.h, -0.249824),
        ("dF1/dalpha", r.df1_dalpha, -1.98062),
        ("dF2/dalpha", r.df2_dalpha, -0.877897),
        ("dF1/dzeta", r.df1_dzeta, 0.5669),
        ("dF2/dzeta", r.df2_dzeta, -0.440352),
    ];
    let bad: Vec<String> = checks
        .iter()
        .filter(|(_, got, want)| !close(*got, *want, CONST_TOL))
        .map(|(n, got, want)| format!("{} = {:.6} (expected {})", n, got, want))
        .collect();
    let zeta_ok = close(r.zeta_prime0, ZETA_PRIME_EXPECTED, ZETA_PRIME_TOL);
    let mut detail = if bad.is_empty() { "A..H and partials match".to_string() } else { format!("mismatch: {}", bad.join(", ")) };
    detail.push_str(&format!(
        "; zeta'(0) = {:.5} (expected {}), tracked root gives {:.5}",
        r.zeta_prime0, ZETA_PRIME_EXPECTED, r.zeta_prime0_tracked
    ));
    (bad.is_empty() && zeta_ok, detail)
}

fn c6_two_states() -> Verdict_ {
    let m = model(presets::choices());
    let eqs = endemic(&m, 10.0);
    let r0e = disease_free(&m, 10.0).unwrap().r0e;
    (
        eqs.len() == 2 && r0e > 1.0,
        format!(
            "{} endemic states (W* = {}), R0e = {:.6}",
            eqs.len(),
            eqs.iter().map(|e| format!("{:.5}", e.w_star)).collect::<Vec<_>>().join(", "),
            r0e
        ),
    )
}

fn verdict(m: &Model, eq: &EquilibriumPoint) -> Verdict {
    Verdict::of(rightmost_at(m, eq).unwrap(), m.spec().numerics.stability_tol)
}

fn c7_plus34() -> Verdict_ {
    let m = model(presets::plus(34.0));
    let diagram = match trace_diagram(&m, 0.0, 26.0, 0.1) {
        Ok(d) => d,
        Err(e) => return (false, e.to_string()),
    };
    let events: Vec<_> = diagram.iter().flat_map(|b| b.bifurcations.iter().copied()).collect();
    let alpha1 = events.iter().find(|e| e.kind == BifurcationKind::Transcritical).map(|e| e.alpha);
    let alpha2 = events.iter().find(|e| e.kind == BifurcationKind::Fold).map(|e| e.alpha);
    let dfe24 = verdict(&m, &disease_free(&m, 24.0).unwrap());
    let dfe10 = verdict(&m, &disease_free(&m, 10.0).unwrap());
    let at21 = endemic(&m, 21.0);
    let labels_ok = dfe24 == Verdict::Stable
        && dfe10 == Verdict::Unstable
        && at21.len() == 2
        && verdict(&m, &at21[0]) == Verdict::Unstable
        && verdict(&m, &at21[1]) == Verdict::Stable;
    let ok = alpha1.is_some_and(|a| close(a, ALPHA1_EXPECTED, ALPHA_TOL))
        && alpha2.is_some_and(|a| close(a, ALPHA2_EXPECTED, ALPHA_TOL))
        && labels_ok;
    (
        ok,
        format!(
            "transcritical {:?}, fold {:?}, DFE(24) {}, DFE(10) {}, alpha = 21 lower/upper {}/{}",
            alpha1,
            alpha2,
            dfe24.label(),
            dfe10.label(),
            at21.first().map(|e| verdict(&m, e).label()).unwrap_or("-"),
            at21.get(1).map(|e| verdict(&m, e).label()).unwrap_or("-"),
        ),
    )
}

fn hopf_points(d: &[Branch]) -> Vec<(f64, f64)> {
    d.iter()
        .filter(|b| b.kind() == Some(EqKind::Endemic))
        .flat_map(|b| b.bifurcations.iter())
        .filter(|e| e.kind == BifurcationKind::Hopf)
        .map(|e| (e.alpha, e.omega))
        .collect()
}

fn c8_hopf() -> Verdict_ {
    let m = model(presets::choices2());
    match trace_diagram(&m, 0.0, 2.0, 0.05) {
        Ok(d) => {
            let h = hopf_points(&d);
            (
                h.iter().any(|(a, _)| close(*a, HOPF_EXPECTED, HOPF_TOL)),
                format!("Hopf points (alpha, omega): {:?}", h),
            )
        }
        Err(e) => (false, e.to_string()),
    }
}

fn c9_closed() -> Verdict_ {
    let m = model(presets::choices3());
    let d = match trace_diagram(&m, 0.0, 40.0, 0.1) {
        Ok(d) => d,
        Err(e) => return (false, e.to_string()),
    };
    let endemic: Vec<&Branch> = d.iter().filter(|b| b.kind() == Some(EqKind::Endemic)).collect();
    let closed = endemic.iter().any(|b| b.closed);
    let folds: usize = endemic
        .iter()
        .map(|b| b.bifurcations.iter().filter(|e| e.kind == BifurcationKind::Fold).count())
        .sum();
    // stability changes along increasing alpha on the endemic curve
    let mut changes = Vec::new();
    for b in &endemic {
        let mut pts: Vec<_> = b.points.iter().collect();
        pts.sort_by(|x, y| x.alpha.total_cmp(&y.alpha));
        for w in pts.windows(2) {
            if w[0].stable != w[1].stable {
                changes.push((w[1].alpha, w[1].stable));
            }
        }
    }
    changes.sort_by(|x, y| x.0.total_cmp(&y.0));
    let destab = changes.iter().position(|c| !c.1);
    let restab = destab.and_then(|i| changes[i..].iter().find(|c| c.1));
    let ordering = destab.is_some() && restab.is_some();
    (
        closed && folds == 2 && ordering,
        format!(
            "{} endemic branch(es), closed: {}, folds: {}, stability changes (alpha, stable after): {:?}, Hopf: {:?}",
            endemic.len(),
            closed,
            folds,
            changes.iter().map(|(a, s)| (format!("{:.3}", a), *s)).collect::<Vec<_>>(),
            hopf_points(&d)
        ),
    )
}

fn c10_consistency() -> Verdict_ {
    struct Probe {
        preset: ModelSpec,
        alpha: f64,
        endemic_index: Option<usize>,
    }
    let probes = [
        Probe { preset: presets::choices2(), alpha: 0.9, endemic_index: Some(0) },
        Probe { preset: presets::choices2(), alpha: 0.3, endemic_index: Some(0) },
        Probe { preset: presets::plus(34.0), alpha: 21.0, endemic_index: Some(0) },
        Probe { preset: presets::plus(34.0), alpha: 21.0, endemic_index: Some(1) },
        Probe { preset: presets::plus(34.0), alpha: 24.0, endemic_index: None },
        Probe { preset: presets::plus(34.0), alpha: 10.0, endemic_index: None },
    ];
    let mut detail = Vec::new();
    let mut ok = true;
    for p in &probes {
        let m = model(p.preset.with_alpha(p.alpha));
        let eq = match p.endemic_index {
            Some(i) => endemic(&m, p.alpha).swap_remove(i),
            None => disease_free(&m, p.alpha).unwrap(),
        };
        let v = verdict(&m, &eq);
        let (s0, i0) = perturbed_initial(&eq, PERTURBATION);
        let r = run(&m, &s0, &i0, m.a_dagger() / SIM_CELLS, SIM_T_END, Some((&eq).into())).unwrap();
        let approached = r.approached_probe() == Some(true);
        let agrees = (v == Verdict::Stable) == approached && v != Verdict::Marginal;
        ok &= agrees;
        detail.push(format!("alpha={} {}: {} / {}", p.alpha, eq.kind.label(), v.label(), r.outcome.label()));
    }

    // decay rate at a stable endemic point
    let m = model(presets::choices2());
    let eq = &endemic(&m, 0.9)[0];
    let zeta = rightmost_at(&m, eq).unwrap().map(|r| r.lambda.re).unwrap_or(f64::NAN);
    let (s0, i0) = perturbed_initial(eq, PERTURBATION);
    let r = run(&m, &s0, &i0, m.a_dagger() / SIM_CELLS, SIM_T_END, Some(eq.into())).unwrap();
    let rate = r.decay_rate(1e-6, 1e-2).unwrap_or(f64::NAN);
    let decay_ok = ((rate - zeta) / zeta).abs() < DECAY_REL_TOL;
    ok &= decay_ok;
    detail.push(format!("decay {:.4} vs zeta {:.4}", rate, zeta));

    // period past the Hopf point
    let omega = trace_diagram(&m, 0.0, 1.0, 0.05)
        .ok()
        .and_then(|d| hopf_points(&d).first().map(|h| h.1))
        .unwrap_or(f64::NAN);
    let target = 2.0 * std::f64::consts::PI / omega;
    let m4 = model(presets::choices2().with_alpha(0.4));
    let eq = &endemic(&m4, 0.4)[0];
    let (s0, i0) = perturbed_initial(eq, PERTURBATION);
    let r = run(&m4, &s0, &i0, m4.a_dagger() / SIM_CELLS, SIM_T_END, Some(eq.into())).unwrap();
    let period_ok = r.outcome == Outcome::Oscillating
        && r.period.is_some_and(|p| ((p - target) / target).abs() < PERIOD_REL_TOL);
    ok &= period_ok;
    detail.push(format!(
        "alpha=0.4: {} period {:?} vs 2pi/omega {:.4}",
        r.outcome.label(),
        r.period,
        target
    ));
    (ok, detail.join("; "))
}

fn c11_oracle() -> Verdict_ {
    let specs = [presets::choices(), presets::plus(34.0), presets::choices_stab(), presets::choices2(), presets::choices3()];
    let mut rng = StdRng::seed_from_u64(ORACLE_SEED);
    let mut worst = 0.0f64;
    for _ in 0..ORACLE_POINTS {
        let spec = &specs[rng.gen_range(0..specs.len())];
        let alpha = rng.gen_range(0.0..25.0);
        let w = rng.gen_range(0.0..30.0);
        let got = eval_phi(&model(spec.clone()), alpha, w).unwrap();
        worst = worst.max((got - common::phi_oracle(spec, alpha, w, ORACLE_CELLS)).abs());
    }
    // 0.7 sin 2a cos a = 0.35 (sin 3a + sin a)
    let g = QuadGrid::new(FRAC_PI_2, 64, 8, &[]);
    let v = g.tabulate(|a| 0.7 * (2.0 * a).sin() * a.cos());
    let z = vec![0.0; g.len()];
    let k = KernelSet::from_nodes(g, [v, z.clone(), z.clone(), z]);
    let mut worst_laplace = 0.0f64;
    for (re, im) in [(0.0, 0.0), (1.0, 0.0), (0.0, 5.0), (1.0, 5.0), (-2.0, 33.0), (-8.0, 12.0)] {
        let l = Complex64::new(re, im);
        let want = 0.35 * (common::sin_transform(l, 3.0) + common::sin_transform(l, 1.0));
        worst_laplace = worst_laplace.max((k.transforms(l).value[0] - want).norm());
    }
    (
        worst < ORACLE_TOL && worst_laplace < LAPLACE_TOL,
        format!("phi max error {:.2e}, Laplace max error {:.2e}", worst, worst_laplace),
    )
}

fn main() {
    let criteria: [(&str, u64, fn() -> Verdict_); 11] = [
        ("normalisation identities", NORM_BUDGET, c1_normalisation),
        ("W*0 and H(0, W*0)", SCALAR_BUDGET, c2_scalars),
        ("tau thresholds", TAU_BUDGET, c3_tau),
        ("imaginary pair at tau = -5", SPECTRUM_BUDGET, c4_imaginary_pair),
        ("transversality constants", TRANSVERSALITY_BUDGET, c5_transversality),
        ("two endemic equilibria", TWO_STATES_BUDGET, c6_two_states),
        ("branch diagram X = 34", DIAGRAM_BUDGET, c7_plus34),
        ("Hopf point of choices2", DIAGRAM_BUDGET, c8_hopf),
        ("closed diagram of choices3", DIAGRAM_BUDGET, c9_closed),
        ("spectrum and simulation agree", CONSISTENCY_BUDGET, c10_consistency),
        ("oracle equivalence", ORACLE_BUDGET, c11_oracle),
    ];
    let mut failed = 0;
    for (n, (name, budget, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (ok, detail) = f();
        let took = t.elapsed();
        let in_time = took <= Duration::from_secs(*budget);
        let pass = ok && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} ({}): {} [{:.1} s of {} s]",
            if pass { "PASS" } else { "FAIL" },
            n + 1,
            name,
            detail,
            took.as_secs_f64(),
            budget
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
