use si_age::equilibria::find_endemic;
use si_age::simulate::{perturbed_initial, run, Outcome, SimReport, PERTURBATION};
use si_age::{presets, Model};

/// `W` at time `t` by linear interpolation between steps.
fn w_at(r: &SimReport, t: f64) -> f64 {
    let k = r.trace.iter().position(|p| p.t >= t).unwrap();
    let (a, b) = (r.trace[k - 1], r.trace[k]);
    a.w + (b.w - a.w) * (t - a.t) / (b.t - a.t)
}

#[test]
fn first_order_in_the_step() {
    // a sustained oscillation keeps the frozen-force error visible
    let m = Model::new(presets::choices3()).unwrap();
    let eq = &find_endemic(&m, 12.0).unwrap()[0];
    let (s0, i0) = perturbed_initial(eq, PERTURBATION);
    let ad = m.a_dagger();
    let w: Vec<f64> = [128usize, 256, 1024, 2048]
        .iter()
        .map(|&c| w_at(&run(&m, &s0, &i0, ad / c as f64, 10.5, None).unwrap(), 10.0))
        .collect();
    let reference = 2.0 * w[3] - w[2];
    let ratio = (w[0] - reference) / (w[1] - reference);
    assert!((1.7..=2.3).contains(&ratio), "error ratio {ratio}");
}

#[test]
fn unstable_lower_state_is_left() {
    let m = Model::new(presets::plus(34.0).with_alpha(21.0)).unwrap();
    let eqs = find_endemic(&m, 21.0).unwrap();
    assert_eq!(eqs.len(), 2);
    let (s0, i0) = perturbed_initial(&eqs[0], PERTURBATION);
    let r = run(&m, &s0, &i0, m.a_dagger() / 256.0, 60.0, Some((&eqs[0]).into())).unwrap();
    assert_eq!(r.approached_probe(), Some(false));
    // it settles on the stable upper state instead
    assert!((r.final_w - eqs[1].w_star).abs() < 0.01 * eqs[1].w_star, "{} vs {}", r.final_w, eqs[1].w_star);
    assert_eq!(r.outcome, Outcome::Converged);
}
