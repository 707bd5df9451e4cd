//! Built-in parameter sets, selectable by name.
//!
//! All presets share `a† = π/2` and `μ(a) = tan a`, so that `π(a) = cos a`.

use crate::error::{Error, Result};
use crate::model::{ModelSpec, NumericOptions};
use crate::ratefn::{parse_rate, DensityDependence, RateFn};

pub const A_DAGGER: f64 = std::f64::consts::FRAC_PI_2;

/// Contact kernel equal to 1 on `[0, π/6] ∪ [π/3, π/2]` and 0 in between.
pub const STEP_K: &str = "piecewise{[0, pi/6): 1; [pi/6, pi/3): 0; [pi/3, pi/2]: 1}";

/// Names accepted by [`by_name`]. `plus(X)` takes the ceiling `X` as argument.
pub const NAMES: [&str; 6] = ["choices", "plus(X)", "choices-stab", "choices-stab2", "choices2", "choices3"];

fn rate(src: &str) -> RateFn {
    parse_rate(src).expect("built-in rate parses")
}

/// Two endemic equilibria at `α = 10`.
pub fn choices() -> ModelSpec {
    ModelSpec {
        a_dagger: A_DAGGER,
        r0d: 27.0,
        alpha: 10.0,
        beta: rate("1"),
        mu: rate("tan(a)"),
        r: rate("1"),
        q: rate("1"),
        k: rate(STEP_K),
        phi: DensityDependence::linear_capped(18.0),
        numerics: NumericOptions::default(),
    }
}

/// `choices` with `R0d = 3X/2` and ceiling `X`.
pub fn plus(x: f64) -> ModelSpec {
    ModelSpec {
        r0d: 1.5 * x,
        phi: DensityDependence::linear_capped(x),
        ..choices()
    }
}

/// Sine-shaped fertility and weight, `K(a) = a`, tuned so that at `α = 0` the
/// endemic equilibrium has a pair of characteristic roots at `±5i`.
pub fn choices_stab() -> ModelSpec {
    ModelSpec {
        a_dagger: A_DAGGER,
        r0d: 6.0,
        alpha: 0.0,
        beta: rate("3/2*sin(2*a)"),
        mu: rate("tan(a)"),
        r: rate("3/2*sin(2*a)"),
        q: rate("3/2*sin(2*a)"),
        k: rate("a"),
        phi: DensityDependence::linear_capped(10.0),
        numerics: NumericOptions::default(),
    }
}

/// Step kernel with sine-shaped rates; the endemic branch has a Hopf point.
pub fn choices2() -> ModelSpec {
    ModelSpec {
        a_dagger: A_DAGGER,
        r0d: 27.0,
        alpha: 0.9,
        beta: rate("3/2*sin(2*a)"),
        mu: rate("tan(a)"),
        r: rate("3/2*sin(2*a)"),
        q: rate("sin(2*a)"),
        k: rate(STEP_K),
        phi: DensityDependence::linear_capped(18.0),
        numerics: NumericOptions::default(),
    }
}

/// `choices2` variant whose endemic equilibria form a closed curve in `α`.
pub fn choices3() -> ModelSpec {
    ModelSpec {
        r0d: 1.35,
        alpha: 12.0,
        q: rate("10*a"),
        r: rate("3/5*sin(2*a)"),
        phi: DensityDependence::linear_capped(15.0),
        ..choices2()
    }
}

/// Looks a preset up by name, e.g. `choices`, `plus(34)`.
pub fn by_name(name: &str) -> Result<ModelSpec> {
    let n = name.trim();
    match n {
        "choices" => return Ok(choices()),
        "choices-stab" | "choices-stab2" => return Ok(choices_stab()),
        "choices2" => return Ok(choices2()),
        "choices3" => return Ok(choices3()),
        _ => {}
    }
    if let Some(arg) = n.strip_prefix("plus(").and_then(|s| s.strip_suffix(')')) {
        let x: f64 = arg.trim().parse().map_err(|_| Error::Config {
            path: "preset".into(),
            message: format!("`{}`: ceiling must be a number", n),
        })?;
        if !(x > 2.0 / 3.0) || !x.is_finite() {
            return Err(Error::Config {
                path: "preset".into(),
                message: format!("`{}`: need X > 2/3 so that R0d = 3X/2 > 1", n),
            });
        }
        return Ok(plus(x));
    }
    Err(Error::Config {
        path: "preset".into(),
        message: format!("unknown preset `{}` (known: {})", n, NAMES.join(", ")),
    })
}
