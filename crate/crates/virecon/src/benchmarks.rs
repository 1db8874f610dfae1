//! Built-in benchmark problems.
//!
//! `heat_smooth` never touches its obstacle and has a closed-form solution,
//! so it isolates the linear parabolic behaviour. `manufactured_obstacle`
//! has a known solution clamped to zero outside a strip together with the
//! matching multiplier; the source is derived from those two. The pyramid
//! problem has no exact solution and exists to drive adaptivity: its
//! obstacle has ridge lines the structured mesh cannot represent.

use std::f64::consts::PI;

use virecon_core::{ProblemSpec, Rect};

use crate::HarnessError;

pub const BENCHMARK_NAMES: [&str; 3] = ["heat_smooth", "manufactured_obstacle", "pyramid_adaptive"];

/// Look up a benchmark by name.
pub fn benchmark(name: &str) -> Result<ProblemSpec, HarnessError> {
    match name {
        "heat_smooth" => Ok(heat_smooth()),
        "manufactured_obstacle" => Ok(manufactured_obstacle()),
        "pyramid_adaptive" => Ok(pyramid_adaptive()),
        _ => Err(HarnessError::UnknownBenchmark(name.to_string())),
    }
}

/// `w = e^{-t} sin(pi x) sin(pi y)` on the unit square, obstacle at -10.
pub fn heat_smooth() -> ProblemSpec {
    let w = |x: f64, y: f64, t: f64| (-t).exp() * (PI * x).sin() * (PI * y).sin();
    ProblemSpec {
        name: "heat_smooth".to_string(),
        domain: Rect::UNIT,
        source: Box::new(move |x, y, t| (2.0 * PI * PI - 1.0) * w(x, y, t)),
        source_dt: Some(Box::new(move |x, y, t| -(2.0 * PI * PI - 1.0) * w(x, y, t))),
        obstacle: Box::new(|_, _, _| -10.0),
        initial: Box::new(move |x, y, _| w(x, y, 0.0)),
        final_time: 0.5,
        exact_solution: Some(Box::new(w)),
        exact_multiplier: Some(Box::new(|_, _, _| 0.0)),
    }
}

/// Profile factor of the manufactured solution: zero outside (1/4, 3/4),
/// `((x - 1/4)(3/4 - x))^2` inside. C^1 across the contact lines.
pub fn manufactured_profile(x: f64) -> f64 {
    let a = (x - 0.25).max(0.0);
    let b = (0.75 - x).max(0.0);
    let u = a * b;
    u * u
}

/// Second derivative of the profile on the open strip, zero outside.
pub fn manufactured_profile_dd(x: f64) -> f64 {
    if x <= 0.25 || x >= 0.75 {
        return 0.0;
    }
    let u = (x - 0.25) * (0.75 - x);
    let du = 1.0 - 2.0 * x;
    2.0 * du * du - 4.0 * u
}

/// Obstacle problem with exact solution `e^{-t} phi(x) sin(pi y)` against
/// the zero obstacle; the multiplier lives on the clamped bands.
pub fn manufactured_obstacle() -> ProblemSpec {
    let w = |x: f64, y: f64, t: f64| (-t).exp() * manufactured_profile(x) * (PI * y).sin();
    let sigma = |x: f64, y: f64, t: f64| {
        if x > 0.25 && x < 0.75 {
            0.0
        } else {
            (-t).exp() * (PI * y).sin()
        }
    };
    // f = w_t - Lap w - sigma; every ingredient carries e^{-t}, so the
    // analytic time derivative is just -f.
    let f = move |x: f64, y: f64, t: f64| {
        let s = (PI * y).sin() * (-t).exp();
        let phi = manufactured_profile(x);
        let lap = (manufactured_profile_dd(x) - PI * PI * phi) * s;
        -phi * s - lap - sigma(x, y, t)
    };
    ProblemSpec {
        name: "manufactured_obstacle".to_string(),
        domain: Rect::UNIT,
        source: Box::new(f),
        source_dt: Some(Box::new(move |x, y, t| -f(x, y, t))),
        obstacle: Box::new(|_, _, _| 0.0),
        initial: Box::new(move |x, y, _| w(x, y, 0.0)),
        final_time: 0.5,
        exact_solution: Some(Box::new(w)),
        exact_multiplier: Some(Box::new(sigma)),
    }
}

/// Distance-to-boundary pyramid obstacle on (-1, 1)^2, no source, no exact
/// solution. The ridges of the obstacle cut across the mesh diagonals.
pub fn pyramid_adaptive() -> ProblemSpec {
    let chi = |x: f64, y: f64, _: f64| (1.0 - x.abs()).min(1.0 - y.abs()) - 0.25;
    ProblemSpec {
        name: "pyramid_adaptive".to_string(),
        domain: Rect::new(-1.0, -1.0, 1.0, 1.0),
        source: Box::new(|_, _, _| 0.0),
        source_dt: Some(Box::new(|_, _, _| 0.0)),
        obstacle: Box::new(chi),
        initial: Box::new(move |x, y, _| chi(x, y, 0.0).max(0.0)),
        final_time: 0.5,
        exact_solution: None,
        exact_multiplier: None,
    }
}
