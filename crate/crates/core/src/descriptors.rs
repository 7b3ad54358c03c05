//! Closed-form data catalog.
//!
//! Initial, boundary and potential data are never user code: they are picked
//! from a fixed set of named shapes with parameters, so a configuration file
//! fully determines every sample and every sup norm.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Scalar profile of one variable (space for initial data, time for boundary data).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    Linear {
        slope: f64,
        intercept: f64,
    },
    /// `amplitude * cos(wavenumber * s + phase)`
    Cosine {
        amplitude: f64,
        wavenumber: f64,
        phase: f64,
    },
    Gaussian {
        amplitude: f64,
        center: f64,
        width: f64,
    },
}

impl Profile {
    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::Constant { value } => value,
            Profile::Linear { slope, intercept } => slope * s + intercept,
            Profile::Cosine {
                amplitude,
                wavenumber,
                phase,
            } => amplitude * (wavenumber * s + phase).cos(),
            Profile::Gaussian {
                amplitude,
                center,
                width,
            } => {
                let z = (s - center) / width;
                amplitude * (-0.5 * z * z).exp()
            }
        }
    }

    /// Exact `sup |p(s)|` over `[a, b]`, from the closed form.
    pub fn sup_abs(&self, a: f64, b: f64) -> f64 {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        match *self {
            Profile::Zero => 0.0,
            Profile::Constant { value } => value.abs(),
            Profile::Linear { .. } => self.eval(a).abs().max(self.eval(b).abs()),
            Profile::Cosine {
                amplitude,
                wavenumber,
                phase,
            } => {
                if wavenumber == 0.0 {
                    return (amplitude * phase.cos()).abs();
                }
                // |cos| peaks where wavenumber * s + phase = m * pi.
                let u0 = wavenumber * a + phase;
                let u1 = wavenumber * b + phase;
                let (lo, hi) = if u0 <= u1 { (u0, u1) } else { (u1, u0) };
                if (lo / PI).ceil() <= (hi / PI).floor() {
                    amplitude.abs()
                } else {
                    self.eval(a).abs().max(self.eval(b).abs())
                }
            }
            Profile::Gaussian {
                amplitude,
                center,
                width,
            } => {
                let d = if center < a {
                    a - center
                } else if center > b {
                    center - b
                } else {
                    0.0
                };
                let z = d / width;
                amplitude.abs() * (-0.5 * z * z).exp()
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        match *self {
            Profile::Zero => true,
            Profile::Constant { value } => value.is_finite(),
            Profile::Linear { slope, intercept } => slope.is_finite() && intercept.is_finite(),
            Profile::Cosine {
                amplitude,
                wavenumber,
                phase,
            } => amplitude.is_finite() && wavenumber.is_finite() && phase.is_finite(),
            Profile::Gaussian {
                amplitude,
                center,
                width,
            } => amplitude.is_finite() && center.is_finite() && width.is_finite() && width > 0.0,
        }
    }
}

/// Compactly supported phase-space profile for the initial distribution.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhaseProfile {
    #[default]
    Zero,
    /// Product of `cos^4(pi r / 2)` windows in x and in |v - v_center|; C^3 with
    /// support `[x_center - x_halfwidth, x_center + x_halfwidth] x {|v - v_center| <= v_radius}`.
    CosineBump {
        amplitude: f64,
        x_center: f64,
        x_halfwidth: f64,
        v_center: [f64; 2],
        v_radius: f64,
    },
    /// Separable gaussian hard-truncated to the same kind of support box.
    Gaussian {
        amplitude: f64,
        x_center: f64,
        x_sigma: f64,
        x_halfwidth: f64,
        v_center: [f64; 2],
        v_sigma: f64,
        v_radius: f64,
    },
}

/// Support of a phase profile: x interval and a velocity disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSupport {
    pub x_lo: f64,
    pub x_hi: f64,
    pub v_center: [f64; 2],
    pub v_radius: f64,
}

#[inline]
fn cos4_window(r: f64) -> f64 {
    if r >= 1.0 {
        0.0
    } else {
        let c = (0.5 * PI * r).cos();
        let c2 = c * c;
        c2 * c2
    }
}

impl PhaseProfile {
    #[inline]
    pub fn eval(&self, x: f64, v1: f64, v2: f64) -> f64 {
        match *self {
            PhaseProfile::Zero => 0.0,
            PhaseProfile::CosineBump {
                amplitude,
                x_center,
                x_halfwidth,
                v_center,
                v_radius,
            } => {
                let rx = (x - x_center).abs() / x_halfwidth;
                if rx >= 1.0 {
                    return 0.0;
                }
                let dv1 = v1 - v_center[0];
                let dv2 = v2 - v_center[1];
                let rv = (dv1 * dv1 + dv2 * dv2).sqrt() / v_radius;
                if rv >= 1.0 {
                    return 0.0;
                }
                amplitude * cos4_window(rx) * cos4_window(rv)
            }
            PhaseProfile::Gaussian {
                amplitude,
                x_center,
                x_sigma,
                x_halfwidth,
                v_center,
                v_sigma,
                v_radius,
            } => {
                let dx = x - x_center;
                if dx.abs() > x_halfwidth {
                    return 0.0;
                }
                let dv1 = v1 - v_center[0];
                let dv2 = v2 - v_center[1];
                let dv_sq = dv1 * dv1 + dv2 * dv2;
                if dv_sq > v_radius * v_radius {
                    return 0.0;
                }
                amplitude
                    * (-0.5 * dx * dx / (x_sigma * x_sigma) - 0.5 * dv_sq / (v_sigma * v_sigma))
                        .exp()
            }
        }
    }

    pub fn x_factor(&self, x: f64) -> f64 {
        match *self {
            PhaseProfile::Zero => 0.0,
            PhaseProfile::CosineBump {
                x_center,
                x_halfwidth,
                ..
            } => cos4_window((x - x_center).abs() / x_halfwidth),
            PhaseProfile::Gaussian {
                x_center,
                x_sigma,
                x_halfwidth,
                ..
            } => {
                let dx = x - x_center;
                if dx.abs() > x_halfwidth {
                    0.0
                } else {
                    (-0.5 * dx * dx / (x_sigma * x_sigma)).exp()
                }
            }
        }
    }

    pub fn v_factor(&self, r: f64) -> f64 {
        match *self {
            PhaseProfile::Zero => 0.0,
            PhaseProfile::CosineBump { v_radius, .. } => cos4_window(r / v_radius),
            PhaseProfile::Gaussian {
                v_sigma, v_radius, ..
            } => {
                if r > v_radius {
                    0.0
                } else {
                    (-0.5 * r * r / (v_sigma * v_sigma)).exp()
                }
            }
        }
    }

    pub fn support(&self) -> Option<PhaseSupport> {
        match *self {
            PhaseProfile::Zero => None,
            PhaseProfile::CosineBump {
                amplitude,
                x_center,
                x_halfwidth,
                v_center,
                v_radius,
            } => (amplitude != 0.0).then_some(PhaseSupport {
                x_lo: x_center - x_halfwidth,
                x_hi: x_center + x_halfwidth,
                v_center,
                v_radius,
            }),
            PhaseProfile::Gaussian {
                amplitude,
                x_center,
                x_halfwidth,
                v_center,
                v_radius,
                ..
            } => (amplitude != 0.0).then_some(PhaseSupport {
                x_lo: x_center - x_halfwidth,
                x_hi: x_center + x_halfwidth,
                v_center,
                v_radius,
            }),
        }
    }

    /// `sup f0`, attained at the center of the support.
    pub fn sup(&self) -> f64 {
        match *self {
            PhaseProfile::Zero => 0.0,
            PhaseProfile::CosineBump { amplitude, .. }
            | PhaseProfile::Gaussian { amplitude, .. } => amplitude,
        }
    }

    pub fn check_parameters(&self) -> std::result::Result<(), String> {
        let bad = |what: &str| Err(format!("f0 parameter {what} must be finite and positive"));
        match *self {
            PhaseProfile::Zero => Ok(()),
            PhaseProfile::CosineBump {
                amplitude,
                x_halfwidth,
                v_radius,
                ..
            } => {
                if !(amplitude >= 0.0) || !amplitude.is_finite() {
                    return Err("f0 amplitude must be finite and nonnegative (f0 >= 0)".into());
                }
                if !(x_halfwidth > 0.0) {
                    return bad("x_halfwidth");
                }
                if !(v_radius > 0.0) {
                    return bad("v_radius");
                }
                Ok(())
            }
            PhaseProfile::Gaussian {
                amplitude,
                x_sigma,
                x_halfwidth,
                v_sigma,
                v_radius,
                ..
            } => {
                if !(amplitude >= 0.0) || !amplitude.is_finite() {
                    return Err("f0 amplitude must be finite and nonnegative (f0 >= 0)".into());
                }
                for (name, v) in [
                    ("x_sigma", x_sigma),
                    ("x_halfwidth", x_halfwidth),
                    ("v_sigma", v_sigma),
                    ("v_radius", v_radius),
                ] {
                    if !(v > 0.0) || !v.is_finite() {
                        return bad(name);
                    }
                }
                Ok(())
            }
        }
    }
}
