//! Ground-truth governing equations of the synthetic benchmarks.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::expr::special::gamma;

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Grammar text for a real constant; negatives become `(-c)`.
fn lit(v: f64) -> String {
    if v < 0.0 {
        format!("(-{})", -v)
    } else {
        format!("{v}")
    }
}

/// Chi-squared probability density with `k` degrees of freedom.
pub fn chi2pdf(x: f64, k: f64) -> Result<f64, BenchError> {
    if !(x > 0.0) {
        return Err(BenchError::Range(format!("chi2pdf needs x > 0, got {x}")));
    }
    if !(k >= 1.0 && k.fract() == 0.0) {
        return Err(BenchError::Range(format!("chi2pdf needs integer k >= 1, got {k}")));
    }
    let half = k / 2.0;
    Ok(x.powf(half - 1.0) * (-x / 2.0).exp() / (2f64.powf(half) * gamma(half)))
}

pub const CHI2PDF_EXPR: &str = "x^(k / 2 - 1) * exp(-x / 2) / (2^(k / 2) * gamma(k / 2))";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NdoConstants {
    pub forcing: f64,
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub gamma: f64,
}

impl Default for NdoConstants {
    fn default() -> Self {
        NdoConstants {
            forcing: 0.3,
            omega: 1.0,
            alpha: 0.5,
            beta: 1.0,
            delta: 5.0,
            gamma: 0.5,
        }
    }
}

impl NdoConstants {
    /// Acceleration of the forced nonlinear damped oscillator.
    pub fn accel(&self, t: f64, x: f64, v: f64) -> f64 {
        self.forcing * (self.omega * t).sin()
            - self.alpha * v.powf(3.0)
            - self.beta * x * v
            - self.delta * x * (self.gamma * x).exp()
    }

    pub fn expression(&self) -> String {
        format!(
            "{} * sin({} * t) - {} * v^3 - {} * x * v - {} * x * exp({} * x)",
            lit(self.forcing),
            lit(self.omega),
            lit(self.alpha),
            lit(self.beta),
            lit(self.delta),
            lit(self.gamma)
        )
    }

    pub fn as_map(&self) -> BTreeMap<String, f64> {
        [
            ("F", self.forcing),
            ("omega", self.omega),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("delta", self.delta),
            ("gamma", self.gamma),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

/// Weights of the two-hidden-unit sigmoid network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NnnWeights {
    pub w11: f64,
    pub w12: f64,
    pub b1: f64,
    pub w21: f64,
    pub w22: f64,
    pub b2: f64,
    pub out1: f64,
    pub out2: f64,
    pub out_bias: f64,
}

impl NnnWeights {
    pub const RANGE: f64 = 2.0;

    /// Draws every weight uniformly from `[-2, 2]`.
    pub fn from_seed(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = || rng.random_range(-Self::RANGE..=Self::RANGE);
        NnnWeights {
            w11: w(),
            w12: w(),
            b1: w(),
            w21: w(),
            w22: w(),
            b2: w(),
            out1: w(),
            out2: w(),
            out_bias: w(),
        }
    }

    pub fn forward(&self, x1: f64, x2: f64) -> f64 {
        let z1 = sigmoid(self.w11 * x1 + self.w12 * x2 + self.b1);
        let z2 = sigmoid(self.w21 * x1 + self.w22 * x2 + self.b2);
        self.out1 * z1 + self.out2 * z2 + self.out_bias
    }

    pub fn expression(&self) -> String {
        format!(
            "{} * sigmoid({} * x1 + {} * x2 + {}) + {} * sigmoid({} * x1 + {} * x2 + {}) + {}",
            lit(self.out1),
            lit(self.w11),
            lit(self.w12),
            lit(self.b1),
            lit(self.out2),
            lit(self.w21),
            lit(self.w22),
            lit(self.b2),
            lit(self.out_bias)
        )
    }

    pub fn as_map(&self) -> BTreeMap<String, f64> {
        [
            ("w11", self.w11),
            ("w12", self.w12),
            ("b1", self.b1),
            ("w21", self.w21),
            ("w22", self.w22),
            ("b2", self.b2),
            ("w1_out", self.out1),
            ("w2_out", self.out2),
            ("b_out", self.out_bias),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FhstConstants {
    pub gas_constant: f64,
    pub temperature: f64,
}

impl Default for FhstConstants {
    fn default() -> Self {
        FhstConstants {
            gas_constant: 8.314,
            temperature: 300.0,
        }
    }
}

impl FhstConstants {
    /// Flory-Huggins free energy of mixing per lattice site.
    pub fn free_energy(&self, phi: f64, n: f64, chi: f64) -> Result<f64, BenchError> {
        if !(phi > 0.0 && phi < 1.0) {
            return Err(BenchError::Range(format!("phi must lie in (0, 1), got {phi}")));
        }
        if !(n >= 1.0) {
            return Err(BenchError::Range(format!("chain length must be >= 1, got {n}")));
        }
        let psi = 1.0 - phi;
        Ok(self.gas_constant
            * self.temperature
            * (phi / n * phi.ln() + psi * psi.ln() + chi * phi * psi))
    }

    pub fn expression(&self) -> String {
        format!(
            "{} * {} * (phi / N * log(phi) + (1 - phi) * log(1 - phi) + chi * phi * (1 - phi))",
            lit(self.gas_constant),
            lit(self.temperature)
        )
    }

    pub fn as_map(&self) -> BTreeMap<String, f64> {
        [("R", self.gas_constant), ("T", self.temperature)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    }
}

/// Bacterial growth constants. Placeholder values; the reference constants
/// live with the original bactgrow data release.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcbgConstants {
    pub mu_max: f64,
    pub k_s: f64,
    pub k: f64,
    pub x0: f64,
    pub c: f64,
    pub x_decay: f64,
    pub ph_opt: f64,
    pub ph_min: f64,
    pub ph_max: f64,
}

impl Default for EcbgConstants {
    fn default() -> Self {
        EcbgConstants {
            mu_max: 1.0,
            k_s: 1.0,
            k: 0.5,
            x0: 20.0,
            c: 1e-4,
            x_decay: 45.0,
            ph_opt: 7.0,
            ph_min: 4.0,
            ph_max: 10.0,
        }
    }
}

impl EcbgConstants {
    pub fn ph_factor(&self, ph: f64) -> f64 {
        let s = ((ph - self.ph_min) * PI / (self.ph_max - self.ph_min)).sin();
        (-(ph - self.ph_opt).abs()).exp() * s.powf(2.0)
    }

    /// Growth rate dB/dt.
    pub fn growth_rate(&self, b: f64, s: f64, temp: f64, ph: f64) -> Result<f64, BenchError> {
        if b < 0.0 || s < 0.0 {
            return Err(BenchError::Range(format!(
                "population and substrate must be non-negative, got B={b}, S={s}"
            )));
        }
        let monod = s / (self.k_s + s);
        let thermal = (self.k * (temp - self.x0)).tanh()
            / (1.0 + self.c * (temp - self.x_decay).powf(4.0));
        Ok(self.mu_max * b * monod * thermal * self.ph_factor(ph))
    }

    pub fn expression(&self) -> String {
        format!(
            "{mu} * B * (S / ({ks} + S)) * (tanh({k} * (T - {x0})) / (1 + {c} * (T - {xd})^4)) \
             * (exp(-abs(pH - {opt})) * sin((pH - {lo}) * pi / ({hi} - {lo}))^2)",
            mu = lit(self.mu_max),
            ks = lit(self.k_s),
            k = lit(self.k),
            x0 = lit(self.x0),
            c = lit(self.c),
            xd = lit(self.x_decay),
            opt = lit(self.ph_opt),
            lo = lit(self.ph_min),
            hi = lit(self.ph_max),
        )
    }

    pub fn as_map(&self) -> BTreeMap<String, f64> {
        [
            ("mu_max", self.mu_max),
            ("K_s", self.k_s),
            ("k", self.k),
            ("x0", self.x0),
            ("c", self.c),
            ("x_decay", self.x_decay),
            ("pH_opt", self.ph_opt),
            ("pH_min", self.ph_min),
            ("pH_max", self.ph_max),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

/// Hodgkin-Huxley membrane constants (classic squid-axon values).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HhmConstants {
    pub g_na: f64,
    pub g_k: f64,
    pub g_l: f64,
    pub v_na: f64,
    pub v_k: f64,
    pub v_l: f64,
    pub c_m: f64,
}

impl Default for HhmConstants {
    fn default() -> Self {
        HhmConstants {
            g_na: 120.0,
            g_k: 36.0,
            g_l: 0.3,
            v_na: 50.0,
            v_k: -77.0,
            v_l: -54.4,
            c_m: 1.0,
        }
    }
}

impl HhmConstants {
    /// Membrane potential rate dV/dt.
    pub fn dv_dt(&self, v: f64, m: f64, n: f64, h: f64, i_ext: f64) -> Result<f64, BenchError> {
        for (name, g) in [("m", m), ("n", n), ("h", h)] {
            if !(0.0..=1.0).contains(&g) {
                return Err(BenchError::Range(format!(
                    "gating variable {name} must lie in [0, 1], got {g}"
                )));
            }
        }
        Ok((self.g_na * m.powf(3.0) * h * (self.v_na - v)
            + self.g_k * n.powf(4.0) * (self.v_k - v)
            + self.g_l * (self.v_l - v)
            + i_ext)
            / self.c_m)
    }

    pub fn expression(&self) -> String {
        format!(
            "({} * m^3 * h * ({} - V) + {} * n^4 * ({} - V) + {} * ({} - V) + I_ext) / {}",
            lit(self.g_na),
            lit(self.v_na),
            lit(self.g_k),
            lit(self.v_k),
            lit(self.g_l),
            lit(self.v_l),
            lit(self.c_m)
        )
    }

    pub fn as_map(&self) -> BTreeMap<String, f64> {
        [
            ("g_Na", self.g_na),
            ("g_K", self.g_k),
            ("g_L", self.g_l),
            ("V_Na", self.v_na),
            ("V_K", self.v_k),
            ("V_L", self.v_l),
            ("C_m", self.c_m),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}
