//! Run configuration: a TOML file with nested sections, every field
//! defaulted so a minimal config is just a scenario id.

use serde::Deserialize;

use hdp_core::{
    ActionSide, BallParams, BasePoint, CaseSelector, FullState, LyapunovSpec, Rot3, Vec3,
};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: String,
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_action_side")]
    pub action_side: String,
    #[serde(default = "default_case")]
    pub case: String,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default)]
    pub lyapunov: LyapunovConfig,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub initial: Option<InitialSection>,
}

fn default_mode() -> String {
    "both".into()
}

fn default_output_dir() -> String {
    "out".into()
}

fn default_seed() -> u64 {
    42
}

fn default_action_side() -> String {
    "right".into()
}

fn default_case() -> String {
    "trivial_a".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub r1: f64,
    pub r2: f64,
    pub i1: f64,
    pub i2: f64,
    pub m2: f64,
    pub g: f64,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        let p = BallParams::default();
        ParamsConfig {
            r1: p.r1,
            r2: p.r2,
            i1: p.i1,
            i2: p.i2,
            m2: p.m2,
            g: p.g,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovConfig {
    /// Diagonal of the quadratic form over (π, σ, γ).
    pub phi_diag: [f64; 9],
    /// Scale of the gravitational-gap potential v = v_scale·m₂g(1 − e·z).
    pub v_scale: f64,
    /// Decay-rate coefficient: μ = c·‖(π, σ, γ)‖².
    pub mu_rate_coeff: f64,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        LyapunovConfig {
            phi_diag: [1.0; 9],
            v_scale: 1.0,
            mu_rate_coeff: 0.1,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub dt: f64,
    pub t_final: f64,
    pub method: String,
    pub project: bool,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        IntegratorSection {
            dt: 1e-3,
            t_final: 1.0,
            method: "rk4".into(),
            project: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// Big-ball attitude, row-major.
    pub r: [f64; 9],
    pub pi: [f64; 3],
    pub e: [f64; 3],
    #[serde(default)]
    pub sigma: [f64; 3],
    /// Small-ball attitude, row-major.
    pub c: [f64; 9],
    pub gamma: [f64; 3],
    /// Project σ onto the rolling manifold before integrating.
    #[serde(default = "default_true")]
    pub project_initial: bool,
}

fn default_true() -> bool {
    true
}

pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig) -> Result<(), ConfigError> {
    match cfg.scenario.as_str() {
        "ball_hocs" | "ball_dalembert" | "free" => {}
        other => return Err(ConfigError(format!("unknown scenario '{other}'"))),
    }
    match cfg.mode.as_str() {
        "reduced" | "full" | "both" | "verify" => {}
        other => return Err(ConfigError(format!("unknown mode '{other}'"))),
    }
    match cfg.action_side.as_str() {
        "right" | "left" => {}
        other => return Err(ConfigError(format!("unknown action_side '{other}'"))),
    }
    match cfg.case.as_str() {
        "trivial_a" | "general" => {}
        "trivial_a_flat_base" => {
            return Err(ConfigError(
                "case 'trivial_a_flat_base' does not apply: the built-in scenarios have a \
                 curved shape-space factor"
                    .into(),
            ))
        }
        other => return Err(ConfigError(format!("unknown case '{other}'"))),
    }
    match cfg.integrator.method.as_str() {
        "rk4" | "euler" => {}
        other => return Err(ConfigError(format!("unknown method '{other}'"))),
    }
    if !(cfg.integrator.dt > 0.0) {
        return Err(ConfigError("integrator.dt must be positive".into()));
    }
    if cfg.integrator.t_final < cfg.integrator.dt {
        return Err(ConfigError(
            "integrator.t_final must cover at least one step".into(),
        ));
    }
    let p = cfg.ball_params();
    p.validate().map_err(|e| ConfigError(e.to_string()))?;
    if cfg.lyapunov.phi_diag.iter().any(|v| !(*v > 0.0)) {
        return Err(ConfigError("lyapunov.phi_diag must be positive".into()));
    }
    if cfg.lyapunov.v_scale < 0.0 || cfg.lyapunov.mu_rate_coeff < 0.0 {
        return Err(ConfigError(
            "lyapunov.v_scale and mu_rate_coeff must be nonnegative".into(),
        ));
    }
    Ok(())
}

impl RunConfig {
    pub fn ball_params(&self) -> BallParams {
        BallParams {
            r1: self.params.r1,
            r2: self.params.r2,
            i1: self.params.i1,
            i2: self.params.i2,
            m2: self.params.m2,
            g: self.params.g,
        }
    }

    pub fn lyapunov_spec(&self) -> LyapunovSpec {
        LyapunovSpec::with_coeffs(
            &self.ball_params(),
            self.lyapunov.phi_diag,
            self.lyapunov.v_scale,
            self.lyapunov.mu_rate_coeff,
        )
    }

    pub fn action_side(&self) -> ActionSide {
        match self.action_side.as_str() {
            "left" => ActionSide::Left,
            _ => ActionSide::Right,
        }
    }

    pub fn case_selector(&self) -> CaseSelector {
        match self.case.as_str() {
            "general" => CaseSelector::General,
            _ => CaseSelector::TrivialConnection,
        }
    }

    pub fn initial_state(&self) -> Result<FullState, ConfigError> {
        let p = self.ball_params();
        let Some(init) = &self.initial else {
            return Ok(hdp_core::default_initial(&p));
        };
        let rot = |vals: &[f64; 9], name: &str| -> Result<Rot3, ConfigError> {
            let m = hdp_core::Mat3::from_row_slice(vals);
            Rot3::new(m).map_err(|e| ConfigError(format!("initial.{name}: {e}")))
        };
        let r = rot(&init.r, "r")?;
        let c = rot(&init.c, "c")?;
        let e = Vec3::from_row_slice(&init.e);
        if e.norm() < 1e-6 {
            return Err(ConfigError("initial.e must be a nonzero direction".into()));
        }
        let e = e.normalize();
        let _ = BasePoint::new(r, e).map_err(|err| ConfigError(err.to_string()))?;
        let mut s = FullState {
            r,
            pi: Vec3::from_row_slice(&init.pi),
            e,
            sigma: hdp_core::project_sphere_tangent(&e, &Vec3::from_row_slice(&init.sigma)),
            c,
            gamma: Vec3::from_row_slice(&init.gamma),
        };
        if init.project_initial && self.scenario.starts_with("ball") {
            hdp_core::project_to_rolling(&p, &mut s);
        }
        s.check().map_err(|err| ConfigError(err.to_string()))?;
        Ok(s)
    }
}

/// Canonical commented schema with the default values.
pub const SCHEMA: &str = r#"# Run configuration schema (TOML). Every field except `scenario` has the
# default shown. The output directory can be overridden with the
# HDP_OUTPUT_DIR environment variable.

scenario = "ball_hocs"      # ball_hocs | ball_dalembert | free
mode = "both"               # reduced | full | both | verify
output_dir = "out"
seed = 42                   # sampling seed for mode = "verify"
action_side = "right"       # right | left (sign of the ad* term)
case = "trivial_a"          # trivial_a | general

[params]                    # ball geometry and inertia
r1 = 1.0                    # big-ball radius (> r2)
r2 = 0.5                    # small-ball radius
i1 = 1.0                    # big-ball moment of inertia
i2 = 0.1                    # small-ball moment of inertia
m2 = 1.0                    # small-ball mass
g = 9.81                    # gravity

[lyapunov]                  # decay target (ball_hocs only)
phi_diag = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]
v_scale = 1.0               # potential part v = v_scale*m2*g*(1 - e.z)
mu_rate_coeff = 0.1         # decay rate mu = c*|(pi, sigma, gamma)|^2

[integrator]
dt = 0.001                  # step size (s)
t_final = 1.0               # horizon (s)
method = "rk4"              # rk4 | euler
project = true              # post-step manifold projection

# Optional initial state; omit the whole section for the scenario default.
# Matrices are row-major; sigma is projected onto the rolling manifold when
# project_initial is true (the default).
#
# [initial]
# r = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]
# pi = [0.0, 0.0, 1.5]
# e = [0.0, 0.0, 1.0]
# sigma = [0.0, 0.0, 0.0]
# c = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]
# gamma = [0.0, 0.0, 0.1]
# project_initial = true
"#;
