//! Configuration-driven runner: integrate the reduced and/or full dynamics
//! of a scenario, reconstruct the group variable, emit trajectory tables and
//! a diagnostics summary, or run the built-in verification suite.

mod config;
mod output;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hdp_core::{
    integrate, reconstruct_group, scenario_by_id, FullState, IntegrationOutcome, IntegratorConfig,
    Method, ReducedState, Scenario, Trajectory,
};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "hdp", about = "reduced and full constrained dynamics on trivial bundles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration file and write trajectories plus diagnostics.
    Run { config: PathBuf },
    /// Run the built-in verification suite.
    Verify {
        /// Restrict trajectory-based checks to one scenario id.
        #[arg(long)]
        scenario: Option<String>,
        /// Sampling seed.
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Print the commented configuration schema.
    PrintSchema,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::PrintSchema => {
            print!("{}", config::SCHEMA);
            ExitCode::SUCCESS
        }
        Command::Verify { scenario, seed } => run_verify(seed, scenario.as_deref()),
        Command::Run { config } => match run(&config) {
            Ok(clean) => {
                if clean {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(3)
                }
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(2)
            }
        },
    }
}

fn run_verify(seed: u64, scenario: Option<&str>) -> ExitCode {
    let reports = hdp_core::run_all(seed, scenario);
    let mut ok = true;
    for r in &reports {
        println!("{}", r.line());
        ok &= r.passed;
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    }
}

struct RunOutputs {
    full: Option<Trajectory<FullState>>,
    reduced: Option<Trajectory<ReducedState>>,
    reconstructed: Option<Vec<hdp_core::Rot3>>,
    failures: Vec<String>,
}

fn run(path: &Path) -> Result<bool, config::ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config::ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let cfg = config::parse(&text)?;

    if cfg.mode == "verify" {
        let code = run_verify(cfg.seed, Some(cfg.scenario.as_str()));
        return Ok(code == ExitCode::SUCCESS);
    }

    let params = cfg.ball_params();
    let lyap = cfg.lyapunov_spec();
    let mut sc = scenario_by_id(&cfg.scenario, &params, &lyap)
        .map_err(|e| config::ConfigError(e.to_string()))?;
    sc.problem.action_side = cfg.action_side();
    if cfg.case_selector() == hdp_core::CaseSelector::General {
        sc.problem.case = hdp_core::CaseSelector::General;
    }
    let s0 = cfg.initial_state()?;
    // the integrator requires the initial state on the constraint manifold
    for k in &sc.dynamics.kinematic {
        if let Some(r) = k.state_residual(&s0) {
            if r.amax() > hdp_core::tol::DRIFT_ALARM {
                return Err(config::ConfigError(format!(
                    "initial state violates '{}' by {:.3e}; enable initial.project_initial",
                    k.name,
                    r.amax()
                )));
            }
        }
    }

    let mut icfg = IntegratorConfig::new(cfg.integrator.dt, cfg.integrator.t_final)
        .map_err(|e| config::ConfigError(e.to_string()))?;
    icfg.method = match cfg.integrator.method.as_str() {
        "euler" => Method::Euler,
        _ => Method::Rk4,
    };
    icfg.project = cfg.integrator.project;

    let out = execute(&sc, &s0, &icfg, &cfg);

    let out_dir = std::env::var("HDP_OUTPUT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|_| PathBuf::from(&cfg.output_dir));
    let mut summary = Summary::new(&cfg, &sc);
    if let Some(full) = &out.full {
        output::write(&out_dir.join("full.csv"), &output::full_csv(full))
            .map_err(|e| config::ConfigError(e.to_string()))?;
        summary.full(&sc, full);
    }
    if let Some(reduced) = &out.reduced {
        output::write(&out_dir.join("reduced.csv"), &output::reduced_csv(reduced))
            .map_err(|e| config::ConfigError(e.to_string()))?;
        summary.reduced(&sc, reduced);
    }
    if let Some(path) = &out.reconstructed {
        if let Some(reduced) = &out.reduced {
            output::write(
                &out_dir.join("reconstructed.csv"),
                &output::rotation_csv(&reduced.times[..path.len()], path),
            )
            .map_err(|e| config::ConfigError(e.to_string()))?;
            summary.reconstructed(path);
        }
    }
    if let (Some(full), Some(reduced)) = (&out.full, &out.reduced) {
        let n = full.len().min(reduced.len());
        let full_cut = Trajectory {
            times: full.times[..n].to_vec(),
            states: full.states[..n].to_vec(),
            diags: full.diags[..n].to_vec(),
        };
        let reduced_cut = Trajectory {
            times: reduced.times[..n].to_vec(),
            states: reduced.states[..n].to_vec(),
            diags: reduced.diags[..n].to_vec(),
        };
        output::write(
            &out_dir.join("deviation.csv"),
            &output::deviation_csv(&full_cut, &reduced_cut),
        )
        .map_err(|e| config::ConfigError(e.to_string()))?;
        summary.deviation(&full_cut, &reduced_cut);
    }
    for f in &out.failures {
        summary.failure(f);
    }
    output::write(&out_dir.join("diagnostics.txt"), &summary.render())
        .map_err(|e| config::ConfigError(e.to_string()))?;

    if out.failures.is_empty() {
        Ok(true)
    } else {
        for f in &out.failures {
            eprintln!("{f}");
        }
        Ok(false)
    }
}

fn execute(sc: &Scenario, s0: &FullState, icfg: &IntegratorConfig, cfg: &RunConfig) -> RunOutputs {
    let mut outputs = RunOutputs {
        full: None,
        reduced: None,
        reconstructed: None,
        failures: Vec::new(),
    };
    let want_full = matches!(cfg.mode.as_str(), "full" | "both");
    let want_reduced = matches!(cfg.mode.as_str(), "reduced" | "both");

    if want_full {
        let IntegrationOutcome {
            trajectory,
            failure,
        } = integrate(
            hdp_core::scenarios::full_field(sc),
            s0,
            icfg,
            &hdp_core::scenarios::full_hooks(sc),
        );
        if let Some(e) = failure {
            outputs.failures.push(format!("full integration: {e}"));
        }
        outputs.full = Some(trajectory);
    }
    if want_reduced {
        let red0 = hdp_core::reduce_trivial(s0);
        let IntegrationOutcome {
            trajectory,
            failure,
        } = integrate(
            hdp_core::scenarios::reduced_field(sc),
            &red0,
            icfg,
            &hdp_core::scenarios::reduced_hooks(sc),
        );
        if let Some(e) = failure {
            outputs.failures.push(format!("reduced integration: {e}"));
        }
        if !trajectory.is_empty() {
            match reconstruct_group(&trajectory, s0.c, &sc.problem.conn_a, &sc.problem.h) {
                Ok(path) => outputs.reconstructed = Some(path),
                Err(e) => outputs.failures.push(format!("reconstruction: {e}")),
            }
        }
        outputs.reduced = Some(trajectory);
    }
    outputs
}

/// Deterministic key: value summary of a run.
struct Summary {
    lines: Vec<(String, String)>,
}

impl Summary {
    fn new(cfg: &RunConfig, sc: &Scenario) -> Self {
        let mut s = Summary { lines: Vec::new() };
        s.push("scenario", sc.id.to_string());
        s.push("mode", cfg.mode.clone());
        s.push("dt", output::fmt_f64(cfg.integrator.dt));
        s.push("t_final", output::fmt_f64(cfg.integrator.t_final));
        s.push("method", cfg.integrator.method.clone());
        s.push("action_side", cfg.action_side.clone());
        s
    }

    fn push(&mut self, key: &str, value: String) {
        self.lines.push((key.to_string(), value));
    }

    fn full(&mut self, sc: &Scenario, traj: &Trajectory<FullState>) {
        self.push("full.steps", (traj.len().saturating_sub(1)).to_string());
        let h0 = sc.dynamics.hamiltonian(&traj.states[0]);
        let drift = traj
            .states
            .iter()
            .map(|s| (sc.dynamics.hamiltonian(s) - h0).abs())
            .fold(0.0f64, f64::max);
        self.push("full.energy_initial", output::fmt_f64(h0));
        self.push("full.energy_drift_max", output::fmt_f64(drift));
        let solve = traj
            .diags
            .iter()
            .map(|d| d.field_residual)
            .fold(0.0f64, f64::max);
        self.push("full.solve_residual_max", output::fmt_f64(solve));
        let rolling = traj
            .states
            .iter()
            .map(|s| hdp_core::rolling_residual(s, &sc.params).amax())
            .fold(0.0f64, f64::max);
        if sc.id != "free" {
            self.push("full.rolling_residual_max", output::fmt_f64(rolling));
        }
        if let Some(lyap) = &sc.lyapunov {
            self.push(
                "full.lyapunov_value_initial",
                output::fmt_f64(lyap.value(&traj.states[0])),
            );
            self.push(
                "full.lyapunov_value_final",
                output::fmt_f64(lyap.value(traj.last())),
            );
        }
    }

    fn reduced(&mut self, sc: &Scenario, traj: &Trajectory<ReducedState>) {
        self.push("reduced.steps", (traj.len().saturating_sub(1)).to_string());
        let h0 = sc.problem.h.value(&traj.states[0]);
        self.push("reduced.energy_initial", output::fmt_f64(h0));
        let solve = traj
            .diags
            .iter()
            .map(|d| d.field_residual)
            .fold(0.0f64, f64::max);
        self.push("reduced.solve_residual_max", output::fmt_f64(solve));
    }

    fn reconstructed(&mut self, path: &[hdp_core::Rot3]) {
        let worst = path.iter().map(|r| r.ortho_defect()).fold(0.0f64, f64::max);
        self.push("reconstruction.orthonormality_max", output::fmt_f64(worst));
    }

    fn deviation(&mut self, full: &Trajectory<FullState>, reduced: &Trajectory<ReducedState>) {
        let mut max = 0.0f64;
        for (f, r) in full.states.iter().zip(reduced.states.iter()) {
            max = max.max(hdp_core::scenarios::projection_deviation(f, r));
        }
        self.push("deviation.max", output::fmt_f64(max));
    }

    fn failure(&mut self, message: &str) {
        self.push("failure", message.to_string());
    }

    fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.lines {
            let _ = writeln!(out, "{k}: {v}");
        }
        out
    }
}
