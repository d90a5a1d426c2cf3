//! One-dimensional emergency-braking loop: an ego vehicle closes on a
//! stationary leader while its range sensor reports `true_gap · depth_ratio`.

use std::fmt;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::report::sig6;

pub const MAX_DT_S: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    pub initial_gap_m: f64,
    pub ego_speed_mps: f64,
    pub max_decel_mps2: f64,
    pub safety_margin_m: f64,
    pub dt_s: f64,
    pub depth_ratio: f64,
    pub noise_sigma_m: f64,
    pub max_sim_time_s: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            initial_gap_m: 40.0,
            ego_speed_mps: 10.0,
            max_decel_mps2: 6.0,
            safety_margin_m: 2.0,
            dt_s: 0.01,
            depth_ratio: 1.0,
            noise_sigma_m: 0.0,
            max_sim_time_s: 60.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn with_ratio(self, depth_ratio: f64) -> Self {
        ScenarioConfig { depth_ratio, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("initial_gap_m", self.initial_gap_m),
            ("ego_speed_mps", self.ego_speed_mps),
            ("max_decel_mps2", self.max_decel_mps2),
            ("safety_margin_m", self.safety_margin_m),
            ("dt_s", self.dt_s),
            ("depth_ratio", self.depth_ratio),
            ("max_sim_time_s", self.max_sim_time_s),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.noise_sigma_m.is_finite() && self.noise_sigma_m >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise_sigma_m must be non-negative, got {}",
                self.noise_sigma_m
            )));
        }
        if self.dt_s > MAX_DT_S {
            return Err(Error::InvalidParameter(format!(
                "dt_s must not exceed {MAX_DT_S}, got {}",
                self.dt_s
            )));
        }
        Ok(())
    }

    /// Perceived gap at or below which braking starts.
    pub fn brake_threshold(&self, speed_mps: f64) -> f64 {
        speed_mps * speed_mps / (2.0 * self.max_decel_mps2) + self.safety_margin_m
    }
}

pub fn perceive(true_gap_m: f64, ratio: f64, noise_sample_m: f64) -> f64 {
    (true_gap_m * ratio + noise_sample_m).max(0.0)
}

/// Stateless braking rule.
pub fn brake_command(perceived_gap_m: f64, speed_mps: f64, cfg: &ScenarioConfig) -> f64 {
    if speed_mps <= 0.0 {
        0.0
    } else if perceived_gap_m <= cfg.brake_threshold(speed_mps) {
        -cfg.max_decel_mps2
    } else {
        0.0
    }
}

/// [`brake_command`] with a latch: once braking starts it continues until stop.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BrakeController {
    latched: bool,
}

impl BrakeController {
    pub fn braking(&self) -> bool {
        self.latched
    }

    pub fn latch(&mut self) {
        self.latched = true;
    }

    pub fn command(&mut self, perceived_gap_m: f64, speed_mps: f64, cfg: &ScenarioConfig) -> f64 {
        if speed_mps <= 0.0 {
            return 0.0;
        }
        if !self.latched && brake_command(perceived_gap_m, speed_mps, cfg) < 0.0 {
            self.latched = true;
        }
        if self.latched {
            -cfg.max_decel_mps2
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub gap_m: f64,
    pub speed_mps: f64,
}

/// Gap advances with the pre-step speed, then speed integrates and clamps at 0.
pub fn step(state: VehicleState, accel_mps2: f64, dt_s: f64) -> VehicleState {
    VehicleState {
        gap_m: state.gap_m - state.speed_mps * dt_s,
        speed_mps: (state.speed_mps + accel_mps2 * dt_s).max(0.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickLog {
    pub time_s: f64,
    pub true_gap_m: f64,
    pub perceived_gap_m: f64,
    pub speed_mps: f64,
    pub accel_cmd_mps2: f64,
    pub braking: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Stopped { final_gap_m: f64 },
    Collision { impact_speed_mps: f64 },
    Timeout,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Stopped { final_gap_m } => write!(f, "STOPPED gap={}", sig6(*final_gap_m)),
            Outcome::Collision { impact_speed_mps } => write!(f, "COLLISION speed={}", sig6(*impact_speed_mps)),
            Outcome::Timeout => f.write_str("TIMEOUT"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub outcome: Outcome,
    pub ticks: Vec<TickLog>,
    /// Seed of the perception noise generator, present when σ > 0.
    pub seed: Option<u64>,
}

impl ScenarioRun {
    pub fn distance_traveled_m(&self, cfg: &ScenarioConfig) -> Option<f64> {
        match self.outcome {
            Outcome::Stopped { final_gap_m } => Some(cfg.initial_gap_m - final_gap_m),
            _ => None,
        }
    }
}

/// Simulates until collision, stop or timeout.
///
/// While coasting, the tick in which the perceived gap crosses the brake
/// threshold is split at the crossing so braking starts on time rather than
/// up to one tick late.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioRun> {
    cfg.validate()?;
    let mut noise = if cfg.noise_sigma_m > 0.0 {
        let normal = Normal::new(0.0, cfg.noise_sigma_m)
            .map_err(|e| Error::InvalidParameter(format!("noise sigma: {e}")))?;
        Some((ChaCha8Rng::seed_from_u64(cfg.seed), normal))
    } else {
        None
    };
    let mut state = VehicleState {
        gap_m: cfg.initial_gap_m,
        speed_mps: cfg.ego_speed_mps,
    };
    let mut controller = BrakeController::default();
    let mut ticks = Vec::new();
    let mut tick = 0u64;
    let outcome = loop {
        let t = tick as f64 * cfg.dt_s;
        if t >= cfg.max_sim_time_s {
            break Outcome::Timeout;
        }
        let sample = noise.as_mut().map_or(0.0, |(rng, n)| n.sample(rng));
        let perceived = perceive(state.gap_m, cfg.depth_ratio, sample);
        let accel = controller.command(perceived, state.speed_mps, cfg);
        ticks.push(TickLog {
            time_s: t,
            true_gap_m: state.gap_m,
            perceived_gap_m: perceived,
            speed_mps: state.speed_mps,
            accel_cmd_mps2: accel,
            braking: controller.braking(),
        });
        let pre_speed = state.speed_mps;
        state = if !controller.braking() && pre_speed > 0.0 {
            let raw = cfg.depth_ratio * state.gap_m + sample;
            let to_threshold = (raw - cfg.brake_threshold(pre_speed)) / (cfg.depth_ratio * pre_speed);
            if to_threshold < cfg.dt_s {
                controller.latch();
                let mid = step(state, 0.0, to_threshold);
                step(mid, -cfg.max_decel_mps2, cfg.dt_s - to_threshold)
            } else {
                step(state, accel, cfg.dt_s)
            }
        } else {
            step(state, accel, cfg.dt_s)
        };
        tick += 1;
        if state.gap_m <= 0.0 {
            break Outcome::Collision {
                impact_speed_mps: pre_speed,
            };
        }
        if state.speed_mps <= 0.0 {
            break Outcome::Stopped {
                final_gap_m: state.gap_m,
            };
        }
    };
    Ok(ScenarioRun {
        outcome,
        ticks,
        seed: noise.map(|_| cfg.seed),
    })
}

pub const TICK_CSV_HEADER: [&str; 6] = ["t", "true_gap", "perceived_gap", "speed", "accel", "braking"];

/// Tick log as CSV, preceded by `# seed=<n>` for noisy runs.
pub fn write_tick_csv<W: Write>(run: &ScenarioRun, mut writer: W) -> Result<()> {
    let io_err = |e: std::io::Error| Error::io("<tick log>", e);
    if let Some(seed) = run.seed {
        writeln!(writer, "# seed={seed}").map_err(io_err)?;
    }
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::io("<tick log>", std::io::Error::other(e));
    w.write_record(TICK_CSV_HEADER).map_err(csv_err)?;
    for t in &run.ticks {
        w.write_record([
            t.time_s.to_string(),
            t.true_gap_m.to_string(),
            t.perceived_gap_m.to_string(),
            t.speed_mps.to_string(),
            t.accel_cmd_mps2.to_string(),
            t.braking.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}
