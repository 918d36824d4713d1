//! Time integration with step-size halving on rejected steps.

use crate::discretization::FieldState;
use crate::error::{Error, Result};
use crate::stepper::problem::{Problem, StepControls};
use crate::stepper::step::{do_step, StepOutcome, StepReport};

/// A run in progress. Each call to [`Simulation::advance`] produces one
/// accepted step; rejected attempts are retried with half the step size.
#[derive(Clone, Debug)]
pub struct Simulation {
    problem: Problem,
    controls: StepControls,
    state: FieldState,
    final_time: f64,
    steps: usize,
}

impl Simulation {
    pub fn new(problem: Problem, controls: StepControls, initial: FieldState, final_time: f64) -> Result<Self> {
        controls.check()?;
        problem.check_state(&initial)?;
        if !(final_time > initial.t && final_time.is_finite()) {
            return Err(Error::ConfigInvalid(vec![format!(
                "(controls) final time {final_time} must exceed the initial time {}",
                initial.t
            )]));
        }
        Ok(Simulation {
            problem,
            controls,
            state: initial,
            final_time,
            steps: 0,
        })
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn controls(&self) -> &StepControls {
        &self.controls
    }

    pub fn state(&self) -> &FieldState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.state.t
    }

    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    pub fn is_finished(&self) -> bool {
        self.final_time - self.state.t <= 1e-12 * self.final_time.abs().max(1.0)
    }

    pub fn advance(&mut self) -> Result<StepOutcome> {
        if self.is_finished() {
            return Err(Error::RunAborted {
                time: self.state.t,
                reason: "final time already reached".into(),
            });
        }
        let remaining = self.final_time - self.state.t;
        // a last step within rounding of τ is taken in full
        let mut tau = if remaining <= self.controls.tau * (1.0 + 1e-8) {
            remaining
        } else {
            self.controls.tau
        };
        let mut halvings = 0;
        loop {
            match do_step(&self.problem, &self.state, &self.controls, tau) {
                Ok(mut out) => {
                    self.steps += 1;
                    out.report.step = self.steps;
                    out.report.tau_halvings = halvings;
                    self.state = out.state.clone();
                    return Ok(out);
                }
                Err(e) => {
                    tau *= 0.5;
                    halvings += 1;
                    if tau < self.controls.min_tau {
                        return Err(Error::RunAborted {
                            time: self.state.t,
                            reason: format!("step size fell below {:e}; last failure: {e}", self.controls.min_tau),
                        });
                    }
                }
            }
        }
    }

    /// Advances to the final time, handing every accepted step to `observer`.
    pub fn run_to_end(&mut self, mut observer: impl FnMut(&StepOutcome) -> Result<()>) -> Result<()> {
        while !self.is_finished() {
            let out = self.advance()?;
            observer(&out)?;
        }
        Ok(())
    }
}

/// Every state of a run together with the step reports and multipliers.
#[derive(Clone, Debug)]
pub struct Trajectory {
    /// `states[0]` is the initial state; `states[k]` follows step `k`.
    pub states: Vec<FieldState>,
    pub reports: Vec<StepReport>,
    pub xi: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn last(&self) -> &FieldState {
        self.states.last().expect("trajectory holds the initial state")
    }
}

pub fn run(problem: Problem, controls: StepControls, initial: FieldState, final_time: f64) -> Result<Trajectory> {
    let mut sim = Simulation::new(problem, controls, initial.clone(), final_time)?;
    let mut traj = Trajectory {
        states: vec![initial],
        reports: Vec::new(),
        xi: Vec::new(),
    };
    sim.run_to_end(|out| {
        traj.states.push(out.state.clone());
        traj.reports.push(out.report.clone());
        traj.xi.push(out.xi.clone());
        Ok(())
    })?;
    Ok(traj)
}
