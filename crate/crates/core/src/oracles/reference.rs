//! Fine-mesh explicit integration used as a target where no closed-form
//! solution exists.

use crate::column::SoilColumn;
use crate::scenario::{InitialCondition, Scenario};
use crate::state::{initial_state, State};
use crate::stepper::{RunError, StepError, Stepper, StepperConfig};

/// Reference temperatures sampled on the coarse nodes at the scenario's output times.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    pub fine_column: SoilColumn,
    pub times: Vec<f64>,
    /// `temperatures[n][i]` at time `times[n]`, coarse node `i`.
    pub temperatures: Vec<Vec<f64>>,
    /// Forward-Euler sub-steps per output step.
    pub substeps: usize,
}

/// Integrates `scenario` with every element split into `refinement` pieces and
/// the time step divided by `refinement`, using forward Euler. Each refined
/// step is further divided into equal sub-steps that respect the explicit
/// stability limit of the fine mesh.
pub fn reference_solution(scenario: &Scenario, refinement: usize) -> Result<ReferenceTrajectory, RunError> {
    let fail = |source: StepError| RunError {
        step: 0,
        time: 0.0,
        source,
    };
    let refinement = refinement.max(1);
    let coarse_start = initial_state(scenario).map_err(|e| fail(e.into()))?;
    let fine_column = scenario.column.refine(refinement).map_err(|e| fail(e.into()))?;
    let fine_scenario = Scenario {
        column: fine_column.clone(),
        initial: refined_initial(scenario, &fine_column, &coarse_start, refinement),
        ..scenario.clone()
    };
    let start = initial_state(&fine_scenario).map_err(|e| fail(e.into()))?;

    let stepper = Stepper::new(&fine_column, StepperConfig::default());
    let fine_dt = scenario.dt / refinement as f64;
    let substeps = (fine_dt / stepper.explicit_dt_limit()).ceil().max(1.0) as usize;
    let h = fine_dt / substeps as f64;

    let sample = |s: &State| {
        (0..=scenario.column.elements())
            .map(|i| s.gamma[i * refinement])
            .collect::<Vec<f64>>()
    };
    let mut times = vec![0.0];
    let mut temperatures = vec![sample(&start)];
    let mut current = start;
    let per_output = refinement * substeps;
    for step in 1..=scenario.steps() {
        let t0 = (step - 1) as f64 * scenario.dt;
        for k in 1..=per_output {
            let t = t0 + k as f64 * h;
            let (next, _) = stepper
                .step_explicit(&current, h, scenario.surface.value(t))
                .map_err(|source| RunError { step, time: t, source })?;
            current = next;
        }
        current.time = step as f64 * scenario.dt;
        times.push(current.time);
        temperatures.push(sample(&current));
    }
    Ok(ReferenceTrajectory {
        fine_column,
        times,
        temperatures,
        substeps,
    })
}

/// Initial data on the refined mesh: profiles are resampled, nodal data
/// interpolated linearly in enthalpy between coarse nodes.
fn refined_initial(
    scenario: &Scenario,
    fine: &SoilColumn,
    coarse_start: &State,
    refinement: usize,
) -> InitialCondition {
    match &scenario.initial {
        InitialCondition::Nodal { .. } => {
            let (u, f) = coarse_start.to_initial_data(&scenario.column);
            let n_fine = fine.nodes().len();
            let mut temperatures = Vec::with_capacity(n_fine);
            let mut fractions = Vec::with_capacity(n_fine);
            for j in 0..n_fine {
                let (i, r) = (j / refinement, j % refinement);
                if r == 0 {
                    temperatures.push(u[i]);
                    fractions.push(f[i]);
                } else {
                    let w = r as f64 / refinement as f64;
                    temperatures.push((1.0 - w) * u[i] + w * u[i + 1]);
                    fractions.push((1.0 - w) * f[i] + w * f[i + 1]);
                }
            }
            InitialCondition::Nodal {
                temperatures,
                liquid_fractions: fractions,
            }
        }
        other => other.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::column::{Material, MeshSpec};
    use crate::scenario::SurfaceBc;
    use crate::stepper::run;

    fn scenario(kappa: usize, dt: f64) -> Scenario {
        Scenario {
            column: SoilColumn::homogeneous(
                Material::PERMAFROST_BENCHMARK,
                1.0,
                MeshSpec::Uniform { elements: kappa },
            )
            .unwrap(),
            surface: SurfaceBc::Constant { value: -5.0 },
            initial: InitialCondition::Uniform {
                temperature: 2.0,
                liquid_fraction: 0.0,
            },
            theta: 0.0,
            dt,
            duration: 10.0 * dt,
        }
    }

    #[test]
    fn unit_refinement_is_a_plain_explicit_run() {
        let sc = scenario(10, 3600.0);
        let reference = reference_solution(&sc, 1).unwrap();
        assert_eq!(reference.substeps, 1);
        let traj = run(&sc, &StepperConfig::default()).unwrap();
        for (r, s) in reference.temperatures.iter().zip(&traj.states) {
            assert_eq!(r, &s.gamma);
        }
    }

    #[test]
    fn coarse_nodes_are_sampled() {
        let sc = scenario(5, 3600.0);
        let reference = reference_solution(&sc, 4).unwrap();
        assert_eq!(reference.fine_column.elements(), 20);
        assert_eq!(reference.temperatures.len(), 11);
        assert!(reference.temperatures.iter().all(|t| t.len() == 6 && t[0] == -5.0));
    }
}
