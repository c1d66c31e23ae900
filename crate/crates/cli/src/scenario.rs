//! Builds and runs the simulation a config describes.

use avgnet::balancing::run_balancing;
use avgnet::engine::{
    run, BirkhoffSequence, CirculantSchedule, EqualNeighborSequence, PeriodicMatrices, RunConfig, RunReport,
};
use avgnet::graph::{PeriodicTopology, RandomTopology, TopologySequence};
use avgnet::lyapunov::NodeVector;
use avgnet::quantized::{
    converse_scenario, run_quantized, QuantizedProtocol, QuantizedRunConfig, QuantizedRunReport, QuantizedVector,
};
use avgnet::rng::substream;
use avgnet::weights::circulant_second_eigenvector;
use rand::Rng;
use serde::Serialize;

use crate::config::{InitialCondition, Protocol, ScenarioConfig, TopologySpec};
use crate::CliError;

/// Stream reserved for the initial vector; topology and matrix streams are
/// indexed by round and never reach it.
const INITIAL_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Outcome {
    Unquantized(RunReport),
    Quantized(QuantizedRunReport),
}

impl Outcome {
    /// Convergence time, or termination round for quantized runs.
    pub fn completion_round(&self) -> Option<usize> {
        match self {
            Outcome::Unquantized(r) => r.convergence_time,
            Outcome::Quantized(r) => r.termination_round,
        }
    }

    /// `max_i |x_i − mean(x(0))|` at the end, or the mean drift once a
    /// quantized run terminates.
    pub fn final_error(&self) -> Option<f64> {
        match self {
            Outcome::Unquantized(r) => Some(r.final_error()),
            Outcome::Quantized(r) => r.mean_drift,
        }
    }
}

/// A finished run together with the config that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Execution {
    pub config: ScenarioConfig,
    pub outcome: Outcome,
}

/// Runs `config` after validating it. Deterministic in the config.
pub fn execute(config: &ScenarioConfig) -> Result<Execution, CliError> {
    config.validate()?;
    let outcome = if config.protocol == Protocol::Converse {
        let q = config.q.expect("validated");
        Outcome::Quantized(converse_scenario(config.n, q)?.simulate()?)
    } else if config.is_quantized() {
        Outcome::Quantized(execute_quantized(config)?)
    } else {
        Outcome::Unquantized(execute_unquantized(config)?)
    };
    Ok(Execution {
        config: config.clone(),
        outcome,
    })
}

fn execute_unquantized(config: &ScenarioConfig) -> Result<RunReport, CliError> {
    let x0 = initial_values(config)?;
    let run_config = RunConfig::new(config.epsilon, config.max_rounds)?.with_stride(config.stride)?;
    let report = match config.protocol {
        Protocol::Balancing => run_balancing(&x0, topology(config)?.as_ref(), &run_config)?,
        Protocol::EqualNeighbor => {
            let seq = EqualNeighborSequence::new(topology(config)?, config.equal_neighbor_eps())?;
            run(&x0, &seq, &run_config)?
        }
        Protocol::Circulant => run(&x0, &circulant(config)?, &run_config)?,
        Protocol::MatrixSequence => match &config.matrices {
            Some(ms) => run(&x0, &PeriodicMatrices::new(ms.clone(), config.window)?, &run_config)?,
            None => run(&x0, &birkhoff(config)?, &run_config)?,
        },
        Protocol::Converse => unreachable!("handled by execute"),
    };
    Ok(report)
}

fn execute_quantized(config: &ScenarioConfig) -> Result<QuantizedRunReport, CliError> {
    let x0 = initial_quantized(config)?;
    let run_config = QuantizedRunConfig {
        max_rounds: config.max_rounds,
        stride: config.stride,
    };
    let report = match config.protocol {
        Protocol::Balancing => {
            let topo = topology(config)?;
            run_quantized(&x0, QuantizedProtocol::Balancing(topo.as_ref()), &run_config)?
        }
        Protocol::EqualNeighbor => {
            let seq = EqualNeighborSequence::new(topology(config)?, config.equal_neighbor_eps())?;
            run_quantized(&x0, QuantizedProtocol::Matrices(&seq), &run_config)?
        }
        Protocol::Circulant => run_quantized(&x0, QuantizedProtocol::Matrices(&circulant(config)?), &run_config)?,
        Protocol::MatrixSequence => match &config.matrices {
            Some(ms) => {
                let seq = PeriodicMatrices::new(ms.clone(), config.window)?;
                run_quantized(&x0, QuantizedProtocol::Matrices(&seq), &run_config)?
            }
            None => run_quantized(&x0, QuantizedProtocol::Matrices(&birkhoff(config)?), &run_config)?,
        },
        Protocol::Converse => unreachable!("handled by execute"),
    };
    Ok(report)
}

fn circulant(config: &ScenarioConfig) -> Result<CirculantSchedule, CliError> {
    Ok(CirculantSchedule::new(
        config.n,
        config.eta.expect("validated"),
        config.window,
    )?)
}

fn birkhoff(config: &ScenarioConfig) -> Result<BirkhoffSequence, CliError> {
    Ok(BirkhoffSequence::new(
        config.n,
        config.num_permutations,
        config.eta.expect("validated"),
        config.seed.expect("validated"),
        config.window,
    )?)
}

fn topology(config: &ScenarioConfig) -> Result<Box<dyn TopologySequence>, CliError> {
    let (n, window) = (config.n, config.window);
    Ok(match config.topology.as_ref().expect("validated") {
        TopologySpec::RandomUndirected { edge_probability } => Box::new(RandomTopology::undirected(
            n,
            window,
            *edge_probability,
            config.seed.expect("validated"),
        )?),
        TopologySpec::RandomDirected { edge_probability } => Box::new(RandomTopology::directed(
            n,
            window,
            *edge_probability,
            config.seed.expect("validated"),
        )?),
        TopologySpec::Periodic { snapshots } => Box::new(PeriodicTopology::new(snapshots.clone(), window)?),
    })
}

fn initial_values(config: &ScenarioConfig) -> Result<NodeVector, CliError> {
    let n = config.n;
    Ok(match config.initial_condition() {
        InitialCondition::Explicit { values } => NodeVector::new(values)?,
        InitialCondition::Eigenvector => circulant_second_eigenvector(n),
        InitialCondition::Uniform => {
            let mut rng = substream(config.seed.expect("validated"), INITIAL_STREAM);
            NodeVector::new((0..n).map(|_| rng.random::<f64>()).collect())?
        }
    })
}

fn initial_quantized(config: &ScenarioConfig) -> Result<QuantizedVector, CliError> {
    let q = config.q.expect("validated");
    Ok(match config.initial_condition() {
        InitialCondition::Explicit { values } => QuantizedVector::from_values(&values, q)?,
        InitialCondition::Eigenvector => QuantizedVector::floor_of(&circulant_second_eigenvector(config.n), q)?,
        InitialCondition::Uniform => {
            let mut rng = substream(config.seed.expect("validated"), INITIAL_STREAM);
            QuantizedVector::new((0..config.n).map(|_| rng.random_range(0..=q)).collect(), q)?
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invalid_config_is_rejected_before_running() {
        let cfg = ScenarioConfig::new(Protocol::Circulant, 10);
        assert!(matches!(execute(&cfg), Err(CliError::Config(_))));
    }

    #[test]
    fn converse_reports_half() {
        let mut cfg = ScenarioConfig::new(Protocol::Converse, 6);
        cfg.q = Some(2);
        let out = execute(&cfg).unwrap().outcome;
        assert_eq!(out.final_error(), Some(0.5));
        assert_eq!(out.completion_round(), Some(3));
    }

    #[test]
    fn quantized_uniform_start_is_on_grid() {
        let mut cfg = ScenarioConfig::new(Protocol::Circulant, 8);
        cfg.eta = Some(0.25);
        cfg.seed = Some(4);
        cfg.quantized = true;
        cfg.q = Some(16);
        let x = initial_quantized(&cfg).unwrap();
        assert!(x.numerators().iter().all(|&m| (0..=16).contains(&m)));
        let Outcome::Quantized(r) = execute(&cfg).unwrap().outcome else {
            panic!("expected a quantized run");
        };
        assert!(r.termination_round.is_some());
    }
}
