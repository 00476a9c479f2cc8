"""Design-space enumeration and per-timestep co-optimization for multi-subloop cooling plants."""

__version__ = "0.1.0"

from .plant_model import OperatingPoint, PlantParams, SubloopLoads, ct_fan_power, pump_power, total_power
from .solver import SolverConfig, SolveResult, Status, Strategy, solve_timestep
from .sweep import AnnualResult, EvalSpec, SweepResult, evaluate_partition, run_sweep
from .telemetry import Dataset, generate_synthetic, read_dataset, write_dataset
from .topology import Partition, design_space, enumerate_partitions

__all__ = [
    "AnnualResult", "Dataset", "EvalSpec", "OperatingPoint", "Partition", "PlantParams",
    "SolveResult", "SolverConfig", "Status", "Strategy", "SubloopLoads", "SweepResult",
    "ct_fan_power", "design_space", "enumerate_partitions", "evaluate_partition",
    "generate_synthetic", "pump_power", "read_dataset", "run_sweep", "solve_timestep",
    "total_power", "write_dataset",
]
