from __future__ import annotations

from core.config import ExperimentConfig
from core.envs.base import (
    ActionSpace,
    ContextSpec,
    Environment,
    GroundTruthStructure,
    StepResult,
    Transition,
    TrueDynamics,
)
from core.envs.chemical import ChemicalConfig, ChemicalEnv, chemical_graphs
from core.envs.magnetic import MagneticConfig, Magnetic2DEnv, magnetic_graphs


def make_env(cfg: ExperimentConfig, seed: int = 0, downstream: bool = False, n_noisy: int = 0) -> Environment:
    """Environment for a config profile. CPD tables are keyed by `seed`."""
    opts = cfg.env_options
    if cfg.is_chemical:
        nodes, colors = cfg.chemical_size()
        chem = ChemicalConfig(
            nodes=nodes,
            colors=colors,
            local_graph=cfg.local_graph,  # type: ignore[arg-type]
            context_color=opts.context_color,
            seed=seed,
            episode_length=opts.episode_length,
            table_retries=opts.table_retries,
        )
        return ChemicalEnv(chem, downstream=downstream, n_noisy=n_noisy, ood_sigma=opts.ood_sigma)
    return Magnetic2DEnv(MagneticConfig(episode_length=opts.episode_length), downstream=downstream, ood_sigma=opts.ood_sigma)


__all__ = [
    "ActionSpace", "ContextSpec", "Environment", "GroundTruthStructure", "StepResult", "Transition",
    "TrueDynamics", "ChemicalConfig", "ChemicalEnv", "chemical_graphs", "MagneticConfig",
    "Magnetic2DEnv", "magnetic_graphs", "make_env",
]
