from core.dynamics.layout import FactoredLayout, VariableSpec
from core.dynamics.model import DynamicsModel, HeadOutput, Inference

__all__ = ["FactoredLayout", "VariableSpec", "DynamicsModel", "HeadOutput", "Inference"]
