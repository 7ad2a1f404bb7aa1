"""kitgi: workbench for knowledge-ablation interpretability experiments."""

__version__ = "0.1.0"
