"""Differentiable pipeline: renderer, colour transforms, losses, training and experiments."""

from .diffcore import Parameter, backward, finite_diff_check
from .splat import Camera, GaussianCloud, RenderedPair, render_dual
from .trainer import Trainer, TrainingView, build_trainer, evaluate, render_novel
from .experiments import VARIANTS, Dataset, prepare_dataset, render_clean_views, run_comparison, train_and_evaluate
from .gradsuite import run_gradient_suite

__all__ = [
    "Parameter",
    "backward",
    "finite_diff_check",
    "Camera",
    "GaussianCloud",
    "RenderedPair",
    "render_dual",
    "Trainer",
    "TrainingView",
    "build_trainer",
    "evaluate",
    "render_novel",
    "VARIANTS",
    "Dataset",
    "prepare_dataset",
    "render_clean_views",
    "run_comparison",
    "train_and_evaluate",
    "run_gradient_suite",
]
