from ._tmpinn import (
    System,
    TaylorSurrogate,
    TrainedModel,
    TrainingDiverged,
    __version__,
    last_losses,
    list_systems,
    train,
)

__all__ = [
    "System",
    "TaylorSurrogate",
    "TrainedModel",
    "TrainingDiverged",
    "last_losses",
    "list_systems",
    "train",
]
