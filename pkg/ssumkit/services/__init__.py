from .dictlearn import (
    DictionaryModel,
    PlantedSource,
    dict_update,
    expected_loss,
    lasso,
    online_dictionary_learning,
)
from .export import ExportFormat, ExportService
from .sg_variants import (
    SmoothProblem,
    l1_ssum_sg,
    projected_ssum_sg,
    sg_run,
    shrink,
    ssum_sg_model,
)

__all__ = [
    "DictionaryModel",
    "ExportFormat",
    "ExportService",
    "PlantedSource",
    "SmoothProblem",
    "dict_update",
    "expected_loss",
    "l1_ssum_sg",
    "lasso",
    "online_dictionary_learning",
    "projected_ssum_sg",
    "sg_run",
    "shrink",
    "ssum_sg_model",
]
