from .io import (
    LoadedCheckpoint,
    load_checkpoint,
    load_representations,
    report_lines,
    save_checkpoint,
    save_representations,
    write_report,
)
from .pipeline import (
    MethodMode,
    MethodRow,
    PipelineResult,
    RunReport,
    aggregate_runs,
    evaluate_runs,
    run_pipeline,
    stratified_half_split,
    train_modules,
    tune_lambda,
)

__all__ = [
    "LoadedCheckpoint",
    "load_checkpoint",
    "load_representations",
    "report_lines",
    "save_checkpoint",
    "save_representations",
    "write_report",
    "MethodMode",
    "MethodRow",
    "PipelineResult",
    "RunReport",
    "aggregate_runs",
    "evaluate_runs",
    "run_pipeline",
    "stratified_half_split",
    "train_modules",
    "tune_lambda",
]
