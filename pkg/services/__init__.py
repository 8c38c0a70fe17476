from .benchmark import emit_report, run_benchmark
from .dataset_loader import builtin_specs, fetch_dataset, load_csv, stratified_kfold
from .explainer import export_rules, trace
from .gradcheck import finite_difference_gradcheck, run_gradcheck
from .trainer import TrainConfig, train, train_baseline_softmax_regression

__all__ = [
    'emit_report', 'run_benchmark',
    'builtin_specs', 'fetch_dataset', 'load_csv', 'stratified_kfold',
    'export_rules', 'trace',
    'finite_difference_gradcheck', 'run_gradcheck',
    'TrainConfig', 'train', 'train_baseline_softmax_regression',
]
