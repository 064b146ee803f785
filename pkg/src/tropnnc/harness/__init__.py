from tropnnc.harness.bounds_suite import run_bounds_suite
from tropnnc.harness.data import DatasetSplit, filter_classes, load_idx
from tropnnc.harness.experiment import ExperimentSpec, run_experiment
from tropnnc.harness.train import eval_accuracy, train_mlp
