from .checkpoint import (CheckpointError, CheckpointVersionError, MalformedCheckpointError,
                         domain_mismatch, load_checkpoint, save_checkpoint)
from .loss import (CollocationSet, InvalidCollocationError, LossTerms, data_gradient, generate_collocation,
                   loss_terms, param_gradient, pde_residual)
from .network import Activation, Jet2, Mlp, forward, forward_jet, init_kaiming
from .optim import AdamState, adam_step
from .propagator import NetworkPropagator, nn_coarse_propagate
from .training import (LossReport, SupervisedData, TrainConfig, TrainingDivergedError,
                       fine_solution_samples, holdout_split, train, train_supervised)
