"""lrlab: a desk-scale laboratory for learning-rate policies.

Triangular cyclical schedules (with optional per-cycle shrink), warmup +
inverse-sqrt and constant baselines, an lr range test with automatic bound
selection, momentum-SGD/Adam, seeded synthetic tasks with hand-coded
gradients, and PCA-based trajectory/loss-surface analysis, all wired into a
reproducible experiment harness with a CLI.
"""

from .harness import (
    ConfigError,
    RunConfig,
    TrainingRun,
    batch_sweep,
    compare_policies,
    run_name,
    train,
    verify_run,
)
from .landscape import build_trajectory_matrix, loss_surface_grid, pca_project
from .optimizers import AdamState, DivergenceError, SgdState, adam_step, sgd_step
from .range_test import (
    LrBounds,
    RangeTestCurve,
    RangeTestError,
    run_range_test,
    select_lr_bounds,
)
from .schedules import (
    ClrPolicy,
    ConstantPolicy,
    InvPolicy,
    clr_lr,
    inv_lr,
    validate_step_size,
)
from .tasks import (
    LogisticTask,
    PlateauTask,
    QuadraticTask,
    TinyAttentionTask,
    eval_grad,
    eval_loss,
    gd_stability_threshold,
    gradient_check,
    make_task,
)

__version__ = "0.1.0"
