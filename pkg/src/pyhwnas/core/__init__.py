from .engine import SearchEngine
from .autodiff import Tensor, backward, conv2d, softmax_cross_entropy
from .childnet import ChildNetwork, childnet_cost, sample_childnet, train_childnet
from .costmodel import profile
from .models import (
    BlockConfig,
    ChildNet,
    CostTable,
    DeviceModel,
    EpochLog,
    LayerSpec,
    LossBreakdown,
    LossKnobs,
    MacroArch,
    ModelRecord,
    OptimizerConfig,
    SearchConfig,
    Serializable,
    Theta,
)
from .oracle import MicroSpace, enumerate_space, exact_expected_loss
from .searchspace import build_macro, candidate_blocks
from .streamer import Dataset, make_synthetic
from .supernet import Supernet, expected_cost, gumbel_softmax, sample_gumbel, total_loss
from .trainer import run_search, split_dataset, tau_at, theta_init
