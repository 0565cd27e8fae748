"""Dense-network training engine and weight-Gram diagnostics."""
from .errors import GramLabError
from .nn import Network, backward, forward, init_network
from .optim import OptimizerState, step

__version__ = "0.1.0"
__all__ = ["GramLabError", "Network", "OptimizerState", "backward", "forward", "init_network", "step", "__version__"]
