"""Average-case reductions from planted dense subgraph to sparse PCA.

Subpackages and modules:

* ``core``: splittable randomness, sampling, linear algebra, matrix files
* ``instances``: graph and spiked covariance generators
* ``primitives``: cloning, submatrix embedding, rejection kernels, rotations
* ``pipelines``: clique-to-Wishart, subsampling rotations, sparsity cloning
* ``detectors``: baseline tests
* ``verify``: statistical checks of every distributional step
"""
from .errors import BudgetExceeded, HypothesisWarning, InvalidParameter, NotPositiveSemidefinite

__version__ = "0.1.0"

__all__ = [
    "BudgetExceeded",
    "HypothesisWarning",
    "InvalidParameter",
    "NotPositiveSemidefinite",
    "__version__",
]
