"""Loop-erased random walks, uniform spanning trees and random-walk loop soups on finite Markov chains."""

from .chain import CEMETERY, ChainSpec, build_chain, sample_exit_path
from .errors import LoopworksError
from .lerw import enumerate_lerw, lerw_prob, sample_lerw
from .linops import greens_bundle, poisson_kernel
from .paths import canonical_unrooted, loop_erase
from .rng import DEFAULT_SEED, stream
from .soup import Flavor, loop_measure, measure_total, sample_rooted_soup, sample_unrooted_soup
from .ust import count_spanning_trees, wilson_ust

__version__ = "0.1.0"
