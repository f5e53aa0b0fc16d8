"""Regularized approximate value iteration with optimistic bonuses for
discounted tabular and linear-mixture MDPs."""

try:
    from ._core import *  # noqa: F401,F403  (installed wheel layout)
except ImportError:  # in-tree builds keep the module next to the build dir
    from _core import *  # noqa: F401,F403

__version__ = "0.1.0"
