"""Nonseparable index, sparse networks and bounded fixed-effect support."""

from .bounded import BoundedState, bounded_recover, check_feasibility, interval_recursion
from .nonseparable import (PhiTable, check_diagonal_invariance, default_t_grid,
                           recover_nonseparable, resimulate_check, true_phi)
from .sparse import (KappaFit, SaturationCurve, SparseFit, SparseStudy, estimate_kappa,
                     recover_sparse, saturate, sparse_study)

__all__ = ["BoundedState", "bounded_recover", "check_feasibility", "interval_recursion",
           "PhiTable", "check_diagonal_invariance", "default_t_grid", "recover_nonseparable",
           "resimulate_check", "true_phi", "KappaFit", "SaturationCurve", "SparseFit",
           "SparseStudy", "estimate_kappa", "recover_sparse", "saturate", "sparse_study"]
