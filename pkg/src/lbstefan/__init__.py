"""Lattice Boltzmann solvers for the two-phase Stefan problem.

Three enthalpy schemes are provided (EEBM, ILFBM, IREBM) together with the
closed-form similarity solution used to validate them.
"""

from lbstefan.analytic import AnalyticSolution, StefanCaseParams, solve_lambda
from lbstefan.lattice import DistributionField, LatticeDescriptor, make_lattice, moment
from lbstefan.schemes import SchemeConfig, SolverState

__all__ = [
    "AnalyticSolution",
    "DistributionField",
    "LatticeDescriptor",
    "SchemeConfig",
    "SolverState",
    "StefanCaseParams",
    "make_lattice",
    "moment",
    "solve_lambda",
]

__version__ = "0.1.0"
