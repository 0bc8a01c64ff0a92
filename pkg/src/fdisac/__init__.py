"""Globally optimal timeslot allocation and beam selection for full-duplex ISAC.

The solver maximizes downlink throughput over a horizon of timeslots while
guaranteeing a worst-case sensing SINR under a bounded residual
self-interference factor. The nonconvex problem is rewritten as an exact
MILP (``fdisac.milp``) and solved by a structured decomposition, a
branch-and-bound search on the MILP rows, and brute-force enumeration
(``fdisac.solver``).
"""

from fdisac.beams import ArrayGeometry, Codebook, Codeword, build_codebook, make_codeword, steering_vector
from fdisac.channels import (
    ChannelSet,
    CommChannelParams,
    SensingParams,
    SiUncertainty,
    build_channel_set,
    residual_si,
    rician_channel,
    sensing_outer,
    si_channel,
    uma_pathloss_db,
)
from fdisac.metrics import SlotAssignment, comm_rate_bits, evaluate_schedule, robust_sinr_feasible, sensing_sinr
from fdisac.milp import CoefficientTable, MilpModel, assignment_to_point, build_milp, export_lp, precompute
from fdisac.solver import Solution, certify, solve_branch_bound, solve_bruteforce, solve_structured

__version__ = "0.1.0"
