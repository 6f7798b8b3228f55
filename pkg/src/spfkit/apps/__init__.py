from ..translate import translate
from .continuous import MinResult, integrate, minimize_msf
from .csp import Constraint, CspInstance, CspResult, csp_from_json, csp_to_json, csp_to_spf, solve_csp
from .logic import (
    Cnf,
    DimacsError,
    SatNumberResult,
    SatResult,
    clauses_satisfied,
    cnf_to_spf,
    max_sat,
    model_count,
    parse_dimacs,
    sat,
)
from .prob import MpeResult, augment_selective, mpe, probability_of_evidence
