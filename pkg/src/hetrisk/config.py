from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    symmetry: float = 1e-10
    psd_floor: float = -1e-10
    reconstruction: float = 1e-8
    max_condition: float = 1e12
    null_prec: float = 1e-10
    log_floor: float = 1e-12
    # early stopping in the nested builder
    well_conditioned: float = 1e8


TOL = Tolerances()

FLOAT_DIGITS = 17
TRADING_DAYS = 252
