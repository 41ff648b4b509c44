# Bump SCHEMA_VERSION whenever a report field or a recorded value below changes.
SCHEMA_VERSION = "1.1"

SUITE_MANIFEST = (
    "commutator",
    "decomposition",
    "toeplitz_product",
    "sat_defect",
    "esshank_expansion",
    "esstoep_identity",
    "esshank_identity",
    "hankel_step_zero",
    "integral_rules",
    "sat_identity",
    "sg_step_identity",
)

SCENARIO_MANIFEST = (
    "cesaro-volterra",
    "sg-polynomial",
    "hilbert-matrix",
    "volterra-classical",
    "log-alpha-volterra",
    "rotated-cesaro",
)

# relative error allowed between the float path and the rational oracle
ORACLE_AGREEMENT_TOL = 1e-12

# Frozen regression values, recorded once with the dense-SVD path and
# compared within RECORDED_REL_TOL.
RECORDED_REL_TOL = 0.02

# uniform metric ||S*^n V_g S^n|| by n, g = -log(1-z), 1024x1024 window
CESARO_UNIFORM_METRIC = {0: 1.749, 8: 1.432, 32: 1.232, 64: 1.099}
# tail norm ||V_g (I - P_127)||, g = -log(1-z), 512x512 window
CESARO_TAIL_AT_128 = 0.6795
# tail norm of V_g - S V_g S at cut 128, g = -log(i-z), 512x512 window
LOG_ALPHA_I_HANKEL_TAIL_AT_128 = 1.3554
# tail norms of V_g - S V_g S on cuts 8..128, g = -log(1-z), 512x512 window.
# They decay like 1/n, so the compact_like verdict comes from the rate.
CESARO_HANKEL_DEFECT_TAILS = (0.178, 0.100, 0.0544, 0.0286, 0.0148)
CESARO_HANKEL_DEFECT_RATE = -0.899


def matches_recorded(value: float, recorded: float) -> bool:
    return abs(value - recorded) <= RECORDED_REL_TOL * abs(recorded)
