SCHEMA_VERSION = 1

GRID_POINTS = 512
SNAPSHOTS = 64
TIME_HORIZON = 0.5
DT_PER_DX2 = 0.25  # default dt = dx^2 / 4

DELTA0 = 1.0
BOUND_K = 2.0

CUTOFF_M = 50.0
DIVERGENCE_LIMIT = 1.0e6
NEGATIVITY_FACTOR = 10.0
GENERATOR_SLACK = 1.0e-12

ZETA_SCALE = 1.0
ZETA_SAMPLES = 4096
DYADIC_TRUNCATION = 1.0e-14

KERNEL_X_MIN = 1.0e-6
KERNEL_X_MAX = 40.0
KERNEL_PER_DECADE = 40
KERNEL_REL_TOL = 1.0e-10

INTERIOR_MARGIN = 0.1
BOUNDARY_WINDOW = 0.05
LAG_OCTAVES = 4
TIME_LAG_OCTAVES = 4
MAX_DIVERGED_FRACTION = 0.05
NOISE_BLOCK = 256  # steps drawn per Philox block

HISTOGRAM_BINS = 20

# Flat experiment presets; user keys override these.
PRESETS = {
    "heat": {
        "a": [1.0],
        "b": [0.0],
        "c": [0.0],
        "xi": [0.0],
        "lam": 0.0,
        "u0": "sine",
        "T": 0.1,
        "noise_mode": "multiplicative",
    },
    "additive": {
        "a": [1.0],
        "b": [0.0],
        "c": [0.0],
        "xi": [1.0],
        "lam": 0.0,
        "u0": "zero",
        "T": 0.5,
        "noise_mode": "additive",
    },
    "linear": {
        "a": [1.0],
        "b": [0.0],
        "c": [0.0],
        "xi": [1.0],
        "lam": 0.0,
        "u0": "parabola",
        "T": 0.5,
        "noise_mode": "multiplicative",
    },
    "lambda025": {
        "a": [1.0],
        "b": [0.0],
        "c": [0.0],
        "xi": [1.0],
        "lam": 0.25,
        "u0": "parabola",
        "T": 0.5,
        "kappa": 0.3,
        "p": 32.0,
        "theta": 1.0,
        "noise_mode": "multiplicative",
    },
    "variable-coeff": {
        "a": [1.0, 0.2, -0.2],
        "b": [0.3, -0.6],
        "c": [-0.2],
        "xi": [0.8],
        "lam": 0.25,
        "u0": "parabola",
        "T": 0.25,
        "K": 4.0,
        "kappa": 0.3,
        "p": 32.0,
        "noise_mode": "multiplicative",
    },
}
