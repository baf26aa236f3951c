"""Published constants of the weak-supervision losses, kept in one table.

Everything that reads a loss constant (config defaults, LossWeights, tests)
goes through this module.
"""

N_CLOTH = 5
N_SAMPLED_POINTS = 196
QUERY_GRID_RESOLUTION = 21
EXISTENCE_THRESHOLD = 0.25

LAMBDA_DP = 1.0
LAMBDA_REG = 0.1
LAMBDA_EXIST = 0.01
LAMBDA_GENDER = 0.01

# keyed by ClothType.value
REG_ALPHA = {"upper": 1.0, "coat": 1.0, "pants": 1.0, "skirt": 1.0, "shoes": 0.1}
D_MAX = {"upper": 0.1, "coat": 0.1, "pants": 0.1, "skirt": 0.1, "shoes": 0.01}
TAU = {"upper": 0.03, "coat": 0.10, "pants": 0.03, "skirt": 0.03, "shoes": 0.03}

BCC_RADIUS = 0.03
PROB_EPS = 1e-7

LATENT_DIM = 18
SHOES_LATENT_DIM = 4
SHAPE_DIM = 10
JOINT_COUNT = 24

DEFAULT_ISO = 0.005
DEFAULT_RESOLUTION = 64
DEFAULT_ABDUCTION_DEG = 10.0
PART_VISIBILITY_MIN_PIXELS = 50

THICKNESS_MIN = 0.005
THICKNESS_RANGE = 0.02
