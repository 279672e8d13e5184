# Default hyperparameters for experiments
#
# Every value here is echoed into the resolved config written next to the
# results, so a run directory always records what was actually used.
# Change these to retune the engine globally; per-experiment overrides go in
# the JSON config instead.

# ------------------------------------------------------------
# Experiment protocol
# ------------------------------------------------------------
TRIALS = 3                 # independent trials per config, seed = base_seed + i
BASE_SEED = 0
INCLUDE_ROUND0 = True      # curve starts with the pre-acquisition evaluation
FULL_BASELINE = True       # also train once on the whole training set per dataset

# ------------------------------------------------------------
# Learner (feed-forward classifier)
# ------------------------------------------------------------
HIDDEN_LAYERS = [128]
DROPOUT_RATE = 0.3
EPOCHS = 30
LEARNING_RATE = 1e-3
OPTIMIZER = "adam"         # Options: "adam", "sgd"
TRAIN_BATCH_SIZE = 64
WEIGHT_INIT_SEED = 0
ACTIVATION = "relu"        # Options: "relu", "tanh"
MOMENTUM = 0.0             # sgd only
WEIGHT_DECAY = 0.0
STANDARDIZE = True         # per-feature mean/std taken from the training rows

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8

# Loss-prediction head
LOSS_HEAD_WIDTH = 16
LOSS_HEAD_LR = 1e-2        # head is always optimized with adam
LOSS_HEAD_WEIGHT = 1.0     # weight of the ranking loss while co-training
LOSS_MARGIN = 1.0          # margin of the pairwise ranking loss
LOSS_HEAD_EXTRA_EPOCHS = 20  # head-only epochs after features are frozen

# ------------------------------------------------------------
# Acquisition
# ------------------------------------------------------------
MC_PASSES = 10             # stochastic forward passes for dropout ensembles
CEAL_THRESHOLD = 1e-5      # entropy below this gets a pseudo label
PREFILTER_FACTOR = 10.0    # rho: candidates = ceil(rho * b)
EXPLOIT_EXPLORE_BETA = 1.0
PCA_DIM = 32               # kcenter projection width
HAC_CLUSTER_FRACTION = 0.1  # cluster_margin default: ceil(n / 10) clusters

# ------------------------------------------------------------
# Adversarial (basic iterative method)
# ------------------------------------------------------------
BIM_STEP = 0.05
BIM_MAX_STEPS = 50

# ------------------------------------------------------------
# Geometry
# ------------------------------------------------------------
KMEANS_MAX_ITER = 300
KMEANS_TOL = 1e-6

# ------------------------------------------------------------
# Metrics / ranking
# ------------------------------------------------------------
WIN_TIE_LOSS_MARGIN = 0.005

# Imbalanced subsampling ratios for a 10-class set (class 0 keeps 10%,
# class 9 keeps everything)
IMBALANCED_RATIOS = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
