class Config:
    # Training defaults for the 768-dim class-token corpus
    EXPANSION_FACTOR = 64
    LR_MAX = 5e-5
    LAMBDA_MAX = 8e-3
    STEPS = 200_000
    BATCH_SIZE = 2048
    LR_WARMUP_FRAC = 0.01
    LR_WARMDOWN_FRAC = 0.20
    L1_WARMUP_FRAC = 0.05
    ADAM_BETA1 = 0.9
    ADAM_BETA2 = 0.999
    ADAM_EPS = 1e-8

    # Rows per chunk in batched passes; fixed so reductions never depend on thread count
    CHUNK_ROWS = 256

    GRAD_CHECK_STEP = 1e-6
    GRAD_CHECK_TOLERANCE = 1e-5
    GRAD_CHECK_REL_FLOOR = 1e-3
    GRAD_CHECK_KINK_MARGIN = 1e-4

    UNIT_NORM_TOLERANCE = 1e-10

    TOP_K = 10
    DESCRIBE_RETRIES = 2
    MAX_PRIOR_REPORTS = 3
    ACTIVE_TAU = 0.0
    INTERVENTION_BETA = 15.0
