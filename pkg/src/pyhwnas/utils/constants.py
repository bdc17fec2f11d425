LAT_LOOKUP: str = "lat_lookup.txt"
ENER_LOOKUP: str = "ener_lookup.txt"
SEARCH_LOG: str = "search_log.csv"
SWEEP_CSV: str = "sweep.csv"
PARETO_CSV: str = "pareto.csv"
CHILDNET_FILE: str = "childnet.txt"
THETA_FILE_FORMAT: str = "theta_epoch_{}.txt"

NUM_BLOCKS: int = 9
SKIP_INDEX: int = NUM_BLOCKS - 1

# Floors applied before fractional powers and logs.
ENERGY_FLOOR: float = 1e-12
GUMBEL_CLAMP: float = 1e-12

SEARCH_LOG_COLUMNS: tuple[str, ...] = ("epoch", "phase", "tau", "ce", "lat", "ener", "total", "acc")
SWEEP_COLUMNS: tuple[str, ...] = (
    "model_id", "alpha", "beta", "gamma", "delta",
    "vlat", "vener", "dominance",
    "accuracy", "latency_s", "energy_j", "child_choices",
)
