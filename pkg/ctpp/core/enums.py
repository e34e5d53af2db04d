from enum import Enum


class Mode(str, Enum):
    PROBABILISTIC = "probabilistic"
    PREDICTION = "prediction"


class KernelMode(str, Enum):
    FULL = "full"
    DEPTHWISE = "depthwise"


class TimeTransform(str, Enum):
    RAW = "raw"
    LOG1P = "log1p"


class Sampler(str, Enum):
    POISSON = "poisson"
    HAWKES = "hawkes"
    RENEWAL = "renewal"
    LOCAL = "local"
