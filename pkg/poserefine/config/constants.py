from enum import IntEnum


class ExitCode(IntEnum):
    SUCCESS = 0
    INPUT_ERROR = 2
    NUMERICAL_ERROR = 3
    GRADCHECK_FAILED = 4


MANIFEST_NAME = "manifest.json"
GRADCHECK_TOLERANCE = 1e-4
# entries sampled per parameter tensor by the gradcheck command
GRADCHECK_MAX_ENTRIES = 20
CONFIG_SECTIONS = ("lifting", "prior", "regressor", "synth")
