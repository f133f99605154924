"""
Exception types raised by the training library, CLI and HTTP service.
"""
from typing import Optional


class DimensionError(ValueError):
    """Zero or mutually inconsistent matrix/vector dimensions"""


class MissingWeightsError(ValueError):
    """A variant needs weights the model state does not carry (e.g. R)"""


class ConfigError(ValueError):
    """Invalid run configuration coming from the CLI or the API"""


class TargetEncodingError(ValueError):
    """Targets are not one-hot where class labels are required"""


class CheckpointFormatError(ValueError):
    """Checkpoint bytes do not follow the BMVR0001 layout"""


class DatasetFormatError(ValueError):
    """Dataset file does not match its declared binary layout"""

    def __init__(self, message: str, path: Optional[str] = None, offset: Optional[int] = None):
        self.path = path
        self.offset = offset
        location = []
        if path:
            location.append(str(path))
        if offset is not None:
            location.append(f"byte offset {offset}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)


class NumericOverflowError(ArithmeticError):
    """A weight matrix picked up NaN/Inf entries"""

    def __init__(self, matrix: str, step: Optional[int] = None):
        self.matrix = matrix
        self.step = step
        message = f"non-finite values in {matrix}"
        if step is not None:
            message += f" at step {step}"
        super().__init__(message)


class DivergenceError(RuntimeError):
    """Training was aborted; carries the last state that evaluated cleanly"""

    def __init__(self, step: int, reason: str, last_good_state=None, last_good_step: Optional[int] = None,
                 checkpoint_path: Optional[str] = None):
        self.step = step
        self.reason = reason
        self.last_good_state = last_good_state
        self.last_good_step = last_good_step
        self.checkpoint_path = checkpoint_path
        super().__init__(f"training diverged at step {step}: {reason}")
