"""Exception hierarchy shared by every lpsim module."""


class LPError(Exception):
    """Base class for all lpsim errors."""


class OutOfBounds(LPError):
    pass


class EmptyRange(LPError):
    pass


class DegenerateAxis(LPError):
    pass


class InvalidOverlapRatio(LPError):
    pass


class OutsideExtent(LPError):
    pass


class ZeroWeight(LPError):
    pass


class ShapeMismatch(LPError):
    pass


class InvalidGrouping(LPError):
    pass


class ConfigError(LPError):
    pass


class WorkerFailure(LPError):
    """A simulated worker raised while denoising its sub-latent."""

    def __init__(self, worker_id: int, step: int, cause: BaseException):
        super().__init__(f"worker {worker_id} failed at step {step}: {cause!r}")
        self.worker_id = worker_id
        self.step = step
        self.cause = cause
