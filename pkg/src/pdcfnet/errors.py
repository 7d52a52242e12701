class DataError(Exception):
    """Missing, unmatched or undecodable input data."""


class NumericalError(Exception):
    """A loss or gradient became non-finite."""


class CheckpointError(Exception):
    pass


class VersionMismatch(CheckpointError):
    pass


class TruncatedPayload(CheckpointError):
    pass


class ShapeMismatch(CheckpointError):
    pass


class ConfigMismatch(CheckpointError):
    pass
