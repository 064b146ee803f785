"""Exception types shared by the library and mapped to CLI exit codes."""


class TropnncError(Exception):
    pass


class ShapeError(TropnncError, ValueError):
    """Tensor or layer shapes do not compose."""


class ModelFormatError(TropnncError, ValueError):
    """A model file is malformed."""


class UnsupportedTopologyError(TropnncError, ValueError):
    """The network layout cannot be handled by the requested operation."""


class DatasetError(TropnncError, ValueError):
    """A dataset file is malformed or inconsistent."""
