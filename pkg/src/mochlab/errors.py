"""Exception types shared across the package."""


class MochError(Exception):
    """Base class for all errors raised by mochlab."""


class GridError(MochError, ValueError):
    """Invalid grid construction or mismatched grids."""


class NonFiniteFieldError(MochError, ValueError):
    """A field contains NaN or Inf samples."""


class ResolutionError(MochError, ValueError):
    """The grid cannot represent the requested construction."""


class BlockIndexError(MochError, IndexError):
    """A Littlewood-Paley block index is out of range."""


class DegenerateInputError(MochError, ValueError):
    """An operation needs a nonzero input and received zero."""


class ParameterError(MochError, ValueError):
    """A physical or numerical parameter violates its precondition."""


class BlowUpError(MochError, RuntimeError):
    """The time integration left the finite regime."""

    def __init__(self, message, t_last=None):
        super().__init__(message)
        self.t_last = t_last


class DiffeomorphismLost(MochError, RuntimeError):
    """The flow map stopped being increasing (y_xi <= 0)."""

    def __init__(self, message, t):
        super().__init__(message)
        self.t = t
