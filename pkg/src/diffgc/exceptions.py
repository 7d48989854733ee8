"""Exception hierarchy. Every error raised on purpose by the package derives from DiffGCError."""


class DiffGCError(Exception):
    pass


class IngestionError(DiffGCError, ValueError):
    """Panel data is malformed (non-finite entries, wrong shape, unreadable file)."""


class InvalidModelError(DiffGCError, ValueError):
    pass


class InsufficientDataError(DiffGCError, ValueError):
    pass


class NearSingularError(DiffGCError, ValueError):
    def __init__(self, message, condition_number):
        super().__init__(message)
        self.condition_number = condition_number


class UnstableModelError(DiffGCError, ValueError):
    pass


class GenerationError(DiffGCError, RuntimeError):
    pass


class SolverDivergenceError(DiffGCError, RuntimeError):
    pass


class InvalidGramError(DiffGCError, ValueError):
    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class TuningError(DiffGCError, RuntimeError):
    pass


class InfeasibleError(DiffGCError, ValueError):
    def __init__(self, message, column, min_feasible_eta):
        super().__init__(message)
        self.column = column
        self.min_feasible_eta = min_feasible_eta


class SubsampleError(DiffGCError, ValueError):
    def __init__(self, message, index):
        super().__init__(message)
        self.index = index
