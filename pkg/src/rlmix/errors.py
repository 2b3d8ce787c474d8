"""Exception hierarchy.

Every error carries a short machine-readable ``reason`` used by the CLI as
the line prefix and to pick the exit code.
"""


class RLMixError(Exception):
    reason = "error"
    exit_code = 3


class ParameterError(RLMixError, ValueError):
    reason = "parameter-error"
    exit_code = 2


class ConfigError(RLMixError, ValueError):
    reason = "config-error"
    exit_code = 2


class PreconditionError(RLMixError, ValueError):
    reason = "precondition-error"


class SolverError(RLMixError, RuntimeError):
    reason = "solver-error"

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class StiffnessError(SolverError):
    reason = "stiffness-error"


class ConditioningError(RLMixError, RuntimeError):
    """The eigenbasis is (nearly) defective; use the integrator instead."""

    reason = "conditioning-error"

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class SingularityError(RLMixError, ArithmeticError):
    reason = "singularity-error"


class DegenerateInputError(RLMixError, ValueError):
    reason = "degenerate-input"


class NoDarkStateError(RLMixError, ValueError):
    reason = "no-dark-state"


class HorizonError(RLMixError, RuntimeError):
    reason = "horizon-too-short"
    exit_code = 4

    def __init__(self, message, t_max=None):
        super().__init__(message)
        self.t_max = t_max


class InfeasibleRecipeError(RLMixError, ValueError):
    reason = "infeasible-recipe"
    exit_code = 4
