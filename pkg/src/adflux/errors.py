"""Exception types shared across the solver stack."""


class AssemblyError(Exception):
    """Raised when the coefficient data is invalid at assembly time."""


class SolverError(Exception):
    """Linear solver failed to reach the requested tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class CompatibilityError(Exception):
    """Local right-hand side violates the solvability condition."""

    def __init__(self, element, defect):
        super().__init__(
            f"compatibility violated on element {element}: sum(b) = {defect:.3e}"
        )
        self.element = element
        self.defect = defect


class SingularLocalSystemError(Exception):
    """Reduced 2x2 local system is numerically singular."""

    def __init__(self, element):
        super().__init__(f"singular local system on element {element}")
        self.element = element


class GummelError(Exception):
    """Outer drift-diffusion iteration failed to converge."""

    def __init__(self, message, increment=None):
        super().__init__(message)
        self.increment = increment
