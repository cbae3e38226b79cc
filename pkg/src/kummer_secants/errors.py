"""Exception hierarchy shared by all modules."""


class KummerSecantError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(KummerSecantError, ValueError):
    pass


class NotSymmetric(ValidationError):
    pass


class ImaginaryPartNotPositiveDefinite(ValidationError):
    def __init__(self, smallest_eigenvalue):
        self.smallest_eigenvalue = float(smallest_eigenvalue)
        super().__init__(
            f"imaginary part of omega is not positive definite "
            f"(smallest eigenvalue {self.smallest_eigenvalue:.3e})"
        )


class RadiusCapExceeded(KummerSecantError):
    def __init__(self, needed, cap):
        self.needed = needed
        self.cap = cap
        super().__init__(f"tail bound needs radius {needed:.3f} > max_radius {cap:.3f}")


class OrderCeilingExceeded(KummerSecantError, ValueError):
    pass


class JetTooShallow(KummerSecantError, ValueError):
    pass


class ShapeMismatch(KummerSecantError, ValueError):
    pass


class AllCoordinatesVanish(KummerSecantError):
    pass


class DegenerateInput(KummerSecantError, ValueError):
    pass


class DuplicatePoints(DegenerateInput):
    pass


class ZeroDirection(DegenerateInput):
    pass


class LowerOrdersUnsolved(KummerSecantError):
    pass


class OrderUnsolvable(KummerSecantError):
    """Order ``s`` admits no solution within tolerance.

    This is a meaningful negative result. ``state`` carries the best
    least-squares candidate so callers can inspect it.
    """

    def __init__(self, order, residual, tol, state=None):
        self.order = order
        self.residual = residual
        self.tol = tol
        self.state = state
        super().__init__(f"order {order}: residual {residual:.3e} > tol {tol:.1e}")


class IllConditioned(KummerSecantError):
    def __init__(self, order, condition_number, state=None):
        self.order = order
        self.condition_number = condition_number
        self.state = state
        super().__init__(f"order {order}: condition number {condition_number:.3e} exceeds 1e12")


class SearchFailed(KummerSecantError):
    def __init__(self, message, result=None):
        self.result = result
        super().__init__(message)


class DegenerateIterate(KummerSecantError):
    pass


class NoPointsFound(KummerSecantError):
    def __init__(self, message, starts=None):
        self.starts = starts
        super().__init__(message)


class ParseError(KummerSecantError, ValueError):
    pass
