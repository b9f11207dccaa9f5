"""Exception hierarchy shared by every geolab module."""

from __future__ import annotations


class GeolabError(Exception):
    """Base class; the CLI maps any subclass to exit code 1."""

    kind = "error"

    def to_dict(self) -> dict:
        return {"error": self.kind, "message": str(self)}


class ExprSyntaxError(GeolabError, ValueError):
    kind = "syntax_error"

    def __init__(self, message: str, offset: int, text: str = ""):
        self.offset = offset
        self.text = text
        super().__init__(f"{message} at offset {offset}")

    def to_dict(self) -> dict:
        return {**super().to_dict(), "offset": self.offset}


class UnknownIdentifierError(ExprSyntaxError):
    kind = "unknown_identifier"


class UnknownFunctionError(ExprSyntaxError):
    kind = "unknown_function"


class DomainError(GeolabError, ArithmeticError):
    """Evaluation left the real domain of some subexpression."""

    kind = "domain_error"

    def __init__(self, message: str, subexpression: str = ""):
        self.subexpression = subexpression
        text = message if not subexpression else f"{message} in '{subexpression}'"
        super().__init__(text)

    def to_dict(self) -> dict:
        return {**super().to_dict(), "subexpression": self.subexpression}


class SingularMetricError(GeolabError, ValueError):
    kind = "singular_metric"


class SignatureError(GeolabError, ValueError):
    kind = "signature_mismatch"


class DegeneratePlaneError(GeolabError, ValueError):
    kind = "degenerate_plane"


class ChartShapeError(GeolabError, ValueError):
    kind = "chart_shape"


class FrameError(GeolabError, RuntimeError):
    """Frame construction failed; ``node`` is the offending grid index."""

    kind = "frame_error"

    def __init__(self, message: str, node: int | None = None):
        self.node = node
        super().__init__(message if node is None else f"{message} (grid node {node})")

    def to_dict(self) -> dict:
        return {**super().to_dict(), "node": self.node}


class GridError(GeolabError, ValueError):
    kind = "grid_error"


class ClosednessError(GeolabError, ValueError):
    kind = "not_closed"

    def __init__(self, message: str, asymmetry: float):
        self.asymmetry = asymmetry
        super().__init__(f"{message} (asymmetry {asymmetry:.3e})")

    def to_dict(self) -> dict:
        return {**super().to_dict(), "asymmetry": self.asymmetry}


class SpecFileError(GeolabError, ValueError):
    kind = "spec_error"

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + where)

    def to_dict(self) -> dict:
        return {**super().to_dict(), "line": self.line, "column": self.column}
