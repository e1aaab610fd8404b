"""tsrkit 的异常层级。

CLI 把所有 TsrKitError 视为领域错误（退出码 1），其余异常照常抛出。
"""
from typing import Any, Optional


class TsrKitError(Exception):
    """所有领域错误的基类。"""


class InvalidConfig(TsrKitError, ValueError):
    pass


# ---- 表格模型 ----

class InvalidGrid(TsrKitError):
    def __init__(self, report: Any):
        self.report = report
        lines = "; ".join(v.message for v in getattr(report, "violations", ()))
        super().__init__(f"invalid grid: {lines}")


class InvalidBBox(TsrKitError, ValueError):
    pass


class InvalidAnnotations(TsrKitError, ValueError):
    pass


# ---- OTSL ----

class OtslError(TsrKitError):
    """OTSL 诊断：携带违反的规则名与 (row, col) 位置。"""

    rule = "OtslError"

    def __init__(self, message: str, row: Optional[int] = None, col: Optional[int] = None):
        self.row = row
        self.col = col
        where = f" at ({row},{col})" if row is not None and col is not None else ""
        super().__init__(f"{self.rule}{where}: {message}")


class UnknownToken(OtslError):
    rule = "UnknownToken"


class RaggedRows(OtslError):
    rule = "RaggedRows"


class IllegalL(OtslError):
    rule = "IllegalL"


class IllegalU(OtslError):
    rule = "IllegalU"


class IllegalX(OtslError):
    rule = "IllegalX"


class EmptySequence(OtslError):
    rule = "EmptySequence"


class NonRectangularMerge(OtslError):
    rule = "NonRectangularMerge"


# ---- HTML ----

class HtmlTableError(TsrKitError):
    pass


class OverlappingSpans(HtmlTableError):
    pass


class RaggedTable(HtmlTableError):
    pass


class MalformedHtml(HtmlTableError):
    pass


# ---- TEDS ----

class BothEmpty(TsrKitError):
    pass


# ---- 数值部分 ----

class ShapeMismatch(TsrKitError, ValueError):
    pass


class EmptyD(TsrKitError):
    pass


class TargetOutOfRange(TsrKitError, IndexError):
    pass


class TooManyBoxes(TsrKitError):
    pass


class CountMismatch(TsrKitError):
    pass


class LengthMismatch(TsrKitError, ValueError):
    pass


class UnlabeledBox(TsrKitError):
    pass


class NoOverlap(TsrKitError):
    pass


class DegenerateSets(TsrKitError):
    pass


class NonFiniteComponent(TsrKitError):
    pass


class NonFiniteEvaluation(TsrKitError):
    pass


# ---- 合成语料 ----

class DimensionTooSmall(TsrKitError):
    pass


class InvalidMargin(TsrKitError, ValueError):
    pass


class SchemaViolation(TsrKitError):
    def __init__(self, message: str, line_no: Optional[int] = None):
        self.line_no = line_no
        prefix = f"line {line_no}: " if line_no is not None else ""
        super().__init__(prefix + message)


class IoFailure(TsrKitError, OSError):
    pass
