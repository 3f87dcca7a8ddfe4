"""Exception types shared across the engine.

Every error carries a machine-readable ``code`` so the HTTP layer can map it
to a structured {code, message, detail} payload without string matching.
"""


class GlensError(Exception):
    code = "internal"

    def __init__(self, message, detail=None):
        super().__init__(message)
        self.detail = detail or {}


class UnknownEnterprise(GlensError):
    code = "unknown_enterprise"


class InvalidInterval(GlensError):
    code = "invalid_interval"


class BadRange(GlensError):
    code = "bad_range"


class ParseError(GlensError):
    code = "parse_error"

    def __init__(self, table, row, column, reason):
        super().__init__(
            f"{table} row {row}, column {column!r}: {reason}",
            {"table": table, "row": row, "column": column, "reason": reason},
        )


class MissingTable(GlensError):
    code = "missing_table"


class InfeasibleConfig(GlensError):
    code = "infeasible_config"


class ConvergenceFailure(GlensError):
    code = "convergence_failure"


class NotNeighbours(GlensError):
    code = "not_neighbours"


class NotASpanner(GlensError):
    code = "not_a_spanner"


class NotAdjacent(GlensError):
    code = "not_adjacent"


class NotACut(GlensError):
    code = "not_a_cut"


class MissingFinancials(GlensError):
    code = "missing_financials"


class CycleBudgetExceeded(GlensError):
    code = "cycle_budget_exceeded"


class CensusBudgetExceeded(GlensError):
    code = "census_budget_exceeded"


class MatchBudgetExceeded(GlensError):
    code = "match_budget_exceeded"


class DisconnectedResult(GlensError):
    code = "disconnected_result"


class SizeCapExceeded(GlensError):
    code = "size_cap_exceeded"


class SpanTooShort(GlensError):
    code = "span_too_short"


class NoActiveLoan(GlensError):
    code = "no_active_loan"


class DegenerateLabels(GlensError):
    code = "degenerate_labels"


class SchemaMismatch(GlensError):
    code = "schema_mismatch"


class UnknownNode(GlensError):
    code = "unknown_node"


class UnknownEdge(GlensError):
    code = "unknown_edge"


class UnknownJob(GlensError):
    code = "unknown_job"


class UnknownSession(GlensError):
    code = "unknown_session"
