"""Exception hierarchy shared by every annolog module."""


class AnnologError(Exception):
    pass


# lattice
class ArityMismatch(AnnologError):
    pass


class DegenerateResult(AnnologError):
    pass


# parsing / ingestion
class ParseError(AnnologError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + where)


class RuleSyntaxError(ParseError):
    pass


class DisconnectedRule(ParseError):
    """A body clause shares no variable chain with the head."""


class DanglingEdge(AnnologError):
    pass


class BadAnnotation(AnnologError):
    pass


class RangeError(AnnologError):
    pass


class UnknownPredicate(AnnologError):
    pass


class UnboundAnnotationVariable(AnnologError):
    pass


class StaticHead(AnnologError):
    pass


# model
class UnknownType(AnnologError):
    pass


class UnknownAtom(AnnologError):
    pass


# engine
class StaticWriteAttempt(AnnologError):
    pass


class InconsistencyHalt(AnnologError):
    def __init__(self, key, current, incoming, t):
        self.key = key
        self.current = current
        self.incoming = incoming
        self.t = t
        super().__init__(
            f"inconsistent update at t={t} for {key}: current {current}, incoming {incoming}"
        )


class IterationCapExceeded(AnnologError):
    def __init__(self, t, cap, keys):
        self.t = t
        self.cap = cap
        self.keys = keys
        shown = ", ".join(map(str, keys[:10]))
        super().__init__(f"no fixpoint at t={t} within {cap} iterations; still changing: {shown}")


# trace
class ReplayDivergence(AnnologError):
    def __init__(self, index, entry, found):
        self.index = index
        self.entry = entry
        self.found = found
        super().__init__(f"replay diverged at entry {index}: expected old bound {entry.old_bound}, found {found}")


# synthetic data
class InvalidSpec(AnnologError):
    pass
