from .sessions import (AggregateReport, EvalItem, EvalSession, SessionStore,
                       SystemTally, aggregate, create_session)

__all__ = ["AggregateReport", "EvalItem", "EvalSession", "SessionStore",
           "SystemTally", "aggregate", "create_session"]
