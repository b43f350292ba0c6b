"""fdq: mine functional dependencies, keep them, and query with them."""

from .errors import (
    ContractError,
    FdqError,
    IngestError,
    KindMismatchError,
    NameResolutionError,
    ParameterError,
    ParseError,
    SchemaError,
    UnsupportedOperationError,
)
from .relation import (
    AttributeMeta,
    Comparison,
    And,
    Not,
    Or,
    Relation,
    TRUE,
    eval_row_predicate,
    load_csv,
)
from .partition import (
    FDCandidate,
    PLI,
    build_pli,
    error_measure,
    fd_holds,
    intersect,
    pli_of,
)
from .result import ResultTable
from .fdstore import (
    FDEntry,
    FDSet,
    attr_closure,
    diff_fdsets,
    eval_fdml,
    import_fdset,
    is_implied,
    load_fdset,
    parse_fdml,
    save_fdset,
)
from .miner import (
    CFD,
    MiningSpec,
    brute_force_mine,
    cfd_confidence,
    cfd_support,
    execute_minefd,
    mine_fds,
    parse_minefd,
)
from .query import (
    ExtendedSelect,
    FdPredicate,
    PatternTableau,
    condition_to_tableau,
    eval_dependent,
    eval_holds,
    eval_not_holds,
    eval_violates,
    execute,
    parse_extended_select,
    select_to_text,
    tableau_match_rows,
)
from .cli import Session, render, run_command

__all__ = [name for name in dir() if not name.startswith("_")]
