"""Interactive small-step abstract state machines.

Parse guarded rule programs, evaluate them against states and pre-ordered
reply histories, run steps against environments, property-check the semantic
laws, and synthesize an equivalent program from a black-box behavioral oracle.
"""

from .model import (
    AsmError,
    ExternalVocabulary,
    History,
    Query,
    Structure,
    SymbolInfo,
    Template,
    Update,
    UpdateSet,
    Vocabulary,
    apply_iso,
    canonical_json,
    instantiate_template,
    mk_history,
    prefix,
)
from .semantics import Evaluator, GuardResult, RuleOutcome, TermResult, Verdict, eval_guard, eval_rule, eval_term
from .syntax import (
    Diagnostic,
    ParseError,
    Program,
    desugar,
    desugar_program,
    parse_program,
    pretty_program,
    validate,
)
from .engine import (
    Environment,
    EnvironmentViolation,
    RandomEnvironment,
    ScriptedEnvironment,
    StepResult,
    StepVerdict,
    apply_updates,
    is_coherent,
    is_complete,
    issued,
    pending,
    run,
    step,
)

__all__ = [name for name in dir() if not name.startswith("_")]
