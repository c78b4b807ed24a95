"""
Grammars of the model (.pop) and property (.prop) languages
"""
import logging
from functools import lru_cache
from typing import Iterable, List, Union

from lark import Lark, Token, Tree
from lark.exceptions import UnexpectedCharacters, UnexpectedInput, UnexpectedToken

from src.errors import DslSyntaxError

logger = logging.getLogger(__name__)

COMMON_GRAMMAR = r"""
    name_list: NAME (","? NAME)*

    _NOT: "!" | "~"
    NAME: /[A-Za-z_][A-Za-z0-9_]*/
    NUMBER: /\d+(\.\d*)?([eE][+-]?\d+)?|\.\d+([eE][+-]?\d+)?/
    COMMENT: /#[^\n]*/

    %import common.WS
    %ignore WS
    %ignore COMMENT
"""

MODEL_GRAMMAR = r"""
    start: statement*

    ?statement: "model" NAME ";"                                        -> model_name
              | ("state" | "states") name_list ";"                      -> states
              | ("param" | "params") param ("," param)* ";"             -> params
              | "population" NAME "=" expr ";"                          -> population
              | "local" move ("," move)* ";"                            -> local
              | ("trans" | "transition") NAME ":" sync ("," sync)* "@" expr ";"  -> transition
              | "init" assignment ("," assignment)* ";"                 -> init

    param: NAME "=" expr
    assignment: NAME "=" expr
    sync: multiplicity? move
    multiplicity: NUMBER "*"?
    ?move: NAME "->" NAME                   -> plain_move
         | NAME "-" NAME "->" NAME          -> labelled_move

    ?expr: product
         | expr "+" product                 -> add
         | expr "-" product                 -> sub
    ?product: unary
            | product "*" unary             -> mul
            | product "/" unary             -> div
    ?unary: power
          | "-" unary                       -> neg
          | "+" unary
    ?power: atom
          | atom ("^" | "**") exponent      -> pow
    !exponent: "-"? NUMBER
    ?atom: NUMBER                           -> number
         | NAME                             -> symbol
         | "(" expr ")"                     -> group
""" + COMMON_GRAMMAR

PROPERTY_GRAMMAR = r"""
    start: statement*

    ?statement: "label" NAME "=" name_list ";"                          -> label
              | "dta" NAME "{" dta_item* "}"                            -> dta
              | "csl" NAME "=" csl ";"                                  -> csl_def
              | "global" NAME "=" glob ";"                              -> global_def
              | "check" NAME ";"                                        -> check

    ?dta_item: "init" NAME ";"                                          -> dta_init
             | "final" name_list ";"                                    -> dta_final
             | ("states" | "locations") name_list ";"                   -> dta_states
             | "props" name_list ";"                                    -> dta_props
             | "actions" name_list ";"                                  -> dta_actions
             | "edge" NAME "->" NAME "on" NAME guard? clock_guard? ";"  -> dta_edge

    guard: "when" sform
    clock_guard: "if" clock

    ?sform: sform_and
          | sform "|" sform_and             -> s_or
    ?sform_and: s_unary
              | sform_and "&" s_unary       -> s_and
    ?s_unary: _NOT s_unary                  -> s_not
            | "(" sform ")"
            | "true"                        -> s_true
            | "false"                       -> s_false
            | NAME                          -> s_name

    ?clock: clock_and
          | clock "|" clock_and             -> c_or
    ?clock_and: c_unary
              | clock_and "&" c_unary       -> c_and
    ?c_unary: _NOT c_unary                  -> c_not
            | "(" clock ")"
            | "true"                        -> c_true
            | "x" cmp number (cmp number)?  -> c_right
            | number cmp "x" (cmp number)?  -> c_left

    ?csl: csl_and
        | csl "|" csl_and                   -> csl_disj
    ?csl_and: csl_unary
            | csl_and "&" csl_unary         -> csl_conj
    ?csl_unary: _NOT csl_unary              -> csl_neg
              | "(" csl ")"
              | "true"                      -> csl_true
              | "false"                     -> csl_false
              | "P" "[" "<=" number "]" cmp number "(" application ")"  -> csl_prob
              | application
    application: NAME ("[" (csl ("," csl)*)? "]")?

    ?glob: glob_and
         | glob "|" glob_and                -> glob_disj
    ?glob_and: glob_unary
             | glob_and "&" glob_unary      -> glob_conj
    ?glob_unary: _NOT glob_unary            -> glob_neg
               | "(" glob ")"
               | "true"                     -> glob_true
               | "false"                    -> glob_false
               | "Pr" cmp number "(" frac_kind "(" csl "," number ")" threshold ")"  -> glob_threshold
               | NAME                       -> glob_ref
    !frac_kind: "frac" | "count"
    ?threshold: "in" "[" number "," number "]"  -> in_interval
              | cmp number                      -> one_sided

    !cmp: "<" | "<=" | ">" | ">="
    number: NUMBER ("/" NUMBER)?
""" + COMMON_GRAMMAR

GRAMMARS = {
    'model': MODEL_GRAMMAR,
    'property': PROPERTY_GRAMMAR,
}


@lru_cache(maxsize=None)
def get_parser(language: str) -> Lark:
    """LALR parser of one language, built once per process."""
    logger.debug(f"Building {language} parser")
    return Lark(GRAMMARS[language], parser='lalr', propagate_positions=True,
                maybe_placeholders=False)


def syntax_error(message: str, where: Union[Token, Tree]) -> DslSyntaxError:
    """DslSyntaxError positioned at a token or at the start of a subtree."""
    if isinstance(where, Tree):
        meta = where.meta
        return DslSyntaxError(message, getattr(meta, 'line', 0), getattr(meta, 'column', 0))
    return DslSyntaxError(message, where.line, where.column)


def _describe(parser: Lark, expected: Iterable[str]) -> str:
    shown: List[str] = []
    for name in sorted(expected):
        try:
            pattern = parser.get_terminal(name).pattern
        except KeyError:
            shown.append(name.lower())
            continue
        shown.append(f"'{pattern.value}'" if pattern.type == 'str' else name.lower())
    if len(shown) > 8:
        shown = shown[:8] + ['...']
    return ', '.join(shown)


def parse_source(language: str, text: str) -> Tree:
    """
    Parse source text of ``language`` ('model' or 'property').

    Raises:
        DslSyntaxError: with the line and column of the offending input
    """
    parser = get_parser(language)
    try:
        return parser.parse(text)
    except UnexpectedCharacters as e:
        raise DslSyntaxError(f"unexpected character {e.char!r}", e.line, e.column) from None
    except UnexpectedToken as e:
        if e.token.type == '$END':
            line = text.count('\n') + 1
            column = len(text) - text.rfind('\n')
            found = 'end of input'
        else:
            line, column = e.line, e.column
            found = f"'{e.token}'"
        raise DslSyntaxError(f"unexpected {found} (expected {_describe(parser, e.expected)})",
                             line, column) from None
    except UnexpectedInput as e:
        raise DslSyntaxError(str(e).strip().splitlines()[0], max(e.line, 1),
                             max(e.column, 1)) from None


def names(tree: Tree) -> List[str]:
    """Names of a ``name_list`` subtree."""
    return [str(token) for token in tree.children]
