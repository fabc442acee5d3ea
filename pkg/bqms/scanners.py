"""Small grammars for the command line."""

from typing import Dict, Iterable, Tuple

import parsley

from .util import ParseError, Tolerances

_grammar = parsley.makeGrammar("""
    key         = <letter (letterOrDigit | '_')*>
    sign        = '-' | '+'
    digits      = <digit+>
    mantissa    = <digits ('.' digit*)?> | <'.' digits>
    exponent    = <('e' | 'E') sign? digits>
    number      = <sign? mantissa exponent?>:n -> float(n)
    assignment  = ws key:k ws '=' ws number:v ws end -> (k, v)
""", {})


def tolerance(text: str) -> Tuple[str, float]:
    """Parses one `KEY=VAL` tolerance override.

    Raises:
        ParseError: with the column of the first character that does not fit"""
    try:
        return _grammar(text).assignment()
    except parsley.ParseError as e:
        line = text.count("\n", 0, e.position) + 1
        column = e.position - (text.rfind("\n", 0, e.position) + 1) + 1
        raise ParseError("cannot parse tolerance %r" % text, line, column)


def tolerances(texts: Iterable[str]) -> Dict[str, float]:
    """Parses every override, rejecting keys that are not tolerance fields."""
    out = {}
    for text in texts:
        k, v = tolerance(text)
        if k not in Tolerances.FIELDS:
            raise ParseError("unknown tolerance key %r (expected one of %s)"
                             % (k, ", ".join(Tolerances.FIELDS)), 1, 1)
        out[k] = v
    return out
