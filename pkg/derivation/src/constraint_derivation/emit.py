"""Byte-deterministic serialization of the generator table."""

import json
from fractions import Fraction
from math import gcd, lcm

from .derive import VARIABLES, SymbolicGenerator


def _normalized_terms(gen: SymbolicGenerator):
    """Clear denominators, divide by the content, make the first term positive.

    The result is the unique primitive integer representative of the
    generator, so the emitted bytes depend only on the polynomial itself and
    not on the RREF scaling it was derived with.
    """
    dens = [coef.denominator for _, coef in gen.terms]
    scale = lcm(*dens)
    nums = [int(coef * scale) for _, coef in gen.terms]
    content = gcd(*(abs(n) for n in nums))
    nums = [n // content for n in nums]
    if nums[0] < 0:
        nums = [-n for n in nums]
    return [{"exps": list(exps), "coef": str(Fraction(c))}
            for (exps, _), c in zip(gen.terms, nums)]


def table_dict(generators):
    """The GeneratorTable JSON document as a plain dict."""
    return {
        "variables": list(VARIABLES),
        "polynomials": [_normalized_terms(g) for g in generators],
        "scale_degrees": [list(g.bidegree()) for g in generators],
        "derivation": "rational-interpolation",
    }


def emit_table(generators, path):
    """Write the GeneratorTable JSON file; byte-deterministic for fixed input."""
    doc = table_dict(generators)
    with open(path, "w") as f:
        json.dump(doc, f, indent=None, separators=(',', ':'), sort_keys=True)
        f.write('\n')
    return path
