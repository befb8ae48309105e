"""
Gurarii Toolkit - Exact Text Codec

Parses and formats magnitudes, scalars, spaces, vectors, subspaces and maps
in their exact text grammars, and serializes certificates.
"""

import dataclasses
import json
import re
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple

from sympy import isprime

from config import TOOL_VERSION, Backend
from errors import GrammarError, GurariiError, InvalidInput
from magnitude import ONE, ZERO, Coset, Magnitude
from scalar import FieldDescriptor, HahnScalar, PadicScalar, Scalar
from space import LinearMap, Subspace, Vector, WeightedSpace


_INT = r"-?\d+"
_RATIONAL_RE = re.compile(rf"^({_INT})(?:/(\d+))?$")
_TERM_RE = re.compile(rf"^(\d+)\^({_INT}(?:/\d+)?)$")
_TAIL_RE = re.compile(r"^O\(t\^\(?([^()]+)\)?\)$")
_MONOMIAL_RE = re.compile(r"^(?:(.+)\*)?(-)?t(?:\^\(?([^()]+)\)?)?$")


def _rational(text: str, lowest_terms: bool = True) -> Fraction:
    match = _RATIONAL_RE.match(text)
    if not match:
        raise GrammarError(f"not a rational: {text!r}")
    numerator = int(match.group(1))
    denominator = int(match.group(2)) if match.group(2) is not None else 1
    if denominator == 0:
        raise GrammarError(f"zero denominator in {text!r}")
    value = Fraction(numerator, denominator)
    if lowest_terms and match.group(2) is not None and (value.denominator != denominator or denominator == 1):
        raise GrammarError(f"rational {text!r} is not in lowest terms")
    return value


def _magnitude(text: str) -> Magnitude:
    if text == "0":
        return ZERO
    if text == "1":
        return ONE
    if "^" not in text:
        value = _rational(text, lowest_terms=False)
        if value <= 0:
            raise GrammarError(f"magnitude literal must be positive: {text!r}")
        return Magnitude.of(value)
    items = []
    previous = 1
    for term in text.split("*"):
        match = _TERM_RE.match(term)
        if not match:
            raise GrammarError(f"bad magnitude term {term!r} in {text!r}")
        prime = int(match.group(1))
        exponent = _rational(match.group(2))
        if not isprime(prime) or prime <= previous:
            raise GrammarError(f"bases must be primes in ascending order: {text!r}")
        if exponent == 0:
            raise GrammarError(f"zero exponent in {text!r}")
        items.append((prime, exponent))
        previous = prime
    return Magnitude.from_factors(items)


def _hahn(text: str, f: FieldDescriptor) -> HahnScalar:
    if text == "0":
        return HahnScalar((), None, f.prime)
    coeffs: Dict[Fraction, Fraction] = {}
    tail = None
    parts = text.split("+")
    for i, part in enumerate(parts):
        if not part:
            raise GrammarError(f"empty term in {text!r}")
        tail_match = _TAIL_RE.match(part)
        if tail_match:
            if i != len(parts) - 1:
                raise GrammarError(f"tail marker must come last: {text!r}")
            tail = _rational(tail_match.group(1))
            continue
        monomial = _MONOMIAL_RE.match(part)
        if monomial:
            coeff = _rational(monomial.group(1)) if monomial.group(1) else Fraction(1)
            if monomial.group(2):
                coeff = -coeff
            exponent = _rational(monomial.group(3)) if monomial.group(3) else Fraction(1)
        else:
            coeff, exponent = _rational(part), Fraction(0)
        coeffs[exponent] = coeffs.get(exponent, Fraction(0)) + coeff
    if tail is not None and any(e >= tail for e in coeffs):
        raise GrammarError(f"term at or beyond the O(t^{tail}) tail in {text!r}")
    terms = tuple((c, e) for e, c in sorted(coeffs.items()) if c != 0)
    return HahnScalar(terms, tail, f.prime)


def _scalar(text: str, f: FieldDescriptor) -> Scalar:
    if not isinstance(text, str) or not text or any(ch.isspace() for ch in text):
        raise GrammarError(f"scalar must be a string without whitespace: {text!r}")
    if f.backend == Backend.PADIC:
        return PadicScalar(_rational(text), f.prime)
    return _hahn(text, f)


def _field(obj: Any, overrides: Optional[Dict[str, Any]] = None) -> FieldDescriptor:
    data = dict(obj or {})
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    try:
        backend = Backend(data.get("backend", "padic"))
    except ValueError:
        raise GrammarError(f"unknown backend {data.get('backend')!r}")
    prime = data.get("prime")
    if not isinstance(prime, int) or not isprime(prime):
        raise GrammarError(f"field prime must be a prime integer, got {prime!r}")
    tail = data.get("tail_order")
    if tail is None:
        return FieldDescriptor(backend, prime)
    return FieldDescriptor(backend, prime, _rational(str(tail), lowest_terms=False))


def _require(obj: Any, key: str, kind: type) -> Any:
    if not isinstance(obj, dict) or key not in obj or not isinstance(obj[key], kind):
        raise GrammarError(f"expected an object with a {kind.__name__} field {key!r}")
    return obj[key]


def _space(obj: Any, overrides: Optional[Dict[str, Any]] = None) -> WeightedSpace:
    f = _field(obj.get("field") if isinstance(obj, dict) else None, overrides)
    weights = [_magnitude(w) for w in _require(obj, "weights", list)]
    if any(w.zero for w in weights):
        raise GrammarError("weights must be nonzero")
    return WeightedSpace(f, tuple(weights))


def _vector(space: WeightedSpace, arr: Any) -> Vector:
    if not isinstance(arr, list):
        raise GrammarError(f"vector must be an array of scalar strings, got {arr!r}")
    return space.vector([_scalar(c, space.field) for c in arr])


def _vectors(space: WeightedSpace, arr: Any) -> List[Vector]:
    if isinstance(arr, dict) and "span" in arr:
        arr = arr["span"]
    if not isinstance(arr, list):
        raise GrammarError("expected an array of vectors")
    return [_vector(space, v) for v in arr]


def _map(domain: WeightedSpace, codomain: WeightedSpace, obj: Any) -> LinearMap:
    base = _vectors(domain, _require(obj, "base", list))
    images = _vectors(codomain, _require(obj, "images", list))
    return LinearMap(base, images, codomain, domain)


# ==================== Formatting ====================

def format_magnitude(m: Magnitude) -> str:
    return str(m)


def format_scalar(a: Scalar) -> str:
    return str(a)


def format_vector(v: Vector) -> List[str]:
    return [str(c) for c in v.coords]


def format_space(space: WeightedSpace) -> Dict[str, Any]:
    return {"field": space.field.to_dict(), "weights": [str(w) for w in space.weights]}


def format_subspace(subspace: Subspace) -> Dict[str, Any]:
    return {"span": [format_vector(v) for v in subspace.vectors]}


def format_map(L: LinearMap) -> Dict[str, Any]:
    return {
        "base": [format_vector(b) for b in L.base],
        "images": [format_vector(y) for y in L.images],
    }


def to_plain(value: Any) -> Any:
    """Certificate fields as JSON-ready values in the exact grammars"""
    if isinstance(value, (Magnitude, PadicScalar, HahnScalar, Coset, Fraction)):
        return str(value)
    if isinstance(value, Vector):
        return format_vector(value)
    if isinstance(value, WeightedSpace):
        return format_space(value)
    if isinstance(value, Subspace):
        return format_subspace(value)
    if isinstance(value, LinearMap):
        return format_map(value)
    if isinstance(value, FieldDescriptor):
        return value.to_dict()
    if isinstance(value, Enum):
        return value.value
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {
            f.name: to_plain(getattr(value, f.name))
            for f in dataclasses.fields(value)
            if not f.name.startswith("_")
        }
    if isinstance(value, dict):
        return {str(to_plain(k)): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    return value


def certificate_to_json(cert: Any, field: Optional[FieldDescriptor] = None) -> Dict[str, Any]:
    payload = {"tool_version": TOOL_VERSION}
    if field is not None:
        payload["field"] = field.to_dict()
    payload["kind"] = type(cert).__name__
    body = to_plain(cert)
    if isinstance(body, dict):
        payload.update(body)
    else:
        payload["value"] = body
    return payload


def dumps(payload: Any) -> str:
    return json.dumps(payload, indent=2, sort_keys=False)


# ==================== Engine ====================

class ExactCodec:
    """Text front end with parse statistics"""

    def __init__(self):
        self.stats = {
            'parsed': 0,
            'grammar_errors': 0,
            'schema_errors': 0,
        }

    def _attempt(self, parser, *args) -> Tuple[Optional[Any], Optional[Exception]]:
        try:
            value = parser(*args)
        except GrammarError as e:
            self.stats['grammar_errors'] += 1
            return None, e
        except (GurariiError, KeyError, TypeError, ValueError) as e:
            self.stats['schema_errors'] += 1
            return None, e
        self.stats['parsed'] += 1
        return value, None

    # parse_* never raise

    def _parse(self, parser, *args) -> Tuple[Optional[Any], Optional[str]]:
        value, error = self._attempt(parser, *args)
        return value, None if error is None else str(error)

    def parse_magnitude(self, text: str) -> Tuple[Optional[Magnitude], Optional[str]]:
        return self._parse(_magnitude, text)

    def parse_scalar(self, text: str, f: FieldDescriptor) -> Tuple[Optional[Scalar], Optional[str]]:
        return self._parse(_scalar, text, f)

    def parse_field(self, obj: Any, overrides: Optional[Dict[str, Any]] = None):
        return self._parse(_field, obj, overrides)

    def parse_space(self, obj: Any, overrides: Optional[Dict[str, Any]] = None):
        return self._parse(_space, obj, overrides)

    def parse_vectors(self, space: WeightedSpace, arr: Any):
        return self._parse(_vectors, space, arr)

    def parse_subspace(self, space: WeightedSpace, obj: Any):
        return self._parse(lambda s, o: Subspace(s, _vectors(s, o)), space, obj)

    def parse_map(self, domain: WeightedSpace, codomain: WeightedSpace, obj: Any):
        return self._parse(_map, domain, codomain, obj)

    # load_* raise GrammarError for malformed input; precision and
    # hypothesis failures keep their own class and exit code

    def _load(self, parser, *args) -> Any:
        value, error = self._attempt(parser, *args)
        if error is None:
            return value
        if isinstance(error, GurariiError) and not isinstance(error, InvalidInput):
            raise error
        raise GrammarError(str(error), getattr(error, "witness", None)) from error

    def load_magnitude(self, text: str) -> Magnitude:
        return self._load(_magnitude, text)

    def load_field(self, obj: Any, overrides: Optional[Dict[str, Any]] = None) -> FieldDescriptor:
        return self._load(_field, obj, overrides)

    def load_rational(self, text: str) -> Fraction:
        return self._load(lambda s: _rational(s, lowest_terms=False), text)

    def load_scalar(self, text: str, f: FieldDescriptor) -> Scalar:
        return self._load(_scalar, text, f)

    def load_space(self, obj: Any, overrides: Optional[Dict[str, Any]] = None) -> WeightedSpace:
        return self._load(_space, obj, overrides)

    def load_vectors(self, space: WeightedSpace, arr: Any) -> List[Vector]:
        return self._load(_vectors, space, arr)

    def load_subspace(self, space: WeightedSpace, obj: Any) -> Subspace:
        return Subspace(space, self.load_vectors(space, obj))

    def load_map(self, domain: WeightedSpace, codomain: WeightedSpace, obj: Any) -> LinearMap:
        return self._load(_map, domain, codomain, obj)

    def load_json_file(self, path: str) -> Any:
        try:
            with open(path, "r") as f:
                return json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            self.stats['schema_errors'] += 1
            raise GrammarError(f"cannot read {path}: {e}")

    def get_stats(self) -> dict:
        """Get codec statistics"""
        return self.stats.copy()
