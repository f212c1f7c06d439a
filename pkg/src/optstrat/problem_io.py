"""JSON problem files.

A problem file either references a builtin family::

    {"builtin": {"family": "knapsack", "sizes": {}, "seed": 0}}

or spells out a model. Every numeric entry may be a number or an expression
string over the parameter vector, e.g. ``"2 * theta[0] - 1"``::

    {
      "name": "toy",
      "sense": "min",
      "parameters": ["d"],
      "variables": [{"name": "x", "lower": 0, "upper": 10, "integer": false}],
      "cost": {"q": [1], "P": [[2]], "r": 0},
      "constraints": [{"coeffs": [1], "sense": ">=", "rhs": "theta[0]"}],
      "max_terms": [{"branches": [{"coeffs": [1], "const": 0},
                                  {"coeffs": [-1], "const": 0}]}],
      "parameter_space": {"blocks": [{"type": "interval", "indices": [0],
                                      "lo": [1], "hi": [3]}]}
    }

``coeffs`` is either a dense list or a ``{variable name: value}`` mapping.
Expressions may use ``+ - * / **``, parentheses, numbers, ``theta[i]`` and
the functions ``abs``, ``min``, ``max``, ``sqrt``, ``exp``, ``log``.
"""

import ast
import json
import math

import numpy as np

from .problem import (
    _SENSES, MaxTerm, ModelData, ParameterSpace, ParametricProblem, ProblemError,
)

FUNCTIONS = {"abs": abs, "min": min, "max": max, "sqrt": math.sqrt, "exp": math.exp,
             "log": math.log}
_OPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd)


class _Expr:
    """A validated arithmetic expression of ``theta``."""

    def __init__(self, text, p):
        try:
            tree = ast.parse(text, mode="eval")
        except SyntaxError as exc:
            raise ProblemError(f"bad expression {text!r}: {exc.msg}") from None
        self._check(tree.body, text, p)
        self.text = text
        self.code = compile(tree, "<expr>", "eval")

    def _check(self, node, text, p):
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
                raise ProblemError(f"only numeric literals are allowed in {text!r}")
        elif isinstance(node, ast.BinOp) and isinstance(node.op, _OPS):
            self._check(node.left, text, p)
            self._check(node.right, text, p)
        elif isinstance(node, ast.UnaryOp) and isinstance(node.op, _OPS):
            self._check(node.operand, text, p)
        elif isinstance(node, ast.Subscript):
            idx = node.slice
            if not (isinstance(node.value, ast.Name) and node.value.id == "theta"
                    and isinstance(idx, ast.Constant) and type(idx.value) is int):
                raise ProblemError(f"only theta[<int>] subscripts are allowed in {text!r}")
            if not 0 <= idx.value < p:
                raise ProblemError(f"theta[{idx.value}] out of range in {text!r} (p={p})")
        elif isinstance(node, ast.Call):
            if not (isinstance(node.func, ast.Name) and node.func.id in FUNCTIONS) or node.keywords:
                raise ProblemError(f"unsupported call in {text!r}")
            for a in node.args:
                self._check(a, text, p)
        else:
            raise ProblemError(f"unsupported syntax in {text!r}")

    def __call__(self, theta):
        return float(eval(self.code, {"__builtins__": {}, "theta": theta, **FUNCTIONS}))


def _value(v, p, where):
    if isinstance(v, bool):
        raise ProblemError(f"{where}: booleans are not numbers")
    if isinstance(v, (int, float)):
        return float(v)
    if v is None:
        return None
    if isinstance(v, str):
        t = v.strip().lower()
        if t in ("inf", "+inf"):
            return math.inf
        if t == "-inf":
            return -math.inf
        return _Expr(v, p)
    raise ProblemError(f"{where}: expected a number or expression, got {type(v).__name__}")


def _vector(entries, p, where):
    return [_value(v, p, f"{where}[{i}]") for i, v in enumerate(entries)]


def _eval(items, theta):
    return np.array([v(theta) if callable(v) else v for v in items], dtype=float)


def _coeffs(spec, names, p, where):
    n = len(names)
    if isinstance(spec, dict):
        out = [0.0] * n
        for key, v in spec.items():
            if key not in names:
                raise ProblemError(f"{where}: unknown variable {key!r}")
            out[names.index(key)] = _value(v, p, f"{where}.{key}")
        return out
    if not isinstance(spec, list) or len(spec) != n:
        raise ProblemError(f"{where}: need {n} coefficients")
    return _vector(spec, p, where)


class _FileModel:
    """Instantiator built from a parsed problem file."""

    def __init__(self, spec):
        params = spec.get("parameters")
        space = spec.get("parameter_space")
        if space is None:
            raise ProblemError("problem file needs a parameter_space section")
        if "dimension" not in space:
            space = dict(space, dimension=len(params) if params else
                         sum(len(b["indices"]) for b in space["blocks"]))
        self.space = ParameterSpace.from_dict(space)
        p = self.space.dimension
        if params is not None and len(params) != p:
            raise ProblemError("parameters and parameter_space disagree on the dimension")
        self.param_names = tuple(params or ())
        variables = spec.get("variables")
        if not variables:
            raise ProblemError("problem file needs a nonempty variables section")
        names = [v.get("name", f"x{i}") for i, v in enumerate(variables)]
        if len(set(names)) != len(names):
            raise ProblemError("variable names must be unique")
        self.names = names
        n = len(names)
        self.lower = [_value(v.get("lower", "-inf"), p, f"variables[{i}].lower")
                      for i, v in enumerate(variables)]
        self.upper = [_value(v.get("upper", "inf"), p, f"variables[{i}].upper")
                      for i, v in enumerate(variables)]
        self.integer = tuple(i for i, v in enumerate(variables) if v.get("integer", False))
        cost = spec.get("cost", {})
        q = cost.get("q", [0.0] * n)
        if isinstance(q, dict):
            self.q = _coeffs(q, names, p, "cost.q")
        else:
            if len(q) != n:
                raise ProblemError(f"cost.q needs {n} entries")
            self.q = _vector(q, p, "cost.q")
        self.P = None
        if cost.get("P") is not None:
            rows = cost["P"]
            if len(rows) != n or any(len(r) != n for r in rows):
                raise ProblemError(f"cost.P must be {n} x {n}")
            self.P = [_vector(r, p, f"cost.P[{i}]") for i, r in enumerate(rows)]
        self.r = _value(cost.get("r", 0.0), p, "cost.r")
        self.rows = []
        self.senses = []
        self.rhs = []
        for k, c in enumerate(spec.get("constraints", [])):
            sense = c.get("sense", "<=")
            if sense not in _SENSES:
                raise ProblemError(f"constraints[{k}]: unknown sense {sense!r}")
            self.rows.append(_coeffs(c.get("coeffs"), names, p, f"constraints[{k}].coeffs"))
            self.senses.append(sense)
            self.rhs.append(_value(c.get("rhs", 0.0), p, f"constraints[{k}].rhs"))
        self.max_terms = []
        for k, m in enumerate(spec.get("max_terms", [])):
            branches = m.get("branches")
            if not branches:
                raise ProblemError(f"max_terms[{k}] needs at least one branch")
            C = [_coeffs(br.get("coeffs"), names, p, f"max_terms[{k}].branches[{j}]")
                 for j, br in enumerate(branches)]
            d = [_value(br.get("const", 0.0), p, f"max_terms[{k}].branches[{j}].const")
                 for j, br in enumerate(branches)]
            self.max_terms.append((C, d))
        self.n = n
        self.p = p

    def __call__(self, theta):
        n = self.n
        A = np.array([_eval(r, theta) for r in self.rows]).reshape(len(self.rows), n)
        P = None if self.P is None else np.array([_eval(r, theta) for r in self.P])
        terms = tuple(MaxTerm(np.array([_eval(r, theta) for r in C]), _eval(d, theta))
                      for C, d in self.max_terms)
        r = self.r(theta) if callable(self.r) else self.r
        return ModelData(_eval(self.q, theta), A, _eval(self.rhs, theta), tuple(self.senses),
                         _eval(self.lower, theta), _eval(self.upper, theta), P, r, terms)


class _Rebuild:
    """Picklable wrapper that re-parses the file spec in worker processes."""

    def __init__(self, spec):
        self.spec = spec
        self._model = _FileModel(spec)

    def __getstate__(self):
        return {"spec": self.spec}

    def __setstate__(self, state):
        self.spec = state["spec"]
        self._model = _FileModel(self.spec)

    def __call__(self, theta):
        return self._model(theta)


def problem_from_spec(spec):
    """``(ParametricProblem, ParameterSpace)`` from a parsed problem description."""
    if not isinstance(spec, dict):
        raise ProblemError("problem description must be a JSON object")
    if "builtin" in spec:
        from .bench import BenchmarkSpec, generate

        b = spec["builtin"]
        return generate(BenchmarkSpec(b["family"], dict(b.get("sizes", {})), int(b.get("seed", 0))))
    inst = _Rebuild(spec)
    model = inst._model
    sense = spec.get("sense", "min")
    problem = ParametricProblem(
        name=spec.get("name", "problem"), n=model.n, p=model.p, instantiate=inst,
        integer=model.integer, sense=sense, var_names=tuple(model.names),
        param_names=model.param_names, source={"file": spec},
    )
    return problem, model.space


def load_problem(path):
    with open(path) as fh:
        try:
            spec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ProblemError(f"{path}: invalid JSON ({exc})") from None
    return problem_from_spec(spec)


def problem_from_source(source):
    """Rebuild a problem from the ``source`` record stored in artifact files."""
    if "builtin" in source:
        return problem_from_spec({"builtin": source["builtin"]})
    if "file" in source:
        return problem_from_spec(source["file"])
    raise ProblemError("artifact does not record how to rebuild its problem")
