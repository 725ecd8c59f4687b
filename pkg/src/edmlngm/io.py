"""JSON and CSV file formats.

Floats are written with Python's shortest round-trip representation, which
never needs more than 17 significant digits and reads back bit for bit.
Non-finite numbers are rejected on input.
"""

import csv
import json
import math
from pathlib import Path

import numpy as np

from .edm_core import Instance
from .errors import DimensionError, ValidationError
from .stress import Formulation


def _reject_constant(name):
    raise ValidationError("all numbers are finite", f"found {name}")


def loads(text):
    return json.loads(text, parse_constant=_reject_constant)


def load(path):
    with open(path) as fh:
        return loads(fh.read())


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def dumps(obj):
    return json.dumps(obj, indent=1, allow_nan=False, default=_default) + "\n"


def dump(obj, path):
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))


def _finite_array(data, name):
    try:
        arr = np.array(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name} is a numeric array", str(exc)) from None
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} is finite")
    return arr


# --------------------------------------------------------------------------
# instances


def instance_from_dict(data, strict=False):
    for key in ("n", "d", "D"):
        if key not in data:
            raise ValidationError(f"field '{key}' present")
    P_bar = data.get("P_bar")
    inst = Instance(
        n=int(data["n"]),
        d=int(data["d"]),
        D=_finite_array(data["D"], "D"),
        P_bar=None if P_bar is None else _finite_array(P_bar, "P_bar"),
        seed=data.get("seed"),
    )
    return inst.validate(strict=strict)


def read_instance(path, strict=False):
    return instance_from_dict(load(path), strict=strict)


def write_instance(instance, path):
    dump(instance.to_dict(), path)


# --------------------------------------------------------------------------
# points


def point_to_dict(formulation, x, **extra):
    out = {"formulation": Formulation.parse(formulation).value, "data": np.asarray(x).tolist()}
    out.update(extra)
    return out


def point_from_dict(data, instance=None):
    if "formulation" not in data or "data" not in data:
        raise ValidationError("point file has 'formulation' and 'data'")
    form = Formulation.parse(data["formulation"])
    x = _finite_array(data["data"], "data")
    if form is Formulation.TRIANGULAR_ELL:
        x = x.reshape(-1)
    elif x.ndim == 1:
        x = x.reshape(-1, 1)
    if instance is not None:
        from .stress import EvalContext

        ctx = EvalContext.make(instance, form)
        if x.shape != ctx.shape:
            raise DimensionError(f"point has shape {x.shape}, expected {ctx.shape} for {form.value}")
    return form, x


def read_point(path, instance=None):
    return point_from_dict(load(path), instance)


def write_point(formulation, x, path, **extra):
    dump(point_to_dict(formulation, x, **extra), path)


def evaluation_report(f, grad_norm, lambda_min=None):
    return {
        "f": float(f),
        "grad_norm": float(grad_norm),
        "lambda_min": None if lambda_min is None or math.isnan(lambda_min) else float(lambda_min),
    }


# --------------------------------------------------------------------------
# CSV series for external plotting


def write_trace_csv(trace, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "f", "grad_norm", "radius"])
        for k, (f, g, rad) in enumerate(trace):
            w.writerow([k, repr(float(f)), repr(float(g)), repr(float(rad))])


def write_spectrum_csv(eigenvalues, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "eigenvalue"])
        for k, lam in enumerate(eigenvalues):
            w.writerow([k, repr(float(lam))])
