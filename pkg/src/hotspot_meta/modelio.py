"""Text serialization of calibrated models.

The format is line-oriented and versioned (first line ``EPICMODEL v1``).
Floats are written with ``repr`` (shortest round-trip decimal), so
save -> load -> save reproduces the file byte for byte. Training
diagnostics (loss history, solver iteration counts) are not stored.
"""

from __future__ import annotations

import json
import re

import numpy as np

from .base_ann import AnnModel
from .base_pm import PmLibrary, PmSignature
from .base_svm import SvmModel
from .errors import ModelFormatError, ModelVersionError
from .features import NormParams
from .meta import MODEL_VERSION, MetaModel, WeightingFunction

FORMAT_MAJOR = 1
_HEADER = re.compile(r"^EPICMODEL v(\d+)(?:\.(\d+))?$")


def _f(v) -> str:
    return repr(float(v))


def _vec(values) -> str:
    return " ".join(_f(v) for v in values)


def dumps_model(model: MetaModel) -> str:
    lines = [MODEL_VERSION, f"prng {model.prng}", f"config {model.config_json}",
             f"theta {_f(model.theta)}", f"lambda0 {_f(model.lambda0)}", f"weighting {len(model.weighting)}"]
    for wf in model.weighting:
        lines.append(f"levels {wf.base_index} {wf.level_count} {_vec(wf.levels)}")
    norm = model.norm
    lines += [f"norm {norm.mean.shape[0]}", f"mean {_vec(norm.mean)}", f"scale {_vec(norm.scale)}"]
    ann = model.ann
    lines.append(f"ann {ann.hidden_count} {ann.input_dim} {_f(ann.bias_out)} {_f(ann.threshold)}")
    for row, w, b in zip(ann.w_in, ann.w_out, ann.bias_hid):
        lines.append(f"hidden {_f(w)} {_f(b)} {_vec(row)}")
    svm = model.svm
    lines.append(f"svm {svm.alphas.shape[0]} {svm.input_dim} {_f(svm.c_bound)} {_f(svm.gamma)} "
                 f"{_f(svm.bias)} {_f(svm.threshold)}")
    for a, y, sv in zip(svm.alphas, svm.labels, svm.support_vectors):
        lines.append(f"sv {_f(a)} {int(y)} {_vec(sv)}")
    pm = model.pm
    lines.append(f"pm {len(pm.signatures)} {pm.dim} {pm.quant_levels} {pm.match_tolerance} {pm.mismatch_budget}")
    for sig in pm.signatures:
        lines.append(f"sig {sig.source_count} " + " ".join(str(int(c)) for c in sig.cells))
    lines.append("END")
    return "\n".join(lines) + "\n"


def save_model(model: MetaModel, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_model(model))


class _Reader:
    def __init__(self, text: str, source: str):
        self.lines = text.split("\n")
        self.pos = 0
        self.source = source

    def fail(self, msg: str):
        raise ModelFormatError(f"{self.source}:{self.pos}: {msg}")

    def take(self, keyword: str, count: int | None = None) -> list[str]:
        if self.pos >= len(self.lines) or not self.lines[self.pos]:
            self.pos += 1
            self.fail(f"unexpected end of file, expected '{keyword}'")
        line = self.lines[self.pos]
        self.pos += 1
        head, _, rest = line.partition(" ")
        if head != keyword:
            self.fail(f"expected '{keyword}', found '{head}'")
        fields = rest.split(" ") if rest else []
        if count is not None and len(fields) != count:
            self.fail(f"'{keyword}' needs {count} fields, found {len(fields)}")
        return fields

    def floats(self, fields) -> np.ndarray:
        try:
            return np.array([float(v) for v in fields], dtype=np.float64)
        except ValueError as exc:
            self.fail(str(exc))

    def ints(self, fields) -> list[int]:
        try:
            return [int(v) for v in fields]
        except ValueError as exc:
            self.fail(str(exc))


def loads_model(text: str, source: str = "<model>") -> MetaModel:
    first = text.split("\n", 1)[0]
    m = _HEADER.match(first)
    if not m:
        raise ModelFormatError(f"{source}:1: not a model file (header {first[:40]!r})")
    if int(m.group(1)) != FORMAT_MAJOR:
        raise ModelVersionError(f"{source}: model format version v{m.group(1)}"
                                f"{'.' + m.group(2) if m.group(2) else ''} is not supported by this "
                                f"reader ({MODEL_VERSION})")
    r = _Reader(text, source)
    r.pos = 1
    prng = r.take("prng", 1)[0]
    line = r.lines[r.pos] if r.pos < len(r.lines) else ""
    if not line.startswith("config "):
        r.pos += 1
        r.fail("expected 'config'")
    config_json = line[len("config "):]
    try:
        json.loads(config_json)
    except json.JSONDecodeError as exc:
        r.pos += 1
        r.fail(f"config echo is not valid JSON: {exc}")
    r.pos += 1
    theta = float(r.floats(r.take("theta", 1))[0])
    lambda0 = float(r.floats(r.take("lambda0", 1))[0])
    (n_bases,) = r.ints(r.take("weighting", 1))
    weighting = []
    for _ in range(n_bases):
        f = r.take("levels")
        if len(f) < 2:
            r.fail("'levels' needs base index and count")
        k, L = r.ints(f[:2])
        if len(f) != 2 + L:
            r.fail(f"'levels' declares {L} values, found {len(f) - 2}")
        weighting.append(WeightingFunction(k, r.floats(f[2:])))
    (dim,) = r.ints(r.take("norm", 1))
    norm = NormParams(r.floats(r.take("mean", dim)), r.floats(r.take("scale", dim)))

    f = r.take("ann", 4)
    hidden, inputs = r.ints(f[:2])
    bias_out, ann_threshold = r.floats(f[2:])
    w_in = np.empty((hidden, inputs))
    w_out = np.empty(hidden)
    bias_hid = np.empty(hidden)
    for h in range(hidden):
        vals = r.floats(r.take("hidden", 2 + inputs))
        w_out[h], bias_hid[h], w_in[h] = vals[0], vals[1], vals[2:]
    ann = AnnModel(w_in, w_out, bias_hid, float(bias_out), float(ann_threshold), norm)

    f = r.take("svm", 6)
    n_sv, sv_dim = r.ints(f[:2])
    c_bound, gamma, bias, svm_threshold = r.floats(f[2:])
    alphas = np.empty(n_sv)
    labels = np.empty(n_sv)
    svs = np.empty((n_sv, sv_dim))
    for i in range(n_sv):
        fields = r.take("sv", 2 + sv_dim)
        alphas[i] = r.floats(fields[:1])[0]
        labels[i] = r.ints(fields[1:2])[0]
        svs[i] = r.floats(fields[2:])
    svm = SvmModel(alphas, labels, svs, float(bias), float(c_bound), float(gamma), float(svm_threshold), norm)

    n_sig, pm_dim, q, eps, budget = r.ints(r.take("pm", 5))
    sigs = []
    for _ in range(n_sig):
        vals = r.ints(r.take("sig", 1 + pm_dim))
        sigs.append(PmSignature(np.array(vals[1:], dtype=np.int32), vals[0]))
    pm = PmLibrary(tuple(sigs), q, eps, budget, pm_dim)

    r.take("END", 0)
    if any(line for line in r.lines[r.pos:]):
        r.pos += 1
        r.fail("trailing content after END")
    return MetaModel(tuple(weighting), theta, lambda0, ann, svm, pm, norm, MODEL_VERSION, prng, config_json)


def load_model(path) -> MetaModel:
    try:
        with open(path, encoding="utf-8", newline="\n") as fh:
            text = fh.read()
    except OSError as exc:
        raise ModelFormatError(f"cannot read model {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise ModelFormatError(f"{path}: not a text model file") from exc
    return loads_model(text, str(path))
