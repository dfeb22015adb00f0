"""Result record shared by all checks."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict


def _clean(x):
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if hasattr(x, "item"):
        return _clean(x.item())
    return x


@dataclass
class IdentityReport:
    identity: str
    params: Dict[str, Any]
    residual: float
    tail_budget: float
    eps: float
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.residual < self.tail_budget + self.eps)

    def to_dict(self) -> dict:
        return _clean({"identity": self.identity, "params": self.params, "residual": self.residual,
                       "tail_budget": self.tail_budget, "eps": self.eps, "pass": self.passed,
                       "details": self.details})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (f"{verdict} {self.identity} residual={self.residual:.3e} "
                f"budget={self.tail_budget + self.eps:.3e}")
