"""JSON schemas of everything the command line writes."""

NUMBER_OR_STRING = {"type": ["number", "string"]}

REPORT = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "IdentityReport",
    "type": "object",
    "required": ["identity", "params", "residual", "tail_budget", "eps", "pass"],
    "properties": {
        "identity": {"type": "string"},
        "params": {"type": "object"},
        "residual": NUMBER_OR_STRING,
        "tail_budget": {"type": "number", "minimum": 0},
        "eps": {"type": "number", "minimum": 0},
        "pass": {"type": "boolean"},
        "details": {"type": "object"},
    },
}

VERIFY = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "VerifyOutput",
    "type": "object",
    "required": ["check", "pass", "reports"],
    "properties": {
        "check": {"type": "string"},
        "pass": {"type": "boolean"},
        "max_residual": NUMBER_OR_STRING,
        "reports": {"type": "array", "items": REPORT},
    },
}

SIMULATE = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "SimulateMetadata",
    "type": "object",
    "required": ["seed", "spec_hash", "events", "t", "absorbed", "rng", "model"],
    "properties": {
        "seed": {"type": "integer"},
        "spec_hash": {"type": "string", "pattern": "^[0-9a-f]{16}$"},
        "events": {"type": "integer", "minimum": 0},
        "t": {"type": "number", "minimum": 0},
        "absorbed": {"type": "boolean"},
        "rng": {"type": "string"},
        "rng_version": {"type": "integer"},
        "window_growth": {"type": "integer"},
        "final": {"type": "string"},
        "model": {"type": "string"},
        "observers": {"type": "object"},
    },
}

SAMPLE = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "SampleMetadata",
    "type": "object",
    "required": ["kind", "rows"],
    "properties": {
        "kind": {"type": "string"},
        "rows": {"type": "integer", "minimum": 0},
        "seed": {"type": ["integer", "null"]},
        "tries": {"type": ["integer", "null"]},
        "tail": {"type": ["number", "null"]},
    },
}

ALL = {"report": REPORT, "verify": VERIFY, "simulate": SIMULATE, "sample": SAMPLE}
