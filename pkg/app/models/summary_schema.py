# app/models/summary_schema.py

_NUMBER_OR_NULL = {"type": ["number", "null"]}

_CHANNEL = {
    "type": "object",
    "additionalProperties": False,
    "required": [
        "source", "target", "kappa",
        "epsilon", "delta",
        "variance_epsilon", "variance_delta",
        "total_epsilon", "total_delta",
    ],
    "properties": {
        "source": {"type": "integer", "minimum": 0},
        "target": {"type": "integer", "minimum": 0},
        "kappa": {"type": "integer", "minimum": 1},
        "epsilon": {"type": "number", "minimum": 0},
        "delta": {"type": "number", "minimum": 0},
        "variance_epsilon": {"type": "number", "minimum": 0},
        "variance_delta": {"type": "number", "minimum": 0},
        "total_epsilon": {"type": "number", "minimum": 0},
        "total_delta": {"type": "number", "minimum": 0},
    },
}

SUMMARY_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": [
        "config", "config_hash", "seeds", "t_max",
        "final_mse", "final_mse_stderr",
        "class_accuracy", "class_accuracy_per_seed",
        "privacy", "wall_seconds",
    ],
    "properties": {
        "config": {"type": "object"},
        "config_hash": {"type": "string"},
        "seeds": {"type": "array", "items": {"type": "integer"}},
        "t_max": {"type": "integer", "minimum": 0},

        # ------------------------
        # ERRORS AT t_max, one entry per emitted curve
        # ------------------------
        "final_mse": {"type": "object", "additionalProperties": _NUMBER_OR_NULL},
        "final_mse_stderr": _NUMBER_OR_NULL,

        "class_accuracy": _NUMBER_OR_NULL,
        "class_accuracy_per_seed": {"type": "array", "items": {"type": "number"}},

        # ------------------------
        # PRIVACY
        # ------------------------
        "privacy": {
            "type": "object",
            "additionalProperties": False,
            "required": ["enabled", "mechanism", "channels"],
            "properties": {
                "enabled": {"type": "boolean"},
                "mechanism": {"type": "string", "enum": ["pm1", "pm2"]},
                "noise_kind": {"type": ["string", "null"], "enum": ["gaussian", "laplace", None]},
                "sigma_dp_sq": {"type": "number", "minimum": 0},
                "sigma2_dp_sq": {"type": "number", "minimum": 0},
                "max_total_epsilon": _NUMBER_OR_NULL,
                "max_total_delta": _NUMBER_OR_NULL,
                "channels": {"type": "array", "items": _CHANNEL},
            },
        },
        "wall_seconds": {"type": "number", "minimum": 0},
    },
}
