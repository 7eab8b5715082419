"""JSON Schemas (draft 2020-12) for every document the package writes or reads."""

NUM = {"type": ["number", "null"]}
NUM_LIST = {"type": "array", "items": {"type": ["number", "null"]}}

PROBLEM_SPEC = {
    "type": "object",
    "required": ["kind"],
    "properties": {"kind": {"enum": ["pow_abs", "piecewise_plus", "quadratic", "dc_quadratic",
                                     "dc_abs"]}},
}

ALGORITHM_SPEC = {
    "type": "object",
    "required": ["kind"],
    "properties": {"kind": {"enum": ["proximal", "dca", "bdca", "irg"]}},
}

RUN_CONFIG = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["problem", "algorithm", "x0"],
    "properties": {
        "problem": PROBLEM_SPEC,
        "algorithm": ALGORITHM_SPEC,
        "x0": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "rng_seed": {"type": "integer"},
        "tolerances": {
            "type": "object",
            "properties": {
                "tol_zero": {"type": "number", "minimum": 0},
                "fit_window": {"type": "array", "items": {"type": "number"},
                               "minItems": 2, "maxItems": 2},
            },
        },
        "output": {"type": "object",
                   "properties": {"dir": {"type": "string"}, "stem": {"type": "string"}}},
    },
}

TRAJECTORY_SIDECAR = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["problem_id", "algorithm_id", "termination", "reference_point",
                 "reference_source", "reference_value", "problem", "algorithm", "flags", "records"],
    "properties": {
        "problem_id": {"type": "string"},
        "algorithm_id": {"type": "string"},
        "termination": {"enum": ["converged_step_tol", "value_flat", "max_iters",
                                 "exact_stationary"]},
        "reference_point": {"type": ["array", "null"], "items": {"type": "number"}},
        "reference_source": {"enum": ["known_minimizer", "final_iterate", "none"]},
        "reference_value": NUM,
        "problem": {"type": "object"},
        "algorithm": {"type": "object"},
        "flags": {"type": "array", "items": {"type": "string"}},
        "records": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["k", "step_params", "subgrad_witness"],
                "properties": {
                    "k": {"type": "integer", "minimum": 0},
                    "step_params": {"type": "object",
                                    "additionalProperties": {"type": ["number", "null"]}},
                    "subgrad_witness": {"type": ["array", "null"], "items": {"type": "number"}},
                },
            },
        },
    },
}

CERTIFICATE = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["a_max", "b_min_h2", "b_min_h3", "h4_ok", "sigma_primary", "window",
                 "violations", "per_k"],
    "properties": {
        "a_max": {"type": ["number", "null"], "minimum": 0},
        "b_min_h2": {"type": ["number", "null"], "minimum": 0},
        "b_min_h3": {"type": ["number", "null"], "minimum": 0},
        "b_min_h2_oracle": NUM,
        "b_min_h3_oracle": NUM,
        "h3_divergent": {"type": "boolean"},
        "h1_unresolved": {"type": "array", "items": {"type": "integer"}},
        "h4_ok": {"type": "boolean"},
        "sigma_primary": NUM,
        "irg_beta_max": NUM,
        "irg_c_min": NUM,
        "window": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
        "violations": {
            "type": "array",
            "items": {"type": "object", "required": ["k", "condition", "reason"]},
        },
        "per_k": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["k", "h1_margin", "h2_ratio", "h3_ratio"],
                "properties": {"k": {"type": "integer"}, "h1_margin": NUM,
                               "h2_ratio": NUM, "h3_ratio": NUM},
            },
        },
    },
}

RATE_REPORT = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["classification", "params", "envelopes", "fit"],
    "properties": {
        "classification": {"enum": ["finite_termination", "superlinear", "linear", "sublinear"]},
        "params": {"type": "object"},
        "diagnostics": {"type": "object"},
        "envelopes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["theorem", "bound_expr", "fitted_const", "max_violation"],
                "properties": {"theorem": {"type": "string"}, "bound_expr": {"type": "string"},
                               "fitted_const": NUM, "max_violation": NUM},
            },
        },
        "fit": {
            "type": "object",
            "required": ["q_hat", "M_hat", "r2"],
            "properties": {"q_hat": NUM, "M_hat": NUM, "r2": NUM},
        },
    },
}

PROBE_SUMMARY = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["q", "M", "slopes", "failure_radius", "crossover_radius", "rhs_bounded",
                 "all_hold"],
    "properties": {
        "q": {"type": "number"},
        "M": {"type": "number"},
        "slopes": {"type": "object", "additionalProperties": NUM},
        "failure_radius": NUM,
        "crossover_radius": NUM,
        "rhs_bounded": {"type": "boolean"},
        "all_hold": {"type": "boolean"},
    },
}

GEOMETRY_POINT = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["x0", "sigma0", "sigma1", "v1", "d", "L_hat", "level_decrease", "est_check"],
    "properties": {
        "x0": NUM_LIST, "v1": NUM_LIST, "d": NUM_LIST,
        "sigma0": {"type": "number", "minimum": 0},
        "sigma1": {"type": "number", "minimum": 0},
        "L_hat": NUM,
        "level_decrease": {"type": "object", "required": ["rows", "L_hat", "min_margin"]},
        "est_check": {"type": "object", "required": ["lhs", "rhs", "holds"]},
    },
}

LEMMA_OUTPUT = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["kind"],
    "oneOf": [
        {"properties": {"kind": {"const": "comparison"}},
         "required": ["lhs", "rhs", "holds", "q", "k", "l"]},
        {"properties": {"kind": {"const": "recurrence"}},
         "required": ["sequence", "max_residual", "classification"]},
    ],
}

SUITE_REPORT = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["all_passed", "criteria"],
    "properties": {
        "all_passed": {"type": "boolean"},
        "criteria": {
            "type": "array",
            "items": {"type": "object", "required": ["id", "title", "passed"],
                      "properties": {"id": {"type": "integer", "minimum": 1, "maximum": 14},
                                     "title": {"type": "string"},
                                     "passed": {"type": "boolean"}}},
        },
    },
}

CRITERION_RESULT = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["id", "title", "passed", "detail"],
}
