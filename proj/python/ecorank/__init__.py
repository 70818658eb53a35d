"""Budget-constrained passage re-ranking with LLM cascades."""

import json

from ._core import (
    ConfigError,
    ParseError,
    call_cost,
    count_tokens,
    recall_at_k,
    reciprocal_rank,
    token_f1,
    tokens_for_budget,
)
from . import _core

__all__ = [
    "ConfigError",
    "ParseError",
    "call_cost",
    "count_tokens",
    "recall_at_k",
    "reciprocal_rank",
    "token_f1",
    "tokens_for_budget",
    "synthetic",
    "rerank",
    "main",
]


def synthetic(**spec):
    """Synthetic tasks as dicts; keyword arguments follow the CLI scenario keys."""
    text = _core.synthetic_jsonl(json.dumps(spec))
    return [json.loads(line) for line in text.splitlines() if line]


def rerank(tasks, config, seed=0, jobs=1, base_dir=""):
    """Re-rank task dicts under a run config dict.

    Returns ({query_id: [passage ids best first]}, spend report dict).
    """
    jsonl = "".join(json.dumps(t) + "\n" for t in tasks)
    run, spend = _core.rerank_jsonl(jsonl, json.dumps(config), seed, jobs, str(base_dir))
    rankings = {}
    for line in run.splitlines():
        qid, _, doc, _, _, _ = line.split()
        rankings.setdefault(qid, []).append(doc)
    return rankings, json.loads(spend)


def main(argv=None):
    import sys

    return _core.main(list(sys.argv[1:] if argv is None else argv))
