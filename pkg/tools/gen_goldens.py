"""Regenerate the frozen golden fixtures.

Two pinned artifacts guard against silent drift (library upgrades, RNG or
hashing changes): the hash embedding of one fixed text, and the zero-epoch
initialization of the TransE trainer. Correctness of the underlying recipes
is carried by the independent re-implementations in the tests; these files
only pin the exact bytes.

Usage: python3 tools/gen_goldens.py
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from automathkg.embedding import hash_embed
from automathkg.evaluation import TacticLabel, TranseConfig, Triple, transe_train

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

HASH_EMBED_TEXT = "The union of two sets is their least upper bound."

ZERO_EPOCH_CONFIG = TranseConfig(dim=384, margin=3.0, epochs=0, seed=9)
ZERO_EPOCH_TRIPLE = Triple(head=0, relation=TacticLabel.DEDUCTION, tail=1)


def main() -> None:
    vec = hash_embed(HASH_EMBED_TEXT)
    nonzero = {str(i): float(vec[i]) for i in np.flatnonzero(vec)}
    (FIXTURES / "hash_embed_golden.json").write_text(
        json.dumps(
            {"text": HASH_EMBED_TEXT, "dim": int(vec.size), "nonzero": nonzero},
            indent=1,
        )
        + "\n",
        encoding="utf-8",
    )

    result = transe_train([ZERO_EPOCH_TRIPLE], ZERO_EPOCH_CONFIG)
    ent0 = result.entity_vectors[0]
    ent1 = result.entity_vectors[1]
    rel = result.relation_vectors[TacticLabel.DEDUCTION]
    blob = np.concatenate([ent0, ent1, rel]).tobytes()
    (FIXTURES / "transe_zero_epoch_golden.json").write_text(
        json.dumps(
            {
                "dim": ZERO_EPOCH_CONFIG.dim,
                "seed": ZERO_EPOCH_CONFIG.seed,
                "sha256": hashlib.sha256(blob).hexdigest(),
                "ent0_head": [float(x) for x in ent0[:6]],
                "ent1_head": [float(x) for x in ent1[:6]],
                "rel_head": [float(x) for x in rel[:6]],
                "rel_norm": float(np.linalg.norm(rel)),
            },
            indent=1,
        )
        + "\n",
        encoding="utf-8",
    )
    print("goldens written to", FIXTURES)


if __name__ == "__main__":
    main()
