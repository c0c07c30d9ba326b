#!/usr/bin/env python3
"""Writes the offline benchmark fixture under data/fixtures/benchmark/.

dataset.jsonl        8 labelled test records
store.lgemb          2-dim embeddings keyed by record id: (s, 0)
bundle/              ridge heads w=(1,0), b=0, raw scores, threshold 0
cache/<provider>.jsonl  canned provider responses keyed by sha256(text)
moderate.lgemb       embeddings keyed by text for "bad" (1,0) and "ok" (-1,0)
config.json          offline benchmark config (paths relative to this directory)
"""

import hashlib
import json
import pathlib
import struct

CATS = ["hateful", "harassment", "public_harm", "self_harm", "sexual", "toxic", "violent"]

# id, local score, unsafe, toxic, hateful
RECORDS = [
    ("r1", 0.9, "yes", "yes", "no"),
    ("r2", 0.8, "no", "no", "no"),
    ("r3", 0.7, "yes", "no", "yes"),
    ("r4", 0.6, "yes", "yes", "no"),
    ("r5", 0.5, "no", "no", "no"),
    ("r6", 0.4, "yes", "yes", "no"),
    ("r7", 0.3, "no", "no", "no"),
    ("r8", 0.2, "no", "undetermined", "no"),
]

OPENAI = {
    "r1": {"hate": 0.2, "violence": 0.6},
    "r2": {"hate": 0.6},
    "r3": {"hate": 0.9},
    "r4": {"harassment": 0.3},
    "r5": {"sexual": 0.1},
    "r6": {"violence": 0.3},
    "r7": {"self_harm": 0.1},
    "r8": {"hate": 0.05},
}
PERSPECTIVE = {
    "r1": {"toxicity": 0.8, "profanity": 0.9},
    "r2": {"toxicity": 0.7},
    "r3": {"identity_attack": 0.5},
    "r4": {"toxicity": 0.95},
    "r5": {"toxicity": 0.2},
    "r6": {"profanity": 0.6},
    "r7": {"toxicity": 0.4},
    "r8": {"toxicity": 0.3},
}
LLAMAGUARD_UNSAFE = {"r1": 0.7, "r2": 0.7, "r3": 0.2, "r4": 0.9, "r5": 0.1, "r6": 0.3, "r7": 0.05, "r8": 0.4}
LLAMAGUARD = {"r1": {"violence_and_hate": 0.8}, "r3": {"violence_and_hate": 0.8}}

PROVIDER_KEYS = {
    "openai_moderation": ["hate", "harassment", "self_harm", "sexual", "violence"],
    "perspective": ["identity_attack", "insult", "toxicity", "profanity", "threat"],
    "llamaguard": ["violence_and_hate", "crime", "guns_and_illegal_weapons",
                   "regulated_or_controlled_substances", "criminal_planning", "self_harm", "sexual"],
}


def text_of(rid):
    return f"benchmark comment {rid}"


def f32(x):
    return struct.pack("<f", x)


def write_store(path, rows, normalized):
    header = json.dumps({"dim": 2, "count": len(rows), "normalized": normalized}, separators=(",", ":"))
    out = b"LGEMB1\n" + header.encode() + b"\n"
    for key, vec in rows:
        k = key.encode()
        out += struct.pack("<I", len(k)) + k + b"".join(f32(v) for v in vec)
    path.write_bytes(out)


def main():
    out = pathlib.Path(__file__).resolve().parent.parent / "data" / "fixtures" / "benchmark"
    (out / "cache").mkdir(parents=True, exist_ok=True)
    (out / "bundle").mkdir(exist_ok=True)

    with open(out / "dataset.jsonl", "w") as f:
        for rid, _, unsafe, toxic, hateful in RECORDS:
            labels = {c: "no" for c in CATS}
            labels["toxic"] = toxic
            labels["hateful"] = hateful
            f.write(json.dumps({"id": rid, "thread_id": "t" + rid, "split": "test", "labels": labels,
                                "unsafe": unsafe, "text": text_of(rid)}) + "\n")

    write_store(out / "store.lgemb", [(rid, (s, 0.0)) for rid, s, *_ in RECORDS], False)
    write_store(out / "moderate.lgemb", [("bad", (1.0, 0.0)), ("ok", (-1.0, 0.0))], False)

    weights = f32(1.0) + f32(0.0) + f32(0.0)
    digest = hashlib.sha256(weights).hexdigest()
    heads = []
    for target in ["unsafe"] + CATS:
        (out / "bundle" / f"{target}.bin").write_bytes(weights)
        heads.append({"target": target, "kind": "ridge", "calibration": "raw", "threshold": 0.0,
                      "file": f"{target}.bin", "sha256": digest})
    manifest = {"version": "fixture-1", "dim": 2, "normalized": False,
                "embedding_source": "store:store.lgemb", "heads": heads}
    (out / "bundle" / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    tables = {"openai_moderation": OPENAI, "perspective": PERSPECTIVE, "llamaguard": LLAMAGUARD}
    for provider, table in tables.items():
        with open(out / "cache" / f"{provider}.jsonl", "w") as f:
            for rid, *_ in RECORDS:
                cats = {k: 0.0 for k in PROVIDER_KEYS[provider]}
                cats.update(table.get(rid, {}))
                scores = {"categories": cats}
                if provider == "llamaguard":
                    scores["unsafe"] = LLAMAGUARD_UNSAFE[rid]
                sha = hashlib.sha256(text_of(rid).encode()).hexdigest()
                f.write(json.dumps({"provider": provider, "text_sha256": sha, "scores": scores}) + "\n")

    config = {
        "benchmark": {
            "cache": "cache",
            "providers": [{"provider": p, "name": p} for p in tables],
            "max_in_flight": 2,
        }
    }
    (out / "config.json").write_text(json.dumps(config, indent=2) + "\n")
    print(f"wrote benchmark fixture to {out}")


if __name__ == "__main__":
    main()
