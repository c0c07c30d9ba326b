#!/usr/bin/env python3
"""Writes the synthetic corpus fixtures under data/fixtures/.

synthetic_corpus.jsonl  600 comments in 60 threads (corpus JSONL schema)
synthetic_truth.jsonl   latent category labels the stub LLMs and embedder read
expert_set.jsonl        200-record synthetic expert set (binary + categories)

Output is a pure function of --seed.
"""

import argparse
import json
import pathlib
import random

CATEGORIES = ["hateful", "harassment", "public_harm", "self_harm", "sexual", "toxic", "violent"]

OPENERS = ["wah", "eh", "walao", "aiyo", "bro", "honestly", "lol", "sian", "oi", "actually"]
SAFE = [
    "the new mrt line quite convenient leh",
    "anyone tried the chicken rice at the hawker centre near the interchange",
    "my lobang for cheap aircon servicing still valid",
    "weekend weather so hot must go swimming",
    "the queue for the bubble tea shop damn long sia",
    "cpf statement come out already, time to check",
    "who is watching the football tonight",
    "need recommendations for a good tuition centre",
    "the new phone camera very shiok",
    "grab fare today expensive lah",
]
UNSAFE = {
    "hateful": ["those people all the same kind, dirty and should go back", "this race always cause trouble one"],
    "harassment": ["i know where you stay, wait and see", "keep posting your photos everywhere until you quit"],
    "public_harm": ["go and jam the expressway tomorrow, block everything", "share the way to get around the checkpoint"],
    "self_harm": ["no point living anymore, better just end it", "thinking of hurting myself again tonight"],
    "sexual": ["describe in detail what you want to do to her", "send more pics, the explicit ones"],
    "toxic": ["you are a total idiot, knn", "stupid fella cannot think properly"],
    "violent": ["someone should beat him until he cannot stand", "bring a parang and settle this"],
}
ENDINGS = ["lah", "leh", "sia", "lor", "meh", "hor", "ah", "liao", "one", "bro"]
# Relative frequency of each category among unsafe comments.
WEIGHTS = {"toxic": 6, "hateful": 2, "harassment": 2, "violent": 2, "sexual": 1, "self_harm": 1, "public_harm": 1}


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "data" / "fixtures"))
    parser.add_argument("--seed", type=int, default=20240601)
    parser.add_argument("--threads", type=int, default=60)
    parser.add_argument("--per-thread", type=int, default=10)
    parser.add_argument("--unsafe-rate", type=float, default=0.3)
    args = parser.parse_args()

    rng = random.Random(args.seed)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    corpus, truth = [], []
    ts = 1_600_000_000
    names = list(WEIGHTS)
    weights = [WEIGHTS[n] for n in names]
    for t in range(args.threads):
        thread_id = f"t{t:03d}"
        source = "forum_a" if t % 3 else "forum_b"
        for k in range(args.per_thread):
            n = t * args.per_thread + k
            labels = {c: False for c in CATEGORIES}
            if rng.random() < args.unsafe_rate:
                first = rng.choices(names, weights)[0]
                labels[first] = True
                if rng.random() < 0.25:
                    labels[rng.choices(names, weights)[0]] = True
            parts = [rng.choice(OPENERS)]
            present = [c for c in CATEGORIES if labels[c]]
            if present:
                parts += [rng.choice(UNSAFE[c]) for c in present]
            else:
                parts.append(rng.choice(SAFE))
            parts.append(rng.choice(ENDINGS))
            text = f"{' '.join(parts)} (#{n})"
            ts += rng.randint(30, 3600)
            rid = f"c{n:04d}"
            corpus.append({"id": rid, "thread_id": thread_id, "source": source, "timestamp": ts, "text": text})
            truth.append({"id": rid, "categories": labels})

    with open(out / "synthetic_corpus.jsonl", "w", encoding="utf-8") as f:
        for r in corpus:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")
    with open(out / "synthetic_truth.jsonl", "w", encoding="utf-8") as f:
        for r in truth:
            f.write(json.dumps(r) + "\n")

    expert = rng.sample(truth, 200)
    with open(out / "expert_set.jsonl", "w", encoding="utf-8") as f:
        for r in expert:
            unsafe = any(r["categories"].values())
            f.write(json.dumps({"id": r["id"], "unsafe": unsafe, "categories": r["categories"]}) + "\n")

    n_unsafe = sum(any(r["categories"].values()) for r in truth)
    print(f"wrote {len(corpus)} records ({n_unsafe} unsafe) to {out}")


if __name__ == "__main__":
    main()
