#!/usr/bin/env python3
"""Regenerates the synthetic replay fixtures under data/fixtures.

bioacoustic/  224 QA samples whose oracle labels split 106/75/43.
dominance/    200 ASR samples where internal, external and the correction
              candidate each win on a disjoint subset.

Output is deterministic; rerunning leaves the files byte-identical.
"""

import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "data" / "fixtures"

ANIMALS = ["Humpback whale", "Common loon", "Spring peeper", "Barred owl", "Gray wolf",
           "Bottlenose dolphin", "Red squirrel", "Wood thrush", "Cicada", "Bullfrog",
           "Coyote", "Killdeer"]
LETTERS = "ABCD"
WORDS = ["river", "stone", "light", "green", "north", "candle", "quiet", "small",
         "table", "window", "garden", "yellow", "winter", "market", "silver", "engine"]


def dump_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


def dump_json(path, obj):
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(obj, indent=2) + "\n")


def answer(letter, options, rng, plain=False):
    if plain:
        return letter
    return rng.choice([f"{letter}. {options[letter]}", f"({letter.lower()})", letter,
                       options[letter].lower()])


def bioacoustic():
    rng = random.Random(4243)
    labels = ["<internal>"] * 106 + ["<external>"] * 75 + ["<rewrite>"] * 43
    rng.shuffle(labels)
    samples, omni, external = [], [], []
    for i, label in enumerate(labels):
        sid = f"bio_{i:03d}"
        subset = ["calls", "songs", "chorus"][i % 3]
        names = rng.sample(ANIMALS, 4)
        options = dict(zip(LETTERS, names))
        gold = rng.choice(LETTERS)
        wrong = [l for l in LETTERS if l != gold]
        samples.append({"sample_id": sid, "dataset_id": f"bio_{subset}", "task": "qa",
                        "audio_ref": f"audio/bio/{sid}.wav",
                        "question": "Which animal is vocalizing in this recording?",
                        "options": options, "gold_choice": gold})

        if label == "<internal>":
            internal = answer(gold, options, rng)
            hits = rng.randint(0, 5)
        else:
            internal = answer(rng.choice(wrong), options, rng) if rng.random() < 0.9 else "unclear"
            hits = rng.randint(3, 5) if label == "<external>" else rng.randint(0, 2)
        omni.append({"sample_id": sid, "role": "internal", "seed": 0, "text": internal})

        slots = [True] * hits + [False] * (5 - hits)
        rng.shuffle(slots)
        for seed, ok in enumerate(slots):
            if ok:
                text = answer(gold, options, rng)
            elif rng.random() < 0.1:
                text = "hard to tell"
            else:
                text = answer(rng.choice(wrong), options, rng)
            external.append({"sample_id": sid, "role": "external", "seed": seed, "text": text})

        reanswer = gold if label == "<rewrite>" and rng.random() < 0.8 else rng.choice(LETTERS)
        omni.append({"sample_id": sid, "role": "rewrite", "seed": 0,
                     "text": f"{reanswer}. {options[reanswer]}"})

        # Arbiter agrees with the oracle most of the time; rewrites are
        # emitted sparingly so precision on <rewrite> stays above recall.
        roll = rng.random()
        if label == "<rewrite>":
            token = "<rewrite>" if roll < 0.45 else rng.choice(["<internal>", "<external>"])
        elif roll < 0.8:
            token = label
        elif roll < 0.95:
            token = "<external>" if label == "<internal>" else "<internal>"
        else:
            token = "<rewrite>"
        if token == "<rewrite>" and rng.random() < 0.5:
            text = f"<rewrite> {reanswer}. {options[reanswer]}"
        elif token == "<rewrite>":
            text = "<rewrite>"
        else:
            text = token
        omni.append({"sample_id": sid, "role": "arbiter", "seed": 0, "text": text})

    out = ROOT / "bioacoustic"
    out.mkdir(parents=True, exist_ok=True)
    dump_jsonl(out / "samples.jsonl", samples)
    dump_jsonl(out / "omni.jsonl", omni)
    dump_jsonl(out / "external.jsonl", external)
    dump_json(out / "expected.json", {"oracle_counts": {"<internal>": 106, "<external>": 75,
                                                        "<rewrite>": 43}})
    dump_json(out / "config.json", {
        "backends": [
            {"backend_id": "omni", "kind": "replay", "fixture": "omni.jsonl"},
            {"backend_id": "external-qa", "kind": "replay", "fixture": "external.jsonl",
             "params": {"temperature": 0.7}},
        ],
        "roles": {"internal": "omni", "external": "external-qa", "ger": "omni",
                  "arbiter": "omni", "rewrite": "omni"},
        "policy": {"kind": "model", "fallback_token": "<internal>"},
        "k": 5,
        "max_tool_depth": 1,
    })


def perturb(words, n, rng):
    """Substitutes n distinct positions with words outside the vocabulary."""
    out = list(words)
    for p in rng.sample(range(len(out)), n):
        out[p] = out[p] + "x"
    return out


def dominance():
    rng = random.Random(2024)
    winners = ["internal"] * 70 + ["external"] * 70 + ["ger"] * 60
    rng.shuffle(winners)
    samples, omni, external = [], [], []
    edits = {"internal": 0, "external": 0, "ger": 0, "oracle": 0}
    ref_words = 0
    for i, win in enumerate(winners):
        sid = f"dom_{i:03d}"
        gold = rng.sample(WORDS, rng.randint(4, 8))
        ref_words += len(gold)
        best = rng.randint(0, 1)
        cost = {}
        for src in ("internal", "external", "ger"):
            cost[src] = best if src == win else best + rng.randint(1, 2)
        for src, n in cost.items():
            edits[src] += n
        edits["oracle"] += best
        text = {src: " ".join(perturb(gold, n, rng)) for src, n in cost.items()}
        samples.append({"sample_id": sid, "dataset_id": "dominance", "task": "asr",
                        "audio_ref": f"audio/dom/{sid}.wav", "gold_transcript": " ".join(gold)})
        omni.append({"sample_id": sid, "role": "internal", "seed": 0, "text": text["internal"]})
        omni.append({"sample_id": sid, "role": "ger", "seed": 0, "text": text["ger"]})
        omni.append({"sample_id": sid, "role": "rewrite", "seed": 0, "text": text["ger"]})
        external.append({"sample_id": sid, "role": "external", "seed": 0, "text": text["external"]})

    out = ROOT / "dominance"
    out.mkdir(parents=True, exist_ok=True)
    dump_jsonl(out / "samples.jsonl", samples)
    dump_jsonl(out / "omni.jsonl", omni)
    dump_jsonl(out / "external.jsonl", external)
    dump_json(out / "expected.json", {"ref_words": ref_words, "edits": edits,
                                      "winners": {w: winners.count(w) for w in sorted(set(winners))}})
    dump_json(out / "config.json", {
        "backends": [
            {"backend_id": "omni", "kind": "replay", "fixture": "omni.jsonl"},
            {"backend_id": "external-asr", "kind": "replay", "fixture": "external.jsonl"},
        ],
        "roles": {"internal": "omni", "external": "external-asr", "ger": "omni",
                  "arbiter": "omni", "rewrite": "omni"},
        "policy": "oracle",
        "k": 1,
    })


if __name__ == "__main__":
    bioacoustic()
    dominance()
