#!/usr/bin/env python3
"""Generates the toy corpus and the synthetic multiple-choice dataset.

The outputs under data/ are committed; rerun this only to regenerate them.

    python3 tools/make_synthetic_data.py --out data
"""

import argparse
import json
import pathlib
import random

ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"]
VOWELS = ["a", "e", "i", "o", "u"]

PREAMBLES = [
    "according to the old atlas",
    "in the travel guide",
    "as every student learns",
    "the teacher said that",
]

# (relation, fact template, question template). The question is the fact
# with the answer cut off.
RELATIONS = [
    ("capital", "the capital city of {x} is {y} .", "the capital city of {x} is"),
    ("dish", "the famous dish of {x} is {y} .", "the famous dish of {x} is"),
]

FILLER = [
    "the river is long and the road is old .",
    "the old atlas has many maps .",
    "the travel guide lists every hotel .",
    "every student learns to read maps .",
    "the teacher said that the test is easy .",
    "many people like to travel in summer .",
    "the city is busy and the market is loud .",
]


def make_names(rng, count, syllables, suffix, taken):
    names = []
    while len(names) < count:
        word = "".join(rng.choice(ONSETS) + rng.choice(VOWELS) for _ in range(syllables)) + suffix
        if word in taken:
            continue
        taken.add(word)
        names.append(word)
    return names


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="data")
    parser.add_argument("--seed", type=int, default=20240611)
    parser.add_argument("--items", type=int, default=200)
    args = parser.parse_args()

    rng = random.Random(args.seed)
    taken = set()
    countries = make_names(rng, args.items, 3, "ia", taken)
    answers = {
        "capital": make_names(rng, args.items, 2, "ton", taken),
        "dish": make_names(rng, args.items, 2, "ko", taken),
    }

    corpus = list(FILLER)
    facts = []
    for idx, country in enumerate(countries):
        relation, fact, question = RELATIONS[idx % len(RELATIONS)]
        answer = answers[relation][idx]
        facts.append((relation, country, answer, question))
        # Each fact is stated twice, once bare and once after a preamble, so
        # the model has seen every question template.
        corpus.append(fact.format(x=country, y=answer))
        corpus.append(rng.choice(PREAMBLES) + " " + fact.format(x=country, y=answer))
        corpus.append(f"many people visit {country} every year .")
        corpus.append(f"{country} is a country with an old history .")
    rng.shuffle(corpus)

    items = []
    for idx, (relation, country, answer, question) in enumerate(facts):
        # Distractors are answers to other questions, so every choice is in
        # the corpus vocabulary.
        pool = [f[2] for f in facts if f[0] == relation and f[2] != answer]
        choices = rng.sample(pool, 3)
        correct = rng.randrange(4)
        choices.insert(correct, answer)
        text = rng.choice(PREAMBLES) + " " + question.format(x=country)
        items.append(
            {"id": f"syn-{idx:03d}", "question": text, "choices": choices, "correct_index": correct}
        )

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "toy_corpus.txt").write_text("\n".join(corpus) + "\n")
    with open(out / "synthetic_mc.jsonl", "w") as f:
        for item in items:
            f.write(json.dumps(item) + "\n")


if __name__ == "__main__":
    main()
