#!/usr/bin/env python3
# Licensed under the Apache License, Version 2.0 (the 'License');
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an 'AS IS' BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Writes the seeded toy fixtures under data/toy.

Embeddings are topic centroids plus noise, the headline corpus and the
source sentences are filled from templates over the same topics. Train the
language model afterwards with

  ctxsum train-lm data/toy/corpus.txt --vocab data/toy/embeddings.txt \
      -o data/toy/lm.arpa
"""

import argparse
import pathlib
import random

TOPICS = {
    "economy": ["stocks", "shares", "markets", "prices", "trade", "bank", "dollar", "growth"],
    "politics": ["president", "minister", "government", "parliament", "vote", "party", "leader", "election"],
    "crime": ["police", "man", "arrested", "court", "charged", "suspect", "robbery", "murder"],
    "weather": ["storm", "rain", "floods", "snow", "winds", "hurricane", "coast", "heat"],
    "sport": ["team", "match", "wins", "cup", "coach", "season", "final", "champions"],
}
VERBS = ["says", "rise", "fall", "meets", "hits", "warns", "plans", "seeks"]
GLUE = ["the", "a", "in", "on", "of", "for", "after", "over", "to", "with", "and", "new", "its"]

HEADLINE = [
    "{n1} {v} {n2}",
    "{n1} {v} {g} {n2}",
    "{n1} {n2} {v}",
    "{n1} {v} {n2} {g} {n3}",
]
SOURCE = [
    "the {n1} {v} on {d} that the {n2} {g} {n3} would {v2} {g2} {n4}",
    "{n1} {v} {g} the {n2} after {n3} {v2} {g2} {n4} in the {n5}",
    "a {n1} {v} the {n2} of {n3} as {n4} {v2} for the {n5}",
    "the {n1} and the {n2} {v} {g} {n3} {g2} {n4}",
]
DAYS = ["monday", "tuesday", "wednesday", "thursday", "friday"]


def vocabulary():
    words = []
    for group in list(TOPICS.values()) + [VERBS, GLUE, DAYS]:
        for w in group:
            if w not in words:
                words.append(w)
    return words


def embeddings(rng, dim):
    groups = list(TOPICS.items()) + [("verbs", VERBS), ("glue", GLUE), ("days", DAYS)]
    rows = []
    for _, words in groups:
        center = [rng.uniform(-1, 1) for _ in range(dim)]
        for w in words:
            rows.append((w, [c + rng.uniform(-0.45, 0.45) for c in center]))
    return rows


def fill(rng, template):
    topic = rng.choice(list(TOPICS.values()))
    nouns = rng.sample(topic, 5)
    return template.format(
        n1=nouns[0], n2=nouns[1], n3=nouns[2], n4=nouns[3], n5=nouns[4],
        v=rng.choice(VERBS), v2=rng.choice(VERBS), g=rng.choice(GLUE), g2=rng.choice(GLUE),
        d=rng.choice(DAYS))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data/toy")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--dim", type=int, default=16)
    ap.add_argument("--corpus-lines", type=int, default=300)
    ap.add_argument("--sentences", type=int, default=20)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    rows = embeddings(rng, args.dim)
    with open(out / "embeddings.txt", "w") as f:
        f.write("%d %d\n" % (len(rows), args.dim))
        for w, v in rows:
            f.write(w + " " + " ".join("%.6f" % x for x in v) + "\n")

    with open(out / "corpus.txt", "w") as f:
        for _ in range(args.corpus_lines):
            f.write(fill(rng, rng.choice(HEADLINE)) + "\n")

    sources, refs = [], []
    for _ in range(args.sentences):
        s = fill(rng, rng.choice(SOURCE))
        words = s.split()
        keep = [w for w in words if w not in GLUE and w not in DAYS][:4]
        sources.append(s)
        refs.append(" ".join(keep))
    (out / "input.txt").write_text("\n".join(sources) + "\n")
    (out / "refs.txt").write_text("\n".join(refs) + "\n")


if __name__ == "__main__":
    main()
