#!/usr/bin/env python3
"""Regenerates data/words.json from a fixed word list and data/dictionary9.txt.

Each word gets a mask of 2 or 4 positions (alternating) such that exactly one
dictionary word fits the masked pattern. Output is deterministic.
"""
import itertools
import json
import pathlib
import random

WORDS = """adventure carefully chocolate dangerous beautiful different important
wonderful something character knowledge yesterday telephone breakfast furniture
celebrate education challenge vegetable happiness structure president community
attention beginning direction discovery necessary political situation professor
newspaper afternoon butterfly chemistry classroom encourage everybody excellent
expensive hurricane interview invisible landscape lightning nightmare orchestra
passenger pineapple pollution raspberry scientist secretary signature snowflake
submarine sunflower telescope territory universal volunteer waterfall""".split()

ROOT = pathlib.Path(__file__).resolve().parent.parent


def completions(dictionary, answer, mask):
    out = []
    for cand in dictionary:
        if all(cand[i] == answer[i] for i in range(9) if i not in mask):
            out.append(cand)
    return out


def main():
    dictionary = (ROOT / "data" / "dictionary9.txt").read_text().split()
    rng = random.Random(20251015)
    puzzles = []
    for index, answer in enumerate(WORDS[:60]):
        size = 2 if index % 2 == 0 else 4
        combos = list(itertools.combinations(range(9), size))
        rng.shuffle(combos)
        for mask in combos:
            if completions(dictionary, answer, set(mask)) == [answer]:
                puzzles.append({"answer": answer, "masked_positions": list(mask)})
                break
        else:
            raise SystemExit(f"no unique mask for {answer}")
    text = "[\n" + ",\n".join("  " + json.dumps(p) for p in puzzles) + "\n]\n"
    (ROOT / "data" / "words.json").write_text(text)
    print(f"wrote {len(puzzles)} puzzles")


if __name__ == "__main__":
    main()
