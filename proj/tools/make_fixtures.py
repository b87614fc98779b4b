#!/usr/bin/env python3
"""Regenerates data/fixtures. Deterministic; rerun after editing templates."""

import json
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "data" / "fixtures"
rng = random.Random(20240611)

PROSE = [
    "I should read the question carefully before doing anything else.",
    "The numbers involved are small so mental arithmetic is enough here.",
    "It is worth double checking the carry in the ones place.",
    "Sometimes these options are designed to catch an off by one slip.",
    "Let me restate what is being asked so I do not drift off topic.",
    "Adding the tens first and then the ones is usually the safest route.",
    "I want to be sure the option letter matches the value I computed.",
    "There is no trick in the wording as far as I can tell.",
    "A quick estimate helps confirm the exact result is in the right range.",
    "I will compare each option against my result one at a time.",
    "Rounding both numbers gives a rough answer to sanity check against.",
    "Nothing else in the question seems to affect the calculation.",
]


def words(text):
    return text.split()


def prose(lead, target):
    """Prose thinking with exactly `target` whitespace tokens, lead first."""
    out = words(lead)
    pool = PROSE[:]
    rng.shuffle(pool)
    i = 0
    while len(out) < target:
        out += words(pool[i % len(pool)])
        i += 1
    return " ".join(out[:target])


def response(thinking, answer):
    return f"<think>{thinking}</think><answer>{answer}</answer>"


def make_questions():
    qs = []
    for i in range(20):
        a, b = rng.randint(11, 89), rng.randint(11, 89)
        total = a + b
        qid = f"q{i + 1:02d}"
        if i < 16:
            wrong = rng.sample([total - 10, total - 1, total + 1, total + 10, total + 2], 3)
            values = wrong + [total]
            rng.shuffle(values)
            letters = "ABCD"
            gold = letters[values.index(total)]
            opts = " ".join(f"({l}) {v}" for l, v in zip(letters, values))
            qs.append({"id": qid, "context": "", "prompt": f"What is {a} + {b}? {opts}",
                       "gold_answer": gold, "answer_kind": "multiple_choice",
                       "_a": a, "_b": b, "_total": total, "_values": values})
        else:
            qs.append({"id": qid, "context": "", "prompt": f"What is {a} + {b}?",
                       "gold_answer": str(total), "answer_kind": "free_form",
                       "_a": a, "_b": b, "_total": total, "_values": None})
    return qs


def answer_for(q, value):
    if q["_values"] is None:
        return str(value)
    if value in q["_values"]:
        return "ABCD"[q["_values"].index(value)]
    return "ABCD"[(q["_values"].index(q["_total"]) + 1) % 4]


def wrong_value(q):
    if q["_values"] is None:
        return q["_total"] + 1
    return next(v for v in q["_values"] if v != q["_total"])


def sketch(q, value, extra):
    a, b = q["_a"], q["_b"]
    lines = [f"1. {a} + {b} = {value}"]
    pick = answer_for(q, value)
    lines.append(f"2. Answer is {pick}")
    if extra:
        lines.append(f"3. Check {value} - {b} = {value - b}")
    return "\n".join(lines)


def standard_bank(q):
    a, b, total = q["_a"], q["_b"], q["_total"]
    wv = wrong_value(q)
    lead_ok = f"We need {a} plus {b}, which comes to {total}."
    lead_bad = f"We need {a} plus {b}, which I think comes to {wv}."
    jitter = lambda n: n + rng.randint(-3, 3)
    return [
        response(prose(lead_ok, jitter(100)), answer_for(q, total)),
        response(prose(lead_ok, jitter(70)), answer_for(q, total)),
        response(sketch(q, total, extra=False), answer_for(q, total)),
        response(prose(lead_bad, jitter(90)), answer_for(q, wv)),
        f"<think>{sketch(q, wv, extra=False)}</think>{answer_for(q, wv)}",
        f"{prose(lead_ok, jitter(110))} Final answer: {answer_for(q, total)}",
    ]


def adversarial_bank(q):
    a, b, total = q["_a"], q["_b"], q["_total"]
    wv = wrong_value(q)
    lead_ok = f"We need {a} plus {b}, which comes to {total}."
    jitter = lambda n: n + rng.randint(-3, 3)
    terse_wrong = f"1. {a} + {b} = {wv}\n2. {answer_for(q, wv)}"
    return [
        response(prose(lead_ok, jitter(100)), answer_for(q, total)),
        response(prose(lead_ok, jitter(70)), answer_for(q, total)),
        response(sketch(q, total, extra=True), answer_for(q, total)),
        response(terse_wrong, answer_for(q, wv)),
        response(sketch(q, wv, extra=False), answer_for(q, wv)),
        f"{prose(lead_ok, jitter(110))} Final answer: {answer_for(q, total)}",
    ]


FILLERS = ["Okay, let me think.", "Hmm, so", "Well,", "Alright, let's see.", "Wait,"]


def long_cot(q):
    a, b, total = q["_a"], q["_b"], q["_total"]
    tens = (a // 10 + b // 10) * 10
    ones = a % 10 + b % 10
    parts = [
        rng.choice(FILLERS),
        f"The question asks for the sum of {a} and {b}.",
        f"Hmm, so adding the tens gives {a // 10 * 10} plus {b // 10 * 10} which is {tens}.",
        f"Then the ones digits give {a % 10} plus {b % 10} which is {ones}.",
        "Wait, I should make sure I am not mixing up the places here, that happens a lot.",
        f"Putting the two parts together, {tens} plus {ones} gives {total}.",
        "Let me double check by counting up from the larger number in small jumps.",
        f"Yes, that confirms the total really is {total} and nothing else.",
    ]
    if q["_values"] is not None:
        parts.append(f"Looking at the options, {total} is option {answer_for(q, total)}.")
    return " ".join(parts)


def clean(q):
    return {k: v for k, v in q.items() if not k.startswith("_")}


def write_jsonl(name, rows):
    with open(OUT / name, "w", encoding="utf-8") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    qs = make_questions()
    write_jsonl("questions.jsonl", [clean(q) for q in qs])
    bank = [(q, standard_bank(q)) for q in qs]
    write_jsonl("bank.jsonl", [{"question_id": q["id"], "response_raw": r}
                               for q, rs in bank for r in rs])
    write_jsonl("bank_adversarial.jsonl", [{"question_id": q["id"], "response_raw": r}
                                           for q in qs for r in adversarial_bank(q)])
    write_jsonl("conversion_inputs.jsonl",
                [dict(clean(q), long_cot=long_cot(q)) for q in qs[:10]])
    # Reference template policy: a fixed preference profile over the bank.
    profile = [0.5, 0.0, 1.0, -0.5, -1.0, -1.5]
    policy = {"kind": "template",
              "questions": [{"id": q["id"], "candidates": rs, "logits": profile}
                            for q, rs in bank]}
    with open(OUT / "reference_policy.json", "w", encoding="utf-8") as f:
        json.dump(policy, f, ensure_ascii=False, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
