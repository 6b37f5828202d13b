"""Regenerates synthetic_repo.txt. Deterministic; run from this directory."""
import json
import random

rng = random.Random(20240917)
verbs = ["load", "parse", "merge", "split", "render", "score", "index", "flush", "check", "build"]
nouns = ["config", "record", "buffer", "token", "table", "graph", "cache", "header", "batch", "frame"]
body = [
    "    result = []",
    "    for item in {arg}:",
    "        if item is None:",
    "            continue",
    "        result.append(transform(item, depth={n}))",
    "    total = sum(len(r) for r in result)",
    "    log.debug(\"processed %d entries\", total)",
    "    return result",
]

lines = ['@revision {"path": "/matches", "op": "add", "value": {}}', ""]
scored = []
for i in range(900):
    name = f"{rng.choice(verbs)}_{rng.choice(nouns)}_{i}"
    arg = rng.choice(nouns) + "s"
    if rng.random() < 0.12:
        score = round(rng.random(), 2)
        lines.append("@revision " + json.dumps({"path": f"/matches/{name}", "op": "add", "value": score}))
        scored.append(name)
    elif scored and rng.random() < 0.05:
        target = rng.choice(scored)
        score = round(rng.random(), 2)
        lines.append("@revision " + json.dumps({"path": f"/matches/{target}", "op": "update", "value": score}))
    lines.append(f"def {name}({arg}, depth={i % 7}):")
    lines.append(f'    """Apply the {name.split("_")[0]} step to every {arg[:-1]}."""')
    for b in body[: 4 + rng.randrange(5)]:
        lines.append(b.format(arg=arg, n=i % 5))
    lines.append("")

with open("synthetic_repo.txt", "w") as f:
    f.write("\n".join(lines) + "\n")
