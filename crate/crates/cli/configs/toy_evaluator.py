"""Toy objective speaking hord's line-delimited JSON protocol."""

import json
import math
import sys

handshake = json.loads(sys.stdin.readline())
print(json.dumps({"ready": True}), flush=True)

for line in sys.stdin:
    req = json.loads(line)
    x = req["x"]
    try:
        err = (
            (math.log10(x["learning_rate"]) + 2.5) ** 2
            + 4 * (x["dropout"] - 0.25) ** 2
            + 0.1 * (x["hidden_layers"] - 3) ** 2
        )
        print(json.dumps({"id": req["id"], "f": err}), flush=True)
    except Exception as exc:
        print(json.dumps({"id": req["id"], "error": str(exc)}), flush=True)
