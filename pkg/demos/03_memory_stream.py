"""
The memory stream
=================

Retrieval adds three min-max normalised scores: how recently a memory was
used, how important it is, and how close its text is to the query.
"""

import tempfile
from pathlib import Path

from cubeagent.memory import MemoryStream, load, persist

stream = MemoryStream()
stream.record("cross: played R, now the DF edge is home", "observation")
stream.record("plan: cross -> cross, first_layer_corners -> first_layer", "plan")
stream.record("cross: failed to reach cross after 6 moves (deadlock). Avoid R2 at ...", "reflection")
for i in range(5):
    stream.record(f"first_layer: played U, corner {i} still twisted", "observation")

for s in stream.score("cross deadlock", now=stream.clock):
    m = s.memory
    print(f"{s.score:.2f}  rec {s.recency:.2f} imp {s.importance:.2f} rel {s.relevance:.2f}  "
          f"[{m.kind}] {m.description[:50]}")

top = stream.retrieve("cross deadlock", k=2)
print("retrieved:", [m.id for m in top], "access tick now", top[0].last_accessed_at)

# line-delimited JSON, lossless
path = Path(tempfile.mkdtemp()) / "memories.jsonl"
persist(stream, path)
assert load(path) == stream
print(path.read_text().splitlines()[0][:100], "...")
