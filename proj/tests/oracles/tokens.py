"""Reference word/punctuation segmentation of the 3 kB paragraph fixture."""
import json
import pathlib
import re

HERE = pathlib.Path(__file__).resolve().parent
FIXTURES = HERE.parent / "fixtures"

text = (FIXTURES / "paragraph_3kb.txt").read_text()
tokens = re.findall(r"\w+|[^\w\s]", text)
out = {"file": "paragraph_3kb.txt", "count": len(tokens), "first": tokens[:25], "last": tokens[-5:]}
(FIXTURES / "expected_tokens.json").write_text(json.dumps(out, indent=2) + "\n")
print(out["count"])
