"""
Leftover batching
=================

Ten documents of 600 tokens, split into segments of at most 512 tokens.
The vanilla layout pads every document to two full segments; the leftover
layout batches the ten full segments on their own and pads the ten
88-token leftovers only to the longest leftover.
"""

import numpy as np

from deskcoref.batching import encode_plan, padding_report, plan_leftover, plan_vanilla, reassemble
from deskcoref.encoder import encode_segment, init_encoder, segment_document, tokenize

docs = [tokenize(" ".join(f"w{(i * 7 + j) % 97}" for i in range(600)), f"doc{j}") for j in range(10)]

# vanilla: one (documents, segments, M) grid
van = plan_vanilla(docs, 512)
print("vanilla grid", van.grid_shape, "padded", van.padding_tokens)

# leftover: full segments unpadded, leftovers padded to their maximum
left = plan_leftover(docs, 512)
print("leftover batches", [b.shape for b in left.batches], "padded", left.padding_tokens)

# corpus-level reports, as printed by `deskcoref batch-stats`
for scheme in ("vanilla", "leftover"):
    rep = padding_report(docs, 512, 10000, scheme)
    print(f"{scheme:>8}: {rep.padded_tokens} padded of {rep.padded_tokens + rep.real_tokens} slots "
          f"({rep.padded_fraction:.1%})")

# encoding under either layout gives the same vectors as encoding segment by segment
enc = init_encoder(0, V=4096, d=16)
for plan in (van, left):
    vecs = reassemble(encode_plan(enc, plan), plan, enc.d)
    ref = np.concatenate([encode_segment(enc, s) for s in segment_document(docs[3], 512)])
    print(plan.scheme, "bit-identical:", vecs[3].tobytes() == ref.tobytes())

# mixed lengths: leftover padding depends only on the spread of leftover lengths
mixed = [tokenize(" ".join(["x"] * n), f"m{n}") for n in (600, 650, 700, 1100)]
for scheme, plan in (("vanilla", plan_vanilla(mixed, 512)), ("leftover", plan_leftover(mixed, 512))):
    print(f"mixed {scheme:>8}: padded {plan.padding_tokens}")
