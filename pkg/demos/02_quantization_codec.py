#!/usr/bin/env python3
"""The hierarchical 4-bit codec and its byte-exact wire format.

Each selected value becomes one sign bit plus a 3-bit interval number over
the magnitude range [thr, theta]. This script quantizes a selection, packs
it, dissects the bytes, and measures the compression ratio against dense
float32 transmission.
"""

import numpy as np

from fedcomp import (
    QuantParams,
    compression_ratio,
    decode_update,
    dequantize,
    encode_update,
    pack,
    packed_size,
    quantize,
    sparsify,
    unpack,
)

# Quantization on the worked range [thr=1, theta=9]: step = 1.
q = QuantParams(thr=1.0, theta=9.0)
print(f"range [{q.thr}, {q.theta}], 8 intervals, step = {q.step}")
for value in (1.0, 4.3, -6.2, 9.0, -9.0):
    code = quantize(value, q)
    print(f"  {value:+.1f} -> sign={code.sign} location={code.location} "
          f"-> decodes to {dequantize(code, q):+.3f} "
          f"(midpoint: {dequantize(code, q, reconstruct='midpoint'):+.3f})")

# A full encode/pack/unpack/decode round trip on a sparsified update.
rng = np.random.default_rng(0)
model_len = 4096
update = rng.normal(size=model_len)
selection, _ = sparsify(update, k=1)
encoded = encode_update(selection, client_weight=512)
raw = pack(encoded)
print(f"\nmodel_len={model_len}, selected {selection.count} coordinates")
print(f"packed bytes: {len(raw)} "
      f"(header 34 + 4*{selection.count} indices + {(selection.count + 1) // 2} code bytes "
      f"= {packed_size(selection.count)})")
print(f"magic/version/flags: {raw[:4]} {raw[4]} {raw[5]:#04x}")
print(f"compression ratio vs dense float32: "
      f"{compression_ratio(model_len, len(raw)):.1f}x")

decoded = decode_update(unpack(raw))
errors = np.abs(decoded.values - selection.values)
print(f"round-trip worst-case error {errors.max():.5f} < step {encoded.quant.step:.5f}: "
      f"{errors.max() < encoded.quant.step}")

# The headline regime: a million parameters at k = 0.1%.
big = rng.normal(size=10**6)
big_selection, _ = sparsify(big, k=0.1)
big_raw = pack(encode_update(big_selection, client_weight=1))
print(f"\n1e6 parameters at k=0.1%: {big_selection.count} coordinates, "
      f"{len(big_raw)} bytes, ratio {compression_ratio(10**6, len(big_raw)):.1f}x")
