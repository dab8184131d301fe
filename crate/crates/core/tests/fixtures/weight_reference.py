"""Independent reference for the weight-generation recurrence.

SplitMix64 -> 53-bit uniforms -> Marsaglia polar normals -> scale 1/sqrt(d_model)
-> round to float32. Prints the first entry of layer 0 / head 0 W_Q and its
bit pattern for the given seed and d_model.
"""
import math
import struct
import sys

MASK = (1 << 64) - 1


def splitmix(seed):
    state = seed
    while True:
        state = (state + 0x9E3779B97F4A7C15) & MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        yield z ^ (z >> 31)


def normals(seed):
    raw = splitmix(seed)
    while True:
        u = 2.0 * ((next(raw) >> 11) * 2.0 ** -53) - 1.0
        v = 2.0 * ((next(raw) >> 11) * 2.0 ** -53) - 1.0
        s = u * u + v * v
        if s == 0.0 or s >= 1.0:
            continue
        m = math.sqrt(-2.0 * math.log(s) / s)
        yield u * m
        yield v * m


def main():
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 42
    d_model = int(sys.argv[2]) if len(sys.argv) > 2 else 8
    z = next(normals(seed)) * (1.0 / math.sqrt(d_model))
    bits = struct.unpack("<I", struct.pack("<f", z))[0]
    print(f"{struct.unpack('<f', struct.pack('<f', z))[0]!r} 0x{bits:08x}")


if __name__ == "__main__":
    main()
