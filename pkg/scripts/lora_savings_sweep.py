#!/usr/bin/env python3
"""Print trainable-parameter savings of low-rank adapters over a grid of
layer widths and ranks, the desk check behind choosing a small rank."""

from razewright.lora import param_savings

WIDTHS = (1024, 2048, 4096, 8192)
RANKS = (4, 8, 16, 64)


def main():
    header = "width".rjust(8) + "".join(f"r={r}".rjust(12) for r in RANKS)
    print(header)
    for width in WIDTHS:
        cells = []
        for r in RANKS:
            s = param_savings(width, width, r)
            cells.append(f"{s.ratio * 100:.4f}%".rjust(12))
        print(f"{width:>8}" + "".join(cells))
    s = param_savings(4096, 4096, 8)
    print(f"\nexample: 4096x4096 at rank 8 trains {s.lora:,} of {s.full:,} "
          f"parameters ({s.ratio * 100:.6f}%)")


if __name__ == "__main__":
    main()
