"""Write a procedural listing corpus (metadata, manifest, PNG images)."""

import argparse

from housefeat.synthetic import make_corpus


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("root", nargs="?", default="data/synthetic")
    ap.add_argument("--listings", type=int, default=500)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--size", type=int, default=64, help="image side in pixels")
    args = ap.parse_args()
    c = make_corpus(args.root, args.listings, args.seed, args.size)
    print(f"{len(c.listings)} listings, {len(c.assets)} images under {c.root}")


if __name__ == "__main__":
    main()
