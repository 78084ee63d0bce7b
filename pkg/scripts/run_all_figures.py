"""Write the plot data of every figure preset and print headline numbers.

Usage: python scripts/run_all_figures.py [out_dir] [--mode exact|far_field]
"""
import argparse
import time

from atomcount.scenarios import FIGURES, run_figure


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("out_dir", nargs="?", default="figures_out")
    p.add_argument("--mode", choices=("exact", "far_field"), default="exact")
    args = p.parse_args()
    for name in FIGURES:
        start = time.perf_counter()
        summary = run_figure(name, args.out_dir, args.mode)
        print(f"{name}: {len(summary['files'])} file(s) in {time.perf_counter() - start:.1f} s")
        if name == "fig6":
            print(f"  TV checkerboard/block {summary['tv_checkerboard_block']:.3e}, "
                  f"checkerboard/striped {summary['tv_checkerboard_striped']:.3e}")
        if name == "fig7":
            print(f"  means: supersolid {summary['supersolid']['mean']:.4f}, "
                  f"superfluid {summary['superfluid']['mean']:.4f}")


if __name__ == "__main__":
    main()
