"""Disruption spreading down a synthetic buyer-supplier DAG."""
import sys

from annolog import demos


def main(nodes=1000):
    prog = demos.disruption(nodes=nodes, horizon=15)
    rows = demos.timeline(prog, "disrupted")
    for r in rows:
        print(f"t={r['t']:<3} disrupted={r['true']:<5} partial={r['partial']}")
    print("converged at t =", demos.converged_at(rows))


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 1000)
