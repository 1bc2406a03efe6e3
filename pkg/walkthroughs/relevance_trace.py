"""Relevance over a small social graph, exported as a CSV trace and replayed."""
from annolog import demos
from annolog.engine import initial_world
from annolog.trace import export, replay


def main():
    prog = demos.relevance_chain()
    world, trace = prog.run()
    print(export(trace, "csv"), end="")
    rebuilt = replay(initial_world(prog.graph, prog.registry), trace)
    print("replay matches:", rebuilt == world)


if __name__ == "__main__":
    main()
