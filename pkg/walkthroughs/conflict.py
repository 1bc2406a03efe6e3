"""A derived friendship contradicts an asserted non-friendship.

Under the default policy the atom is reset to [0,1] and frozen; under
the halt policy the run stops with a diagnostic instead.
"""
from annolog import demos
from annolog.errors import InconsistencyHalt
from annolog.trace import RESOLUTION


def main():
    prog = demos.conflict()
    world, trace = prog.run()
    for e in trace:
        if e.cause == RESOLUTION:
            print(f"t={e.t} {e.predicate}{e.element}: {e.old_bound} -> {e.new_bound} ({e.detail})")
    print("frozen:", world.is_static((("phil", "mary"), "friend")))
    try:
        prog.run(inconsistency_policy="halt")
    except InconsistencyHalt as exc:
        print("halt policy:", exc)


if __name__ == "__main__":
    main()
