"""Friendship inference on a five-node student graph.

Students who take the same class become friends two steps later, and
friendship is transitive one step after that.
"""
from annolog import demos
from annolog.model import format_key


def main():
    prog = demos.students()
    world, trace = prog.run()
    for e in trace:
        if e.predicate == "friend":
            print(f"t={e.t} {format_key(e.key)} {e.old_bound} -> {e.new_bound} by {e.cause}")
    print("john and phil friends at the end:", world.get(("john", "phil"), "friend"))


if __name__ == "__main__":
    main()
