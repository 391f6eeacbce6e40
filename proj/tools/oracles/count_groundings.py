#!/usr/bin/env python3
"""Count type-consistent groundings of every action schema by brute force.

Reads a domain and problem in the project's PDDL subset with plain regexes,
so it shares no code with the C++ parser.
"""
import itertools
import re
import sys


def typed_list(text):
    out, pending = [], []
    toks = text.split()
    i = 0
    while i < len(toks):
        if toks[i] == "-":
            out += [(n, toks[i + 1]) for n in pending]
            pending = []
            i += 2
        else:
            pending.append(toks[i])
            i += 1
    out += [(n, "object") for n in pending]
    return out


def section(text, key):
    start = text.index("(" + key)
    depth = 0
    for j in range(start, len(text)):
        depth += {"(": 1, ")": -1}.get(text[j], 0)
        if depth == 0:
            return text[start + len(key) + 1 : j]
    raise ValueError(key)


def strip_comments(text):
    return re.sub(r";[^\n]*", "", text)


def main(domain_path, problem_path):
    dom = strip_comments(open(domain_path).read())
    prob = strip_comments(open(problem_path).read())
    parent = dict(typed_list(section(dom, ":types")))

    def ancestors(t):
        while t:
            yield t
            t = parent.get(t) if t != "object" else None

    objects = typed_list(section(prob, ":objects"))
    total = 0
    for m in re.finditer(r"\(:action\s+(\S+)\s+:parameters\s*\(([^)]*)\)", dom):
        params = typed_list(m.group(2))
        pools = [[o for o, ot in objects if t in ancestors(ot)] for _, t in params]
        n = sum(1 for _ in itertools.product(*pools))
        print(m.group(1), n)
        total += n
    print("total", total)


if __name__ == "__main__":
    main(*sys.argv[1:3])
