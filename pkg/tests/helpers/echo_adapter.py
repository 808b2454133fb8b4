"""Tiny wire-protocol test double.

Reads request lines from stdin (or --requests) and answers with the last
whitespace-separated word of each input. Fault injection flags exercise
the client's error paths.
"""

import argparse
import json
import sys


def respond(req, args):
    rid = req["id"]
    if args.drop_id and rid == args.drop_id:
        return None
    words = req["input"].split()
    output = words[-1] if words else ""
    if args.garble_id and rid == args.garble_id:
        output = "spos="
    return {"id": rid, "output": output}


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--requests")
    parser.add_argument("--responses")
    parser.add_argument("--drop-id")
    parser.add_argument("--garble-id")
    parser.add_argument("--duplicate-id")
    parser.add_argument("--bad-line", action="store_true")
    parser.add_argument("--exit-code", type=int, default=0)
    parser.add_argument("--hang", action="store_true")
    args = parser.parse_args()

    if args.hang:
        import time
        time.sleep(3600)
        return args.exit_code

    source = open(args.requests) if args.requests else sys.stdin
    sink = open(args.responses, "w") if args.responses else sys.stdout
    emitted_bad = False
    with source, sink:
        for line in source:
            line = line.strip()
            if not line:
                continue
            req = json.loads(line)
            if args.bad_line and not emitted_bad:
                sink.write("this is not json\n")
                emitted_bad = True
            resp = respond(req, args)
            if resp is None:
                continue
            sink.write(json.dumps(resp) + "\n")
            if args.duplicate_id and req["id"] == args.duplicate_id:
                sink.write(json.dumps(resp) + "\n")
            sink.flush()
    return args.exit_code


if __name__ == "__main__":
    sys.exit(main())
