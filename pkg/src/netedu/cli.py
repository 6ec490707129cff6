"""netedu command line: one umbrella command per subsystem.

    netedu serve     --bank DIR [--listen HOST:PORT --state FILE --static DIR]
    netedu grade     --bank DIR --exercise ID --answer FILE|- [--seed S]
    netedu linksim   --listen P --a HOST:PORT --b HOST:PORT [impairments]
    netedu mtp-send  --peer HOST:PORT --file F [--window W --rto MS]
    netedu mtp-recv  --listen PORT --out F [--window W]
    netedu newreno   --rtt 20 --segments 8 --loss 6,8 [--measure|--compare]
    netedu interop   --impls impls.json --file workload.bin [--seed S ...]
    netedu allocate  --roster roster.json --strategy balanced|choice --seed S
    netedu dissect   FILE [--packet N --mask a,b --hex --check]
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path


def _host_port(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected HOST:PORT, got {text!r}")
    return host, int(port)


def _int_set(text: str) -> frozenset[int]:
    if not text.strip():
        return frozenset()
    return frozenset(int(x) for x in text.split(","))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netedu",
        description="networking-education lab toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the exercise HTTP service")
    p.add_argument("--bank", required=True, help="exercise bank directory")
    p.add_argument("--listen", type=_host_port, default=("127.0.0.1", 8000))
    p.add_argument("--state", help="append-only session log file")
    p.add_argument("--static", help="directory with the web UI bundle")

    p = sub.add_parser("grade", help="grade one submission offline")
    p.add_argument("--bank", required=True)
    p.add_argument("--exercise", required=True)
    p.add_argument("--answer", required=True,
                   help="answer file, or - for stdin")
    p.add_argument("--seed", type=int, default=0,
                   help="instance seed for randomized exercise types")

    p = sub.add_parser("linksim", help="run the UDP impairment proxy")
    p.add_argument("--listen", type=int, required=True)
    p.add_argument("--a", type=_host_port, default=None,
                   help="endpoint A (default: learned from first datagram)")
    p.add_argument("--b", type=_host_port, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delay", type=float, default=0.0, help="base delay ms")
    p.add_argument("--jitter", type=float, default=0.0)
    p.add_argument("--loss", type=float, default=0.0)
    p.add_argument("--dup", type=float, default=0.0)
    p.add_argument("--reorder", type=float, default=0.0)
    p.add_argument("--drop", type=_int_set, default=frozenset(),
                   help="comma-separated ordinals to drop, e.g. 6,8")
    p.add_argument("--direction", choices=["both", "a_to_b", "b_to_a"],
                   default="both")
    p.add_argument("--log", help="write the event log here on shutdown")

    p = sub.add_parser("mtp-send", help="send a file over MTP/UDP")
    p.add_argument("--peer", type=_host_port, required=True)
    p.add_argument("--file", required=True)
    p.add_argument("--window", type=int, default=31)
    p.add_argument("--rto", type=float, default=200.0)
    p.add_argument("--local", type=int, default=0, help="local UDP port")
    p.add_argument("--timeout", type=float, default=60.0)

    p = sub.add_parser("mtp-recv", help="receive one MTP transfer")
    p.add_argument("--listen", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--window", type=int, default=31)
    p.add_argument("--timeout", type=float, default=60.0)

    p = sub.add_parser("newreno", help="predict a New Reno send timeline")
    p.add_argument("--rtt", type=float, required=True)
    p.add_argument("--segments", type=int, required=True)
    p.add_argument("--loss", type=_int_set, default=frozenset(),
                   help="lost transmission ordinals, e.g. 6,8")
    p.add_argument("--cwnd0", type=int, default=1)
    p.add_argument("--ssthresh", type=int, default=64)
    p.add_argument("--rto", type=float, default=200.0)
    p.add_argument("--measure", action="store_true",
                   help="print the simulator-measured timeline instead")
    p.add_argument("--compare", action="store_true",
                   help="diff prediction against measurement")
    p.add_argument("--tol", type=float, default=1.0)

    p = sub.add_parser("interop", help="run an interoperability matrix")
    p.add_argument("--impls", required=True, help="implementations JSON file")
    p.add_argument("--file", required=True, help="workload file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--loss", type=float, default=0.05)
    p.add_argument("--delay", type=float, default=10.0)
    p.add_argument("--reorder", type=float, default=0.02)
    p.add_argument("--timeout", type=float, default=30.0)
    p.add_argument("--parallel", type=int, default=4)
    p.add_argument("--out", help="write the matrix as JSON here")

    p = sub.add_parser("allocate", help="allocate peer reviews")
    p.add_argument("--roster", required=True)
    p.add_argument("--strategy", choices=["balanced", "choice"],
                   required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--out", help="write the allocation as JSON here")

    p = sub.add_parser("dissect", help="dissect a pcap capture")
    p.add_argument("file")
    p.add_argument("--packet", type=int, default=None,
                   help="only this packet index")
    p.add_argument("--mask", default="",
                   help="comma-separated field paths to mask")
    p.add_argument("--hex", action="store_true", help="also hex-dump")
    p.add_argument("--check", action="store_true", help="verify checksums")
    return parser


def _cmd_serve(args) -> int:
    import uvicorn
    from .service import create_app
    app = create_app(bank_dir=args.bank, state_file=args.state,
                     static_dir=args.static)
    host, port = args.listen
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return 0


def _read_answer(source: str) -> str:
    if source == "-":
        return sys.stdin.read()
    return Path(source).read_text()


def _cmd_grade(args) -> int:
    from . import exercises
    bank = exercises.load_bank(args.bank)
    if args.exercise not in bank:
        print(f"unknown exercise {args.exercise}", file=sys.stderr)
        return 2
    q = bank[args.exercise]
    raw = _read_answer(args.answer).strip()
    qtype = exercises.Bank.qtype(q)
    if qtype == "mcq":
        instance = exercises.instantiate_mcq(q, args.seed)
        verdict = exercises.grade_mcq(instance, int(raw))
    elif qtype == "short":
        verdict = exercises.grade_short(q, raw)
    elif qtype == "trace_mask":
        verdict = exercises.grade_trace_mask(q, json.loads(raw))
    else:
        instance = exercises.instantiate_reorder(q, args.seed)
        verdict = exercises.grade_reorder(instance, json.loads(raw))
    print(json.dumps(verdict.to_dict(), indent=2))
    return 0 if verdict.correct else 1


def _cmd_linksim(args) -> int:
    import signal
    import threading
    from .linksim import Direction, ImpairmentConfig, UdpProxy
    cfg = ImpairmentConfig(seed=args.seed, base_delay=args.delay,
                           jitter=args.jitter, loss_prob=args.loss,
                           dup_prob=args.dup, reorder_prob=args.reorder,
                           drop_ordinals=args.drop,
                           direction=Direction(args.direction))
    proxy = UdpProxy(args.listen, args.a, args.b, cfg, log_path=args.log)
    proxy.start()
    print(f"linksim relaying on port {proxy.port} "
          f"(a={args.a or 'auto'}, b={args.b})", file=sys.stderr)
    stop = threading.Event()
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    signal.signal(signal.SIGINT, lambda *_: stop.set())
    stop.wait()
    proxy.stop()
    return 0


def _cmd_mtp_send(args) -> int:
    from . import mtp
    data = Path(args.file).read_bytes()
    try:
        report = mtp.send_file(args.peer, data, window=args.window,
                               rto=args.rto, local_port=args.local,
                               timeout_s=args.timeout)
    except mtp.MtpError as exc:
        print(f"transfer failed: {exc}", file=sys.stderr)
        return 1
    print(f"sent {len(data)} bytes in {report.completion_ms:.0f} ms "
          f"({report.data_frames_sent} data frames, "
          f"{report.retransmissions} retransmissions)")
    return 0


def _cmd_mtp_recv(args) -> int:
    from . import mtp
    try:
        data = mtp.recv_file(args.listen, window=args.window,
                             timeout_s=args.timeout)
    except mtp.MtpError as exc:
        print(f"receive failed: {exc}", file=sys.stderr)
        return 1
    Path(args.out).write_bytes(data)
    print(f"received {len(data)} bytes into {args.out}")
    return 0


def _cmd_newreno(args) -> int:
    from . import newreno
    scenario = newreno.Scenario(rtt=args.rtt, num_segments=args.segments,
                                init_cwnd=args.cwnd0,
                                ssthresh0=args.ssthresh, rto=args.rto,
                                loss_ordinals=args.loss)
    if args.compare:
        diff = newreno.compare(newreno.predict(scenario),
                               newreno.measure(scenario), args.tol)
        print(diff)
        return 0 if diff.empty else 1
    timeline = (newreno.measure(scenario) if args.measure
                else newreno.predict(scenario))
    print(newreno.render_timeline(timeline))
    return 0


def _cmd_interop(args) -> int:
    from . import interop
    from .linksim import ImpairmentConfig
    impls = interop.load_impls(args.impls)
    cfg = ImpairmentConfig(seed=args.seed, base_delay=args.delay,
                           loss_prob=args.loss, reorder_prob=args.reorder)
    matrix = interop.run_matrix(impls, Path(args.file).read_bytes(), cfg,
                                timeout_s=args.timeout,
                                parallel=args.parallel)
    print(interop.render_matrix(matrix))
    if args.out:
        Path(args.out).write_text(json.dumps(matrix.to_dict(), indent=2))
    failures = [c for c in matrix.cells.values() if c.verdict != "pass"]
    return 0 if not failures else 1


def _cmd_allocate(args) -> int:
    from . import peerreview
    raw = json.loads(Path(args.roster).read_text())
    roster = peerreview.Roster(
        projects=list(raw["projects"]),
        authors={p: set(s) for p, s in raw["authors"].items()})
    if args.strategy == "balanced":
        alloc = peerreview.allocate_balanced(roster, args.seed)
    else:
        alloc = peerreview.allocate_choice(roster, args.seed, k=args.k)
    doc = {"strategy": alloc.strategy, "seed": alloc.seed,
           "assigned": alloc.assigned}
    text = json.dumps(doc, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text)
    print(text)
    return 0


def _cmd_dissect(args) -> int:
    from . import dissect
    capture = dissect.read_pcap(Path(args.file).read_bytes())
    indices = (range(len(capture.packets)) if args.packet is None
               else [args.packet])
    masks = [m for m in args.mask.split(",") if m]
    for i in indices:
        pkt = capture.packets[i]
        tree = dissect.dissect_packet(pkt.data, capture.link_type)
        if masks:
            tree = dissect.mask_fields(tree, masks)
        print(f"# packet {i}  t={pkt.ts_us} us  {len(pkt.data)} bytes")
        print(dissect.render_tree(tree))
        if args.hex:
            print(dissect.hex_dump(pkt.data,
                                   dissect.masked_byte_offsets(tree)))
        if args.check:
            for verdict in dissect.verify_checksums(tree, pkt.data):
                print(f"checksum {verdict.layer}: {verdict.status}")
        print()
    return 0


_COMMANDS = {
    "serve": _cmd_serve,
    "grade": _cmd_grade,
    "linksim": _cmd_linksim,
    "mtp-send": _cmd_mtp_send,
    "mtp-recv": _cmd_mtp_recv,
    "newreno": _cmd_newreno,
    "interop": _cmd_interop,
    "allocate": _cmd_allocate,
    "dissect": _cmd_dissect,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
