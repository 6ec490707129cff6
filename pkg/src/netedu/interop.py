"""Interoperability harness: run client/server MTP pairs through the
impairment proxy and score every ordered pairing in a matrix.

An implementation is described by two shell command templates. The client
template gets {host} {port} {file} ({timeout} optional), the server
template {port} {out} ({timeout} optional). A cell passes when the bytes
the server wrote equal the workload (compared via SHA-256) before the
deadline. Failing cells never abort the rest of the matrix.

Also houses the vector-sum reference workload: a UDP echo-the-sum server
and a stream variant whose read loop must survive arbitrarily fragmented
delivery.
"""

from __future__ import annotations

import hashlib
import json
import shlex
import socket
import struct
import subprocess
import sys
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from pathlib import Path

from . import codec
from .linksim import ImpairmentConfig, UdpProxy, chop_stream

_REQUIRED = {"client": ("{host}", "{port}", "{file}"),
             "server": ("{port}", "{out}")}


class ImplSpecError(ValueError):
    pass


@dataclass(frozen=True)
class ImplSpec:
    name: str
    client: str  # command template
    server: str

    def __post_init__(self):
        for role in ("client", "server"):
            template = getattr(self, role)
            missing = [ph for ph in _REQUIRED[role] if ph not in template]
            if missing:
                raise ImplSpecError(
                    f"{self.name}: {role} template lacks {missing}")


def reference_impl(name: str = "reference") -> ImplSpec:
    py = shlex.quote(sys.executable)
    return ImplSpec(
        name=name,
        client=f"{py} -m netedu.cli mtp-send --peer {{host}}:{{port}} "
               f"--file {{file}} --timeout {{timeout}}",
        server=f"{py} -m netedu.cli mtp-recv --listen {{port}} "
               f"--out {{out}} --timeout {{timeout}}")


def mutant_impls() -> list[ImplSpec]:
    """The in-repo negative-test corpus."""
    py = shlex.quote(sys.executable)
    ref = reference_impl()
    return [
        ImplSpec("no-retransmit",
                 client=f"{py} -m netedu.mutants --mode no-retransmit-send "
                        f"--peer {{host}}:{{port}} --file {{file}} "
                        f"--timeout {{timeout}}",
                 server=ref.server),
        ImplSpec("bad-crc",
                 client=ref.client,
                 server=f"{py} -m netedu.mutants --mode bad-crc-recv "
                        f"--listen {{port}} --out {{out}} "
                        f"--timeout {{timeout}}"),
    ]


def load_impls(path: str | Path) -> list[ImplSpec]:
    entries = json.loads(Path(path).read_text())
    impls = [ImplSpec(e["name"], e["client"], e["server"]) for e in entries]
    names = [i.name for i in impls]
    if len(set(names)) != len(names):
        raise ImplSpecError("implementation names must be unique")
    return impls


@dataclass
class CellResult:
    verdict: str  # pass | fail | timeout
    detail: str
    bytes_transferred: int
    duration_s: float
    digest_expected: str
    digest_actual: str | None = None

    def to_dict(self) -> dict:
        return self.__dict__.copy()


@dataclass
class InteropMatrix:
    impls: list[str]
    cells: dict[tuple[str, str], CellResult] = dc_field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"impls": self.impls,
                "cells": [{"client": c, "server": s, **r.to_dict()}
                          for (c, s), r in sorted(self.cells.items())]}


def _free_udp_port() -> int:
    s = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    return port


def _drain(proc: subprocess.Popen) -> str:
    try:
        out, err = proc.communicate(timeout=1.0)
    except subprocess.TimeoutExpired:
        proc.kill()
        out, err = proc.communicate()
    return ((out or "") + "\n" + (err or "")).strip()


def run_pair(client: ImplSpec, server: ImplSpec, workload: bytes,
             cfg: ImpairmentConfig, timeout_s: float = 30.0) -> CellResult:
    """One cell: server, impairment proxy, client; pass iff bytes match."""
    t0 = time.monotonic()
    expected = hashlib.sha256(workload).hexdigest()
    with tempfile.TemporaryDirectory(prefix="interop-") as tmp:
        workload_path = Path(tmp) / "workload.bin"
        out_path = Path(tmp) / "received.bin"
        workload_path.write_bytes(workload)
        server_port = _free_udp_port()
        fields = {"host": "127.0.0.1", "file": str(workload_path),
                  "out": str(out_path), "timeout": f"{timeout_s:.0f}"}
        server_cmd = shlex.split(
            server.server.format_map({**fields, "port": server_port}))
        proxy = None
        server_proc = client_proc = None
        try:
            server_proc = subprocess.Popen(
                server_cmd, stdout=subprocess.PIPE, stderr=subprocess.PIPE,
                text=True)
            proxy = UdpProxy(0, None, ("127.0.0.1", server_port), cfg)
            proxy.start()
            time.sleep(0.1)  # let the server bind
            if server_proc.poll() is not None:
                return CellResult("fail",
                                  f"server exited immediately: "
                                  f"{_drain(server_proc)}",
                                  0, time.monotonic() - t0, expected)
            client_cmd = shlex.split(
                client.client.format_map({**fields, "port": proxy.port}))
            client_proc = subprocess.Popen(
                client_cmd, stdout=subprocess.PIPE, stderr=subprocess.PIPE,
                text=True)
            deadline = t0 + timeout_s
            timed_out = False
            for proc in (client_proc, server_proc):
                remaining = deadline - time.monotonic()
                try:
                    proc.wait(timeout=max(0.05, remaining))
                except subprocess.TimeoutExpired:
                    timed_out = True
                    proc.kill()
            logs = "\n".join(_drain(p) for p in (client_proc, server_proc))
            received = out_path.read_bytes() if out_path.exists() else b""
            actual = hashlib.sha256(received).hexdigest()
            duration = time.monotonic() - t0
            integrity = logs.lower().count("integrity error")
            notes = []
            if integrity:
                notes.append(f"integrity errors: {integrity}")
            if received == workload:
                notes.insert(0, "file received intact")
                return CellResult("pass", "; ".join(notes), len(received),
                                  duration, expected, actual)
            notes.insert(0, f"received {len(received)} of {len(workload)} "
                            f"bytes")
            tail = logs[-400:].strip()
            if tail:
                notes.append(f"logs: {tail}")
            return CellResult("timeout" if timed_out else "fail",
                              "; ".join(notes), len(received), duration,
                              expected, actual)
        except OSError as exc:
            return CellResult("fail", f"spawn failure: {exc}", 0,
                              time.monotonic() - t0, expected)
        finally:
            for proc in (client_proc, server_proc):
                if proc is not None and proc.poll() is None:
                    proc.kill()
            if proxy is not None:
                proxy.stop()


def run_matrix(impls: list[ImplSpec], workload: bytes,
               cfg: ImpairmentConfig, timeout_s: float = 30.0,
               parallel: int = 4) -> InteropMatrix:
    """All ordered (client, server) pairings; cells carry their own
    failures and never abort the rest."""
    if not impls:
        raise ImplSpecError("need at least one implementation")
    matrix = InteropMatrix([i.name for i in impls])
    pairs = [(c, s) for c in impls for s in impls]

    def cell(pair):
        c, s = pair
        try:
            return (c.name, s.name), run_pair(c, s, workload, cfg, timeout_s)
        except Exception as exc:  # a broken cell must not sink the matrix
            return (c.name, s.name), CellResult(
                "fail", f"harness error: {exc}", 0, 0.0,
                hashlib.sha256(workload).hexdigest())

    with ThreadPoolExecutor(max_workers=max(1, parallel)) as pool:
        for key, result in pool.map(cell, pairs):
            matrix.cells[key] = result
    return matrix


def render_matrix(matrix: InteropMatrix) -> str:
    names = matrix.impls
    width = max(len(n) for n in names + ["client\\server"]) + 2
    lines = ["".join(n.ljust(width) for n in ["client\\server"] + names)]
    for c in names:
        row = [c]
        for s in names:
            cell = matrix.cells.get((c, s))
            row.append(cell.verdict if cell else "-")
        lines.append("".join(x.ljust(width) for x in row))
    return "\n".join(lines)


def vecsum_udp_server(port: int = 0, host: str = "127.0.0.1"):
    """UDP sum server; returns (thread, port, stop). Replies to each
    datagram of big-endian int32s with the 4-byte wrapped sum."""
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    sock.bind((host, port))
    sock.settimeout(0.05)
    bound = sock.getsockname()[1]
    stop = threading.Event()

    def loop():
        while not stop.is_set():
            try:
                data, addr = sock.recvfrom(65535)
            except socket.timeout:
                continue
            except OSError:
                break
            try:
                total = codec.sum_vector(codec.decode_vector(data))
            except codec.VectorLengthError:
                continue
            sock.sendto(struct.pack(">i", total), addr)
        sock.close()

    thread = threading.Thread(target=loop, daemon=True)
    thread.start()
    return thread, bound, stop


def vecsum_stream_server(port: int = 0, host: str = "127.0.0.1"):
    """TCP sum server; the read loop accumulates whatever recv() returns
    until the client half-closes, the partial-delivery lesson."""
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    sock.bind((host, port))
    sock.listen(8)
    sock.settimeout(0.05)
    bound = sock.getsockname()[1]
    stop = threading.Event()

    def serve_one(conn):
        with conn:
            conn.settimeout(5.0)
            buf = bytearray()
            while True:
                chunk = conn.recv(4096)  # may be any fraction of the vector
                if not chunk:
                    break
                buf += chunk
            try:
                total = codec.sum_vector(codec.decode_vector(bytes(buf)))
            except codec.VectorLengthError:
                return
            conn.sendall(struct.pack(">i", total))

    def loop():
        while not stop.is_set():
            try:
                conn, _ = sock.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            serve_one(conn)
        sock.close()

    thread = threading.Thread(target=loop, daemon=True)
    thread.start()
    return thread, bound, stop


def sumvec_roundtrip(endpoint: tuple[str, int], values: list[int],
                     transport: str = "udp", seed: int = 0,
                     max_chunk: int = 7, timeout_s: float = 5.0) -> int:
    """Send a vector to a sum server and return the replied sum."""
    payload = codec.encode_vector(values)
    if transport == "udp":
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        sock.settimeout(timeout_s)
        try:
            sock.sendto(payload, endpoint)
            reply, _ = sock.recvfrom(65535)
        finally:
            sock.close()
    elif transport == "chopped-stream":
        sock = socket.create_connection(endpoint, timeout=timeout_s)
        try:
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            for chunk in chop_stream(payload, seed, max_chunk):
                sock.sendall(chunk)
            sock.shutdown(socket.SHUT_WR)
            reply = b""
            while len(reply) < 4:
                part = sock.recv(4 - len(reply))
                if not part:
                    break
                reply += part
        finally:
            sock.close()
    else:
        raise ValueError(f"unknown transport {transport!r}")
    if len(reply) != 4:
        raise codec.VectorLengthError(
            f"sum reply must be 4 bytes, got {len(reply)}")
    return struct.unpack(">i", reply)[0]
