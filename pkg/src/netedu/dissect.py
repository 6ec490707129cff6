"""Classic-pcap reader and a simplified Ethernet/IPv4/TCP/UDP dissector.

Packets are dissected into a tree of named fields with exact byte/bit
offsets, so the same tree drives a Wireshark-style field listing, a hex
pane with per-field highlighting, and masked-field prediction exercises.
Dissection never hard-fails: short headers mark the layer truncated and
the leftover bytes become an opaque field, so any byte string round-trips.
"""

from __future__ import annotations

import copy
import enum
import struct
from dataclasses import dataclass, field as dc_field

PCAP_MAGIC_BE = 0xA1B2C3D4
PCAP_MAGIC_LE = 0xD4C3B2A1
PCAPNG_MAGIC = 0x0A0D0D0A

ETHERTYPE_IPV4 = 0x0800
IPPROTO_TCP = 6
IPPROTO_UDP = 17


class PcapError(ValueError):
    """Unparseable capture file; `offset` is the failing byte position."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class FieldPathError(KeyError):
    def __init__(self, path: str):
        super().__init__(path)
        self.path = path


class LinkType(enum.Enum):
    ETHERNET = 1
    RAW_IP = 101


@dataclass(frozen=True)
class TimedPacket:
    ts_us: int  # microseconds since epoch
    data: bytes


@dataclass(frozen=True)
class Capture:
    link_type: LinkType
    packets: list[TimedPacket]


@dataclass
class Field:
    name: str
    byte_offset: int  # absolute within the packet
    bit_offset: int  # 0 = most significant bit of the byte
    bit_width: int
    raw_value: int | bytes
    display: str
    masked: bool = False


@dataclass
class Layer:
    name: str
    fields: list[Field] = dc_field(default_factory=list)
    truncated: bool = False

    def add(self, name, byte_offset, bit_offset, bit_width, raw_value, display):
        self.fields.append(
            Field(name, byte_offset, bit_offset, bit_width, raw_value, display))


@dataclass
class PacketTree:
    layers: list[Layer]
    packet_len: int

    def iter_fields(self):
        for layer in self.layers:
            for f in layer.fields:
                yield layer, f


def read_pcap(data: bytes) -> Capture:
    """Parse a classic pcap file (microsecond timestamps only)."""
    if len(data) < 24:
        raise PcapError("file shorter than pcap global header", 0)
    magic = struct.unpack(">I", data[:4])[0]
    if magic == PCAPNG_MAGIC:
        raise PcapError("pcapng unsupported, use classic pcap", 0)
    if magic == PCAP_MAGIC_BE:
        endian = ">"
    elif magic == PCAP_MAGIC_LE:
        endian = "<"
    else:
        raise PcapError(f"bad pcap magic 0x{magic:08x}", 0)
    network = struct.unpack(endian + "I", data[20:24])[0]
    try:
        link_type = LinkType(network)
    except ValueError:
        raise PcapError(f"unsupported link type {network}", 20) from None

    packets = []
    off = 24
    while off < len(data):
        if off + 16 > len(data):
            raise PcapError("truncated record header", off)
        ts_sec, ts_usec, incl_len, orig_len = struct.unpack(
            endian + "IIII", data[off:off + 16])
        off += 16
        if incl_len > orig_len:
            raise PcapError("captured length exceeds original length", off - 8)
        if off + incl_len > len(data):
            raise PcapError("truncated packet record", off)
        packets.append(TimedPacket(ts_sec * 1_000_000 + ts_usec,
                                   data[off:off + incl_len]))
        off += incl_len
    return Capture(link_type, packets)


def write_pcap(capture: Capture) -> bytes:
    """Serialize a Capture as a little-endian classic pcap file."""
    out = bytearray(struct.pack("<IHHiIII", PCAP_MAGIC_BE, 2, 4, 0, 0, 65535,
                                capture.link_type.value))
    for pkt in capture.packets:
        out += struct.pack("<IIII", pkt.ts_us // 1_000_000,
                           pkt.ts_us % 1_000_000, len(pkt.data), len(pkt.data))
        out += pkt.data
    return bytes(out)


def _mac(raw: bytes) -> str:
    return ":".join(f"{b:02x}" for b in raw)


def _ip(raw: bytes) -> str:
    return ".".join(str(b) for b in raw)


def _opaque(layer: Layer, name: str, pkt: bytes, off: int) -> None:
    if off < len(pkt):
        raw = pkt[off:]
        layer.add(name, off, 0, 8 * len(raw), raw, raw.hex())


def _truncate(layer: Layer, pkt: bytes, off: int) -> None:
    layer.truncated = True
    _opaque(layer, "truncated", pkt, off)


def dissect_packet(pkt: bytes, link_type: LinkType) -> PacketTree:
    """Dissect raw packet bytes into a PacketTree. Never raises."""
    layers: list[Layer] = []
    if link_type is LinkType.ETHERNET:
        stop = _dissect_ethernet(pkt, layers)
    else:
        stop = _dissect_ipv4(pkt, 0, layers)
    if not stop and not layers:
        # zero-length packet: empty tree
        pass
    return PacketTree(layers, len(pkt))


def _dissect_ethernet(pkt: bytes, layers: list[Layer]) -> bool:
    eth = Layer("eth")
    layers.append(eth)
    if len(pkt) < 14:
        _truncate(eth, pkt, 0)
        return True
    eth.add("dst", 0, 0, 48, pkt[0:6], _mac(pkt[0:6]))
    eth.add("src", 6, 0, 48, pkt[6:12], _mac(pkt[6:12]))
    ethertype = struct.unpack(">H", pkt[12:14])[0]
    eth.add("type", 12, 0, 16, ethertype, f"0x{ethertype:04x}")
    if ethertype == ETHERTYPE_IPV4:
        return _dissect_ipv4(pkt, 14, layers)
    payload = Layer("data")
    _opaque(payload, "payload", pkt, 14)
    if payload.fields:
        layers.append(payload)
    return True


def _dissect_ipv4(pkt: bytes, off: int, layers: list[Layer]) -> bool:
    ip = Layer("ipv4")
    layers.append(ip)
    if off + 20 > len(pkt):
        _truncate(ip, pkt, off)
        return True
    version = pkt[off] >> 4
    ihl = pkt[off] & 0x0F
    ip.add("version", off, 0, 4, version, str(version))
    ip.add("ihl", off, 4, 4, ihl, str(ihl))
    ip.add("tos", off + 1, 0, 8, pkt[off + 1], f"0x{pkt[off + 1]:02x}")
    total_len = struct.unpack(">H", pkt[off + 2:off + 4])[0]
    ip.add("total_length", off + 2, 0, 16, total_len, str(total_len))
    ident = struct.unpack(">H", pkt[off + 4:off + 6])[0]
    ip.add("id", off + 4, 0, 16, ident, f"0x{ident:04x}")
    flags = pkt[off + 6] >> 5
    names = [n for bit, n in ((4, "RB"), (2, "DF"), (1, "MF")) if flags & bit]
    ip.add("flags", off + 6, 0, 3, flags,
           f"0x{flags:x}" + (f" ({','.join(names)})" if names else ""))
    frag = struct.unpack(">H", pkt[off + 6:off + 8])[0] & 0x1FFF
    ip.add("frag_offset", off + 6, 3, 13, frag, str(frag))
    ip.add("ttl", off + 8, 0, 8, pkt[off + 8], str(pkt[off + 8]))
    proto = pkt[off + 9]
    ip.add("protocol", off + 9, 0, 8, proto, str(proto))
    cksum = struct.unpack(">H", pkt[off + 10:off + 12])[0]
    ip.add("checksum", off + 10, 0, 16, cksum, f"0x{cksum:04x}")
    ip.add("src", off + 12, 0, 32, pkt[off + 12:off + 16], _ip(pkt[off + 12:off + 16]))
    ip.add("dst", off + 16, 0, 32, pkt[off + 16:off + 20], _ip(pkt[off + 16:off + 20]))
    hdr_len = max(ihl, 5) * 4
    if ihl > 5:
        opt_end = off + hdr_len
        if opt_end > len(pkt):
            _truncate(ip, pkt, off + 20)
            return True
        raw = pkt[off + 20:opt_end]
        ip.add("options", off + 20, 0, 8 * len(raw), raw, raw.hex())
    next_off = off + hdr_len
    if proto == IPPROTO_TCP:
        return _dissect_tcp(pkt, next_off, layers)
    if proto == IPPROTO_UDP:
        return _dissect_udp(pkt, next_off, layers)
    payload = Layer("data")
    _opaque(payload, "payload", pkt, next_off)
    if payload.fields:
        layers.append(payload)
    return True


_TCP_FLAG_BITS = ["cwr", "ece", "urg", "ack", "psh", "rst", "syn", "fin"]


def _dissect_tcp(pkt: bytes, off: int, layers: list[Layer]) -> bool:
    tcp = Layer("tcp")
    layers.append(tcp)
    if off + 20 > len(pkt):
        _truncate(tcp, pkt, off)
        return True
    sport, dport = struct.unpack(">HH", pkt[off:off + 4])
    tcp.add("srcport", off, 0, 16, sport, str(sport))
    tcp.add("dstport", off + 2, 0, 16, dport, str(dport))
    seq, ack = struct.unpack(">II", pkt[off + 4:off + 12])
    tcp.add("seq", off + 4, 0, 32, seq, str(seq))
    tcp.add("ack", off + 8, 0, 32, ack, str(ack))
    data_off = pkt[off + 12] >> 4
    tcp.add("data_offset", off + 12, 0, 4, data_off, str(data_off))
    tcp.add("reserved", off + 12, 4, 4, pkt[off + 12] & 0x0F,
            str(pkt[off + 12] & 0x0F))
    flags = pkt[off + 13]
    for i, name in enumerate(_TCP_FLAG_BITS):
        bit = (flags >> (7 - i)) & 1
        tcp.add(f"flags.{name}", off + 13, i, 1, bit, str(bit))
    window = struct.unpack(">H", pkt[off + 14:off + 16])[0]
    tcp.add("window", off + 14, 0, 16, window, str(window))
    cksum = struct.unpack(">H", pkt[off + 16:off + 18])[0]
    tcp.add("checksum", off + 16, 0, 16, cksum, f"0x{cksum:04x}")
    urgent = struct.unpack(">H", pkt[off + 18:off + 20])[0]
    tcp.add("urgent", off + 18, 0, 16, urgent, str(urgent))
    hdr_len = max(data_off, 5) * 4
    if data_off > 5:
        opt_end = off + hdr_len
        if opt_end > len(pkt):
            _truncate(tcp, pkt, off + 20)
            return True
        raw = pkt[off + 20:opt_end]
        tcp.add("options", off + 20, 0, 8 * len(raw), raw, raw.hex())
    payload = Layer("data")
    _opaque(payload, "payload", pkt, off + hdr_len)
    if payload.fields:
        layers.append(payload)
    return True


def _dissect_udp(pkt: bytes, off: int, layers: list[Layer]) -> bool:
    udp = Layer("udp")
    layers.append(udp)
    if off + 8 > len(pkt):
        _truncate(udp, pkt, off)
        return True
    sport, dport, length, cksum = struct.unpack(">HHHH", pkt[off:off + 8])
    udp.add("srcport", off, 0, 16, sport, str(sport))
    udp.add("dstport", off + 2, 0, 16, dport, str(dport))
    udp.add("length", off + 4, 0, 16, length, str(length))
    udp.add("checksum", off + 6, 0, 16, cksum, f"0x{cksum:04x}")
    payload = Layer("data")
    _opaque(payload, "payload", pkt, off + 8)
    if payload.fields:
        layers.append(payload)
    return True


def field_path(layer: Layer, f: Field) -> str:
    return f"{layer.name}.{f.name}"


def resolve_path(tree: PacketTree, path: str) -> Field:
    for layer, f in tree.iter_fields():
        if field_path(layer, f) == path:
            return f
    raise FieldPathError(path)


def mask_fields(tree: PacketTree, paths: list[str]) -> PacketTree:
    """Copy of `tree` with the named fields marked masked."""
    masked = copy.deepcopy(tree)
    for path in paths:
        resolve_path(masked, path).masked = True
    return masked


def masked_byte_offsets(tree: PacketTree) -> set[int]:
    """Byte offsets touched by any masked field (for hex-pane blanking)."""
    out: set[int] = set()
    for _, f in tree.iter_fields():
        if f.masked:
            nbytes = (f.bit_offset + f.bit_width + 7) // 8
            out.update(range(f.byte_offset, f.byte_offset + nbytes))
    return out


def reserialize(tree: PacketTree) -> bytes:
    """Rebuild the exact packet bytes from the tree's fields."""
    buf = bytearray(tree.packet_len)
    for _, f in tree.iter_fields():
        if isinstance(f.raw_value, bytes):
            buf[f.byte_offset:f.byte_offset + len(f.raw_value)] = f.raw_value
        else:
            nbytes = (f.bit_offset + f.bit_width + 7) // 8
            region = int.from_bytes(
                buf[f.byte_offset:f.byte_offset + nbytes], "big")
            shift = nbytes * 8 - f.bit_offset - f.bit_width
            region |= (f.raw_value & ((1 << f.bit_width) - 1)) << shift
            buf[f.byte_offset:f.byte_offset + nbytes] = region.to_bytes(
                nbytes, "big")
    return bytes(buf)


def render_tree(tree: PacketTree, hide_masked: bool = True) -> str:
    """Canonical one-line-per-field rendering: `path = display`."""
    lines = []
    for layer, f in tree.iter_fields():
        value = "????" if (f.masked and hide_masked) else f.display
        lines.append(f"{field_path(layer, f)} = {value}")
    return "\n".join(lines)


def hex_dump(data: bytes, blank: set[int] | None = None) -> str:
    """Conventional 16-bytes-per-row hex dump; `blank` offsets render as ??."""
    blank = blank or set()
    rows = []
    for base in range(0, len(data), 16):
        chunk = data[base:base + 16]
        hexes, chars = [], []
        for i, b in enumerate(chunk):
            if base + i in blank:
                hexes.append("??")
                chars.append(".")
            else:
                hexes.append(f"{b:02x}")
                chars.append(chr(b) if 32 <= b < 127 else ".")
        left = " ".join(hexes[:8])
        right = " ".join(hexes[8:])
        rows.append(f"{base:04x}  {left:<23} {right:<23} |{''.join(chars)}|")
    return "\n".join(rows)


@dataclass(frozen=True)
class ChecksumVerdict:
    layer: str
    status: str  # valid | invalid | disabled | unverifiable
    stored: int | None = None
    computed: int | None = None

    @property
    def detail(self) -> str:
        if self.status == "invalid":
            return (f"{self.layer} checksum stored 0x{self.stored:04x} "
                    f"!= computed 0x{self.computed:04x}")
        return f"{self.layer} checksum {self.status}"


def ones_complement_sum(data: bytes) -> int:
    if len(data) % 2:
        data += b"\x00"
    total = sum(struct.unpack(f">{len(data) // 2}H", data))
    while total > 0xFFFF:
        total = (total & 0xFFFF) + (total >> 16)
    return total


def _internet_checksum(data: bytes) -> int:
    return ones_complement_sum(data) ^ 0xFFFF


def verify_checksums(tree: PacketTree, pkt: bytes) -> list[ChecksumVerdict]:
    """Recompute IPv4 and TCP/UDP checksums of a dissected packet."""
    verdicts = []
    ip_off = None
    ihl = 5
    proto = None
    for layer in tree.layers:
        if layer.name == "ipv4" and not layer.truncated:
            by_name = {f.name: f for f in layer.fields}
            ip_off = by_name["version"].byte_offset
            ihl = by_name["ihl"].raw_value
            proto = by_name["protocol"].raw_value
            hdr = pkt[ip_off:ip_off + ihl * 4]
            if len(hdr) < ihl * 4:
                verdicts.append(ChecksumVerdict("ipv4", "unverifiable"))
                continue
            stored = by_name["checksum"].raw_value
            zeroed = hdr[:10] + b"\x00\x00" + hdr[12:]
            computed = _internet_checksum(zeroed)
            status = "valid" if computed == stored else "invalid"
            verdicts.append(ChecksumVerdict("ipv4", status, stored, computed))
        elif layer.name in ("tcp", "udp") and not layer.truncated:
            by_name = {f.name: f for f in layer.fields}
            if ip_off is None:
                verdicts.append(ChecksumVerdict(layer.name, "unverifiable"))
                continue
            seg_off = by_name["srcport"].byte_offset
            segment = pkt[seg_off:]
            stored = by_name["checksum"].raw_value
            if layer.name == "udp" and stored == 0:
                verdicts.append(ChecksumVerdict("udp", "disabled", 0, None))
                continue
            src = pkt[ip_off + 12:ip_off + 16]
            dst = pkt[ip_off + 16:ip_off + 20]
            pseudo = src + dst + struct.pack(">BBH", 0, proto, len(segment))
            ck_at = by_name["checksum"].byte_offset - seg_off
            zeroed = segment[:ck_at] + b"\x00\x00" + segment[ck_at + 2:]
            computed = _internet_checksum(pseudo + zeroed)
            if layer.name == "udp" and computed == 0:
                computed = 0xFFFF  # RFC 768: transmitted as all-ones
            status = "valid" if computed == stored else "invalid"
            verdicts.append(
                ChecksumVerdict(layer.name, status, stored, computed))
    return verdicts
