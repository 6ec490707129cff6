import random
import threading

import pytest

from netedu import mtp
from netedu.linksim import Direction, ImpairmentConfig
from netedu.mtp import (FTYPE_ACK, FTYPE_DATA, FTYPE_FIN, MtpAbortError,
                        MtpFrame, Receiver, Sender, decode_frame,
                        encode_frame, transfer)


def _ack(seq, window=31):
    return MtpFrame(FTYPE_ACK, window, seq)


class TestFrameCodec:
    def test_encode_example(self):
        # header layout: (ftype << 5) | window, seq, 16-bit length
        frame = MtpFrame(FTYPE_DATA, 1, 0, b"")
        assert encode_frame(frame).hex() == "0100000099f8b879"

    def test_roundtrip_random_frames(self):
        rnd = random.Random(77)
        for _ in range(10_000):
            ftype = rnd.choice([FTYPE_DATA, FTYPE_ACK, FTYPE_FIN])
            payload = rnd.randbytes(
                rnd.randrange(0, 513)) if ftype == FTYPE_DATA else b""
            frame = MtpFrame(ftype, rnd.randrange(0, 32),
                             rnd.randrange(0, 256), payload)
            assert decode_frame(encode_frame(frame)) == frame

    def test_bit_flip_detected(self):
        data = bytearray(encode_frame(MtpFrame(FTYPE_DATA, 3, 9, b"hello")))
        data[-1] ^= 0x01
        with pytest.raises(mtp.IntegrityError):
            decode_frame(bytes(data))

    def test_unknown_type(self):
        import struct
        from netedu import codec
        body = struct.pack(">BBH", (5 << 5) | 1, 0, 0)
        data = body + struct.pack(">I", codec.crc32(body))
        with pytest.raises(mtp.UnknownTypeError):
            decode_frame(data)

    def test_length_mismatch(self):
        import struct
        from netedu import codec
        body = struct.pack(">BBH", 0, 0, 7) + b"xy"
        data = body + struct.pack(">I", codec.crc32(body))
        with pytest.raises(mtp.FramingError):
            decode_frame(data)

    def test_too_short(self):
        with pytest.raises(mtp.FramingError):
            decode_frame(b"\x00\x01\x02")

    def test_invalid_field_ranges(self):
        with pytest.raises(mtp.FramingError):
            MtpFrame(FTYPE_DATA, 32, 0)
        with pytest.raises(mtp.FramingError):
            MtpFrame(FTYPE_DATA, 0, 256)
        with pytest.raises(mtp.FramingError):
            MtpFrame(FTYPE_ACK, 0, 0, b"payload")
        with pytest.raises(mtp.FramingError):
            MtpFrame(FTYPE_DATA, 0, 0, b"x" * 513)


class TestSender:
    def test_segmentation_respects_window(self):
        s = Sender(window=2)
        frames = s.on_app_data(b"\xab" * 1300, now=0.0)
        assert [len(f.payload) for f in frames] == [512, 512]
        assert len(s.pending) == 1 and len(s.pending[0]) == 276

    def test_zero_window_queues_everything(self):
        s = Sender(window=1)
        s.peer_window = 0
        frames = s.on_app_data(b"\x01" * 100, now=0.0)
        assert frames == []
        assert len(s.pending) == 1

    def test_empty_data_no_change(self):
        s = Sender()
        assert s.on_app_data(b"", now=0.0) == []
        assert s.idle

    def test_cumulative_ack_release(self):
        s = Sender(window=3)
        s.on_app_data(b"a" * (512 * 3), now=0.0)
        assert sorted(s.in_flight) == [0, 1, 2]
        s.on_ack(_ack(2), now=10.0)
        assert sorted(s.in_flight) == [2]

    def test_fast_retransmit_on_third_dupack(self):
        s = Sender(window=1)
        s.on_app_data(b"x" * 10, now=0.0)
        assert 0 in s.in_flight
        assert s.on_ack(_ack(0), now=1.0) == []
        assert s.on_ack(_ack(0), now=2.0) == []
        frames = s.on_ack(_ack(0), now=3.0)
        assert len(frames) == 1 and frames[0].seq == 0
        assert s.dup_ack_count == 0
        assert s.retransmissions == 1

    def test_ack_outside_span_ignored(self):
        s = Sender(window=2)
        s.on_app_data(b"y" * 1024, now=0.0)
        s.on_ack(_ack(100), now=1.0)
        assert sorted(s.in_flight) == [0, 1]

    def test_rto_boundary(self):
        s = Sender(window=1, rto=200.0)
        s.on_app_data(b"z", now=0.0)
        assert s.on_tick(199.0) == []
        frames = s.on_tick(200.0)
        assert len(frames) == 1 and frames[0].seq == 0

    def test_retransmit_cap_aborts(self):
        s = Sender(window=1, rto=100.0)
        s.on_app_data(b"z", now=0.0)
        t = 0.0
        with pytest.raises(MtpAbortError):
            for _ in range(20):
                t += 100.0
                s.on_tick(t)

    def test_window_opens_on_ack(self):
        s = Sender(window=2)
        s.on_app_data(b"b" * (512 * 4), now=0.0)
        assert len(s.in_flight) == 2
        frames = s.on_ack(_ack(1, window=2), now=5.0)
        assert [f.seq for f in frames] == [2]
        assert len(s.in_flight) == 2


class TestReceiver:
    def test_out_of_order_reassembly(self):
        r = Receiver()
        ack, data = r.on_frame(MtpFrame(FTYPE_DATA, 0, 1, b"BBB"))
        assert data == b"" and ack.seq == 0
        ack, data = r.on_frame(MtpFrame(FTYPE_DATA, 0, 0, b"AAA"))
        assert data == b"AAABBB"
        assert ack.seq == 2
        assert r.expected_seq == 2

    def test_duplicate_reacked_without_delivery(self):
        r = Receiver()
        r.on_frame(MtpFrame(FTYPE_DATA, 0, 0, b"AAA"))
        ack, data = r.on_frame(MtpFrame(FTYPE_DATA, 0, 0, b"AAA"))
        assert data == b""
        assert ack.seq == 1

    def test_out_of_window_ignored(self):
        r = Receiver(window=4)
        ack, data = r.on_frame(MtpFrame(FTYPE_DATA, 0, 100, b"zz"))
        assert data == b""
        assert ack.seq == 0
        assert not r.buffer

    def test_fin_after_delivery_half_closes(self):
        r = Receiver()
        r.on_frame(MtpFrame(FTYPE_DATA, 0, 0, b"AA"))
        ack, _ = r.on_frame(MtpFrame(FTYPE_FIN, 0, 1))
        assert r.half_closed
        assert ack.seq == 2  # FIN consumes a sequence number

    def test_early_fin_does_not_close(self):
        r = Receiver()
        ack, _ = r.on_frame(MtpFrame(FTYPE_FIN, 0, 3))
        assert not r.half_closed
        assert ack.seq == 0


class TestTransfer:
    def test_empty_file(self):
        report = transfer(b"", ImpairmentConfig(seed=1))
        assert report.delivered == b""
        assert report.data_frames_sent == 0
        kinds = [k for _, k, _ in report.sender_timeline]
        assert kinds.count("send") == 1  # the FIN

    def test_clean_transfer(self):
        data = bytes(range(256)) * 40
        report = transfer(data, ImpairmentConfig(seed=1, base_delay=5.0))
        assert report.delivered == data
        assert report.retransmissions == 0

    def test_lossy_transfer_delivers_exactly(self):
        rnd = random.Random(4242)
        data = rnd.randbytes(100_000)
        cfg = ImpairmentConfig(seed=42, base_delay=10.0, loss_prob=0.1)
        report = transfer(data, cfg)
        assert report.delivered == data
        assert report.retransmissions > 0

    def test_full_loss_aborts(self):
        cfg = ImpairmentConfig(seed=1, loss_prob=1.0)
        with pytest.raises(MtpAbortError):
            transfer(b"hello", cfg)

    def test_determinism(self):
        data = random.Random(9).randbytes(50_000)
        cfg = ImpairmentConfig(seed=7, base_delay=8.0, jitter=3.0,
                               loss_prob=0.1, reorder_prob=0.05)
        r1 = transfer(data, cfg)
        r2 = transfer(data, cfg)
        assert r1.sender_timeline == r2.sender_timeline
        assert r1.link_events == r2.link_events
        assert r1.completion_ms == r2.completion_ms

    def test_delivery_across_seeds_and_rates(self):
        rnd = random.Random(1)
        data = rnd.randbytes(20_000)
        for loss in (0.05, 0.15, 0.3):
            for seed in range(5):
                cfg = ImpairmentConfig(seed=seed, base_delay=5.0,
                                       loss_prob=loss, reorder_prob=0.05)
                report = transfer(data, cfg)
                assert report.delivered == data

    def test_window_safety(self):
        # instrumented run: in-flight never exceeds min(peer_window, 31)
        data = random.Random(2).randbytes(30_000)
        sender = Sender(window=5)
        orig_fill = sender._fill_window

        def checked_fill(now):
            frames = orig_fill(now)
            assert len(sender.in_flight) <= min(sender.peer_window, 31)
            return frames

        sender._fill_window = checked_fill
        receiver = Receiver(window=5)
        from netedu.linksim import LinkPipe
        import heapq
        cfg = ImpairmentConfig(seed=3, loss_prob=0.1, base_delay=2.0)
        pipe_ab = LinkPipe(cfg, Direction.A_TO_B)
        pipe_ba = LinkPipe(cfg, Direction.B_TO_A)
        heap = []
        counter = 0

        def push(direction, t, frames):
            nonlocal counter
            pipe = pipe_ab if direction is Direction.A_TO_B else pipe_ba
            for frame in frames:
                for dt, payload in pipe.send(t, encode_frame(frame)):
                    heapq.heappush(heap, (dt, counter, direction, payload))
                    counter += 1

        push(Direction.A_TO_B, 0.0, sender.on_app_data(data, 0.0))
        push(Direction.A_TO_B, 0.0, sender.close(0.0))
        delivered = bytearray()
        while not sender.done:
            t_rto = sender.next_timeout()
            t_event = heap[0][0] if heap else None
            if t_event is None and t_rto is None:
                break
            if t_event is None or (t_rto is not None and t_rto < t_event):
                push(Direction.A_TO_B, t_rto, sender.on_tick(t_rto))
                continue
            now, _, direction, payload = heapq.heappop(heap)
            frame = decode_frame(payload)
            if direction is Direction.A_TO_B:
                ack, chunk = receiver.on_frame(frame)
                delivered += chunk
                push(Direction.B_TO_A, now, [ack])
            else:
                push(Direction.A_TO_B, now, sender.on_ack(frame, now))
        assert bytes(delivered) == data


class TestRealSockets:
    def test_udp_loopback_transfer(self):
        import socket as socketlib
        import time

        data = random.Random(3).randbytes(5000)
        probe = socketlib.socket(socketlib.AF_INET, socketlib.SOCK_DGRAM)
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
        probe.close()

        result = {}

        def run_recv():
            result["data"] = mtp.recv_file(port, timeout_s=10.0,
                                           linger_s=0.2, host="127.0.0.1")

        th = threading.Thread(target=run_recv)
        th.start()
        time.sleep(0.1)
        report = mtp.send_file(("127.0.0.1", port), data, timeout_s=10.0)
        th.join(timeout=10.0)
        assert result["data"] == data
        assert report.data_frames_sent == 10
