#!/usr/bin/env python3
"""Generate the committed pcap fixtures under testdata/.

Frames are built with scapy and written with scapy's pcap writer so that the
C++ reader and dissector are checked against bytes they did not produce.
Run from the repository root:  python3 scripts/gen_fixtures.py
Re-running is deterministic (fixed seed, fixed clock).
"""

import random
import struct
import sys
from pathlib import Path

from scapy.all import ARP, DNS, DNSQR, DNSRR, Ether, ICMP, IP, IPOption_Router_Alert, LLC, Raw, TCP, UDP
from scapy.utils import RawPcapWriter

OUT = Path(__file__).resolve().parent.parent / "testdata"

BASE_SEC = 1476349200
SUBNET = "10.10.50."
HOSTS = {n: SUBNET + str(n) for n in range(81, 86)}
MACS = {n: "00:1b:21:0a:32:%02x" % n for n in range(81, 86)}
ROUTER_IP = SUBNET + "1"
ROUTER_MAC = "00:1b:21:0a:32:01"
BCAST = "ff:ff:ff:ff:ff:ff"


class Clock:
    def __init__(self, sec=BASE_SEC, nsec=123456789):
        self.sec = sec
        self.nsec = nsec

    def advance(self, nanos):
        total = self.sec * 1_000_000_000 + self.nsec + nanos
        self.sec, self.nsec = divmod(total, 1_000_000_000)
        return self.sec, self.nsec


class Capture:
    """Accumulates (sec, nsec, captured bytes, original length)."""

    def __init__(self, clock):
        self.clock = clock
        self.frames = []

    def add(self, pkt, gap_ns=None, cap_len=None, wire_len=None):
        data = bytes(pkt)
        wire = wire_len if wire_len is not None else len(data)
        if cap_len is not None:
            data = data[:cap_len]
        if gap_ns is None:
            gap_ns = random.randint(50_000, 30_000_000)
        sec, nsec = self.clock.advance(gap_ns)
        self.frames.append((sec, nsec, data, wire))

    def write(self, name, nano=True):
        path = OUT / name
        w = RawPcapWriter(str(path), linktype=1, nano=nano, snaplen=262144, sync=False)
        w._write_header(None)
        for sec, nsec, data, wire in self.frames:
            frac = nsec if nano else nsec // 1000
            w._write_packet(data, 1, sec=sec, usec=frac, caplen=len(data), wirelen=wire)
        w.close()
        print(f"wrote {path} ({len(self.frames)} frames)")


def eth(a, b):
    return Ether(src=MACS.get(a, a), dst=MACS.get(b, b))


def ip(a, b, **kw):
    return IP(src=HOSTS.get(a, a), dst=HOSTS.get(b, b), **kw)


def corrupt(data, offset):
    b = bytearray(data)
    b[offset] ^= 0x5A
    return bytes(b)


def set_bytes(data, offset, value):
    b = bytearray(data)
    b[offset:offset + len(value)] = value
    return bytes(b)


# --- traffic patterns -------------------------------------------------------

def arp_exchange(cap, asker, target):
    cap.add(Ether(src=MACS[asker], dst=BCAST) /
            ARP(op=1, hwsrc=MACS[asker], psrc=HOSTS[asker], pdst=HOSTS[target]))
    cap.add(Ether(src=MACS[target], dst=MACS[asker]) /
            ARP(op=2, hwsrc=MACS[target], psrc=HOSTS[target], hwdst=MACS[asker], pdst=HOSTS[asker]),
            gap_ns=random.randint(80_000, 400_000))


def ping(cap, a, b, ident, seq, rtt_ns=None, reply=True):
    payload = bytes(range(32))
    cap.add(eth(a, b) / ip(a, b, ttl=128, id=random.randint(0, 65535)) /
            ICMP(type=8, id=ident, seq=seq) / Raw(payload))
    if reply:
        cap.add(eth(b, a) / ip(b, a, ttl=128, id=random.randint(0, 65535)) /
                ICMP(type=0, id=ident, seq=seq) / Raw(payload),
                gap_ns=rtt_ns if rtt_ns is not None else random.randint(300_000, 2_000_000))


def dns_pair(cap, client, name):
    sport = random.randint(49152, 65535)
    qid = random.randint(0, 65535)
    cap.add(eth(client, ROUTER_MAC) / ip(client, ROUTER_IP) / UDP(sport=sport, dport=53) /
            DNS(id=qid, rd=1, qd=DNSQR(qname=name)))
    cap.add(eth(ROUTER_MAC, client) / ip(ROUTER_IP, client) / UDP(sport=53, dport=sport) /
            DNS(id=qid, qr=1, ra=1, qd=DNSQR(qname=name), an=DNSRR(rrname=name, rdata=HOSTS[85])),
            gap_ns=random.randint(200_000, 5_000_000))


def tcp_session(cap, client, server, dport, request=None, response=None, binary=None):
    sport = random.randint(49152, 65535)
    cseq = random.randint(0, 2**32 - 1)
    sseq = random.randint(0, 2**32 - 1)
    c = lambda: eth(client, server) / ip(client, server, flags="DF")
    s = lambda: eth(server, client) / ip(server, client, flags="DF")
    cap.add(c() / TCP(sport=sport, dport=dport, flags="S", seq=cseq, window=64240,
                      options=[("MSS", 1460), ("NOP", None), ("WScale", 8), ("NOP", None),
                               ("NOP", None), ("SAckOK", b"")]))
    cap.add(s() / TCP(sport=dport, dport=sport, flags="SA", seq=sseq, ack=cseq + 1, window=65535,
                      options=[("MSS", 1460)]))
    cap.add(c() / TCP(sport=sport, dport=dport, flags="A", seq=cseq + 1, ack=sseq + 1, window=502))
    cseq += 1
    sseq += 1
    if request is not None:
        cap.add(c() / TCP(sport=sport, dport=dport, flags="PA", seq=cseq, ack=sseq, window=502) / Raw(request))
        cseq += len(request)
    if binary is not None:
        cap.add(c() / TCP(sport=sport, dport=dport, flags="PA", seq=cseq, ack=sseq, window=502) / Raw(binary))
        cseq += len(binary)
    if response is not None:
        cap.add(s() / TCP(sport=dport, dport=sport, flags="PA", seq=sseq, ack=cseq, window=1024) / Raw(response))
        sseq += len(response)
    cap.add(c() / TCP(sport=sport, dport=dport, flags="FA", seq=cseq, ack=sseq, window=502))
    cap.add(s() / TCP(sport=dport, dport=sport, flags="FA", seq=sseq, ack=cseq + 1, window=1024))
    cap.add(c() / TCP(sport=sport, dport=dport, flags="A", seq=cseq + 1, ack=sseq + 1, window=502))


def http_get(path, host="intranet"):
    return (f"GET {path} HTTP/1.1\r\nHost: {host}\r\nUser-Agent: Mozilla/5.0\r\n"
            f"Accept: */*\r\nConnection: keep-alive\r\n\r\n").encode()


def http_post(path, body):
    return (f"POST {path} HTTP/1.1\r\nHost: intranet\r\nContent-Type: application/x-www-form-urlencoded\r\n"
            f"Content-Length: {len(body)}\r\n\r\n{body}").encode()


def http_resp(code, reason, body="<html><body>ok</body></html>"):
    return (f"HTTP/1.1 {code} {reason}\r\nServer: Apache/2.4\r\nContent-Type: text/html\r\n"
            f"Content-Length: {len(body)}\r\n\r\n{body}").encode()


# --- fixtures ---------------------------------------------------------------

def build_ping():
    random.seed(7)
    cap = Capture(Clock())
    arp_exchange(cap, 84, 85)
    for seq, rtt_us in zip(range(1, 5), (1500, 1210, 1380, 1650)):
        ping(cap, 84, 85, ident=1, seq=seq, rtt_ns=rtt_us * 1000)
        cap.clock.advance(1_000_000_000 - rtt_us * 1000)
    cap.write("ping.pcap")


def build_mixed():
    random.seed(11)
    cap = Capture(Clock(BASE_SEC + 60, 0))
    arp_exchange(cap, 81, 82)
    dns_pair(cap, 81, "intranet.ebsu.local")
    tcp_session(cap, 81, 85, 80, http_get("/index.html"), http_resp(200, "OK"))
    ping(cap, 82, 85, ident=0x0200, seq=1)
    dns_pair(cap, 83, "files.ebsu.local")
    cap.add(eth(84, BCAST) / ip(84, "10.10.50.255") / UDP(sport=137, dport=137) / Raw(b"\x80\x01" + bytes(48)))
    cap.add(eth(83, "01:00:5e:7f:ff:fa") / ip(83, "239.255.255.250", ttl=4) / UDP(sport=50123, dport=1900) /
            Raw(b"M-SEARCH * HTTP/1.1\r\nHOST: 239.255.255.250:1900\r\nMAN: \"ssdp:discover\"\r\n\r\n"))
    tcp_session(cap, 82, 85, 8080, http_post("/login", "user=admin&pass=x"), http_resp(302, "Found", ""))
    cap.add(eth(81, 85) / ip(81, 85) / UDP(sport=123, dport=123) / Raw(b"\x23" + bytes(47)))
    ping(cap, 81, 85, ident=0x0300, seq=7)
    dns_pair(cap, 82, "mail.ebsu.local")
    cap.write("mixed.pcap")


def build_scan():
    random.seed(23)
    cap = Capture(Clock(BASE_SEC + 120, 0))
    attacker = "10.10.50.99"
    amac = "00:de:ad:be:ef:99"
    ports = random.sample(range(1, 1024), 25)
    for p in ports:
        cap.add(Ether(src=amac, dst=MACS[85]) / IP(src=attacker, dst=HOSTS[85]) /
                TCP(sport=40000, dport=p, flags="S", seq=1000), gap_ns=80_000_000)
    # two MACs claim 10.10.50.85
    cap.add(Ether(src=MACS[85], dst=BCAST) / ARP(op=2, hwsrc=MACS[85], psrc=HOSTS[85], pdst=HOSTS[85]))
    cap.add(Ether(src=amac, dst=BCAST) / ARP(op=2, hwsrc=amac, psrc=HOSTS[85], pdst=HOSTS[85]))
    # 600 datagrams to one host within one second, from a second machine
    flooder, fmac = "10.10.50.98", "00:de:ad:be:ef:98"
    for i in range(600):
        cap.add(Ether(src=fmac, dst=MACS[83]) / IP(src=flooder, dst=HOSTS[83]) /
                UDP(sport=5555, dport=9), gap_ns=1_500_000)
    cap.write("scan.pcap")


def build_corpus():
    """>= 200 frames covering every layer plus malformed and truncated cases."""
    random.seed(2016)
    cap = Capture(Clock(BASE_SEC + 300, 5))
    H = list(range(81, 86))

    for _ in range(6):
        a, b = random.sample(H, 2)
        arp_exchange(cap, a, b)
    # gratuitous ARP
    cap.add(Ether(src=MACS[83], dst=BCAST) / ARP(op=1, hwsrc=MACS[83], psrc=HOSTS[83], pdst=HOSTS[83]))

    for seq in range(1, 5):
        ping(cap, 84, 85, ident=1, seq=seq)
    ping(cap, 81, 83, ident=0x1d2f, seq=1, reply=False)
    ping(cap, 82, "10.10.51.7", ident=9, seq=3, reply=False)
    # destination unreachable carrying the offending header
    inner = bytes(ip(82, "10.10.51.7") / UDP(sport=33434, dport=33435))[:28]
    cap.add(eth(ROUTER_MAC, 82) / ip(ROUTER_IP, 82) / ICMP(type=3, code=1) / Raw(inner))
    cap.add(eth(ROUTER_MAC, 81) / ip(ROUTER_IP, 81) / ICMP(type=3, code=3) / Raw(inner))
    cap.add(eth(ROUTER_MAC, 84) / ip(ROUTER_IP, 84) / ICMP(type=11, code=0) / Raw(inner))

    for i in range(8):
        dns_pair(cap, random.choice(H), f"host{i}.ebsu.local")
    for _ in range(6):
        a = random.choice(H)
        cap.add(eth(a, BCAST) / ip(a, "10.10.50.255") / UDP(sport=138, dport=138) / Raw(bytes(random.randrange(256) for _ in range(40))))
    for _ in range(4):
        a, b = random.sample(H, 2)
        cap.add(eth(a, b) / ip(a, b) / UDP(sport=random.randint(1024, 65535), dport=random.randint(1024, 65535)) /
                Raw(bytes(random.randrange(256) for _ in range(random.randint(0, 64)))))
    # UDP with checksum disabled
    cap.add(eth(81, 82) / ip(81, 82) / UDP(sport=514, dport=514, chksum=0) / Raw(b"<13>syslog test"))

    tcp_session(cap, 81, 85, 80, http_get("/index.html"), http_resp(200, "OK"))
    tcp_session(cap, 82, 85, 80, http_get("/images/logo.png"), http_resp(404, "Not Found", "missing"))
    tcp_session(cap, 83, 85, 8080, http_post("/portal/login", "u=staff&p=secret"), http_resp(302, "Found", ""))
    tcp_session(cap, 84, 85, 8000, http_get("/reports?id=7"), http_resp(200, "OK", "report"))
    tcp_session(cap, 81, 84, 445, binary=bytes(random.randrange(256) for _ in range(120)))
    tcp_session(cap, 82, 85, 80, binary=b"\x16\x03\x01\x02\x00\x01\x00\x01\xfc\x03\x03" + bytes(40))
    tcp_session(cap, 83, 84, 80, binary=b"GET" + bytes(20))
    # responses without headers, HEAD request, lowercase method is not HTTP
    tcp_session(cap, 84, 85, 80, b"HEAD / HTTP/1.0\r\n\r\n", b"HTTP/1.0 204 No Content\r\n\r\n")
    tcp_session(cap, 81, 85, 80, binary=b"get / HTTP/1.1\r\n\r\n")
    # RST to a closed port
    cap.add(eth(82, 84) / ip(82, 84) / TCP(sport=50000, dport=23, flags="S", seq=77))
    cap.add(eth(84, 82) / ip(84, 82) / TCP(sport=23, dport=50000, flags="RA", seq=0, ack=78, window=0))

    # IPv4 options
    for a in (81, 82, 83):
        cap.add(eth(a, "01:00:5e:00:00:16") / ip(a, "224.0.0.22", ttl=1, proto=2,
                                                     options=[IPOption_Router_Alert()]) /
                Raw(b"\x22\x00\xf9\x02\x00\x00\x00\x01\x04\x00\x00\x00\xef\xff\xff\xfa"))
    # fragments
    frags = (ip(81, 85, id=4242) / UDP(sport=4000, dport=4001) / Raw(bytes(range(200)) * 10))
    from scapy.all import fragment
    for f in fragment(frags, fragsize=600)[:4]:
        cap.add(eth(81, 85) / f)
    # other IP protocols
    cap.add(eth(81, 85) / ip(81, 85, proto=47) / Raw(b"\x00\x00\x08\x00" + bytes(20)))
    cap.add(eth(82, 85) / ip(82, 85, proto=89) / Raw(bytes(44)))
    # non-IP ethertypes and 802.3
    cap.add(Ether(src=MACS[81], dst="33:33:00:00:00:01", type=0x86DD) / Raw(bytes(56)))
    cap.add(Ether(src=MACS[85], dst="01:80:c2:00:00:0e", type=0x88CC) / Raw(bytes(40)))
    cap.add(Ether(src=MACS[83], dst="01:80:c2:00:00:00") / LLC(dsap=0x42, ssap=0x42, ctrl=3) / Raw(bytes(35)))
    cap.add(Ether(src=MACS[84], dst="01:80:c2:00:00:00") / LLC(dsap=0x42, ssap=0x42, ctrl=3) / Raw(bytes(35)))

    # truncated captures (snaplen cut)
    cap.add(eth(81, 85) / ip(81, 85) / UDP(sport=53000, dport=53) / Raw(bytes(100)), cap_len=10)
    cap.add(eth(82, 85) / ip(82, 85) / TCP(sport=51000, dport=80), cap_len=24)
    cap.add(eth(83, 85) / ip(83, 85) / TCP(sport=51001, dport=80, flags="S"), cap_len=40)
    cap.add(eth(84, 85) / ip(84, 85) / UDP(sport=51002, dport=161) / Raw(bytes(60)), cap_len=38)
    cap.add(eth(81, 85) / ip(81, 85) / ICMP(type=8, id=5, seq=5) / Raw(bytes(56)), cap_len=38)
    cap.add(eth(85, 81) / ip(85, 81, flags="DF") / TCP(sport=80, dport=52000, flags="PA") /
            Raw(http_resp(200, "OK", "x" * 400)), cap_len=96)
    cap.add(eth(81, 85) / ip(81, 85, flags="DF") / TCP(sport=52001, dport=80, flags="PA") /
            Raw(http_get("/a/very/long/path/that/goes/on/and/on")), cap_len=64)
    cap.add(Ether(src=MACS[82], dst=BCAST) / ARP(op=1, hwsrc=MACS[82], psrc=HOSTS[82], pdst=HOSTS[84]), cap_len=30)
    cap.add(eth(82, 85) / ip(82, 85) / UDP(sport=51003, dport=69) / Raw(bytes(20)), cap_len=40)
    cap.add(eth(84, 85) / ip(84, 85) / UDP(sport=51004, dport=514) / Raw(b"x" * 30), cap_len=48)

    # checksum corruption (IPv4 header checksum lives at IP offset 10)
    for a, b in ((81, 85), (82, 84), (83, 81), (84, 82), (85, 83)):
        pkt = bytes(eth(a, b) / ip(a, b) / UDP(sport=40000 + a, dport=7) / Raw(b"echo"))
        cap.add(corrupt(pkt, 14 + 10))
    pkt = bytes(eth(81, 85) / ip(81, 85) / ICMP(type=8, id=77, seq=1) / Raw(bytes(8)))
    cap.add(corrupt(pkt, 14 + 10 + 1))
    for a in (81, 82, 83):
        pkt = bytes(eth(a, 85) / ip(a, 85) / UDP(sport=41000, dport=9999) / Raw(b"payload"))
        cap.add(corrupt(pkt, 14 + 20 + 6))
    for a in (84, 85, 81):
        pkt = bytes(eth(a, 82) / ip(a, 82) / TCP(sport=42000, dport=22, flags="S", seq=5))
        cap.add(corrupt(pkt, 14 + 20 + 16))
    pkt = bytes(eth(82, 85) / ip(82, 85) / TCP(sport=42001, dport=80, flags="PA") / Raw(http_get("/bad-sum")))
    cap.add(corrupt(pkt, 14 + 20 + 17))

    # malformed headers
    for a in (81, 82):
        pkt = bytes(eth(a, 85) / ip(a, 85) / UDP(sport=1, dport=2))
        cap.add(set_bytes(pkt, 14, b"\x65"))                 # version 6 under 0x0800
    for a in (83, 84):
        pkt = bytes(eth(a, 85) / ip(a, 85) / UDP(sport=1, dport=2))
        cap.add(set_bytes(pkt, 14, b"\x44"))                 # ihl 4
    for a in (81, 83):
        pkt = bytes(eth(a, 85) / ip(a, 85) / UDP(sport=3, dport=4) / Raw(b"abc"))
        cap.add(set_bytes(pkt, 14 + 20 + 4, b"\x00\x07"))    # UDP length 7
    for a in (82, 84):
        pkt = bytes(eth(a, 85) / ip(a, 85) / TCP(sport=5, dport=6))
        cap.add(set_bytes(pkt, 14 + 20 + 12, b"\x40"))       # data offset 4
    for a in (81, 85):
        pkt = bytes(Ether(src=MACS[a], dst=BCAST) / ARP(op=1, hwtype=6, hwsrc=MACS[a], psrc=HOSTS[a], pdst=HOSTS[82]))
        cap.add(pkt)
    # short garbage
    cap.add(bytes([0xde, 0xad, 0xbe, 0xef, 0x00, 0x01, 0x02, 0x03, 0x04, 0x05]))
    cap.add(bytes(13))
    cap.add(b"")

    # fill to a comfortable size with more ordinary traffic
    while len(cap.frames) < 230:
        kind = random.random()
        a, b = random.sample(H, 2)
        if kind < 0.35:
            dns_pair(cap, a, f"svc{random.randint(0, 99)}.ebsu.local")
        elif kind < 0.55:
            ping(cap, a, b, ident=random.randint(0, 65535), seq=random.randint(0, 65535))
        elif kind < 0.75:
            arp_exchange(cap, a, b)
        else:
            cap.add(eth(a, b) / ip(a, b, flags="DF") /
                    TCP(sport=random.randint(1024, 65535), dport=random.choice([22, 139, 445, 3389]), flags="PA",
                        seq=random.randint(0, 2**32 - 1), ack=random.randint(0, 2**32 - 1)) /
                    Raw(bytes(random.randrange(256) for _ in range(random.randint(1, 80)))))
    cap.write("corpus.pcap")


def build_big_endian_usec():
    """Same frames as mixed.pcap, written big-endian with microsecond stamps."""
    random.seed(11)
    frames = []
    src = OUT / "mixed.pcap"
    raw = src.read_bytes()
    off = 24
    while off < len(raw):
        sec, nsec, incl, orig = struct.unpack_from("<IIII", raw, off)
        off += 16
        frames.append((sec, nsec // 1000, raw[off:off + incl], orig))
        off += incl
    out = bytearray(struct.pack(">IHHiIII", 0xA1B2C3D4, 2, 4, 0, 0, 65535, 1))
    for sec, usec, data, orig in frames:
        out += struct.pack(">IIII", sec, usec, len(data), orig) + data
    (OUT / "mixed_be_usec.pcap").write_bytes(bytes(out))
    print(f"wrote {OUT / 'mixed_be_usec.pcap'} ({len(frames)} frames)")


def main():
    OUT.mkdir(exist_ok=True)
    build_ping()
    build_mixed()
    build_scan()
    build_corpus()
    build_big_endian_usec()
    return 0


if __name__ == "__main__":
    sys.exit(main())
