#!/usr/bin/env python3
"""Export reference dissections of the pcap fixtures.

For every frame in testdata/<name>.pcap this writes
  testdata/<name>.columns.tsv   index, source, destination, protocol, length
  testdata/<name>.fields.jsonl  per-layer header fields as scapy decodes them

Field values come from scapy's dissectors. The decision of how deep a frame
decodes (truncation, bad version, bad lengths, fragments, HTTP start-line
grammar) is applied here from raw byte counts so the export does not depend
on the C++ code under test.

Usage: python3 scripts/reference_dissect.py [name ...]
       python3 scripts/reference_dissect.py --count FILE   (print frame count)
"""

import json
import re
import struct
import sys
from pathlib import Path

from scapy.layers.inet import ICMP, IP, TCP, UDP
from scapy.layers.l2 import ARP, Ether
from scapy.utils import RawPcapReader

TESTDATA = Path(__file__).resolve().parent.parent / "testdata"

METHODS = "GET|POST|PUT|DELETE|HEAD|OPTIONS|PATCH|TRACE|CONNECT"
REQUEST_LINE = re.compile(rb"^(%s) [\x21-\x7e]+ HTTP/[0-9]\.[0-9]$" % METHODS.encode())
STATUS_LINE = re.compile(rb"^HTTP/[0-9]\.[0-9] [0-9]{3}( [\t\x20-\x7e\x80-\xff]*)?$")


def first_line(payload):
    nl = payload.find(b"\n")
    line = payload if nl < 0 else payload[:nl]
    if line.endswith(b"\r"):
        line = line[:-1]
    return line


def http_fields(payload):
    line = first_line(payload)
    m = REQUEST_LINE.match(line)
    if m:
        method, target, version = line.decode("latin-1").split(" ")
        return {"kind": "request", "method": method, "target": target, "version": version}
    if STATUS_LINE.match(line):
        text = line.decode("latin-1")
        parts = text.split(" ", 2)
        return {"kind": "response", "version": parts[0], "status": int(parts[1]),
                "reason": parts[2] if len(parts) > 2 else ""}
    return None


def dissect(raw, wirelen, index):
    fields = {"index": index, "length": wirelen}
    layers = []
    src = dst = ""
    if len(raw) < 14:
        return "", "", "RAW", fields
    eth = Ether(raw[:14])
    fields["eth"] = {"dst": eth.dst, "src": eth.src, "type": eth.type}
    layers.append("Ethernet")
    src, dst = eth.src, eth.dst
    body = raw[14:]

    if eth.type == 0x0806 and len(body) >= 8:
        hwtype, ptype, hwlen, plen = struct.unpack("!HHBB", body[:6])
        if hwtype == 1 and ptype == 0x0800 and hwlen == 6 and plen == 4 and len(body) >= 28:
            arp = ARP(body[:28])
            fields["arp"] = {"op": arp.op, "hwsrc": arp.hwsrc, "psrc": arp.psrc,
                             "hwdst": arp.hwdst, "pdst": arp.pdst}
            layers.append("ARP")
            src, dst = arp.psrc, arp.pdst

    elif eth.type == 0x0800 and len(body) >= 20:
        version, ihl = body[0] >> 4, body[0] & 0x0F
        if version == 4 and ihl >= 5 and len(body) >= ihl * 4:
            ip = IP(body)
            fields["ipv4"] = {"ihl": ip.ihl, "tos": ip.tos, "len": ip.len, "id": ip.id,
                              "flags": int(ip.flags), "frag": ip.frag, "ttl": ip.ttl,
                              "proto": ip.proto, "chksum": ip.chksum, "src": ip.src, "dst": ip.dst}
            layers.append("IPv4")
            src, dst = ip.src, ip.dst
            end = min(ip.len, len(body)) if ip.len >= ihl * 4 else len(body)
            payload = body[ihl * 4:end]
            fragment = (int(ip.flags) & 1) or ip.frag > 0
            if not fragment:
                if ip.proto == 1 and len(payload) >= 8:
                    icmp = ICMP(payload)
                    f = {"type": icmp.type, "code": icmp.code, "chksum": icmp.chksum}
                    if icmp.type in (0, 8):
                        f.update({"id": icmp.id, "seq": icmp.seq})
                    fields["icmp"] = f
                    layers.append("ICMP")
                elif ip.proto == 17 and len(payload) >= 8:
                    udp = UDP(payload[:8])
                    if udp.len >= 8:
                        fields["udp"] = {"sport": udp.sport, "dport": udp.dport, "len": udp.len,
                                         "chksum": udp.chksum}
                        layers.append("UDP")
                elif ip.proto == 6 and len(payload) >= 20:
                    doff = payload[12] >> 4
                    if doff >= 5 and len(payload) >= doff * 4:
                        tcp = TCP(payload[:doff * 4])
                        fields["tcp"] = {"sport": tcp.sport, "dport": tcp.dport, "seq": tcp.seq,
                                         "ack": tcp.ack, "dataofs": tcp.dataofs, "flags": int(tcp.flags),
                                         "window": tcp.window, "chksum": tcp.chksum, "urgptr": tcp.urgptr}
                        layers.append("TCP")
                        http = http_fields(payload[doff * 4:])
                        if http is not None:
                            fields["http"] = http
                            layers.append("HTTP")

    return src, dst, layers[-1], fields


def export(name):
    pcap = TESTDATA / f"{name}.pcap"
    rows = []
    with open(TESTDATA / f"{name}.fields.jsonl", "w") as fj:
        for index, (raw, meta) in enumerate(RawPcapReader(str(pcap)), start=1):
            src, dst, proto, fields = dissect(raw, meta.wirelen, index)
            rows.append(f"{index}\t{src}\t{dst}\t{proto}\t{meta.wirelen}")
            fj.write(json.dumps(fields, sort_keys=True) + "\n")
    (TESTDATA / f"{name}.columns.tsv").write_text("\n".join(rows) + "\n")
    print(f"exported {name}: {len(rows)} frames")


def count(path):
    n = sum(1 for _ in RawPcapReader(str(path)))
    print(n)


def main(argv):
    if len(argv) >= 2 and argv[0] == "--count":
        for p in argv[1:]:
            count(p)
        return 0
    names = argv or ["corpus", "ping", "mixed", "scan"]
    for n in names:
        export(n)
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
