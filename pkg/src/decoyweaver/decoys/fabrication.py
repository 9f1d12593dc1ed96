"""Fabricated bait content.

Everything produced here is synthetic.  Card numbers are generated under
reserved sandbox IIN prefixes and made Luhn-valid so they survive a
casual checksum test, but they can never collide with a real issuer
range.  Names, emails and addresses come from fixed fictional word lists
with reserved example domains.  All generators are deterministic in
their seed.
"""

from __future__ import annotations

import io
import random
import sqlite3
import tempfile
from pathlib import Path
from typing import Any, Iterator, Sequence

#: sandbox-only issuer prefixes (the classic test card families)
TEST_CARD_IINS = ("400000", "411111")

FILLER_CHUNK = 64 * 1024
FILLER_DEFAULT_SIZE = 16 * 2 ** 20
FILLER_MIN_SIZE = 1024


def luhn_check_digit(body: str) -> int:
    """Check digit that makes ``body + digit`` Luhn-valid."""
    total = 0
    for i, ch in enumerate(reversed(body)):
        d = int(ch)
        if i % 2 == 0:  # positions counted from the check digit, which is next
            d *= 2
            if d > 9:
                d -= 9
        total += d
    return (10 - total % 10) % 10


def luhn_valid(number: str) -> bool:
    digits = [c for c in number if c.isdigit()]
    if len(digits) < 2 or len(digits) != len(number.replace(" ", "")):
        return False
    total = 0
    for i, ch in enumerate(reversed(digits)):
        d = int(ch)
        if i % 2 == 1:
            d *= 2
            if d > 9:
                d -= 9
        total += d
    return total % 10 == 0


def fake_card_number(rng: random.Random) -> str:
    """16-digit Luhn-valid number under a designated test IIN."""
    iin = rng.choice(TEST_CARD_IINS)
    body = iin + "".join(str(rng.randrange(10)) for _ in range(9))
    return body + str(luhn_check_digit(body))


def fake_expiry(rng: random.Random) -> str:
    return f"{rng.randrange(1, 13):02d}/{rng.randrange(27, 32)}"


def fake_cvv(rng: random.Random) -> str:
    return f"{rng.randrange(1000):03d}"


def fake_monetary(rng: random.Random, lo: float = 5.0, hi: float = 9000.0) -> str:
    """A synthetic currency amount; never sourced from real data."""
    cents = rng.randrange(int(lo * 100), int(hi * 100))
    return f"{cents // 100}.{cents % 100:02d}"


_FIRST = ("Mara", "Jonte", "Priva", "Oleg", "Sunniva", "Tariq", "Belle", "Casimir",
          "Dree", "Elwin", "Fenna", "Gustav", "Hilde", "Ivo", "Jorun", "Klara",
          "Lovis", "Milo", "Nadia", "Oskar", "Petra", "Quirin", "Runa", "Sem")
_LAST = ("Varen", "Oduya", "Lindqvist", "Marsh", "Petrov", "Hanau", "Solheim",
         "Brekke", "Calloway", "Dijkstra", "Eriksen", "Falk", "Greve", "Holm",
         "Iversen", "Jansen", "Kolstad", "Lunde", "Moen", "Nyberg")
_CITY = ("Havensport", "Drumlin", "Wexbridge", "Norholt", "Saltmere", "Eastquay",
         "Fernby", "Gorsevale", "Lindenmoor", "Tarnwick")
_STREET = ("Alder Row", "Birch Lane", "Cooper Street", "Dock Road", "Elm Court",
           "Forge Way", "Garnet Close", "Harbor Walk")
_DOMAINS = ("example.com", "example.net", "example.org")


def fake_customer_records(count: int, seed: int) -> list[dict[str, Any]]:
    """Deterministic roster of fictional customers with synthetic cards."""
    rng = random.Random(seed)
    records = []
    for i in range(1, count + 1):
        first, last = rng.choice(_FIRST), rng.choice(_LAST)
        records.append({
            "id": i,
            "name": f"{first} {last}",
            "email": f"{first.lower()}.{last.lower()}{rng.randrange(10, 99)}@{rng.choice(_DOMAINS)}",
            "street": f"{rng.randrange(1, 240)} {rng.choice(_STREET)}",
            "city": rng.choice(_CITY),
            "card_number": fake_card_number(rng),
            "card_expiry": fake_expiry(rng),
            "cvv": fake_cvv(rng),
            "balance": fake_monetary(rng),
        })
    return records


CSV_COLUMNS = ("id", "name", "email", "street", "city",
               "card_number", "card_expiry", "cvv", "balance")


def records_csv(records: Sequence[dict[str, Any]]) -> str:
    import csv

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        writer.writerow({k: rec[k] for k in CSV_COLUMNS})
    return buf.getvalue()


def sqlite_db_bytes(count: int, seed: int) -> bytes:
    """A real SQLite file full of fabricated customers.

    Built in a temp file because the serialized image must be a valid
    database an attacker can actually open.
    """
    records = fake_customer_records(count, seed)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "customers.db"
        con = sqlite3.connect(path)
        try:
            con.execute(
                "CREATE TABLE customers (id INTEGER PRIMARY KEY, name TEXT, email TEXT,"
                " street TEXT, city TEXT, card_number TEXT, card_expiry TEXT,"
                " cvv TEXT, balance TEXT)")
            con.executemany(
                "INSERT INTO customers VALUES (:id, :name, :email, :street, :city,"
                " :card_number, :card_expiry, :cvv, :balance)", records)
            con.commit()
        finally:
            con.close()
        return path.read_bytes()


def filler_stream(size: int = FILLER_DEFAULT_SIZE, seed: int = 1,
                  planted_urls: Sequence[str] = ()) -> Iterator[bytes]:
    """Chunked pseudo-random blob with readable URLs spliced in.

    The blob is deterministic in (size, seed, planted_urls) and yielded
    in 64 KiB chunks so a multi-gigabyte tarpit download never holds more
    than one chunk in memory.  Each planted URL lands at a fixed offset,
    padded with NULs so a strings(1) pass finds it.
    """
    size = max(FILLER_MIN_SIZE, int(size))
    markers = {}
    if planted_urls:
        stride = size // (len(planted_urls) + 1)
        for i, url in enumerate(planted_urls, start=1):
            blob = b"\x00\x00" + url.encode("utf-8", "replace") + b"\x00\x00"
            offset = min(i * stride, size - len(blob))
            markers[max(0, offset)] = blob

    rng = random.Random(seed)
    sent = 0
    while sent < size:
        n = min(FILLER_CHUNK, size - sent)
        chunk = bytearray(rng.randbytes(n))
        for offset, blob in markers.items():
            # copy whatever slice of the marker overlaps this chunk, so a
            # URL straddling a chunk boundary still comes out intact
            start = max(offset, sent)
            end = min(offset + len(blob), sent + n)
            if start < end:
                chunk[start - sent:end - sent] = blob[start - offset:end - offset]
        sent += n
        yield bytes(chunk)


def filler_bytes(size: int, seed: int, planted_urls: Sequence[str] = ()) -> bytes:
    """Materialized filler_stream; only sensible for desk-scale sizes."""
    return b"".join(filler_stream(size, seed, planted_urls))
