"""Derives the integer session counts behind the fixture logs.

For each published percentage we search the smallest integer count whose
ratio to the cohort total reproduces the figure under half-up rounding at
the figure's own precision; where no integer reproduces it exactly we take
the nearest count and flag it.  The chosen counts are frozen into
src/decoyweaver/fixtures.py and documented in fixtures/COUNTS.md.

Gate figures (acceptance-tested at +/-0.05 pp on 1-dp half-up rounded
report values) are marked GATE and checked against that tolerance.

Run:  python tools/oracles/fixture_counts.py
"""

from decimal import Decimal, ROUND_HALF_UP


def rnd(x: float, places: int) -> float:
    q = Decimal(str(x)).quantize(Decimal("0.1") ** places, rounding=ROUND_HALF_UP)
    return float(q)


def derive(label: str, published: float, total: int, places: int, gate: bool = False) -> int:
    target = published
    best, best_err = None, None
    exact = []
    for n in range(0, total + 1):
        pct = 100.0 * n / total
        if rnd(pct, places) == target:
            exact.append(n)
        err = abs(pct - target)
        if best_err is None or err < best_err:
            best, best_err = n, err
    if exact:
        n = exact[0]
        note = f"exact under {places}-dp rounding (candidates {exact[:4]}{'...' if len(exact) > 4 else ''})"
    else:
        n = best
        note = f"NO EXACT INTEGER, nearest (off by {best_err:.3f} pp)"
    pct = 100.0 * n / total
    gate_note = ""
    if gate:
        # acceptance compares the 1-dp half-up report value to the published figure
        gate_err = abs(rnd(pct, 1) - published)
        gate_note = f"  GATE |{rnd(pct, 1)} - {published}| = {gate_err:.3f} {'OK' if gate_err <= 0.05 else 'FAIL'}"
    print(f"{label}: {n}/{total} = {pct:.4f}% ~ {published}  [{note}]{gate_note}")
    return n


print("== webshop (230 sessions) ==")
t1 = 230
no_attack = derive("no attack / never engaged", 53.9, t1, 1, gate=True)
sqli_try = derive("sql injection attempted", 24.3, t1, 1, gate=True)
sqli_ok = derive("sql injection succeeded", 23.9, t1, 1, gate=True)
xss_ok = derive("stored xss succeeded", 0.86, t1, 2, gate=True)
xss_try = derive("stored xss attempted", 13.4, t1, 1)
robots = derive("robots path pulled", 3.9, t1, 1)
robots_admin = derive("robots path -> admin", 0.86, t1, 2)
js_seen = derive("checker script pulled", 4.34, t1, 2)
js_admin = derive("checker script -> admin", 1.73, t1, 2)
attackers = sqli_try + xss_try + robots + js_seen
print(f"attacker groups sum: {sqli_try}+{xss_try}+{robots}+{js_seen} = {attackers}; "
      f"bounces = {t1 - attackers} (no-attack target {no_attack}) "
      f"{'OK' if t1 - attackers == no_attack else 'MISMATCH'}")
admin_total = sqli_ok + robots_admin + js_admin
second_site = round(0.21 * admin_total)
print(f"admin reachers = {sqli_ok}+{robots_admin}+{js_admin} = {admin_total}; all download the db dump")
print(f"second-site followers: 21% of {admin_total} -> {second_site} ({100*second_site/admin_total:.1f}%)")
succ_attack = sqli_ok + robots_admin + js_admin + xss_ok
print(f"sessions with any successful attack: {succ_attack}/{t1} = {100*succ_attack/t1:.2f}% (published 27.9, informational)")
print(f"any-attack rate: {attackers}/{t1} = {100*attackers/t1:.2f}% (published 46, informational)")

print()
print("== ftp-depot (789 sessions) ==")
t2 = 789
ftp_ok = derive("ftp login succeeded", 20.7, t2, 1, gate=True)
db_pull = derive("db filler downloaded (of successful)", 67.0, ftp_ok, 0)
scan_pull = derive("scan file downloaded (of successful)", 12.8, ftp_ok, 1)
csv_pull = derive("card csv downloaded (of successful)", 20.12, ftp_ok, 2)
print(f"successful split: db {db_pull} + scan {scan_pull} + csv {csv_pull} = {db_pull + scan_pull + csv_pull} of {ftp_ok}")
site_sqli = derive("planted-site sql attack (of successful)", 66.36, ftp_ok, 2)
site_xss = derive("planted-site xss attack (of successful)", 2.72, ftp_ok, 2)
print(f"site attackers must fit in db-pullers: sqli {site_sqli} <= {db_pull}: "
      f"{'OK' if site_sqli <= db_pull else 'OVERFLOW - cap at db_pull and document'}")

print()
print("== iot-fleet (1084 sessions) ==")
t3 = 1084
dev_ok = derive("front device accessed", 33.11, t3, 2, gate=True)
broker = derive("broker reached (of successful)", 10.8, dev_ok, 1)
print(f"scan file at broker: {broker}/{broker} = 100.0%  GATE pct_of_previous == 100.0")
web_ftp = derive("misled to web/ftp targets (of scan readers)", 56.4, broker, 1)
nodes = derive("attacked 'secured' nodes (of scan readers)", 2.59, broker, 2)
dropped = derive("dropped at broker stage (of scan readers)", 43.5, broker, 1)
print(f"stage-4 split: web/ftp {web_ftp} + nodes {nodes} + dropped {dropped} = {web_ftp + nodes + dropped} of {broker} "
      f"(published bases overlap; reconcile to {broker} and document)")

print()
print("== dwell targets (exact by construction) ==")
for name, total, mean in (("webshop", t1, 29.6), ("ftp-depot", t2, 9.36), ("iot-fleet", t3, 41.3)):
    ms = round(total * mean * 60000)
    print(f"{name}: sum of per-session dwell must equal {total} * {mean} min = {ms} ms")
