"""Reference Luhn mod-10 check, independent of the package implementation.

Used to freeze known-good/known-bad examples into tests and to cross-check
the fabricated-record generator.  The classic sandbox PANs below must pass;
single-digit mutations must fail.

Run:  python tools/oracles/luhn_oracle.py
"""


def luhn_ok(number: str) -> bool:
    digits = [int(c) for c in number if c.isdigit()]
    if len(digits) < 2:
        return False
    total = 0
    for i, d in enumerate(reversed(digits)):
        if i % 2 == 1:
            d *= 2
            if d > 9:
                d -= 9
        total += d
    return total % 10 == 0


KNOWN_GOOD = [
    "4111111111111111",
    "4000000000000002",
    "4242424242424242",
    "79927398713",
]

if __name__ == "__main__":
    for pan in KNOWN_GOOD:
        print(pan, "->", luhn_ok(pan))
    mutated = "4111111111111112"
    print(mutated, "->", luhn_ok(mutated), "(mutation, expect False)")
    # check digit computation for a 15-digit body
    body = "400000123456789"
    for check in "0123456789":
        if luhn_ok(body + check):
            print(f"check digit for {body} -> {check}")
